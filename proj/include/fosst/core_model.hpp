#pragma once

#include "fosst/csv.hpp"
#include "fosst/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fosst {

struct SamplingSpec {
    double fs = 0.0;          ///< Hz
    std::size_t length = 0;   ///< L
    double t0 = 0.0;          ///< epoch offset of sample 0, seconds

    double duration() const noexcept { return static_cast<double>(length) / fs; }
    double time(std::size_t m) const noexcept { return t0 + static_cast<double>(m) / fs; }

    void validate() const {
        if (!(fs > 0.0) || !std::isfinite(fs)) throw ConfigError("core_model", "sampling rate must be positive");
        if (length < 2) throw ConfigError("core_model", "at least two samples are required");
    }
};

enum class ChannelKind { ActivePower, ReactivePower, VoltageMag, VoltageAngle, CurrentMag, CurrentAngle, Frequency };

inline bool is_angle(ChannelKind kind) noexcept {
    return kind == ChannelKind::VoltageAngle || kind == ChannelKind::CurrentAngle;
}

enum class AngleUnit { Radians, Degrees };

inline std::string lowercase(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline AngleUnit parse_angle_unit(const std::string& unit) {
    const auto u = lowercase(unit);
    if (u == "rad" || u == "radian" || u == "radians") return AngleUnit::Radians;
    if (u == "deg" || u == "degree" || u == "degrees" || u == "\xC2\xB0") return AngleUnit::Degrees;
    throw ConfigError("core_model", "unknown angle unit '" + unit + "'");
}

struct Channel {
    std::string id;
    ChannelKind kind = ChannelKind::ActivePower;
    std::string unit;
    std::vector<double> samples;  ///< NaN marks a missing value
};

/// A monitored branch oriented from_bus -> to_bus. P and Q are measured at
/// from_bus; v_mag and v_ang are the from_bus voltage phasor (radians).
struct Branch {
    std::string id;
    std::string from_bus;
    std::string to_bus;
    Channel p;
    Channel q;
    Channel v_mag;
    Channel v_ang;
};

struct EventDataset {
    SamplingSpec spec;
    std::vector<Branch> branches;
    double t_event = 0.0;  ///< pre-event data occupies [0, t_event) seconds from the first sample

    std::size_t pre_event_samples() const noexcept {
        return static_cast<std::size_t>(std::ceil(t_event * spec.fs - 1e-9));
    }

    void validate() const {
        spec.validate();
        if (branches.empty()) throw ConfigError("core_model", "dataset has no branches");
        if (!(t_event > 0.0) || !(t_event < spec.duration())) {
            throw ConfigError("core_model", "pre-event interval must be nonempty and shorter than the record");
        }
        for (const auto& b : branches) {
            for (const Channel* c : {&b.p, &b.q, &b.v_mag, &b.v_ang}) {
                if (c->samples.size() != spec.length) {
                    throw DataError("core_model", "channel " + c->id + " length differs from dataset length");
                }
            }
        }
    }
};

// ---------------------------------------------------------------------------
// Phasor conversion

struct PowerFlow {
    double p;
    double q;
};

/// Complex power S = V conj(I) from magnitude/angle phasors (angles in radians).
inline PowerFlow power_from_phasors(double v_mag, double v_ang, double i_mag, double i_ang) noexcept {
    const double s = v_mag * i_mag;
    const double d = v_ang - i_ang;
    return {s * std::cos(d), s * std::sin(d)};
}

// ---------------------------------------------------------------------------
// Preprocessing

/// Removes 2*pi (or 360 degree) jumps. Output minus input is an integer
/// number of periods at every sample; NaN samples are left in place.
inline Channel unwrap_angles(const Channel& channel) {
    if (!is_angle(channel.kind)) {
        throw ConfigError("core_model", "unwrap_angles applied to non-angle channel " + channel.id);
    }
    const double period = parse_angle_unit(channel.unit) == AngleUnit::Degrees ? 360.0 : 2.0 * std::numbers::pi;
    Channel out = channel;
    double prev = std::numeric_limits<double>::quiet_NaN();
    double turns = 0.0;
    for (auto& x : out.samples) {
        if (std::isnan(x)) continue;
        if (!std::isnan(prev)) turns -= std::round((x - prev) / period);
        prev = x;
        x += turns * period;
    }
    return out;
}

namespace detail {

inline double median_of(std::vector<double>& v) {
    const auto mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

// Marks samples farther than k robust deviations from the centered-window median.
inline std::vector<bool> flag_outliers(const std::vector<double>& x, const std::vector<bool>& bad,
                                       std::size_t half, double k) {
    const std::size_t n = x.size();
    std::vector<bool> flags(n, false);
    std::vector<double> win;
    for (std::size_t i = 0; i < n; ++i) {
        if (bad[i]) continue;
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = std::min(n - 1, i + half);
        win.clear();
        for (std::size_t j = lo; j <= hi; ++j)
            if (!bad[j]) win.push_back(x[j]);
        if (win.size() < 3) continue;
        const double med = median_of(win);
        for (auto& w : win) w = std::abs(w - med);
        const double mad = 1.4826 * median_of(win);
        const double scale = std::max(mad, 1e-12 * std::max(1.0, std::abs(med)));
        if (std::abs(x[i] - med) > k * scale) flags[i] = true;
    }
    return flags;
}

// Linear interpolation across bad samples; leading/trailing runs take the nearest valid value.
inline void interpolate_bad(std::vector<double>& x, const std::vector<bool>& bad) {
    const std::size_t n = x.size();
    std::size_t i = 0;
    while (i < n) {
        if (!bad[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < n && bad[j]) ++j;
        const bool has_left = i > 0;
        const bool has_right = j < n;
        for (std::size_t t = i; t < j; ++t) {
            if (has_left && has_right) {
                const double a = x[i - 1];
                const double b = x[j];
                const double frac = static_cast<double>(t - (i - 1)) / static_cast<double>(j - (i - 1));
                x[t] = a + (b - a) * frac;
            } else {
                x[t] = has_left ? x[i - 1] : x[j];
            }
        }
        i = j;
    }
}

}  // namespace detail

/// Fills NaN gaps and replaces outliers (median +- k * 1.4826 * MAD over a
/// centered window) by linear interpolation between valid neighbours.
/// Detection is repeated until no sample is flagged, so the operation is
/// idempotent.
inline Channel repair_gaps_and_outliers(const Channel& channel, double fs, double outlier_k = 8.0,
                                        double window_s = 5.0) {
    if (!(outlier_k > 0.0)) throw ConfigError("core_model", "outlier multiplier must be positive");
    if (!(fs > 0.0)) throw ConfigError("core_model", "sampling rate must be positive");
    Channel out = channel;
    auto& x = out.samples;
    const std::size_t n = x.size();
    std::vector<bool> bad(n);
    std::size_t valid = 0;
    for (std::size_t i = 0; i < n; ++i) {
        bad[i] = !std::isfinite(x[i]);
        valid += bad[i] ? 0 : 1;
    }
    if (valid == 0) throw DataError("core_model", "channel " + channel.id + " has no valid samples");

    const auto half = static_cast<std::size_t>(std::max(1.0, std::round(0.5 * window_s * fs)));
    constexpr int max_passes = 32;
    for (int pass = 0; pass < max_passes; ++pass) {
        const auto flags = detail::flag_outliers(x, bad, half, outlier_k);
        bool any = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (flags[i]) {
                bad[i] = true;
                any = true;
            }
        }
        detail::interpolate_bad(x, bad);
        std::fill(bad.begin(), bad.end(), false);
        if (!any && pass > 0) break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Contest-format ingestion: four CSV files sharing a `time` column plus a
// topology map pairing voltage and current columns into branches.

struct BranchMapping {
    std::string id;
    std::string from_bus;
    std::string to_bus;
    std::string v_mag;
    std::string v_ang;
    std::string i_mag;
    std::string i_ang;
    std::string angle_unit = "deg";
};

struct TopologyMap {
    std::vector<BranchMapping> branches;
    std::optional<double> pre_event_s;
};

struct ContestFiles {
    std::filesystem::path voltage_mag;
    std::filesystem::path voltage_ang;
    std::filesystem::path current_mag;
    std::filesystem::path current_ang;

    static ContestFiles in_directory(const std::filesystem::path& dir) {
        return {dir / "voltage_mag.csv", dir / "voltage_ang.csv", dir / "current_mag.csv", dir / "current_ang.csv"};
    }
};

inline void to_json(nlohmann::json& j, const BranchMapping& b) {
    j = {{"id", b.id},       {"from_bus", b.from_bus}, {"to_bus", b.to_bus},     {"v_mag", b.v_mag},
         {"v_ang", b.v_ang}, {"i_mag", b.i_mag},       {"i_ang", b.i_ang}, {"angle_unit", b.angle_unit}};
}

inline nlohmann::json topology_to_json(const TopologyMap& topo) {
    nlohmann::json j;
    j["branches"] = topo.branches;
    if (topo.pre_event_s) j["pre_event_s"] = *topo.pre_event_s;
    return j;
}

inline TopologyMap topology_from_json(const nlohmann::json& j) {
    static const std::vector<std::string> branch_keys = {"id",    "from_bus", "to_bus", "v_mag",
                                                         "v_ang", "i_mag",    "i_ang",  "angle_unit"};
    TopologyMap topo;
    if (!j.is_object() || !j.contains("branches") || !j["branches"].is_array()) {
        throw ConfigError("core_model", "topology map needs a 'branches' array");
    }
    for (const auto& [key, value] : j.items()) {
        if (key != "branches" && key != "pre_event_s") throw ConfigError("core_model", "unknown topology key '" + key + "'");
    }
    if (j.contains("pre_event_s")) topo.pre_event_s = j["pre_event_s"].get<double>();
    for (const auto& b : j["branches"]) {
        for (const auto& [key, value] : b.items()) {
            if (std::find(branch_keys.begin(), branch_keys.end(), key) == branch_keys.end()) {
                throw ConfigError("core_model", "unknown branch key '" + key + "'");
            }
        }
        BranchMapping m;
        try {
            m.id = b.at("id").get<std::string>();
            m.from_bus = b.value("from_bus", m.id + "_from");
            m.to_bus = b.value("to_bus", m.id + "_to");
            m.v_mag = b.at("v_mag").get<std::string>();
            m.v_ang = b.at("v_ang").get<std::string>();
            m.i_mag = b.at("i_mag").get<std::string>();
            m.i_ang = b.at("i_ang").get<std::string>();
            m.angle_unit = b.value("angle_unit", std::string("deg"));
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("core_model", std::string("malformed branch entry: ") + e.what());
        }
        parse_angle_unit(m.angle_unit);
        topo.branches.push_back(std::move(m));
    }
    if (topo.branches.empty()) throw ConfigError("core_model", "topology map lists no branches");
    return topo;
}

inline TopologyMap load_topology(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("core_model", "cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("core_model", path.string() + ": " + e.what());
    }
    return topology_from_json(j);
}

namespace detail {

// Checks strictly increasing, uniform time stamps and returns the sampling rate.
inline double sampling_rate_from_time(const std::vector<double>& t, const std::string& file) {
    if (t.size() < 2) throw DataError("core_model", file + ": need at least two rows");
    for (double v : t)
        if (!std::isfinite(v)) throw DataError("core_model", file + ": missing time stamp");
    const double dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
    if (!(dt > 0.0)) throw DataError("core_model", file + ": time column not increasing");
    for (std::size_t i = 1; i < t.size(); ++i) {
        const double step = t[i] - t[i - 1];
        if (!(step > 0.0)) throw DataError("core_model", file + ": time column not strictly increasing");
        if (std::abs(step - dt) > 1e-6 * dt) throw DataError("core_model", file + ": non-uniform time step");
    }
    double fs = 1.0 / dt;
    const double snapped = std::round(fs * 1e6) / 1e6;
    if (std::abs(fs - snapped) < 1e-9 * fs) fs = snapped;
    return fs;
}

}  // namespace detail

/// Reads the four contest files and builds per-branch P/Q (from_bus side)
/// plus the from_bus voltage phasor. Angles are converted to radians;
/// missing cells stay NaN.
inline EventDataset ingest_contest_csv(const ContestFiles& files, const TopologyMap& topo,
                                       std::optional<double> t_event = std::nullopt) {
    const csv::Table vm = csv::read(files.voltage_mag);
    const csv::Table va = csv::read(files.voltage_ang);
    const csv::Table im = csv::read(files.current_mag);
    const csv::Table ia = csv::read(files.current_ang);

    const std::pair<const csv::Table*, const std::filesystem::path*> tables[] = {
        {&vm, &files.voltage_mag}, {&va, &files.voltage_ang}, {&im, &files.current_mag}, {&ia, &files.current_ang}};
    for (const auto& [table, path] : tables) {
        if (table->header.empty() || table->header.front() != "time") {
            throw DataError("core_model", path->string() + ": first column must be 'time'");
        }
        if (table->rows() != vm.rows()) {
            throw DataError("core_model", path->string() + ": row count " + std::to_string(table->rows()) +
                                              " differs from " + files.voltage_mag.string() + " (" +
                                              std::to_string(vm.rows()) + ")");
        }
    }
    const auto& time = vm.columns.front();
    const double fs = detail::sampling_rate_from_time(time, files.voltage_mag.string());
    const double dt = 1.0 / fs;
    for (const auto& [table, path] : tables) {
        const auto& t = table->columns.front();
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (!(std::abs(t[i] - time[i]) <= 1e-6 * dt)) {
                throw DataError("core_model", path->string() + ": time column disagrees with " +
                                                  files.voltage_mag.string() + " at row " + std::to_string(i + 2));
            }
        }
    }

    auto column = [](const csv::Table& table, const std::string& name,
                     const std::filesystem::path& path) -> const std::vector<double>& {
        const auto idx = table.find(name);
        if (idx == csv::Table::npos || idx == 0) {
            throw ConfigError("core_model", "topology references unknown column '" + name + "' in " + path.string());
        }
        return table.columns[idx];
    };

    EventDataset ds;
    ds.spec = {fs, time.size(), time.front()};
    const auto t_ev = t_event ? t_event : topo.pre_event_s;
    if (!t_ev) throw ConfigError("core_model", "pre-event end time not given (topology 'pre_event_s')");
    ds.t_event = *t_ev;

    for (const auto& map : topo.branches) {
        const auto& vmag = column(vm, map.v_mag, files.voltage_mag);
        const auto& vang = column(va, map.v_ang, files.voltage_ang);
        const auto& imag = column(im, map.i_mag, files.current_mag);
        const auto& iang = column(ia, map.i_ang, files.current_ang);
        const double to_rad = parse_angle_unit(map.angle_unit) == AngleUnit::Degrees ? std::numbers::pi / 180.0 : 1.0;

        Branch b;
        b.id = map.id;
        b.from_bus = map.from_bus;
        b.to_bus = map.to_bus;
        b.p = {b.id + ".P", ChannelKind::ActivePower, "pu", {}};
        b.q = {b.id + ".Q", ChannelKind::ReactivePower, "pu", {}};
        b.v_mag = {b.id + ".VM", ChannelKind::VoltageMag, "pu", vmag};
        b.v_ang = {b.id + ".VA", ChannelKind::VoltageAngle, "rad", {}};
        const std::size_t n = time.size();
        b.p.samples.resize(n);
        b.q.samples.resize(n);
        b.v_ang.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double th_v = vang[i] * to_rad;
            const auto s = power_from_phasors(vmag[i], th_v, imag[i], iang[i] * to_rad);
            b.p.samples[i] = s.p;
            b.q.samples[i] = s.q;
            b.v_ang.samples[i] = th_v;
        }
        ds.branches.push_back(std::move(b));
    }
    ds.validate();
    return ds;
}

/// Writes a dataset in the contest layout (bus voltage and branch current
/// phasors) together with topology.json, so ingest_contest_csv reads it back.
inline TopologyMap write_contest_csv(const EventDataset& ds, const std::filesystem::path& dir,
                                     AngleUnit unit = AngleUnit::Degrees) {
    std::filesystem::create_directories(dir);
    const auto files = ContestFiles::in_directory(dir);
    const double from_rad = unit == AngleUnit::Degrees ? 180.0 / std::numbers::pi : 1.0;
    const std::size_t n = ds.spec.length;

    std::vector<double> time(n);
    for (std::size_t i = 0; i < n; ++i) time[i] = ds.spec.time(i);

    csv::Table vm{{"time"}, {time}}, va{{"time"}, {time}}, im{{"time"}, {time}}, ia{{"time"}, {time}};
    TopologyMap topo;
    topo.pre_event_s = ds.t_event;
    for (const auto& b : ds.branches) {
        BranchMapping map{b.id,          b.from_bus,    b.to_bus,     b.from_bus + "_VM", b.from_bus + "_VA",
                          b.id + "_IM", b.id + "_IA", unit == AngleUnit::Degrees ? "deg" : "rad"};
        if (vm.find(map.v_mag) == csv::Table::npos) {
            vm.header.push_back(map.v_mag);
            vm.columns.push_back(b.v_mag.samples);
            va.header.push_back(map.v_ang);
            auto& ang = va.columns.emplace_back(b.v_ang.samples);
            for (auto& a : ang) a *= from_rad;
        }
        std::vector<double> i_mag(n), i_ang(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double p = b.p.samples[i];
            const double q = b.q.samples[i];
            i_mag[i] = std::hypot(p, q) / b.v_mag.samples[i];
            i_ang[i] = (b.v_ang.samples[i] - std::atan2(q, p)) * from_rad;
        }
        im.header.push_back(map.i_mag);
        im.columns.push_back(std::move(i_mag));
        ia.header.push_back(map.i_ang);
        ia.columns.push_back(std::move(i_ang));
        topo.branches.push_back(std::move(map));
    }
    csv::write(files.voltage_mag, vm);
    csv::write(files.voltage_ang, va);
    csv::write(files.current_mag, im);
    csv::write(files.current_ang, ia);
    std::ofstream(dir / "topology.json") << topology_to_json(topo).dump(2) << '\n';
    return topo;
}

/// Unwraps the voltage angle and repairs gaps/outliers on every channel.
inline EventDataset preprocess(const EventDataset& ds, double outlier_k = 8.0) {
    EventDataset out = ds;
    for (auto& b : out.branches) {
        b.v_ang = unwrap_angles(b.v_ang);
        for (Channel* c : {&b.p, &b.q, &b.v_mag, &b.v_ang}) *c = repair_gaps_and_outliers(*c, ds.spec.fs, outlier_k);
    }
    return out;
}

}  // namespace fosst
