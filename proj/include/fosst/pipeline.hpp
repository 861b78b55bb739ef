#pragma once

#include "fosst/core_model.hpp"
#include "fosst/csv.hpp"
#include "fosst/def.hpp"
#include "fosst/errors.hpp"
#include "fosst/filter.hpp"
#include "fosst/multichannel.hpp"
#include "fosst/ridge.hpp"
#include "fosst/tfr.hpp"
#include "fosst/window.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fosst {

struct FilterConfig {
    int d_min = 5;
    int d_max = 0;  ///< bins; 0 selects ceil(3 std_freq N / fs)
};

struct DefConfig {
    SlopeMethod slope = SlopeMethod::LeastSquares;
    IntervalPolicy interval;
    double margin = kDefaultSourceMargin;
};

struct PreprocessConfig {
    double outlier_k = 8.0;
    bool detrend = true;
};

/// Candidate time spreads (std of the window, seconds) tried by automatic
/// window selection.
inline const std::vector<double> kAutoSigmaStdTimes{2.0, 4.0, 6.0, 8.0, 10.0};

struct PipelineConfig {
    TfrKind kind = TfrKind::Fsst2;
    std::optional<double> sigma_s;  ///< seconds; unset selects sigma by minimum Renyi entropy
    double renyi_order = 3.0;
    int n_bins = 1024;
    double reassign_rel = 1e-6;
    double denom_rel = 1e-6;
    ThresholdConfig threshold;
    RidgeConfig ridge;
    FilterConfig filter;
    DefConfig def;
    PreprocessConfig preprocess;
};

// ---------------------------------------------------------------------------
// Configuration file: a JSON object whose keys mirror PipelineConfig.
// Unknown keys are rejected.

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError("cli", "'" + where + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        if (!allowed.contains(key)) throw ConfigError("cli", "unknown configuration key '" + where + key + "'");
    }
}

template <class T>
void read_key(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("cli", "configuration key '" + where + key + "' has the wrong type");
    }
}

}  // namespace detail

inline void apply_config_json(PipelineConfig& cfg, const nlohmann::json& j) {
    using detail::read_key;
    detail::check_keys(j, {"tfr", "sigma", "renyi_order", "n_bins", "reassign_rel", "denom_rel", "threshold", "ridge",
                           "filter", "def", "preprocess"},
                       "");
    if (j.contains("tfr")) {
        std::string kind;
        read_key(j, "tfr", kind, "");
        cfg.kind = parse_tfr_kind(kind);
    }
    if (j.contains("sigma")) {
        const auto& s = j.at("sigma");
        if (s.is_string() && s.get<std::string>() == "auto") {
            cfg.sigma_s.reset();
        } else if (s.is_number()) {
            cfg.sigma_s = s.get<double>();
        } else {
            throw ConfigError("cli", "'sigma' must be a number of seconds or \"auto\"");
        }
    }
    read_key(j, "renyi_order", cfg.renyi_order, "");
    read_key(j, "n_bins", cfg.n_bins, "");
    read_key(j, "reassign_rel", cfg.reassign_rel, "");
    read_key(j, "denom_rel", cfg.denom_rel, "");
    if (j.contains("threshold")) {
        const auto& t = j.at("threshold");
        detail::check_keys(t, {"window_hz", "window_s", "level", "stride"}, "threshold.");
        read_key(t, "window_hz", cfg.threshold.window_hz, "threshold.");
        read_key(t, "window_s", cfg.threshold.window_s, "threshold.");
        read_key(t, "level", cfg.threshold.level, "threshold.");
        read_key(t, "stride", cfg.threshold.stride, "threshold.");
    }
    if (j.contains("ridge")) {
        const auto& r = j.at("ridge");
        detail::check_keys(r, {"h_max", "u_intervals", "jumpt_s", "jumpf_hz", "maxder_hz_s", "min_duration_s",
                               "peel_half_width"},
                           "ridge.");
        read_key(r, "h_max", cfg.ridge.h_max, "ridge.");
        read_key(r, "u_intervals", cfg.ridge.u_intervals, "ridge.");
        read_key(r, "jumpt_s", cfg.ridge.jumpt_s, "ridge.");
        read_key(r, "jumpf_hz", cfg.ridge.jumpf_hz, "ridge.");
        read_key(r, "maxder_hz_s", cfg.ridge.maxder_hz_s, "ridge.");
        read_key(r, "min_duration_s", cfg.ridge.min_duration_s, "ridge.");
        read_key(r, "peel_half_width", cfg.ridge.peel_half_width, "ridge.");
    }
    if (j.contains("filter")) {
        const auto& f = j.at("filter");
        detail::check_keys(f, {"d_min", "d_max"}, "filter.");
        read_key(f, "d_min", cfg.filter.d_min, "filter.");
        read_key(f, "d_max", cfg.filter.d_max, "filter.");
    }
    if (j.contains("def")) {
        const auto& d = j.at("def");
        detail::check_keys(d, {"slope", "gamma_factor", "min_periods", "margin"}, "def.");
        if (d.contains("slope")) {
            std::string name;
            read_key(d, "slope", name, "def.");
            cfg.def.slope = parse_slope_method(name);
        }
        read_key(d, "gamma_factor", cfg.def.interval.gamma_factor, "def.");
        read_key(d, "min_periods", cfg.def.interval.min_periods, "def.");
        read_key(d, "margin", cfg.def.margin, "def.");
    }
    if (j.contains("preprocess")) {
        const auto& p = j.at("preprocess");
        detail::check_keys(p, {"outlier_k", "detrend"}, "preprocess.");
        read_key(p, "outlier_k", cfg.preprocess.outlier_k, "preprocess.");
        read_key(p, "detrend", cfg.preprocess.detrend, "preprocess.");
    }
}

inline nlohmann::json config_to_json(const PipelineConfig& cfg) {
    return {{"tfr", std::string(to_string(cfg.kind))},
            {"sigma", cfg.sigma_s ? nlohmann::json(*cfg.sigma_s) : nlohmann::json("auto")},
            {"renyi_order", cfg.renyi_order},
            {"n_bins", cfg.n_bins},
            {"reassign_rel", cfg.reassign_rel},
            {"denom_rel", cfg.denom_rel},
            {"threshold",
             {{"window_hz", cfg.threshold.window_hz},
              {"window_s", cfg.threshold.window_s},
              {"level", cfg.threshold.level},
              {"stride", cfg.threshold.stride}}},
            {"ridge",
             {{"h_max", cfg.ridge.h_max},
              {"u_intervals", cfg.ridge.u_intervals},
              {"jumpt_s", cfg.ridge.jumpt_s},
              {"jumpf_hz", cfg.ridge.jumpf_hz},
              {"maxder_hz_s", cfg.ridge.maxder_hz_s},
              {"min_duration_s", cfg.ridge.min_duration_s},
              {"peel_half_width", cfg.ridge.peel_half_width}}},
            {"filter", {{"d_min", cfg.filter.d_min}, {"d_max", cfg.filter.d_max}}},
            {"def",
             {{"slope", to_string(cfg.def.slope)},
              {"gamma_factor", cfg.def.interval.gamma_factor},
              {"min_periods", cfg.def.interval.min_periods},
              {"margin", cfg.def.margin}}},
            {"preprocess", {{"outlier_k", cfg.preprocess.outlier_k}, {"detrend", cfg.preprocess.detrend}}}};
}

inline nlohmann::json read_json_file(const std::filesystem::path& path, const std::string& module) {
    std::ifstream in(path);
    if (!in) throw DataError(module, "cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(module, path.string() + ": " + e.what());
    }
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cli", "cannot write " + path.string());
    out << j.dump(2) << '\n';
}

inline void validate_config(const PipelineConfig& cfg, double fs) {
    if (cfg.n_bins < 8) throw ConfigError("cli", "n_bins must be at least 8");
    if (cfg.sigma_s && !(*cfg.sigma_s > 0.0)) throw ConfigError("cli", "sigma must be positive");
    if (!(cfg.renyi_order > 0.0) || cfg.renyi_order == 1.0) throw ConfigError("cli", "renyi_order must be positive and != 1");
    if (!(cfg.reassign_rel >= 0.0) || !(cfg.denom_rel >= 0.0)) throw ConfigError("cli", "relative floors must be >= 0");
    percentile_window(cfg.threshold.window_hz, cfg.threshold.window_s, cfg.threshold.level, fs, cfg.n_bins);
    cfg.ridge.validate(fs);
    if (cfg.filter.d_min < 0 || cfg.filter.d_max < 0) throw ConfigError("cli", "filter widths must be >= 0");
    if (!(cfg.def.margin >= 1.0)) throw ConfigError("cli", "source margin must be >= 1");
    if (!(cfg.def.interval.gamma_factor >= 0.0) || !(cfg.def.interval.min_periods >= 0.0)) {
        throw ConfigError("cli", "interval policy values must be >= 0");
    }
}

// ---------------------------------------------------------------------------
// Stages

/// x minus its least-squares line.
inline std::vector<double> detrend_linear(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<double> out(x.begin(), x.end());
    if (n < 2) return out;
    const double t_mean = 0.5 * static_cast<double>(n - 1);
    double y_mean = 0.0;
    for (double v : x) y_mean += v;
    y_mean /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(i) - t_mean;
        sxy += d * (x[i] - y_mean);
        sxx += d * d;
    }
    const double slope = sxy / sxx;
    for (std::size_t i = 0; i < n; ++i) out[i] -= y_mean + slope * (static_cast<double>(i) - t_mean);
    return out;
}

/// Preprocessed dataset and the derived transform layout.
struct PreparedData {
    EventDataset dataset;  ///< unwrapped and repaired, not detrended
    TfrConfig tfr;
    IndexRange interior;
    IndexRange threshold_rows;  ///< pre-event rows with full window support
    std::vector<double> sigma_candidates;
    std::vector<double> sigma_entropies;

    std::vector<double> analysis_signal(const Channel& c, bool detrend) const {
        return detrend ? detrend_linear(c.samples) : c.samples;
    }
};

inline TfrConfig make_tfr_config(const PipelineConfig& cfg, double sigma, double fs) {
    TfrConfig t;
    t.n_bins = cfg.n_bins;
    t.window = make_window(sigma, fs, cfg.n_bins);
    t.kind = cfg.kind;
    t.reassign_rel = cfg.reassign_rel;
    t.denom_rel = cfg.denom_rel;
    return t;
}

inline IndexRange threshold_rows_for(const TfrConfig& t, const EventDataset& ds) {
    const auto interior = interior_rows(t.window, ds.spec.length);
    const IndexRange rows{interior.begin, std::min(ds.pre_event_samples(), interior.end)};
    if (rows.empty()) {
        throw ConfigError("multichannel", "pre-event interval has no samples with full window support (need t_event > " +
                                              std::to_string(static_cast<double>(interior.begin) / ds.spec.fs) + " s)");
    }
    return rows;
}

/// Multi-channel magnitude over the P and Q channels of every branch.
inline MtfGrid compute_mtf(const PreparedData& prep, const TfrConfig& tfr, bool detrend) {
    MtfAccumulator acc;
    for (const auto& b : prep.dataset.branches) {
        for (const Channel* c : {&b.p, &b.q}) {
            const auto x = prep.analysis_signal(*c, detrend);
            acc.add(transform(std::span<const double>(x), tfr, c->id));
        }
    }
    return std::move(acc).finish();
}

/// Preprocesses the dataset and fixes sigma, either as configured or by
/// minimum order-3 Renyi entropy of the multi-channel representation.
inline PreparedData prepare(const EventDataset& raw, const PipelineConfig& cfg) {
    raw.validate();
    validate_config(cfg, raw.spec.fs);
    PreparedData prep;
    prep.dataset = preprocess(raw, cfg.preprocess.outlier_k);
    const double fs = raw.spec.fs;
    double sigma = cfg.sigma_s.value_or(0.0);
    if (!cfg.sigma_s) {
        // Only windows that leave pre-event rows for the threshold are eligible.
        std::vector<double> grid;
        for (double std_t : kAutoSigmaStdTimes) {
            const double s = sigma_for_std_time(std_t);
            WindowSpec w;
            w.sigma = s;
            w.fs = fs;
            const auto guard = interior_rows(w, raw.spec.length).begin;
            if (guard > 0 && guard < prep.dataset.pre_event_samples()) grid.push_back(s);
        }
        if (grid.empty()) throw ConfigError("window", "no candidate window leaves pre-event rows with full support");
        PipelineConfig fsst_cfg = cfg;
        fsst_cfg.kind = TfrKind::Fsst;
        const auto sel = select_sigma(grid, fs, cfg.n_bins, raw.spec.length, [&](const WindowSpec& w, IndexRange rows) {
            TfrConfig t = make_tfr_config(fsst_cfg, w.sigma, fs);
            Grid<double> energy = compute_mtf(prep, t, cfg.preprocess.detrend).values;
            for (auto& v : energy.values()) v *= v;
            return renyi_entropy(energy, cfg.renyi_order, rows, {0, t.half_bins() + 1});
        });
        sigma = sel.sigma;
        prep.sigma_candidates = sel.candidates;
        prep.sigma_entropies = sel.entropies;
    }
    prep.tfr = make_tfr_config(cfg, sigma, fs);
    prep.interior = interior_rows(prep.tfr.window, raw.spec.length);
    prep.threshold_rows = threshold_rows_for(prep.tfr, prep.dataset);
    return prep;
}

struct TfrStage {
    MtfGrid mtf;
    SpectralThreshold gamma;
};

/// Copies bins 1..N/2-1 onto their negative-frequency mirrors so the grid is
/// fully determined by its exported half.
inline void mirror_half(Grid<double>& g) {
    const std::size_t n = g.cols();
    for (std::size_t m = 0; m < g.rows(); ++m) {
        auto row = g.row(m);
        for (std::size_t k = 1; k < (n + 1) / 2; ++k) row[n - k] = row[k];
    }
}

inline TfrStage run_tfr_stage(const PreparedData& prep, const PipelineConfig& cfg) {
    TfrStage out{compute_mtf(prep, prep.tfr, cfg.preprocess.detrend), {}};
    mirror_half(out.mtf.values);
    out.gamma = build_threshold(out.mtf.values, cfg.threshold, prep.tfr.fs(), prep.threshold_rows);
    return out;
}

inline int peel_width_for(const RidgeConfig& rc, const TfrConfig& t) {
    return rc.peel_half_width > 0 ? rc.peel_half_width
                                  : default_peel_half_width(t.kind, t.window.sigma, t.fs(), t.n_bins);
}

inline RidgeResult run_ridge_stage(const Grid<double>& mtf, std::span<const double> gamma, const TfrConfig& t,
                                   const RidgeConfig& rc) {
    return extract_ridges(mtf, gamma, rc, {t.fs(), t.n_bins}, peel_width_for(rc, t));
}

/// Onset sample of each ridge from the band magnitude of the grid it was
/// extracted from, smoothed over one window standard deviation.
inline std::vector<std::size_t> ridge_onsets(std::span<const Ridge> ridges, const Grid<double>& mtf,
                                             const TfrConfig& t, int peel_half_width) {
    const auto smooth = static_cast<std::size_t>(std::lround(window_stats(t.window.sigma).std_time * t.fs()));
    std::vector<std::size_t> out;
    for (const auto& r : ridges) out.push_back(estimate_onset(r, mtf, peel_half_width, smooth));
    return out;
}

/// Filtered P, Q, angle and magnitude components of one branch for one ridge.
struct BranchComponents {
    std::string branch_id;
    int rank = 0;
    std::vector<double> p, q, theta, v;
};

inline const char* const kComponentChannels[] = {"P", "Q", "VA", "VM"};

inline std::string component_column(const std::string& branch_id, const char* channel, int rank) {
    return branch_id + "." + channel + ".h" + std::to_string(rank);
}

inline std::vector<BranchComponents> run_filter_stage(const PreparedData& prep, std::span<const Ridge> ridges,
                                                      const PipelineConfig& cfg) {
    const auto& t = prep.tfr;
    const int d_max = cfg.filter.d_max > 0 ? cfg.filter.d_max : default_band_limit(t.window.sigma, t.fs(), t.n_bins);
    const int d_min = std::min(cfg.filter.d_min, d_max);
    // Band search only reads channel thresholds within d_max of a ridge.
    int k_lo = t.n_bins, k_hi = 0;
    for (const auto& r : ridges) {
        const auto [lo, hi] = std::minmax_element(r.bins.begin(), r.bins.end());
        k_lo = std::min(k_lo, *lo);
        k_hi = std::max(k_hi, *hi);
    }
    const IndexRange bins{static_cast<std::size_t>(std::max(0, k_lo - d_max)),
                          static_cast<std::size_t>(std::max(0, k_hi + d_max + 1))};
    std::vector<BranchComponents> out;
    if (ridges.empty()) return out;
    for (const auto& b : prep.dataset.branches) {
        std::vector<BranchComponents> per_ridge(ridges.size());
        for (std::size_t r = 0; r < ridges.size(); ++r) per_ridge[r] = {b.id, ridges[r].rank, {}, {}, {}, {}};
        const Channel* channels[] = {&b.p, &b.q, &b.v_ang, &b.v_mag};
        for (int c = 0; c < 4; ++c) {
            const auto x = prep.analysis_signal(*channels[c], cfg.preprocess.detrend);
            const auto grid = transform(std::span<const double>(x), t, channels[c]->id);
            const auto gamma_f = build_threshold(magnitudes(grid), cfg.threshold, t.fs(), prep.threshold_rows, bins);
            const auto bands = filter_bands(grid, ridges, gamma_f.gamma, d_min, d_max);
            for (std::size_t r = 0; r < ridges.size(); ++r) {
                auto comp = reconstruct_component(grid, ridges[r], bands[r]).samples;
                auto& dst = per_ridge[r];
                (c == 0 ? dst.p : c == 1 ? dst.q : c == 2 ? dst.theta : dst.v) = std::move(comp);
            }
        }
        for (auto& pr : per_ridge) out.push_back(std::move(pr));
    }
    return out;
}

/// Integration starts one window guard after the component's onset so the
/// filtered signals are free of the switch-on transient.
inline IndexRange def_support(const PreparedData& prep, std::size_t onset) {
    const std::size_t guard = prep.interior.begin;
    const IndexRange settled{std::max(prep.interior.begin, onset + guard), prep.interior.end};
    return settled.size() >= 2 ? settled : prep.interior;
}

inline std::vector<ComponentDef> run_def_stage(const PreparedData& prep, std::span<const Ridge> ridges,
                                               std::span<const double> gamma_m, std::span<const std::size_t> onsets,
                                               std::span<const BranchComponents> comps, const PipelineConfig& cfg) {
    if (onsets.size() != ridges.size()) throw ConfigError("def", "one onset per ridge is required");
    const RidgeAxes ax{prep.tfr.fs(), prep.tfr.n_bins};
    std::vector<ComponentDef> out;
    for (std::size_t h = 0; h < ridges.size(); ++h) {
        const auto& ridge = ridges[h];
        ComponentDef cd;
        cd.component = ridge.rank;
        cd.mean_freq_hz = ridge.mean_freq_hz(ax);
        const auto interval = default_interval(ridge, gamma_m, def_support(prep, onsets[h]), ax, cfg.def.interval);
        std::vector<DeviceSlope> slopes;
        for (const auto& b : prep.dataset.branches) {
            const auto it = std::find_if(comps.begin(), comps.end(), [&](const BranchComponents& c) {
                return c.branch_id == b.id && c.rank == ridge.rank;
            });
            if (it == comps.end()) {
                throw DataError("def", "no filtered components for branch " + b.id + " h" + std::to_string(ridge.rank));
            }
            auto s = def_flow(it->p, it->q, it->theta, it->v, b.v_mag.samples, interval, ax.fs, cfg.def.slope);
            s.branch_id = b.id;
            s.rank = ridge.rank;
            slopes.push_back({b.from_bus, s.slope});
            cd.per_branch.push_back(std::move(s));
        }
        cd.ranking = rank_sources(std::move(slopes), ridge.rank, cfg.def.margin);
        out.push_back(std::move(cd));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Artifacts

inline nlohmann::json tfr_meta_json(const PreparedData& prep, const MtfGrid& mtf) {
    nlohmann::json sel = nullptr;
    if (!prep.sigma_candidates.empty()) {
        sel = nlohmann::json::array();
        for (std::size_t i = 0; i < prep.sigma_candidates.size(); ++i)
            sel.push_back({{"sigma_s", prep.sigma_candidates[i]}, {"entropy_bits", prep.sigma_entropies[i]}});
    }
    const auto& ds = prep.dataset;
    return {{"kind", std::string(to_string(prep.tfr.kind))},
            {"sigma_s", prep.tfr.window.sigma},
            {"sigma_selection", sel},
            {"n_bins", prep.tfr.n_bins},
            {"window_half_length", prep.tfr.window.m_half},
            {"fs", ds.spec.fs},
            {"t0", ds.spec.t0},
            {"length", ds.spec.length},
            {"t_event", ds.t_event},
            {"interior", {prep.interior.begin, prep.interior.end}},
            {"threshold_rows", {prep.threshold_rows.begin, prep.threshold_rows.end}},
            {"channels", mtf.source_ids}};
}

/// Transform layout recorded by the tfr stage; later stages must agree with it.
inline void check_tfr_meta(const nlohmann::json& meta, const PreparedData& prep) {
    const bool same = meta.at("kind").get<std::string>() == to_string(prep.tfr.kind) &&
                      meta.at("sigma_s").get<double>() == prep.tfr.window.sigma &&
                      meta.at("n_bins").get<int>() == prep.tfr.n_bins &&
                      meta.at("length").get<std::size_t>() == prep.dataset.spec.length;
    if (!same) throw ConfigError("cli", "configuration or dataset differs from the one used by the tfr stage");
}

/// Transform layout of a tfr stage run, rebuilt from its metadata.
inline TfrConfig tfr_config_from_meta(const nlohmann::json& meta, const PipelineConfig& cfg) {
    try {
        PipelineConfig c = cfg;
        c.kind = parse_tfr_kind(meta.at("kind").get<std::string>());
        c.n_bins = meta.at("n_bins").get<int>();
        return make_tfr_config(c, meta.at("sigma_s").get<double>(), meta.at("fs").get<double>());
    } catch (const nlohmann::json::exception& e) {
        throw DataError("cli", std::string("malformed tfr_meta.json: ") + e.what());
    }
}

/// Reads an exported MTF and restores the negative-frequency half.
inline Grid<double> read_mtf_csv(const std::filesystem::path& path, int n_bins, std::size_t length) {
    auto g = read_magnitude_csv(path, n_bins);
    if (g.rows() != length || g.cols() != static_cast<std::size_t>(n_bins)) {
        throw DataError("cli", path.string() + ": expected " + std::to_string(length) + " rows");
    }
    mirror_half(g);
    return g;
}

inline void write_threshold_csv(const std::filesystem::path& path, const SpectralThreshold& th, const TfrConfig& t) {
    csv::Table table{{"bin", "freq_hz", "gamma"}, {{}, {}, {}}};
    for (std::size_t k = 0; k <= t.half_bins(); ++k) {
        table.columns[0].push_back(static_cast<double>(k));
        table.columns[1].push_back(t.bin_freq(k));
        table.columns[2].push_back(th.gamma[k]);
    }
    csv::write(path, table);
}

/// Reads the positive-half threshold and mirrors it to n_bins entries.
inline std::vector<double> read_threshold_csv(const std::filesystem::path& path, int n_bins) {
    const auto table = csv::read(path);
    const auto col = table.find("gamma");
    const auto half = static_cast<std::size_t>(n_bins / 2);
    if (col == csv::Table::npos || table.rows() != half + 1) {
        throw DataError("cli", path.string() + ": expected a 'gamma' column with " + std::to_string(half + 1) + " rows");
    }
    std::vector<double> gamma(static_cast<std::size_t>(n_bins));
    for (std::size_t k = 0; k <= half; ++k) gamma[k] = table.columns[col][k];
    for (std::size_t k = half + 1; k < gamma.size(); ++k) gamma[k] = gamma[gamma.size() - k];
    return gamma;
}

inline void write_ridges_csv(const std::filesystem::path& path, std::span<const Ridge> ridges, const RidgeAxes& ax,
                             double t0) {
    csv::Table table{{"ridge_rank", "time_s", "freq_hz", "magnitude"}, {{}, {}, {}, {}}};
    for (const auto& r : ridges) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            table.columns[0].push_back(r.rank);
            table.columns[1].push_back(t0 + static_cast<double>(r.m_start + i) / ax.fs);
            table.columns[2].push_back(r.freq_hz(i, ax));
            table.columns[3].push_back(r.magnitudes[i]);
        }
    }
    csv::write(path, table);
}

inline nlohmann::json ridges_to_json(std::span<const Ridge> ridges, const RidgeAxes& ax, double t0,
                                     int peel_half_width, std::span<const std::size_t> onsets = {}) {
    nlohmann::json list = nlohmann::json::array();
    for (std::size_t h = 0; h < ridges.size(); ++h) {
        const auto& r = ridges[h];
        list.push_back({{"rank", r.rank},
                        {"energy", r.energy},
                        {"t_start", t0 + static_cast<double>(r.m_start) / ax.fs},
                        {"t_end", t0 + static_cast<double>(r.m_end()) / ax.fs},
                        {"mean_freq", r.mean_freq_hz(ax)},
                        {"m_start", r.m_start},
                        {"bins", r.bins},
                        {"magnitudes", r.magnitudes},
                        {"anchors", r.anchors}});
        if (h < onsets.size()) {
            list.back()["t_onset"] = t0 + static_cast<double>(onsets[h]) / ax.fs;
            list.back()["onset_sample"] = onsets[h];
        }
    }
    return {{"fs", ax.fs}, {"n_bins", ax.n_bins}, {"peel_half_width", peel_half_width}, {"ridges", std::move(list)}};
}

inline std::vector<Ridge> ridges_from_json(const nlohmann::json& j) {
    std::vector<Ridge> out;
    try {
        for (const auto& r : j.at("ridges")) {
            Ridge ridge;
            ridge.rank = r.at("rank").get<int>();
            ridge.energy = r.at("energy").get<double>();
            ridge.m_start = r.at("m_start").get<std::size_t>();
            ridge.bins = r.at("bins").get<std::vector<int>>();
            ridge.magnitudes = r.at("magnitudes").get<std::vector<double>>();
            ridge.anchors = r.at("anchors").get<std::vector<std::uint8_t>>();
            if (ridge.bins.empty() || ridge.magnitudes.size() != ridge.bins.size()) {
                throw DataError("ridge", "ridge " + std::to_string(ridge.rank) + " has inconsistent arrays");
            }
            out.push_back(std::move(ridge));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError("ridge", std::string("malformed ridges.json: ") + e.what());
    }
    return out;
}

inline std::vector<std::size_t> onsets_from_json(const nlohmann::json& j) {
    std::vector<std::size_t> out;
    try {
        for (const auto& r : j.at("ridges")) out.push_back(r.at("onset_sample").get<std::size_t>());
    } catch (const nlohmann::json::exception& e) {
        throw DataError("ridge", std::string("ridges.json lacks onsets: ") + e.what());
    }
    return out;
}

inline void write_components_csv(const std::filesystem::path& path, std::span<const BranchComponents> comps,
                                 const SamplingSpec& spec) {
    csv::Table table;
    table.header.push_back("time_s");
    std::vector<double> time(spec.length);
    for (std::size_t m = 0; m < spec.length; ++m) time[m] = spec.time(m);
    table.columns.push_back(std::move(time));
    for (const auto& c : comps) {
        const std::vector<double>* series[] = {&c.p, &c.q, &c.theta, &c.v};
        for (int i = 0; i < 4; ++i) {
            table.header.push_back(component_column(c.branch_id, kComponentChannels[i], c.rank));
            table.columns.push_back(*series[i]);
        }
    }
    csv::write(path, table);
}

inline std::vector<BranchComponents> read_components_csv(const std::filesystem::path& path,
                                                         const EventDataset& ds, std::span<const Ridge> ridges) {
    const auto table = csv::read(path);
    if (table.rows() != ds.spec.length) throw DataError("filter", path.string() + ": row count differs from dataset");
    std::vector<BranchComponents> out;
    for (const auto& b : ds.branches) {
        for (const auto& r : ridges) {
            BranchComponents c{b.id, r.rank, {}, {}, {}, {}};
            std::vector<double>* series[] = {&c.p, &c.q, &c.theta, &c.v};
            for (int i = 0; i < 4; ++i) {
                const auto name = component_column(b.id, kComponentChannels[i], r.rank);
                const auto col = table.find(name);
                if (col == csv::Table::npos) throw DataError("filter", path.string() + ": missing column " + name);
                *series[i] = table.columns[col];
            }
            out.push_back(std::move(c));
        }
    }
    return out;
}

inline nlohmann::json def_to_json(std::span<const ComponentDef> defs, double fs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& d : defs) arr.push_back(to_json(d, fs));
    return arr;
}

}  // namespace fosst
