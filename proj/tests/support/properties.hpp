#pragma once

#include "fosst/fosst.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fosst::props {

/// Outcome of a randomized property suite; failures keep the first message.
struct Report {
    int cases = 0;
    int failures = 0;
    std::string first_failure;

    bool ok() const { return failures == 0 && cases > 0; }
    void fail(int case_index, const std::string& what) {
        if (failures++ == 0) first_failure = "case " + std::to_string(case_index) + ": " + what;
    }
};

// ---------------------------------------------------------------------------
// Ridge extraction on random grids

struct RidgeCase {
    Grid<double> grid;
    std::vector<double> gamma;
    RidgeConfig cfg;
    RidgeAxes ax;
    int peel = 1;
};

/// Rayleigh-like background with a few planted wandering tracks. Some cases
/// quantize the grid to a handful of levels so that argmax ties occur.
inline RidgeCase random_ridge_case(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> len(100, 600);
    const int n_choices[] = {32, 64, 128, 256};
    const double fs_choices[] = {5.0, 10.0, 20.0};
    RidgeCase c;
    const auto rows = static_cast<std::size_t>(len(rng));
    const int n = n_choices[std::uniform_int_distribution<int>(0, 3)(rng)];
    c.ax = {fs_choices[std::uniform_int_distribution<int>(0, 2)(rng)], n};
    c.grid = Grid<double>(rows, static_cast<std::size_t>(n));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : c.grid.values()) v = std::sqrt(-2.0 * std::log(1.0 - u(rng)));

    const int tracks = std::uniform_int_distribution<int>(1, 4)(rng);
    for (int t = 0; t < tracks; ++t) {
        const auto a = static_cast<std::size_t>(u(rng) * 0.5 * static_cast<double>(rows));
        const auto b = std::min(rows, a + static_cast<std::size_t>((0.3 + 0.7 * u(rng)) * static_cast<double>(rows)));
        double k = 1.0 + u(rng) * (n / 2 - 2);
        const double amp = 3.0 + 10.0 * u(rng);
        for (std::size_t m = a; m < b; ++m) {
            k = std::clamp(k + (u(rng) - 0.5) * 0.6, 0.0, n / 2.0 - 1.0);
            c.grid(m, static_cast<std::size_t>(std::lround(k))) += amp;
        }
    }
    if (u(rng) < 0.3) {
        for (auto& v : c.grid.values()) v = std::round(v);
    }

    c.gamma.resize(static_cast<std::size_t>(n));
    const double level = 1.5 + 2.0 * u(rng);
    for (auto& g : c.gamma) g = level * (0.8 + 0.4 * u(rng));

    c.cfg.h_max = std::uniform_int_distribution<int>(1, 7)(rng);
    c.cfg.u_intervals = std::uniform_int_distribution<int>(1, 6)(rng);
    c.cfg.jumpt_s = std::max(1.0 / c.ax.fs, 3.0 * u(rng));
    c.cfg.jumpf_hz = (0.5 + 4.0 * u(rng)) * c.ax.bin_width();
    c.cfg.maxder_hz_s = (0.5 + 4.0 * u(rng)) * c.ax.bin_width() * c.ax.fs / 4.0;
    c.cfg.min_duration_s = u(rng) * static_cast<double>(rows) / c.ax.fs / 3.0;
    c.peel = std::uniform_int_distribution<int>(1, 5)(rng);
    return c;
}

inline bool same_ridges(const std::vector<Ridge>& a, const std::vector<Ridge>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].rank != b[i].rank || a[i].m_start != b[i].m_start || a[i].bins != b[i].bins ||
            a[i].anchors != b[i].anchors || a[i].magnitudes != b[i].magnitudes || a[i].energy != b[i].energy) {
            return false;
        }
    }
    return true;
}

/// Determinism, threshold at anchors, energy ordering, jump bound and peeling
/// soundness (within one run and when re-run on the residual grid).
inline Report ridge_invariants(int n_cases, std::uint64_t seed) {
    Report rep;
    std::mt19937_64 rng(seed);
    for (int i = 0; i < n_cases; ++i) {
        ++rep.cases;
        const auto c = random_ridge_case(rng);
        const auto res = extract_ridges(c.grid, c.gamma, c.cfg, c.ax, c.peel);
        const Grid<double> copy = c.grid;
        const auto again = extract_ridges(copy, c.gamma, c.cfg, c.ax, c.peel);
        if (!same_ridges(res.ridges, again.ridges)) rep.fail(i, "extraction is not deterministic");

        const double df = c.ax.bin_width();
        const auto max_dm = static_cast<std::size_t>(std::floor(c.cfg.jumpt_s * c.ax.fs + 1e-9));
        for (const auto& r : res.ridges) {
            std::size_t last_anchor = r.m_start;
            bool have_anchor = false;
            for (std::size_t j = 0; j < r.size(); ++j) {
                const std::size_t m = r.m_start + j;
                const auto k = static_cast<std::size_t>(r.bins[j]);
                if (k >= static_cast<std::size_t>(c.ax.n_bins / 2)) rep.fail(i, "ridge point outside [0, N/2)");
                if (!r.anchors[j]) continue;
                if (!(c.grid(m, k) > c.gamma[k])) rep.fail(i, "anchor at or below threshold");
                if (have_anchor) {
                    const std::size_t dm = m - last_anchor;
                    const double dk = std::abs(r.bins[j] - r.bin_at(last_anchor)) * df;
                    const double reach = std::min(c.cfg.jumpf_hz, c.cfg.maxder_hz_s * static_cast<double>(dm) / c.ax.fs);
                    if (dm > max_dm || dk > reach + df + 1e-12) rep.fail(i, "jump bound exceeded");
                }
                last_anchor = m;
                have_anchor = true;
            }
        }

        for (std::size_t h = 0; h < res.ridges.size(); ++h) {
            const auto& round = res.rounds[h];
            const double adopted = round.candidates[*round.adopted].energy;
            for (const auto& cand : round.candidates) {
                if (cand.seeded && cand.duration_s(c.ax.fs) > c.cfg.min_duration_s && cand.energy > adopted) {
                    rep.fail(i, "a surviving candidate has more energy than the adopted ridge");
                }
            }
        }

        auto too_close = [&](const Ridge& earlier, const Ridge& later) {
            for (std::size_t j = 0; j < later.size(); ++j) {
                const std::size_t m = later.m_start + j;
                if (earlier.covers(m) && std::abs(later.bins[j] - earlier.bin_at(m)) <= c.peel) return true;
            }
            return false;
        };
        for (std::size_t a = 0; a < res.ridges.size(); ++a)
            for (std::size_t b = a + 1; b < res.ridges.size(); ++b)
                if (too_close(res.ridges[a], res.ridges[b])) rep.fail(i, "later ridge inside a peeled band");

        const auto rerun = extract_ridges(res.residual, c.gamma, c.cfg, c.ax, c.peel);
        for (const auto& prev : res.ridges) {
            for (const auto& r : rerun.ridges) {
                for (std::size_t j = 0; j < r.size(); ++j) {
                    const std::size_t m = r.m_start + j;
                    if (r.anchors[j] && prev.covers(m) && std::abs(r.bins[j] - prev.bin_at(m)) <= c.peel) {
                        rep.fail(i, "re-run on the peeled grid found a ridge inside a peeled band");
                    }
                }
            }
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Ingestion and preprocessing on random files

inline EventDataset random_dataset(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double fs_choices[] = {10.0, 25.0, 30.0, 50.0, 60.0};
    EventDataset ds;
    ds.spec.fs = fs_choices[std::uniform_int_distribution<int>(0, 4)(rng)];
    ds.spec.length = static_cast<std::size_t>(std::uniform_int_distribution<int>(20, 400)(rng));
    ds.spec.t0 = std::round(1000.0 * u(rng)) / 10.0;
    ds.t_event = 0.5 * ds.spec.duration();
    const int branches = std::uniform_int_distribution<int>(1, 4)(rng);
    std::normal_distribution<double> nd;
    for (int b = 0; b < branches; ++b) {
        Branch br;
        br.id = "L" + std::to_string(b);
        br.from_bus = "B" + std::to_string(b);
        br.to_bus = "B" + std::to_string(b + 10);
        br.p = {br.id + ".P", ChannelKind::ActivePower, "pu", {}};
        br.q = {br.id + ".Q", ChannelKind::ReactivePower, "pu", {}};
        br.v_mag = {br.id + ".VM", ChannelKind::VoltageMag, "pu", {}};
        br.v_ang = {br.id + ".VA", ChannelKind::VoltageAngle, "rad", {}};
        const double p0 = 200.0 * (u(rng) - 0.3);
        const double q0 = 50.0 * (u(rng) - 0.5);
        double ang = std::numbers::pi * (2.0 * u(rng) - 1.0);
        const double drift = 0.3 * (u(rng) - 0.5);
        for (std::size_t m = 0; m < ds.spec.length; ++m) {
            br.p.samples.push_back(p0 + nd(rng));
            br.q.samples.push_back(q0 + 0.5 * nd(rng));
            br.v_mag.samples.push_back(1.0 + 0.02 * nd(rng));
            ang += drift + 0.01 * nd(rng);
            br.v_ang.samples.push_back(std::remainder(ang, 2.0 * std::numbers::pi));
        }
        ds.branches.push_back(std::move(br));
    }
    return ds;
}

inline bool close_rel(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

/// Replaces every `count`-th "NaN" token of a file by an empty cell.
inline void blank_some_missing(const std::filesystem::path& path, int count) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    int seen = 0;
    for (std::size_t pos = text.find("NaN"); pos != std::string::npos; pos = text.find("NaN", pos)) {
        if (++seen % count == 0) {
            text.erase(pos, 3);
        } else {
            pos += 3;
        }
    }
    std::ofstream(path, std::ios::binary) << text;
}

/// Clean files: export then ingest reproduces P, Q and the voltage phasor to
/// 1e-9 relative, and P^2 + Q^2 = (|V||I|)^2 to 1e-12 relative. Corrupted
/// files (missing cells, spikes): missing cells surface as NaN, unwrapping
/// changes angles by whole turns only, preprocessing leaves no NaN and is
/// idempotent. A time column shifted by one row is rejected.
inline Report ingestion_invariants(int n_cases, std::uint64_t seed, const std::filesystem::path& scratch) {
    Report rep;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < n_cases; ++i) {
        ++rep.cases;
        const auto ds = random_dataset(rng);
        const auto dir = scratch / ("case" + std::to_string(i));
        std::filesystem::remove_all(dir);
        const auto unit = u(rng) < 0.5 ? AngleUnit::Degrees : AngleUnit::Radians;
        const auto topo = write_contest_csv(ds, dir, unit);
        const auto files = ContestFiles::in_directory(dir);
        const auto back = ingest_contest_csv(files, topo);
        if (back.spec.length != ds.spec.length || !close_rel(back.spec.fs, ds.spec.fs, 1e-9)) {
            rep.fail(i, "sampling changed in round trip");
            continue;
        }
        for (std::size_t b = 0; b < ds.branches.size(); ++b) {
            const auto& x = ds.branches[b];
            const auto& y = back.branches[b];
            for (std::size_t m = 0; m < ds.spec.length; ++m) {
                if (!close_rel(x.p.samples[m], y.p.samples[m], 1e-9) || !close_rel(x.q.samples[m], y.q.samples[m], 1e-9) ||
                    !close_rel(x.v_mag.samples[m], y.v_mag.samples[m], 1e-9) ||
                    !close_rel(x.v_ang.samples[m], y.v_ang.samples[m], 1e-9)) {
                    rep.fail(i, "round trip differs at branch " + x.id + " sample " + std::to_string(m));
                    break;
                }
            }
        }
        const auto im = csv::read(files.current_mag);
        for (std::size_t b = 0; b < back.branches.size(); ++b) {
            const auto& y = back.branches[b];
            const auto& i_mag = im.columns[im.find(topo.branches[b].i_mag)];
            for (std::size_t m = 0; m < back.spec.length; ++m) {
                const double s2 = y.p.samples[m] * y.p.samples[m] + y.q.samples[m] * y.q.samples[m];
                const double vi = y.v_mag.samples[m] * i_mag[m];
                if (!close_rel(s2, vi * vi, 1e-12)) rep.fail(i, "P^2 + Q^2 differs from (|V||I|)^2");
            }
        }

        // Corruption: missing cells and spikes in the current magnitude file.
        auto table = csv::read(files.current_mag);
        std::vector<std::pair<std::size_t, std::size_t>> holes;
        for (std::size_t c = 1; c < table.columns.size(); ++c) {
            for (std::size_t m = 0; m < table.rows(); ++m) {
                const double r = u(rng);
                if (r < 0.03) {
                    table.columns[c][m] = std::numeric_limits<double>::quiet_NaN();
                    holes.emplace_back(c - 1, m);
                } else if (r < 0.04) {
                    table.columns[c][m] *= 100.0;
                }
            }
        }
        csv::write(files.current_mag, table);
        blank_some_missing(files.current_mag, 2);
        const auto dirty = ingest_contest_csv(files, topo);
        for (const auto& [b, m] : holes) {
            if (!std::isnan(dirty.branches[b].p.samples[m])) rep.fail(i, "missing cell did not surface as NaN");
        }
        for (const auto& br : dirty.branches) {
            const auto unwrapped = unwrap_angles(br.v_ang);
            for (std::size_t m = 0; m < unwrapped.samples.size(); ++m) {
                const double turns = (unwrapped.samples[m] - br.v_ang.samples[m]) / (2.0 * std::numbers::pi);
                if (std::abs(turns - std::round(turns)) > 1e-9) rep.fail(i, "unwrap changed an angle by a non-integer turn");
                if (m > 0 && std::abs(unwrapped.samples[m] - unwrapped.samples[m - 1]) > std::numbers::pi + 1e-12) {
                    rep.fail(i, "unwrapped angle still jumps by more than pi");
                }
            }
        }
        const auto once = preprocess(dirty);
        const auto twice = preprocess(once);
        for (std::size_t b = 0; b < once.branches.size(); ++b) {
            const auto& x = once.branches[b];
            const auto& y = twice.branches[b];
            for (const Channel* ch : {&x.p, &x.q, &x.v_mag, &x.v_ang})
                for (double v : ch->samples)
                    if (!std::isfinite(v)) rep.fail(i, "preprocessing left a missing value");
            if (x.p.samples != y.p.samples || x.q.samples != y.q.samples || x.v_mag.samples != y.v_mag.samples ||
                x.v_ang.samples != y.v_ang.samples) {
                rep.fail(i, "preprocessing is not idempotent");
            }
        }

        if (i % 5 == 0) {
            auto va = csv::read(files.voltage_ang);
            auto& t = va.columns.front();
            std::rotate(t.begin(), t.begin() + 1, t.end());
            t.back() = t[t.size() - 2] + 1.0 / ds.spec.fs;
            csv::write(files.voltage_ang, va);
            try {
                ingest_contest_csv(files, topo);
                rep.fail(i, "misaligned time column was accepted");
            } catch (const DataError&) {
            }
        }
        std::filesystem::remove_all(dir);
    }
    return rep;
}

}  // namespace fosst::props
