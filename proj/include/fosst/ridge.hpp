#pragma once

#include "fosst/errors.hpp"
#include "fosst/grid.hpp"
#include "fosst/tfr.hpp"
#include "fosst/window.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace fosst {

struct RidgeConfig {
    int h_max = 7;
    int u_intervals = 5;
    double jumpt_s = 2.0;
    double jumpf_hz = 0.03;
    double maxder_hz_s = 0.03;
    double min_duration_s = 25.0;
    int peel_half_width = 0;  ///< bins; 0 selects the transform-dependent default

    void validate(double fs) const {
        if (h_max < 1 || u_intervals < 1) throw ConfigError("ridge", "H and U must be positive");
        if (!(jumpt_s >= 1.0 / fs)) throw ConfigError("ridge", "jumpt must cover at least one sample");
        if (!(jumpf_hz >= 0.0) || !(maxder_hz_s >= 0.0)) throw ConfigError("ridge", "jumpf and maxder must be >= 0");
        if (!(min_duration_s >= 0.0)) throw ConfigError("ridge", "minimum ridge duration must be >= 0");
        if (peel_half_width < 0) throw ConfigError("ridge", "peel half-width must be >= 0");
    }
};

/// 3 std of the window spectrum for the STFT, 1 std for the squeezed transforms.
inline int default_peel_half_width(TfrKind kind, double sigma, double fs, int n_bins) {
    const double spread = window_stats(sigma).std_freq * n_bins / fs;
    const double width = kind == TfrKind::Stft ? 3.0 * spread : spread;
    return std::max(1, static_cast<int>(std::lround(width)));
}

/// Frequency axis of a ridge grid.
struct RidgeAxes {
    double fs = 0.0;
    int n_bins = 0;

    double bin_width() const noexcept { return fs / n_bins; }
};

struct Ridge {
    int rank = 0;
    std::size_t m_start = 0;
    std::vector<int> bins;              ///< one bin per sample of the support
    std::vector<double> magnitudes;     ///< grid value at each ridge point
    std::vector<std::uint8_t> anchors;  ///< 1 where the point was reached by a jump, 0 if interpolated
    double energy = 0.0;

    std::size_t size() const noexcept { return bins.size(); }
    std::size_t m_end() const noexcept { return m_start + bins.size() - 1; }
    bool covers(std::size_t m) const noexcept { return m >= m_start && m < m_start + bins.size(); }
    int bin_at(std::size_t m) const { return bins.at(m - m_start); }
    double duration_s(double fs) const noexcept { return static_cast<double>(bins.size()) / fs; }
    double freq_hz(std::size_t i, const RidgeAxes& ax) const { return bins.at(i) * ax.bin_width(); }
    double mean_freq_hz(const RidgeAxes& ax) const {
        double s = 0.0;
        for (int b : bins) s += b;
        return bins.empty() ? 0.0 : s / static_cast<double>(bins.size()) * ax.bin_width();
    }
};

struct GridCell {
    std::size_t m = 0;
    int k = 0;

    bool operator==(const GridCell&) const = default;
};

/// Cells reachable from an anchor in one jump: 0 < |m - anchor_m| <= jumpt*fs
/// (forward for direction > 0, backward otherwise) and
/// |k - anchor_k| <= min(jumpf, maxder * |dm| / fs) / bin width, restricted
/// to rows [0, rows) and bins [0, k_end).
inline std::vector<GridCell> search_region(std::size_t anchor_m, int anchor_k, int direction, const RidgeConfig& cfg,
                                           const RidgeAxes& ax, std::size_t rows, int k_end) {
    std::vector<GridCell> out;
    const auto max_dm = static_cast<std::size_t>(std::floor(cfg.jumpt_s * ax.fs + 1e-9));
    const double df = ax.bin_width();
    for (std::size_t dm = 1; dm <= max_dm; ++dm) {
        if (direction > 0 && anchor_m + dm >= rows) break;
        if (direction <= 0 && dm > anchor_m) break;
        const std::size_t m = direction > 0 ? anchor_m + dm : anchor_m - dm;
        const double reach = std::min(cfg.jumpf_hz, cfg.maxder_hz_s * static_cast<double>(dm) / ax.fs);
        const int hw = static_cast<int>(std::floor(reach / df + 1e-9));
        for (int k = std::max(0, anchor_k - hw); k <= std::min(k_end - 1, anchor_k + hw); ++k) out.push_back({m, k});
    }
    return out;
}

/// One grown candidate of an extraction round.
struct RidgeCandidate {
    int interval = 0;  ///< seed interval index u (0-based)
    GridCell seed;
    std::size_t m_start = 0;
    std::vector<int> bins;
    std::vector<std::uint8_t> anchors;
    double energy = 0.0;
    bool seeded = false;  ///< false when the seed was at or below threshold

    std::size_t m_end() const noexcept { return m_start + bins.size() - 1; }
    double duration_s(double fs) const noexcept { return static_cast<double>(bins.size()) / fs; }
};

/// Working state of the greedy extraction: a private copy of the grid in
/// which adopted ridges are peeled, plus a mask of peeled cells.
class RidgeWorkspace {
public:
    RidgeWorkspace(const Grid<double>& grid, std::span<const double> gamma, const RidgeAxes& ax)
        : work_(grid), peeled_(grid.rows(), grid.cols(), 0), gamma_(gamma.begin(), gamma.end()), ax_(ax) {
        if (gamma_.size() != grid.cols()) throw ConfigError("ridge", "threshold length does not match the grid");
        if (ax.n_bins != static_cast<int>(grid.cols())) throw ConfigError("ridge", "grid width does not match N");
        k_end_ = ax.n_bins / 2;
    }

    const Grid<double>& grid() const noexcept { return work_; }
    const Grid<std::uint8_t>& peeled() const noexcept { return peeled_; }
    const RidgeAxes& axes() const noexcept { return ax_; }
    int k_end() const noexcept { return k_end_; }

    bool above(std::size_t m, int k) const {
        return !peeled_(m, static_cast<std::size_t>(k)) &&
               work_(m, static_cast<std::size_t>(k)) > gamma_[static_cast<std::size_t>(k)];
    }

    /// Candidates for every seed interval on the current working grid.
    std::vector<RidgeCandidate> candidates(const RidgeConfig& cfg) const {
        const std::size_t L = work_.rows();
        std::vector<RidgeCandidate> out;
        for (int u = 0; u < cfg.u_intervals; ++u) {
            const std::size_t lo = L * static_cast<std::size_t>(u) / static_cast<std::size_t>(cfg.u_intervals);
            const std::size_t hi = L * static_cast<std::size_t>(u + 1) / static_cast<std::size_t>(cfg.u_intervals);
            RidgeCandidate c;
            c.interval = u;
            if (lo >= hi) {
                out.push_back(std::move(c));
                continue;
            }
            c.seed = argmax(lo, hi);
            if (above(c.seed.m, c.seed.k)) grow(c, cfg);
            out.push_back(std::move(c));
        }
        return out;
    }

    /// Zeroes +-half_width bins around the ridge at each supported sample.
    void peel(const Ridge& r, int half_width) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            const std::size_t m = r.m_start + i;
            const int lo = std::max(0, r.bins[i] - half_width);
            const int hi = std::min(static_cast<int>(work_.cols()) - 1, r.bins[i] + half_width);
            for (int k = lo; k <= hi; ++k) {
                work_(m, static_cast<std::size_t>(k)) = 0.0;
                peeled_(m, static_cast<std::size_t>(k)) = 1;
            }
        }
    }

private:
    static bool better(double v, std::size_t m, int k, double bv, std::size_t bm, int bk) {
        if (v != bv) return v > bv;
        if (m != bm) return m < bm;
        return k < bk;
    }

    GridCell argmax(std::size_t lo, std::size_t hi) const {
        GridCell best{lo, 0};
        double bv = -1.0;
        for (std::size_t m = lo; m < hi; ++m) {
            for (int k = 0; k < k_end_; ++k) {
                const double v = work_(m, static_cast<std::size_t>(k));
                if (v > bv) {
                    bv = v;
                    best = {m, k};
                }
            }
        }
        return best;
    }

    // Extends the path in one direction; returns points in visiting order.
    void extend(GridCell anchor, int direction, const RidgeConfig& cfg, std::vector<GridCell>& path,
                std::vector<std::uint8_t>& kinds) const {
        for (;;) {
            const auto region = search_region(anchor.m, anchor.k, direction, cfg, ax_, work_.rows(), k_end_);
            if (region.empty()) return;
            GridCell best = region.front();
            double bv = work_(best.m, static_cast<std::size_t>(best.k));
            for (const auto& c : region) {
                const double v = work_(c.m, static_cast<std::size_t>(c.k));
                if (better(v, c.m, c.k, bv, best.m, best.k)) {
                    bv = v;
                    best = c;
                }
            }
            if (!above(best.m, best.k)) return;
            const std::size_t gap = direction > 0 ? best.m - anchor.m : anchor.m - best.m;
            std::vector<GridCell> bridge;
            for (std::size_t s = 1; s < gap; ++s) {
                const double t = static_cast<double>(s) / static_cast<double>(gap);
                const int k = static_cast<int>(std::lround(anchor.k + (best.k - anchor.k) * t));
                const std::size_t m = direction > 0 ? anchor.m + s : anchor.m - s;
                if (peeled_(m, static_cast<std::size_t>(k))) return;
                bridge.push_back({m, k});
            }
            for (const auto& c : bridge) {
                path.push_back(c);
                kinds.push_back(0);
            }
            path.push_back(best);
            kinds.push_back(1);
            anchor = best;
        }
    }

    void grow(RidgeCandidate& c, const RidgeConfig& cfg) const {
        c.seeded = true;
        std::vector<GridCell> fwd, bwd;
        std::vector<std::uint8_t> fwd_kind, bwd_kind;
        extend(c.seed, +1, cfg, fwd, fwd_kind);
        extend(c.seed, -1, cfg, bwd, bwd_kind);
        c.m_start = bwd.empty() ? c.seed.m : bwd.back().m;
        c.bins.reserve(bwd.size() + 1 + fwd.size());
        for (std::size_t i = bwd.size(); i-- > 0;) {
            c.bins.push_back(bwd[i].k);
            c.anchors.push_back(bwd_kind[i]);
        }
        c.bins.push_back(c.seed.k);
        c.anchors.push_back(1);
        for (std::size_t i = 0; i < fwd.size(); ++i) {
            c.bins.push_back(fwd[i].k);
            c.anchors.push_back(fwd_kind[i]);
        }
        for (std::size_t i = 0; i < c.bins.size(); ++i) {
            const double v = work_(c.m_start + i, static_cast<std::size_t>(c.bins[i]));
            c.energy += v * v;
        }
    }

    Grid<double> work_;
    Grid<std::uint8_t> peeled_;
    std::vector<double> gamma_;
    RidgeAxes ax_;
    int k_end_ = 0;
};

/// Index of the maximal-energy candidate longer than the minimum duration.
inline std::optional<std::size_t> select_candidate(std::span<const RidgeCandidate> cands, const RidgeConfig& cfg,
                                                   double fs) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < cands.size(); ++i) {
        const auto& c = cands[i];
        if (!c.seeded || !(c.duration_s(fs) > cfg.min_duration_s)) continue;
        if (!best || c.energy > cands[*best].energy) best = i;
    }
    return best;
}

struct RidgeRound {
    std::vector<RidgeCandidate> candidates;
    std::optional<std::size_t> adopted;
};

struct RidgeResult {
    std::vector<Ridge> ridges;
    std::vector<RidgeRound> rounds;
    Grid<double> residual;  ///< working grid after all peels
    int peel_half_width = 0;
};

/// Greedy extraction of up to H ridges from a magnitude grid with a per-bin
/// threshold. Only bins [0, N/2) are searched. The input grid is not modified.
inline RidgeResult extract_ridges(const Grid<double>& grid, std::span<const double> gamma, const RidgeConfig& cfg,
                                  const RidgeAxes& ax, int peel_half_width) {
    cfg.validate(ax.fs);
    if (peel_half_width < 1) throw ConfigError("ridge", "peel half-width must be >= 1");
    RidgeWorkspace ws(grid, gamma, ax);
    RidgeResult out;
    out.peel_half_width = peel_half_width;
    for (int h = 1; h <= cfg.h_max; ++h) {
        RidgeRound round;
        round.candidates = ws.candidates(cfg);
        round.adopted = select_candidate(round.candidates, cfg, ax.fs);
        if (!round.adopted) {
            out.rounds.push_back(std::move(round));
            break;
        }
        const auto& c = round.candidates[*round.adopted];
        Ridge r;
        r.rank = h;
        r.m_start = c.m_start;
        r.bins = c.bins;
        r.anchors = c.anchors;
        r.energy = c.energy;
        r.magnitudes.reserve(c.bins.size());
        for (std::size_t i = 0; i < c.bins.size(); ++i)
            r.magnitudes.push_back(ws.grid()(c.m_start + i, static_cast<std::size_t>(c.bins[i])));
        ws.peel(r, peel_half_width);
        out.ridges.push_back(std::move(r));
        out.rounds.push_back(std::move(round));
    }
    out.residual = ws.grid();
    return out;
}

inline std::vector<Ridge> estimate_ridges(const Grid<double>& grid, std::span<const double> gamma,
                                          const RidgeConfig& cfg, const RidgeAxes& ax, int peel_half_width) {
    return extract_ridges(grid, gamma, cfg, ax, peel_half_width).ridges;
}

struct SeparationViolation {
    std::size_t m = 0;
    int rank_a = 0;
    int rank_b = 0;
};

/// Samples where two ridges are not separated by more than 2 * delta_hz.
inline std::vector<SeparationViolation> check_separation(std::span<const Ridge> ridges, double delta_hz,
                                                         const RidgeAxes& ax) {
    std::vector<SeparationViolation> out;
    const double df = ax.bin_width();
    for (std::size_t a = 0; a < ridges.size(); ++a) {
        for (std::size_t b = a + 1; b < ridges.size(); ++b) {
            const auto& ra = ridges[a];
            const auto& rb = ridges[b];
            const std::size_t lo = std::max(ra.m_start, rb.m_start);
            const std::size_t hi = std::min(ra.m_end(), rb.m_end());
            for (std::size_t m = lo; m <= hi && lo <= hi; ++m) {
                const double gap = std::abs(ra.bin_at(m) - rb.bin_at(m)) * df;
                if (!(gap > 2.0 * delta_hz)) out.push_back({m, ra.rank, rb.rank});
            }
        }
    }
    return out;
}

/// Root-sum-square of the grid over bins within +-half_width of the ridge, per sample.
inline std::vector<double> band_magnitude(const Ridge& ridge, const Grid<double>& grid, int half_width) {
    if (ridge.size() == 0 || ridge.m_end() >= grid.rows()) throw ConfigError("ridge", "ridge outside the grid");
    const int k_last = static_cast<int>(grid.cols()) - 1;
    std::vector<double> out(ridge.size());
    for (std::size_t i = 0; i < ridge.size(); ++i) {
        double acc = 0.0;
        const int k = ridge.bins[i];
        for (int j = std::max(0, k - half_width); j <= std::min(k_last, k + half_width); ++j) {
            const double v = grid(ridge.m_start + i, static_cast<std::size_t>(j));
            acc += v * v;
        }
        out[i] = std::sqrt(acc);
    }
    return out;
}

/// Onset of the component a ridge follows. The band magnitude is smoothed by a
/// centred moving average of +-smooth_rows; from the first sample reaching its
/// median the scan walks back while it stays at or above level * median. For
/// a tone switched on under a Gaussian window the magnitude crosses half its
/// steady value at the switch-on time, while the ridge itself starts earlier
/// by up to the window's support.
inline std::size_t estimate_onset(const Ridge& ridge, const Grid<double>& grid, int half_width,
                                  std::size_t smooth_rows, double level = 0.5) {
    const auto mag = band_magnitude(ridge, grid, half_width);
    const std::size_t n = mag.size();
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + mag[i];
    std::vector<double> smooth(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t a = i >= smooth_rows ? i - smooth_rows : 0;
        const std::size_t b = std::min(n, i + smooth_rows + 1);
        smooth[i] = (prefix[b] - prefix[a]) / static_cast<double>(b - a);
    }
    std::vector<double> sorted = smooth;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n / 2), sorted.end());
    const double median = sorted[n / 2];
    std::size_t i = 0;
    while (smooth[i] < median) ++i;
    while (i > 0 && smooth[i - 1] >= level * median) --i;
    return ridge.m_start + i;
}

}  // namespace fosst
