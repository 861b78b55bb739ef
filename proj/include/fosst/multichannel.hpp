#pragma once

#include "fosst/errors.hpp"
#include "fosst/grid.hpp"
#include "fosst/tfr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fosst {

/// Aggregated magnitude representation sqrt(sum_i |TF_Pi|^2 + |TF_Qi|^2).
struct MtfGrid {
    Grid<double> values;
    std::vector<std::string> source_ids;
    TfrConfig config;
};

inline bool same_layout(const TfrConfig& a, const TfrConfig& b) {
    return a.n_bins == b.n_bins && a.kind == b.kind && a.window.sigma == b.window.sigma && a.window.fs == b.window.fs;
}

/// Streaming form of build_mtf: grids are added one at a time so that at most
/// one complex grid needs to be alive.
class MtfAccumulator {
public:
    void add(const TfrGrid& grid) {
        if (ids_.empty()) {
            config_ = grid.config;
            sum_sq_ = Grid<double>(grid.coeffs.rows(), grid.coeffs.cols());
        } else if (!same_layout(config_, grid.config) || grid.coeffs.rows() != sum_sq_.rows()) {
            throw ConfigError("multichannel", "grid " + grid.channel_id + " does not match the aggregation layout");
        }
        const auto src = grid.coeffs.values();
        auto dst = sum_sq_.values();
        for (std::size_t i = 0; i < src.size(); ++i) dst[i] += std::norm(src[i]);
        ids_.push_back(grid.channel_id);
    }

    MtfGrid finish() && {
        if (ids_.empty()) throw ConfigError("multichannel", "no grids to aggregate");
        for (auto& v : sum_sq_.values()) v = std::sqrt(v);
        return {std::move(sum_sq_), std::move(ids_), std::move(config_)};
    }

private:
    Grid<double> sum_sq_;
    std::vector<std::string> ids_;
    TfrConfig config_;
};

inline MtfGrid build_mtf(std::span<const TfrGrid> grids_p, std::span<const TfrGrid> grids_q) {
    if (grids_p.empty()) throw ConfigError("multichannel", "at least one branch is required");
    if (grids_p.size() != grids_q.size()) throw ConfigError("multichannel", "P and Q grid lists differ in length");
    MtfAccumulator acc;
    for (std::size_t i = 0; i < grids_p.size(); ++i) {
        acc.add(grids_p[i]);
        acc.add(grids_q[i]);
    }
    return std::move(acc).finish();
}

// ---------------------------------------------------------------------------
// Sliding-window percentile surface

struct PercentileWindow {
    std::size_t half_bins = 0;
    std::size_t half_rows = 0;
    double level = 0.97;
};

/// Centered rectangle of total size window_hz x window_s, in half-widths.
inline PercentileWindow percentile_window(double window_hz, double window_s, double level, double fs, int n_bins) {
    const double df = fs / n_bins;
    if (!(window_hz > df)) throw ConfigError("multichannel", "threshold window must be wider than one bin");
    if (!(window_s > 1.0 / fs)) throw ConfigError("multichannel", "threshold window must span more than one sample");
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("multichannel", "percentile level must lie in (0, 1)");
    return {static_cast<std::size_t>(std::lround(0.5 * window_hz / df)),
            static_cast<std::size_t>(std::lround(0.5 * window_s * fs)), level};
}

/// 1-based nearest rank of a quantile level among n sorted values.
inline std::size_t nearest_rank(double level, std::size_t n) {
    const auto r = static_cast<std::size_t>(std::ceil(level * static_cast<double>(n) - 1e-9));
    return std::clamp<std::size_t>(r, 1, n);
}

namespace detail {

class Fenwick {
public:
    explicit Fenwick(std::size_t n) : tree_(n + 1, 0), log_(0) {
        while ((std::size_t{1} << (log_ + 1)) <= n) ++log_;
    }
    void add(std::size_t i, int delta) {
        for (++i; i < tree_.size(); i += i & (~i + 1)) tree_[i] += delta;
    }
    // 0-based position of the r-th (1-based) present element.
    std::size_t find(std::size_t r) const {
        std::size_t pos = 0;
        auto rem = static_cast<long long>(r);
        for (int b = log_; b >= 0; --b) {
            const std::size_t next = pos + (std::size_t{1} << b);
            if (next < tree_.size() && tree_[next] < rem) {
                pos = next;
                rem -= tree_[next];
            }
        }
        return pos;
    }

private:
    std::vector<long long> tree_;
    int log_;
};

}  // namespace detail

/// beta[m,k] = nearest-rank `level` quantile of mag over the centered
/// rectangle, clipped at the source rows (default all rows) and the column range.
/// Only rows in `out_rows` are evaluated; with stride > 1 intermediate rows
/// are linearly interpolated. The result is out_rows.size() x cols.size().
inline Grid<double> percentile_surface(const Grid<double>& mag, const PercentileWindow& win, IndexRange out_rows,
                                       IndexRange cols, std::size_t stride = 1,
                                       std::optional<IndexRange> src_rows = std::nullopt) {
    const IndexRange src = src_rows.value_or(IndexRange{0, mag.rows()});
    if (out_rows.empty() || cols.empty() || src.end > mag.rows() || cols.end > mag.cols() ||
        out_rows.begin < src.begin || out_rows.end > src.end) {
        throw ConfigError("multichannel", "percentile_surface: row/column range outside the grid");
    }
    if (2 * win.half_bins + 1 > cols.size()) {
        throw ConfigError("multichannel", "threshold window larger than the grid");
    }
    if (!(win.level > 0.0 && win.level < 1.0)) throw ConfigError("multichannel", "percentile level must lie in (0, 1)");
    stride = std::max<std::size_t>(stride, 1);

    const std::size_t r_lo = std::max(src.begin, out_rows.begin > win.half_rows ? out_rows.begin - win.half_rows : 0);
    const std::size_t r_hi = std::min(src.end, out_rows.end + win.half_rows);
    const std::size_t ncols = cols.size();
    const std::size_t nvals = (r_hi - r_lo) * ncols;

    // Global ranks of every value in the touched region (ties by position).
    std::vector<std::size_t> order(nvals);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto value_at = [&](std::size_t idx) { return mag(r_lo + idx / ncols, cols.begin + idx % ncols); };
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double va = value_at(a), vb = value_at(b);
        return va < vb || (va == vb && a < b);
    });
    std::vector<std::size_t> rank(nvals);
    for (std::size_t r = 0; r < nvals; ++r) rank[order[r]] = r;

    detail::Fenwick tree(nvals);
    Grid<double> beta(out_rows.size(), ncols);

    std::vector<std::size_t> eval_rows;
    for (std::size_t m = out_rows.begin; m < out_rows.end; m += stride) eval_rows.push_back(m);
    if (eval_rows.back() != out_rows.end - 1) eval_rows.push_back(out_rows.end - 1);

    for (std::size_t c = 0; c < ncols; ++c) {
        const std::size_t b_lo = c > win.half_bins ? c - win.half_bins : 0;
        const std::size_t b_hi = std::min(ncols - 1, c + win.half_bins);
        const std::size_t width = b_hi - b_lo + 1;
        auto touch_row = [&](std::size_t m, int delta) {
            const std::size_t base = (m - r_lo) * ncols;
            for (std::size_t b = b_lo; b <= b_hi; ++b) tree.add(rank[base + b], delta);
        };
        std::size_t lo = 0, hi = 0;  // rows [lo, hi) currently in the tree
        bool started = false;
        for (std::size_t m : eval_rows) {
            const std::size_t want_lo = std::max(r_lo, m > win.half_rows ? m - win.half_rows : 0);
            const std::size_t want_hi = std::min(r_hi, m + win.half_rows + 1);
            if (!started) {
                lo = hi = want_lo;
                started = true;
            }
            while (hi < want_hi) touch_row(hi++, +1);
            while (lo < want_lo) touch_row(lo++, -1);
            const std::size_t count = (hi - lo) * width;
            const std::size_t pos = tree.find(nearest_rank(win.level, count));
            beta(m - out_rows.begin, c) = value_at(order[pos]);
        }
        while (lo < hi) touch_row(lo++, -1);

        for (std::size_t i = 0; i + 1 < eval_rows.size(); ++i) {
            const std::size_t a = eval_rows[i], b = eval_rows[i + 1];
            const double va = beta(a - out_rows.begin, c), vb = beta(b - out_rows.begin, c);
            for (std::size_t m = a + 1; m < b; ++m) {
                const double t = static_cast<double>(m - a) / static_cast<double>(b - a);
                beta(m - out_rows.begin, c) = va + (vb - va) * t;
            }
        }
    }
    return beta;
}

// ---------------------------------------------------------------------------
// Spectrum-dependent threshold

struct ThresholdConfig {
    double window_hz = 0.1;
    double window_s = 25.0;
    double level = 0.97;
    std::size_t stride = 1;
};

struct SpectralThreshold {
    std::vector<double> gamma;  ///< per bin, length N
    double window_hz = 0.0;
    double window_s = 0.0;
    double level = 0.0;
};

/// gamma[k] = min over the given rows of beta[., k].
inline std::vector<double> min_over_rows(const Grid<double>& beta, IndexRange rows) {
    if (rows.empty() || rows.end > beta.rows()) throw ConfigError("multichannel", "empty pre-event interval");
    std::vector<double> gamma(beta.row(rows.begin).begin(), beta.row(rows.begin).end());
    for (std::size_t m = rows.begin + 1; m < rows.end; ++m) {
        const auto row = beta.row(m);
        for (std::size_t k = 0; k < gamma.size(); ++k) gamma[k] = std::min(gamma[k], row[k]);
    }
    return gamma;
}

/// Threshold from the pre-event rows of a magnitude grid. beta is evaluated
/// on those rows only and its windows may reach into neighbouring rows. It is
/// computed on the positive-frequency half [0, N/2] and mirrored to the upper bins.
/// When `bins` is given only those positive-frequency bins are computed (with
/// the same values as a full evaluation); every other bin is +infinity.
inline SpectralThreshold build_threshold(const Grid<double>& mag, const ThresholdConfig& cfg, double fs,
                                         IndexRange pre_rows, std::optional<IndexRange> bins = std::nullopt) {
    if (pre_rows.empty()) throw ConfigError("multichannel", "empty pre-event interval");
    const int n_bins = static_cast<int>(mag.cols());
    const auto win = percentile_window(cfg.window_hz, cfg.window_s, cfg.level, fs, n_bins);
    const std::size_t half = mag.cols() / 2;
    IndexRange keep{0, half + 1};
    if (bins) keep = {std::min(bins->begin, half + 1), std::min(bins->end, half + 1)};
    if (keep.empty()) throw ConfigError("multichannel", "threshold bin range is empty");
    // Pad by the window so clipping at the evaluated range matches a full evaluation.
    const IndexRange eval{keep.begin > win.half_bins ? keep.begin - win.half_bins : 0,
                          std::min(half + 1, keep.end + win.half_bins)};
    const auto beta = percentile_surface(mag, win, pre_rows, eval, cfg.stride);
    const auto gamma = min_over_rows(beta, {0, beta.rows()});
    SpectralThreshold out{std::vector<double>(mag.cols(), std::numeric_limits<double>::infinity()), cfg.window_hz,
                          cfg.window_s, cfg.level};
    for (std::size_t k = keep.begin; k < keep.end; ++k) {
        out.gamma[k] = gamma[k - eval.begin];
        if (k > 0 && mag.cols() - k > half) out.gamma[mag.cols() - k] = out.gamma[k];
    }
    return out;
}

}  // namespace fosst
