#pragma once

#include "fosst/errors.hpp"
#include "fosst/grid.hpp"
#include "fosst/ridge.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fosst {

enum class SlopeMethod { LeastSquares, TheilSen };

inline SlopeMethod parse_slope_method(const std::string& name) {
    if (name == "ols") return SlopeMethod::LeastSquares;
    if (name == "theil-sen") return SlopeMethod::TheilSen;
    throw ConfigError("def", "unknown slope method '" + name + "' (expected ols|theil-sen)");
}

inline std::string to_string(SlopeMethod m) { return m == SlopeMethod::LeastSquares ? "ols" : "theil-sen"; }

/// Dissipating energy flow of one branch for one component.
struct DefSeries {
    std::string branch_id;
    int rank = 0;
    IndexRange interval;
    std::vector<double> w;  ///< w[i] belongs to sample interval.begin + i; w[0] = 0
    double slope = 0.0;     ///< energy units per second

    double w_final() const { return w.empty() ? 0.0 : w.back(); }
};

/// Slope of y against t = i / fs.
inline double fit_slope(std::span<const double> y, double fs, SlopeMethod method = SlopeMethod::LeastSquares) {
    const std::size_t n = y.size();
    if (n < 2) throw NumericError("def", "slope needs at least two samples");
    if (method == SlopeMethod::TheilSen) {
        std::vector<double> slopes;
        slopes.reserve(n * (n - 1) / 2);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) slopes.push_back((y[j] - y[i]) * fs / static_cast<double>(j - i));
        const std::size_t mid = slopes.size() / 2;
        std::nth_element(slopes.begin(), slopes.begin() + static_cast<std::ptrdiff_t>(mid), slopes.end());
        const double upper = slopes[mid];
        if (slopes.size() % 2 == 1) return upper;
        const double lower = *std::max_element(slopes.begin(), slopes.begin() + static_cast<std::ptrdiff_t>(mid));
        return 0.5 * (lower + upper);
    }
    const double t_mean = 0.5 * static_cast<double>(n - 1) / fs;
    double y_mean = 0.0;
    for (double v : y) y_mean += v;
    y_mean /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dt = static_cast<double>(i) / fs - t_mean;
        sxy += dt * (y[i] - y_mean);
        sxx += dt * dt;
    }
    return sxy / sxx;
}

/// W[m] = W[m-1] + P[m-1] (theta[m] - theta[m-1]) + Q[m-1] / v_raw[m-1] (v[m] - v[m-1])
/// over the interval, with W = 0 at its first sample. All inputs are full-length
/// series indexed by sample; theta in radians.
inline DefSeries def_flow(std::span<const double> p, std::span<const double> q, std::span<const double> theta,
                          std::span<const double> v, std::span<const double> v_raw, IndexRange interval, double fs,
                          SlopeMethod method = SlopeMethod::LeastSquares) {
    const std::size_t n = p.size();
    if (q.size() != n || theta.size() != n || v.size() != n || v_raw.size() != n) {
        throw ConfigError("def", "input series differ in length");
    }
    if (interval.size() < 2 || interval.end > n) throw ConfigError("def", "integration interval outside the series");
    DefSeries out;
    out.interval = interval;
    out.w.assign(interval.size(), 0.0);
    for (std::size_t m = interval.begin + 1; m < interval.end; ++m) {
        const double vr = v_raw[m - 1];
        if (!(std::abs(vr) > 0.0) || !std::isfinite(vr)) {
            throw NumericError("def", "voltage magnitude is zero or missing at sample " + std::to_string(m - 1));
        }
        const std::size_t i = m - interval.begin;
        out.w[i] = out.w[i - 1] + p[m - 1] * (theta[m] - theta[m - 1]) + q[m - 1] / vr * (v[m] - v[m - 1]);
    }
    out.slope = fit_slope(out.w, fs, method);
    return out;
}

struct IntervalPolicy {
    double gamma_factor = 2.0;  ///< ridge magnitude must exceed this multiple of the threshold
    double min_periods = 2.0;   ///< interval is widened to at least this many oscillation periods
};

/// Longest run of the ridge support inside `allowed` where the ridge
/// magnitude exceeds gamma_factor * gamma, widened symmetrically (within the
/// allowed support) to min_periods periods of the ridge's mean frequency.
/// Falls back to the whole allowed support when no sample qualifies.
inline IndexRange default_interval(const Ridge& ridge, std::span<const double> gamma, IndexRange allowed,
                                   const RidgeAxes& ax, const IntervalPolicy& policy = {}) {
    const std::size_t lo = std::max(ridge.m_start, allowed.begin);
    const std::size_t hi = std::min(ridge.m_end() + 1, allowed.end);
    if (hi <= lo + 1) throw NumericError("def", "ridge " + std::to_string(ridge.rank) + " has no usable support");

    IndexRange best{lo, lo};
    std::size_t run_start = lo;
    bool in_run = false;
    for (std::size_t m = lo; m <= hi; ++m) {
        bool strong = false;
        if (m < hi) {
            const std::size_t i = m - ridge.m_start;
            strong = ridge.magnitudes[i] > policy.gamma_factor * gamma[static_cast<std::size_t>(ridge.bins[i])];
        }
        if (strong && !in_run) {
            run_start = m;
            in_run = true;
        } else if (!strong && in_run) {
            if (m - run_start > best.size()) best = {run_start, m};
            in_run = false;
        }
    }
    if (best.size() < 2) return {lo, hi};

    const double f = ridge.mean_freq_hz(ax);
    const auto want = f > 0.0 ? static_cast<std::size_t>(std::ceil(policy.min_periods * ax.fs / f)) : hi - lo;
    while (best.size() < want && (best.begin > lo || best.end < hi)) {
        if (best.begin > lo) --best.begin;
        if (best.size() < want && best.end < hi) ++best.end;
    }
    return best;
}

struct DeviceSlope {
    std::string device_id;
    double slope = 0.0;
};

struct SourceRanking {
    int component = 0;
    std::vector<DeviceSlope> ranking;  ///< slope descending
    std::optional<std::string> verdict;
};

inline constexpr double kDefaultSourceMargin = 2.0;

/// Orders devices by slope (descending, ties by id). The top device is the
/// verdict when its slope is positive and either the runner-up is not
/// positive or the top slope exceeds margin times the runner-up.
inline SourceRanking rank_sources(std::vector<DeviceSlope> slopes, int component,
                                  double margin = kDefaultSourceMargin) {
    if (slopes.empty()) throw ConfigError("def", "no devices to rank");
    std::sort(slopes.begin(), slopes.end(), [](const DeviceSlope& a, const DeviceSlope& b) {
        return a.slope != b.slope ? a.slope > b.slope : a.device_id < b.device_id;
    });
    SourceRanking out{component, std::move(slopes), std::nullopt};
    const auto& top = out.ranking.front();
    if (top.slope > 0.0) {
        const bool clear = out.ranking.size() == 1 || out.ranking[1].slope <= 0.0 ||
                           top.slope > margin * out.ranking[1].slope;
        if (clear) out.verdict = top.device_id;
    }
    return out;
}

struct ComponentDef {
    int component = 0;
    double mean_freq_hz = 0.0;
    std::vector<DefSeries> per_branch;
    SourceRanking ranking;
};

inline nlohmann::json to_json(const ComponentDef& c, double fs) {
    nlohmann::json branches = nlohmann::json::array();
    for (const auto& s : c.per_branch) {
        branches.push_back({{"branch_id", s.branch_id},
                            {"slope", s.slope},
                            {"w_final", s.w_final()},
                            {"t_start", static_cast<double>(s.interval.begin) / fs},
                            {"t_end", static_cast<double>(s.interval.end - 1) / fs}});
    }
    nlohmann::json ranking = nlohmann::json::array();
    for (const auto& d : c.ranking.ranking) ranking.push_back({{"device_id", d.device_id}, {"slope", d.slope}});
    return {{"component_h", c.component},
            {"mean_freq_hz", c.mean_freq_hz},
            {"per_branch", std::move(branches)},
            {"ranking", std::move(ranking)},
            {"verdict", c.ranking.verdict ? *c.ranking.verdict : std::string("inconclusive")}};
}

}  // namespace fosst
