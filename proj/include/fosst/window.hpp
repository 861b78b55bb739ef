#pragma once

#include "fosst/errors.hpp"

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace fosst {

/// Gaussian window g(t) = exp(-pi t^2 / sigma^2) and the variants needed by
/// the second-order transform, sampled at t = n / fs for n in [-M, M].
struct WindowSpec {
    double sigma = 0.0;  ///< seconds
    double fs = 0.0;     ///< Hz
    int m_half = 0;      ///< M
    std::vector<double> g;    ///< g
    std::vector<double> g1;   ///< g'   (1/s)
    std::vector<double> g2;   ///< g''  (1/s^2)
    std::vector<double> tg;   ///< t g  (s)
    std::vector<double> tg1;  ///< t g' (dimensionless)

    std::size_t size() const noexcept { return g.size(); }
    double center() const noexcept { return g[static_cast<std::size_t>(m_half)]; }
};

struct WindowStats {
    double std_time;  ///< seconds
    double std_freq;  ///< Hz
    double delta;     ///< separation resolution, 3 * std_freq
};

inline WindowStats window_stats(double sigma) {
    const double root = std::sqrt(2.0 * std::numbers::pi);
    const double st = sigma / root;
    const double sf = 1.0 / (root * sigma);
    return {st, sf, 3.0 * sf};
}

/// Window width sigma that gives the requested time-domain standard deviation.
inline double sigma_for_std_time(double std_time) { return std_time * std::sqrt(2.0 * std::numbers::pi); }

inline constexpr double kWindowTruncation = 1e-8;
inline constexpr double kWindowMaxEdge = 1e-2;

/// Tabulates the window analytically. M is the smallest half-length with
/// g(M/fs) < 1e-8, capped at (n_bins - 1) / 2.
inline WindowSpec make_window(double sigma, double fs, int n_bins) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("window", "sigma must be positive");
    if (!(fs > 0.0) || !std::isfinite(fs)) throw ConfigError("window", "sampling rate must be positive");
    if (n_bins < 3) throw ConfigError("window", "need at least 3 frequency bins");

    const double pi = std::numbers::pi;
    const double t_cut = sigma * std::sqrt(std::log(1.0 / kWindowTruncation) / pi);
    const int m_trunc = static_cast<int>(std::floor(t_cut * fs)) + 1;
    const int m_cap = (n_bins - 1) / 2;
    const int m = std::min(m_trunc, m_cap);
    auto gauss = [&](double t) { return std::exp(-pi * t * t / (sigma * sigma)); };
    if (m < m_trunc && gauss(m / fs) > kWindowMaxEdge) {
        throw ConfigError("window", "window too wide: sigma=" + std::to_string(sigma) + " s needs more than " +
                                        std::to_string(n_bins) + " bins");
    }

    WindowSpec w;
    w.sigma = sigma;
    w.fs = fs;
    w.m_half = m;
    const auto len = static_cast<std::size_t>(2 * m + 1);
    w.g.resize(len);
    w.g1.resize(len);
    w.g2.resize(len);
    w.tg.resize(len);
    w.tg1.resize(len);
    const double a = 2.0 * pi / (sigma * sigma);
    for (int n = -m; n <= m; ++n) {
        const auto i = static_cast<std::size_t>(n + m);
        const double t = n / fs;
        const double g = gauss(t);
        w.g[i] = g;
        w.g1[i] = -a * t * g;
        w.g2[i] = (a * a * t * t - a) * g;
        w.tg[i] = t * g;
        w.tg1[i] = t * w.g1[i];
    }
    return w;
}

}  // namespace fosst
