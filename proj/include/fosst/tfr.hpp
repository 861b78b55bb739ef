#pragma once

#include "fosst/csv.hpp"
#include "fosst/errors.hpp"
#include "fosst/fft.hpp"
#include "fosst/grid.hpp"
#include "fosst/window.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fosst {

using cplx = std::complex<double>;

enum class TfrKind { Stft, Fsst, Fsst2 };

inline std::string_view to_string(TfrKind kind) {
    switch (kind) {
        case TfrKind::Stft: return "stft";
        case TfrKind::Fsst: return "fsst";
        case TfrKind::Fsst2: return "fsst2";
    }
    return "?";
}

inline TfrKind parse_tfr_kind(std::string_view name) {
    if (name == "stft") return TfrKind::Stft;
    if (name == "fsst") return TfrKind::Fsst;
    if (name == "fsst2") return TfrKind::Fsst2;
    throw ConfigError("tfr", "unknown transform '" + std::string(name) + "' (expected stft|fsst|fsst2)");
}

struct TfrConfig {
    int n_bins = 1024;
    WindowSpec window;
    TfrKind kind = TfrKind::Stft;
    double reassign_rel = 1e-6;  ///< |V^g| below this fraction of the grid maximum is not reassigned
    double denom_rel = 1e-6;     ///< second-order estimate used when |denominator| > this * (column max)^2

    double fs() const noexcept { return window.fs; }
    double bin_width() const noexcept { return window.fs / n_bins; }
    double bin_freq(std::size_t k) const noexcept { return static_cast<double>(k) * bin_width(); }
    std::size_t half_bins() const noexcept { return static_cast<std::size_t>(n_bins) / 2; }
};

/// L x N complex coefficients; row m is time sample m, column k is bin k.
struct TfrGrid {
    TfrConfig config;
    Grid<cplx> coeffs;
    std::string channel_id;

    std::size_t length() const noexcept { return coeffs.rows(); }
    std::size_t bins() const noexcept { return coeffs.cols(); }
};

enum class WindowVariant { G, G1, G2, TG, TG1 };

inline std::span<const double> taps(const WindowSpec& w, WindowVariant v) {
    switch (v) {
        case WindowVariant::G: return w.g;
        case WindowVariant::G1: return w.g1;
        case WindowVariant::G2: return w.g2;
        case WindowVariant::TG: return w.tg;
        case WindowVariant::TG1: return w.tg1;
    }
    return w.g;
}

namespace detail {

template <class Sample>
void check_transform_input(std::span<const Sample> x, const TfrConfig& cfg) {
    if (cfg.n_bins < 3) throw ConfigError("tfr", "need at least 3 frequency bins");
    if (cfg.window.g.empty()) throw ConfigError("tfr", "window not initialised");
    if (2 * cfg.window.m_half + 1 > cfg.n_bins) throw ConfigError("tfr", "window longer than the number of bins");
    if (x.size() < cfg.window.size()) {
        throw DataError("tfr", "signal too short: " + std::to_string(x.size()) + " samples, window needs " +
                                   std::to_string(cfg.window.size()));
    }
}

inline constexpr double two_pi = 2.0 * std::numbers::pi;

// a / b without the C99 inf/nan recovery of std::complex division.
inline cplx quotient(cplx a, cplx b) {
    const double d = std::norm(b);
    return {(a.real() * b.real() + a.imag() * b.imag()) / d, (a.imag() * b.real() - a.real() * b.imag()) / d};
}

inline double modulus(cplx v) { return std::sqrt(std::norm(v)); }

// Reassignment operators of one STFT column, evaluated on bins [0, bins).
struct ColumnOperators {
    std::vector<cplx> vg, vg1, vg2, vtg, vtg1;
    std::vector<double> omega;   // first-order local IF, Hz (NaN when invalid)
    std::vector<double> qhat;    // chirp rate, Hz/s (NaN when the second-order test fails)
    std::vector<double> omega2;  // second-order IF, Hz (falls back to omega)

    explicit ColumnOperators(std::size_t n)
        : vg(n), vg1(n), vg2(n), vtg(n), vtg1(n), omega(n), qhat(n), omega2(n) {}

    // vg must already hold the g-window column.
    template <class Sample>
    void compute(SegmentDft& dft, std::span<const Sample> x, std::ptrdiff_t m, const TfrConfig& cfg,
                 bool second_order, double gamma_abs, std::size_t bins) {
        constexpr double nan = std::numeric_limits<double>::quiet_NaN();
        dft.run(x, m, std::span<const double>(cfg.window.g1), vg1);
        double col_max_sq = 0.0;
        if (second_order) {
            dft.run(x, m, std::span<const double>(cfg.window.g2), vg2);
            dft.run(x, m, std::span<const double>(cfg.window.tg), vtg);
            dft.run(x, m, std::span<const double>(cfg.window.tg1), vtg1);
            for (const auto& v : vg) col_max_sq = std::max(col_max_sq, std::norm(v));
        }
        const double df = cfg.bin_width();
        const double den_floor = cfg.denom_rel * col_max_sq;
        const double gamma_sq = gamma_abs * gamma_abs;
        for (std::size_t k = 0; k < bins; ++k) {
            const double mag_sq = std::norm(vg[k]);
            if (!(mag_sq >= gamma_sq) || mag_sq == 0.0) {
                omega[k] = qhat[k] = omega2[k] = nan;
                continue;
            }
            omega[k] = static_cast<double>(k) * df - quotient(vg1[k], vg[k]).imag() / two_pi;
            omega2[k] = omega[k];
            qhat[k] = nan;
            if (!second_order) continue;
            const cplx den = vtg[k] * vg1[k] - vtg1[k] * vg[k];
            if (!(modulus(den) > den_floor)) continue;
            const cplx c1 = quotient(vg2[k] * vg[k] - vg1[k] * vg1[k], den);
            const cplx q = cplx(c1.imag(), -c1.real()) / two_pi;  // c1 / (2 pi i)
            const cplx delay = quotient(vtg[k], vg[k]);
            qhat[k] = q.real();
            omega2[k] = omega[k] - (q * delay).real();
        }
    }
};

template <class Sample>
double fill_stft(std::span<const Sample> x, const TfrConfig& cfg, WindowVariant variant, SegmentDft& dft,
                 Grid<cplx>& out) {
    const auto w = taps(cfg.window, variant);
    double peak_sq = 0.0;
    for (std::size_t m = 0; m < x.size(); ++m) {
        auto row = out.row(m);
        dft.run(x, static_cast<std::ptrdiff_t>(m), w, row);
        for (const auto& v : row) peak_sq = std::max(peak_sq, std::norm(v));
    }
    return std::sqrt(peak_sq);
}

// For real input only bins [0, N/2] are evaluated; the coefficient of the
// mirror bin N - k is conj(V[k]) and its reassignment target is N - target.
template <class Sample>
TfrGrid synchrosqueeze(std::span<const Sample> x, TfrConfig cfg, bool second_order, std::string id) {
    check_transform_input(x, cfg);
    const auto n = static_cast<std::size_t>(cfg.n_bins);
    constexpr bool real_input = !is_complex_v<Sample>;
    SegmentDft dft(n, real_input);
    TfrGrid out{cfg, Grid<cplx>(x.size(), n), std::move(id)};
    out.config.kind = second_order ? TfrKind::Fsst2 : TfrKind::Fsst;
    const double peak = fill_stft(x, cfg, WindowVariant::G, dft, out.coeffs);
    const double gamma_abs = cfg.reassign_rel * peak;
    const double scale = static_cast<double>(n) / cfg.fs();
    const std::size_t bins = real_input ? n / 2 + 1 : n;
    const auto nn = static_cast<std::ptrdiff_t>(n);

    ColumnOperators ops(n);
    for (std::size_t m = 0; m < x.size(); ++m) {
        auto row = out.coeffs.row(m);
        std::copy(row.begin(), row.end(), ops.vg.begin());
        std::fill(row.begin(), row.end(), cplx{});
        ops.compute(dft, x, static_cast<std::ptrdiff_t>(m), cfg, second_order, gamma_abs, bins);
        const auto& target_freq = second_order ? ops.omega2 : ops.omega;
        for (std::size_t k = 0; k < bins; ++k) {
            const double f = target_freq[k];
            if (std::isnan(f)) continue;
            const double target = std::round(f * scale);
            if (!(target > -2.0 * nn && target < 2.0 * nn)) continue;
            const auto j = static_cast<std::ptrdiff_t>(target);
            if (j >= 0 && j < nn) row[static_cast<std::size_t>(j)] += ops.vg[k];
            const bool self_mirror = k == 0 || (n % 2 == 0 && k == n / 2);
            if (real_input && !self_mirror) {
                const std::ptrdiff_t jm = nn - j;
                if (jm >= 0 && jm < nn) row[static_cast<std::size_t>(jm)] += std::conj(ops.vg[k]);
            }
        }
    }
    return out;
}

}  // namespace detail

/// Discrete STFT  V[m,k] = (1/N) sum_{n=-M..M} f[m+n] w[n] exp(-2 pi i k n / N),
/// zero-padded outside the record. `variant` selects which window is used.
template <class Sample>
TfrGrid stft(std::span<const Sample> x, const TfrConfig& cfg, WindowVariant variant = WindowVariant::G,
             std::string id = {}) {
    detail::check_transform_input(x, cfg);
    const auto n = static_cast<std::size_t>(cfg.n_bins);
    detail::SegmentDft dft(n, !detail::is_complex_v<Sample>);
    TfrGrid out{cfg, Grid<cplx>(x.size(), n), std::move(id)};
    out.config.kind = TfrKind::Stft;
    detail::fill_stft(x, cfg, variant, dft, out.coeffs);
    return out;
}

/// First-order synchrosqueezing: each STFT coefficient is moved to the bin
/// nearest its local instantaneous frequency.
template <class Sample>
TfrGrid fsst(std::span<const Sample> x, const TfrConfig& cfg, std::string id = {}) {
    return detail::synchrosqueeze(x, cfg, false, std::move(id));
}

/// Second-order synchrosqueezing using the chirp-corrected frequency estimate.
template <class Sample>
TfrGrid fsst2(std::span<const Sample> x, const TfrConfig& cfg, std::string id = {}) {
    return detail::synchrosqueeze(x, cfg, true, std::move(id));
}

/// Dispatches on cfg.kind.
template <class Sample>
TfrGrid transform(std::span<const Sample> x, const TfrConfig& cfg, std::string id = {}) {
    switch (cfg.kind) {
        case TfrKind::Stft: return stft(x, cfg, WindowVariant::G, std::move(id));
        case TfrKind::Fsst: return fsst(x, cfg, std::move(id));
        case TfrKind::Fsst2: return fsst2(x, cfg, std::move(id));
    }
    throw ConfigError("tfr", "bad transform kind");
}

inline TfrGrid transform(const std::vector<double>& x, const TfrConfig& cfg, std::string id = {}) {
    return transform(std::span<const double>(x), cfg, std::move(id));
}

/// Local instantaneous frequency (Hz) from the g and g' STFTs. Entries with
/// |V^g| below gamma_abs are NaN.
inline Grid<double> local_if_estimate(const TfrGrid& vg, const TfrGrid& vg1, double gamma_abs) {
    if (vg.coeffs.rows() != vg1.coeffs.rows() || vg.coeffs.cols() != vg1.coeffs.cols()) {
        throw ConfigError("tfr", "local_if_estimate: grid shapes differ");
    }
    const double df = vg.config.bin_width();
    Grid<double> out(vg.coeffs.rows(), vg.coeffs.cols(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t m = 0; m < out.rows(); ++m) {
        for (std::size_t k = 0; k < out.cols(); ++k) {
            const cplx v = vg.coeffs(m, k);
            const double mag = std::abs(v);
            if (!(mag >= gamma_abs) || mag == 0.0) continue;
            out(m, k) = static_cast<double>(k) * df - (vg1.coeffs(m, k) / v).imag() / detail::two_pi;
        }
    }
    return out;
}

/// Per-cell reassignment operators of the second-order transform, exposed
/// for inspection. NaN marks invalid cells.
struct SecondOrderOperators {
    Grid<double> omega;
    Grid<double> qhat;
    Grid<double> omega2;
};

template <class Sample>
SecondOrderOperators fsst2_operators(std::span<const Sample> x, const TfrConfig& cfg) {
    detail::check_transform_input(x, cfg);
    const auto n = static_cast<std::size_t>(cfg.n_bins);
    detail::SegmentDft dft(n, !detail::is_complex_v<Sample>);
    Grid<cplx> vg(x.size(), n);
    const double peak = detail::fill_stft(x, cfg, WindowVariant::G, dft, vg);
    SecondOrderOperators out{Grid<double>(x.size(), n), Grid<double>(x.size(), n), Grid<double>(x.size(), n)};
    detail::ColumnOperators ops(n);
    for (std::size_t m = 0; m < x.size(); ++m) {
        const auto row = vg.row(m);
        std::copy(row.begin(), row.end(), ops.vg.begin());
        ops.compute(dft, x, static_cast<std::ptrdiff_t>(m), cfg, true, cfg.reassign_rel * peak, n);
        std::copy(ops.omega.begin(), ops.omega.end(), out.omega.row(m).begin());
        std::copy(ops.qhat.begin(), ops.qhat.end(), out.qhat.row(m).begin());
        std::copy(ops.omega2.begin(), ops.omega2.end(), out.omega2.row(m).begin());
    }
    return out;
}

/// Real-signal band summation 2 Re sum_{k=k_lo..k_hi} coeffs[m,k]; the DC
/// bin and (for even N) the Nyquist bin are counted once.
inline double band_sum(const TfrGrid& grid, std::size_t m, int k_lo, int k_hi) {
    const int n = static_cast<int>(grid.bins());
    if (m >= grid.length()) throw ConfigError("tfr", "band_sum: time index out of range");
    if (k_lo < 0 || k_lo > k_hi || k_hi > n / 2) {
        throw ConfigError("tfr", "band_sum: band [" + std::to_string(k_lo) + ", " + std::to_string(k_hi) +
                                     "] outside [0, " + std::to_string(n / 2) + "]");
    }
    const auto row = grid.coeffs.row(m);
    double sum = 0.0;
    for (int k = k_lo; k <= k_hi; ++k) {
        const bool single = k == 0 || (n % 2 == 0 && k == n / 2);
        sum += (single ? 1.0 : 2.0) * row[static_cast<std::size_t>(k)].real();
    }
    return sum;
}

/// Magnitudes |coeffs|.
inline Grid<double> magnitudes(const TfrGrid& grid) {
    Grid<double> out(grid.coeffs.rows(), grid.coeffs.cols());
    const auto src = grid.coeffs.values();
    auto dst = out.values();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = std::abs(src[i]);
    return out;
}

/// Renyi entropy (bits) of the normalised energy distribution |c|^2 over the
/// given rows and columns. Columns default to the positive-frequency half.
inline double renyi_entropy(const Grid<double>& energy, double alpha, IndexRange rows, IndexRange cols) {
    if (!(alpha > 0.0) || alpha == 1.0) throw ConfigError("tfr", "Renyi order must be positive and != 1");
    double total = 0.0;
    for (std::size_t m = rows.begin; m < rows.end; ++m)
        for (std::size_t k = cols.begin; k < cols.end; ++k) total += energy(m, k);
    if (!(total > 0.0)) throw NumericError("tfr", "degenerate spectrum: zero energy");
    double acc = 0.0;
    for (std::size_t m = rows.begin; m < rows.end; ++m) {
        for (std::size_t k = cols.begin; k < cols.end; ++k) {
            const double p = energy(m, k) / total;
            if (p > 0.0) acc += std::pow(p, alpha);
        }
    }
    return std::log2(acc) / (1.0 - alpha);
}

inline double renyi_entropy(const TfrGrid& grid, double alpha = 3.0) {
    Grid<double> e(grid.coeffs.rows(), grid.coeffs.cols());
    for (std::size_t i = 0; i < e.values().size(); ++i) e.values()[i] = std::norm(grid.coeffs.values()[i]);
    return renyi_entropy(e, alpha, {0, e.rows()}, {0, grid.config.half_bins() + 1});
}

inline double renyi_entropy(const TfrGrid& grid, double alpha, IndexRange rows) {
    Grid<double> e(grid.coeffs.rows(), grid.coeffs.cols());
    for (std::size_t i = 0; i < e.values().size(); ++i) e.values()[i] = std::norm(grid.coeffs.values()[i]);
    return renyi_entropy(e, alpha, rows, {0, grid.config.half_bins() + 1});
}

/// Rows m with 3 std_g of window support on both sides.
inline IndexRange interior_rows(const WindowSpec& w, std::size_t length) {
    const auto guard = static_cast<std::size_t>(std::ceil(3.0 * window_stats(w.sigma).std_time * w.fs));
    if (2 * guard >= length) return {0, 0};
    return {guard, length - guard};
}

struct SigmaSelection {
    double sigma = 0.0;
    std::vector<double> candidates;  ///< ascending; those whose window fits n_bins
    std::vector<double> entropies;
    IndexRange rows;                 ///< rows the entropies were evaluated on
};

/// Minimum-entropy window over a grid of sigmas. `entropy(window, rows)` is
/// evaluated on the interior rows shared by every fitting candidate (all rows
/// when they share none); ties go to the smaller sigma.
template <class EntropyFn>
SigmaSelection select_sigma(std::span<const double> sigmas, double fs, int n_bins, std::size_t length,
                            EntropyFn&& entropy) {
    if (sigmas.empty()) throw ConfigError("window", "sigma grid is empty");
    std::vector<double> sorted(sigmas.begin(), sigmas.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<WindowSpec> windows;
    SigmaSelection out;
    out.rows = {0, length};
    for (double s : sorted) {
        try {
            windows.push_back(make_window(s, fs, n_bins));
        } catch (const ConfigError&) {
            continue;  // wider than n_bins allows
        }
        out.candidates.push_back(s);
        const auto in = interior_rows(windows.back(), length);
        out.rows = {std::max(out.rows.begin, in.begin), std::min(out.rows.end, in.end)};
    }
    if (windows.empty()) throw ConfigError("window", "no candidate window fits in n_bins");
    if (out.rows.empty()) out.rows = {0, length};
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const double h = entropy(windows[i], out.rows);
        out.entropies.push_back(h);
        if (h < best) {
            best = h;
            out.sigma = out.candidates[i];
        }
    }
    return out;
}

/// Sigma whose FSST of one channel has minimum order-alpha Renyi entropy.
inline double select_sigma_renyi(std::span<const double> x, double fs, int n_bins, std::span<const double> sigmas,
                                 double alpha = 3.0) {
    return select_sigma(sigmas, fs, n_bins, x.size(),
                        [&](const WindowSpec& w, IndexRange rows) {
                            TfrConfig cfg;
                            cfg.n_bins = n_bins;
                            cfg.window = w;
                            cfg.kind = TfrKind::Fsst;
                            return renyi_entropy(transform(x, cfg), alpha, rows);
                        })
        .sigma;
}

/// Magnitude export: header `time_s,<bin freqs>` over bins [0, N/2], one row per sample.
inline void write_magnitude_csv(const std::filesystem::path& path, const Grid<double>& mag, const TfrConfig& cfg,
                                double t0 = 0.0) {
    const std::size_t kmax = std::min(mag.cols(), cfg.half_bins() + 1);
    csv::Table table;
    table.header.push_back("time_s");
    std::vector<double> time(mag.rows());
    for (std::size_t m = 0; m < mag.rows(); ++m) time[m] = t0 + static_cast<double>(m) / cfg.fs();
    table.columns.push_back(std::move(time));
    for (std::size_t k = 0; k < kmax; ++k) {
        std::string name;
        csv::append_number(name, cfg.bin_freq(k));
        table.header.push_back(std::move(name));
        std::vector<double> col(mag.rows());
        for (std::size_t m = 0; m < mag.rows(); ++m) col[m] = mag(m, k);
        table.columns.push_back(std::move(col));
    }
    csv::write(path, table);
}

/// Reads a magnitude export back into an L x n_bins grid (bins above N/2 stay zero).
inline Grid<double> read_magnitude_csv(const std::filesystem::path& path, int n_bins) {
    const auto table = csv::read(path);
    if (table.columns.size() < 2) throw DataError("tfr", path.string() + ": no bin columns");
    const std::size_t kcount = table.columns.size() - 1;
    if (kcount > static_cast<std::size_t>(n_bins)) throw DataError("tfr", path.string() + ": more columns than bins");
    Grid<double> out(table.rows(), static_cast<std::size_t>(n_bins));
    for (std::size_t k = 0; k < kcount; ++k)
        for (std::size_t m = 0; m < table.rows(); ++m) out(m, k) = table.columns[k + 1][m];
    return out;
}

}  // namespace fosst
