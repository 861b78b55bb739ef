#pragma once

#include "fosst/errors.hpp"
#include "fosst/ridge.hpp"
#include "fosst/tfr.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace fosst {

/// Per-sample reconstruction band [k_lo[i], k_hi[i]] over the support of
/// one ridge. k_lo > k_hi marks an empty band at that sample.
struct FilterBand {
    std::size_t m_start = 0;
    std::vector<int> k_lo;
    std::vector<int> k_hi;
    int d_min = 5;
    int d_max = 0;

    std::size_t size() const noexcept { return k_lo.size(); }
    bool empty_at(std::size_t i) const { return k_lo[i] > k_hi[i]; }
};

struct FilteredComponent {
    std::string channel_id;
    int rank = 0;
    std::vector<double> samples;  ///< length L, zero outside the ridge support
    FilterBand band;
};

/// ceil(3 std_freq N / fs)
inline int default_band_limit(double sigma, double fs, int n_bins) {
    return static_cast<int>(std::ceil(3.0 * window_stats(sigma).std_freq * n_bins / fs - 1e-9));
}

/// Hard-threshold band around a ridge on one channel's transform. The lower
/// edge is the first bin below bin - d_min whose magnitude is under gamma_f,
/// the upper edge likewise above bin + d_min; both are clamped to bin +- d_max
/// and to [1, N/2 - 1] so the DC bin never contributes.
inline FilterBand ht_band(const TfrGrid& grid, const Ridge& ridge, std::span<const double> gamma_f, int d_min,
                          int d_max) {
    if (d_min < 0 || d_max < d_min) throw ConfigError("filter", "need 0 <= d_min <= d_max");
    if (gamma_f.size() != grid.bins()) throw ConfigError("filter", "threshold length does not match the grid");
    if (ridge.size() == 0 || ridge.m_end() >= grid.length()) throw ConfigError("filter", "ridge outside the grid");
    const int k_min = 1;
    const int k_max = static_cast<int>(grid.bins()) / 2 - 1;
    FilterBand band{ridge.m_start, std::vector<int>(ridge.size()), std::vector<int>(ridge.size()), d_min, d_max};
    for (std::size_t i = 0; i < ridge.size(); ++i) {
        const std::size_t m = ridge.m_start + i;
        const int phi = ridge.bins[i];
        const auto row = grid.coeffs.row(m);
        auto below = [&](int k) { return std::abs(row[static_cast<std::size_t>(k)]) < gamma_f[static_cast<std::size_t>(k)]; };
        int lo = k_min;
        for (int k = phi - d_min - 1; k >= k_min; --k) {
            if (below(k)) {
                lo = k;
                break;
            }
        }
        int hi = k_max;
        for (int k = phi + d_min + 1; k <= k_max; ++k) {
            if (below(k)) {
                hi = k;
                break;
            }
        }
        band.k_lo[i] = std::min(phi, std::max(lo, phi - d_max));
        band.k_hi[i] = std::max(phi, std::min(hi, phi + d_max));
    }
    return band;
}

/// Makes the bands of distinct ridges disjoint. Where two neighbouring bands
/// overlap they are split at the lowest-magnitude bin between the two ridge
/// bins; a ridge sharing its bin with a higher-ranked ridge gets an empty band.
inline void separate_bands(const TfrGrid& grid, std::span<const Ridge> ridges, std::span<FilterBand> bands) {
    if (ridges.size() != bands.size()) throw ConfigError("filter", "one band per ridge is required");
    if (ridges.empty()) return;
    std::size_t m_lo = grid.length(), m_hi = 0;
    for (const auto& r : ridges) {
        m_lo = std::min(m_lo, r.m_start);
        m_hi = std::max(m_hi, r.m_end() + 1);
    }
    struct Entry {
        int phi;
        std::size_t idx;
    };
    std::vector<Entry> active;
    for (std::size_t m = m_lo; m < m_hi; ++m) {
        active.clear();
        for (std::size_t j = 0; j < ridges.size(); ++j)
            if (ridges[j].covers(m)) active.push_back({ridges[j].bin_at(m), j});
        if (active.size() < 2) continue;
        std::sort(active.begin(), active.end(), [&](const Entry& a, const Entry& b) {
            return a.phi != b.phi ? a.phi < b.phi : ridges[a.idx].rank < ridges[b.idx].rank;
        });
        const auto row = grid.coeffs.row(m);
        std::size_t prev = 0;
        for (std::size_t n = 1; n < active.size(); ++n) {
            const auto& a = active[prev];
            const auto& b = active[n];
            auto& band_a = bands[a.idx];
            auto& band_b = bands[b.idx];
            const std::size_t ia = m - band_a.m_start;
            const std::size_t ib = m - band_b.m_start;
            if (a.phi == b.phi) {  // sorted by rank, so b is the lower-ranked ridge
                band_b.k_lo[ib] = 1;
                band_b.k_hi[ib] = 0;
                continue;
            }
            if (band_a.k_hi[ia] >= band_b.k_lo[ib]) {
                int cut = a.phi;
                double cut_mag = std::abs(row[static_cast<std::size_t>(cut)]);
                for (int k = a.phi + 1; k < b.phi; ++k) {
                    const double v = std::abs(row[static_cast<std::size_t>(k)]);
                    if (v < cut_mag) {
                        cut = k;
                        cut_mag = v;
                    }
                }
                band_a.k_hi[ia] = std::min(band_a.k_hi[ia], cut);
                band_b.k_lo[ib] = std::max(band_b.k_lo[ib], cut + 1);
            }
            prev = n;
        }
    }
}

/// Bands for every ridge on one channel, made disjoint.
inline std::vector<FilterBand> filter_bands(const TfrGrid& grid, std::span<const Ridge> ridges,
                                            std::span<const double> gamma_f, int d_min, int d_max) {
    std::vector<FilterBand> bands;
    bands.reserve(ridges.size());
    for (const auto& r : ridges) bands.push_back(ht_band(grid, r, gamma_f, d_min, d_max));
    separate_bands(grid, ridges, bands);
    return bands;
}

/// Time-domain component: the band sum of the transform at each supported sample.
inline FilteredComponent reconstruct_component(const TfrGrid& grid, const Ridge& ridge, const FilterBand& band) {
    if (band.m_start != ridge.m_start || band.size() != ridge.size() || band.k_hi.size() != band.k_lo.size()) {
        throw ConfigError("filter", "band support does not match the ridge");
    }
    FilteredComponent out{grid.channel_id, ridge.rank, std::vector<double>(grid.length(), 0.0), band};
    for (std::size_t i = 0; i < band.size(); ++i) {
        if (band.empty_at(i)) continue;
        out.samples[band.m_start + i] = band_sum(grid, band.m_start + i, band.k_lo[i], band.k_hi[i]);
    }
    return out;
}

/// ||estimate - reference|| / ||reference||
inline double rmse(std::span<const double> reference, std::span<const double> estimate) {
    if (reference.size() != estimate.size()) throw ConfigError("filter", "rmse: length mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const double d = estimate[i] - reference[i];
        num += d * d;
        den += reference[i] * reference[i];
    }
    if (!(den > 0.0)) throw NumericError("filter", "rmse: reference signal is zero");
    return std::sqrt(num / den);
}

/// Population variance.
inline double variance(std::span<const double> x) {
    if (x.empty()) return 0.0;
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double acc = 0.0;
    for (double v : x) acc += (v - mean) * (v - mean);
    return acc / static_cast<double>(x.size());
}

inline double snr_in(std::span<const double> clean, double noise_var) {
    const double var = variance(clean);
    if (!(var > 0.0)) throw NumericError("filter", "SNR undefined for a constant signal");
    if (!(noise_var > 0.0)) throw NumericError("filter", "SNR undefined for zero noise variance");
    return 10.0 * std::log10(var / noise_var);
}

inline double noise_variance_for(std::span<const double> clean, double snr_db) {
    const double var = variance(clean);
    if (!(var > 0.0)) throw NumericError("filter", "SNR undefined for a constant signal");
    return var / std::pow(10.0, snr_db / 10.0);
}

/// clean + white Gaussian noise at the requested input SNR; deterministic per seed.
inline std::vector<double> add_noise(std::span<const double> clean, double snr_db, std::uint64_t seed) {
    const double sd = std::sqrt(noise_variance_for(clean, snr_db));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, sd);
    std::vector<double> out(clean.begin(), clean.end());
    for (auto& v : out) v += normal(rng);
    return out;
}

}  // namespace fosst
