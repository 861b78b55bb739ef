#include "fosst/fosst.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

using namespace fosst;

namespace {

Ridge constant_ridge(std::size_t m_start, std::size_t len, int bin) {
    Ridge r;
    r.rank = 1;
    r.m_start = m_start;
    r.bins.assign(len, bin);
    r.magnitudes.assign(len, 1.0);
    r.anchors.assign(len, 1);
    return r;
}

/// Grid of unit magnitude on bins [lo, hi] and zero elsewhere.
TfrGrid block_grid(std::size_t rows, int n_bins, int lo, int hi) {
    TfrGrid g;
    g.config.n_bins = n_bins;
    g.coeffs = Grid<cplx>(rows, static_cast<std::size_t>(n_bins));
    for (std::size_t m = 0; m < rows; ++m) {
        for (int k = lo; k <= hi; ++k) g.coeffs(m, static_cast<std::size_t>(k)) = cplx(0.6, 0.8);
    }
    return g;
}

}  // namespace

TEST(HtBand, AllAboveThresholdClampsToMaximum) {
    const auto g = block_grid(20, 128, 1, 63);
    const std::vector<double> gamma(128, 0.5);
    const auto band = ht_band(g, constant_ridge(2, 10, 30), gamma, 2, 7);
    for (std::size_t i = 0; i < band.size(); ++i) {
        EXPECT_EQ(band.k_lo[i], 23);
        EXPECT_EQ(band.k_hi[i], 37);
    }
}

TEST(HtBand, EqualLimitsGiveFixedBand) {
    const auto g = block_grid(20, 128, 25, 28);
    const std::vector<double> gamma(128, 0.5);
    const auto band = ht_band(g, constant_ridge(0, 20, 30), gamma, 4, 4);
    for (std::size_t i = 0; i < band.size(); ++i) {
        EXPECT_EQ(band.k_lo[i], 26);
        EXPECT_EQ(band.k_hi[i], 34);
    }
}

TEST(HtBand, IsolatedToneEdgesAtFirstSubThresholdBins) {
    const auto g = block_grid(20, 128, 27, 34);
    const std::vector<double> gamma(128, 0.5);
    const auto band = ht_band(g, constant_ridge(0, 20, 30), gamma, 1, 10);
    for (std::size_t i = 0; i < band.size(); ++i) {
        EXPECT_EQ(band.k_lo[i], 26);
        EXPECT_EQ(band.k_hi[i], 35);
    }
}

TEST(HtBand, NeverReachesDcBin) {
    const auto g = block_grid(10, 128, 0, 63);
    const std::vector<double> gamma(128, 0.0);
    const auto band = ht_band(g, constant_ridge(0, 10, 3), gamma, 1, 8);
    for (std::size_t i = 0; i < band.size(); ++i) {
        EXPECT_EQ(band.k_lo[i], 1);
        EXPECT_EQ(band.k_hi[i], 11);
    }
}

TEST(HtBand, RejectsBadLimits) {
    const auto g = block_grid(10, 128, 0, 63);
    const std::vector<double> gamma(128, 0.0);
    EXPECT_THROW(ht_band(g, constant_ridge(0, 10, 30), gamma, 5, 4), ConfigError);
    EXPECT_THROW(ht_band(g, constant_ridge(5, 10, 30), gamma, 1, 4), ConfigError);
}

TEST(Reconstruct, ToneFromFsstBand) {
    const double fs = 30.0;
    const int n_bins = 1024;
    TfrConfig cfg;
    cfg.n_bins = n_bins;
    cfg.window = make_window(5.0, fs, n_bins);
    cfg.kind = TfrKind::Fsst;
    std::vector<double> x(1800);
    for (std::size_t m = 0; m < x.size(); ++m) x[m] = std::cos(2.0 * std::numbers::pi * 0.5 * m / fs);
    const auto grid = transform(x, cfg);
    double peak = 0.0;
    for (const auto& v : grid.coeffs.values()) peak = std::max(peak, std::abs(v));
    const std::vector<double> gamma(n_bins, 1e-3 * peak);
    const auto ridge = constant_ridge(0, x.size(), 17);
    const auto band = ht_band(grid, ridge, gamma, 5, default_band_limit(5.0, fs, n_bins));
    const auto comp = reconstruct_component(grid, ridge, band);
    const auto rows = interior_rows(cfg.window, x.size());
    const std::span<const double> ref(x.data() + rows.begin, rows.size());
    const std::span<const double> est(comp.samples.data() + rows.begin, rows.size());
    EXPECT_LT(rmse(ref, est), 0.02);
}

TEST(Reconstruct, EmptyBandGivesZero) {
    const auto g = block_grid(30, 64, 1, 31);
    const auto ridge = constant_ridge(5, 20, 10);
    FilterBand band{5, std::vector<int>(20, 12), std::vector<int>(20, 11), 1, 3};
    const auto comp = reconstruct_component(g, ridge, band);
    for (const double v : comp.samples) EXPECT_EQ(v, 0.0);
    FilterBand wrong{4, std::vector<int>(20, 9), std::vector<int>(20, 11), 1, 3};
    EXPECT_THROW(reconstruct_component(g, ridge, wrong), ConfigError);
}

TEST(Metrics, RmseExamples) {
    const std::vector<double> ref{1.0, -2.0, 3.0, 0.5};
    std::vector<double> zero(4, 0.0), twice;
    for (double v : ref) twice.push_back(2.0 * v);
    EXPECT_EQ(rmse(ref, ref), 0.0);
    EXPECT_DOUBLE_EQ(rmse(ref, zero), 1.0);
    EXPECT_DOUBLE_EQ(rmse(ref, twice), 1.0);
    EXPECT_THROW(rmse(zero, ref), NumericError);
}

TEST(Metrics, SnrExamples) {
    std::vector<double> clean(1000);
    for (std::size_t m = 0; m < clean.size(); ++m) clean[m] = std::sin(0.1 * m) + 0.3;
    const double var = variance(clean);
    EXPECT_DOUBLE_EQ(noise_variance_for(clean, 0.0), var);
    EXPECT_NEAR(noise_variance_for(clean, -5.0) / var, 3.1623, 1e-4);
    EXPECT_NEAR(snr_in(clean, noise_variance_for(clean, 12.5)), 12.5, 1e-12);
    EXPECT_THROW(snr_in(std::vector<double>(10, 1.0), 1.0), NumericError);
}

TEST(Metrics, AddNoiseIsDeterministicAtRequestedSnr) {
    std::vector<double> clean(20000);
    for (std::size_t m = 0; m < clean.size(); ++m) clean[m] = std::cos(0.05 * m);
    const auto a = add_noise(clean, -5.0, 42);
    EXPECT_EQ(a, add_noise(clean, -5.0, 42));
    EXPECT_NE(a, add_noise(clean, -5.0, 43));
    std::vector<double> noise(clean.size());
    for (std::size_t m = 0; m < clean.size(); ++m) noise[m] = a[m] - clean[m];
    EXPECT_NEAR(snr_in(clean, variance(noise)), -5.0, 0.1);
}
