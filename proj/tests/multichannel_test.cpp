#include "fosst/fosst.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

using namespace fosst;

namespace {

TfrConfig layout(int n_bins = 16) {
    TfrConfig cfg;
    cfg.n_bins = n_bins;
    cfg.window.sigma = 5.0;
    cfg.window.fs = 30.0;
    cfg.kind = TfrKind::Fsst;
    return cfg;
}

TfrGrid random_grid(std::mt19937_64& rng, std::size_t rows, const std::string& id, double scale = 1.0) {
    std::normal_distribution<double> n01;
    TfrGrid g{layout(), Grid<cplx>(rows, 16), id};
    for (auto& v : g.coeffs.values()) v = scale * cplx(n01(rng), n01(rng));
    return g;
}

Grid<double> random_magnitudes(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
    std::exponential_distribution<double> dist(1.0);
    Grid<double> g(rows, cols);
    for (auto& v : g.values()) v = dist(rng);
    return g;
}

double brute_quantile(const Grid<double>& mag, std::size_t m, std::size_t k, const PercentileWindow& win,
                      IndexRange cols) {
    std::vector<double> vals;
    const std::size_t r_lo = m > win.half_rows ? m - win.half_rows : 0;
    const std::size_t r_hi = std::min(mag.rows() - 1, m + win.half_rows);
    const std::size_t c_lo = std::max(cols.begin, k > win.half_bins ? k - win.half_bins : 0);
    const std::size_t c_hi = std::min(cols.end - 1, k + win.half_bins);
    for (std::size_t r = r_lo; r <= r_hi; ++r) {
        for (std::size_t c = c_lo; c <= c_hi; ++c) vals.push_back(mag(r, c));
    }
    std::sort(vals.begin(), vals.end());
    return vals[nearest_rank(win.level, vals.size()) - 1];
}

}  // namespace

TEST(Mtf, SingleBranchWithZeroQ) {
    std::mt19937_64 rng(1);
    const std::vector<TfrGrid> p{random_grid(rng, 40, "p")};
    const std::vector<TfrGrid> q{random_grid(rng, 40, "q", 0.0)};
    const auto mtf = build_mtf(p, q);
    for (std::size_t i = 0; i < mtf.values.values().size(); ++i) {
        ASSERT_EQ(mtf.values.values()[i], std::sqrt(std::norm(p[0].coeffs.values()[i])));
    }
    EXPECT_EQ(mtf.source_ids, (std::vector<std::string>{"p", "q"}));
}

TEST(Mtf, DuplicatedBranchScalesBySqrtTwo) {
    std::mt19937_64 rng(2);
    const std::vector<TfrGrid> p1{random_grid(rng, 30, "p")}, q1{random_grid(rng, 30, "q")};
    const std::vector<TfrGrid> p2{p1[0], p1[0]}, q2{q1[0], q1[0]};
    const auto one = build_mtf(p1, q1);
    const auto two = build_mtf(p2, q2);
    for (std::size_t i = 0; i < one.values.values().size(); ++i) {
        ASSERT_NEAR(two.values.values()[i], std::sqrt(2.0) * one.values.values()[i], 1e-12 * (1.0 + one.values.values()[i]));
    }
}

TEST(Mtf, MatchesDirectFormula) {
    std::mt19937_64 rng(3);
    std::vector<TfrGrid> p, q;
    for (int b = 0; b < 3; ++b) {
        p.push_back(random_grid(rng, 25, "p" + std::to_string(b), 1.0 + b));
        q.push_back(random_grid(rng, 25, "q" + std::to_string(b), 0.5 * (b + 1)));
    }
    const auto mtf = build_mtf(p, q);
    for (std::size_t m = 0; m < 25; ++m) {
        for (std::size_t k = 0; k < 16; ++k) {
            double s = 0.0;
            for (int b = 0; b < 3; ++b) s += std::norm(p[b].coeffs(m, k)) + std::norm(q[b].coeffs(m, k));
            ASSERT_NEAR(mtf.values(m, k), std::sqrt(s), 1e-12 * (1.0 + std::sqrt(s)));
        }
    }
}

TEST(Mtf, RejectsMismatchedLayouts) {
    std::mt19937_64 rng(4);
    auto other = random_grid(rng, 30, "q");
    other.config.window.sigma = 6.0;
    const std::vector<TfrGrid> p{random_grid(rng, 30, "p")}, q{other};
    EXPECT_THROW(build_mtf(p, q), ConfigError);
    EXPECT_THROW(build_mtf(p, std::vector<TfrGrid>{}), ConfigError);
}

TEST(Percentile, ConstantGrid) {
    const Grid<double> g(50, 40, 2.5);
    const PercentileWindow win{3, 4, 0.97};
    const auto beta = percentile_surface(g, win, {0, 50}, {0, 40});
    for (const double v : beta.values()) ASSERT_EQ(v, 2.5);
}

TEST(Percentile, LevelNearOneGivesWindowMaximum) {
    std::mt19937_64 rng(5);
    const auto g = random_magnitudes(rng, 40, 30);
    const PercentileWindow win{2, 3, 1.0 - 1e-12};
    const auto beta = percentile_surface(g, win, {0, 40}, {0, 30});
    for (std::size_t m = 0; m < 40; ++m) {
        for (std::size_t k = 0; k < 30; ++k) {
            double mx = 0.0;
            for (std::size_t r = m > 3 ? m - 3 : 0; r <= std::min<std::size_t>(39, m + 3); ++r) {
                for (std::size_t c = k > 2 ? k - 2 : 0; c <= std::min<std::size_t>(29, k + 2); ++c) mx = std::max(mx, g(r, c));
            }
            ASSERT_EQ(beta(m, k), mx);
        }
    }
}

TEST(Percentile, MatchesBruteForceSort) {
    std::mt19937_64 rng(6);
    const auto g = random_magnitudes(rng, 60, 60);
    for (const double level : {0.5, 0.9, 0.97}) {
        const PercentileWindow win{2, 2, level};
        const auto beta = percentile_surface(g, win, {0, 60}, {0, 60});
        for (std::size_t m = 0; m < 60; ++m) {
            for (std::size_t k = 0; k < 60; ++k) ASSERT_EQ(beta(m, k), brute_quantile(g, m, k, win, {0, 60}));
        }
    }
}

TEST(Percentile, RestrictedRowsAndColumnsMatchFullEvaluation) {
    std::mt19937_64 rng(7);
    const auto g = random_magnitudes(rng, 80, 50);
    const PercentileWindow win{3, 5, 0.9};
    const IndexRange rows{10, 30}, cols{5, 45};
    const auto part = percentile_surface(g, win, rows, cols);
    ASSERT_EQ(part.rows(), rows.size());
    ASSERT_EQ(part.cols(), cols.size());
    for (std::size_t m = rows.begin; m < rows.end; ++m) {
        for (std::size_t k = cols.begin; k < cols.end; ++k) {
            ASSERT_EQ(part(m - rows.begin, k - cols.begin), brute_quantile(g, m, k, win, cols));
        }
    }
}

TEST(Percentile, RejectsWindowLargerThanGrid) {
    const Grid<double> g(20, 10, 1.0);
    EXPECT_THROW(percentile_surface(g, {6, 2, 0.9}, {0, 20}, {0, 10}), ConfigError);
}

TEST(Threshold, MinOverRowsOfTimeConstantSurface) {
    Grid<double> beta(30, 12);
    for (std::size_t m = 0; m < 30; ++m) {
        for (std::size_t k = 0; k < 12; ++k) beta(m, k) = 1.0 + 0.25 * k;
    }
    const auto gamma = min_over_rows(beta, {0, 30});
    for (std::size_t k = 0; k < 12; ++k) EXPECT_EQ(gamma[k], beta(0, k));
}

TEST(Threshold, SinglePreEventRow) {
    std::mt19937_64 rng(8);
    const auto beta = random_magnitudes(rng, 30, 12);
    const auto gamma = min_over_rows(beta, {7, 8});
    for (std::size_t k = 0; k < 12; ++k) EXPECT_EQ(gamma[k], beta(7, k));
}

TEST(Threshold, BuildFromPreEventRows) {
    std::mt19937_64 rng(9);
    const double fs = 10.0;
    const int n_bins = 64;
    const auto mag = random_magnitudes(rng, 300, n_bins);
    ThresholdConfig cfg;
    cfg.window_hz = 0.5;
    cfg.window_s = 2.0;
    cfg.level = 0.9;
    const IndexRange pre{20, 120};
    const auto th = build_threshold(mag, cfg, fs, pre);
    const auto win = percentile_window(cfg.window_hz, cfg.window_s, cfg.level, fs, n_bins);
    const IndexRange half{0, static_cast<std::size_t>(n_bins / 2 + 1)};
    const auto beta = percentile_surface(mag, win, pre, half);
    const auto expect = min_over_rows(beta, {0, beta.rows()});
    for (std::size_t k = half.begin; k < half.end; ++k) ASSERT_EQ(th.gamma[k], expect[k]);
    for (std::size_t k = 1; k < static_cast<std::size_t>(n_bins / 2); ++k) ASSERT_EQ(th.gamma[n_bins - k], th.gamma[k]);

    const auto restricted = build_threshold(mag, cfg, fs, pre, IndexRange{10, 20});
    for (std::size_t k = 0; k <= static_cast<std::size_t>(n_bins / 2); ++k) {
        if (k >= 10 && k < 20) {
            ASSERT_EQ(restricted.gamma[k], th.gamma[k]);
        } else {
            ASSERT_TRUE(std::isinf(restricted.gamma[k]));
        }
    }
    EXPECT_THROW(build_threshold(mag, cfg, fs, IndexRange{5, 5}), ConfigError);
}
