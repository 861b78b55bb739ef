#include "fosst/fosst.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

using namespace fosst;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

}  // namespace

TEST(Mcs, UnitToneWithoutNoise) {
    ScenarioSpec spec;
    spec.components.push_back(tone_component(0.5, 1.0));
    const SamplingSpec s{30.0, 900, 0.0};
    const auto out = gen_mcs(spec, s);
    for (std::size_t m = 0; m < s.length; ++m) ASSERT_NEAR(out.signal[m], std::cos(kTwoPi * 0.5 * m / 30.0), 1e-12);
    for (const double f : out.inst_freq[0]) ASSERT_EQ(f, 0.5);
}

TEST(Mcs, NoiseOnlyVarianceMatches) {
    ScenarioSpec spec;
    spec.ambient = {0.0, 2.0};
    spec.seed = 9;
    const auto out = gen_mcs(spec, SamplingSpec{10.0, 10000, 0.0});
    EXPECT_NEAR(variance(out.signal) / 2.0, 1.0, 0.05);
}

TEST(Mcs, Linearity) {
    const SamplingSpec s{20.0, 2000, 3.0};
    const auto a = tone_component(0.3, 1.5, 10.0, 80.0, 0.1);
    const auto b = chirp_component(0.5, 0.01, 0.0, 0.7);
    ScenarioSpec both, only_a, only_b;
    both.components = {a, b};
    only_a.components = {a};
    only_b.components = {b};
    const auto sum = gen_mcs(both, s).signal;
    const auto xa = gen_mcs(only_a, s).signal;
    const auto xb = gen_mcs(only_b, s).signal;
    for (std::size_t m = 0; m < s.length; ++m) ASSERT_NEAR(sum[m], xa[m] + xb[m], 1e-12);
}

TEST(Mcs, RejectsAliasedComponent) {
    ScenarioSpec spec;
    spec.components.push_back(tone_component(6.0, 1.0));
    EXPECT_THROW(gen_mcs(spec, SamplingSpec{10.0, 100, 0.0}), ConfigError);
}

TEST(Mcs, AdditiveNoiseAtRequestedSnr) {
    ScenarioSpec spec;
    spec.components.push_back(tone_component(0.5, 1.0));
    spec.additive_snr_db = -5.0;
    spec.seed = 4;
    const auto out = gen_mcs(spec, SamplingSpec{10.0, 20000, 0.0});
    std::vector<double> noise(out.signal.size());
    for (std::size_t m = 0; m < noise.size(); ++m) noise[m] = out.signal[m] - out.components[0][m];
    EXPECT_NEAR(out.noise_variance / variance(out.components[0]), std::pow(10.0, 0.5), 1e-9);
    EXPECT_NEAR(snr_in(out.components[0], variance(noise)), -5.0, 0.1);
}

TEST(Mcs, AmbientSpectrumDecays) {
    // Periodogram averaged over segments, compared across octaves above the AR corner.
    auto rng = make_rng(3, 1);
    const std::size_t seg = 512, n_seg = 32;
    const auto x = ar1_noise(seg * n_seg, 0.98, 1.0, rng);
    std::vector<double> power(seg / 2, 0.0);
    for (std::size_t s = 0; s < n_seg; ++s) {
        for (std::size_t k = 1; k < seg / 2; ++k) {
            std::complex<double> acc;
            for (std::size_t m = 0; m < seg; ++m) acc += x[s * seg + m] * std::polar(1.0, -kTwoPi * k * m / seg);
            power[k] += std::norm(acc);
        }
    }
    double prev = INFINITY;
    for (std::size_t lo = 4; lo < seg / 2; lo *= 2) {
        const std::size_t hi = std::min(2 * lo, seg / 2);
        double band = 0.0;
        for (std::size_t k = lo; k < hi; ++k) band += power[k];
        band /= static_cast<double>(hi - lo);
        EXPECT_LT(band, prev) << "octave starting at bin " << lo;
        prev = band;
    }
}

TEST(Wecc, FundamentalFrequencyProfile) {
    const WeccOptions o;
    EXPECT_NEAR(square_fundamental_freq(30.0, o), 0.1, 1e-12);
    EXPECT_NEAR(square_fundamental_freq(80.0, o), 0.2, 1e-12);
    EXPECT_NEAR(square_fundamental_freq(130.0, o), 0.1, 1e-12);
}

TEST(Wecc, HarmonicTruth) {
    const auto sc = gen_wecc_like_scenario(1, 20.0);
    const TruthComponent* h1 = nullptr;
    const TruthComponent* h3 = nullptr;
    for (const auto& t : sc.truth) {
        if (t.name == "h1") h1 = &t;
        if (t.name == "h3") h3 = &t;
    }
    ASSERT_NE(h1, nullptr);
    ASSERT_NE(h3, nullptr);
    const auto at80 = static_cast<std::size_t>(80.0 * sc.dataset.spec.fs);
    EXPECT_NEAR(h1->inst_freq[at80], 0.2, 1e-12);
    EXPECT_NEAR(h3->inst_freq[at80], 0.6, 1e-12);
    EXPECT_NEAR(h3->amplitude / h1->amplitude, 1.0 / 3.0, 1e-12);
    EXPECT_EQ(sc.truth.back().name, "tone");
    EXPECT_EQ(sc.truth.back().source_device, "G15");
    EXPECT_EQ(h1->source_device, "G79");
    EXPECT_EQ(sc.dataset.spec.length, 1300u);
}

TEST(Wecc, SameSeedIsBitIdentical) {
    const auto a = gen_wecc_like_scenario(5, 10.0);
    const auto b = gen_wecc_like_scenario(5, 10.0);
    const auto c = gen_wecc_like_scenario(6, 10.0);
    ASSERT_EQ(a.dataset.branches.size(), b.dataset.branches.size());
    for (std::size_t i = 0; i < a.dataset.branches.size(); ++i) {
        EXPECT_EQ(a.dataset.branches[i].p.samples, b.dataset.branches[i].p.samples);
        EXPECT_EQ(a.dataset.branches[i].v_ang.samples, b.dataset.branches[i].v_ang.samples);
    }
    EXPECT_NE(a.dataset.branches[0].p.samples, c.dataset.branches[0].p.samples);
}

TEST(DefToyScenario, SourceAndSinks) {
    const auto toy = gen_def_toy(2);
    EXPECT_EQ(toy.scenario.dataset.spec.length, 2700u);
    int sources = 0;
    for (const auto& b : toy.branches) sources += b.profile.device == toy.source_device;
    EXPECT_EQ(sources, 1);
    EXPECT_GE(toy.branches.size(), 2u);
    EXPECT_LE(toy.branches.size(), 4u);
}
