#pragma once

#include "fosst/core_model.hpp"
#include "fosst/errors.hpp"
#include "fosst/filter.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace fosst {

/// One AM-FM component A(t) cos(2 pi phase(t)) active on [t_start, t_end).
/// Phase is in cycles; inst_freq is its derivative in Hz.
struct ComponentSpec {
    std::function<double(double)> amplitude;
    std::function<double(double)> phase;
    std::function<double(double)> inst_freq;
    double t_start = -std::numeric_limits<double>::infinity();
    double t_end = std::numeric_limits<double>::infinity();

    bool active(double t) const noexcept { return t >= t_start && t < t_end; }
};

inline ComponentSpec tone_component(double freq_hz, double amplitude, double t_start = -INFINITY,
                                    double t_end = INFINITY, double phase0 = 0.0) {
    return {[amplitude](double) { return amplitude; }, [=](double t) { return phase0 + freq_hz * t; },
            [freq_hz](double) { return freq_hz; }, t_start, t_end};
}

/// Linear chirp f(t) = f0 + rate (t - t_ref).
inline ComponentSpec chirp_component(double f0, double rate, double t_ref, double amplitude,
                                     double t_start = -INFINITY, double t_end = INFINITY) {
    return {[amplitude](double) { return amplitude; },
            [=](double t) { const double d = t - t_ref; return f0 * d + 0.5 * rate * d * d; },
            [=](double t) { return f0 + rate * (t - t_ref); }, t_start, t_end};
}

struct AmbientSpec {
    double ar_coef = 0.98;
    double variance = 0.0;  ///< stationary variance; 0 disables ambient noise
};

struct ScenarioSpec {
    std::vector<ComponentSpec> components;
    AmbientSpec ambient;
    std::optional<double> additive_snr_db;
    std::uint64_t seed = 0;
};

/// Independent generator per (seed, stream) pair.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

/// Stationary AR(1) noise x[m] = a x[m-1] + e[m] with Var(x) = variance.
inline std::vector<double> ar1_noise(std::size_t n, double coef, double variance, std::mt19937_64& rng) {
    if (!(std::abs(coef) < 1.0)) throw ConfigError("synth", "AR coefficient must lie in (-1, 1)");
    std::vector<double> x(n, 0.0);
    if (n == 0 || !(variance > 0.0)) return x;
    std::normal_distribution<double> innov(0.0, std::sqrt(variance * (1.0 - coef * coef)));
    std::normal_distribution<double> start(0.0, std::sqrt(variance));
    x[0] = start(rng);
    for (std::size_t m = 1; m < n; ++m) x[m] = coef * x[m - 1] + innov(rng);
    return x;
}

inline void add_white_noise(std::vector<double>& x, double variance, std::mt19937_64& rng) {
    if (!(variance > 0.0)) return;
    std::normal_distribution<double> normal(0.0, std::sqrt(variance));
    for (auto& v : x) v += normal(rng);
}

struct McsResult {
    std::vector<double> signal;
    std::vector<std::vector<double>> components;  ///< clean per-component samples
    std::vector<std::vector<double>> inst_freq;   ///< Hz, NaN outside the component support
    double noise_variance = 0.0;                  ///< additive white-noise variance actually used
};

inline std::vector<double> sample_component(const ComponentSpec& c, const SamplingSpec& s, double fs_limit,
                                            std::vector<double>* inst_freq = nullptr) {
    std::vector<double> out(s.length, 0.0);
    if (inst_freq) inst_freq->assign(s.length, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t m = 0; m < s.length; ++m) {
        const double t = s.time(m);
        if (!c.active(t)) continue;
        const double f = c.inst_freq(t);
        if (!(f > 0.0 && f < 0.5 * fs_limit)) {
            throw ConfigError("synth", "component frequency " + std::to_string(f) + " Hz aliases at fs=" +
                                           std::to_string(fs_limit) + " Hz");
        }
        out[m] = c.amplitude(t) * std::cos(2.0 * std::numbers::pi * c.phase(t));
        if (inst_freq) (*inst_freq)[m] = f;
    }
    return out;
}

/// Sum of components plus AR(1) ambient noise plus white noise at the
/// requested SNR relative to the clean component sum.
inline McsResult gen_mcs(const ScenarioSpec& spec, const SamplingSpec& sampling) {
    sampling.validate();
    McsResult out;
    out.signal.assign(sampling.length, 0.0);
    for (const auto& c : spec.components) {
        std::vector<double> f;
        out.components.push_back(sample_component(c, sampling, sampling.fs, &f));
        out.inst_freq.push_back(std::move(f));
        for (std::size_t m = 0; m < sampling.length; ++m) out.signal[m] += out.components.back()[m];
    }
    const std::vector<double> clean = out.signal;
    auto ambient_rng = make_rng(spec.seed, 1);
    const auto ambient = ar1_noise(sampling.length, spec.ambient.ar_coef, spec.ambient.variance, ambient_rng);
    for (std::size_t m = 0; m < sampling.length; ++m) out.signal[m] += ambient[m];
    if (spec.additive_snr_db) {
        out.noise_variance = noise_variance_for(clean, *spec.additive_snr_db);
        auto noise_rng = make_rng(spec.seed, 2);
        add_white_noise(out.signal, out.noise_variance, noise_rng);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Multi-branch scenarios

/// Ground truth of one injected oscillation component.
struct TruthComponent {
    std::string name;
    std::string source_device;
    double amplitude = 0.0;
    double t_start = 0.0;
    double t_end = 0.0;
    std::vector<double> inst_freq;  ///< Hz per sample, NaN outside the support
};

struct BranchSignals {
    std::vector<double> p, q, v, theta;
};

inline BranchSignals zero_signals(std::size_t n) { return {std::vector<double>(n), std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)}; }

struct Scenario {
    EventDataset dataset;
    std::vector<TruthComponent> truth;
    std::vector<std::string> devices;
    std::vector<std::vector<BranchSignals>> clean;  ///< [truth component][branch] noiseless oscillation
    double snr_db = 0.0;
    std::uint64_t seed = 0;
};

inline nlohmann::json truth_to_json(const Scenario& sc) {
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : sc.truth) {
        nlohmann::json f = nlohmann::json::array();
        for (double v : c.inst_freq) f.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
        comps.push_back({{"name", c.name},
                         {"source_device", c.source_device},
                         {"amplitude", c.amplitude},
                         {"t_start", c.t_start},
                         {"t_end", c.t_end},
                         {"inst_freq_hz", std::move(f)}});
    }
    return {{"seed", sc.seed},
            {"snr_db", sc.snr_db},
            {"fs", sc.dataset.spec.fs},
            {"t_event", sc.dataset.t_event},
            {"devices", sc.devices},
            {"components", std::move(comps)}};
}

/// Operating point and oscillation sensitivities of one monitored branch.
struct BranchProfile {
    std::string device;
    std::string to_bus;
    double p0, q0, v0, theta0;
};

/// Phase relations of a branch for one component: P = cos(x + psi),
/// Q = sin(x + chi) against theta = sin(x) and |V| = sin(x).
struct Coupling {
    double weight;
    double psi;
    double chi;
};

inline constexpr Coupling kSourceCoupling{1.0, 0.25, 0.3};

inline Coupling sink_coupling(double weight) { return {weight, std::numbers::pi - 0.35, -0.5}; }

struct OscillationScale {
    double theta = 0.02;  ///< rad per unit amplitude
    double p = 20.0;      ///< MW
    double v = 0.005;     ///< pu
    double q = 8.0;       ///< MVAr
};

/// Adds one component's contribution to a branch.
inline void add_component(BranchSignals& s, const ComponentSpec& c, const Coupling& k, const OscillationScale& sc,
                          const SamplingSpec& sampling) {
    const double two_pi = 2.0 * std::numbers::pi;
    for (std::size_t m = 0; m < sampling.length; ++m) {
        const double t = sampling.time(m);
        if (!c.active(t)) continue;
        const double a = k.weight * c.amplitude(t);
        const double x = two_pi * c.phase(t);
        s.theta[m] += a * sc.theta * std::sin(x);
        s.p[m] += a * sc.p * std::cos(x + k.psi);
        s.v[m] += a * sc.v * std::sin(x);
        s.q[m] += a * sc.q * std::sin(x + k.chi);
    }
}

/// Fills the dataset channels of one branch from oscillation and noise parts.
/// White noise on each channel has variance Var(oscillation) / 10^(snr/10).
inline Branch make_branch(const BranchProfile& prof, const BranchSignals& osc, const OscillationScale& sc,
                          double ambient_rel, double ar_coef, std::optional<double> snr_db, std::uint64_t seed,
                          std::uint64_t stream) {
    Branch b;
    b.id = prof.device + "-" + prof.to_bus;
    b.from_bus = prof.device;
    b.to_bus = prof.to_bus;
    const std::size_t n = osc.p.size();
    struct Part {
        Channel* ch;
        const std::vector<double>* osc;
        double base;
        double scale;
        ChannelKind kind;
        const char* suffix;
        const char* unit;
    };
    const Part parts[] = {{&b.p, &osc.p, prof.p0, sc.p, ChannelKind::ActivePower, ".P", "MW"},
                          {&b.q, &osc.q, prof.q0, sc.q, ChannelKind::ReactivePower, ".Q", "MVAr"},
                          {&b.v_mag, &osc.v, prof.v0, sc.v, ChannelKind::VoltageMag, ".VM", "pu"},
                          {&b.v_ang, &osc.theta, prof.theta0, sc.theta, ChannelKind::VoltageAngle, ".VA", "rad"}};
    std::uint64_t sub = 0;
    for (const auto& part : parts) {
        auto rng = make_rng(seed, stream * 16 + sub++);
        const double amb_sd = ambient_rel * part.scale;
        auto x = ar1_noise(n, ar_coef, amb_sd * amb_sd, rng);
        for (std::size_t m = 0; m < n; ++m) x[m] += part.base + (*part.osc)[m];
        if (snr_db) {
            const double var = variance(*part.osc);
            if (var > 0.0) add_white_noise(x, var / std::pow(10.0, *snr_db / 10.0), rng);
        }
        part.ch->id = b.id + part.suffix;
        part.ch->kind = part.kind;
        part.ch->unit = part.unit;
        part.ch->samples = std::move(x);
    }
    return b;
}

// ---------------------------------------------------------------------------
// Chirping square-wave forced-oscillation scenario

struct WeccOptions {
    double fs = 10.0;
    double duration_s = 130.0;
    double t_event = 30.0;
    double chirp_peak_s = 80.0;  ///< fundamental rises 0.1 -> 0.2 Hz until here, then falls back
    double f_low = 0.1;
    double f_high = 0.2;
    std::vector<int> harmonics{1, 3, 5, 7};
    double tone_hz = 0.7;
    double tone_start_s = 70.0;
    double tone_amplitude = 1.0;
    double ambient_rel = 0.05;  ///< ambient std relative to the channel's oscillation scale
    double ar_coef = 0.98;
};

/// Phase (cycles) of the square-wave fundamental: piecewise-linear frequency
/// f_low -> f_high over [t_event, peak] and back to f_low over an equal span.
inline double square_fundamental_phase(double t, const WeccOptions& o) {
    const double rise = o.chirp_peak_s - o.t_event;
    const double rate = (o.f_high - o.f_low) / rise;
    if (t <= o.t_event) return 0.0;
    if (t <= o.chirp_peak_s) {
        const double d = t - o.t_event;
        return o.f_low * d + 0.5 * rate * d * d;
    }
    const double d = t - o.chirp_peak_s;
    return o.f_low * rise + 0.5 * rate * rise * rise + o.f_high * d - 0.5 * rate * d * d;
}

inline double square_fundamental_freq(double t, const WeccOptions& o) {
    const double rate = (o.f_high - o.f_low) / (o.chirp_peak_s - o.t_event);
    if (t <= o.chirp_peak_s) return o.f_low + rate * (t - o.t_event);
    return o.f_high - rate * (t - o.chirp_peak_s);
}

/// Fourier amplitude 4 / (pi h) of odd harmonic h of a unit square wave.
inline double square_harmonic_amplitude(int h) { return 4.0 / (std::numbers::pi * h); }

/// Four monitored generator branches. G79 injects the chirping square wave,
/// G15 the constant-frequency tone from tone_start_s, G112 and G36 are
/// passive and see attenuated copies of both.
inline Scenario gen_wecc_like_scenario(std::uint64_t seed, std::optional<double> snr_db, const WeccOptions& o = {}) {
    SamplingSpec sampling{o.fs, static_cast<std::size_t>(std::lround(o.duration_s * o.fs)), 0.0};
    const std::vector<BranchProfile> profiles{{"G79", "B79", 820.0, 110.0, 1.02, -0.35},
                                              {"G15", "B15", 410.0, 60.0, 1.01, 0.12},
                                              {"G112", "B112", 560.0, 85.0, 0.99, -0.08},
                                              {"G36", "B36", 300.0, 40.0, 1.00, 0.25}};
    const std::vector<double> square_weight{1.0, 0.5, 0.6, 0.4};
    const std::vector<double> tone_weight{0.4, 1.0, 0.5, 0.6};

    Scenario sc;
    sc.seed = seed;
    sc.snr_db = snr_db.value_or(std::numeric_limits<double>::infinity());
    for (const auto& p : profiles) sc.devices.push_back(p.device);

    std::vector<ComponentSpec> comps;
    std::vector<int> source_of;
    for (int h : o.harmonics) {
        const double amp = square_harmonic_amplitude(h);
        comps.push_back({[amp](double) { return amp; }, [h, o](double t) { return h * square_fundamental_phase(t, o); },
                         [h, o](double t) { return h * square_fundamental_freq(t, o); }, o.t_event, o.duration_s + 1.0});
        source_of.push_back(0);
        sc.truth.push_back({"h" + std::to_string(h), profiles[0].device, amp, o.t_event, o.duration_s, {}});
    }
    comps.push_back(tone_component(o.tone_hz, o.tone_amplitude, o.tone_start_s, o.duration_s + 1.0,
                                   -o.tone_hz * o.tone_start_s));
    source_of.push_back(1);
    sc.truth.push_back({"tone", profiles[1].device, o.tone_amplitude, o.tone_start_s, o.duration_s, {}});
    for (std::size_t c = 0; c < comps.size(); ++c) sample_component(comps[c], sampling, o.fs, &sc.truth[c].inst_freq);

    const OscillationScale scale;
    sc.clean.assign(comps.size(), std::vector<BranchSignals>(profiles.size(), zero_signals(sampling.length)));
    for (std::size_t b = 0; b < profiles.size(); ++b) {
        auto osc = zero_signals(sampling.length);
        for (std::size_t c = 0; c < comps.size(); ++c) {
            const bool is_source = static_cast<std::size_t>(source_of[c]) == b;
            const double w = source_of[c] == 0 ? square_weight[b] : tone_weight[b];
            auto& part = sc.clean[c][b];
            add_component(part, comps[c], is_source ? kSourceCoupling : sink_coupling(w), scale, sampling);
            for (std::size_t m = 0; m < sampling.length; ++m) {
                osc.p[m] += part.p[m];
                osc.q[m] += part.q[m];
                osc.v[m] += part.v[m];
                osc.theta[m] += part.theta[m];
            }
        }
        sc.dataset.branches.push_back(make_branch(profiles[b], osc, scale, o.ambient_rel, o.ar_coef, snr_db, seed, b + 1));
    }
    sc.dataset.spec = sampling;
    sc.dataset.t_event = o.t_event;
    return sc;
}

/// Ambient-only variant: same branches and noise model, no oscillation.
inline EventDataset gen_ambient_dataset(std::uint64_t seed, const WeccOptions& o = {}) {
    SamplingSpec sampling{o.fs, static_cast<std::size_t>(std::lround(o.duration_s * o.fs)), 0.0};
    EventDataset ds;
    ds.spec = sampling;
    ds.t_event = o.t_event;
    const OscillationScale scale;
    const std::vector<BranchProfile> profiles{{"G79", "B79", 820.0, 110.0, 1.02, -0.35},
                                              {"G15", "B15", 410.0, 60.0, 1.01, 0.12},
                                              {"G112", "B112", 560.0, 85.0, 0.99, -0.08},
                                              {"G36", "B36", 300.0, 40.0, 1.00, 0.25}};
    for (std::size_t b = 0; b < profiles.size(); ++b) {
        ds.branches.push_back(make_branch(profiles[b], zero_signals(sampling.length), scale, o.ambient_rel, o.ar_coef,
                                          std::nullopt, seed, b + 1));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Small dataset with a single known source, for the energy-flow stage

struct DefToyBranch {
    BranchProfile profile;
    double a_p, psi, b_theta, c_q, chi, d_v;  ///< P, theta, Q and |V| oscillation amplitudes and phases
    double analytic_slope;
    BranchSignals clean;  ///< noiseless P, Q, |V| and theta including the operating point
};

struct DefToy {
    Scenario scenario;
    std::vector<DefToyBranch> branches;
    std::string source_device;
    double freq_hz = 0.7;
};

/// Period-averaged rate of W for P = A cos(x + psi), theta = B sin x,
/// Q = C sin(x + chi), |V| = v0 + D sin x, with x = 2 pi f t.
inline double def_analytic_slope(double a, double psi, double b, double c, double chi, double d, double v0,
                                 double freq_hz) {
    const double w = 2.0 * std::numbers::pi * freq_hz;
    const double q_term = d > 0.0 ? c * d * w * std::sin(chi) * (v0 - std::sqrt(v0 * v0 - d * d)) / (d * d) : 0.0;
    return a * b * w * std::cos(psi) / 2.0 + q_term;
}

struct DefToyOptions {
    double fs = 30.0;
    double duration_s = 90.0;
    double t_event = 30.0;
    double freq_hz = 0.7;
    double ambient_rel = 0.02;
    double ar_coef = 0.98;
};

/// Three branches; G2 injects the oscillation with P leading theta, G1 and G3
/// absorb it. Phase offsets are small so the backward-difference energy sum
/// stays within 1% of the continuous rate at 30 samples/s. White noise at snr_db is added per channel when given.
inline DefToy gen_def_toy(std::uint64_t seed, std::optional<double> snr_db = std::nullopt,
                          const DefToyOptions& o = {}) {
    SamplingSpec sampling{o.fs, static_cast<std::size_t>(std::lround(o.duration_s * o.fs)), 0.0};
    const double two_pi = 2.0 * std::numbers::pi;
    std::vector<DefToyBranch> branches{
        {{"G1", "B1", 300.0, 40.0, 1.01, 0.10}, 8.0, std::numbers::pi - 0.1, 0.012, 3.0, -0.15, 0.002, 0.0, {}},
        {{"G2", "B2", 500.0, 70.0, 1.02, -0.20}, 15.0, 0.1, 0.020, 6.0, 0.2, 0.003, 0.0, {}},
        {{"G3", "B3", 250.0, 30.0, 0.99, 0.05}, 6.0, std::numbers::pi - 0.05, 0.015, 2.5, -0.1, 0.002, 0.0, {}}};

    DefToy toy;
    toy.freq_hz = o.freq_hz;
    toy.source_device = "G2";
    auto& sc = toy.scenario;
    sc.seed = seed;
    sc.snr_db = snr_db.value_or(std::numeric_limits<double>::infinity());
    sc.dataset.spec = sampling;
    sc.dataset.t_event = o.t_event;
    const OscillationScale scale{0.015, 10.0, 0.003, 4.0};
    const ComponentSpec tone = tone_component(o.freq_hz, 1.0, o.t_event, o.duration_s + 1.0, -o.freq_hz * o.t_event);
    sc.truth.push_back({"tone", toy.source_device, 1.0, o.t_event, o.duration_s, {}});
    sample_component(tone, sampling, o.fs, &sc.truth[0].inst_freq);

    std::uint64_t stream = 1;
    sc.clean.resize(1);
    for (auto& br : branches) {
        sc.devices.push_back(br.profile.device);
        br.analytic_slope = def_analytic_slope(br.a_p, br.psi, br.b_theta, br.c_q, br.chi, br.d_v, br.profile.v0, o.freq_hz);
        auto osc = zero_signals(sampling.length);
        for (std::size_t m = 0; m < sampling.length; ++m) {
            const double t = sampling.time(m);
            if (!tone.active(t)) continue;
            const double x = two_pi * tone.phase(t);
            osc.p[m] = br.a_p * std::cos(x + br.psi);
            osc.theta[m] = br.b_theta * std::sin(x);
            osc.q[m] = br.c_q * std::sin(x + br.chi);
            osc.v[m] = br.d_v * std::sin(x);
        }
        br.clean = osc;
        sc.clean[0].push_back(osc);
        for (std::size_t m = 0; m < sampling.length; ++m) {
            br.clean.p[m] += br.profile.p0;
            br.clean.q[m] += br.profile.q0;
            br.clean.v[m] += br.profile.v0;
            br.clean.theta[m] += br.profile.theta0;
        }
        sc.dataset.branches.push_back(make_branch(br.profile, osc, scale, o.ambient_rel, o.ar_coef, snr_db, seed, stream++));
    }
    toy.branches = std::move(branches);
    return toy;
}

}  // namespace fosst
