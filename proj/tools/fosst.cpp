// fosst command-line front end: synthetic data, end-to-end analysis and
// stage-wise execution with inspectable artifacts.

#include "fosst/fosst.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kScenarios{"wecc-like", "def-toy", "ambient"};

struct Options {
    std::string config;
    std::string out = "out";
    std::string input;
    std::uint64_t seed = 1;
    std::optional<std::string> tfr;
    std::optional<double> snr_db;
    std::optional<std::string> sigma;
    std::optional<int> n_bins;
    std::optional<int> d_min;
    std::optional<double> t_event;
    std::vector<std::string> overrides;
    std::string scenario;
    bool dump_mtf = false;
};

/// Prints elapsed time of one stage to stderr when it goes out of scope.
class StageLog {
public:
    explicit StageLog(std::string name) : name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
    ~StageLog() {
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        std::cerr << "fosst: " << name_ << " " << s << " s\n";
    }

private:
    std::string name_;
    std::chrono::steady_clock::time_point start_;
};

double parse_number(const std::string& text, const std::string& what) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw fosst::ConfigError("cli", what + " expects a number, got '" + text + "'");
    }
    return v;
}

/// "a.b=value" as the nested object {"a": {"b": value}}. The value is read as
/// JSON when it parses, otherwise as a string.
json override_object(const std::string& item) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw fosst::ConfigError("cli", "--set expects key=value, got '" + item + "'");
    const std::string path = item.substr(0, eq);
    const std::string text = item.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    std::vector<std::string> keys;
    for (std::size_t start = 0;;) {
        const auto dot = path.find('.', start);
        keys.push_back(path.substr(start, dot - start));
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    for (auto it = keys.rbegin(); it != keys.rend(); ++it) value = json{{*it, value}};
    return value;
}

fosst::PipelineConfig load_config(const Options& o) {
    fosst::PipelineConfig cfg;
    if (!o.config.empty()) fosst::apply_config_json(cfg, fosst::read_json_file(o.config, "cli"));
    for (const auto& item : o.overrides) fosst::apply_config_json(cfg, override_object(item));
    if (o.tfr) cfg.kind = fosst::parse_tfr_kind(*o.tfr);
    if (o.sigma) {
        if (*o.sigma == "auto") {
            cfg.sigma_s.reset();
        } else {
            cfg.sigma_s = parse_number(*o.sigma, "--sigma");
        }
    }
    if (o.n_bins) cfg.n_bins = *o.n_bins;
    if (o.d_min) cfg.filter.d_min = *o.d_min;
    return cfg;
}

fosst::EventDataset load_dataset(const Options& o) {
    if (o.input.empty()) throw fosst::ConfigError("cli", "--input <dir> is required");
    const fs::path dir(o.input);
    const auto files = fosst::ContestFiles::in_directory(dir);
    for (const auto& p : {files.voltage_mag, files.voltage_ang, files.current_mag, files.current_ang,
                          dir / "topology.json"}) {
        if (!fs::exists(p)) throw fosst::DataError("core_model", "missing input file " + p.string());
    }
    const auto topo = fosst::load_topology(dir / "topology.json");
    return fosst::ingest_contest_csv(files, topo, o.t_event);
}

fs::path out_dir(const Options& o) {
    const fs::path dir(o.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw fosst::DataError("cli", "cannot create output directory " + dir.string() + ": " + ec.message());
    return dir;
}

void write_manifest(const fs::path& dir, const std::string& command, const Options& o, const json& config,
                    const std::vector<std::string>& artifacts) {
    json inputs = json::object();
    if (!o.input.empty()) inputs["dataset"] = o.input;
    if (!o.config.empty()) inputs["config"] = o.config;
    fosst::write_json_file(dir / "manifest.json", {{"tool", "fosst"},
                                                   {"version", FOSST_VERSION},
                                                   {"command", command},
                                                   {"inputs", inputs},
                                                   {"config", config},
                                                   {"artifacts", artifacts}});
}

void echo_config(const fosst::PipelineConfig& cfg) {
    std::cerr << "fosst: config " << fosst::config_to_json(cfg).dump() << '\n';
}

/// Adopts the window chosen by the tfr stage and rejects settings that
/// contradict it.
fosst::PipelineConfig adopt_meta(fosst::PipelineConfig cfg, const json& meta) {
    const auto t = fosst::tfr_config_from_meta(meta, cfg);
    if (!cfg.sigma_s) cfg.sigma_s = t.window.sigma;
    if (cfg.kind != t.kind || cfg.n_bins != t.n_bins || *cfg.sigma_s != t.window.sigma) {
        throw fosst::ConfigError("cli", "configuration differs from the one recorded in tfr_meta.json");
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// Stage bodies shared by analyze and the stage-wise commands

struct TfrOutput {
    fosst::PreparedData prep;
    fosst::TfrStage stage;
};

TfrOutput tfr_stage(const fosst::EventDataset& raw, const fosst::PipelineConfig& cfg, const fs::path& dir,
                    bool dump_mtf, std::vector<std::string>& artifacts) {
    StageLog log("tfr");
    TfrOutput out{fosst::prepare(raw, cfg), {}};
    out.stage = fosst::run_tfr_stage(out.prep, cfg);
    std::cerr << "fosst: tfr kind " << fosst::to_string(out.prep.tfr.kind) << " sigma " << out.prep.tfr.window.sigma
              << " s, N " << out.prep.tfr.n_bins << ", " << out.stage.mtf.source_ids.size() << " channels\n";
    fosst::write_json_file(dir / "tfr_meta.json", fosst::tfr_meta_json(out.prep, out.stage.mtf));
    fosst::write_threshold_csv(dir / "threshold.csv", out.stage.gamma, out.prep.tfr);
    artifacts.insert(artifacts.end(), {"tfr_meta.json", "threshold.csv"});
    if (dump_mtf) {
        fosst::write_magnitude_csv(dir / "mtf.csv", out.stage.mtf.values, out.prep.tfr, out.prep.dataset.spec.t0);
        artifacts.push_back("mtf.csv");
    }
    return out;
}

struct RidgeOutput {
    std::vector<fosst::Ridge> ridges;
    std::vector<std::size_t> onsets;
};

RidgeOutput ridge_stage(const fosst::Grid<double>& mtf, std::span<const double> gamma, const fosst::TfrConfig& t,
                        const fosst::PipelineConfig& cfg, double t0, const fs::path& dir,
                        std::vector<std::string>& artifacts) {
    StageLog log("ridges");
    cfg.ridge.validate(t.fs());
    RidgeOutput out;
    out.ridges = fosst::run_ridge_stage(mtf, gamma, t, cfg.ridge).ridges;
    const int peel = fosst::peel_width_for(cfg.ridge, t);
    out.onsets = fosst::ridge_onsets(out.ridges, mtf, t, peel);
    const fosst::RidgeAxes ax{t.fs(), t.n_bins};
    std::cerr << "fosst: " << out.ridges.size() << " ridges\n";
    fosst::write_json_file(dir / "ridges.json", fosst::ridges_to_json(out.ridges, ax, t0, peel, out.onsets));
    fosst::write_ridges_csv(dir / "ridges.csv", out.ridges, ax, t0);
    artifacts.insert(artifacts.end(), {"ridges.json", "ridges.csv"});
    return out;
}

std::vector<fosst::BranchComponents> filter_stage(const fosst::PreparedData& prep,
                                                  std::span<const fosst::Ridge> ridges,
                                                  const fosst::PipelineConfig& cfg, const fs::path& dir,
                                                  std::vector<std::string>& artifacts) {
    StageLog log("filter");
    auto comps = fosst::run_filter_stage(prep, ridges, cfg);
    fosst::write_components_csv(dir / "components.csv", comps, prep.dataset.spec);
    artifacts.push_back("components.csv");
    return comps;
}

void def_stage(const fosst::PreparedData& prep, std::span<const fosst::Ridge> ridges, std::span<const double> gamma,
               std::span<const std::size_t> onsets, std::span<const fosst::BranchComponents> comps,
               const fosst::PipelineConfig& cfg, const fs::path& dir, std::vector<std::string>& artifacts) {
    StageLog log("def");
    const auto defs = fosst::run_def_stage(prep, ridges, gamma, onsets, comps, cfg);
    for (const auto& d : defs) {
        std::cerr << "fosst: component h" << d.component << " at " << d.mean_freq_hz << " Hz: source "
                  << (d.ranking.verdict ? *d.ranking.verdict : std::string("inconclusive")) << '\n';
    }
    fosst::write_json_file(dir / "def.json", fosst::def_to_json(defs, prep.tfr.fs()));
    artifacts.push_back("def.json");
}

// ---------------------------------------------------------------------------
// Commands

void cmd_synth(const Options& o) {
    const auto dir = out_dir(o);
    fosst::Scenario sc;
    json extra = json::object();
    if (o.scenario == "wecc-like") {
        sc = fosst::gen_wecc_like_scenario(o.seed, o.snr_db);
    } else if (o.scenario == "def-toy") {
        auto toy = fosst::gen_def_toy(o.seed, o.snr_db);
        json slopes = json::object();
        for (const auto& b : toy.branches) slopes[b.profile.device] = b.analytic_slope;
        extra["analytic_slopes"] = slopes;
        sc = std::move(toy.scenario);
    } else {
        if (o.snr_db) throw fosst::ConfigError("cli", "the ambient scenario takes no --snr-db");
        sc.dataset = fosst::gen_ambient_dataset(o.seed);
        sc.seed = o.seed;
        sc.snr_db = std::numeric_limits<double>::infinity();
        for (const auto& b : sc.dataset.branches) sc.devices.push_back(b.from_bus);
    }
    fosst::write_contest_csv(sc.dataset, dir);
    auto truth = fosst::truth_to_json(sc);
    if (std::isinf(sc.snr_db)) truth["snr_db"] = nullptr;
    truth["scenario"] = o.scenario;
    truth.update(extra);
    fosst::write_json_file(dir / "truth.json", truth);
    const std::vector<std::string> artifacts{"voltage_mag.csv", "voltage_ang.csv", "current_mag.csv",
                                             "current_ang.csv", "topology.json",   "truth.json"};
    write_manifest(dir, "synth", o, {{"scenario", o.scenario}, {"seed", o.seed}, {"snr_db", truth["snr_db"]}},
                   artifacts);
}

void cmd_analyze(const Options& o) {
    const auto cfg = load_config(o);
    echo_config(cfg);
    const auto raw = load_dataset(o);
    const auto dir = out_dir(o);
    std::vector<std::string> artifacts;
    const auto tfr = tfr_stage(raw, cfg, dir, o.dump_mtf, artifacts);
    const auto& prep = tfr.prep;
    const auto r = ridge_stage(tfr.stage.mtf.values, tfr.stage.gamma.gamma, prep.tfr, cfg, prep.dataset.spec.t0, dir,
                               artifacts);
    const auto comps = filter_stage(prep, r.ridges, cfg, dir, artifacts);
    def_stage(prep, r.ridges, tfr.stage.gamma.gamma, r.onsets, comps, cfg, dir, artifacts);
    write_manifest(dir, "analyze", o, fosst::config_to_json(cfg), artifacts);
}

void cmd_tfr(const Options& o) {
    const auto cfg = load_config(o);
    echo_config(cfg);
    const auto raw = load_dataset(o);
    const auto dir = out_dir(o);
    std::vector<std::string> artifacts;
    tfr_stage(raw, cfg, dir, true, artifacts);
    write_manifest(dir, "tfr", o, fosst::config_to_json(cfg), artifacts);
}

void cmd_ridges(const Options& o) {
    const auto dir = out_dir(o);
    const auto meta = fosst::read_json_file(dir / "tfr_meta.json", "cli");
    const auto cfg = adopt_meta(load_config(o), meta);
    echo_config(cfg);
    const auto t = fosst::tfr_config_from_meta(meta, cfg);
    const auto length = meta.at("length").get<std::size_t>();
    const auto mtf = fosst::read_mtf_csv(dir / "mtf.csv", t.n_bins, length);
    const auto gamma = fosst::read_threshold_csv(dir / "threshold.csv", t.n_bins);
    std::vector<std::string> artifacts;
    ridge_stage(mtf, gamma, t, cfg, meta.at("t0").get<double>(), dir, artifacts);
    write_manifest(dir, "ridges", o, fosst::config_to_json(cfg), artifacts);
}

/// Dataset preparation for the filter and def stages, using the tfr stage's window.
fosst::PreparedData prepare_from_meta(const Options& o, fosst::PipelineConfig& cfg, const fs::path& dir) {
    const auto meta = fosst::read_json_file(dir / "tfr_meta.json", "cli");
    cfg = adopt_meta(cfg, meta);
    echo_config(cfg);
    auto prep = fosst::prepare(load_dataset(o), cfg);
    fosst::check_tfr_meta(meta, prep);
    return prep;
}

void cmd_filter(const Options& o) {
    const auto dir = out_dir(o);
    auto cfg = load_config(o);
    const auto prep = prepare_from_meta(o, cfg, dir);
    const auto ridges = fosst::ridges_from_json(fosst::read_json_file(dir / "ridges.json", "cli"));
    std::vector<std::string> artifacts;
    filter_stage(prep, ridges, cfg, dir, artifacts);
    write_manifest(dir, "filter", o, fosst::config_to_json(cfg), artifacts);
}

void cmd_def(const Options& o) {
    const auto dir = out_dir(o);
    auto cfg = load_config(o);
    const auto prep = prepare_from_meta(o, cfg, dir);
    const auto rj = fosst::read_json_file(dir / "ridges.json", "cli");
    const auto ridges = fosst::ridges_from_json(rj);
    const auto onsets = fosst::onsets_from_json(rj);
    const auto gamma = fosst::read_threshold_csv(dir / "threshold.csv", prep.tfr.n_bins);
    const auto comps = fosst::read_components_csv(dir / "components.csv", prep.dataset, ridges);
    std::vector<std::string> artifacts;
    def_stage(prep, ridges, gamma, onsets, comps, cfg, dir, artifacts);
    write_manifest(dir, "def", o, fosst::config_to_json(cfg), artifacts);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-channel synchrosqueezing analysis of forced oscillations", "fosst"};
    app.set_version_flag("--version", std::string(FOSST_VERSION));
    app.require_subcommand(1);
    app.fallthrough();
    Options o;
    app.add_option("--config", o.config, "JSON configuration file; unknown keys are errors");
    app.add_option("--out", o.out, "Output directory")->capture_default_str();
    app.add_option("--input", o.input, "Dataset directory with the four CSV files and topology.json");
    app.add_option("--seed", o.seed, "Random seed for synth")->capture_default_str();
    app.add_option("--tfr", o.tfr, "Transform kind")->check(CLI::IsMember({"stft", "fsst", "fsst2"}));
    app.add_option("--snr-db", o.snr_db, "Input SNR of added white noise (synth)");
    app.add_option("--sigma", o.sigma, "Window parameter in seconds, or 'auto'");
    app.add_option("--n-bins", o.n_bins, "Number of frequency bins");
    app.add_option("--d-min", o.d_min, "Minimum half-width of the reconstruction band, bins");
    app.add_option("--t-event", o.t_event, "End of the pre-event interval, seconds from the first sample");
    app.add_option("--set", o.overrides, "Override any configuration key, e.g. --set ridge.jumpt_s=3");

    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    synth->add_option("scenario", o.scenario, "Scenario name")->required();
    auto* analyze = app.add_subcommand("analyze", "Run the full pipeline");
    analyze->add_flag("--dump-mtf", o.dump_mtf, "Also write the multi-channel magnitude grid");
    auto* tfr = app.add_subcommand("tfr", "Transform stage: tfr_meta.json, threshold.csv, mtf.csv");
    auto* ridges = app.add_subcommand("ridges", "Ridge stage from the tfr artifacts");
    auto* filter = app.add_subcommand("filter", "Mode reconstruction from ridges.json");
    auto* def = app.add_subcommand("def", "Energy-flow source ranking from components.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (synth->parsed()) {
            if (std::find(kScenarios.begin(), kScenarios.end(), o.scenario) == kScenarios.end()) {
                std::string names;
                for (const auto& s : kScenarios) names += (names.empty() ? "" : ", ") + s;
                throw fosst::ConfigError("cli", "unknown scenario '" + o.scenario + "' (valid: " + names + ")");
            }
            cmd_synth(o);
        } else if (analyze->parsed()) {
            cmd_analyze(o);
        } else if (tfr->parsed()) {
            cmd_tfr(o);
        } else if (ridges->parsed()) {
            cmd_ridges(o);
        } else if (filter->parsed()) {
            cmd_filter(o);
        } else if (def->parsed()) {
            cmd_def(o);
        }
    } catch (const fosst::Error& e) {
        std::cerr << "fosst: error: " << e.what() << '\n';
        return fosst::exit_code(e.kind());
    } catch (const json::exception& e) {
        std::cerr << "fosst: error: [cli] " << e.what() << '\n';
        return 3;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "fosst: error: [cli] " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "fosst: error: " << e.what() << '\n';
        return 4;
    }
    return 0;
}
