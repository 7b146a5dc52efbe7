// cospar: experiment runner, objective generator, session replay and server.
//
// Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.

#include "cospar/errors.hpp"
#include "cospar/experiments.hpp"
#include "cospar/http_api.hpp"
#include "cospar/objective.hpp"
#include "cospar/presets.hpp"
#include "cospar/session.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace {

using namespace cospar;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

// Raised for user-facing usage problems detected after flag parsing.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string env_or(const char* name, std::string fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : std::move(fallback);
}

std::size_t default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

std::string format_number(double x) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.17g", x);
    return buffer;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write " + path.string());
    out << text;
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

Json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(path.string() + " is not valid JSON: " + e.what());
    }
}

std::vector<std::size_t> parse_checkpoints(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            std::size_t used = 0;
            const auto v = std::stoul(item, &used);
            if (used != item.size() || v == 0) throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::exception&) {
            throw UsageError("invalid checkpoint '" + item + "'");
        }
    }
    return out;
}

void write_posterior_dump(const fs::path& path, const Engine& engine) {
    const auto summary = engine.posterior_summary();
    std::ostringstream out;
    for (const auto& dim : engine.space().dimensions()) out << dim.name << ',';
    out << "mean,std\n";
    for (ActionIndex a = 0; a < engine.space().size(); ++a) {
        for (const double x : engine.space().coordinates(a)) out << format_number(x) << ',';
        const auto i = static_cast<Eigen::Index>(a);
        out << format_number(summary.mean[i]) << ',' << format_number(summary.stddev[i]) << '\n';
    }
    write_text(path, out.str());
}

Json manifest_header(const std::string& command, std::uint64_t seed) {
    return {{"tool", "cospar"}, {"schema_version", 1}, {"command", command}, {"master_seed", seed}};
}

// ---------------------------------------------------------------- simulate-1d

struct Simulate1dOptions {
    std::string objective;
    std::uint64_t seed = 0;
    std::string out;
    std::size_t repetitions = 1;
    std::size_t trials = 60;
    std::size_t n = 2;
    std::size_t b = 0;
    bool coactive = false;
    std::string checkpoints = "1,3,5,10";
    std::size_t jobs = default_jobs();
};

int simulate_1d(const Simulate1dOptions& o) {
    if (!fs::exists(o.objective)) throw UsageError("objective file not found: " + o.objective);
    const auto objective = load_objective_csv(o.objective);
    if (objective.space.dimensionality() != 1) throw UsageError("simulate-1d needs a one-dimensional objective");
    const auto checkpoints = parse_checkpoints(o.checkpoints);

    ExperimentConfig cfg;
    cfg.id = "n" + std::to_string(o.n) + "_b" + std::to_string(o.b) + (o.coactive ? "_coactive" : "");
    cfg.engine = presets::simulation_engine(o.n, o.b, presets::compass_gait_kernel(), 1);
    cfg.trials_total = o.trials;
    cfg.repetitions = o.repetitions;
    cfg.coactive_enabled = o.coactive;
    cfg.objective = {ObjectiveSource::Kind::file, {}, {}, o.objective};
    try {
        cfg.validate();
        cfg.engine.validate(objective.space);
    } catch (const ConfigError& e) {
        throw UsageError(e.what());
    }

    const fs::path out_dir = o.out;
    fs::create_directories(out_dir);
    const auto curve = run_experiment(cfg, o.seed, o.jobs, &objective);

    // Posterior panels come from repetition 0, replayed with an observer.
    const auto& seeds0 = curve.seeds.front();
    Json dumps = Json::array();
    ActionIndex final_argmax = 0;
    run_repetition(cfg, objective, seeds0.engine, seeds0.oracle, [&](const Engine& engine) {
        final_argmax = argmax(engine.fit().mean);
        for (const auto k : checkpoints) {
            if (engine.iteration() != k) continue;
            const auto name = "posterior_iter_" + std::to_string(k) + ".csv";
            write_posterior_dump(out_dir / name, engine);
            dumps.push_back(name);
        }
    });

    std::ostringstream results;
    write_results_csv(results, {curve});
    write_text(out_dir / "results.csv", results.str());

    Json seeds = Json::array();
    for (const auto& s : curve.seeds) seeds.push_back(to_json(s));
    auto manifest = manifest_header("simulate-1d", o.seed);
    manifest["experiment"] = to_json(cfg);
    manifest["checkpoints"] = checkpoints;
    manifest["posterior_dumps"] = dumps;
    manifest["child_seeds"] = seeds;
    manifest["final_posterior_argmax"] = final_argmax;
    manifest["true_argmax"] = argmax(objective.values);
    manifest["outputs"] = {"results.csv"};
    manifest["assumptions"] = {"candidate step lengths are taken from the objective file grid"};
    write_json(out_dir / "manifest.json", manifest);

    const auto final_value = curve.summary.mean.empty() ? 0.0 : curve.summary.mean.back();
    std::cout << "simulate-1d: " << cfg.repetitions << " repetitions x " << cfg.trials_total
              << " trials; final mean normalized objective " << format_number(final_value) << "\n"
              << "repetition 0 posterior argmax " << final_argmax << ", true argmax " << argmax(objective.values)
              << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- simulate-2d

struct Simulate2dOptions {
    std::string config;
    std::uint64_t seed = 0;
    std::string out;
    std::optional<std::size_t> repetitions;
    std::optional<std::size_t> trials;
    std::size_t jobs = default_jobs();
};

int simulate_2d(const Simulate2dOptions& o) {
    SyntheticSuite suite;
    try {
        suite = o.config.empty() ? default_synthetic_suite() : parse_synthetic_suite(read_json(o.config));
        if (o.repetitions) suite.repetitions = *o.repetitions;
        if (o.trials) suite.trials = *o.trials;
    } catch (const ConfigError& e) {
        throw UsageError(e.what());
    }
    std::vector<ExperimentConfig> experiments;
    try {
        experiments = suite.experiments();
    } catch (const ConfigError& e) {
        throw UsageError(e.what());
    }

    const fs::path out_dir = o.out;
    fs::create_directories(out_dir / "curves");
    std::vector<LearningCurve> curves;
    Json cells = Json::array();
    for (const auto& cfg : experiments) {
        curves.push_back(run_experiment(cfg, o.seed, o.jobs));
        std::ostringstream cell_csv;
        write_results_csv(cell_csv, {curves.back()});
        write_text(out_dir / "curves" / (cfg.id + ".csv"), cell_csv.str());
        cells.push_back(to_json(cfg));
        std::cout << cfg.id << ": final mean " << format_number(curves.back().summary.mean.back()) << " (se "
                  << format_number(curves.back().summary.standard_error.back()) << ")\n";
    }

    std::ostringstream results;
    write_results_csv(results, curves);
    write_text(out_dir / "results.csv", results.str());

    std::ostringstream summary;
    summary << "config_id,n,b,coactive,final_mean,final_standard_error\n";
    for (std::size_t i = 0; i < curves.size(); ++i) {
        const auto& cell = suite.cells[i];
        summary << cell.id << ',' << cell.n << ',' << cell.b << ',' << (cell.coactive ? 1 : 0) << ','
                << format_number(curves[i].summary.mean.back()) << ','
                << format_number(curves[i].summary.standard_error.back()) << '\n';
    }
    write_text(out_dir / "summary.csv", summary.str());

    Json seeds = Json::array();
    for (const auto& s : curves.front().seeds) seeds.push_back(to_json(s));
    auto manifest = manifest_header("simulate-2d", o.seed);
    manifest["suite"] = to_json(suite);
    manifest["experiments"] = cells;
    manifest["child_seeds"] = seeds;
    manifest["outputs"] = {"results.csv", "summary.csv", "curves/"};
    write_json(out_dir / "manifest.json", manifest);
    return kExitOk;
}

// ---------------------------------------------------------------- gen-objective

struct GenObjectiveOptions {
    std::string grid = "30x30";
    std::vector<double> lengthscales{0.15};
    double signal_variance = 1.0;
    std::uint64_t seed = 0;
    std::string out;
};

int gen_objective(const GenObjectiveOptions& o) {
    std::vector<Dimension> dims;
    {
        std::stringstream in(o.grid);
        std::string item;
        while (std::getline(in, item, 'x')) {
            std::size_t used = 0;
            unsigned long count = 0;
            try {
                count = std::stoul(item, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != item.size() || count == 0) throw UsageError("invalid --grid '" + o.grid + "'");
            dims.push_back({"dim_" + std::to_string(dims.size()), 0.0, 1.0, count, ""});
        }
    }
    if (dims.empty()) throw UsageError("invalid --grid '" + o.grid + "'");
    auto lengthscales = o.lengthscales;
    if (lengthscales.size() == 1) lengthscales.assign(dims.size(), lengthscales.front());

    ActionSpace space;
    KernelParams kernel{lengthscales, o.signal_variance, 0.0, 1.0};
    try {
        space = build_action_grid(dims);
        kernel.validate(space.dimensionality());
    } catch (const ConfigError& e) {
        throw UsageError(e.what());
    }
    Rng rng(o.seed);
    const auto table = sample_gp_objective(space, kernel, rng);

    const fs::path out = o.out;
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_objective_csv(table, out, Orientation::utility);
    auto manifest = manifest_header("gen-objective", o.seed);
    manifest["grid"] = to_json(space);
    manifest["kernel"] = to_json(kernel);
    manifest["output"] = out.filename().string();
    write_json(fs::path(out).replace_extension(".manifest.json"), manifest);
    std::cout << "wrote " << space.size() << " rows to " << out.string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- replay

int replay(const std::string& snapshot_path, const std::string& script_path) {
    SessionRecord record = [&] {
        try {
            return restore_session(read_json(snapshot_path));
        } catch (const std::invalid_argument& e) {
            throw UsageError(std::string("snapshot: ") + e.what());
        } catch (const UnsupportedVersionError& e) {
            throw UsageError(std::string("snapshot: ") + e.what());
        }
    }();
    Json script = Json::array();
    if (!script_path.empty()) script = read_json(script_path);
    if (!script.is_array()) throw UsageError("script must be a JSON array of feedback payloads");

    auto& engine = record.engine;
    auto print_state = [&](const std::string& prefix) {
        std::cout << prefix << " iteration=" << engine.iteration() << " proposals=[";
        for (std::size_t i = 0; i < engine.pending().size(); ++i)
            std::cout << (i ? "," : "") << engine.pending()[i];
        std::cout << "] argmax=" << argmax(engine.fit().mean) << "\n";
    };
    if (engine.pending().empty() && record.status != SessionStatus::closed) engine.propose();
    print_state("initial");
    if (record.status == SessionStatus::closed && !script.empty())
        throw UsageError("snapshot session is closed; cannot replay feedback");

    for (std::size_t step = 0; step < script.size(); ++step) {
        try {
            const auto& payload = script[step];
            if (payload.contains("iteration") && payload.at("iteration") != engine.iteration())
                throw ValidationError("iteration token does not match the replayed session");
            const auto bundle = feedback_from_payload(engine, payload, record.single_dimension_coactive);
            engine.record(bundle);
            engine.propose();
        } catch (const std::invalid_argument& e) {
            throw UsageError("step " + std::to_string(step + 1) + ": " + e.what());
        } catch (const ProtocolError& e) {
            throw UsageError("step " + std::to_string(step + 1) + ": " + e.what());
        }
        print_state("step " + std::to_string(step + 1));
    }
    return kExitOk;
}

// ---------------------------------------------------------------- serve

struct ServeOptions {
    std::string listen = env_or("COSPAR_LISTEN", "127.0.0.1:8080");
    std::string snapshot_dir = env_or("COSPAR_SNAPSHOT_DIR", "sessions");
    std::string presets = env_or("COSPAR_PRESETS", "");
    std::string cors_origin = "*";
};

int serve(const ServeOptions& o) {
    const auto colon = o.listen.rfind(':');
    if (colon == std::string::npos) throw UsageError("--listen must be host:port");
    const auto host = o.listen.substr(0, colon);
    int port = 0;
    try {
        port = std::stoi(o.listen.substr(colon + 1));
    } catch (const std::exception&) {
        throw UsageError("--listen must be host:port");
    }
    std::map<std::string, presets::SessionPreset> preset_map;
    try {
        preset_map = o.presets.empty() ? presets::builtin_session_presets() : presets::load_session_presets(o.presets);
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
    SessionService service(o.snapshot_dir, std::move(preset_map));
    httplib::Server server;
    mount_session_api(server, service, o.cors_origin);
    std::cout << "cospar serving on " << host << ":" << port << " (snapshots in " << o.snapshot_dir << ", "
              << service.ids().size() << " sessions restored)" << std::endl;
    if (!server.listen(host, port)) {
        std::cerr << "cannot listen on " << o.listen << "\n";
        return kExitUsage;
    }
    return kExitOk;
}

int presets_command() {
    std::cout << presets_view(presets::builtin_session_presets()).dump(2) << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CoSpar preference-based optimization: simulations, objectives, sessions"};
    app.require_subcommand(1);
    const std::string default_out = env_or("COSPAR_OUT", ".");
    int exit_code = kExitOk;

    Simulate1dOptions s1;
    s1.out = default_out;
    auto* sim1 = app.add_subcommand("simulate-1d", "Optimize a 1D objective curve with simulated preferences");
    sim1->add_option("--objective", s1.objective, "Objective CSV")->required();
    sim1->add_option("--seed", s1.seed, "Master seed");
    sim1->add_option("--out", s1.out, "Output directory (default $COSPAR_OUT or .)");
    sim1->add_option("--repetitions", s1.repetitions, "Repetitions")->check(CLI::PositiveNumber);
    sim1->add_option("--trials", s1.trials, "Executed trials per repetition")->check(CLI::PositiveNumber);
    sim1->add_option("--n", s1.n, "Actions per iteration")->check(CLI::PositiveNumber);
    sim1->add_option("--b", s1.b, "Buffer size");
    sim1->add_flag("--coactive", s1.coactive, "Simulate coactive feedback");
    sim1->add_option("--checkpoints", s1.checkpoints, "Iterations with posterior dumps, e.g. 1,3,5,10");
    sim1->add_option("--jobs", s1.jobs, "Worker threads")->check(CLI::PositiveNumber);

    Simulate2dOptions s2;
    s2.out = default_out;
    auto* sim2 = app.add_subcommand("simulate-2d", "Run the synthetic 2D suite");
    sim2->add_option("--config", s2.config, "Suite config JSON");
    sim2->add_option("--seed", s2.seed, "Master seed");
    sim2->add_option("--out", s2.out, "Output directory (default $COSPAR_OUT or .)");
    sim2->add_option("--repetitions", s2.repetitions, "Override repetitions")->check(CLI::PositiveNumber);
    sim2->add_option("--trials", s2.trials, "Override trials per repetition")->check(CLI::PositiveNumber);
    sim2->add_option("--jobs", s2.jobs, "Worker threads")->check(CLI::PositiveNumber);

    GenObjectiveOptions go;
    go.out = (fs::path(default_out) / "objective.csv").string();
    auto* gen = app.add_subcommand("gen-objective", "Draw a synthetic objective from a GP prior");
    gen->add_option("--grid", go.grid, "Grid counts, e.g. 30x30");
    gen->add_option("--lengthscale", go.lengthscales, "Lengthscale (one, or one per dimension)")->delimiter(',');
    gen->add_option("--signal-variance", go.signal_variance, "Signal variance");
    gen->add_option("--seed", go.seed, "Seed");
    gen->add_option("--out", go.out, "Output CSV path");

    std::string snapshot_path, script_path;
    auto* rep = app.add_subcommand("replay", "Replay scripted feedback against an exported session");
    rep->add_option("--snapshot", snapshot_path, "Exported session JSON")->required();
    rep->add_option("--script", script_path, "JSON array of feedback payloads");

    ServeOptions so;
    auto* srv = app.add_subcommand("serve", "Run the HTTP session service");
    srv->add_option("--listen", so.listen, "host:port (env COSPAR_LISTEN)");
    srv->add_option("--snapshot-dir", so.snapshot_dir, "Snapshot directory (env COSPAR_SNAPSHOT_DIR)");
    srv->add_option("--presets", so.presets, "Preset JSON file (env COSPAR_PRESETS)");
    srv->add_option("--cors-origin", so.cors_origin, "Allowed CORS origin");

    auto* pre = app.add_subcommand("presets", "List the built-in session presets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*sim1) exit_code = simulate_1d(s1);
        else if (*sim2) exit_code = simulate_2d(s2);
        else if (*gen) exit_code = gen_objective(go);
        else if (*rep) exit_code = replay(snapshot_path, script_path);
        else if (*srv) exit_code = serve(so);
        else if (*pre) exit_code = presets_command();
    } catch (const RepetitionError& e) {
        std::cerr << "numerical failure: " << e.what() << " (objective seed " << e.seeds().objective
                  << ", engine seed " << e.seeds().engine << ")\n";
        return kExitNumerical;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return exit_code;
}
