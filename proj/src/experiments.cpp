#include "cospar/experiments.hpp"

#include "cospar/errors.hpp"
#include "cospar/presets.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <ostream>
#include <random>
#include <thread>

namespace cospar {
namespace {

constexpr std::uint64_t kObjectiveStream = 0;
constexpr std::uint64_t kEngineStream = 1;
constexpr std::uint64_t kOracleStream = 2;

std::optional<bool> compare(const ObjectiveTable& objective, ActionIndex a, ActionIndex b, double noise,
                            Rng& rng) {
    if (noise > 0.0) {
        std::normal_distribution<double> eps(0.0, noise);
        const double va = objective.values[static_cast<Eigen::Index>(a)] + eps(rng);
        const double vb = objective.values[static_cast<Eigen::Index>(b)] + eps(rng);
        if (va == vb) return std::nullopt;
        return va > vb;
    }
    switch (preference_oracle(objective, a, b)) {
        case Preference::first: return true;
        case Preference::second: return false;
        case Preference::none: break;
    }
    return std::nullopt;
}

ObjectiveTable objective_for(const ExperimentConfig& cfg, const RepetitionSeeds& seeds,
                             const ObjectiveTable* shared) {
    if (shared) return *shared;
    Rng rng(seeds.objective);
    return sample_gp_objective(cfg.objective.grid, cfg.objective.generator, rng);
}

std::string format_number(double x) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.17g", x);
    return buffer;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (trials_total == 0) throw ConfigError("trials_total must be positive");
    if (repetitions == 0) throw ConfigError("repetitions must be positive");
    if (engine.n == 0 || trials_total % engine.n != 0)
        throw ConfigError("trials_total must be a multiple of n");
    if (!(oracle_noise >= 0.0)) throw ConfigError("oracle_noise must be non-negative");
    if (objective.kind == ObjectiveSource::Kind::gp_prior) {
        engine.validate(objective.grid);
        objective.generator.validate(objective.grid.dimensionality());
    }
}

std::uint64_t child_seed(std::uint64_t master, std::uint64_t repetition, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                      static_cast<std::uint32_t>(repetition), static_cast<std::uint32_t>(repetition >> 32),
                      static_cast<std::uint32_t>(stream)};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

RepetitionSeeds repetition_seeds(std::uint64_t master, std::size_t repetition) {
    return {repetition, child_seed(master, repetition, kObjectiveStream),
            child_seed(master, repetition, kEngineStream), child_seed(master, repetition, kOracleStream)};
}

RepetitionTrace run_repetition(const ExperimentConfig& cfg, const ObjectiveTable& objective,
                               std::uint64_t engine_seed, std::uint64_t oracle_seed,
                               const IterationObserver& observer) {
    const auto normalized = normalize_objective(objective);
    Engine engine(cfg.engine, objective.space, engine_seed);
    Rng oracle_rng(oracle_seed);

    std::optional<GradientTable> gradients;
    CoactiveOracleConfig oracle_cfg;
    if (cfg.coactive_enabled) {
        gradients = gradient_table(objective);
        oracle_cfg = coactive_oracle_config(*gradients);
    }

    const std::size_t n = cfg.engine.n;
    const std::size_t b = cfg.engine.b;
    RepetitionTrace trace;
    trace.iterations = cfg.trials_total / n;
    for (std::size_t t = 0; t < trace.iterations; ++t) {
        const auto proposals = engine.propose();
        auto feedback = FeedbackBundle::unset(n, b);
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t k = j + 1; k < n; ++k)
                feedback.at(j, k) = compare(objective, proposals[j], proposals[k], cfg.oracle_noise, oracle_rng);
            for (std::size_t k = 0; k < engine.buffer().size(); ++k)
                feedback.at(j, n + k) =
                    compare(objective, proposals[j], engine.buffer()[k], cfg.oracle_noise, oracle_rng);
            if (gradients) feedback.coactive[j] = coactive_oracle(*gradients, proposals[j], oracle_cfg);
        }
        for (const auto a : proposals) {
            trace.executed.push_back(a);
            trace.normalized.push_back(normalized.values[static_cast<Eigen::Index>(a)]);
        }
        const auto outcome = engine.record(feedback);
        trace.pairwise_records += outcome.pairwise_records;
        trace.coactive_records += outcome.coactive_records;
        if (observer) observer(engine);
    }
    return trace;
}

CurveSummary summarize_curves(const std::vector<std::vector<double>>& curves) {
    CurveSummary out;
    if (curves.empty()) return out;
    const auto length = curves.front().size();
    for (const auto& c : curves)
        if (c.size() != length) throw ConfigError("learning curves have different lengths");
    const auto count = static_cast<double>(curves.size());
    out.single_repetition = curves.size() < 2;
    out.mean.assign(length, 0.0);
    out.standard_error.assign(length, 0.0);
    // Shifted by the first repetition, so identical repetitions give exactly
    // zero spread.
    for (std::size_t i = 0; i < length; ++i) {
        const double shift = curves.front()[i];
        double sum = 0.0, squares = 0.0;
        for (const auto& c : curves) {
            sum += c[i] - shift;
            squares += (c[i] - shift) * (c[i] - shift);
        }
        out.mean[i] = shift + sum / count;
        if (out.single_repetition) continue;
        const double variance = std::max(0.0, (squares - sum * sum / count) / (count - 1.0));
        out.standard_error[i] = std::sqrt(variance / count);
    }
    return out;
}

LearningCurve run_experiment(const ExperimentConfig& cfg, std::uint64_t master_seed, std::size_t jobs,
                             const ObjectiveTable* shared) {
    cfg.validate();
    std::optional<ObjectiveTable> loaded;
    if (!shared && cfg.objective.kind == ObjectiveSource::Kind::file) {
        loaded = load_objective_csv(cfg.objective.path);
        shared = &*loaded;
    }
    if (shared) cfg.engine.validate(shared->space);

    LearningCurve out;
    out.config_id = cfg.id;
    out.repetitions.resize(cfg.repetitions);
    for (std::size_t r = 0; r < cfg.repetitions; ++r) out.seeds.push_back(repetition_seeds(master_seed, r));

    std::vector<std::exception_ptr> errors(cfg.repetitions);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t r = next++; r < cfg.repetitions; r = next++) {
            const auto& seeds = out.seeds[r];
            try {
                const auto objective = objective_for(cfg, seeds, shared);
                out.repetitions[r] = run_repetition(cfg, objective, seeds.engine, seeds.oracle).normalized;
            } catch (...) {
                errors[r] = std::current_exception();
            }
        }
    };
    jobs = std::clamp<std::size_t>(jobs, 1, cfg.repetitions);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t i = 0; i < jobs; ++i) pool.emplace_back(worker);
    }

    for (std::size_t r = 0; r < cfg.repetitions; ++r) {
        if (!errors[r]) continue;
        try {
            std::rethrow_exception(errors[r]);
        } catch (const NumericalError& e) {
            throw RepetitionError("repetition " + std::to_string(r) + " of '" + cfg.id + "' failed: " + e.what(),
                                  out.seeds[r]);
        }
    }
    out.summary = summarize_curves(out.repetitions);
    return out;
}

void write_results_csv(std::ostream& out, const std::vector<LearningCurve>& curves) {
    out << "config_id,trial_index,mean,standard_error\n";
    for (const auto& c : curves)
        for (std::size_t i = 0; i < c.summary.mean.size(); ++i)
            out << c.config_id << ',' << i + 1 << ',' << format_number(c.summary.mean[i]) << ','
                << format_number(c.summary.standard_error[i]) << '\n';
}

std::vector<ExperimentConfig> SyntheticSuite::experiments() const {
    std::vector<ExperimentConfig> out;
    const auto grid = presets::synthetic_2d_grid(grid_size);
    for (const auto& cell : cells) {
        ExperimentConfig cfg;
        cfg.id = cell.id;
        cfg.engine = presets::simulation_engine(cell.n, cell.b, model, 2, beta);
        cfg.trials_total = trials;
        cfg.repetitions = repetitions;
        cfg.coactive_enabled = cell.coactive;
        cfg.objective = {ObjectiveSource::Kind::gp_prior, grid, generator, {}};
        cfg.oracle_noise = oracle_noise;
        cfg.validate();
        out.push_back(std::move(cfg));
    }
    return out;
}

SyntheticSuite default_synthetic_suite() {
    SyntheticSuite suite;
    suite.model = presets::synthetic_2d_kernel();
    suite.generator = presets::synthetic_2d_generator();
    suite.beta = presets::kDefaultBeta;
    for (const auto& [n, b] : {std::pair<std::size_t, std::size_t>{2, 0}, {3, 0}, {1, 1}}) {
        const auto base = "n" + std::to_string(n) + "_b" + std::to_string(b);
        suite.cells.push_back({base, n, b, false});
        suite.cells.push_back({base + "_coactive", n, b, true});
    }
    return suite;
}

SyntheticSuite parse_synthetic_suite(const Json& j) {
    auto suite = default_synthetic_suite();
    if (!j.is_object()) throw ConfigError("suite config must be a JSON object");
    try {
        suite.trials = j.value("trials", suite.trials);
        suite.repetitions = j.value("repetitions", suite.repetitions);
        suite.grid_size = j.value("grid_size", suite.grid_size);
        suite.beta = j.value("beta", suite.beta);
        suite.oracle_noise = j.value("oracle_noise", suite.oracle_noise);
        if (j.contains("model")) suite.model = parse_kernel(j.at("model"));
        if (j.contains("generator")) suite.generator = parse_kernel(j.at("generator"));
        if (j.contains("cells")) {
            suite.cells.clear();
            for (const auto& c : j.at("cells"))
                suite.cells.push_back({c.at("id").get<std::string>(), c.at("n").get<std::size_t>(),
                                       c.at("b").get<std::size_t>(), c.value("coactive", false)});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid suite config: ") + e.what());
    }
    if (suite.cells.empty()) throw ConfigError("suite config needs at least one cell");
    for (std::size_t i = 0; i < suite.cells.size(); ++i)
        for (std::size_t k = 0; k < i; ++k)
            if (suite.cells[i].id == suite.cells[k].id)
                throw ConfigError("duplicate cell id '" + suite.cells[i].id + "'");
    return suite;
}

Json to_json(const SyntheticSuite& suite) {
    Json cells = Json::array();
    for (const auto& c : suite.cells) cells.push_back({{"id", c.id}, {"n", c.n}, {"b", c.b}, {"coactive", c.coactive}});
    return {{"trials", suite.trials},        {"repetitions", suite.repetitions},
            {"grid_size", suite.grid_size},  {"beta", suite.beta},
            {"oracle_noise", suite.oracle_noise}, {"model", to_json(suite.model)},
            {"generator", to_json(suite.generator)}, {"cells", cells}};
}

Json to_json(const ExperimentConfig& cfg) {
    Json objective;
    if (cfg.objective.kind == ObjectiveSource::Kind::gp_prior)
        objective = {{"kind", "gp_prior"}, {"grid", to_json(cfg.objective.grid)},
                     {"generator", to_json(cfg.objective.generator)}};
    else
        objective = {{"kind", "file"}, {"path", cfg.objective.path.string()}};
    return {{"id", cfg.id},
            {"engine", to_json(cfg.engine)},
            {"trials_total", cfg.trials_total},
            {"repetitions", cfg.repetitions},
            {"coactive_enabled", cfg.coactive_enabled},
            {"oracle_noise", cfg.oracle_noise},
            {"objective", objective}};
}

Json to_json(const RepetitionSeeds& seeds) {
    return {{"repetition", seeds.repetition},
            {"objective_seed", seeds.objective},
            {"engine_seed", seeds.engine},
            {"oracle_seed", seeds.oracle}};
}

}  // namespace cospar
