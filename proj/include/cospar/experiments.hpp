#pragma once

#include "cospar/engine.hpp"
#include "cospar/errors.hpp"
#include "cospar/objective.hpp"
#include "cospar/serialization.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace cospar {

struct ObjectiveSource {
    enum class Kind { gp_prior, file };
    Kind kind = Kind::gp_prior;
    ActionSpace grid;  ///< gp_prior: grid the objective is drawn on
    KernelParams generator;  ///< gp_prior: generating kernel
    std::filesystem::path path;  ///< file: objective CSV
};

struct ExperimentConfig {
    std::string id;
    EngineConfig engine;
    std::size_t trials_total = 150;
    std::size_t repetitions = 100;
    bool coactive_enabled = false;
    ObjectiveSource objective;
    /// Standard deviation of Gaussian noise added to each utility before an
    /// oracle comparison. Zero gives the noise-free oracle.
    double oracle_noise = 0.0;

    void validate() const;
};

struct RepetitionSeeds {
    std::size_t repetition = 0;
    std::uint64_t objective = 0;
    std::uint64_t engine = 0;
    std::uint64_t oracle = 0;
};

/// Deterministic child seed for (master, repetition, stream).
std::uint64_t child_seed(std::uint64_t master, std::uint64_t repetition, std::uint64_t stream);
RepetitionSeeds repetition_seeds(std::uint64_t master, std::size_t repetition);

struct RepetitionTrace {
    std::vector<ActionIndex> executed;
    std::vector<double> normalized;  ///< normalized objective of each executed action
    std::size_t iterations = 0;
    std::size_t pairwise_records = 0;
    std::size_t coactive_records = 0;
};

/// Called after each recorded iteration with the engine's new state.
using IterationObserver = std::function<void(const Engine&)>;

/// One simulated session against `objective`.
RepetitionTrace run_repetition(const ExperimentConfig& cfg, const ObjectiveTable& objective,
                               std::uint64_t engine_seed, std::uint64_t oracle_seed = 0,
                               const IterationObserver& observer = {});

struct CurveSummary {
    std::vector<double> mean;
    std::vector<double> standard_error;
    /// Set when fewer than two repetitions were given (standard error is 0).
    bool single_repetition = false;
};

/// Per-index mean and standard error (sample std with n - 1, over sqrt(n)).
CurveSummary summarize_curves(const std::vector<std::vector<double>>& curves);

struct LearningCurve {
    std::string config_id;
    std::vector<std::vector<double>> repetitions;
    CurveSummary summary;
    std::vector<RepetitionSeeds> seeds;
};

/// A repetition failed numerically; carries the seeds needed to reproduce it.
class RepetitionError : public NumericalError {
public:
    RepetitionError(const std::string& what, RepetitionSeeds seeds)
        : NumericalError(what), seeds_(seeds) {}

    const RepetitionSeeds& seeds() const noexcept { return seeds_; }

private:
    RepetitionSeeds seeds_;
};

/// Runs every repetition on up to `jobs` threads. gp_prior sources draw a
/// fresh objective per repetition; file sources load once (or use `shared`).
LearningCurve run_experiment(const ExperimentConfig& cfg, std::uint64_t master_seed, std::size_t jobs = 1,
                             const ObjectiveTable* shared = nullptr);

/// `config_id,trial_index,mean,standard_error`, trial_index starting at 1.
void write_results_csv(std::ostream& out, const std::vector<LearningCurve>& curves);

// Synthetic-objective suite: named (n, b, coactive) cells sharing one set of
// repetitions, trial budget and model.
struct SuiteCell {
    std::string id;
    std::size_t n = 1;
    std::size_t b = 0;
    bool coactive = false;
};

struct SyntheticSuite {
    std::size_t trials = 150;
    std::size_t repetitions = 100;
    std::size_t grid_size = 30;
    double beta = 0.5;
    double oracle_noise = 0.0;
    KernelParams model;
    KernelParams generator;
    std::vector<SuiteCell> cells;

    std::vector<ExperimentConfig> experiments() const;
};

/// (2,0), (3,0), (1,1), each with and without coactive feedback.
SyntheticSuite default_synthetic_suite();
/// Fields absent from `j` keep their defaults.
SyntheticSuite parse_synthetic_suite(const Json& j);
Json to_json(const SyntheticSuite& suite);

Json to_json(const ExperimentConfig& cfg);
Json to_json(const RepetitionSeeds& seeds);

}  // namespace cospar
