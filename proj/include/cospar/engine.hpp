#pragma once

#include "cospar/action_space.hpp"
#include "cospar/preference_model.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace cospar {

/// Coactive step sizes for one dimension, as fractions of its range. Level
/// +-1 moves by `small_fraction`, level +-2 by `large_fraction`.
struct CoactiveStep {
    double small_fraction = 0.10;
    double large_fraction = 0.20;

    bool operator==(const CoactiveStep&) const = default;
};

struct EngineConfig {
    std::size_t n = 1;  ///< actions proposed per iteration
    std::size_t b = 0;  ///< buffer of previously executed actions
    double beta = 1.0;  ///< weight of coactive records
    KernelParams kernel;
    std::vector<CoactiveStep> coactive_steps;  ///< one per dimension

    void validate(const ActionSpace& space) const;

    bool operator==(const EngineConfig&) const = default;
};

/// Per-dimension signed level in {-2, -1, 0, +1, +2}; 0 leaves the coordinate.
using CoactiveLevels = std::vector<int>;

/// Feedback for one iteration. `pairwise` is the n x (n + b) matrix R in
/// row-major order: columns [0, n) are the current proposals in order and
/// columns [n, n + b) the buffer, oldest first. true means the row action won.
/// Only the strict upper triangle of the current-vs-current block is read.
struct FeedbackBundle {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::optional<bool>> pairwise;
    std::vector<std::optional<CoactiveLevels>> coactive;

    static FeedbackBundle unset(std::size_t n, std::size_t b);

    std::optional<bool>& at(std::size_t row, std::size_t col) { return pairwise.at(row * cols + col); }
    const std::optional<bool>& at(std::size_t row, std::size_t col) const {
        return pairwise.at(row * cols + col);
    }
};

/// Shifts `action` by the requested levels, clips to the grid bounds, and
/// snaps each coordinate to its nearest grid value. Returns nullopt when the
/// result is the original action.
std::optional<ActionIndex> apply_coactive_suggestion(const ActionSpace& space, ActionIndex action,
                                                     std::span<const int> levels,
                                                     std::span<const CoactiveStep> steps);

struct PosteriorSummary {
    Vector mean;
    Vector stddev;
};

struct RecordOutcome {
    std::size_t pairwise_records = 0;
    std::size_t coactive_records = 0;
    /// Per proposal: the snapped suggestion, or nullopt when none was given or
    /// it collapsed onto the executed action.
    std::vector<std::optional<ActionIndex>> coactive_suggestions;
};

/// CoSpar loop state. Copying an engine yields an independent engine with the
/// same future trajectory; the underlying model is shared read-only.
class Engine {
public:
    Engine(EngineConfig config, ActionSpace space, std::uint64_t seed);

    /// Samples n utilities from the posterior and proposes the argmax of each.
    const std::vector<ActionIndex>& propose();
    /// Appends the records implied by `feedback`, refits the posterior, moves the
    /// proposals into the buffer, and advances the iteration.
    RecordOutcome record(const FeedbackBundle& feedback);

    PosteriorSummary posterior_summary() const;
    UtilityPosterior posterior() const { return model_->posterior(fit_); }

    const EngineConfig& config() const noexcept { return config_; }
    const ActionSpace& space() const noexcept { return model_->space(); }
    const PreferenceModel& model() const noexcept { return *model_; }
    const LaplaceFit& fit() const noexcept { return fit_; }
    std::size_t iteration() const noexcept { return iteration_; }
    const PreferenceDataset& dataset() const noexcept { return dataset_; }
    const std::vector<ActionIndex>& buffer() const noexcept { return buffer_; }
    const std::vector<ActionIndex>& pending() const noexcept { return pending_; }
    std::uint64_t seed() const noexcept { return seed_; }
    const Rng& rng() const noexcept { return rng_; }

    /// Rebuilds an engine from persisted parts; the posterior is refit from
    /// `dataset`. Throws ConfigError on any inconsistency.
    static Engine restore(EngineConfig config, ActionSpace space, std::uint64_t seed, Rng rng,
                          std::size_t iteration, PreferenceDataset dataset,
                          std::vector<ActionIndex> buffer, std::vector<ActionIndex> pending);

private:
    EngineConfig config_;
    std::shared_ptr<const PreferenceModel> model_;
    std::uint64_t seed_;
    Rng rng_;
    std::size_t iteration_ = 0;
    PreferenceDataset dataset_;
    LaplaceFit fit_;
    std::vector<ActionIndex> buffer_;
    std::vector<ActionIndex> pending_;
};

}  // namespace cospar
