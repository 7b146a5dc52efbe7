#pragma once

#include "cospar/action_space.hpp"
#include "cospar/engine.hpp"
#include "cospar/preference_model.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

namespace cospar {

/// Ground-truth utilities over a grid (larger is better).
struct ObjectiveTable {
    ActionSpace space;
    Vector values;
};

enum class Orientation { cost, utility };

/// One zero-mean draw from the GP prior over `space`.
ObjectiveTable sample_gp_objective(const ActionSpace& space, const KernelParams& kernel, Rng& rng);

/// CSV layout: `# orientation: cost|utility`, then a header
/// `<dim names...>,value`, then one row per grid point in any order. Cost
/// files are negated on load.
ObjectiveTable load_objective_csv(const std::filesystem::path& path);
ObjectiveTable parse_objective_csv(std::istream& in);
/// Rows are written in action-index order with round-trip precision. Cost
/// orientation writes the negated utilities.
void write_objective_csv(const ObjectiveTable& table, const std::filesystem::path& path,
                         Orientation orientation = Orientation::utility);
void write_objective_csv(const ObjectiveTable& table, std::ostream& out,
                         Orientation orientation = Orientation::utility);

/// Affine map with min -> 0 and max -> 1. Throws ConfigError on a constant table.
ObjectiveTable normalize_objective(const ObjectiveTable& table);

enum class Preference { first, second, none };

/// Noise-free comparison: strictly higher utility wins, exact ties give none.
Preference preference_oracle(const ObjectiveTable& table, ActionIndex a, ActionIndex b);

/// Second-order finite differences along each grid axis. Dimensions with
/// fewer than three points get zero gradients and are flagged.
struct GradientTable {
    Matrix values;  ///< A x d
    std::vector<bool> flat_dimensions;
};

GradientTable gradient_table(const ObjectiveTable& table);

/// Linear-interpolation percentile (p in [0, 100]) of `values`.
double percentile(std::vector<double> values, double p);

struct CoactiveOracleConfig {
    std::vector<double> p50;
    std::vector<double> p75;
    double small_step = 0.05;
    double large_step = 0.10;
};

/// Per-dimension 50th/75th percentiles of gradient magnitudes over the grid.
CoactiveOracleConfig coactive_oracle_config(const GradientTable& gradients);

/// Simulated improvement suggestion at `action`: none when every component
/// magnitude is at or below its p50, otherwise the steepest dimension moved
/// uphill by level 2 (magnitude above p75) or level 1.
std::optional<CoactiveLevels> coactive_oracle(const GradientTable& gradients, ActionIndex action,
                                              const CoactiveOracleConfig& cfg);
std::optional<CoactiveLevels> coactive_oracle(const ObjectiveTable& table, ActionIndex action,
                                              const CoactiveOracleConfig& cfg);

}  // namespace cospar
