#pragma once

#include "cospar/action_space.hpp"
#include "cospar/engine.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace cospar::presets {

/// Coactive weight used by the bundled presets.
inline constexpr double kDefaultBeta = 0.5;

/// Compass-gait step-length simulation: SE lengthscale 0.025, signal
/// variance 1e-4, noise variance 1e-8, preference noise 0.01.
KernelParams compass_gait_kernel();
/// Synthetic 2D model: lengthscales [0.15, 0.15], signal variance 1e-4,
/// noise variance 1e-5, preference noise 0.01.
KernelParams synthetic_2d_kernel();
/// Kernel that generates synthetic 2D objectives (unit signal variance).
KernelParams synthetic_2d_generator();

/// 15 step lengths on [0.08, 0.18] m.
ActionSpace step_length_grid();
/// 30 x 30 grid on the unit square.
ActionSpace synthetic_2d_grid(std::size_t per_dimension = 30);

/// Engine for simulated runs: coactive steps of 5% / 10% of each range.
EngineConfig simulation_engine(std::size_t n, std::size_t b, const KernelParams& kernel,
                               std::size_t dimensionality, double beta = kDefaultBeta);

struct SessionPreset {
    std::string name;
    std::string description;
    ActionSpace space;
    EngineConfig config;
    /// Restrict each coactive suggestion to a single dimension.
    bool single_dimension_coactive = true;
};

/// step-length-1d, step-length-duration-2d, step-length-width-2d.
std::map<std::string, SessionPreset> builtin_session_presets();

/// Reads a JSON object {name: {description?, space, config}} and merges it over
/// the built-ins (file entries win).
std::map<std::string, SessionPreset> load_session_presets(const std::filesystem::path& path);

}  // namespace cospar::presets
