#include "cospar/presets.hpp"

#include "cospar/errors.hpp"
#include "cospar/serialization.hpp"

#include <fstream>

namespace cospar::presets {
namespace {

Dimension step_length() { return {"step_length", 0.08, 0.18, 15, "m"}; }

KernelParams human_kernel(std::vector<double> lengthscales) {
    return {std::move(lengthscales), 0.005, 1e-7, 0.02};
}

EngineConfig human_config(KernelParams kernel, std::vector<CoactiveStep> steps) {
    return {1, 1, kDefaultBeta, std::move(kernel), std::move(steps)};
}

}  // namespace

KernelParams compass_gait_kernel() { return {{0.025}, 1e-4, 1e-8, 0.01}; }

KernelParams synthetic_2d_kernel() { return {{0.15, 0.15}, 1e-4, 1e-5, 0.01}; }

KernelParams synthetic_2d_generator() { return {{0.15, 0.15}, 1.0, 0.0, 1.0}; }

ActionSpace step_length_grid() { return build_action_grid({step_length()}); }

ActionSpace synthetic_2d_grid(std::size_t per_dimension) {
    return build_action_grid({{"x", 0.0, 1.0, per_dimension, ""}, {"y", 0.0, 1.0, per_dimension, ""}});
}

EngineConfig simulation_engine(std::size_t n, std::size_t b, const KernelParams& kernel,
                               std::size_t dimensionality, double beta) {
    return {n, b, beta, kernel, std::vector<CoactiveStep>(dimensionality, CoactiveStep{0.05, 0.10})};
}

std::map<std::string, SessionPreset> builtin_session_presets() {
    std::map<std::string, SessionPreset> out;
    out["step-length-1d"] = {
        "step-length-1d", "Step length, 15 values on [0.08, 0.18] m; n = 1, b = 1",
        build_action_grid({step_length()}), human_config(human_kernel({0.03}), {{0.10, 0.20}}), true};
    out["step-length-duration-2d"] = {
        "step-length-duration-2d",
        "Step length (15 on [0.08, 0.18] m) x step duration (10 on [0.85, 1.15] s)",
        build_action_grid({step_length(), {"step_duration", 0.85, 1.15, 10, "s"}}),
        human_config(human_kernel({0.03, 0.08}), {{0.10, 0.20}, {0.10, 0.20}}), true};
    out["step-length-width-2d"] = {
        "step-length-width-2d", "Step length (15 on [0.08, 0.18] m) x step width (6 on [0.25, 0.30] m)",
        build_action_grid({step_length(), {"step_width", 0.25, 0.30, 6, "m"}}),
        human_config(human_kernel({0.03, 0.03}), {{0.10, 0.20}, {0.20, 0.40}}), true};
    return out;
}

std::map<std::string, SessionPreset> load_session_presets(const std::filesystem::path& path) {
    auto out = builtin_session_presets();
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open preset file " + path.string());
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("preset file " + path.string() + " is not valid JSON: " + e.what());
    }
    if (!doc.is_object()) throw ConfigError("preset file must hold a JSON object");
    for (const auto& [name, entry] : doc.items()) {
        SessionPreset preset;
        preset.name = name;
        preset.description = entry.value("description", "");
        preset.space = parse_action_space(entry.at("space"));
        preset.config = parse_engine_config(entry.at("config"), preset.space.dimensionality());
        preset.single_dimension_coactive = entry.value("single_dimension_coactive", true);
        preset.config.validate(preset.space);
        out[name] = std::move(preset);
    }
    return out;
}

}  // namespace cospar::presets
