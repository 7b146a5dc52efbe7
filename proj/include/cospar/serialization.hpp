#pragma once

#include "cospar/engine.hpp"

#include <json.hpp>

namespace cospar {

using Json = nlohmann::json;

inline constexpr int kSnapshotSchemaVersion = 1;

Json to_json(const ActionSpace& space);
Json to_json(const KernelParams& kernel);
Json to_json(const EngineConfig& config);
Json to_json(const PreferenceRecord& record);

// The parse_* functions throw ParseError for missing or mistyped fields and
// ConfigError for values that violate a type's invariants.
ActionSpace parse_action_space(const Json& j);
KernelParams parse_kernel(const Json& j);
/// `coactive_steps` may be omitted; it then defaults to (0.10, 0.20) per dimension.
EngineConfig parse_engine_config(const Json& j, std::size_t dimensionality);
PreferenceRecord parse_record(const Json& j);

std::string to_string(FeedbackSource source);
FeedbackSource parse_source(const std::string& s);

/// Canonical engine document: config, space, dataset, buffer, pending,
/// iteration, and the random stream (seed plus exact generator state).
Json engine_snapshot(const Engine& engine);
/// Throws UnsupportedVersionError for other schema versions.
Engine restore_engine(const Json& snapshot);

std::string encode_rng(const Rng& rng);
Rng decode_rng(const std::string& text);

}  // namespace cospar
