#pragma once

#include "cospar/engine.hpp"
#include "cospar/presets.hpp"
#include "cospar/serialization.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace cospar {

enum class SessionStatus { awaiting_feedback, proposing, closed };

std::string to_string(SessionStatus status);

/// One live elicitation session. `engine` always has proposals pending while
/// the session is awaiting feedback.
struct SessionRecord {
    std::string id;
    std::string created_at;  ///< UTC, ISO 8601
    std::string label;
    std::string preset;  ///< empty for custom configurations
    bool single_dimension_coactive = true;
    SessionStatus status = SessionStatus::awaiting_feedback;
    Engine engine;
    Json history = Json::array();
};

/// Canonical session document, used both for on-disk snapshots and export.
Json session_snapshot(const SessionRecord& record);
/// Throws UnsupportedVersionError or ValidationError.
SessionRecord restore_session(const Json& snapshot);

/// Public read-only view: proposals and buffer in physical units.
Json session_view(const SessionRecord& record);
Json posterior_view(const SessionRecord& record);
/// [{name, description, space, config, single_dimension_coactive}]
Json presets_view(const std::map<std::string, presets::SessionPreset>& presets);

/// Translates a feedback payload into a FeedbackBundle for `engine`'s current
/// proposals. Throws ValidationError naming the offending entries.
FeedbackBundle feedback_from_payload(const Engine& engine, const Json& payload, bool single_dimension_coactive);

/// Session lifecycle over a snapshot directory. Every accepted mutation is
/// written to `<dir>/<id>.json` (atomic replace) before the call returns.
/// Calls for different sessions run concurrently; calls for one session are
/// serialized.
class SessionService {
public:
    SessionService(std::filesystem::path snapshot_dir, std::map<std::string, presets::SessionPreset> presets);

    /// {preset | space + config, label?, seed?, single_dimension_coactive?}
    Json create(const Json& request);
    Json get(const std::string& id) const;
    /// Requires `iteration` to match the session's current iteration.
    Json submit_feedback(const std::string& id, const Json& payload);
    Json posterior(const std::string& id) const;
    Json history(const std::string& id) const;
    Json close(const std::string& id);
    Json export_session(const std::string& id) const;
    Json import_session(const Json& snapshot);

    Json list_presets() const;
    std::vector<std::string> ids() const;
    const std::filesystem::path& snapshot_dir() const noexcept { return dir_; }

private:
    struct Slot {
        explicit Slot(SessionRecord r) : record(std::move(r)) {}
        mutable std::mutex mutex;
        SessionRecord record;
    };

    std::shared_ptr<Slot> find(const std::string& id) const;
    void persist(const SessionRecord& record) const;
    std::string fresh_id() const;

    std::filesystem::path dir_;
    std::map<std::string, presets::SessionPreset> presets_;
    mutable std::shared_mutex index_mutex_;
    std::map<std::string, std::shared_ptr<Slot>> sessions_;
};

}  // namespace cospar
