#include "cospar/session.hpp"

#include "cospar/errors.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <random>
#include <set>

#include <fcntl.h>
#include <unistd.h>

namespace cospar {
namespace {

constexpr const char* kSessionKind = "cospar-session";

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buffer[32];
    std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buffer;
}

SessionStatus parse_status(const std::string& s) {
    if (s == "awaiting_feedback") return SessionStatus::awaiting_feedback;
    if (s == "proposing") return SessionStatus::proposing;
    if (s == "closed") return SessionStatus::closed;
    throw ValidationError("unknown session status '" + s + "'", {"status"});
}

Json action_view(const ActionSpace& space, ActionIndex a) {
    Json coordinates = Json::object();
    const auto x = space.coordinates(a);
    for (std::size_t d = 0; d < x.size(); ++d) coordinates[space.dimension(d).name] = x[d];
    return {{"index", a}, {"coordinates", coordinates}, {"values", x}};
}

std::uint64_t random_seed() {
    std::random_device device;
    return (static_cast<std::uint64_t>(device()) << 32) | device();
}

// Applies `fn` and converts engine-level validation failures to ValidationError.
template <typename Fn>
auto validated(const char* field, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        throw ValidationError(e.what(), {field});
    } catch (const ParseError& e) {
        throw ValidationError(e.what(), {field});
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(e.what(), {field});
    }
}

// Parsed JSON stores non-negative literals as unsigned, literals built in C++
// may arrive signed; accept both.
bool is_non_negative_integer(const Json& j) {
    return j.is_number_unsigned() || (j.is_number_integer() && j.get<long long>() >= 0);
}

long long integer_field(const Json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j.at(key).is_number_integer())
        throw ValidationError(where + "." + key + " must be an integer", {where + "." + key});
    return j.at(key).get<long long>();
}

void write_durably(const std::filesystem::path& path, const std::string& text) {
    const auto tmp = path.string() + ".tmp";
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd < 0) throw std::runtime_error("cannot write snapshot " + tmp);
    std::size_t written = 0;
    while (written < text.size()) {
        const auto n = ::write(fd, text.data() + written, text.size() - written);
        if (n < 0) {
            ::close(fd);
            throw std::runtime_error("cannot write snapshot " + tmp);
        }
        written += static_cast<std::size_t>(n);
    }
    ::fsync(fd);
    ::close(fd);
    std::filesystem::rename(tmp, path);
}

}  // namespace

std::string to_string(SessionStatus status) {
    switch (status) {
        case SessionStatus::awaiting_feedback: return "awaiting_feedback";
        case SessionStatus::proposing: return "proposing";
        case SessionStatus::closed: return "closed";
    }
    return "closed";
}

Json session_snapshot(const SessionRecord& record) {
    return {{"schema_version", kSnapshotSchemaVersion},
            {"kind", kSessionKind},
            {"id", record.id},
            {"created_at", record.created_at},
            {"label", record.label},
            {"preset", record.preset},
            {"single_dimension_coactive", record.single_dimension_coactive},
            {"status", to_string(record.status)},
            {"engine", engine_snapshot(record.engine)},
            {"history", record.history}};
}

SessionRecord restore_session(const Json& snapshot) {
    if (!snapshot.is_object()) throw ValidationError("snapshot must be a JSON object");
    if (!snapshot.contains("schema_version") || !snapshot.at("schema_version").is_number_integer())
        throw ValidationError("snapshot lacks schema_version", {"schema_version"});
    const auto version = snapshot.at("schema_version").get<int>();
    if (version != kSnapshotSchemaVersion)
        throw UnsupportedVersionError("unsupported snapshot schema version " + std::to_string(version));
    if (snapshot.value("kind", "") != kSessionKind) throw ValidationError("not a session snapshot", {"kind"});
    if (!snapshot.contains("engine")) throw ValidationError("snapshot lacks engine", {"engine"});

    auto engine = validated("engine", [&] { return restore_engine(snapshot.at("engine")); });
    SessionRecord record = validated("snapshot", [&] {
        return SessionRecord{snapshot.value("id", ""),
                             snapshot.value("created_at", ""),
                             snapshot.value("label", ""),
                             snapshot.value("preset", ""),
                             snapshot.value("single_dimension_coactive", true),
                             parse_status(snapshot.value("status", "")),
                             std::move(engine),
                             snapshot.value("history", Json::array())};
    });
    // Ids double as file names and URL segments.
    const bool id_ok = record.id.size() <= 64 && std::all_of(record.id.begin(), record.id.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
    });
    if (!id_ok) throw ValidationError("session id may only contain letters, digits, '-' and '_'", {"id"});
    if (record.status == SessionStatus::proposing) record.status = SessionStatus::awaiting_feedback;
    if (record.status == SessionStatus::awaiting_feedback && record.engine.pending().empty())
        throw ValidationError("awaiting session has no pending proposals", {"engine.pending"});
    if (!record.history.is_array()) throw ValidationError("history must be an array", {"history"});
    return record;
}

Json session_view(const SessionRecord& record) {
    const auto& engine = record.engine;
    const auto& space = engine.space();
    Json view = {{"id", record.id},
                 {"label", record.label},
                 {"preset", record.preset},
                 {"created_at", record.created_at},
                 {"status", to_string(record.status)},
                 {"iteration", engine.iteration()},
                 {"n", engine.config().n},
                 {"b", engine.config().b},
                 {"single_dimension_coactive", record.single_dimension_coactive},
                 {"space", to_json(space)}};
    Json steps = Json::array();
    for (const auto& s : engine.config().coactive_steps)
        steps.push_back({{"small", s.small_fraction}, {"large", s.large_fraction}});
    view["coactive_steps"] = steps;

    Json previous = Json::array();
    for (const auto a : engine.buffer()) previous.push_back(action_view(space, a));
    view["previous"] = previous;
    if (record.status != SessionStatus::closed) {
        Json proposals = Json::array();
        for (const auto a : engine.pending()) proposals.push_back(action_view(space, a));
        view["proposals"] = proposals;
    }
    return view;
}

Json posterior_view(const SessionRecord& record) {
    const auto& engine = record.engine;
    const auto& space = engine.space();
    const auto summary = engine.posterior_summary();
    Json points = Json::array();
    for (ActionIndex a = 0; a < space.size(); ++a) {
        const auto i = static_cast<Eigen::Index>(a);
        points.push_back({{"index", a},
                          {"coordinates", space.coordinates(a)},
                          {"mean", summary.mean[i]},
                          {"std", summary.stddev[i]}});
    }
    return {{"id", record.id},
            {"iteration", engine.iteration()},
            {"space", to_json(space)},
            {"argmax", argmax(summary.mean)},
            {"points", points}};
}

FeedbackBundle feedback_from_payload(const Engine& engine, const Json& payload, bool single_dimension_coactive) {
    if (!payload.is_object()) throw ValidationError("feedback payload must be a JSON object");
    const std::size_t n = engine.config().n;
    const std::size_t b = engine.config().b;
    const auto& space = engine.space();
    auto bundle = FeedbackBundle::unset(n, b);

    const Json empty = Json::array();
    const auto& preferences = payload.contains("preferences") ? payload.at("preferences") : empty;
    const auto& coactive = payload.contains("coactive") ? payload.at("coactive") : empty;
    if (!preferences.is_array()) throw ValidationError("preferences must be an array", {"preferences"});
    if (!coactive.is_array()) throw ValidationError("coactive must be an array", {"coactive"});

    std::set<std::pair<std::size_t, std::size_t>> assigned;
    for (std::size_t i = 0; i < preferences.size(); ++i) {
        const auto where = "preferences[" + std::to_string(i) + "]";
        const auto& p = preferences[i];
        if (!p.is_object()) throw ValidationError(where + " must be an object", {where});
        const auto j = integer_field(p, "current_index", where);
        if (j < 0 || static_cast<std::size_t>(j) >= n)
            throw ValidationError(where + ".current_index out of range", {where + ".current_index"});
        if (!p.contains("against") || !p.at("against").is_object() || p.at("against").size() != 1)
            throw ValidationError(where + ".against must be {\"current\": k} or {\"buffer\": k}", {where + ".against"});
        const auto verdict = p.value("verdict", "");
        std::optional<bool> row_wins;
        if (verdict == "prefer_current")
            row_wins = true;
        else if (verdict == "prefer_other" || verdict == "prefer_previous")
            row_wins = false;
        else if (verdict != "no_preference")
            throw ValidationError(where + ".verdict must be prefer_current, prefer_other or no_preference",
                                  {where + ".verdict"});

        const auto& against = p.at("against");
        auto row = static_cast<std::size_t>(j);
        std::size_t col = 0;
        if (against.contains("current")) {
            const auto k = integer_field(against, "current", where + ".against");
            if (k < 0 || static_cast<std::size_t>(k) >= n)
                throw ValidationError(where + ".against.current out of range", {where + ".against"});
            if (k == j) continue;
            col = static_cast<std::size_t>(k);
            if (col < row) {
                std::swap(row, col);
                if (row_wins) row_wins = !*row_wins;
            }
        } else if (against.contains("buffer")) {
            const auto k = integer_field(against, "buffer", where + ".against");
            if (k < 0 || static_cast<std::size_t>(k) >= engine.buffer().size())
                throw ValidationError(where + ".against.buffer out of range", {where + ".against"});
            col = n + static_cast<std::size_t>(k);
        } else {
            throw ValidationError(where + ".against must name current or buffer", {where + ".against"});
        }
        if (!assigned.insert({row, col}).second)
            throw ValidationError(where + " repeats an earlier comparison", {where});
        bundle.at(row, col) = row_wins;
    }

    for (std::size_t i = 0; i < coactive.size(); ++i) {
        const auto where = "coactive[" + std::to_string(i) + "]";
        const auto& c = coactive[i];
        if (!c.is_object()) throw ValidationError(where + " must be an object", {where});
        const auto j = integer_field(c, "current_index", where);
        if (j < 0 || static_cast<std::size_t>(j) >= n)
            throw ValidationError(where + ".current_index out of range", {where + ".current_index"});
        std::optional<std::size_t> dim;
        if (c.contains("dimension") && c.at("dimension").is_string())
            dim = space.find_dimension(c.at("dimension").get<std::string>());
        else if (c.contains("dimension") && c.at("dimension").is_number_integer()) {
            const auto d = c.at("dimension").get<long long>();
            if (d >= 0 && static_cast<std::size_t>(d) < space.dimensionality()) dim = static_cast<std::size_t>(d);
        }
        if (!dim) throw ValidationError(where + ".dimension is not a dimension of this session", {where + ".dimension"});
        const auto level = integer_field(c, "level", where);
        if (level == 0 || level < -2 || level > 2)
            throw ValidationError(where + ".level must be one of -2, -1, 1, 2", {where + ".level"});

        auto& levels = bundle.coactive[static_cast<std::size_t>(j)];
        if (!levels) levels = CoactiveLevels(space.dimensionality(), 0);
        if ((*levels)[*dim] != 0)
            throw ValidationError(where + " repeats a dimension for the same proposal", {where});
        if (single_dimension_coactive && std::count_if(levels->begin(), levels->end(), [](int v) { return v != 0; }) > 0)
            throw ValidationError(where + ": this session accepts one coactive dimension per proposal", {where});
        (*levels)[*dim] = static_cast<int>(level);
    }
    return bundle;
}

SessionService::SessionService(std::filesystem::path snapshot_dir,
                               std::map<std::string, presets::SessionPreset> presets)
    : dir_(std::move(snapshot_dir)), presets_(std::move(presets)) {
    std::filesystem::create_directories(dir_);
    for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
        if (entry.path().extension() != ".json") continue;
        std::ifstream in(entry.path());
        auto record = restore_session(Json::parse(in));
        const auto id = record.id;
        sessions_.emplace(id, std::make_shared<Slot>(std::move(record)));
    }
}

std::shared_ptr<SessionService::Slot> SessionService::find(const std::string& id) const {
    std::shared_lock lock(index_mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFoundError("no session '" + id + "'");
    return it->second;
}

void SessionService::persist(const SessionRecord& record) const {
    write_durably(dir_ / (record.id + ".json"), session_snapshot(record).dump(2) + "\n");
}

std::string SessionService::fresh_id() const {
    std::random_device device;
    static constexpr char kHex[] = "0123456789abcdef";
    for (;;) {
        std::string id;
        for (int i = 0; i < 4; ++i) {
            auto word = device();
            for (int k = 0; k < 4; ++k, word >>= 8) {
                id += kHex[(word >> 4) & 0xF];
                id += kHex[word & 0xF];
            }
        }
        if (!sessions_.contains(id)) return id;
    }
}

Json SessionService::create(const Json& request) {
    if (!request.is_object()) throw ValidationError("request must be a JSON object");
    std::vector<std::string> bad;
    std::optional<presets::SessionPreset> chosen;
    if (request.contains("preset")) {
        const auto name = request.at("preset").is_string() ? request.at("preset").get<std::string>() : "";
        const auto it = presets_.find(name);
        if (it == presets_.end())
            bad.push_back("preset");
        else
            chosen = it->second;
    } else {
        if (!request.contains("space")) bad.push_back("space");
        if (!request.contains("config")) bad.push_back("config");
        if (bad.empty()) {
            presets::SessionPreset custom;
            custom.space = validated("space", [&] { return parse_action_space(request.at("space")); });
            custom.config = validated("config", [&] {
                auto c = parse_engine_config(request.at("config"), custom.space.dimensionality());
                c.validate(custom.space);
                return c;
            });
            custom.single_dimension_coactive = request.value("single_dimension_coactive", false);
            chosen = std::move(custom);
        }
    }
    if (request.contains("seed") && !is_non_negative_integer(request.at("seed"))) bad.push_back("seed");
    if (request.contains("label") && !request.at("label").is_string()) bad.push_back("label");
    if (!bad.empty()) throw ValidationError("invalid session request", bad);

    const auto seed = request.contains("seed") ? request.at("seed").get<std::uint64_t>() : random_seed();
    Engine engine = validated("config", [&] { return Engine(chosen->config, chosen->space, seed); });
    engine.propose();

    std::unique_lock lock(index_mutex_);
    SessionRecord record{fresh_id(),
                         utc_now(),
                         request.value("label", ""),
                         chosen->name,
                         chosen->single_dimension_coactive,
                         SessionStatus::awaiting_feedback,
                         std::move(engine),
                         Json::array()};
    persist(record);
    auto view = session_view(record);
    const auto id = record.id;
    sessions_.emplace(id, std::make_shared<Slot>(std::move(record)));
    return view;
}

Json SessionService::get(const std::string& id) const {
    const auto slot = find(id);
    std::lock_guard lock(slot->mutex);
    return session_view(slot->record);
}

Json SessionService::submit_feedback(const std::string& id, const Json& payload) {
    const auto slot = find(id);
    std::lock_guard lock(slot->mutex);
    const auto& current = slot->record;
    if (current.status != SessionStatus::awaiting_feedback)
        throw ConflictError("session '" + id + "' is " + to_string(current.status));
    if (!payload.is_object() || !payload.contains("iteration") || !is_non_negative_integer(payload.at("iteration")))
        throw ValidationError("payload must carry the iteration token", {"iteration"});
    const auto token = payload.at("iteration").get<std::size_t>();
    if (token != current.engine.iteration())
        throw ConflictError("stale iteration token " + std::to_string(token) + "; session is at iteration " +
                            std::to_string(current.engine.iteration()));
    if (payload.contains("note") && !payload.at("note").is_string())
        throw ValidationError("note must be a string", {"note"});

    const auto bundle = feedback_from_payload(current.engine, payload, current.single_dimension_coactive);
    SessionRecord next = current;
    next.status = SessionStatus::proposing;
    Json proposals = Json::array();
    for (const auto a : next.engine.pending()) proposals.push_back(a);
    const auto outcome = next.engine.record(bundle);
    next.engine.propose();
    next.status = SessionStatus::awaiting_feedback;

    Json effects = Json::array();
    for (std::size_t j = 0; j < outcome.coactive_suggestions.size(); ++j) {
        const bool given = j < bundle.coactive.size() && bundle.coactive[j].has_value();
        if (!given)
            effects.push_back(nullptr);
        else if (outcome.coactive_suggestions[j])
            effects.push_back({{"suggested", *outcome.coactive_suggestions[j]}, {"recorded", true}});
        else
            effects.push_back({{"suggested", nullptr}, {"recorded", false}});
    }
    next.history.push_back({{"iteration", current.engine.iteration()},
                            {"submitted_at", utc_now()},
                            {"proposals", proposals},
                            {"buffer", current.engine.buffer()},
                            {"preferences", payload.value("preferences", Json::array())},
                            {"coactive", payload.value("coactive", Json::array())},
                            {"note", payload.value("note", "")},
                            {"pairwise_records", outcome.pairwise_records},
                            {"coactive_records", outcome.coactive_records}});
    persist(next);
    slot->record = std::move(next);

    auto view = session_view(slot->record);
    view["outcome"] = {{"pairwise_records", outcome.pairwise_records},
                       {"coactive_records", outcome.coactive_records},
                       {"coactive", effects}};
    return view;
}

Json SessionService::posterior(const std::string& id) const {
    const auto slot = find(id);
    std::lock_guard lock(slot->mutex);
    return posterior_view(slot->record);
}

Json SessionService::history(const std::string& id) const {
    const auto slot = find(id);
    std::lock_guard lock(slot->mutex);
    Json dataset = Json::array();
    for (const auto& r : slot->record.engine.dataset()) dataset.push_back(to_json(r));
    return {{"id", id}, {"entries", slot->record.history}, {"dataset", dataset}};
}

Json SessionService::close(const std::string& id) {
    const auto slot = find(id);
    std::lock_guard lock(slot->mutex);
    if (slot->record.status != SessionStatus::closed) {
        SessionRecord next = slot->record;
        next.status = SessionStatus::closed;
        persist(next);
        slot->record = std::move(next);
    }
    return session_view(slot->record);
}

Json SessionService::export_session(const std::string& id) const {
    const auto slot = find(id);
    std::lock_guard lock(slot->mutex);
    return session_snapshot(slot->record);
}

Json SessionService::import_session(const Json& snapshot) {
    auto record = restore_session(snapshot);
    std::unique_lock lock(index_mutex_);
    if (record.id.empty()) record.id = fresh_id();
    if (sessions_.contains(record.id)) throw ConflictError("session '" + record.id + "' already exists");
    if (record.created_at.empty()) record.created_at = utc_now();
    persist(record);
    auto view = session_view(record);
    const auto id = record.id;
    sessions_.emplace(id, std::make_shared<Slot>(std::move(record)));
    return view;
}

Json presets_view(const std::map<std::string, presets::SessionPreset>& presets) {
    Json out = Json::array();
    for (const auto& [name, p] : presets)
        out.push_back({{"name", name},
                       {"description", p.description},
                       {"space", to_json(p.space)},
                       {"config", to_json(p.config)},
                       {"single_dimension_coactive", p.single_dimension_coactive}});
    return out;
}

Json SessionService::list_presets() const { return presets_view(presets_); }

std::vector<std::string> SessionService::ids() const {
    std::shared_lock lock(index_mutex_);
    std::vector<std::string> out;
    for (const auto& [id, slot] : sessions_) out.push_back(id);
    return out;
}

}  // namespace cospar
