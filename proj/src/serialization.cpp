#include "cospar/serialization.hpp"

#include "cospar/errors.hpp"

#include <sstream>

namespace cospar {
namespace {

const Json& field(const Json& j, const char* key) {
    if (!j.is_object()) throw ParseError(std::string("expected an object holding '") + key + "'");
    const auto it = j.find(key);
    if (it == j.end()) throw ParseError(std::string("missing field '") + key + "'");
    return *it;
}

template <typename T>
T get(const Json& j, const char* key) {
    try {
        return field(j, key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ParseError(std::string("field '") + key + "' has the wrong type");
    }
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    return get<T>(j, key);
}

}  // namespace

Json to_json(const ActionSpace& space) {
    Json dims = Json::array();
    for (const auto& d : space.dimensions()) {
        Json dim = {{"name", d.name}, {"min", d.min}, {"max", d.max}, {"count", d.count}};
        if (!d.unit.empty()) dim["unit"] = d.unit;
        dims.push_back(std::move(dim));
    }
    return {{"dims", dims}};
}

Json to_json(const KernelParams& kernel) {
    return {{"lengthscales", kernel.lengthscales},
            {"signal_variance", kernel.signal_variance},
            {"noise_variance", kernel.noise_variance},
            {"preference_noise", kernel.preference_noise}};
}

Json to_json(const EngineConfig& config) {
    Json steps = Json::array();
    for (const auto& s : config.coactive_steps)
        steps.push_back({{"small", s.small_fraction}, {"large", s.large_fraction}});
    return {{"n", config.n},
            {"b", config.b},
            {"beta", config.beta},
            {"kernel", to_json(config.kernel)},
            {"coactive_steps", steps}};
}

Json to_json(const PreferenceRecord& record) {
    return {{"winner", record.winner},
            {"loser", record.loser},
            {"weight", record.weight},
            {"source", to_string(record.source)}};
}

ActionSpace parse_action_space(const Json& j) {
    const auto& dims = field(j, "dims");
    if (!dims.is_array()) throw ParseError("field 'dims' must be an array");
    std::vector<Dimension> out;
    for (const auto& d : dims) {
        const auto count = get<long long>(d, "count");
        if (count < 1) throw ConfigError("dimension count must be at least 1");
        out.push_back({get_or<std::string>(d, "name", ""), get<double>(d, "min"), get<double>(d, "max"),
                       static_cast<std::size_t>(count), get_or<std::string>(d, "unit", "")});
    }
    return build_action_grid(std::move(out));
}

KernelParams parse_kernel(const Json& j) {
    KernelParams k;
    k.lengthscales = get<std::vector<double>>(j, "lengthscales");
    k.signal_variance = get<double>(j, "signal_variance");
    k.noise_variance = get<double>(j, "noise_variance");
    k.preference_noise = get<double>(j, "preference_noise");
    return k;
}

EngineConfig parse_engine_config(const Json& j, std::size_t dimensionality) {
    EngineConfig c;
    const auto n = get<long long>(j, "n");
    const auto b = get<long long>(j, "b");
    if (n < 1) throw ConfigError("n must be at least 1");
    if (b < 0) throw ConfigError("b must be non-negative");
    c.n = static_cast<std::size_t>(n);
    c.b = static_cast<std::size_t>(b);
    c.beta = get<double>(j, "beta");
    c.kernel = parse_kernel(field(j, "kernel"));
    if (j.contains("coactive_steps")) {
        for (const auto& s : field(j, "coactive_steps"))
            c.coactive_steps.push_back({get<double>(s, "small"), get<double>(s, "large")});
    } else {
        c.coactive_steps.assign(dimensionality, CoactiveStep{});
    }
    return c;
}

PreferenceRecord parse_record(const Json& j) {
    const auto winner = get<long long>(j, "winner");
    const auto loser = get<long long>(j, "loser");
    if (winner < 0 || loser < 0) throw ConfigError("record indices must be non-negative");
    return {static_cast<ActionIndex>(winner), static_cast<ActionIndex>(loser), get<double>(j, "weight"),
            parse_source(get<std::string>(j, "source"))};
}

std::string to_string(FeedbackSource source) {
    return source == FeedbackSource::pairwise ? "pairwise" : "coactive";
}

FeedbackSource parse_source(const std::string& s) {
    if (s == "pairwise") return FeedbackSource::pairwise;
    if (s == "coactive") return FeedbackSource::coactive;
    throw ParseError("unknown record source '" + s + "'");
}

std::string encode_rng(const Rng& rng) {
    std::ostringstream out;
    out << rng;
    return out.str();
}

Rng decode_rng(const std::string& text) {
    std::istringstream in(text);
    Rng rng;
    in >> rng;
    if (in.fail()) throw ParseError("malformed random generator state");
    return rng;
}

Json engine_snapshot(const Engine& engine) {
    Json dataset = Json::array();
    for (const auto& r : engine.dataset()) dataset.push_back(to_json(r));
    return {{"schema_version", kSnapshotSchemaVersion},
            {"space", to_json(engine.space())},
            {"config", to_json(engine.config())},
            {"iteration", engine.iteration()},
            {"dataset", dataset},
            {"buffer", engine.buffer()},
            {"pending", engine.pending()},
            {"rng", {{"seed", engine.seed()}, {"state", encode_rng(engine.rng())}}}};
}

Engine restore_engine(const Json& snapshot) {
    const auto version = get<int>(snapshot, "schema_version");
    if (version != kSnapshotSchemaVersion)
        throw UnsupportedVersionError("unsupported snapshot schema version " + std::to_string(version));
    auto space = parse_action_space(field(snapshot, "space"));
    auto config = parse_engine_config(field(snapshot, "config"), space.dimensionality());
    const auto iteration = get<long long>(snapshot, "iteration");
    if (iteration < 0) throw ConfigError("iteration must be non-negative");
    PreferenceDataset dataset;
    for (const auto& r : field(snapshot, "dataset")) dataset.push_back(parse_record(r));
    auto to_indices = [](const std::vector<long long>& v) {
        std::vector<ActionIndex> out;
        for (const auto x : v) {
            if (x < 0) throw ConfigError("action indices must be non-negative");
            out.push_back(static_cast<ActionIndex>(x));
        }
        return out;
    };
    const auto& rng = field(snapshot, "rng");
    return Engine::restore(std::move(config), std::move(space), get<std::uint64_t>(rng, "seed"),
                           decode_rng(get<std::string>(rng, "state")), static_cast<std::size_t>(iteration),
                           std::move(dataset), to_indices(get<std::vector<long long>>(snapshot, "buffer")),
                           to_indices(get<std::vector<long long>>(snapshot, "pending")));
}

}  // namespace cospar
