#include "cospar/errors.hpp"
#include "cospar/presets.hpp"
#include "cospar/serialization.hpp"

#include <doctest.h>

using namespace cospar;

namespace {

Engine played_engine() {
    const auto preset = presets::builtin_session_presets().at("step-length-duration-2d");
    Engine engine(preset.config, preset.space, 77);
    for (int t = 0; t < 4; ++t) {
        engine.propose();
        auto fb = FeedbackBundle::unset(1, 1);
        if (!engine.buffer().empty()) fb.at(0, 1) = t % 2 == 0;
        fb.coactive[0] = CoactiveLevels{t % 2 ? 1 : 0, t % 2 ? 0 : -1};
        engine.record(fb);
    }
    engine.propose();
    return engine;
}

}  // namespace

TEST_CASE("rng state round-trips") {
    Rng rng(5);
    rng.discard(1000);
    auto copy = decode_rng(encode_rng(rng));
    CHECK(copy() == rng());
    CHECK_THROWS_AS(decode_rng("not a state"), ParseError);
}

TEST_CASE("engine snapshot round-trips and continues identically") {
    auto engine = played_engine();
    const auto snapshot = engine_snapshot(engine);
    auto restored = restore_engine(Json::parse(snapshot.dump()));
    CHECK(engine_snapshot(restored) == snapshot);
    CHECK(restored.posterior_summary().mean == engine.posterior_summary().mean);
    for (int t = 0; t < 3; ++t) {
        auto fb = FeedbackBundle::unset(1, 1);
        fb.at(0, 1) = true;
        engine.record(fb);
        restored.record(fb);
        CHECK(engine.propose() == restored.propose());
    }
}

TEST_CASE("snapshot validation") {
    const auto snapshot = engine_snapshot(played_engine());
    auto bad = snapshot;
    bad["schema_version"] = 99;
    CHECK_THROWS_AS(restore_engine(bad), UnsupportedVersionError);
    bad = snapshot;
    bad["dataset"][0]["winner"] = 10'000;
    CHECK_THROWS_AS(restore_engine(bad), ConfigError);
    bad = snapshot;
    bad["buffer"] = Json::array({1, 2, 3});
    CHECK_THROWS_AS(restore_engine(bad), ConfigError);
    bad = snapshot;
    bad.erase("rng");
    CHECK_THROWS(restore_engine(bad));
}

TEST_CASE("config documents round-trip") {
    const auto preset = presets::builtin_session_presets().at("step-length-width-2d");
    CHECK(parse_action_space(to_json(preset.space)) == preset.space);
    CHECK(parse_engine_config(to_json(preset.config), 2) == preset.config);
    CHECK(parse_kernel(to_json(preset.config.kernel)) == preset.config.kernel);
    const PreferenceRecord r{3, 4, 0.5, FeedbackSource::coactive};
    CHECK(parse_record(to_json(r)) == r);
    CHECK_THROWS_AS(parse_source("telepathy"), ParseError);
}
