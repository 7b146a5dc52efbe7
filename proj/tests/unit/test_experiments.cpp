#include "cospar/errors.hpp"
#include "cospar/experiments.hpp"
#include "cospar/presets.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <set>
#include <sstream>

using namespace cospar;

namespace {

SyntheticSuite small_suite() {
    auto suite = default_synthetic_suite();
    suite.grid_size = 10;
    suite.trials = 12;
    suite.repetitions = 3;
    return suite;
}

ExperimentConfig cell(const std::string& id) {
    for (const auto& cfg : small_suite().experiments())
        if (cfg.id == id) return cfg;
    throw std::logic_error("no cell " + id);
}

}  // namespace

TEST_CASE("summarize_curves") {
    const auto s = summarize_curves({{1.0, 1.0}, {3.0, 3.0}});
    CHECK(s.mean == std::vector<double>{2.0, 2.0});
    CHECK(s.standard_error[0] == doctest::Approx(1.0));
    CHECK(s.standard_error[1] == doctest::Approx(1.0));
    CHECK(!s.single_repetition);

    const auto one = summarize_curves({{0.2, 0.4}});
    CHECK(one.single_repetition);
    CHECK(one.standard_error == std::vector<double>{0.0, 0.0});

    const auto same = summarize_curves({{0.5, 0.7}, {0.5, 0.7}, {0.5, 0.7}});
    CHECK(same.standard_error == std::vector<double>{0.0, 0.0});
    CHECK_THROWS_AS(summarize_curves({{1.0}, {1.0, 2.0}}), ConfigError);
}

TEST_CASE("trial accounting per cell") {
    const auto grid = presets::synthetic_2d_grid(10);
    Rng rng(2);
    const auto objective = sample_gp_objective(grid, presets::synthetic_2d_generator(), rng);
    auto cfg = cell("n2_b0");
    const auto trace = run_repetition(cfg, objective, 1, 2);
    CHECK(trace.iterations == 6);
    CHECK(trace.executed.size() == 12);
    CHECK(trace.normalized.size() == 12);
    for (const double v : trace.normalized) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    CHECK(trace.pairwise_records <= 6);

    cfg = cell("n1_b1");
    const auto buffered = run_repetition(cfg, objective, 1, 2);
    CHECK(buffered.iterations == 12);
    CHECK(buffered.pairwise_records <= 11);

    cfg = cell("n3_b0");
    cfg.trials_total = 10;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("coactive cells add coactive records") {
    const auto grid = presets::synthetic_2d_grid(10);
    Rng rng(3);
    const auto objective = sample_gp_objective(grid, presets::synthetic_2d_generator(), rng);
    const auto with = run_repetition(cell("n1_b1_coactive"), objective, 4, 5);
    const auto without = run_repetition(cell("n1_b1"), objective, 4, 5);
    CHECK(with.coactive_records > 0);
    CHECK(without.coactive_records == 0);
}

TEST_CASE("increasing affine maps of the objective leave the trace unchanged") {
    const auto grid = presets::synthetic_2d_grid(10);
    Rng rng(6);
    auto objective = sample_gp_objective(grid, presets::synthetic_2d_generator(), rng);
    auto mapped = objective;
    mapped.values = 3.0 * objective.values.array() - 11.0;
    for (const auto& id : {"n2_b0", "n1_b1_coactive", "n3_b0_coactive"}) {
        const auto cfg = cell(id);
        const auto a = run_repetition(cfg, objective, 7, 8);
        const auto b = run_repetition(cfg, mapped, 7, 8);
        CHECK(a.executed == b.executed);
        for (std::size_t i = 0; i < a.normalized.size(); ++i)
            CHECK(a.normalized[i] == doctest::Approx(b.normalized[i]).epsilon(1e-12));
    }
}

TEST_CASE("child seeds are distinct and stable") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t r = 0; r < 50; ++r)
        for (std::uint64_t s = 0; s < 3; ++s) seen.insert(child_seed(42, r, s));
    CHECK(seen.size() == 150);
    CHECK(child_seed(42, 3, 1) == child_seed(42, 3, 1));
    CHECK(child_seed(42, 3, 1) != child_seed(43, 3, 1));
    const auto seeds = repetition_seeds(42, 3);
    CHECK(seeds.engine == child_seed(42, 3, 1));
}

TEST_CASE("experiments are deterministic and independent of worker count") {
    const auto cfg = cell("n2_b0_coactive");
    const auto one = run_experiment(cfg, 99, 1);
    const auto many = run_experiment(cfg, 99, 3);
    CHECK(one.repetitions == many.repetitions);
    CHECK(one.summary.mean == many.summary.mean);
    std::ostringstream a, b;
    write_results_csv(a, {one});
    write_results_csv(b, {many});
    CHECK(a.str() == b.str());
    CHECK(run_experiment(cfg, 100, 1).repetitions != one.repetitions);
}

TEST_CASE("results CSV layout") {
    LearningCurve curve;
    curve.config_id = "demo";
    curve.summary = summarize_curves({{0.25, 0.5}, {0.75, 1.0}});
    std::ostringstream out;
    write_results_csv(out, {curve});
    CHECK(out.str() == "config_id,trial_index,mean,standard_error\ndemo,1,0.5,0.25\ndemo,2,0.75,0.25\n");
}

TEST_CASE("file objectives are shared across repetitions") {
    ExperimentConfig cfg;
    cfg.id = "cot";
    cfg.engine = presets::simulation_engine(2, 0, presets::compass_gait_kernel(), 1);
    cfg.trials_total = 20;
    cfg.repetitions = 2;
    cfg.objective = {ObjectiveSource::Kind::file, {}, {}, COSPAR_DATA_DIR "/cot_step_length.csv"};
    const auto curve = run_experiment(cfg, 1, 1);
    CHECK(curve.repetitions.size() == 2);
    CHECK(curve.summary.mean.size() == 20);
}

TEST_CASE("suite configs") {
    const auto suite = default_synthetic_suite();
    CHECK(suite.cells.size() == 6);
    CHECK(suite.trials == 150);
    CHECK(suite.repetitions == 100);
    CHECK(suite.model == presets::synthetic_2d_kernel());
    const auto round = parse_synthetic_suite(to_json(suite));
    CHECK(to_json(round) == to_json(suite));

    const auto subset = parse_synthetic_suite(
        Json::parse(R"({"repetitions": 5, "cells": [{"id": "a", "n": 2, "b": 0, "coactive": true}]})"));
    CHECK(subset.repetitions == 5);
    REQUIRE(subset.cells.size() == 1);
    CHECK(subset.cells[0].coactive);
    CHECK_THROWS_AS(parse_synthetic_suite(Json::parse(R"({"cells": []})")), ConfigError);
    CHECK_THROWS_AS(parse_synthetic_suite(Json::parse(R"({"cells": [{"id": "a"}]})")), ConfigError);
    CHECK_THROWS_AS(parse_synthetic_suite(Json::parse(R"({"trials": "many"})")), ConfigError);
    CHECK_THROWS_AS(
        parse_synthetic_suite(Json::parse(R"({"cells": [{"id": "a", "n": 1, "b": 0}, {"id": "a", "n": 2, "b": 0}]})")),
        ConfigError);
}
