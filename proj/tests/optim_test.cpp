#include <doctest.h>

#include <cmath>

#include "morphon/optim.hpp"
#include "oracles.hpp"

using morphon::AdamState;
using morphon::ParamGrid;
using morphon::Rng;

TEST_CASE("glorot bounds") {
    Rng rng(61);
    SUBCASE("fan 64/4") {
        const double l = morphon::glorot_limit(64, 4);
        CHECK(l == doctest::Approx(std::sqrt(6.0 / 68.0)).epsilon(1e-12));
        CHECK(l == doctest::Approx(0.2970).epsilon(1e-3));
        const auto samples = morphon::glorot_init(64, 4, 10000, rng);
        for (float v : samples) {
            CHECK(v >= -0.2971);
            CHECK(v <= 0.2971);
        }
    }
    SUBCASE("fan 1/1") {
        CHECK(morphon::glorot_limit(1, 1) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
    }
    SUBCASE("invalid fans") {
        CHECK_THROWS_AS(morphon::glorot_limit(0, 1), std::invalid_argument);
    }
}

TEST_CASE("glorot samples are centered") {
    Rng rng(62);
    const auto samples = morphon::glorot_init(8, 8, 1000000, rng);
    double sum = 0.0;
    for (float v : samples) sum += v;
    CHECK(std::abs(sum / 1e6) < 0.005);
}

TEST_CASE("glorot is deterministic per seed") {
    Rng a(63), b(63);
    const auto s1 = morphon::glorot_init(16, 4, 100, a);
    const auto s2 = morphon::glorot_init(16, 4, 100, b);
    CHECK(s1 == s2);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    ParamGrid grid(4);
    grid.values = {0.5f, -0.25f, 1.0f, 0.0f};
    const auto before = grid.values;
    AdamState state;
    morphon::adam_step(grid, state);
    CHECK(grid.values == before);
    CHECK(state.step_count == 1);
}

TEST_CASE("adam: first step with unit gradient moves by about -lr") {
    ParamGrid grid(1);
    grid.grad[0] = 1.0;
    AdamState state;
    morphon::adam_step(grid, state);
    // m_hat = 1, v_hat = 1 -> update = -0.001 / (1 + 1e-8)
    CHECK(grid.values[0] == doctest::Approx(-0.001).epsilon(1e-6));
}

TEST_CASE("adam: constant gradient descends monotonically") {
    ParamGrid grid(1);
    AdamState state;
    double prev = 0.0;
    for (int step = 0; step < 100; ++step) {
        grid.grad[0] = 2.5;
        morphon::adam_step(grid, state);
        CHECK(grid.values[0] < prev);
        prev = grid.values[0];
    }
    CHECK(state.step_count == 100);
}

TEST_CASE("adam: per-step update magnitude stays under lr/(1-beta1)") {
    Rng rng(64);
    ParamGrid grid(8);
    AdamState state;
    for (int step = 0; step < 200; ++step) {
        const auto before = grid.values;
        for (double& g : grid.grad) g = rng.uniform(-5.0, 5.0);
        morphon::adam_step(grid, state);
        for (std::size_t i = 0; i < grid.size(); ++i)
            CHECK(std::abs(static_cast<double>(grid.values[i]) - before[i]) <= 0.01);
    }
}

TEST_CASE("adam trajectories are bitwise deterministic") {
    auto run = [](std::uint64_t seed) {
        Rng rng(seed);
        ParamGrid grid(6);
        morphon::glorot_fill(grid, 6, 1, rng);
        AdamState state;
        for (int step = 0; step < 50; ++step) {
            for (double& g : grid.grad) g = rng.uniform(-1.0, 1.0);
            morphon::adam_step(grid, state);
        }
        return grid.values;
    };
    CHECK(run(99) == run(99));
}

TEST_CASE("adam rejects misuse") {
    ParamGrid grid(2);
    AdamState state;
    CHECK_THROWS_AS(morphon::adam_update(grid, state), std::invalid_argument);  // no advance
    state.advance();
    grid.grad.resize(1);
    CHECK_THROWS_AS(morphon::adam_update(grid, state), std::invalid_argument);
}
