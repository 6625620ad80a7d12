#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "morphon/rng.hpp"

namespace morphon {

// One trainable parameter grid. Values and Adam moments are kept in 32-bit
// floats (the checkpoint wire format); gradients accumulate in double.
// Arithmetic on the grid promotes to double and rounds back on store, so a
// trajectory resumed from a checkpoint is bit-identical to an uninterrupted one.
struct ParamGrid {
    std::vector<float> values;
    std::vector<double> grad;
    std::vector<float> adam_m;
    std::vector<float> adam_v;

    ParamGrid() = default;
    explicit ParamGrid(std::size_t n)
        : values(n, 0.0f), grad(n, 0.0), adam_m(n, 0.0f), adam_v(n, 0.0f) {}

    std::size_t size() const { return values.size(); }

    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

    bool all_finite() const {
        for (float v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

// Adam hyperparameters and the shared step counter. One state drives every
// grid of a network; step_count advances once per optimization step.
struct AdamState {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t step_count = 0;

    void advance() { ++step_count; }
};

// Uniform samples in [-l, l], l = sqrt(6 / (fan_in + fan_out)).
inline double glorot_limit(int fan_in, int fan_out) {
    if (fan_in < 1 || fan_out < 1)
        throw std::invalid_argument("glorot_init: fan_in and fan_out must be >= 1");
    return std::sqrt(6.0 / (static_cast<double>(fan_in) + static_cast<double>(fan_out)));
}

inline std::vector<float> glorot_init(int fan_in, int fan_out, std::size_t n, Rng& rng) {
    const double l = glorot_limit(fan_in, fan_out);
    std::vector<float> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = static_cast<float>(rng.uniform(-l, l));
    return out;
}

inline void glorot_fill(ParamGrid& grid, int fan_in, int fan_out, Rng& rng) {
    grid.values = glorot_init(fan_in, fan_out, grid.size(), rng);
}

// Bias-corrected Adam update of one grid using the state's current step count
// as t. Callers advance the state once per step before updating the grids.
inline void adam_update(ParamGrid& grid, const AdamState& state) {
    if (grid.grad.size() != grid.values.size() ||
        grid.adam_m.size() != grid.values.size() ||
        grid.adam_v.size() != grid.values.size())
        throw std::invalid_argument("adam_update: buffer size mismatch");
    if (state.step_count == 0)
        throw std::invalid_argument("adam_update: step count not advanced");
    if (state.lr <= 0.0 || state.epsilon <= 0.0 || state.beta1 < 0.0 || state.beta1 >= 1.0 ||
        state.beta2 < 0.0 || state.beta2 >= 1.0)
        throw std::invalid_argument("adam_update: invalid hyperparameters");

    const double t = static_cast<double>(state.step_count);
    const double m_corr = 1.0 - std::pow(state.beta1, t);
    const double v_corr = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < grid.values.size(); ++i) {
        const double g = grid.grad[i];
        grid.adam_m[i] = static_cast<float>(state.beta1 * grid.adam_m[i] + (1.0 - state.beta1) * g);
        grid.adam_v[i] = static_cast<float>(state.beta2 * grid.adam_v[i] + (1.0 - state.beta2) * g * g);
        const double m_hat = grid.adam_m[i] / m_corr;
        const double v_hat = grid.adam_v[i] / v_corr;
        grid.values[i] =
            static_cast<float>(grid.values[i] - state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon));
    }
}

// Single-grid convenience: advance and update in one call.
inline void adam_step(ParamGrid& grid, AdamState& state) {
    state.advance();
    adam_update(grid, state);
}

}  // namespace morphon
