#pragma once

#include <cstdint>
#include <utility>

#include "cfsl/matrix.hpp"

namespace cfsl {

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

struct OptimizerState {
    Matrix first_moment;
    Matrix second_moment;
    std::uint64_t step = 0;
    AdamWConfig config;

    // Zero moments shaped like `param`.
    static OptimizerState for_param(const Matrix& param, AdamWConfig config = {});
};

// One AdamW step (decoupled weight decay, bias-corrected moments). Inputs are
// untouched; the updated parameter and state are returned.
std::pair<Matrix, OptimizerState> adamw_step(const Matrix& param, const Matrix& grad,
                                             const OptimizerState& state);

} // namespace cfsl
