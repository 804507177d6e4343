#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "cfsl/episodes.hpp"
#include "cfsl/matrix.hpp"
#include "cfsl/optimizer.hpp"
#include "cfsl/predictors.hpp"

namespace cfsl {

// Training logits are w_cache * p1 + w_clip * p2 + w_blip * p3.
struct HeadWeights {
    double cache = 1.0;
    double clip = 0.0;
    double blip = 0.0;

    // p1 + alpha * (beta * p2 + (1 - beta) * p3) restricted to `mask`.
    static HeadWeights from_hyper(const HyperParams& hp, const HeadMask& mask = {});
    // tip_alpha * p1 + p2.
    static HeadWeights tip_adapter(const HyperParams& hp);
};

struct TrainBatch {
    Matrix clip_queries;
    Matrix blip_queries;  // may have 0 columns when weights.blip == 0
    std::vector<std::size_t> labels;
};

// Everything the loss reads but never updates.
struct FrozenInputs {
    Matrix support_labels;
    Matrix text_clip;
    Matrix text_blip;
    HeadWeights weights;
};

struct LossAndGrad {
    double loss = 0.0;
    Matrix grad;  // same shape as the cache
};

// Mean cross-entropy over the batch and its gradient with respect to the
// cache only.
LossAndGrad loss_and_grad(const Matrix& cache, const TrainBatch& batch, const FrozenInputs& frozen);
double loss_only(const Matrix& cache, const TrainBatch& batch, const FrozenInputs& frozen);

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t worst_row = 0;
    std::size_t worst_col = 0;
};

// Central differences per coordinate against the analytic gradient;
// error = |analytic - numeric| / max(1, |numeric|). `analytic_override`, when
// given, replaces the analytic gradient (fault-injection self-test).
GradCheckResult grad_check(const Matrix& cache, const TrainBatch& batch, const FrozenInputs& frozen,
                           double step, const std::optional<Matrix>& analytic_override = std::nullopt);

struct TrainConfig {
    std::size_t epochs = 20;
    double lr = 1e-3;
    std::size_t batch_size = 256;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrainResult {
    Matrix cache;
    // Full-support loss before training, then after every epoch.
    std::vector<double> loss_trace;
    std::size_t steps = 0;
};

// Support rows of the episode as the training batch, with their own labels.
TrainBatch support_batch(const Episode& episode);
FrozenInputs frozen_inputs(const Episode& episode, const HeadWeights& weights);

// AdamW on the support cache only. Rows are not re-normalized. Mini-batches
// are a seeded shuffle of the support rows per epoch.
TrainResult train_cache(const Episode& episode, const HeadWeights& weights, const TrainConfig& cfg);

// Copy of the episode with its support cache replaced.
Episode with_cache(const Episode& episode, Matrix cache);

} // namespace cfsl
