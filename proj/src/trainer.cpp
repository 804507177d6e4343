#include "cfsl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cfsl/numerics.hpp"
#include "cfsl/rng.hpp"

namespace cfsl {

HeadWeights HeadWeights::from_hyper(const HyperParams& hp, const HeadMask& mask) {
    const int heads = int{mask.p1} + int{mask.p2} + int{mask.p3};
    if (heads == 1) {
        return {mask.p1 ? 1.0 : 0.0, mask.p2 ? 1.0 : 0.0, mask.p3 ? 1.0 : 0.0};
    }
    return {mask.p1 ? 1.0 : 0.0, mask.p2 ? hp.alpha * hp.beta : 0.0,
            mask.p3 ? hp.alpha * (1.0 - hp.beta) : 0.0};
}

HeadWeights HeadWeights::tip_adapter(const HyperParams& hp) { return {hp.tip_alpha, 1.0, 0.0}; }

namespace {

void check_shapes(const Matrix& cache, const TrainBatch& batch, const FrozenInputs& frozen) {
    const std::size_t n = frozen.support_labels.cols();
    if (cache.rows() != frozen.support_labels.rows()) {
        throw Error(ErrorCode::ShapeMismatch, "cache rows differ from support label rows");
    }
    if (batch.clip_queries.rows() != batch.labels.size()) {
        throw Error(ErrorCode::ShapeMismatch, "batch queries and labels differ in length");
    }
    if (batch.clip_queries.rows() != 0 && batch.clip_queries.cols() != cache.cols()) {
        throw Error(ErrorCode::ShapeMismatch, "batch query dims differ from cache dims");
    }
    for (std::size_t y : batch.labels) {
        if (y >= n) {
            throw Error(ErrorCode::IndexOutOfRange, "batch label " + std::to_string(y));
        }
    }
    if (frozen.weights.clip != 0.0 &&
        (frozen.text_clip.rows() != n || frozen.text_clip.cols() != batch.clip_queries.cols())) {
        throw Error(ErrorCode::ShapeMismatch, "clip text heads do not match the batch");
    }
    if (frozen.weights.blip != 0.0 &&
        (frozen.text_blip.rows() != n || batch.blip_queries.rows() != batch.labels.size() ||
         frozen.text_blip.cols() != batch.blip_queries.cols())) {
        throw Error(ErrorCode::ShapeMismatch, "blip text heads do not match the batch");
    }
}

// Logits of one batch row plus the per-support kernel values exp(z.F_j - 1).
struct ForwardRow {
    std::vector<double> logits;
    std::vector<double> kernel;
};

ForwardRow forward_row(const Matrix& cache, const TrainBatch& batch, const FrozenInputs& frozen,
                       std::size_t b) {
    const auto z = batch.clip_queries.row(b);
    const std::size_t n = frozen.support_labels.cols();
    ForwardRow f;
    f.kernel.resize(cache.rows());
    f.logits.assign(n, 0.0);
    for (std::size_t j = 0; j < cache.rows(); ++j) {
        f.kernel[j] = std::exp(dot(z, cache.row(j)) - 1.0);
        const auto label = frozen.support_labels.row(j);
        for (std::size_t c = 0; c < n; ++c) {
            f.logits[c] += frozen.weights.cache * label[c] * f.kernel[j];
        }
    }
    if (frozen.weights.clip != 0.0) {
        const auto p2 = times_transpose(z, frozen.text_clip);
        for (std::size_t c = 0; c < n; ++c) {
            f.logits[c] += frozen.weights.clip * p2[c];
        }
    }
    if (frozen.weights.blip != 0.0) {
        const auto p3 = times_transpose(batch.blip_queries.row(b), frozen.text_blip);
        for (std::size_t c = 0; c < n; ++c) {
            f.logits[c] += frozen.weights.blip * p3[c];
        }
    }
    return f;
}

} // namespace

LossAndGrad loss_and_grad(const Matrix& cache, const TrainBatch& batch, const FrozenInputs& frozen) {
    check_shapes(cache, batch, frozen);
    LossAndGrad out;
    out.grad = Matrix(cache.rows(), cache.cols());
    const std::size_t batch_size = batch.labels.size();
    if (batch_size == 0) {
        return out;
    }
    const double inv_b = 1.0 / static_cast<double>(batch_size);
    const std::size_t n = frozen.support_labels.cols();
    std::vector<double> losses(batch_size);
    for (std::size_t b = 0; b < batch_size; ++b) {
        const ForwardRow f = forward_row(cache, batch, frozen, b);
        losses[b] = cross_entropy(f.logits, batch.labels[b]);
        // dL/dlogit = softmax - onehot; p1_c depends on F_j only through class(j).
        std::vector<double> dlogit = softmax(f.logits);
        dlogit[batch.labels[b]] -= 1.0;
        const auto z = batch.clip_queries.row(b);
        for (std::size_t j = 0; j < cache.rows(); ++j) {
            const auto label = frozen.support_labels.row(j);
            double dp1 = 0.0;
            for (std::size_t c = 0; c < n; ++c) {
                dp1 += dlogit[c] * label[c];
            }
            const double scale = inv_b * frozen.weights.cache * dp1 * f.kernel[j];
            if (scale == 0.0) {
                continue;
            }
            auto g = out.grad.row(j);
            for (std::size_t d = 0; d < g.size(); ++d) {
                g[d] += scale * z[d];
            }
        }
    }
    out.loss = compensated_sum(losses) * inv_b;
    return out;
}

double loss_only(const Matrix& cache, const TrainBatch& batch, const FrozenInputs& frozen) {
    check_shapes(cache, batch, frozen);
    const std::size_t batch_size = batch.labels.size();
    if (batch_size == 0) {
        return 0.0;
    }
    std::vector<double> losses(batch_size);
    for (std::size_t b = 0; b < batch_size; ++b) {
        losses[b] = cross_entropy(forward_row(cache, batch, frozen, b).logits, batch.labels[b]);
    }
    return compensated_sum(losses) / static_cast<double>(batch_size);
}

GradCheckResult grad_check(const Matrix& cache, const TrainBatch& batch, const FrozenInputs& frozen,
                           double step, const std::optional<Matrix>& analytic_override) {
    const Matrix analytic = analytic_override ? *analytic_override : loss_and_grad(cache, batch, frozen).grad;
    if (analytic.rows() != cache.rows() || analytic.cols() != cache.cols()) {
        throw Error(ErrorCode::ShapeMismatch, "analytic gradient shape differs from the cache");
    }
    GradCheckResult result;
    Matrix probe = cache;
    for (std::size_t r = 0; r < cache.rows(); ++r) {
        for (std::size_t c = 0; c < cache.cols(); ++c) {
            const double original = probe(r, c);
            probe(r, c) = original + step;
            const double up = loss_only(probe, batch, frozen);
            probe(r, c) = original - step;
            const double down = loss_only(probe, batch, frozen);
            probe(r, c) = original;
            const double numeric = (up - down) / (2.0 * step);
            const double err = std::abs(analytic(r, c) - numeric) / std::max(1.0, std::abs(numeric));
            if (err > result.max_relative_error) {
                result = {err, r, c};
            }
        }
    }
    return result;
}

void TrainConfig::validate() const {
    if (!(lr > 0.0) || !std::isfinite(lr)) {
        throw Error(ErrorCode::InvalidArgument, "learning rate must be positive");
    }
    if (batch_size == 0) {
        throw Error(ErrorCode::InvalidArgument, "batch size must be positive");
    }
    if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "adamw betas must lie in (0, 1)");
    }
    if (!(eps > 0.0) || !(weight_decay >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "eps must be positive, weight decay nonnegative");
    }
}

TrainBatch support_batch(const Episode& episode) {
    return {episode.support_features, episode.support_aux_features, episode.support_classes()};
}

FrozenInputs frozen_inputs(const Episode& episode, const HeadWeights& weights) {
    return {episode.support_labels, episode.text_clip, episode.text_blip, weights};
}

namespace {

TrainBatch slice(const TrainBatch& full, std::span<const std::size_t> rows) {
    TrainBatch b;
    b.clip_queries = select_rows(full.clip_queries, rows);
    b.blip_queries = full.blip_queries.cols() == 0 ? Matrix(rows.size(), 0)
                                                   : select_rows(full.blip_queries, rows);
    b.labels.reserve(rows.size());
    for (std::size_t r : rows) {
        b.labels.push_back(full.labels[r]);
    }
    return b;
}

} // namespace

TrainResult train_cache(const Episode& episode, const HeadWeights& weights, const TrainConfig& cfg) {
    cfg.validate();
    if (episode.num_support() == 0) {
        throw Error(ErrorCode::EmptySupport, "cannot fine-tune an empty cache");
    }
    const TrainBatch full = support_batch(episode);
    const FrozenInputs frozen = frozen_inputs(episode, weights);

    TrainResult result;
    result.cache = episode.support_features;
    result.loss_trace.push_back(loss_only(result.cache, full, frozen));

    OptimizerState state = OptimizerState::for_param(
        result.cache, AdamWConfig{cfg.lr, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay});
    const std::size_t total = full.labels.size();
    const std::size_t batch = std::min(cfg.batch_size, total);
    std::vector<std::size_t> order(total);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        CounterRng rng(cfg.seed, epoch);
        shuffle(order, rng);
        for (std::size_t start = 0; start < total; start += batch) {
            const std::size_t len = std::min(batch, total - start);
            const TrainBatch mb = slice(full, std::span(order).subspan(start, len));
            const LossAndGrad lg = loss_and_grad(result.cache, mb, frozen);
            auto [next, next_state] = adamw_step(result.cache, lg.grad, state);
            result.cache = std::move(next);
            state = std::move(next_state);
            ++result.steps;
        }
        result.loss_trace.push_back(loss_only(result.cache, full, frozen));
    }
    return result;
}

Episode with_cache(const Episode& episode, Matrix cache) {
    if (cache.rows() != episode.support_features.rows() ||
        cache.cols() != episode.support_features.cols()) {
        throw Error(ErrorCode::ShapeMismatch, "replacement cache has the wrong shape");
    }
    Episode out = episode;
    out.support_features = std::move(cache);
    return out;
}

} // namespace cfsl
