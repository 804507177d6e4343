#include "cfsl/predictors.hpp"

#include <cmath>

#include "cfsl/numerics.hpp"

namespace cfsl {

namespace {

void check_support(std::span<const double> query, const Matrix& features, const Matrix& labels) {
    if (features.rows() != labels.rows()) {
        throw Error(ErrorCode::ShapeMismatch, std::to_string(features.rows()) +
                                                  " support rows vs " +
                                                  std::to_string(labels.rows()) + " label rows");
    }
    if (features.rows() != 0 && features.cols() != query.size()) {
        throw Error(ErrorCode::ShapeMismatch, "query has " + std::to_string(query.size()) +
                                                  " dims, supports have " +
                                                  std::to_string(features.cols()));
    }
}

// sum_j weight[j] * labels.row(j)
std::vector<double> weighted_label_sum(std::span<const double> weights, const Matrix& labels) {
    std::vector<double> out(labels.cols(), 0.0);
    for (std::size_t j = 0; j < labels.rows(); ++j) {
        const auto row = labels.row(j);
        for (std::size_t c = 0; c < out.size(); ++c) {
            out[c] += weights[j] * row[c];
        }
    }
    return out;
}

} // namespace

void HyperParams::validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
        throw Error(ErrorCode::InvalidArgument, "alpha must be a finite nonnegative number");
    }
    if (!(beta >= 0.0 && beta <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "beta must lie in [0, 1]");
    }
    if (!(tip_alpha >= 0.0) || !std::isfinite(tip_alpha)) {
        throw Error(ErrorCode::InvalidArgument, "tip-alpha must be a finite nonnegative number");
    }
}

std::vector<double> attention_p1(std::span<const double> query, const Matrix& support_features,
                                 const Matrix& support_labels) {
    check_support(query, support_features, support_labels);
    std::vector<double> weights(support_features.rows());
    for (std::size_t j = 0; j < weights.size(); ++j) {
        weights[j] = std::exp(-(1.0 - dot(query, support_features.row(j))));
    }
    return weighted_label_sum(weights, support_labels);
}

std::vector<double> zero_shot_logits(std::span<const double> query, const Matrix& text_heads) {
    return times_transpose(query, text_heads);
}

std::vector<double> combine(std::span<const double> p1, std::span<const double> p2,
                            std::span<const double> p3, const HyperParams& hp) {
    if (p1.size() != p2.size() || p1.size() != p3.size()) {
        throw Error(ErrorCode::ShapeMismatch, "intermediate predictions differ in length");
    }
    std::vector<double> out(p1.size());
    for (std::size_t c = 0; c < out.size(); ++c) {
        out[c] = p1[c] + hp.alpha * (hp.beta * p2[c] + (1.0 - hp.beta) * p3[c]);
    }
    return out;
}

std::vector<double> matching_networks(std::span<const double> query, const Matrix& support_features,
                                      const Matrix& support_labels) {
    if (support_features.rows() == 0) {
        throw Error(ErrorCode::EmptySupport, "matching networks need at least one support");
    }
    check_support(query, support_features, support_labels);
    const auto attention = softmax(times_transpose(query, support_features));
    return weighted_label_sum(attention, support_labels);
}

Matrix class_prototypes(const Matrix& support_features, const Matrix& support_labels) {
    if (support_features.rows() != support_labels.rows()) {
        throw Error(ErrorCode::ShapeMismatch, "support features and labels differ in rows");
    }
    const std::size_t n = support_labels.cols();
    Matrix sums(n, support_features.cols());
    std::vector<double> counts(n, 0.0);
    for (std::size_t j = 0; j < support_features.rows(); ++j) {
        const std::size_t c = argmax(support_labels.row(j));
        counts[c] += 1.0;
        auto dst = sums.row(c);
        const auto src = support_features.row(j);
        for (std::size_t d = 0; d < dst.size(); ++d) {
            dst[d] += src[d];
        }
    }
    for (std::size_t c = 0; c < n; ++c) {
        if (counts[c] == 0.0) {
            throw Error(ErrorCode::EmptyClass, "class column " + std::to_string(c) + " has no supports");
        }
        for (double& x : sums.row(c)) {
            x /= counts[c];
        }
    }
    return l2_normalize_rows(sums);
}

std::vector<double> prototypical_networks(std::span<const double> query,
                                          const Matrix& support_features,
                                          const Matrix& support_labels) {
    check_support(query, support_features, support_labels);
    const Matrix protos = class_prototypes(support_features, support_labels);
    std::vector<double> out = times_transpose(query, protos);
    for (double& s : out) {
        s = std::exp(-(1.0 - s));
    }
    return out;
}

std::vector<double> tip_adapter_logits(std::span<const double> query, const Matrix& support_features,
                                       const Matrix& support_labels, const Matrix& text_heads,
                                       double tip_alpha) {
    const auto cache = attention_p1(query, support_features, support_labels);
    const auto text = zero_shot_logits(query, text_heads);
    if (cache.size() != text.size()) {
        throw Error(ErrorCode::ShapeMismatch, "cache and text heads disagree on class count");
    }
    std::vector<double> out(cache.size());
    for (std::size_t c = 0; c < out.size(); ++c) {
        out[c] = tip_alpha * cache[c] + text[c];
    }
    return out;
}

PredictionBreakdown predict(const Episode& episode, std::span<const double> clip_query,
                            std::span<const double> blip_query, const HyperParams& hp) {
    PredictionBreakdown b;
    const std::size_t n = episode.n_way;
    b.p1 = attention_p1(clip_query, episode.support_features, episode.support_labels);
    b.p2 = episode.has_clip_text() ? zero_shot_logits(clip_query, episode.text_clip)
                                   : std::vector<double>(n, 0.0);
    b.p3 = episode.has_blip() ? zero_shot_logits(blip_query, episode.text_blip)
                              : std::vector<double>(n, 0.0);
    b.combined = combine(b.p1, b.p2, b.p3, hp);
    return b;
}

std::string_view method_name(Method method) {
    switch (method) {
    case Method::MatchingNetworks: return "mn";
    case Method::PrototypicalNetworks: return "pn";
    case Method::TipAdapter: return "tip";
    case Method::ZeroShotClip: return "zs-clip";
    case Method::ZeroShotBlip: return "zs-blip";
    case Method::Ours: return "ours";
    }
    return "?";
}

std::optional<Method> parse_method(std::string_view name) {
    for (Method m : kAllMethods) {
        if (method_name(m) == name) {
            return m;
        }
    }
    return std::nullopt;
}

bool method_needs_clip_text(Method method) {
    return method == Method::TipAdapter || method == Method::ZeroShotClip || method == Method::Ours;
}

bool method_needs_blip(Method method) {
    return method == Method::ZeroShotBlip || method == Method::Ours;
}

std::string HeadMask::label() const {
    std::string out;
    auto add = [&](bool on, const char* name) {
        if (on) {
            out += out.empty() ? "" : "+";
            out += name;
        }
    };
    add(p1, "p1");
    add(p2, "p2");
    add(p3, "p3");
    return out.empty() ? "none" : out;
}

std::vector<double> masked_logits(const PredictionBreakdown& b, const HyperParams& hp,
                                  const HeadMask& mask) {
    const int heads = int{mask.p1} + int{mask.p2} + int{mask.p3};
    if (heads == 1) {
        return mask.p1 ? b.p1 : (mask.p2 ? b.p2 : b.p3);
    }
    const std::vector<double> zeros(b.p1.size(), 0.0);
    return combine(mask.p1 ? b.p1 : zeros, mask.p2 ? b.p2 : zeros, mask.p3 ? b.p3 : zeros, hp);
}

std::vector<double> method_logits(const Episode& episode, std::size_t query, Method method,
                                  const HyperParams& hp) {
    const auto clip = episode.query_features.row(query);
    switch (method) {
    case Method::MatchingNetworks:
        return matching_networks(clip, episode.support_features, episode.support_labels);
    case Method::PrototypicalNetworks:
        return prototypical_networks(clip, episode.support_features, episode.support_labels);
    case Method::TipAdapter:
        return tip_adapter_logits(clip, episode.support_features, episode.support_labels,
                                  episode.text_clip, hp.tip_alpha);
    case Method::ZeroShotClip:
        return zero_shot_logits(clip, episode.text_clip);
    case Method::ZeroShotBlip:
        return zero_shot_logits(episode.query_aux_features.row(query), episode.text_blip);
    case Method::Ours:
        return predict(episode, clip, episode.query_aux_features.row(query), hp).combined;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown method");
}

namespace {

void require_queries(const Episode& episode) {
    if (episode.num_queries() == 0) {
        throw Error(ErrorCode::EmptyQuerySet, "accuracy is undefined without queries");
    }
}

void require_inputs(const Episode& episode, Method method) {
    if (method_needs_clip_text(method) && !episode.has_clip_text()) {
        throw Error(ErrorCode::InvalidArgument,
                    std::string(method_name(method)) + " needs clip text heads");
    }
    if (method_needs_blip(method) && !episode.has_blip()) {
        throw Error(ErrorCode::InvalidArgument,
                    std::string(method_name(method)) + " needs blip features and text heads");
    }
}

} // namespace

MethodResult evaluate_method(const Episode& episode, Method method, const HyperParams& hp) {
    require_queries(episode);
    require_inputs(episode, method);
    MethodResult r;
    r.method = std::string(method_name(method));
    r.total = episode.num_queries();
    for (std::size_t i = 0; i < r.total; ++i) {
        if (argmax(method_logits(episode, i, method, hp)) == episode.query_labels[i]) {
            ++r.correct;
        }
    }
    r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.total);
    return r;
}

AblationRow evaluate_mask(const Episode& episode, const HyperParams& hp, const HeadMask& mask) {
    require_queries(episode);
    AblationRow row;
    row.mask = mask;
    for (std::size_t i = 0; i < episode.num_queries(); ++i) {
        const auto b = predict(episode, episode.query_features.row(i),
                               episode.query_aux_features.row(i), hp);
        if (argmax(masked_logits(b, hp, mask)) == episode.query_labels[i]) {
            ++row.correct;
        }
    }
    row.accuracy = static_cast<double>(row.correct) / static_cast<double>(episode.num_queries());
    return row;
}

AccuracyReport evaluate(const Episode& episode, Method method, const HyperParams& hp) {
    hp.validate();
    AccuracyReport report;
    report.primary = evaluate_method(episode, method, hp);
    for (Method m : kAllMethods) {
        if ((method_needs_clip_text(m) && !episode.has_clip_text()) ||
            (method_needs_blip(m) && !episode.has_blip())) {
            continue;
        }
        report.methods.push_back(m == method ? report.primary : evaluate_method(episode, m, hp));
    }
    if (episode.has_clip_text() && episode.has_blip()) {
        for (const auto& mask : kAblationMasks) {
            report.ablation.push_back(evaluate_mask(episode, hp, mask));
        }
    }
    return report;
}

} // namespace cfsl
