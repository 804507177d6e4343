#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cfsl/episodes.hpp"
#include "cfsl/matrix.hpp"

namespace cfsl {

struct HyperParams {
    double alpha = 100.0;
    double beta = 0.6;
    // Weight of the cache term in Tip-Adapter logits.
    double tip_alpha = 1.0;

    void validate() const;
};

struct PredictionBreakdown {
    std::vector<double> p1;
    std::vector<double> p2;
    std::vector<double> p3;
    std::vector<double> combined;
};

// p1 = exp(-(1 - q F^T)) L. One entry per label column.
std::vector<double> attention_p1(std::span<const double> query, const Matrix& support_features,
                                 const Matrix& support_labels);

// Cosine logits against class text heads.
std::vector<double> zero_shot_logits(std::span<const double> query, const Matrix& text_heads);

// p1 + alpha * (beta * p2 + (1 - beta) * p3).
std::vector<double> combine(std::span<const double> p1, std::span<const double> p2,
                            std::span<const double> p3, const HyperParams& hp);

// Softmax attention over cosine similarity to every support, summed per class.
std::vector<double> matching_networks(std::span<const double> query, const Matrix& support_features,
                                      const Matrix& support_labels);

// Per-class mean of the support rows, re-normalized.
Matrix class_prototypes(const Matrix& support_features, const Matrix& support_labels);

// exp(-(1 - cos)) against each prototype.
std::vector<double> prototypical_networks(std::span<const double> query,
                                          const Matrix& support_features,
                                          const Matrix& support_labels);

// tip_alpha * exp(-(1 - q F^T)) L + q W_t^T.
std::vector<double> tip_adapter_logits(std::span<const double> query, const Matrix& support_features,
                                       const Matrix& support_labels, const Matrix& text_heads,
                                       double tip_alpha);

// p1/p2/p3 and the combined logits for a query given by its clip and blip views.
// p3 is all zeros when the episode has no blip inputs.
PredictionBreakdown predict(const Episode& episode, std::span<const double> clip_query,
                            std::span<const double> blip_query, const HyperParams& hp);

enum class Method { MatchingNetworks, PrototypicalNetworks, TipAdapter, ZeroShotClip, ZeroShotBlip, Ours };

std::string_view method_name(Method method);
std::optional<Method> parse_method(std::string_view name);
inline constexpr std::array<Method, 6> kAllMethods = {
    Method::ZeroShotBlip, Method::ZeroShotClip, Method::MatchingNetworks,
    Method::PrototypicalNetworks, Method::TipAdapter, Method::Ours};

// Which inputs a method reads.
bool method_needs_clip_text(Method method);
bool method_needs_blip(Method method);

// Which intermediate predictions enter the final logits. Multi-head rows use
// p1 + alpha * (beta * p2 + (1 - beta) * p3) with disabled heads zeroed; a
// lone head is scored on its own.
struct HeadMask {
    bool p1 = true;
    bool p2 = true;
    bool p3 = true;

    std::string label() const;
    friend bool operator==(const HeadMask&, const HeadMask&) = default;
};

// The seven non-empty head subsets, in ablation-table order.
inline constexpr std::array<HeadMask, 7> kAblationMasks = {{
    {true, false, false},
    {false, true, false},
    {false, false, true},
    {true, true, false},
    {true, false, true},
    {false, true, true},
    {true, true, true},
}};

std::vector<double> masked_logits(const PredictionBreakdown& b, const HyperParams& hp,
                                  const HeadMask& mask);

struct MethodResult {
    std::string method;
    std::size_t correct = 0;
    std::size_t total = 0;
    double accuracy = 0.0;
};

struct AblationRow {
    HeadMask mask;
    std::size_t correct = 0;
    double accuracy = 0.0;
};

struct AccuracyReport {
    MethodResult primary;
    std::vector<MethodResult> methods;
    std::vector<AblationRow> ablation;
};

// Class scores of one query under a method.
std::vector<double> method_logits(const Episode& episode, std::size_t query, Method method,
                                  const HyperParams& hp);

// Accuracy of one method. Throws EmptyQuerySet when there are no queries.
MethodResult evaluate_method(const Episode& episode, Method method, const HyperParams& hp);

// Accuracy under a head mask.
AblationRow evaluate_mask(const Episode& episode, const HyperParams& hp, const HeadMask& mask);

// Primary method, every other method the episode has inputs for, and the
// ablation rows (only when blip inputs are present).
AccuracyReport evaluate(const Episode& episode, Method method, const HyperParams& hp);

} // namespace cfsl
