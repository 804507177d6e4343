#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cfsl/episodes.hpp"
#include "cfsl/predictors.hpp"
#include "cfsl/trainer.hpp"

namespace cfsl {

// A predictor plus whether its cache is fine-tuned first ("ours-f", "tip-f").
struct MethodSpec {
    Method base = Method::Ours;
    bool finetune = false;

    std::string name() const;
    friend bool operator==(const MethodSpec&, const MethodSpec&) = default;
};

std::optional<MethodSpec> parse_method_spec(std::string_view name);

// Row order of the method comparison table.
std::vector<MethodSpec> comparison_methods();

struct BenchmarkConfig {
    HyperParams hp;
    TrainConfig train;
};

struct MethodRun {
    MethodResult result;
    std::optional<TrainResult> training;
};

// Throws InvalidArgument if the episode lacks inputs the method reads.
void check_method_inputs(const Episode& episode, const MethodSpec& spec);

MethodRun run_method(const Episode& episode, const MethodSpec& spec, const BenchmarkConfig& cfg);

std::vector<MethodRun> run_comparison(const Episode& episode, const BenchmarkConfig& cfg);

struct GridCell {
    double alpha = 0.0;
    double beta = 0.0;
    MethodResult result;
};

// Method "ours" (or "ours-f" when finetune) at every (alpha, beta).
std::vector<GridCell> alpha_beta_grid(const Episode& episode, const BenchmarkConfig& cfg,
                                      const std::vector<double>& alphas,
                                      const std::vector<double>& betas, bool finetune);

// The seven head-subset rows. With finetune, rows that use p1 train the
// cache on their own masked logits first.
std::vector<AblationRow> toggle_table(const Episode& episode, const BenchmarkConfig& cfg,
                                      bool finetune);

struct ShotsRow {
    std::size_t shots = 0;
    std::vector<MethodRun> runs;
};

// Comparison table at several shot counts; each count subsamples the training
// set per seed.
std::vector<ShotsRow> shots_sweep(const FeatureSet& train, const FeatureSet& test,
                                  const TextHeads& heads, const std::vector<std::size_t>& shots,
                                  const BenchmarkConfig& cfg, std::uint64_t seed);

inline const std::vector<double> kDefaultAlphaGrid = {1.0, 10.0, 100.0, 1000.0, 10000.0};
inline const std::vector<double> kDefaultBetaGrid = {0.3, 0.45, 0.6, 0.75, 0.9};

} // namespace cfsl
