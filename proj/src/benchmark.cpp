#include "cfsl/benchmark.hpp"

namespace cfsl {

std::string MethodSpec::name() const {
    std::string n(method_name(base));
    return finetune ? n + "-f" : n;
}

std::optional<MethodSpec> parse_method_spec(std::string_view name) {
    bool finetune = false;
    if (name.size() > 2 && name.substr(name.size() - 2) == "-f") {
        finetune = true;
        name.remove_suffix(2);
    }
    const auto base = parse_method(name);
    if (!base) {
        return std::nullopt;
    }
    // Only the cache-based heads have something to fine-tune.
    if (finetune && *base != Method::Ours && *base != Method::TipAdapter) {
        return std::nullopt;
    }
    return MethodSpec{*base, finetune};
}

std::vector<MethodSpec> comparison_methods() {
    return {{Method::ZeroShotBlip, false},         {Method::ZeroShotClip, false},
            {Method::MatchingNetworks, false},     {Method::PrototypicalNetworks, false},
            {Method::TipAdapter, false},           {Method::TipAdapter, true},
            {Method::Ours, false},                 {Method::Ours, true}};
}

void check_method_inputs(const Episode& episode, const MethodSpec& spec) {
    if (method_needs_clip_text(spec.base) && !episode.has_clip_text()) {
        throw Error(ErrorCode::InvalidArgument, spec.name() + " needs clip text heads");
    }
    if (method_needs_blip(spec.base) && !episode.has_blip()) {
        throw Error(ErrorCode::InvalidArgument, spec.name() + " needs blip features and text heads");
    }
}

namespace {

bool has_inputs(const Episode& episode, const MethodSpec& spec) {
    return (!method_needs_clip_text(spec.base) || episode.has_clip_text()) &&
           (!method_needs_blip(spec.base) || episode.has_blip());
}

} // namespace

MethodRun run_method(const Episode& episode, const MethodSpec& spec, const BenchmarkConfig& cfg) {
    cfg.hp.validate();
    check_method_inputs(episode, spec);
    MethodRun run;
    if (!spec.finetune) {
        run.result = evaluate_method(episode, spec.base, cfg.hp);
        return run;
    }
    const HeadWeights weights = spec.base == Method::Ours ? HeadWeights::from_hyper(cfg.hp)
                                                          : HeadWeights::tip_adapter(cfg.hp);
    run.training = train_cache(episode, weights, cfg.train);
    run.result = evaluate_method(with_cache(episode, run.training->cache), spec.base, cfg.hp);
    run.result.method = spec.name();
    return run;
}

std::vector<MethodRun> run_comparison(const Episode& episode, const BenchmarkConfig& cfg) {
    std::vector<MethodRun> runs;
    for (const auto& spec : comparison_methods()) {
        if (has_inputs(episode, spec)) {
            runs.push_back(run_method(episode, spec, cfg));
        }
    }
    return runs;
}

std::vector<GridCell> alpha_beta_grid(const Episode& episode, const BenchmarkConfig& cfg,
                                      const std::vector<double>& alphas,
                                      const std::vector<double>& betas, bool finetune) {
    if (alphas.empty() || betas.empty()) {
        throw Error(ErrorCode::InvalidArgument, "alpha and beta grids must be nonempty");
    }
    std::vector<GridCell> cells;
    for (double a : alphas) {
        for (double b : betas) {
            BenchmarkConfig c = cfg;
            c.hp.alpha = a;
            c.hp.beta = b;
            cells.push_back({a, b, run_method(episode, {Method::Ours, finetune}, c).result});
        }
    }
    return cells;
}

std::vector<AblationRow> toggle_table(const Episode& episode, const BenchmarkConfig& cfg,
                                      bool finetune) {
    cfg.hp.validate();
    check_method_inputs(episode, {Method::Ours, false});
    std::vector<AblationRow> rows;
    for (const auto& mask : kAblationMasks) {
        if (finetune && mask.p1) {
            const auto trained = train_cache(episode, HeadWeights::from_hyper(cfg.hp, mask), cfg.train);
            rows.push_back(evaluate_mask(with_cache(episode, trained.cache), cfg.hp, mask));
        } else {
            rows.push_back(evaluate_mask(episode, cfg.hp, mask));
        }
    }
    return rows;
}

std::vector<ShotsRow> shots_sweep(const FeatureSet& train, const FeatureSet& test,
                                  const TextHeads& heads, const std::vector<std::size_t>& shots,
                                  const BenchmarkConfig& cfg, std::uint64_t seed) {
    std::vector<ShotsRow> rows;
    for (std::size_t k : shots) {
        if (k == 0) {
            throw Error(ErrorCode::InvalidArgument, "shot counts must be positive");
        }
        const Episode ep = full_split_episode(subsample_shots(train, k, seed), test, heads);
        rows.push_back({k, run_comparison(ep, cfg)});
    }
    return rows;
}

} // namespace cfsl
