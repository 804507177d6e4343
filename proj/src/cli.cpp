#include "cfsl/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cfsl/benchmark.hpp"
#include "cfsl/causal.hpp"
#include "cfsl/embedding_store.hpp"
#include "cfsl/episodes.hpp"
#include "cfsl/report.hpp"
#include "cfsl/synth.hpp"

namespace cfsl {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

struct DataFlags {
    std::string data_dir;
    std::string train_manifest;
    std::string test_manifest;
    std::string text_clip;
    std::string text_blip;
    std::size_t shots = 0;
    std::size_t episode_way = 0;
    std::size_t episode_queries = 0;
};

struct HyperFlags {
    HyperParams hp;
    TrainConfig train;
    std::uint64_t seed = 42;
};

struct OutputFlags {
    std::string out;
    bool json_stdout = false;
};

void add_data_flags(CLI::App* cmd, DataFlags& d) {
    cmd->add_option("--data", d.data_dir, "Directory laid out like `cfsl generate` output");
    cmd->add_option("--train-manifest", d.train_manifest, "Training (support) manifest JSON");
    cmd->add_option("--test-manifest", d.test_manifest, "Test (query) manifest JSON");
    cmd->add_option("--text-clip", d.text_clip, "FSEB file of clip text heads, one row per class");
    cmd->add_option("--text-blip", d.text_blip, "FSEB file of blip text heads, one row per class");
    cmd->add_option("--shots", d.shots, "Keep this many training items per class (0 = all)");
    cmd->add_option("--episode-way", d.episode_way,
                    "Sample an N-way episode from the training manifest instead of a full split");
    cmd->add_option("--episode-queries", d.episode_queries, "Queries per class for --episode-way");
}

void add_hyper_flags(CLI::App* cmd, HyperFlags& h) {
    cmd->add_option("--alpha", h.hp.alpha, "Weight of the zero-shot terms")->capture_default_str();
    cmd->add_option("--beta", h.hp.beta, "Clip share of the zero-shot terms")->capture_default_str();
    cmd->add_option("--tip-alpha", h.hp.tip_alpha, "Cache weight in Tip-Adapter logits")
        ->capture_default_str();
    cmd->add_option("--epochs", h.train.epochs)->capture_default_str();
    cmd->add_option("--lr", h.train.lr)->capture_default_str();
    cmd->add_option("--batch-size", h.train.batch_size)->capture_default_str();
    cmd->add_option("--weight-decay", h.train.weight_decay)->capture_default_str();
    cmd->add_option("--seed", h.seed, "Seeds shot subsampling, episode sampling and training")
        ->capture_default_str();
}

void add_output_flags(CLI::App* cmd, OutputFlags& o) {
    cmd->add_option("--out", o.out, "Write the JSON report here");
    cmd->add_flag("--json", o.json_stdout, "Print the JSON report instead of text tables");
}

Json hp_json(const HyperFlags& h) {
    return Json{{"alpha", h.hp.alpha},       {"beta", h.hp.beta},
                {"tip_alpha", h.hp.tip_alpha}, {"epochs", h.train.epochs},
                {"lr", h.train.lr},           {"batch_size", h.train.batch_size},
                {"weight_decay", h.train.weight_decay}, {"seed", h.seed}};
}

Json result_json(const MethodResult& r) {
    return Json{{"method", r.method}, {"accuracy", r.accuracy}, {"correct", r.correct}, {"total", r.total}};
}

Json run_json(const MethodRun& run) {
    Json j = result_json(run.result);
    if (run.training) {
        j["loss_trace"] = run.training->loss_trace;
        j["steps"] = run.training->steps;
    }
    return j;
}

Json toggle_json(const std::vector<AblationRow>& rows) {
    Json arr = Json::array();
    for (const auto& r : rows) {
        arr.push_back({{"heads", r.mask.label()}, {"p1", r.mask.p1}, {"p2", r.mask.p2},
                       {"p3", r.mask.p3}, {"accuracy", r.accuracy}, {"correct", r.correct}});
    }
    return arr;
}

Json envelope(const std::string& command, Json config) {
    return Json{{"format_version", kReportFormatVersion}, {"command", command}, {"config", std::move(config)}};
}

// Resolved input paths; empty means "not supplied".
struct InputPaths {
    fs::path train_manifest;
    fs::path test_manifest;
    fs::path text_clip;
    fs::path text_blip;
};

InputPaths resolve_inputs(const DataFlags& d, bool need_test) {
    InputPaths p;
    auto pick = [&](const std::string& explicit_path, const char* default_name, bool required) -> fs::path {
        if (!explicit_path.empty()) {
            if (!fs::exists(explicit_path)) {
                throw Error(ErrorCode::IoFailure, explicit_path + " does not exist");
            }
            return explicit_path;
        }
        if (!d.data_dir.empty()) {
            const fs::path candidate = fs::path(d.data_dir) / default_name;
            if (fs::exists(candidate)) {
                return candidate;
            }
        }
        if (required) {
            throw Error(ErrorCode::InvalidArgument,
                        std::string("missing input: pass --data or the explicit path for ") + default_name);
        }
        return {};
    };
    p.train_manifest = pick(d.train_manifest, kTrainManifest, true);
    const bool sampled = d.episode_way != 0;
    p.test_manifest = pick(d.test_manifest, kTestManifest, need_test && !sampled);
    p.text_clip = pick(d.text_clip, kTextClip, false);
    p.text_blip = pick(d.text_blip, kTextBlip, false);
    return p;
}

struct LoadedData {
    Episode episode;
    std::size_t renormalized_rows = 0;
    Json inputs;
};

LoadedData load_episode(const DataFlags& d, std::uint64_t seed, bool need_test) {
    const InputPaths paths = resolve_inputs(d, need_test);
    LoadedData out;
    FeatureSet train = load_feature_set(paths.train_manifest);
    validate_manifest(train.manifest, true);
    out.renormalized_rows += train.renormalized_rows;
    TextHeads heads;
    if (!paths.text_clip.empty()) {
        auto t = read_embeddings(paths.text_clip);
        out.renormalized_rows += t.renormalized_rows;
        heads.clip = std::move(t.matrix);
    }
    if (!paths.text_blip.empty()) {
        auto t = read_embeddings(paths.text_blip);
        out.renormalized_rows += t.renormalized_rows;
        heads.blip = std::move(t.matrix);
    }
    out.inputs = Json{{"train_manifest", paths.train_manifest.filename().string()},
                      {"test_manifest", paths.test_manifest.filename().string()},
                      {"text_clip", paths.text_clip.filename().string()},
                      {"text_blip", paths.text_blip.filename().string()},
                      {"shots", d.shots},
                      {"episode_way", d.episode_way},
                      {"episode_queries", d.episode_queries}};
    if (d.episode_way != 0) {
        if (d.shots == 0) {
            throw Error(ErrorCode::InvalidArgument, "--episode-way needs --shots");
        }
        out.episode = sample_episode(train, heads, d.episode_way, d.shots, d.episode_queries, seed);
        return out;
    }
    if (d.shots != 0) {
        train = subsample_shots(train, d.shots, seed);
    }
    FeatureSet test;
    if (!paths.test_manifest.empty()) {
        test = load_feature_set(paths.test_manifest);
        out.renormalized_rows += test.renormalized_rows;
    } else {
        test.manifest.class_names = train.manifest.class_names;
        test.clip = Matrix(0, train.clip.cols());
        test.blip = Matrix(0, train.blip.cols());
    }
    out.episode = full_split_episode(train, test, heads);
    return out;
}

void warn_renormalized(const LoadedData& data, std::ostream& err) {
    if (data.renormalized_rows != 0) {
        err << "warning: re-normalized " << data.renormalized_rows
            << " embedding rows that were off the unit sphere\n";
    }
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) {
            throw Error(ErrorCode::InvalidArgument, "bad number '" + tok + "'");
        }
        out.push_back(v);
    }
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream os(path, std::ios::trunc);
    if (!os) {
        throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    }
    os << text;
}

void emit(const Json& report, const std::string& text, const OutputFlags& o, std::ostream& out) {
    const std::string canonical = report.dump(2) + "\n";
    if (!o.out.empty()) {
        write_text(o.out, canonical);
    }
    out << (o.json_stdout ? canonical : text);
}

void check_output_target(const OutputFlags& o) {
    if (!o.out.empty() && fs::is_directory(o.out)) {
        throw Error(ErrorCode::InvalidArgument, "--out " + o.out + " is a directory");
    }
}

// ---- generate --------------------------------------------------------------

struct GenerateFlags {
    SynthSpec spec;
    std::string out;
    std::string dtype = "f64";
};

int cmd_generate(const GenerateFlags& g, std::ostream& out) {
    if (g.out.empty()) {
        throw Error(ErrorCode::InvalidArgument, "generate needs --out DIR");
    }
    if (g.dtype != "f32" && g.dtype != "f64") {
        throw Error(ErrorCode::InvalidArgument, "--dtype must be f32 or f64");
    }
    g.spec.validate();
    const auto data = generate(g.spec);
    write_dataset(g.out, data, g.dtype == "f32" ? Dtype::Float32 : Dtype::Float64);
    out << "wrote " << data.train.manifest.items.size() << " train and "
        << data.test.manifest.items.size() << " test items over " << g.spec.n_classes
        << " classes to " << g.out << "\n";
    return 0;
}

// ---- eval ------------------------------------------------------------------

int cmd_eval(const DataFlags& d, const HyperFlags& h, const std::string& method, const OutputFlags& o,
             std::ostream& out, std::ostream& err) {
    h.hp.validate();
    h.train.validate();
    check_output_target(o);
    std::vector<MethodSpec> specs;
    if (method == "all") {
        specs = comparison_methods();
    } else {
        const auto spec = parse_method_spec(method);
        if (!spec) {
            throw Error(ErrorCode::InvalidArgument, "unknown method '" + method + "'");
        }
        specs.push_back(*spec);
    }
    LoadedData data = load_episode(d, h.seed, true);
    warn_renormalized(data, err);
    if (data.episode.num_queries() == 0) {
        throw Error(ErrorCode::EmptyQuerySet, "the test set has no items; accuracy is undefined");
    }
    if (method != "all") {
        check_method_inputs(data.episode, specs.front());
    }
    BenchmarkConfig cfg{h.hp, h.train};
    cfg.train.seed = h.seed;
    std::vector<MethodRun> runs;
    if (method == "all") {
        runs = run_comparison(data.episode, cfg);
    } else {
        runs.push_back(run_method(data.episode, specs.front(), cfg));
    }

    Json config = hp_json(h);
    config["method"] = method;
    config["inputs"] = data.inputs;
    Json report = envelope("eval", std::move(config));
    Json methods = Json::array();
    for (const auto& r : runs) methods.push_back(run_json(r));
    report["results"] = {{"n_way", data.episode.n_way},
                         {"support", data.episode.num_support()},
                         {"queries", data.episode.num_queries()},
                         {"renormalized_rows", data.renormalized_rows},
                         {"methods", std::move(methods)}};
    emit(report, comparison_table(runs), o, out);
    return 0;
}

// ---- train -----------------------------------------------------------------

int cmd_train(const DataFlags& d, const HyperFlags& h, const std::string& method,
              const std::string& cache_out, const std::string& log_out, std::ostream& out,
              std::ostream& err) {
    h.hp.validate();
    h.train.validate();
    const auto spec = parse_method_spec(method);
    if (!spec || !spec->finetune) {
        throw Error(ErrorCode::InvalidArgument, "train needs a fine-tuned method (ours-f or tip-f)");
    }
    if (cache_out.empty()) {
        throw Error(ErrorCode::InvalidArgument, "train needs --cache-out");
    }
    LoadedData data = load_episode(d, h.seed, false);
    warn_renormalized(data, err);
    check_method_inputs(data.episode, *spec);
    TrainConfig tc = h.train;
    tc.seed = h.seed;
    const HeadWeights weights = spec->base == Method::Ours ? HeadWeights::from_hyper(h.hp)
                                                           : HeadWeights::tip_adapter(h.hp);
    const TrainResult result = train_cache(data.episode, weights, tc);

    Json config = hp_json(h);
    config["method"] = method;
    config["inputs"] = data.inputs;
    Json log = envelope("train", std::move(config));
    log["results"] = {{"support", data.episode.num_support()},
                      {"steps", result.steps},
                      {"loss_trace", result.loss_trace},
                      {"support_ids", data.episode.support_ids}};
    const fs::path cache_path(cache_out);
    if (cache_path.has_parent_path()) fs::create_directories(cache_path.parent_path());
    write_embeddings(cache_path, result.cache, Dtype::Float64);
    const std::string canonical = log.dump(2) + "\n";
    if (!log_out.empty()) {
        write_text(log_out, canonical);
    }
    out << "loss " << result.loss_trace.front() << " -> " << result.loss_trace.back() << " after "
        << result.steps << " steps; cache written to " << cache_out << "\n";
    return 0;
}

// ---- ablate ----------------------------------------------------------------

int cmd_ablate(const DataFlags& d, const HyperFlags& h, const std::string& alphas_text,
               const std::string& betas_text, bool finetune, const OutputFlags& o, std::ostream& out,
               std::ostream& err) {
    h.hp.validate();
    h.train.validate();
    check_output_target(o);
    const auto alphas = parse_list(alphas_text);
    const auto betas = parse_list(betas_text);
    if (alphas.empty() || betas.empty()) {
        throw Error(ErrorCode::InvalidArgument, "--alphas and --betas must be nonempty");
    }
    for (double b : betas) {
        if (!(b >= 0.0 && b <= 1.0)) throw Error(ErrorCode::InvalidArgument, "betas must lie in [0, 1]");
    }
    for (double a : alphas) {
        if (!(a >= 0.0)) throw Error(ErrorCode::InvalidArgument, "alphas must be nonnegative");
    }
    LoadedData data = load_episode(d, h.seed, true);
    warn_renormalized(data, err);
    if (data.episode.num_queries() == 0) {
        throw Error(ErrorCode::EmptyQuerySet, "the test set has no items; accuracy is undefined");
    }
    check_method_inputs(data.episode, {Method::Ours, finetune});
    BenchmarkConfig cfg{h.hp, h.train};
    cfg.train.seed = h.seed;
    const auto grid = alpha_beta_grid(data.episode, cfg, alphas, betas, finetune);
    const auto toggles = toggle_table(data.episode, cfg, finetune);

    Json config = hp_json(h);
    config["alphas"] = alphas;
    config["betas"] = betas;
    config["finetune"] = finetune;
    config["inputs"] = data.inputs;
    Json report = envelope("ablate", std::move(config));
    Json cells = Json::array();
    for (const auto& c : grid) {
        cells.push_back({{"alpha", c.alpha}, {"beta", c.beta}, {"accuracy", c.result.accuracy},
                         {"correct", c.result.correct}, {"total", c.result.total}});
    }
    report["results"] = {{"grid", std::move(cells)}, {"toggles", toggle_json(toggles)}};
    emit(report, grid_table(grid) + "\n" + toggle_text_table(toggles), o, out);
    return 0;
}

// ---- causal-verify ---------------------------------------------------------

struct CausalFlags {
    std::size_t seeds = 100;
    std::uint64_t seed_base = 0;
    std::string cards = "4,4,4,4";
    double concentration = 1.0;
    bool inject_fault = false;
    bool permissive = false;
};

causal::DiscreteScm perturbed(causal::DiscreteScm scm) {
    // Move mass inside one conditional row so the model behind the "truth"
    // no longer matches the one that produced the observations.
    if (scm.cards.y >= 2) {
        const double moved = 0.5 * scm.p_y_given_zu[0];
        scm.p_y_given_zu[0] -= moved;
        scm.p_y_given_zu[1] += moved;
        const double back = 0.5 * scm.p_y_given_zu[scm.cards.y + 1];
        if (scm.cards.z * scm.cards.u >= 2) {
            scm.p_y_given_zu[scm.cards.y + 1] -= back;
            scm.p_y_given_zu[scm.cards.y] += back;
        }
    } else if (scm.cards.z >= 2) {
        scm.p_z_given_x[1] += scm.p_z_given_x[0];
        scm.p_z_given_x[0] = 0.0;
    }
    return scm;
}

int cmd_causal_verify(const CausalFlags& c, const OutputFlags& o, std::ostream& out, std::ostream& err) {
    check_output_target(o);
    // Cardinalities are integers; parse_list accepts them as doubles.
    const auto raw = parse_list(c.cards);
    if (raw.size() != 4) {
        throw Error(ErrorCode::InvalidArgument, "--cards needs four values |U|,|X|,|Z|,|Y|");
    }
    for (double v : raw) {
        if (!(v >= 1.0) || v != static_cast<double>(static_cast<std::size_t>(v))) {
            throw Error(ErrorCode::InvalidArgument, "cardinalities must be integers >= 1");
        }
    }
    const causal::Cards cards{static_cast<std::size_t>(raw[0]), static_cast<std::size_t>(raw[1]),
                              static_cast<std::size_t>(raw[2]), static_cast<std::size_t>(raw[3])};
    if (c.inject_fault && cards.y < 2 && cards.z < 2) {
        throw Error(ErrorCode::InvalidArgument, "--inject-fault needs |Y| >= 2 or |Z| >= 2");
    }
    if (c.seeds == 0) {
        throw Error(ErrorCode::InvalidArgument, "--seeds must be positive");
    }
    constexpr double kTol = 1e-10;
    const auto policy = c.permissive ? causal::PositivityPolicy::SkipZeroMass
                                     : causal::PositivityPolicy::Strict;

    double worst_frontdoor = 0.0, worst_z = 0.0, worst_y = 0.0, worst_collapse = 0.0, worst_norm = 0.0;
    std::size_t skipped = 0;
    Json violations = Json::array();
    for (std::size_t i = 0; i < c.seeds; ++i) {
        const std::uint64_t seed = c.seed_base + i;
        const auto scm = causal::random_scm(cards, seed, c.concentration);
        const auto truth_scm = c.inject_fault ? perturbed(scm) : scm;
        try {
            const auto obs = causal::marginalize_confounder(causal::observational_joint(scm));
            for (std::size_t x = 0; x < cards.x; ++x) {
                const auto truth = causal::interventional_truth(truth_scm, x);
                const auto est = causal::frontdoor_estimate(obs, x, policy);
                skipped += est.skipped_terms;
                worst_frontdoor = std::max(worst_frontdoor, causal::max_abs_diff(truth, est.p_y));
                double total = 0.0;
                for (double p : truth) total += p;
                worst_norm = std::max(worst_norm, std::abs(total - 1.0));
                if (cards.u == 1) {
                    worst_collapse = std::max(
                        worst_collapse, causal::max_abs_diff(est.p_y, causal::conditional_y_given_x(obs, x)));
                }
            }
            // Same checks as causal::partial_effects, but the mutilated
            // quantities come from truth_scm so an injected fault shows up.
            for (std::size_t x = 0; x < cards.x; ++x) {
                worst_z = std::max(worst_z, causal::max_abs_diff(causal::interventional_z(truth_scm, x),
                                                                 causal::conditional_z_given_x(obs, x)));
            }
            for (std::size_t z = 0; z < cards.z; ++z) {
                const auto est = causal::backdoor_z_estimate(obs, z, policy);
                skipped += est.skipped_terms;
                worst_y = std::max(worst_y, causal::max_abs_diff(
                                                causal::interventional_y_given_do_z(truth_scm, z), est.p_y));
            }
        } catch (const Error& e) {
            if (e.code() != ErrorCode::PositivityViolation) throw;
            violations.push_back({{"seed", seed}, {"detail", e.what()}});
        }
    }

    const auto witness = causal::confounded_witness_scm();
    const auto wobs = causal::marginalize_confounder(causal::observational_joint(witness));
    double witness_gap = 0.0, witness_dev = 0.0;
    for (std::size_t x = 0; x < witness.cards.x; ++x) {
        const auto truth = causal::interventional_truth(witness, x);
        witness_gap = std::max(witness_gap,
                               causal::total_variation(causal::conditional_y_given_x(wobs, x), truth));
        witness_dev = std::max(witness_dev,
                               causal::max_abs_diff(causal::frontdoor_estimate(wobs, x).p_y, truth));
    }

    const bool frontdoor_ok = worst_frontdoor <= kTol && worst_norm <= kTol;
    const bool partial_ok = worst_z <= kTol && worst_y <= kTol;
    const bool collapse_ok = cards.u != 1 || worst_collapse <= kTol;
    const bool witness_ok = witness_gap >= 0.05 && witness_dev <= kTol;
    const bool pass = frontdoor_ok && partial_ok && collapse_ok && witness_ok && violations.empty();

    Json config{{"seeds", c.seeds},
                {"seed_base", c.seed_base},
                {"cards", {cards.u, cards.x, cards.z, cards.y}},
                {"concentration", c.concentration},
                {"inject_fault", c.inject_fault},
                {"permissive", c.permissive},
                {"tolerance", kTol}};
    Json report = envelope("causal-verify", std::move(config));
    Json results{{"pass", pass},
                 {"frontdoor", {{"pass", frontdoor_ok}, {"worst_deviation", worst_frontdoor},
                                {"worst_normalization_error", worst_norm}}},
                 {"partial_effects", {{"pass", partial_ok}, {"worst_z_do_x", worst_z}, {"worst_y_do_z", worst_y}}},
                 {"witness", {{"pass", witness_ok}, {"tv_gap", witness_gap}, {"frontdoor_deviation", witness_dev}}},
                 {"positivity_violations", violations},
                 {"skipped_zero_mass_terms", skipped}};
    if (cards.u == 1) {
        results["no_confounder_collapse"] = {{"pass", collapse_ok}, {"worst_deviation", worst_collapse}};
    }
    report["results"] = std::move(results);
    if (skipped != 0) {
        err << "warning: skipped " << skipped << " zero-mass (x', z) terms\n";
    }

    std::ostringstream text;
    auto line = [&](const char* name, bool ok, const std::string& detail) {
        text << (ok ? "PASS " : "FAIL ") << name << "  " << detail << "\n";
    };
    char buf[160];
    std::snprintf(buf, sizeof buf, "worst |estimate - truth| = %.3e over %zu seeds", worst_frontdoor, c.seeds);
    line("front-door identity", frontdoor_ok, buf);
    std::snprintf(buf, sizeof buf, "worst z|do(x) %.3e, y|do(z) %.3e", worst_z, worst_y);
    line("partial effects", partial_ok, buf);
    if (cards.u == 1) {
        std::snprintf(buf, sizeof buf, "worst |estimate - P(y|x)| = %.3e", worst_collapse);
        line("no-confounder collapse", collapse_ok, buf);
    }
    std::snprintf(buf, sizeof buf, "TV gap %.4f, front-door deviation %.3e", witness_gap, witness_dev);
    line("confounding witness", witness_ok, buf);
    if (!violations.empty()) {
        line("positivity", false, std::to_string(violations.size()) + " seeds violated positivity");
    }
    text << (pass ? "PASS" : "FAIL") << "\n";
    emit(report, text.str(), o, out);
    return pass ? 0 : 1;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Few-shot classification with cache attention and dual zero-shot heads", "cfsl"};
    app.require_subcommand(1);

    GenerateFlags gen;
    auto* generate_cmd = app.add_subcommand("generate", "Write a synthetic two-encoder dataset");
    generate_cmd->add_option("--out", gen.out, "Output directory")->required();
    generate_cmd->add_option("--classes", gen.spec.n_classes)->capture_default_str();
    generate_cmd->add_option("--dims", gen.spec.dims)->capture_default_str();
    generate_cmd->add_option("--train-per-class", gen.spec.train_per_class)->capture_default_str();
    generate_cmd->add_option("--test-per-class", gen.spec.test_per_class)->capture_default_str();
    generate_cmd->add_option("--visual-noise", gen.spec.visual_noise)->capture_default_str();
    generate_cmd->add_option("--text-noise-clip", gen.spec.text_noise_clip)->capture_default_str();
    generate_cmd->add_option("--text-noise-blip", gen.spec.text_noise_blip)->capture_default_str();
    generate_cmd->add_option("--seed", gen.spec.seed)->capture_default_str();
    generate_cmd->add_option("--dtype", gen.dtype, "f32 or f64")->capture_default_str();

    DataFlags eval_data;
    HyperFlags eval_hp;
    OutputFlags eval_out;
    std::string eval_method = "all";
    auto* eval_cmd = app.add_subcommand("eval", "Accuracy of one method or the whole comparison");
    add_data_flags(eval_cmd, eval_data);
    add_hyper_flags(eval_cmd, eval_hp);
    add_output_flags(eval_cmd, eval_out);
    eval_cmd->add_option("--method", eval_method,
                         "mn, pn, tip, tip-f, zs-clip, zs-blip, ours, ours-f or all")
        ->capture_default_str();

    DataFlags train_data;
    HyperFlags train_hp;
    std::string train_method = "ours-f", cache_out, log_out;
    auto* train_cmd = app.add_subcommand("train", "Fine-tune the support cache and save it");
    add_data_flags(train_cmd, train_data);
    add_hyper_flags(train_cmd, train_hp);
    train_cmd->add_option("--method", train_method, "ours-f or tip-f")->capture_default_str();
    train_cmd->add_option("--cache-out", cache_out, "FSEB file for the adapted cache")->required();
    train_cmd->add_option("--log", log_out, "JSON training log");

    DataFlags ablate_data;
    HyperFlags ablate_hp;
    OutputFlags ablate_out;
    std::string alphas = "1,10,100,1000,10000", betas = "0.3,0.45,0.6,0.75,0.9";
    bool ablate_finetune = false;
    auto* ablate_cmd = app.add_subcommand("ablate", "Alpha/beta grid plus the head toggle table");
    add_data_flags(ablate_cmd, ablate_data);
    add_hyper_flags(ablate_cmd, ablate_hp);
    add_output_flags(ablate_cmd, ablate_out);
    ablate_cmd->add_option("--alphas", alphas)->capture_default_str();
    ablate_cmd->add_option("--betas", betas)->capture_default_str();
    ablate_cmd->add_flag("--finetune", ablate_finetune, "Fine-tune the cache for every cell/row");

    CausalFlags causal_flags;
    OutputFlags causal_out;
    auto* causal_cmd = app.add_subcommand("causal-verify", "Check the front-door identity on random SCMs");
    causal_cmd->add_option("--seeds", causal_flags.seeds)->capture_default_str();
    causal_cmd->add_option("--seed-base", causal_flags.seed_base)->capture_default_str();
    causal_cmd->add_option("--cards", causal_flags.cards, "|U|,|X|,|Z|,|Y|")->capture_default_str();
    causal_cmd->add_option("--concentration", causal_flags.concentration)->capture_default_str();
    causal_cmd->add_flag("--inject-fault", causal_flags.inject_fault,
                         "Perturb the model behind the ground truth (self-test; must FAIL)");
    causal_cmd->add_flag("--permissive", causal_flags.permissive,
                         "Skip zero-mass (x', z) terms instead of failing");
    add_output_flags(causal_cmd, causal_out);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (*generate_cmd) return cmd_generate(gen, out);
        if (*eval_cmd) return cmd_eval(eval_data, eval_hp, eval_method, eval_out, out, err);
        if (*train_cmd) return cmd_train(train_data, train_hp, train_method, cache_out, log_out, out, err);
        if (*ablate_cmd) return cmd_ablate(ablate_data, ablate_hp, alphas, betas, ablate_finetune, ablate_out, out, err);
        if (*causal_cmd) return cmd_causal_verify(causal_flags, causal_out, out, err);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

} // namespace cfsl
