#include <doctest.h>

#include <cmath>
#include <numeric>

#include "cfsl/numerics.hpp"
#include "cfsl/predictors.hpp"
#include "test_util.hpp"

using namespace cfsl;
using cfsl::testing::code_of;
using cfsl::testing::onehot_labels;
using cfsl::testing::random_unit_rows;

namespace {

std::vector<double> unit(std::vector<double> v) {
    double n = 0;
    for (double x : v) n += x * x;
    for (double& x : v) x /= std::sqrt(n);
    return v;
}

double dot_loop(std::span<const double> a, std::span<const double> b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Plain loop versions, written independently of the library kernels.
std::vector<double> p1_oracle(std::span<const double> q, const Matrix& f, const std::vector<std::size_t>& labels,
                              std::size_t n) {
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < f.rows(); ++i) out[labels[i]] += std::exp(dot_loop(q, f.row(i)) - 1.0);
    return out;
}

std::vector<double> mn_oracle(std::span<const double> q, const Matrix& f, const std::vector<std::size_t>& labels,
                              std::size_t n) {
    std::vector<double> w(f.rows());
    double z = 0;
    for (std::size_t i = 0; i < f.rows(); ++i) {
        w[i] = std::exp(dot_loop(q, f.row(i)));
        z += w[i];
    }
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < f.rows(); ++i) out[labels[i]] += w[i] / z;
    return out;
}

std::vector<double> pn_oracle(std::span<const double> q, const Matrix& f, const std::vector<std::size_t>& labels,
                              std::size_t n) {
    std::vector<double> out(n);
    for (std::size_t c = 0; c < n; ++c) {
        std::vector<double> mean(f.cols(), 0.0);
        for (std::size_t i = 0; i < f.rows(); ++i) {
            if (labels[i] != c) continue;
            for (std::size_t d = 0; d < f.cols(); ++d) mean[d] += f(i, d);
        }
        mean = unit(mean);
        out[c] = std::exp(dot_loop(q, mean) - 1.0);
    }
    return out;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= tol);
}

struct Toy {
    Matrix f;
    Matrix l;
    std::vector<std::size_t> labels;
    Matrix text;
    std::vector<double> q;
};

Toy toy(std::uint64_t seed, std::size_t supports, std::size_t classes, std::size_t dims) {
    std::mt19937_64 gen(seed);
    Toy t;
    t.f = random_unit_rows(supports, dims, gen);
    for (std::size_t i = 0; i < supports; ++i) t.labels.push_back(i % classes);
    t.l = onehot_labels(t.labels, classes);
    t.text = random_unit_rows(classes, dims, gen);
    const Matrix q = random_unit_rows(1, dims, gen);
    t.q.assign(q.row(0).begin(), q.row(0).end());
    return t;
}

} // namespace

TEST_CASE("attention_p1 examples") {
    const Matrix f = Matrix::from_rows({{1, 0}});
    const std::vector<double> q = {1, 0};
    CHECK(attention_p1(q, f, Matrix::from_rows({{1, 0}})) == std::vector<double>{1.0, 0.0});

    const Matrix ortho = Matrix::from_rows({{0, 1}, {0, -1}});
    const auto p = attention_p1(q, ortho, Matrix::from_rows({{1, 0}, {0, 1}}));
    CHECK(p[0] == doctest::Approx(0.36787944117144233).epsilon(1e-15));
    CHECK(p[1] == p[0]);

    const Toy t = toy(4, 4, 2, 5);
    check_close(attention_p1(t.q, t.f, t.l), p1_oracle(t.q, t.f, t.labels, 2), 1e-14);
}

TEST_CASE("zero_shot_logits examples") {
    const Matrix heads = Matrix::from_rows({{1, 0, 0}, {0, 1, 0}});
    CHECK(zero_shot_logits(std::vector<double>{1, 0, 0}, heads) == std::vector<double>{1, 0});
    CHECK(zero_shot_logits(std::vector<double>{0, 0, 1}, heads) == std::vector<double>{0, 0});
    CHECK(zero_shot_logits(std::vector<double>{-1, 0, 0}, heads)[0] == -1.0);
}

TEST_CASE("combine examples") {
    const std::vector<double> p1 = {1, 0}, p2 = {0, 1}, p3 = {1, 1};
    CHECK(combine(p1, p2, p3, {.alpha = 1, .beta = 0.5}) == std::vector<double>{1.5, 1.0});
    CHECK(combine(p1, p2, p3, {.alpha = 0, .beta = 0.3}) == p1);
    const auto b1 = combine(std::vector<double>{0.2, 0.7}, std::vector<double>{0.4, -0.1}, p3,
                            {.alpha = 1, .beta = 1});
    CHECK(b1[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(b1[1] == doctest::Approx(0.6).epsilon(1e-15));

    CHECK(code_of([] { HyperParams{.beta = 1.5}.validate(); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { HyperParams{.alpha = -1}.validate(); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("matching networks examples") {
    const std::vector<double> q = unit({0.3, 0.8});
    const auto single = matching_networks(q, Matrix::from_rows({{0, 1}}), Matrix::from_rows({{0, 1}}));
    CHECK(single == std::vector<double>{0.0, 1.0});

    const auto sym = matching_networks(std::vector<double>{1, 0}, Matrix::from_rows({{0, 1}, {0, -1}}),
                                       Matrix::from_rows({{1, 0}, {0, 1}}));
    CHECK(sym[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(sym[1] == doctest::Approx(0.5).epsilon(1e-15));

    const Toy t = toy(6, 6, 3, 4);
    check_close(matching_networks(t.q, t.f, t.l), mn_oracle(t.q, t.f, t.labels, 3), 1e-14);

    CHECK(code_of([] { matching_networks(std::vector<double>{1}, Matrix(0, 1), Matrix(0, 2)); }) ==
          ErrorCode::EmptySupport);
}

TEST_CASE("prototypical networks examples") {
    const Matrix protos = class_prototypes(Matrix::from_rows({{1, 0}, {0, 1}}), Matrix::from_rows({{1}, {1}}));
    CHECK(protos(0, 0) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
    CHECK(protos(0, 1) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));

    const Toy t = toy(7, 8, 2, 5);
    check_close(prototypical_networks(t.q, t.f, t.l), pn_oracle(t.q, t.f, t.labels, 2), 1e-14);

    CHECK(code_of([] {
              class_prototypes(Matrix::from_rows({{1, 0}}), Matrix::from_rows({{1, 0}}));
          }) == ErrorCode::EmptyClass);
}

TEST_CASE("K=1 prototypical argmax equals matching networks argmax") {
    std::mt19937_64 gen(11);
    for (int trial = 0; trial < 200; ++trial) {
        const Toy t = toy(1000 + trial, 5, 5, 6);
        CHECK(argmax(prototypical_networks(t.q, t.f, t.l)) == argmax(matching_networks(t.q, t.f, t.l)));
    }
}

TEST_CASE("tip adapter examples") {
    const Toy t = toy(9, 6, 3, 4);
    CHECK(tip_adapter_logits(t.q, t.f, t.l, t.text, 0.0) == zero_shot_logits(t.q, t.text));
    CHECK(tip_adapter_logits(t.q, t.f, t.l, Matrix(3, 4), 1.0) == attention_p1(t.q, t.f, t.l));
    for (double a : {0.5, 1.0, 3.0, 17.0}) {
        const auto tip = tip_adapter_logits(t.q, t.f, t.l, t.text, a);
        const auto p1 = p1_oracle(t.q, t.f, t.labels, 3);
        std::vector<double> expected(3);
        for (std::size_t c = 0; c < 3; ++c) expected[c] = a * p1[c] + dot_loop(t.q, t.text.row(c));
        check_close(tip, expected, 1e-12);
    }
}

TEST_CASE("properties over seeded inputs") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const std::size_t classes = 2 + seed % 5;
        const Toy t = toy(seed, classes * (1 + seed % 4), classes, 3 + seed % 7);
        const auto p1 = attention_p1(t.q, t.f, t.l);
        const auto counts = [&] {
            std::vector<double> c(classes, 0.0);
            for (auto l : t.labels) c[l] += 1;
            return c;
        }();
        for (std::size_t c = 0; c < classes; ++c) {
            CHECK(p1[c] > 0.0);
            CHECK(p1[c] <= counts[c]);
        }

        const auto mn = matching_networks(t.q, t.f, t.l);
        CHECK(std::abs(std::accumulate(mn.begin(), mn.end(), 0.0) - 1.0) <= 1e-12);

        const auto p2 = zero_shot_logits(t.q, t.text);
        std::mt19937_64 gen(seed + 77);
        const Matrix p3m = cfsl::testing::random_matrix(1, classes, gen);
        const std::vector<double> p3(p3m.row(0).begin(), p3m.row(0).end());
        CHECK(argmax(combine(p1, p2, p3, {.alpha = 0.0})) == argmax(p1));

        const HyperParams hp{.alpha = 3.7, .beta = 0.35};
        const auto base = argmax(combine(p1, p2, p3, hp));
        for (double k : {0.01, 2.0, 1e6}) {
            auto scale = [k](std::vector<double> v) {
                for (double& x : v) x *= k;
                return v;
            };
            CHECK(argmax(combine(scale(p1), scale(p2), scale(p3), hp)) == base);
        }
    }
}

TEST_CASE("duplicating a support raises its class's attention") {
    const Toy t = toy(21, 6, 3, 4);
    const auto before = attention_p1(t.q, t.f, t.l);
    Matrix f2(t.f.rows() + 1, t.f.cols());
    Matrix l2(t.l.rows() + 1, t.l.cols());
    for (std::size_t i = 0; i < t.f.rows(); ++i) {
        for (std::size_t d = 0; d < t.f.cols(); ++d) f2(i, d) = t.f(i, d);
        for (std::size_t c = 0; c < t.l.cols(); ++c) l2(i, c) = t.l(i, c);
    }
    for (std::size_t d = 0; d < t.f.cols(); ++d) f2(6, d) = t.f(1, d);
    l2(6, t.labels[1]) = 1.0;
    const auto after = attention_p1(t.q, f2, l2);
    for (std::size_t c = 0; c < 3; ++c) {
        if (c == t.labels[1]) {
            CHECK(after[c] > before[c]);
        } else {
            CHECK(after[c] == before[c]);
        }
    }
}

namespace {

// Queries copied from the support set.
Episode duplicated_episode(std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    Episode ep;
    ep.n_way = 4;
    ep.k_shot = 3;
    // tight clusters around orthogonal class axes
    std::vector<std::size_t> labels;
    for (std::size_t i = 0; i < 12; ++i) labels.push_back(i / 3);
    const Matrix jitter = cfsl::testing::random_matrix(12, 8, gen, -0.05, 0.05);
    ep.support_features = Matrix(12, 8);
    for (std::size_t i = 0; i < 12; ++i) {
        for (std::size_t d = 0; d < 8; ++d) ep.support_features(i, d) = jitter(i, d) + (d == labels[i] ? 1.0 : 0.0);
    }
    ep.support_features = l2_normalize_rows(ep.support_features);
    ep.support_labels = onehot_labels(labels, 4);
    ep.query_features = ep.support_features;
    ep.query_labels = labels;
    ep.support_aux_features = random_unit_rows(12, 5, gen);
    ep.query_aux_features = ep.support_aux_features;
    ep.text_clip = random_unit_rows(4, 8, gen);
    ep.text_blip = random_unit_rows(4, 5, gen);
    ep.class_indices = {0, 1, 2, 3};
    for (std::size_t i = 0; i < 12; ++i) {
        ep.support_ids.push_back("s" + std::to_string(i));
        ep.query_ids.push_back("s" + std::to_string(i));
    }
    return ep;
}

} // namespace

TEST_CASE("evaluate: duplicated queries score 1, adversarial labels score 0") {
    Episode ep = duplicated_episode(5);
    const HyperParams hp{.alpha = 0.0};
    CHECK(evaluate_method(ep, Method::Ours, hp).accuracy == 1.0);

    // relabel every query with a class it cannot win
    for (std::size_t i = 0; i < ep.num_queries(); ++i) {
        const auto winner = argmax(method_logits(ep, i, Method::Ours, hp));
        ep.query_labels[i] = (winner + 1) % 4;
    }
    const auto r = evaluate_method(ep, Method::Ours, hp);
    CHECK(r.accuracy == 0.0);
    CHECK(r.correct == 0);
    CHECK(r.total == 12);
}

TEST_CASE("evaluate report contents") {
    const Episode ep = duplicated_episode(6);
    const AccuracyReport rep = evaluate(ep, Method::Ours, HyperParams{});
    CHECK(rep.primary.method == "ours");
    CHECK(rep.methods.size() == kAllMethods.size());
    REQUIRE(rep.ablation.size() == 7);
    // the single-head rows agree with the stand-alone methods
    CHECK(rep.ablation[1].accuracy == evaluate_method(ep, Method::ZeroShotClip, {}).accuracy);
    CHECK(rep.ablation[2].accuracy == evaluate_method(ep, Method::ZeroShotBlip, {}).accuracy);
    CHECK(rep.ablation[6].accuracy == rep.primary.accuracy);
    CHECK(kAblationMasks[3].label() != kAblationMasks[4].label());

    Episode empty = ep;
    empty.query_features = Matrix(0, 8);
    empty.query_aux_features = Matrix(0, 5);
    empty.query_labels.clear();
    empty.query_ids.clear();
    CHECK(code_of([&] { evaluate_method(empty, Method::Ours, {}); }) == ErrorCode::EmptyQuerySet);
}

TEST_CASE("masked logits") {
    PredictionBreakdown b{{0.5, 0.2}, {0.1, 0.3}, {0.9, -0.4}, {}};
    const HyperParams hp{.alpha = 2.0, .beta = 0.25};
    CHECK(masked_logits(b, hp, {true, false, false}) == b.p1);
    CHECK(masked_logits(b, hp, {false, true, false}) == b.p2);
    CHECK(masked_logits(b, hp, {false, false, true}) == b.p3);
    const auto all = masked_logits(b, hp, {});
    CHECK(all[0] == doctest::Approx(0.5 + 2.0 * (0.25 * 0.1 + 0.75 * 0.9)));
    const auto no_p1 = masked_logits(b, hp, {false, true, true});
    CHECK(no_p1[1] == doctest::Approx(2.0 * (0.25 * 0.3 - 0.75 * 0.4)));
}

TEST_CASE("method names round trip") {
    for (Method m : kAllMethods) CHECK(parse_method(method_name(m)) == m);
    CHECK_FALSE(parse_method("bogus").has_value());
}
