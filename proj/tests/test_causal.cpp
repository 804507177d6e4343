#include <doctest.h>

#include <chrono>
#include <cmath>
#include <numeric>

#include "cfsl/causal.hpp"
#include "cfsl/error.hpp"
#include "test_util.hpp"

using namespace cfsl::causal;
using cfsl::ErrorCode;
using cfsl::testing::code_of;

namespace {

// P(y | do(x)) by enumerating every (u, z) assignment of the mutilated model.
std::vector<double> enumerate_do_x(const DiscreteScm& m, std::size_t x) {
    std::vector<double> out(m.cards.y, 0.0);
    for (std::size_t u = 0; u < m.cards.u; ++u)
        for (std::size_t z = 0; z < m.cards.z; ++z)
            for (std::size_t y = 0; y < m.cards.y; ++y) out[y] += m.p_u[u] * m.pz_x(x, z) * m.py_zu(z, u, y);
    return out;
}

// P(y | x) by enumeration of the unmutilated model.
std::vector<double> enumerate_y_given_x(const DiscreteScm& m, std::size_t x) {
    std::vector<double> out(m.cards.y, 0.0);
    double px = 0;
    for (std::size_t u = 0; u < m.cards.u; ++u) {
        px += m.p_u[u] * m.px_u(u, x);
        for (std::size_t z = 0; z < m.cards.z; ++z)
            for (std::size_t y = 0; y < m.cards.y; ++y)
                out[y] += m.p_u[u] * m.px_u(u, x) * m.pz_x(x, z) * m.py_zu(z, u, y);
    }
    for (double& v : out) v /= px;
    return out;
}

Cards cards_for(std::uint64_t seed) {
    return {1 + seed % 6, 1 + (seed / 6) % 6, 1 + (seed / 36) % 6, 1 + (seed / 7) % 6};
}

} // namespace

TEST_CASE("random_scm is deterministic and valid") {
    const Cards c{2, 2, 2, 2};
    const auto a = random_scm(c, 5);
    const auto b = random_scm(c, 5);
    CHECK(a.p_u == b.p_u);
    CHECK(a.p_y_given_zu == b.p_y_given_zu);
    CHECK_FALSE(random_scm(c, 6).p_u == a.p_u);
    for (const auto* t : {&a.p_u, &a.p_x_given_u, &a.p_z_given_x, &a.p_y_given_zu}) {
        for (double v : *t) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
    }
    for (std::uint64_t s = 0; s < 100; ++s) CHECK_NOTHROW(validate(random_scm(cards_for(s), s, 0.5)));
}

TEST_CASE("validate rejects broken tables") {
    auto m = random_scm({2, 2, 2, 2}, 1);
    m.p_u[0] += 1e-9;
    CHECK(code_of([&] { validate(m); }) == ErrorCode::InvalidTables);
    m = random_scm({2, 2, 2, 2}, 1);
    m.p_z_given_x.pop_back();
    CHECK(code_of([&] { validate(m); }) == ErrorCode::InvalidTables);
    m = random_scm({2, 2, 2, 2}, 1);
    m.p_x_given_u[0] = -0.1;
    m.p_x_given_u[1] = 1.1;
    CHECK(code_of([&] { validate(m); }) == ErrorCode::InvalidTables);
}

TEST_CASE("joint sums to one and marginals match direct summation") {
    for (std::uint64_t s = 0; s < 30; ++s) {
        const auto m = random_scm(cards_for(s + 3), s);
        const Joint j = observational_joint(m);
        CHECK(std::abs(std::accumulate(j.p.begin(), j.p.end(), 0.0) - 1.0) <= 1e-12);
        const ObservedJoint obs = marginalize_confounder(j);
        const auto px = marginal_x(obs);
        for (std::size_t x = 0; x < m.cards.x; ++x) {
            double direct = 0;
            for (std::size_t u = 0; u < m.cards.u; ++u) direct += m.p_u[u] * m.px_u(u, x);
            CHECK(std::abs(px[x] - direct) <= 1e-14);
            // Z depends on X only, so its observational conditional is the table row
            const auto pz = conditional_z_given_x(obs, x);
            for (std::size_t z = 0; z < m.cards.z; ++z) CHECK(std::abs(pz[z] - m.pz_x(x, z)) <= 1e-12);
            const auto py = conditional_y_given_x(obs, x);
            const auto oracle = enumerate_y_given_x(m, x);
            for (std::size_t y = 0; y < m.cards.y; ++y) CHECK(std::abs(py[y] - oracle[y]) <= 1e-12);
        }
    }
}

TEST_CASE("no confounder: joint factorizes and do(x) equals conditioning") {
    const auto m = random_scm({1, 3, 4, 2}, 17);
    const Joint j = observational_joint(m);
    for (std::size_t x = 0; x < 3; ++x)
        for (std::size_t z = 0; z < 4; ++z)
            for (std::size_t y = 0; y < 2; ++y)
                CHECK(std::abs(j.at(0, x, z, y) - m.px_u(0, x) * m.pz_x(x, z) * m.py_zu(z, 0, y)) <= 1e-15);
    const ObservedJoint obs = marginalize_confounder(j);
    for (std::size_t x = 0; x < 3; ++x) {
        const auto truth = interventional_truth(m, x);
        CHECK(max_abs_diff(truth, conditional_y_given_x(obs, x)) <= 1e-12);
        CHECK(max_abs_diff(frontdoor_estimate(m, x).p_y, truth) <= 1e-12);
    }
    for (std::size_t z = 0; z < 4; ++z) {
        std::vector<double> pyz(2);
        for (std::size_t y = 0; y < 2; ++y) pyz[y] = m.py_zu(z, 0, y);
        CHECK(max_abs_diff(interventional_y_given_do_z(m, z), pyz) <= 1e-12);
    }
}

TEST_CASE("deterministic chain gives a single atom") {
    DiscreteScm m;
    m.cards = {2, 2, 2, 2};
    m.p_u = {0, 1};
    m.p_x_given_u = {1, 0, 0, 1};
    m.p_z_given_x = {0, 1, 1, 0};
    m.p_y_given_zu = {1, 0, 1, 0, 0, 1, 0, 1};
    validate(m);
    const Joint j = observational_joint(m);
    std::size_t nonzero = 0;
    for (double v : j.p) nonzero += v != 0.0;
    CHECK(nonzero == 1);
    CHECK(j.at(1, 1, 0, 0) == 1.0);
}

TEST_CASE("u-independent outcome: do(x) is the mediated chain") {
    auto m = random_scm({3, 3, 3, 3}, 23);
    for (std::size_t z = 0; z < 3; ++z)
        for (std::size_t u = 1; u < 3; ++u)
            for (std::size_t y = 0; y < 3; ++y) m.p_y_given_zu[(z * 3 + u) * 3 + y] = m.py_zu(z, 0, y);
    for (std::size_t x = 0; x < 3; ++x) {
        std::vector<double> chain(3, 0.0);
        for (std::size_t z = 0; z < 3; ++z)
            for (std::size_t y = 0; y < 3; ++y) chain[y] += m.pz_x(x, z) * m.py_zu(z, 0, y);
        CHECK(max_abs_diff(interventional_truth(m, x), chain) <= 1e-15);
    }
}

TEST_CASE("interventional truth matches exhaustive enumeration") {
    for (std::uint64_t s = 0; s < 50; ++s) {
        const auto m = random_scm(cards_for(s), s + 1000);
        for (std::size_t x = 0; x < m.cards.x; ++x) {
            CHECK(max_abs_diff(interventional_truth(m, x), enumerate_do_x(m, x)) <= 1e-14);
        }
    }
}

TEST_CASE("front-door estimate equals truth on 100 seeded SCMs") {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const auto m = random_scm(cards_for(s), s);
        const ObservedJoint obs = marginalize_confounder(observational_joint(m));
        for (std::size_t x = 0; x < m.cards.x; ++x) {
            const auto est = frontdoor_estimate(obs, x);
            CHECK(est.skipped_terms == 0);
            worst = std::max(worst, max_abs_diff(est.p_y, enumerate_do_x(m, x)));
        }
    }
    CHECK(worst <= 1e-10);
    CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(10));
}

TEST_CASE("confounding witness") {
    const auto m = confounded_witness_scm();
    validate(m);
    const ObservedJoint obs = marginalize_confounder(observational_joint(m));
    double gap = 0;
    for (std::size_t x = 0; x < m.cards.x; ++x) {
        const auto truth = enumerate_do_x(m, x);
        gap = std::max(gap, total_variation(conditional_y_given_x(obs, x), truth));
        CHECK(max_abs_diff(frontdoor_estimate(obs, x).p_y, truth) <= 1e-10);
    }
    CHECK(gap >= 0.05);
    // hand-computed: P(y=1|x=1) = 0.8, P(y=1|do(x=1)) = 0.56
    CHECK(gap == doctest::Approx(0.24).epsilon(1e-12));
}

TEST_CASE("positivity handling") {
    auto m = random_scm({2, 2, 2, 2}, 31);
    // x = 0 never produces z = 1
    m.p_z_given_x = {1, 0, 0.3, 0.7};
    CHECK(code_of([&] { frontdoor_estimate(m, 1); }) == ErrorCode::PositivityViolation);
    const auto r = frontdoor_estimate(m, 1, PositivityPolicy::SkipZeroMass);
    CHECK(r.skipped_terms > 0);
    for (double v : r.p_y) CHECK(std::isfinite(v));
}

TEST_CASE("partial effects hold on 100 seeded SCMs") {
    for (std::uint64_t s = 0; s < 100; ++s) {
        const auto rep = partial_effects(random_scm(cards_for(s), s));
        CHECK(rep.holds(1e-10));
    }
    // |U| = 1: P(y|do(z)) = P(y|z)
    const auto m = random_scm({1, 3, 3, 3}, 4);
    const ObservedJoint obs = marginalize_confounder(observational_joint(m));
    for (std::size_t z = 0; z < 3; ++z) {
        std::vector<double> pyz(3, 0.0);
        double pz = 0;
        for (std::size_t x = 0; x < 3; ++x)
            for (std::size_t y = 0; y < 3; ++y) {
                pyz[y] += obs.at(x, z, y);
                pz += obs.at(x, z, y);
            }
        for (double& v : pyz) v /= pz;
        CHECK(max_abs_diff(interventional_y_given_do_z(m, z), pyz) <= 1e-12);
    }
}

TEST_CASE("deterministic Z = X: do(x) equals do(z = x)") {
    auto m = random_scm({3, 3, 3, 2}, 8);
    m.p_z_given_x = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    for (std::size_t x = 0; x < 3; ++x) {
        CHECK(max_abs_diff(interventional_truth(m, x), interventional_y_given_do_z(m, x)) <= 1e-15);
        std::vector<double> atom(3, 0.0);
        atom[x] = 1.0;
        CHECK(max_abs_diff(interventional_z(m, x), atom) <= 1e-15);
    }
}

TEST_CASE("JSON round trip") {
    const auto m = random_scm({2, 3, 4, 5}, 12);
    const auto back = scm_from_json(scm_to_json(m));
    CHECK(back.cards == m.cards);
    CHECK(back.p_u == m.p_u);
    CHECK(back.p_x_given_u == m.p_x_given_u);
    CHECK(back.p_z_given_x == m.p_z_given_x);
    CHECK(back.p_y_given_zu == m.p_y_given_zu);
}

TEST_CASE("distance helpers") {
    CHECK(total_variation({0.2, 0.8}, {0.5, 0.5}) == doctest::Approx(0.3));
    CHECK(max_abs_diff({0.2, 0.8}, {0.5, 0.4}) == doctest::Approx(0.4));
}
