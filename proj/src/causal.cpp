#include "cfsl/causal.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "cfsl/error.hpp"
#include "cfsl/numerics.hpp"
#include "cfsl/rng.hpp"

namespace cfsl::causal {

namespace {

constexpr double kRowTolerance = 1e-12;

void check_table(const std::vector<double>& table, std::size_t rows, std::size_t cols,
                 const char* name) {
    if (table.size() != rows * cols) {
        throw Error(ErrorCode::InvalidTables, std::string(name) + " has " +
                                                  std::to_string(table.size()) + " entries, expected " +
                                                  std::to_string(rows * cols));
    }
    for (std::size_t r = 0; r < rows; ++r) {
        const std::span<const double> row(table.data() + r * cols, cols);
        for (double v : row) {
            if (!std::isfinite(v) || v < 0.0) {
                throw Error(ErrorCode::InvalidTables, std::string(name) + " has a negative or non-finite entry");
            }
        }
        const double s = compensated_sum(row);
        if (std::abs(s - 1.0) > kRowTolerance) {
            throw Error(ErrorCode::InvalidTables, std::string(name) + " row " + std::to_string(r) +
                                                      " sums to " + std::to_string(s));
        }
    }
}

std::vector<double> point_mass(std::size_t length, std::size_t at) {
    std::vector<double> v(length, 0.0);
    v[at] = 1.0;
    return v;
}

// Sums the joint over everything except Y; the result is a distribution over y.
std::vector<double> marginal_y(const Joint& joint) {
    const Cards& k = joint.cards;
    std::vector<std::vector<double>> terms(k.y);
    for (std::size_t u = 0; u < k.u; ++u)
        for (std::size_t x = 0; x < k.x; ++x)
            for (std::size_t z = 0; z < k.z; ++z)
                for (std::size_t y = 0; y < k.y; ++y) terms[y].push_back(joint.at(u, x, z, y));
    std::vector<double> out(k.y);
    for (std::size_t y = 0; y < k.y; ++y) out[y] = compensated_sum(terms[y]);
    return out;
}

std::vector<double> marginal_z(const Joint& joint) {
    const Cards& k = joint.cards;
    std::vector<std::vector<double>> terms(k.z);
    for (std::size_t u = 0; u < k.u; ++u)
        for (std::size_t x = 0; x < k.x; ++x)
            for (std::size_t z = 0; z < k.z; ++z)
                for (std::size_t y = 0; y < k.y; ++y) terms[z].push_back(joint.at(u, x, z, y));
    std::vector<double> out(k.z);
    for (std::size_t z = 0; z < k.z; ++z) out[z] = compensated_sum(terms[z]);
    return out;
}

void check_index(std::size_t value, std::size_t card, const char* var) {
    if (value >= card) {
        throw Error(ErrorCode::IndexOutOfRange, std::string(var) + " = " + std::to_string(value) +
                                                    " with cardinality " + std::to_string(card));
    }
}

// P(x', z) for every pair, plus P(x').
struct PairMasses {
    std::vector<double> xz;  // [x * |Z| + z]
    std::vector<double> x;
};

PairMasses pair_masses(const ObservedJoint& obs) {
    const Cards& k = obs.cards;
    PairMasses m{std::vector<double>(k.x * k.z), std::vector<double>(k.x)};
    for (std::size_t x = 0; x < k.x; ++x) {
        std::vector<double> row;
        for (std::size_t z = 0; z < k.z; ++z) {
            std::vector<double> cell;
            for (std::size_t y = 0; y < k.y; ++y) cell.push_back(obs.at(x, z, y));
            m.xz[x * k.z + z] = compensated_sum(cell);
            row.push_back(m.xz[x * k.z + z]);
        }
        m.x[x] = compensated_sum(row);
    }
    return m;
}

// sum_x' P(x') P(y | x', z) for one z; zero-mass (x', z) cells are handled by policy.
std::vector<double> average_over_x(const ObservedJoint& obs, const PairMasses& masses, std::size_t z,
                                   PositivityPolicy policy, std::size_t& skipped) {
    const Cards& k = obs.cards;
    std::vector<std::vector<double>> terms(k.y);
    for (std::size_t xp = 0; xp < k.x; ++xp) {
        const double pxz = masses.xz[xp * k.z + z];
        if (pxz <= 0.0) {
            if (masses.x[xp] <= 0.0) {
                continue;  // P(x') = 0: the term carries no weight
            }
            if (policy == PositivityPolicy::Strict) {
                throw Error(ErrorCode::PositivityViolation,
                            "P(x'=" + std::to_string(xp) + ", z=" + std::to_string(z) + ") = 0");
            }
            ++skipped;
            continue;
        }
        for (std::size_t y = 0; y < k.y; ++y) {
            terms[y].push_back(masses.x[xp] * obs.at(xp, z, y) / pxz);
        }
    }
    std::vector<double> out(k.y);
    for (std::size_t y = 0; y < k.y; ++y) out[y] = compensated_sum(terms[y]);
    return out;
}

void strict_positivity(const PairMasses& masses, const Cards& k) {
    for (std::size_t x = 0; x < k.x; ++x)
        for (std::size_t z = 0; z < k.z; ++z)
            if (masses.xz[x * k.z + z] <= 0.0)
                throw Error(ErrorCode::PositivityViolation,
                            "P(x=" + std::to_string(x) + ", z=" + std::to_string(z) + ") = 0");
}

} // namespace

void validate(const DiscreteScm& scm) {
    const Cards& k = scm.cards;
    if (k.u == 0 || k.x == 0 || k.z == 0 || k.y == 0) {
        throw Error(ErrorCode::InvalidTables, "every cardinality must be at least 1");
    }
    check_table(scm.p_u, 1, k.u, "P(U)");
    check_table(scm.p_x_given_u, k.u, k.x, "P(X|U)");
    check_table(scm.p_z_given_x, k.x, k.z, "P(Z|X)");
    check_table(scm.p_y_given_zu, k.z * k.u, k.y, "P(Y|Z,U)");
}

Joint observational_joint(const DiscreteScm& scm) {
    validate(scm);
    const Cards& k = scm.cards;
    Joint j{k, std::vector<double>(k.u * k.x * k.z * k.y)};
    for (std::size_t u = 0; u < k.u; ++u)
        for (std::size_t x = 0; x < k.x; ++x)
            for (std::size_t z = 0; z < k.z; ++z)
                for (std::size_t y = 0; y < k.y; ++y)
                    j.p[((u * k.x + x) * k.z + z) * k.y + y] =
                        scm.p_u[u] * scm.px_u(u, x) * scm.pz_x(x, z) * scm.py_zu(z, u, y);
    return j;
}

ObservedJoint marginalize_confounder(const Joint& joint) {
    const Cards& k = joint.cards;
    ObservedJoint obs{k, std::vector<double>(k.x * k.z * k.y)};
    std::vector<double> terms(k.u);
    for (std::size_t x = 0; x < k.x; ++x)
        for (std::size_t z = 0; z < k.z; ++z)
            for (std::size_t y = 0; y < k.y; ++y) {
                for (std::size_t u = 0; u < k.u; ++u) terms[u] = joint.at(u, x, z, y);
                obs.p[(x * k.z + z) * k.y + y] = compensated_sum(terms);
            }
    return obs;
}

std::vector<double> marginal_x(const ObservedJoint& obs) { return pair_masses(obs).x; }

std::vector<double> conditional_y_given_x(const ObservedJoint& obs, std::size_t x) {
    const Cards& k = obs.cards;
    check_index(x, k.x, "x");
    const double px = marginal_x(obs)[x];
    if (px <= 0.0) {
        throw Error(ErrorCode::PositivityViolation, "P(x=" + std::to_string(x) + ") = 0");
    }
    std::vector<double> out(k.y);
    for (std::size_t y = 0; y < k.y; ++y) {
        std::vector<double> terms;
        for (std::size_t z = 0; z < k.z; ++z) terms.push_back(obs.at(x, z, y));
        out[y] = compensated_sum(terms) / px;
    }
    return out;
}

std::vector<double> conditional_z_given_x(const ObservedJoint& obs, std::size_t x) {
    const Cards& k = obs.cards;
    check_index(x, k.x, "x");
    const PairMasses m = pair_masses(obs);
    if (m.x[x] <= 0.0) {
        throw Error(ErrorCode::PositivityViolation, "P(x=" + std::to_string(x) + ") = 0");
    }
    std::vector<double> out(k.z);
    for (std::size_t z = 0; z < k.z; ++z) out[z] = m.xz[x * k.z + z] / m.x[x];
    return out;
}

namespace {

DiscreteScm mutilate_x(const DiscreteScm& scm, std::size_t x) {
    DiscreteScm m = scm;
    for (std::size_t u = 0; u < scm.cards.u; ++u) {
        const auto row = point_mass(scm.cards.x, x);
        std::copy(row.begin(), row.end(), m.p_x_given_u.begin() + static_cast<std::ptrdiff_t>(u * scm.cards.x));
    }
    return m;
}

DiscreteScm mutilate_z(const DiscreteScm& scm, std::size_t z) {
    DiscreteScm m = scm;
    for (std::size_t x = 0; x < scm.cards.x; ++x) {
        const auto row = point_mass(scm.cards.z, z);
        std::copy(row.begin(), row.end(), m.p_z_given_x.begin() + static_cast<std::ptrdiff_t>(x * scm.cards.z));
    }
    return m;
}

} // namespace

std::vector<double> interventional_truth(const DiscreteScm& scm, std::size_t x) {
    validate(scm);
    check_index(x, scm.cards.x, "x");
    return marginal_y(observational_joint(mutilate_x(scm, x)));
}

std::vector<double> interventional_z(const DiscreteScm& scm, std::size_t x) {
    validate(scm);
    check_index(x, scm.cards.x, "x");
    return marginal_z(observational_joint(mutilate_x(scm, x)));
}

std::vector<double> interventional_y_given_do_z(const DiscreteScm& scm, std::size_t z) {
    validate(scm);
    check_index(z, scm.cards.z, "z");
    return marginal_y(observational_joint(mutilate_z(scm, z)));
}

FrontdoorResult frontdoor_estimate(const ObservedJoint& obs, std::size_t x, PositivityPolicy policy) {
    const Cards& k = obs.cards;
    check_index(x, k.x, "x");
    const PairMasses masses = pair_masses(obs);
    if (masses.x[x] <= 0.0) {
        throw Error(ErrorCode::PositivityViolation, "P(x=" + std::to_string(x) + ") = 0");
    }
    if (policy == PositivityPolicy::Strict) {
        strict_positivity(masses, k);
    }
    FrontdoorResult result;
    std::vector<std::vector<double>> terms(k.y);
    for (std::size_t z = 0; z < k.z; ++z) {
        const double pz_x = masses.xz[x * k.z + z] / masses.x[x];
        if (pz_x == 0.0) {
            continue;
        }
        const auto inner = average_over_x(obs, masses, z, policy, result.skipped_terms);
        for (std::size_t y = 0; y < k.y; ++y) terms[y].push_back(pz_x * inner[y]);
    }
    result.p_y.resize(k.y);
    for (std::size_t y = 0; y < k.y; ++y) result.p_y[y] = compensated_sum(terms[y]);
    return result;
}

FrontdoorResult frontdoor_estimate(const DiscreteScm& scm, std::size_t x, PositivityPolicy policy) {
    return frontdoor_estimate(marginalize_confounder(observational_joint(scm)), x, policy);
}

FrontdoorResult backdoor_z_estimate(const ObservedJoint& obs, std::size_t z, PositivityPolicy policy) {
    check_index(z, obs.cards.z, "z");
    const PairMasses masses = pair_masses(obs);
    FrontdoorResult result;
    result.p_y = average_over_x(obs, masses, z, policy, result.skipped_terms);
    return result;
}

PartialEffectsReport partial_effects(const DiscreteScm& scm, PositivityPolicy policy) {
    const ObservedJoint obs = marginalize_confounder(observational_joint(scm));
    const Cards& k = scm.cards;
    PartialEffectsReport report;
    const auto px = marginal_x(obs);
    for (std::size_t x = 0; x < k.x; ++x) {
        if (px[x] <= 0.0) {
            continue;  // P(z|x) undefined; nothing to compare
        }
        report.max_dev_z_do_x = std::max(
            report.max_dev_z_do_x, max_abs_diff(interventional_z(scm, x), conditional_z_given_x(obs, x)));
    }
    for (std::size_t z = 0; z < k.z; ++z) {
        const auto est = backdoor_z_estimate(obs, z, policy);
        report.skipped_terms += est.skipped_terms;
        report.max_dev_y_do_z =
            std::max(report.max_dev_y_do_z, max_abs_diff(interventional_y_given_do_z(scm, z), est.p_y));
    }
    return report;
}

DiscreteScm random_scm(const Cards& cards, std::uint64_t seed, double concentration) {
    if (cards.u == 0 || cards.x == 0 || cards.z == 0 || cards.y == 0) {
        throw Error(ErrorCode::InvalidArgument, "every cardinality must be at least 1");
    }
    if (!(concentration > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "concentration must be positive");
    }
    CounterRng rng(seed, 0x5C3);
    DiscreteScm scm;
    scm.cards = cards;
    auto fill = [&](std::vector<double>& table, std::size_t rows, std::size_t cols) {
        table.clear();
        for (std::size_t r = 0; r < rows; ++r) {
            const auto row = dirichlet(cols, concentration, rng);
            table.insert(table.end(), row.begin(), row.end());
        }
    };
    fill(scm.p_u, 1, cards.u);
    fill(scm.p_x_given_u, cards.u, cards.x);
    fill(scm.p_z_given_x, cards.x, cards.z);
    fill(scm.p_y_given_zu, cards.z * cards.u, cards.y);
    return scm;
}

DiscreteScm confounded_witness_scm() {
    DiscreteScm scm;
    scm.cards = {2, 2, 2, 2};
    scm.p_u = {0.5, 0.5};
    // X mostly copies U.
    scm.p_x_given_u = {0.9, 0.1,
                       0.1, 0.9};
    scm.p_z_given_x = {0.8, 0.2,
                       0.2, 0.8};
    // P(y=1 | z, u) = 0.1 + 0.2 z + 0.6 u: the confounder dominates Y.
    scm.p_y_given_zu = {0.9, 0.1,   // z0 u0
                        0.3, 0.7,   // z0 u1
                        0.7, 0.3,   // z1 u0
                        0.1, 0.9};  // z1 u1
    return scm;
}

double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        throw Error(ErrorCode::ShapeMismatch, "distributions differ in support size");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return 0.5 * s;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        throw Error(ErrorCode::ShapeMismatch, "vectors differ in length");
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

std::string scm_to_json(const DiscreteScm& scm) {
    nlohmann::ordered_json j;
    j["cards"] = {scm.cards.u, scm.cards.x, scm.cards.z, scm.cards.y};
    j["p_u"] = scm.p_u;
    j["p_x_given_u"] = scm.p_x_given_u;
    j["p_z_given_x"] = scm.p_z_given_x;
    j["p_y_given_zu"] = scm.p_y_given_zu;
    return j.dump(1);
}

DiscreteScm scm_from_json(const std::string& text) {
    DiscreteScm scm;
    try {
        const auto j = nlohmann::json::parse(text);
        const auto cards = j.at("cards").get<std::vector<std::size_t>>();
        if (cards.size() != 4) {
            throw Error(ErrorCode::InvalidTables, "cards must list |U|, |X|, |Z|, |Y|");
        }
        scm.cards = {cards[0], cards[1], cards[2], cards[3]};
        scm.p_u = j.at("p_u").get<std::vector<double>>();
        scm.p_x_given_u = j.at("p_x_given_u").get<std::vector<double>>();
        scm.p_z_given_x = j.at("p_z_given_x").get<std::vector<double>>();
        scm.p_y_given_zu = j.at("p_y_given_zu").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidTables, e.what());
    }
    validate(scm);
    return scm;
}

} // namespace cfsl::causal
