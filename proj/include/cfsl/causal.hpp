#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace cfsl::causal {

// Cardinalities of U (confounder), X (example), Z (representation), Y (label).
struct Cards {
    std::size_t u = 1;
    std::size_t x = 1;
    std::size_t z = 1;
    std::size_t y = 1;

    friend bool operator==(const Cards&, const Cards&) = default;
};

// Discrete SCM over U -> X, U -> Y, X -> Z, Z -> Y. Tables are flattened
// row-major with the conditioned-on variables leading:
//   p_x_given_u[u * |X| + x], p_z_given_x[x * |Z| + z],
//   p_y_given_zu[(z * |U| + u) * |Y| + y].
struct DiscreteScm {
    Cards cards;
    std::vector<double> p_u;
    std::vector<double> p_x_given_u;
    std::vector<double> p_z_given_x;
    std::vector<double> p_y_given_zu;

    double px_u(std::size_t u, std::size_t x) const { return p_x_given_u[u * cards.x + x]; }
    double pz_x(std::size_t x, std::size_t z) const { return p_z_given_x[x * cards.z + z]; }
    double py_zu(std::size_t z, std::size_t u, std::size_t y) const {
        return p_y_given_zu[(z * cards.u + u) * cards.y + y];
    }
};

// Throws InvalidTables on wrong sizes, negative entries or rows not summing
// to 1 within 1e-12.
void validate(const DiscreteScm& scm);

// P(u, x, z, y) indexed [((u * |X| + x) * |Z| + z) * |Y| + y].
struct Joint {
    Cards cards;
    std::vector<double> p;

    double at(std::size_t u, std::size_t x, std::size_t z, std::size_t y) const {
        return p[((u * cards.x + x) * cards.z + z) * cards.y + y];
    }
};

Joint observational_joint(const DiscreteScm& scm);

// Observable marginal P(x, z, y) with U summed out; what an estimator may see.
struct ObservedJoint {
    Cards cards;  // u is carried for bookkeeping only
    std::vector<double> p;

    double at(std::size_t x, std::size_t z, std::size_t y) const {
        return p[(x * cards.z + z) * cards.y + y];
    }
};

ObservedJoint marginalize_confounder(const Joint& joint);

std::vector<double> marginal_x(const ObservedJoint& obs);
// P(y | x); throws PositivityViolation when P(x) = 0.
std::vector<double> conditional_y_given_x(const ObservedJoint& obs, std::size_t x);
// P(z | x) from the observational joint.
std::vector<double> conditional_z_given_x(const ObservedJoint& obs, std::size_t x);

// P(y | do(x)) by graph mutilation: X's mechanism replaced with a point mass.
std::vector<double> interventional_truth(const DiscreteScm& scm, std::size_t x);
// P(z | do(x)) by mutilation.
std::vector<double> interventional_z(const DiscreteScm& scm, std::size_t x);
// P(y | do(z)) by mutilation: Z's mechanism replaced with a point mass.
std::vector<double> interventional_y_given_do_z(const DiscreteScm& scm, std::size_t z);

enum class PositivityPolicy { Strict, SkipZeroMass };

struct FrontdoorResult {
    std::vector<double> p_y;
    // Inner (x', z) terms dropped under SkipZeroMass.
    std::size_t skipped_terms = 0;
};

// sum_z P(z|x) sum_x' P(y|x',z) P(x'), computed from the observed joint only.
FrontdoorResult frontdoor_estimate(const ObservedJoint& obs, std::size_t x,
                                   PositivityPolicy policy = PositivityPolicy::Strict);
FrontdoorResult frontdoor_estimate(const DiscreteScm& scm, std::size_t x,
                                   PositivityPolicy policy = PositivityPolicy::Strict);

// sum_x' P(x') P(y|x',z) from the observed joint.
FrontdoorResult backdoor_z_estimate(const ObservedJoint& obs, std::size_t z,
                                    PositivityPolicy policy = PositivityPolicy::Strict);

struct PartialEffectsReport {
    // max |P(z|do(x)) - P(z|x)| over all x, z
    double max_dev_z_do_x = 0.0;
    // max |P(y|do(z)) - sum_x' P(x') P(y|x',z)| over all z, y
    double max_dev_y_do_z = 0.0;
    std::size_t skipped_terms = 0;

    bool holds(double tol) const { return max_dev_z_do_x <= tol && max_dev_y_do_z <= tol; }
};

PartialEffectsReport partial_effects(const DiscreteScm& scm,
                                     PositivityPolicy policy = PositivityPolicy::Strict);

// Every conditional row is a symmetric Dirichlet(concentration) draw.
DiscreteScm random_scm(const Cards& cards, std::uint64_t seed, double concentration = 1.0);

// Binary confounder driving both X and Y strongly; the observational
// conditional P(y|x) is far from P(y|do(x)) in total variation.
DiscreteScm confounded_witness_scm();

double total_variation(const std::vector<double>& a, const std::vector<double>& b);
double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b);

std::string scm_to_json(const DiscreteScm& scm);
DiscreteScm scm_from_json(const std::string& text);

} // namespace cfsl::causal
