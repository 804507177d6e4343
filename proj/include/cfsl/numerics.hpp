#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cfsl/matrix.hpp"

namespace cfsl {

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

// Neumaier-compensated sum; used wherever exact-ish accumulation matters.
double compensated_sum(std::span<const double> values);

// Throws ZeroRow if any row norm is below 1e-300.
Matrix l2_normalize_rows(const Matrix& m);
std::vector<double> l2_normalize(std::span<const double> v);

// out = v * m^T, i.e. one dot product per row of m.
std::vector<double> times_transpose(std::span<const double> v, const Matrix& m);

// Rows of `m` picked by index, in the order given.
Matrix select_rows(const Matrix& m, std::span<const std::size_t> indices);

std::vector<double> softmax(std::span<const double> logits);
std::vector<double> log_softmax(std::span<const double> logits);
double cross_entropy(std::span<const double> logits, std::size_t label);

// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> v);

} // namespace cfsl
