#include "cfsl/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cfsl {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::ZeroRow: return "ZeroRow";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::UnsupportedDtype: return "UnsupportedDtype";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::SizeOverflow: return "SizeOverflow";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::BadManifest: return "BadManifest";
    case ErrorCode::UnknownItem: return "UnknownItem";
    case ErrorCode::InsufficientClasses: return "InsufficientClasses";
    case ErrorCode::InsufficientItems: return "InsufficientItems";
    case ErrorCode::ClassListMismatch: return "ClassListMismatch";
    case ErrorCode::EmptySupport: return "EmptySupport";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::EmptyQuerySet: return "EmptyQuerySet";
    case ErrorCode::InvalidTables: return "InvalidTables";
    case ErrorCode::PositivityViolation: return "PositivityViolation";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) {
        return {};
    }
    const std::size_t cols = rows.front().size();
    std::vector<double> data;
    data.reserve(rows.size() * cols);
    for (const auto& r : rows) {
        if (r.size() != cols) {
            throw Error(ErrorCode::ShapeMismatch, "ragged rows");
        }
        data.insert(data.end(), r.begin(), r.end());
    }
    return Matrix(rows.size(), cols, std::move(data));
}

bool Matrix::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorCode::ShapeMismatch, "dot of vectors with different lengths");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

double l2_norm(std::span<const double> v) {
    // Scaled to avoid overflow/underflow of the squares.
    double scale = 0.0;
    for (double x : v) {
        scale = std::max(scale, std::abs(x));
    }
    if (scale == 0.0) {
        return 0.0;
    }
    double acc = 0.0;
    for (double x : v) {
        const double t = x / scale;
        acc += t * t;
    }
    return scale * std::sqrt(acc);
}

double compensated_sum(std::span<const double> values) {
    double sum = 0.0;
    double c = 0.0;
    for (double v : values) {
        const double t = sum + v;
        if (std::abs(sum) >= std::abs(v)) {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    return sum + c;
}

std::vector<double> l2_normalize(std::span<const double> v) {
    const double n = l2_norm(v);
    if (!(n >= 1e-300)) {
        throw Error(ErrorCode::ZeroRow, "cannot normalize a zero vector");
    }
    std::vector<double> out(v.begin(), v.end());
    for (double& x : out) {
        x /= n;
    }
    return out;
}

Matrix l2_normalize_rows(const Matrix& m) {
    Matrix out = m;
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const double n = l2_norm(m.row(r));
        if (!(n >= 1e-300)) {
            throw Error(ErrorCode::ZeroRow, "row " + std::to_string(r) + " has zero norm");
        }
        for (double& x : out.row(r)) {
            x /= n;
        }
    }
    return out;
}

std::vector<double> times_transpose(std::span<const double> v, const Matrix& m) {
    if (v.size() != m.cols()) {
        throw Error(ErrorCode::ShapeMismatch,
                    "vector length " + std::to_string(v.size()) + " vs matrix cols " +
                        std::to_string(m.cols()));
    }
    std::vector<double> out(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        out[r] = dot(v, m.row(r));
    }
    return out;
}

Matrix select_rows(const Matrix& m, std::span<const std::size_t> indices) {
    Matrix out(indices.size(), m.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= m.rows()) {
            throw Error(ErrorCode::IndexOutOfRange, "row index " + std::to_string(indices[i]));
        }
        std::copy_n(m.row(indices[i]).begin(), m.cols(), out.row(i).begin());
    }
    return out;
}

std::vector<double> log_softmax(std::span<const double> logits) {
    if (logits.empty()) {
        return {};
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double acc = 0.0;
    for (double v : logits) {
        acc += std::exp(v - mx);
    }
    const double lse = mx + std::log(acc);
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = logits[i] - lse;
    }
    return out;
}

std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) {
        return {};
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        acc += out[i];
    }
    for (double& p : out) {
        p /= acc;
    }
    return out;
}

double cross_entropy(std::span<const double> logits, std::size_t label) {
    if (label >= logits.size()) {
        throw Error(ErrorCode::IndexOutOfRange,
                    "label " + std::to_string(label) + " with " + std::to_string(logits.size()) +
                        " logits");
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double acc = 0.0;
    for (double v : logits) {
        acc += std::exp(v - mx);
    }
    // -(l_y - mx - log(sum)); the max term contributes exp(0) = 1 so acc >= 1
    // and the result is never negative beyond rounding.
    return std::max(0.0, std::log(acc) - (logits[label] - mx));
}

std::size_t argmax(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) {
            best = i;
        }
    }
    return best;
}

} // namespace cfsl
