#include "cfsl/optimizer.hpp"

#include <cmath>

namespace cfsl {

OptimizerState OptimizerState::for_param(const Matrix& param, AdamWConfig config) {
    return OptimizerState{Matrix(param.rows(), param.cols()), Matrix(param.rows(), param.cols()), 0,
                          config};
}

std::pair<Matrix, OptimizerState> adamw_step(const Matrix& param, const Matrix& grad,
                                             const OptimizerState& state) {
    if (param.rows() != grad.rows() || param.cols() != grad.cols() ||
        state.first_moment.rows() != param.rows() || state.first_moment.cols() != param.cols() ||
        state.second_moment.rows() != param.rows() || state.second_moment.cols() != param.cols()) {
        throw Error(ErrorCode::ShapeMismatch, "adamw parameter, gradient and moment shapes differ");
    }
    const AdamWConfig& c = state.config;
    OptimizerState next = state;
    next.step = state.step + 1;
    const double t = static_cast<double>(next.step);
    const double bias1 = 1.0 - std::pow(c.beta1, t);
    const double bias2 = 1.0 - std::pow(c.beta2, t);

    Matrix out = param;
    auto p = out.data();
    auto g = grad.data();
    auto m = next.first_moment.data();
    auto v = next.second_moment.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
        const double m_hat = m[i] / bias1;
        const double v_hat = v[i] / bias2;
        p[i] *= 1.0 - c.lr * c.weight_decay;
        p[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
    return {std::move(out), std::move(next)};
}

} // namespace cfsl
