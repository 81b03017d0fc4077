#include "dbp/nn/adam.hpp"

#include <cmath>
#include <string>

#include "dbp/errors.hpp"

namespace dbp::nn {

AdamState AdamState::for_parameters(std::span<const std::span<double>> params) {
    AdamState state;
    for (const auto& p : params) {
        state.first_moment.emplace_back(p.size(), 0.0);
        state.second_moment.emplace_back(p.size(), 0.0);
    }
    return state;
}

void adam_step(std::span<const std::span<double>> params, std::span<const std::vector<double>> grads,
               AdamState& state, double lr) {
    if (!(lr > 0.0)) throw InvalidInput("learning rate must be positive");
    if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
        params.size() != state.second_moment.size()) {
        throw InvalidInput("adam_step: parameter, gradient and state counts differ");
    }
    for (std::size_t t = 0; t < params.size(); ++t) {
        if (params[t].size() != grads[t].size() || params[t].size() != state.first_moment[t].size() ||
            params[t].size() != state.second_moment[t].size()) {
            throw InvalidInput("adam_step: shape mismatch in parameter tensor " + std::to_string(t));
        }
        for (std::size_t i = 0; i < grads[t].size(); ++i) {
            if (!std::isfinite(grads[t][i])) {
                throw NumericalError("adam_step: non-finite gradient in parameter tensor " + std::to_string(t) +
                                     " at index " + std::to_string(i));
            }
        }
    }

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(state.beta1, t);
    const double correction2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto& m = state.first_moment[p];
        auto& v = state.second_moment[p];
        const auto& g = grads[p];
        auto theta = params[p];
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            theta[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
    }
}

}  // namespace dbp::nn
