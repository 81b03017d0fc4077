#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace dbp::nn {

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t step = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;

    /// Zeroed accumulators shaped like `params`.
    static AdamState for_parameters(std::span<const std::span<double>> params);
};

/// One bias-corrected Adam update. Throws NumericalError, leaving params and
/// state untouched, if any gradient entry is non-finite.
void adam_step(std::span<const std::span<double>> params, std::span<const std::vector<double>> grads,
               AdamState& state, double lr);

}  // namespace dbp::nn
