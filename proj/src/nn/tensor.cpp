#include "dbp/nn/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "dbp/errors.hpp"

namespace dbp::nn {

std::string Shape4::str() const {
    return "(" + std::to_string(batch) + ", " + std::to_string(channels) + ", " + std::to_string(height) + ", " +
           std::to_string(width) + ")";
}

Tensor4::Tensor4(Shape4 shape) : shape_(shape), data_(shape.count(), 0.0) {}

Tensor4::Tensor4(Shape4 shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.count()) {
        throw InvalidInput("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                           shape_.str());
    }
}

bool Tensor4::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace dbp::nn
