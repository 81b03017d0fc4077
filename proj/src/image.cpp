#include "dbp/image.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dbp/errors.hpp"

namespace dbp {

namespace {

bool finite(std::span<const double> values) {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

Image::Image(std::size_t size) : size_(size), data_(size * size, 0.0) {
    if (size == 0) throw InvalidInput("image size must be positive");
}

Image::Image(std::size_t size, std::vector<double> data) : size_(size), data_(std::move(data)) {
    if (size == 0) throw InvalidInput("image size must be positive");
    if (data_.size() != size * size) {
        throw InvalidInput("image data length " + std::to_string(data_.size()) +
                           " does not match size " + std::to_string(size) + "^2");
    }
}

bool Image::all_finite() const noexcept { return finite(data_); }

void validate_angles(std::span<const double> angles) {
    if (angles.empty()) throw InvalidInput("angle list is empty");
    for (std::size_t j = 0; j < angles.size(); ++j) {
        const double a = angles[j];
        if (!std::isfinite(a) || a < 0.0 || a >= std::numbers::pi) {
            throw InvalidInput("angle " + std::to_string(j) + " outside [0, pi)");
        }
        if (j > 0 && !(a > angles[j - 1])) {
            throw InvalidInput("angles must be strictly increasing (index " + std::to_string(j) + ")");
        }
    }
}

Sinogram::Sinogram(std::size_t channels, std::vector<double> angles)
    : Sinogram(channels, angles, std::vector<double>(channels * angles.size(), 0.0)) {}

Sinogram::Sinogram(std::size_t channels, std::vector<double> angles, std::vector<double> data)
    : channels_(channels), angles_(std::move(angles)), data_(std::move(data)) {
    if (channels == 0) throw InvalidInput("sinogram channel count must be positive");
    validate_angles(angles_);
    if (data_.size() != channels_ * angles_.size()) {
        throw InvalidInput("sinogram data length does not match channels x views");
    }
    if (!finite(data_)) throw InvalidInput("sinogram contains non-finite values");
}

std::vector<double> Sinogram::view(std::size_t j) const {
    std::vector<double> out(channels_);
    for (std::size_t i = 0; i < channels_; ++i) out[i] = at(i, j);
    return out;
}

void Sinogram::set_view(std::size_t j, std::span<const double> values) {
    if (values.size() != channels_) throw InvalidInput("view length does not match channel count");
    for (std::size_t i = 0; i < channels_; ++i) at(i, j) = values[i];
}

BpTensor::BpTensor(std::size_t size, std::vector<double> angles)
    : size_(size), angles_(std::move(angles)), data_(size * size * angles_.size(), 0.0) {
    if (size == 0) throw InvalidInput("tensor size must be positive");
    validate_angles(angles_);
}

}  // namespace dbp
