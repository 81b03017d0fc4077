#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace dbp::nn {

struct Shape4 {
    std::size_t batch = 0;
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    std::size_t count() const noexcept { return batch * channels * height * width; }
    std::size_t plane() const noexcept { return height * width; }
    std::string str() const;

    friend bool operator==(const Shape4&, const Shape4&) = default;
};

/// (batch, channels, height, width) feature maps, width fastest.
class Tensor4 {
public:
    Tensor4() = default;
    explicit Tensor4(Shape4 shape);
    Tensor4(Shape4 shape, std::vector<double> data);

    const Shape4& shape() const noexcept { return shape_; }

    double& at(std::size_t b, std::size_t c, std::size_t y, std::size_t x) {
        return data_[((b * shape_.channels + c) * shape_.height + y) * shape_.width + x];
    }
    double at(std::size_t b, std::size_t c, std::size_t y, std::size_t x) const {
        return data_[((b * shape_.channels + c) * shape_.height + y) * shape_.width + x];
    }

    /// Contiguous (height x width) plane of one sample and channel.
    std::span<double> plane(std::size_t b, std::size_t c) noexcept {
        return std::span<double>(data_).subspan((b * shape_.channels + c) * shape_.plane(), shape_.plane());
    }
    std::span<const double> plane(std::size_t b, std::size_t c) const noexcept {
        return std::span<const double>(data_).subspan((b * shape_.channels + c) * shape_.plane(),
                                                      shape_.plane());
    }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    bool all_finite() const noexcept;

    friend bool operator==(const Tensor4&, const Tensor4&) = default;

private:
    Shape4 shape_;
    std::vector<double> data_;
};

}  // namespace dbp::nn
