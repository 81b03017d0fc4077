#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dbp {

/// Square n x n grid of intensities, row-major, row index increasing downward.
class Image {
public:
    Image() = default;
    explicit Image(std::size_t size);
    Image(std::size_t size, std::vector<double> data);

    std::size_t size() const noexcept { return size_; }
    std::size_t pixel_count() const noexcept { return data_.size(); }

    double& at(std::size_t row, std::size_t col) { return data_[row * size_ + col]; }
    double at(std::size_t row, std::size_t col) const { return data_[row * size_ + col]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    bool all_finite() const noexcept;

    friend bool operator==(const Image&, const Image&) = default;

private:
    std::size_t size_ = 0;
    std::vector<double> data_;
};

/// channels x views line integrals. Column j holds the view taken at angles[j].
class Sinogram {
public:
    Sinogram() = default;
    Sinogram(std::size_t channels, std::vector<double> angles);
    Sinogram(std::size_t channels, std::vector<double> angles, std::vector<double> data);

    std::size_t channels() const noexcept { return channels_; }
    std::size_t views() const noexcept { return angles_.size(); }
    std::span<const double> angles() const noexcept { return angles_; }

    double& at(std::size_t channel, std::size_t view) { return data_[channel * views() + view]; }
    double at(std::size_t channel, std::size_t view) const { return data_[channel * views() + view]; }

    std::vector<double> view(std::size_t j) const;
    void set_view(std::size_t j, std::span<const double> values);

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    friend bool operator==(const Sinogram&, const Sinogram&) = default;

private:
    std::size_t channels_ = 0;
    std::vector<double> angles_;
    std::vector<double> data_;
};

/// Stack of single-view back projections: views() slabs of size x size.
class BpTensor {
public:
    BpTensor() = default;
    BpTensor(std::size_t size, std::vector<double> angles);

    std::size_t size() const noexcept { return size_; }
    std::size_t views() const noexcept { return angles_.size(); }
    std::span<const double> angles() const noexcept { return angles_; }

    std::span<double> slab(std::size_t j) noexcept {
        return std::span<double>(data_).subspan(j * size_ * size_, size_ * size_);
    }
    std::span<const double> slab(std::size_t j) const noexcept {
        return std::span<const double>(data_).subspan(j * size_ * size_, size_ * size_);
    }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    friend bool operator==(const BpTensor&, const BpTensor&) = default;

private:
    std::size_t size_ = 0;
    std::vector<double> angles_;
    std::vector<double> data_;
};

/// Checks that angles are finite, inside [0, pi) and strictly increasing.
void validate_angles(std::span<const double> angles);

}  // namespace dbp
