#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dbp/image.hpp"

namespace dbp {

/// Parameters of a Voronoi multi-grain phantom.
struct PhantomSpec {
    std::size_t size = 64;
    std::size_t grain_min = 6;
    std::size_t grain_max = 14;
    double intensity_min = 0.2;
    double intensity_max = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// One Voronoi site: position in pixel coordinates and the intensity of its cell.
struct Grain {
    double row = 0.0;
    double col = 0.0;
    double intensity = 0.0;
};

/// Pixel centers within (n-1)/2 of the grid center. Every such pixel projects
/// inside the n-channel detector at all angles.
bool in_support(std::size_t size, std::size_t row, std::size_t col);

/// Nearest-site rasterization inside the support; ties go to the lowest index.
Image rasterize_grains(std::size_t size, std::span<const Grain> grains);

/// Draws grain count, sites (uniform in the support disc) and intensities, in that order.
std::vector<Grain> draw_grains(const PhantomSpec& spec);

Image generate_phantom(const PhantomSpec& spec);

/// Image k uses seed base_seed + k.
std::vector<Image> generate_dataset(const PhantomSpec& spec_template, std::size_t count,
                                    std::uint64_t base_seed);

}  // namespace dbp
