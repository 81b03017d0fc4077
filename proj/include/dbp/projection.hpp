#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dbp/image.hpp"

namespace dbp {

/// Parallel-beam geometry: unit detector pitch, rotation about the pixel-grid center.
struct ProjectionGeometry {
    std::size_t image_size = 64;
    std::size_t channels = 64;

    static ProjectionGeometry square(std::size_t n) { return {n, n}; }

    double center() const noexcept { return (static_cast<double>(image_size) - 1.0) / 2.0; }
    double detector_offset() const noexcept { return (static_cast<double>(channels) - 1.0) / 2.0; }

    /// Detector coordinate of pixel (row, col) for a view at `angle`.
    double detector_coordinate(std::size_t row, std::size_t col, double angle) const;

    void validate() const;
};

/// Reduces an angle into [0, pi). The detector is not flipped.
double canonical_angle(double angle);

/// theta_j = j * pi / views, j = 0..views-1.
std::vector<double> uniform_angles(std::size_t views);

std::vector<double> project_view(const Image& image, double angle, const ProjectionGeometry& geometry);

Sinogram radon(const Image& image, std::span<const double> angles, const ProjectionGeometry& geometry);

/// Exact adjoint of project_view: smears one view back along its rays.
Image back_project_view(std::span<const double> view, double angle, const ProjectionGeometry& geometry);

BpTensor build_bp_tensor(const Sinogram& sino, const ProjectionGeometry& geometry);

/// Unfiltered back projection of all views (sum of the tensor slabs).
Image back_project(const Sinogram& sino, const ProjectionGeometry& geometry);

/// Spatial Ram-Lak tap: 1/4 at 0, 0 at even offsets, -1/(pi^2 k^2) at odd offsets.
double ram_lak_tap(long offset);

Sinogram ramp_filter(const Sinogram& sino);

/// Filtered back projection before clamping. Linear in the sinogram.
Image fbp_unclamped(const Sinogram& sino, const ProjectionGeometry& geometry);

/// Filtered back projection clamped to [0, 1].
Image fbp(const Sinogram& sino, const ProjectionGeometry& geometry);

}  // namespace dbp
