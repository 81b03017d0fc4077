#include "dbp/projection.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dbp/errors.hpp"

namespace dbp {

namespace {

// Visits every (pixel, detector bin, weight) triple of the linear-interpolation
// splat at one angle. Projector and back projector share this footprint, which
// makes one the exact transpose of the other.
template <class Visit>
void for_each_footprint(const ProjectionGeometry& g, double angle, Visit&& visit) {
    const double theta = canonical_angle(angle);
    const double cs = std::cos(theta);
    const double sn = std::sin(theta);
    const double cx = g.center();
    const double cy = g.center();
    const double off = g.detector_offset();
    const double last = static_cast<double>(g.channels) - 1.0;
    const std::size_t n = g.image_size;

    for (std::size_t r = 0; r < n; ++r) {
        const double dy = static_cast<double>(r) - cy;
        for (std::size_t c = 0; c < n; ++c) {
            const double t = (static_cast<double>(c) - cx) * cs + dy * sn + off;
            if (!(t >= 0.0 && t <= last)) continue;
            const double lo = std::floor(t);
            const double frac = t - lo;
            const auto bin = static_cast<std::size_t>(lo);
            const std::size_t pixel = r * n + c;
            visit(pixel, bin, 1.0 - frac);
            if (frac > 0.0) visit(pixel, bin + 1, frac);
        }
    }
}

void check_image(const Image& image, const ProjectionGeometry& g) {
    g.validate();
    if (image.size() != g.image_size) {
        throw InvalidInput("image size " + std::to_string(image.size()) +
                           " does not match geometry size " + std::to_string(g.image_size));
    }
    if (!image.all_finite()) throw InvalidInput("image contains non-finite values");
}

void check_sinogram(const Sinogram& sino, const ProjectionGeometry& g) {
    g.validate();
    if (sino.channels() != g.channels) {
        throw InvalidInput("sinogram has " + std::to_string(sino.channels()) +
                           " channels, geometry expects " + std::to_string(g.channels));
    }
}

}  // namespace

double ProjectionGeometry::detector_coordinate(std::size_t row, std::size_t col, double angle) const {
    const double theta = canonical_angle(angle);
    return (static_cast<double>(col) - center()) * std::cos(theta) +
           (static_cast<double>(row) - center()) * std::sin(theta) + detector_offset();
}

void ProjectionGeometry::validate() const {
    if (image_size == 0 || channels == 0) throw InvalidInput("geometry sizes must be positive");
}

double canonical_angle(double angle) {
    if (!std::isfinite(angle)) throw InvalidInput("angle is not finite");
    double a = std::fmod(angle, std::numbers::pi);
    if (a < 0.0) a += std::numbers::pi;
    if (a >= std::numbers::pi) a = 0.0;
    return a;
}

std::vector<double> uniform_angles(std::size_t views) {
    if (views == 0) throw InvalidInput("view count must be positive");
    std::vector<double> angles(views);
    for (std::size_t j = 0; j < views; ++j) {
        angles[j] = static_cast<double>(j) * std::numbers::pi / static_cast<double>(views);
    }
    return angles;
}

std::vector<double> project_view(const Image& image, double angle, const ProjectionGeometry& geometry) {
    check_image(image, geometry);
    std::vector<double> view(geometry.channels, 0.0);
    const auto pixels = image.data();
    for_each_footprint(geometry, angle, [&](std::size_t pixel, std::size_t bin, double w) {
        view[bin] += w * pixels[pixel];
    });
    return view;
}

Sinogram radon(const Image& image, std::span<const double> angles, const ProjectionGeometry& geometry) {
    Sinogram sino(geometry.channels, std::vector<double>(angles.begin(), angles.end()));
    for (std::size_t j = 0; j < angles.size(); ++j) {
        sino.set_view(j, project_view(image, angles[j], geometry));
    }
    return sino;
}

Image back_project_view(std::span<const double> view, double angle, const ProjectionGeometry& geometry) {
    geometry.validate();
    if (view.size() != geometry.channels) {
        throw InvalidInput("view length " + std::to_string(view.size()) + " does not match " +
                           std::to_string(geometry.channels) + " detector channels");
    }
    if (!std::all_of(view.begin(), view.end(), [](double v) { return std::isfinite(v); })) {
        throw InvalidInput("view contains non-finite values");
    }
    Image out(geometry.image_size);
    auto pixels = out.data();
    for_each_footprint(geometry, angle, [&](std::size_t pixel, std::size_t bin, double w) {
        pixels[pixel] += w * view[bin];
    });
    return out;
}

BpTensor build_bp_tensor(const Sinogram& sino, const ProjectionGeometry& geometry) {
    check_sinogram(sino, geometry);
    const auto angles = sino.angles();
    BpTensor tensor(geometry.image_size, std::vector<double>(angles.begin(), angles.end()));
    for (std::size_t j = 0; j < sino.views(); ++j) {
        const Image slab = back_project_view(sino.view(j), angles[j], geometry);
        std::copy(slab.data().begin(), slab.data().end(), tensor.slab(j).begin());
    }
    return tensor;
}

Image back_project(const Sinogram& sino, const ProjectionGeometry& geometry) {
    check_sinogram(sino, geometry);
    Image sum(geometry.image_size);
    auto acc = sum.data();
    for (std::size_t j = 0; j < sino.views(); ++j) {
        const Image slab = back_project_view(sino.view(j), sino.angles()[j], geometry);
        const auto values = slab.data();
        for (std::size_t p = 0; p < acc.size(); ++p) acc[p] += values[p];
    }
    return sum;
}

double ram_lak_tap(long offset) {
    if (offset == 0) return 0.25;
    if (offset % 2 == 0) return 0.0;
    const double k = static_cast<double>(offset);
    return -1.0 / (std::numbers::pi * std::numbers::pi * k * k);
}

Sinogram ramp_filter(const Sinogram& sino) {
    const std::size_t nc = sino.channels();
    const long span = static_cast<long>(nc) - 1;
    std::vector<double> taps(2 * nc - 1);
    for (long d = -span; d <= span; ++d) taps[static_cast<std::size_t>(d + span)] = ram_lak_tap(d);

    Sinogram out = sino;
    for (std::size_t j = 0; j < sino.views(); ++j) {
        const std::vector<double> in = sino.view(j);
        std::vector<double> filtered(nc, 0.0);
        for (std::size_t i = 0; i < nc; ++i) {
            double acc = 0.0;
            for (std::size_t k = 0; k < nc; ++k) {
                acc += taps[static_cast<std::size_t>(static_cast<long>(i) - static_cast<long>(k) + span)] * in[k];
            }
            filtered[i] = acc;
        }
        out.set_view(j, filtered);
    }
    return out;
}

Image fbp_unclamped(const Sinogram& sino, const ProjectionGeometry& geometry) {
    Image image = back_project(ramp_filter(sino), geometry);
    const double scale = std::numbers::pi / static_cast<double>(sino.views());
    for (double& v : image.data()) v *= scale;
    return image;
}

Image fbp(const Sinogram& sino, const ProjectionGeometry& geometry) {
    Image image = fbp_unclamped(sino, geometry);
    for (double& v : image.data()) v = std::clamp(v, 0.0, 1.0);
    return image;
}

}  // namespace dbp
