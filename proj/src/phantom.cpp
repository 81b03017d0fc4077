#include "dbp/phantom.hpp"

#include <cmath>
#include <limits>

#include "dbp/errors.hpp"
#include "dbp/random.hpp"

namespace dbp {

namespace {

double support_radius(std::size_t size) { return (static_cast<double>(size) - 1.0) / 2.0; }

}  // namespace

void PhantomSpec::validate() const {
    if (size < 8) throw InvalidInput("phantom size must be at least 8");
    if (grain_min < 2) throw InvalidInput("grain_min must be at least 2");
    if (grain_min > grain_max) throw InvalidInput("grain_min exceeds grain_max");
    if (!(intensity_min >= 0.0 && intensity_max <= 1.0)) {
        throw InvalidInput("intensity range must lie within [0, 1]");
    }
    if (!(intensity_min < intensity_max)) throw InvalidInput("intensity range is empty");
}

bool in_support(std::size_t size, std::size_t row, std::size_t col) {
    const double c = support_radius(size);
    const double dy = static_cast<double>(row) - c;
    const double dx = static_cast<double>(col) - c;
    return dx * dx + dy * dy <= c * c;
}

Image rasterize_grains(std::size_t size, std::span<const Grain> grains) {
    if (grains.empty()) throw InvalidInput("at least one grain is required");
    Image image(size);
    for (std::size_t r = 0; r < size; ++r) {
        for (std::size_t c = 0; c < size; ++c) {
            if (!in_support(size, r, c)) continue;
            double best = std::numeric_limits<double>::infinity();
            std::size_t owner = 0;
            for (std::size_t g = 0; g < grains.size(); ++g) {
                const double dy = static_cast<double>(r) - grains[g].row;
                const double dx = static_cast<double>(c) - grains[g].col;
                const double d2 = dx * dx + dy * dy;
                if (d2 < best) {
                    best = d2;
                    owner = g;
                }
            }
            image.at(r, c) = grains[owner].intensity;
        }
    }
    return image;
}

std::vector<Grain> draw_grains(const PhantomSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const std::size_t count =
        spec.grain_min + static_cast<std::size_t>(rng.below(spec.grain_max - spec.grain_min + 1));
    const double center = support_radius(spec.size);
    const double radius = center;

    std::vector<Grain> grains(count);
    for (Grain& g : grains) {
        double dx, dy;
        do {
            dx = rng.uniform(-radius, radius);
            dy = rng.uniform(-radius, radius);
        } while (dx * dx + dy * dy > radius * radius);
        g.row = center + dy;
        g.col = center + dx;
    }
    for (Grain& g : grains) g.intensity = rng.uniform(spec.intensity_min, spec.intensity_max);
    return grains;
}

Image generate_phantom(const PhantomSpec& spec) {
    const std::vector<Grain> grains = draw_grains(spec);
    return rasterize_grains(spec.size, grains);
}

std::vector<Image> generate_dataset(const PhantomSpec& spec_template, std::size_t count,
                                    std::uint64_t base_seed) {
    if (count == 0) throw InvalidInput("dataset count must be at least 1");
    std::vector<Image> images;
    images.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        PhantomSpec spec = spec_template;
        spec.seed = base_seed + k;
        images.push_back(generate_phantom(spec));
    }
    return images;
}

}  // namespace dbp
