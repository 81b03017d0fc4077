#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "dbp/errors.hpp"
#include "dbp/phantom.hpp"
#include "dbp/metrics.hpp"
#include "dbp/projection.hpp"
#include "dbp/random.hpp"

using namespace dbp;

namespace {

Image random_image(std::size_t n, Rng& rng) {
    Image img(n);
    for (double& v : img.data()) v = rng.uniform(-1.0, 1.0);
    return img;
}

std::vector<double> random_vector(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double rel_err(double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
    return std::abs(a - b) / scale;
}

// Splat written out from the definition, independent of the library's loops.
std::vector<double> splat_oracle(const Image& img, double theta) {
    const std::size_t n = img.size();
    const double c0 = (n - 1) / 2.0;
    std::vector<double> out(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            const double t = (c - c0) * std::cos(theta) + (r - c0) * std::sin(theta) + c0;
            if (t < 0.0 || t > n - 1.0) continue;
            const double lo = std::floor(t);
            const double frac = t - lo;
            const auto k = static_cast<std::size_t>(lo);
            out[k] += (1.0 - frac) * img.at(r, c);
            if (frac > 0.0) out[k + 1] += frac * img.at(r, c);
        }
    }
    return out;
}

// Linear interpolation of a view at continuous detector coordinate t; 0 off the detector.
double interp(std::span<const double> view, double t) {
    if (t < 0.0 || t > view.size() - 1.0) return 0.0;
    const double lo = std::floor(t);
    const double frac = t - lo;
    const auto k = static_cast<std::size_t>(lo);
    return k + 1 < view.size() ? (1.0 - frac) * view[k] + frac * view[k + 1] : view[k];
}

Image rotate90(const Image& in) {
    const std::size_t n = in.size();
    Image out(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out.at(i, j) = in.at(j, n - 1 - i);
    return out;
}

}  // namespace

TEST_CASE("adjoint identity over random triples") {
    Rng rng(11);
    for (std::size_t n : {8u, 16u, 64u}) {
        const auto g = ProjectionGeometry::square(n);
        double worst = 0.0;
        for (int trial = 0; trial < 120; ++trial) {
            const Image x = random_image(n, rng);
            const auto v = random_vector(n, rng);
            const double theta = rng.uniform(0.0, std::numbers::pi);
            const double lhs = dot(project_view(x, theta, g), v);
            const double rhs = dot(x.data(), back_project_view(v, theta, g).data());
            worst = std::max(worst, rel_err(lhs, rhs));
        }
        INFO("n = " << n);
        CHECK(worst < 1e-10);
    }
}

TEST_CASE("back projector is the dense transpose at n = 8") {
    const std::size_t n = 8;
    const auto g = ProjectionGeometry::square(n);
    for (double theta : {0.0, 0.3, std::numbers::pi / 4, 1.9, 3.0}) {
        // P[k][p]: bin k response to unit pixel p.  B[p][k]: pixel p response to unit bin k.
        std::vector<std::vector<double>> p_mat(n, std::vector<double>(n * n));
        for (std::size_t p = 0; p < n * n; ++p) {
            Image e(n);
            e.data()[p] = 1.0;
            const auto col = project_view(e, theta, g);
            for (std::size_t k = 0; k < n; ++k) p_mat[k][p] = col[k];
        }
        double worst = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            std::vector<double> e(n, 0.0);
            e[k] = 1.0;
            const Image row = back_project_view(e, theta, g);
            for (std::size_t p = 0; p < n * n; ++p) worst = std::max(worst, std::abs(row.data()[p] - p_mat[k][p]));
        }
        CHECK(worst < 1e-12);
    }
}

TEST_CASE("forward projection matches a brute-force splat") {
    Rng rng(5);
    const auto g = ProjectionGeometry::square(16);
    for (int trial = 0; trial < 20; ++trial) {
        const Image x = random_image(16, rng);
        const double theta = rng.uniform(0.0, std::numbers::pi);
        const auto got = project_view(x, theta, g);
        const auto want = splat_oracle(x, theta);
        for (std::size_t k = 0; k < 16; ++k) CHECK(got[k] == doctest::Approx(want[k]).epsilon(1e-12));
    }
}

TEST_CASE("zero image and unit pixel examples") {
    const auto g64 = ProjectionGeometry::square(64);
    const auto zero = project_view(Image(64), 1.0, g64);
    CHECK(std::all_of(zero.begin(), zero.end(), [](double v) { return v == 0.0; }));

    const std::size_t n = 9;
    const auto g = ProjectionGeometry::square(n);
    Image pixel(n);
    pixel.at(4, 4) = 1.0;
    const auto view = project_view(pixel, 0.0, g);
    for (std::size_t k = 0; k < n; ++k) CHECK(view[k] == (k == 4 ? 1.0 : 0.0));

    std::vector<double> unit(n, 0.0);
    unit[4] = 1.0;
    const Image smear = back_project_view(unit, 0.0, g);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) CHECK(smear.at(r, c) == (c == 4 ? 1.0 : 0.0));
    CHECK(back_project_view(std::vector<double>(n, 0.0), 0.7, g) == Image(n));
}

TEST_CASE("constant image at angle 0 gives n times c per bin") {
    const std::size_t n = 64;
    const double c = 0.37;
    Image img(n);
    std::fill(img.data().begin(), img.data().end(), c);
    const auto view = project_view(img, 0.0, ProjectionGeometry::square(n));
    const auto oracle = splat_oracle(img, 0.0);
    for (std::size_t k = 1; k + 1 < n; ++k) {
        CHECK(view[k] == doctest::Approx(oracle[k]).epsilon(1e-12));
        CHECK(view[k] == doctest::Approx(n * c).epsilon(1e-12));
    }
}

TEST_CASE("radon is linear") {
    Rng rng(21);
    const auto g = ProjectionGeometry::square(16);
    const auto angles = uniform_angles(16);
    const Image x = random_image(16, rng);
    const Image w = random_image(16, rng);
    const double a = 1.7, b = -0.6;
    Image combo(16);
    for (std::size_t i = 0; i < combo.pixel_count(); ++i) combo.data()[i] = a * x.data()[i] + b * w.data()[i];
    const Sinogram sx = radon(x, angles, g), sw = radon(w, angles, g), sc = radon(combo, angles, g);
    double worst = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < sc.data().size(); ++i) {
        worst = std::max(worst, std::abs(sc.data()[i] - (a * sx.data()[i] + b * sw.data()[i])));
        scale = std::max(scale, std::abs(sc.data()[i]));
    }
    CHECK(worst / scale < 1e-10);

    const Sinogram zero = radon(Image(64), angles, ProjectionGeometry::square(64));
    CHECK(zero.channels() == 64);
    CHECK(zero.views() == 16);
    CHECK(std::all_of(zero.data().begin(), zero.data().end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("masked constant image conserves mass in every view") {
    const std::size_t n = 64;
    Image img(n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) img.at(r, c) = in_support(n, r, c) ? 0.8 : 0.0;
    double mass = 0.0;
    for (double v : img.data()) mass += v;
    Rng rng(3);
    auto angles = uniform_angles(16);
    for (int i = 0; i < 30; ++i) angles.push_back(rng.uniform(0.0, std::numbers::pi));
    for (double theta : angles) {
        const auto view = project_view(img, theta, ProjectionGeometry::square(n));
        double sum = 0.0;
        for (double v : view) sum += v;
        CHECK(rel_err(sum, mass) < 1e-8);
    }
}

TEST_CASE("90 degree rotation shifts the view angle") {
    Rng rng(8);
    const std::size_t n = 16;
    const auto g = ProjectionGeometry::square(n);
    const Image x = random_image(n, rng);
    const Image xr = rotate90(x);
    for (int i = 0; i < 10; ++i) {
        const double theta = rng.uniform(0.0, std::numbers::pi);
        const auto got = project_view(xr, theta, g);
        std::vector<double> want;
        if (theta + std::numbers::pi / 2 < std::numbers::pi) {
            want = project_view(x, theta + std::numbers::pi / 2, g);
        } else {
            want = project_view(x, theta - std::numbers::pi / 2, g);
            std::reverse(want.begin(), want.end());
        }
        for (std::size_t k = 0; k < n; ++k) CHECK(got[k] == doctest::Approx(want[k]).epsilon(1e-9).scale(1.0));
    }
}

TEST_CASE("back-projection tensor slabs") {
    const std::size_t n = 64;
    const auto g = ProjectionGeometry::square(n);
    PhantomSpec spec;
    spec.seed = 4;
    const Image phantom = generate_phantom(spec);
    const Sinogram sino = radon(phantom, uniform_angles(16), g);
    const BpTensor z = build_bp_tensor(sino, g);
    REQUIRE(z.views() == 16);

    Image total(n);
    for (std::size_t j = 0; j < 16; ++j) {
        const auto slab = z.slab(j);
        const auto col = sino.view(j);
        const Image direct = back_project_view(col, sino.angles()[j], g);
        CHECK(std::equal(slab.begin(), slab.end(), direct.data().begin()));
        for (std::size_t p = 0; p < total.pixel_count(); ++p) total.data()[p] += slab[p];

        // Independent interpolation of the view at each pixel's detector coordinate.
        const double theta = sino.angles()[j];
        const double c0 = (n - 1) / 2.0;
        double worst = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < n; ++c) {
                const double t = (c - c0) * std::cos(theta) + (r - c0) * std::sin(theta) + c0;
                worst = std::max(worst, std::abs(slab[r * n + c] - interp(col, t)));
            }
        }
        CHECK(worst < 1e-10);
    }
    const Image bp = back_project(sino, g);
    for (std::size_t p = 0; p < total.pixel_count(); ++p) CHECK(bp.data()[p] == doctest::Approx(total.data()[p]));

    // At 0, 45, 90 and 135 degrees the ray direction (-sin, cos) has integer pixel steps,
    // so slab values repeat exactly along it.
    struct Step {
        std::size_t j;
        long dr, dc;
    };
    for (const Step s : {Step{0, 1, 0}, Step{4, 1, -1}, Step{8, 0, 1}, Step{12, 1, 1}}) {
        const auto slab = z.slab(s.j);
        double worst = 0.0;
        for (long r = 8; r < 56; ++r) {
            for (long c = 8; c < 56; ++c) {
                const long r2 = r + s.dr * 4, c2 = c + s.dc * 4;
                worst = std::max(worst, std::abs(slab[r * n + c] - slab[r2 * n + c2]));
            }
        }
        INFO("view " << s.j);
        CHECK(worst < 1e-8);
    }
    CHECK(build_bp_tensor(radon(Image(n), uniform_angles(16), g), g) == BpTensor(n, uniform_angles(16)));
}

TEST_CASE("Ram-Lak taps, impulse and DC response") {
    CHECK(ram_lak_tap(0) == 0.25);
    CHECK(ram_lak_tap(2) == 0.0);
    CHECK(ram_lak_tap(-4) == 0.0);
    CHECK(ram_lak_tap(1) == doctest::Approx(-1.0 / (std::numbers::pi * std::numbers::pi)).epsilon(1e-15));
    CHECK(ram_lak_tap(-3) == doctest::Approx(-1.0 / (9.0 * std::numbers::pi * std::numbers::pi)).epsilon(1e-15));

    const std::size_t nc = 64;
    auto h = [](long k) {
        if (k == 0) return 0.25;
        if (k % 2 == 0) return 0.0;
        return -1.0 / (std::numbers::pi * std::numbers::pi * double(k) * double(k));
    };
    Sinogram impulse(nc, {0.0});
    impulse.at(32, 0) = 1.0;
    const Sinogram fi = ramp_filter(impulse);
    for (std::size_t i = 0; i < nc; ++i) CHECK(fi.at(i, 0) == doctest::Approx(h(long(i) - 32)).epsilon(1e-14));

    Sinogram dc(nc, {0.0});
    for (std::size_t i = 0; i < nc; ++i) dc.at(i, 0) = 2.0;
    const Sinogram fd = ramp_filter(dc);
    for (std::size_t i = 0; i < nc; ++i) {
        double expect = 0.0;
        for (std::size_t k = 0; k < nc; ++k) expect += 2.0 * h(long(i) - long(k));
        CHECK(fd.at(i, 0) == doctest::Approx(expect).epsilon(1e-12).scale(1.0));
        if (i >= 16 && i < 48) CHECK(std::abs(fd.at(i, 0)) < 0.02 * 2.0);
    }
    const Sinogram zero = ramp_filter(Sinogram(nc, uniform_angles(4)));
    CHECK(std::all_of(zero.data().begin(), zero.data().end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("FBP recovers a phantom from dense views") {
    const auto g = ProjectionGeometry::square(64);
    CHECK(fbp(Sinogram(64, uniform_angles(16)), g) == Image(64));
    for (std::uint64_t seed : {200u, 201u}) {
        PhantomSpec spec;
        spec.seed = seed;
        const Image x = generate_phantom(spec);
        const Image dense = fbp(radon(x, uniform_angles(180), g), g);
        const Image sparse = fbp(radon(x, uniform_angles(16), g), g);
        CHECK(psnr_in_support(dense, x) >= 25.0);
        CHECK(psnr_in_support(dense, x) > psnr_in_support(sparse, x));
        CHECK(std::all_of(dense.data().begin(), dense.data().end(), [](double v) { return v >= 0.0 && v <= 1.0; }));
    }
}

TEST_CASE("invalid inputs are rejected") {
    const auto g = ProjectionGeometry::square(8);
    Image bad(8);
    bad.at(1, 1) = std::nan("");
    CHECK_THROWS_AS(project_view(bad, 0.0, g), InvalidInput);
    CHECK_THROWS_AS(radon(Image(8), std::vector<double>{}, g), InvalidInput);
    CHECK_THROWS_AS(radon(Image(8), std::vector<double>{0.5, 0.2}, g), InvalidInput);
    CHECK_THROWS_AS(back_project_view(std::vector<double>(7, 0.0), 0.0, g), InvalidInput);
    CHECK_THROWS_AS(project_view(Image(16), 0.0, g), InvalidInput);
}

TEST_CASE("uniform angles and canonical reduction") {
    const auto a = uniform_angles(16);
    REQUIRE(a.size() == 16);
    for (std::size_t j = 0; j < 16; ++j) CHECK(a[j] == doctest::Approx(j * std::numbers::pi / 16).epsilon(1e-15));
    CHECK(canonical_angle(std::numbers::pi + 0.25) == doctest::Approx(0.25));
    CHECK(canonical_angle(-0.25) == doctest::Approx(std::numbers::pi - 0.25));
    CHECK(canonical_angle(0.5) == 0.5);
}
