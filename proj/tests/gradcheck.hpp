#pragma once

// Central finite-difference checks of every layer against its analytic backward pass.
// Each returns the worst relative error seen over all checked entries.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "dbp/nn/layers.hpp"
#include "dbp/nn/model.hpp"
#include "dbp/random.hpp"

namespace gradcheck {

using dbp::nn::Tensor4;

// The floor keeps exactly-zero gradients (conv biases feeding batchnorm) from dividing
// rounding noise of the central difference, about 1e-11 here, by zero.
inline double rel_err(double analytic, double numeric, double floor = 1e-6) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

inline void fill(std::span<double> v, dbp::Rng& rng, double lo = -1.0, double hi = 1.0) {
    for (double& x : v) x = rng.uniform(lo, hi);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Worst error of d/dp <r, f(p)> over all entries of p, given the analytic gradient.
inline double check_entries(std::span<double> p, std::span<const double> analytic,
                            const std::function<double()>& objective, double step = 1e-4) {
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double saved = p[i];
        p[i] = saved + step;
        const double up = objective();
        p[i] = saved - step;
        const double down = objective();
        p[i] = saved;
        worst = std::max(worst, rel_err(analytic[i], (up - down) / (2.0 * step)));
    }
    return worst;
}

// 2 x 3 x 6 x 6 input, 4 output channels: input, weight and bias gradients.
inline double conv(std::uint64_t seed = 1) {
    dbp::Rng rng(seed);
    Tensor4 x({2, 3, 6, 6});
    fill(x.data(), rng);
    dbp::nn::ConvLayer layer(4, 3);
    fill(layer.weights, rng);
    fill(layer.bias, rng);
    Tensor4 r({2, 4, 6, 6});
    fill(r.data(), rng);
    const auto objective = [&] { return dot(r.data(), dbp::nn::conv2d_forward(x, layer).data()); };
    const auto grads = dbp::nn::conv2d_backward(x, layer, r);
    double worst = check_entries(x.data(), grads.grad_input.data(), objective);
    worst = std::max(worst, check_entries(layer.weights, grads.grad_weights, objective));
    worst = std::max(worst, check_entries(layer.bias, grads.grad_bias, objective));
    return worst;
}

// 4 x 2 x 3 x 3 input in train mode: input, gamma and beta gradients.
inline double batchnorm(std::uint64_t seed = 2) {
    dbp::Rng rng(seed);
    Tensor4 x({4, 2, 3, 3});
    fill(x.data(), rng);
    dbp::nn::BatchNormLayer layer(2);
    fill(layer.gamma, rng, 0.5, 1.5);
    fill(layer.beta, rng);
    Tensor4 r({4, 2, 3, 3});
    fill(r.data(), rng);
    const auto objective = [&] {
        dbp::nn::BatchNormLayer copy = layer;
        return dot(r.data(), dbp::nn::batchnorm_forward(x, copy, dbp::nn::Mode::Train).data());
    };
    dbp::nn::BatchNormLayer traced = layer;
    dbp::nn::batchnorm_forward(x, traced, dbp::nn::Mode::Train);
    const auto grads = dbp::nn::batchnorm_backward(x, traced, r);
    double worst = check_entries(x.data(), grads.grad_input.data(), objective);
    worst = std::max(worst, check_entries(layer.gamma, grads.grad_gamma, objective));
    worst = std::max(worst, check_entries(layer.beta, grads.grad_beta, objective));
    return worst;
}

// Inputs kept at least 1e-2 away from the kink.
inline double relu(std::uint64_t seed = 3) {
    dbp::Rng rng(seed);
    Tensor4 x({2, 2, 4, 4});
    for (double& v : x.data()) {
        const double mag = rng.uniform(0.02, 1.0);
        v = rng.uniform() < 0.5 ? -mag : mag;
    }
    Tensor4 r(x.shape());
    fill(r.data(), rng);
    const auto objective = [&] { return dot(r.data(), dbp::nn::relu(x).data()); };
    const auto g = dbp::nn::relu_backward(x, r);
    return check_entries(x.data(), g.data(), objective, 1e-4);
}

inline double mse(std::uint64_t seed = 4) {
    dbp::Rng rng(seed);
    Tensor4 pred({3, 1, 8, 8}), target({3, 1, 8, 8});
    fill(pred.data(), rng);
    fill(target.data(), rng);
    const auto objective = [&] { return dbp::nn::mse_loss(pred, target).value; };
    const auto loss = dbp::nn::mse_loss(pred, target);
    return check_entries(pred.data(), loss.grad.data(), objective);
}

// Depth-2 model of width 3 on 2 x 4 x 5 x 5 input: every parameter gradient from
// backward(), and a Jacobian-vector product along a random input direction.
struct CompositeResult {
    double parameters = 0.0;
    double jvp = 0.0;
};

inline CompositeResult composite(std::uint64_t seed = 5) {
    dbp::Rng rng(seed);
    dbp::nn::Model model = dbp::nn::Model::initialized({4, 3, 2}, seed);
    for (auto& block : model.blocks()) {
        fill(block.bn.gamma, rng, 0.5, 1.5);
        fill(block.bn.beta, rng, -0.2, 0.2);
    }
    for (auto p : model.parameters()) {
        for (double& v : p) v += rng.uniform(-0.05, 0.05);
    }
    Tensor4 x({2, 4, 5, 5});
    fill(x.data(), rng);
    Tensor4 r({2, 1, 5, 5});
    fill(r.data(), rng);

    const auto objective = [&] {
        dbp::nn::Model copy = model;
        return dot(r.data(), dbp::nn::network_forward(x, copy, dbp::nn::Mode::Train).data());
    };

    dbp::nn::Model traced = model;
    dbp::nn::ForwardTrace trace;
    dbp::nn::forward_train(x, traced, trace);
    const auto grads = dbp::nn::backward(traced, trace, r);

    CompositeResult out;
    auto params = model.parameters();
    for (std::size_t k = 0; k < params.size(); ++k) {
        out.parameters = std::max(out.parameters, check_entries(params[k], grads[k], objective));
    }

    // Directional derivative of the output along dx versus (f(x + h dx) - f(x - h dx)) / 2h.
    Tensor4 dx(x.shape());
    fill(dx.data(), rng);
    const double h = 1e-5;
    Tensor4 xp = x, xm = x;
    for (std::size_t i = 0; i < x.data().size(); ++i) {
        xp.data()[i] += h * dx.data()[i];
        xm.data()[i] -= h * dx.data()[i];
    }
    dbp::nn::Model mp = model, mm = model;
    const Tensor4 fp = dbp::nn::network_forward(xp, mp, dbp::nn::Mode::Train);
    const Tensor4 fm = dbp::nn::network_forward(xm, mm, dbp::nn::Mode::Train);
    // Row i of the Jacobian is the input gradient of output entry i.
    for (std::size_t i = 0; i < fp.data().size(); ++i) {
        Tensor4 e(fp.shape());
        e.data()[i] = 1.0;
        dbp::nn::Model t2 = model;
        dbp::nn::ForwardTrace tr;
        dbp::nn::forward_train(x, t2, tr);
        Tensor4 row;
        dbp::nn::backward(t2, tr, e, &row);
        const double analytic = dot(row.data(), dx.data());
        const double numeric = (fp.data()[i] - fm.data()[i]) / (2.0 * h);
        out.jvp = std::max(out.jvp, rel_err(analytic, numeric));
    }
    return out;
}

}  // namespace gradcheck
