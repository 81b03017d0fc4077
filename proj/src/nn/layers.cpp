#include "dbp/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "../gemm.hpp"
#include "dbp/errors.hpp"

namespace dbp::nn {

namespace {

// Per-thread scratch reused across calls; training allocates nothing per step here.
struct Workspace {
    std::vector<double> cols;
    std::vector<double> product;
    std::vector<double> grad_cols;
    std::vector<double> weights_t;

    static double* sized(std::vector<double>& buf, std::size_t count) {
        if (buf.size() < count) buf.resize(count);
        return buf.data();
    }
};

Workspace& workspace() {
    thread_local Workspace ws;
    return ws;
}

// cols[(i*9 + dy*3 + dx) * N + b*HW + y*W + x] = in[b, i, y+dy-1, x+dx-1], zero outside.
double* im2col(const Tensor4& input, std::vector<double>& buffer) {
    const Shape4& s = input.shape();
    const std::size_t n = s.batch * s.plane();
    double* cols = Workspace::sized(buffer, s.channels * ConvLayer::kTaps * n);
    const auto h = static_cast<long>(s.height);
    const auto w = static_cast<long>(s.width);

    for (std::size_t i = 0; i < s.channels; ++i) {
        for (long dy = 0; dy < 3; ++dy) {
            for (long dx = 0; dx < 3; ++dx) {
                double* row = cols + ((i * 3 + dy) * 3 + dx) * n;
                for (std::size_t b = 0; b < s.batch; ++b) {
                    const auto src = input.plane(b, i);
                    double* dst = row + b * s.plane();
                    for (long y = 0; y < h; ++y) {
                        const long sy = y + dy - 1;
                        double* out = dst + y * w;
                        if (sy < 0 || sy >= h) {
                            std::fill(out, out + w, 0.0);
                            continue;
                        }
                        const double* in = src.data() + sy * w;
                        for (long x = 0; x < w; ++x) {
                            const long sx = x + dx - 1;
                            out[x] = (sx < 0 || sx >= w) ? 0.0 : in[sx];
                        }
                    }
                }
            }
        }
    }
    return cols;
}

// Scatter-add of im2col rows back into an input-shaped gradient.
void col2im(const double* cols, Tensor4& grad_input) {
    const Shape4& s = grad_input.shape();
    const std::size_t n = s.batch * s.plane();
    const auto h = static_cast<long>(s.height);
    const auto w = static_cast<long>(s.width);

    for (std::size_t i = 0; i < s.channels; ++i) {
        for (long dy = 0; dy < 3; ++dy) {
            for (long dx = 0; dx < 3; ++dx) {
                const double* row = cols + ((i * 3 + dy) * 3 + dx) * n;
                for (std::size_t b = 0; b < s.batch; ++b) {
                    auto dst = grad_input.plane(b, i);
                    const double* src = row + b * s.plane();
                    for (long y = 0; y < h; ++y) {
                        const long sy = y + dy - 1;
                        if (sy < 0 || sy >= h) continue;
                        for (long x = 0; x < w; ++x) {
                            const long sx = x + dx - 1;
                            if (sx < 0 || sx >= w) continue;
                            dst[sy * w + sx] += src[y * w + x];
                        }
                    }
                }
            }
        }
    }
}

void check_conv_input(const Tensor4& input, const ConvLayer& layer) {
    if (input.shape().channels != layer.in_channels) {
        throw InvalidInput("conv input has " + std::to_string(input.shape().channels) +
                           " channels, layer expects " + std::to_string(layer.in_channels));
    }
    if (layer.weights.size() != layer.out_channels * layer.in_channels * ConvLayer::kTaps ||
        layer.bias.size() != layer.out_channels) {
        throw InvalidInput("conv layer parameter sizes are inconsistent");
    }
}

void check_bn_input(const Shape4& s, const BatchNormLayer& layer) {
    if (s.channels != layer.channels) {
        throw InvalidInput("batch norm input has " + std::to_string(s.channels) + " channels, layer expects " +
                           std::to_string(layer.channels));
    }
}

double channel_count(const Shape4& s) { return static_cast<double>(s.batch * s.plane()); }

}  // namespace

ConvLayer::ConvLayer(std::size_t out_ch, std::size_t in_ch)
    : out_channels(out_ch), in_channels(in_ch), weights(out_ch * in_ch * kTaps, 0.0), bias(out_ch, 0.0) {
    if (out_ch == 0 || in_ch == 0) throw InvalidInput("conv channel counts must be positive");
}

Tensor4 conv2d_forward(const Tensor4& input, const ConvLayer& layer) {
    check_conv_input(input, layer);
    const Shape4& s = input.shape();
    const std::size_t n = s.batch * s.plane();
    const std::size_t k = layer.in_channels * ConvLayer::kTaps;

    Workspace& ws = workspace();
    const double* cols = im2col(input, ws.cols);
    double* product = Workspace::sized(ws.product, layer.out_channels * n);
    detail::gemm(layer.out_channels, n, k, layer.weights.data(), cols, product);

    Tensor4 out({s.batch, layer.out_channels, s.height, s.width});
    for (std::size_t b = 0; b < s.batch; ++b) {
        for (std::size_t o = 0; o < layer.out_channels; ++o) {
            const double* src = product + o * n + b * s.plane();
            auto dst = out.plane(b, o);
            for (std::size_t p = 0; p < s.plane(); ++p) dst[p] = src[p] + layer.bias[o];
        }
    }
    return out;
}

ConvGrads conv2d_backward(const Tensor4& input, const ConvLayer& layer, const Tensor4& grad_out,
                          bool want_grad_input) {
    check_conv_input(input, layer);
    const Shape4& s = input.shape();
    const Shape4 expected{s.batch, layer.out_channels, s.height, s.width};
    if (grad_out.shape() != expected) {
        throw InvalidInput("conv grad_out shape " + grad_out.shape().str() + " does not match " + expected.str());
    }
    const std::size_t n = s.batch * s.plane();
    const std::size_t k = layer.in_channels * ConvLayer::kTaps;
    const std::size_t out_ch = layer.out_channels;

    // grad_out rearranged to (out, batch * plane), the layout of the forward product.
    Workspace& ws = workspace();
    double* g = Workspace::sized(ws.product, out_ch * n);
    for (std::size_t b = 0; b < s.batch; ++b) {
        for (std::size_t o = 0; o < out_ch; ++o) {
            const auto src = grad_out.plane(b, o);
            std::copy(src.begin(), src.end(), g + o * n + b * s.plane());
        }
    }
    ConvGrads grads;
    grads.grad_bias.assign(out_ch, 0.0);
    for (std::size_t o = 0; o < out_ch; ++o) {
        double acc = 0.0;
        for (std::size_t q = 0; q < n; ++q) acc += g[o * n + q];
        grads.grad_bias[o] = acc;
    }

    const double* cols = im2col(input, ws.cols);
    grads.grad_weights.resize(out_ch * k);
    detail::gemm_bt(out_ch, k, n, g, cols, grads.grad_weights.data());

    if (want_grad_input) {
        double* w_t = Workspace::sized(ws.weights_t, k * out_ch);
        detail::transpose(out_ch, k, layer.weights.data(), w_t);
        double* grad_cols = Workspace::sized(ws.grad_cols, k * n);
        detail::gemm(k, n, out_ch, w_t, g, grad_cols);
        grads.grad_input = Tensor4(s);
        col2im(grad_cols, grads.grad_input);
    }
    return grads;
}

BatchNormLayer::BatchNormLayer(std::size_t ch)
    : channels(ch), gamma(ch, 1.0), beta(ch, 0.0), running_mean(ch, 0.0), running_var(ch, 1.0) {
    if (ch == 0) throw InvalidInput("batch norm channel count must be positive");
}

Tensor4 batchnorm_inference(const Tensor4& input, const BatchNormLayer& layer) {
    const Shape4& s = input.shape();
    check_bn_input(s, layer);
    Tensor4 out(s);
    for (std::size_t c = 0; c < s.channels; ++c) {
        const double inv_std = 1.0 / std::sqrt(layer.running_var[c] + layer.epsilon);
        for (std::size_t b = 0; b < s.batch; ++b) {
            const auto src = input.plane(b, c);
            auto dst = out.plane(b, c);
            for (std::size_t p = 0; p < s.plane(); ++p) {
                dst[p] = layer.gamma[c] * ((src[p] - layer.running_mean[c]) * inv_std) + layer.beta[c];
            }
        }
    }
    return out;
}

Tensor4 batchnorm_forward(const Tensor4& input, BatchNormLayer& layer, Mode mode) {
    if (mode == Mode::Eval) return batchnorm_inference(input, layer);

    const Shape4& s = input.shape();
    check_bn_input(s, layer);
    Tensor4 out(s);
    if (s.batch * s.plane() < 2) {
        throw InvalidInput("batch norm train mode needs at least 2 values per channel");
    }
    const double count = channel_count(s);
    BatchNormLayer::Cache cache{s, std::vector<double>(s.count()), std::vector<double>(s.channels)};

    for (std::size_t c = 0; c < s.channels; ++c) {
        double sum = 0.0;
        for (std::size_t b = 0; b < s.batch; ++b)
            for (double v : input.plane(b, c)) sum += v;
        const double mean = sum / count;

        double sq = 0.0;
        for (std::size_t b = 0; b < s.batch; ++b)
            for (double v : input.plane(b, c)) sq += (v - mean) * (v - mean);
        const double var = sq / count;
        const double inv_std = 1.0 / std::sqrt(var + layer.epsilon);
        cache.inv_std[c] = inv_std;

        for (std::size_t b = 0; b < s.batch; ++b) {
            const auto src = input.plane(b, c);
            auto dst = out.plane(b, c);
            double* norm = cache.normalized.data() + (b * s.channels + c) * s.plane();
            for (std::size_t p = 0; p < s.plane(); ++p) {
                norm[p] = (src[p] - mean) * inv_std;
                dst[p] = layer.gamma[c] * norm[p] + layer.beta[c];
            }
        }
        layer.running_mean[c] = (1.0 - layer.momentum) * layer.running_mean[c] + layer.momentum * mean;
        layer.running_var[c] = (1.0 - layer.momentum) * layer.running_var[c] + layer.momentum * var;
    }
    layer.cache = std::move(cache);
    return out;
}

BatchNormGrads batchnorm_backward(const Tensor4& input, const BatchNormLayer& layer, const Tensor4& grad_out) {
    if (!layer.cache) throw UsageError("batchnorm_backward called without a train-mode forward pass");
    const auto& cache = *layer.cache;
    const Shape4& s = input.shape();
    if (s != cache.shape || grad_out.shape() != s) {
        throw InvalidInput("batch norm backward shapes do not match the cached forward pass");
    }
    const double count = channel_count(s);

    BatchNormGrads grads{Tensor4(s), std::vector<double>(s.channels, 0.0), std::vector<double>(s.channels, 0.0)};
    for (std::size_t c = 0; c < s.channels; ++c) {
        double sum_g = 0.0;
        double sum_gx = 0.0;
        for (std::size_t b = 0; b < s.batch; ++b) {
            const auto g = grad_out.plane(b, c);
            const double* norm = cache.normalized.data() + (b * s.channels + c) * s.plane();
            for (std::size_t p = 0; p < s.plane(); ++p) {
                sum_g += g[p];
                sum_gx += g[p] * norm[p];
            }
        }
        grads.grad_beta[c] = sum_g;
        grads.grad_gamma[c] = sum_gx;

        const double scale = layer.gamma[c] * cache.inv_std[c] / count;
        for (std::size_t b = 0; b < s.batch; ++b) {
            const auto g = grad_out.plane(b, c);
            const double* norm = cache.normalized.data() + (b * s.channels + c) * s.plane();
            auto dst = grads.grad_input.plane(b, c);
            for (std::size_t p = 0; p < s.plane(); ++p) {
                dst[p] = scale * (count * g[p] - sum_g - norm[p] * sum_gx);
            }
        }
    }
    return grads;
}

Tensor4 relu(const Tensor4& input) {
    Tensor4 out(input.shape());
    const auto src = input.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > 0.0 ? src[i] : 0.0;
    return out;
}

Tensor4 relu_backward(const Tensor4& input, const Tensor4& grad_out) {
    if (input.shape() != grad_out.shape()) throw InvalidInput("relu_backward shape mismatch");
    Tensor4 out(input.shape());
    const auto x = input.data();
    const auto g = grad_out.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < x.size(); ++i) dst[i] = x[i] > 0.0 ? g[i] : 0.0;
    return out;
}

Loss mse_loss(const Tensor4& pred, const Tensor4& target) {
    if (pred.shape() != target.shape()) {
        throw InvalidInput("mse_loss shape mismatch: " + pred.shape().str() + " vs " + target.shape().str());
    }
    const double k = static_cast<double>(pred.shape().batch);
    Loss loss{0.0, Tensor4(pred.shape())};
    const auto p = pred.data();
    const auto t = target.data();
    auto g = loss.grad.data();
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - t[i];
        sum += d * d;
        g[i] = d / k;
    }
    loss.value = sum / (2.0 * k);
    return loss;
}

}  // namespace dbp::nn
