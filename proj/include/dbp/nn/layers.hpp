#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "dbp/nn/tensor.hpp"

namespace dbp::nn {

enum class Mode { Train, Eval };

/// 3x3 convolution (cross-correlation), stride 1, zero padding 1.
/// Weights are stored (out, in, 3, 3).
struct ConvLayer {
    std::size_t out_channels = 0;
    std::size_t in_channels = 0;
    std::vector<double> weights;
    std::vector<double> bias;

    static constexpr std::size_t kTaps = 9;

    ConvLayer() = default;
    ConvLayer(std::size_t out_ch, std::size_t in_ch);

    double& weight(std::size_t o, std::size_t i, std::size_t dy, std::size_t dx) {
        return weights[((o * in_channels + i) * 3 + dy) * 3 + dx];
    }
    double weight(std::size_t o, std::size_t i, std::size_t dy, std::size_t dx) const {
        return weights[((o * in_channels + i) * 3 + dy) * 3 + dx];
    }
};

struct ConvGrads {
    Tensor4 grad_input;  // empty when not requested
    std::vector<double> grad_weights;
    std::vector<double> grad_bias;
};

Tensor4 conv2d_forward(const Tensor4& input, const ConvLayer& layer);

ConvGrads conv2d_backward(const Tensor4& input, const ConvLayer& layer, const Tensor4& grad_out,
                          bool want_grad_input = true);

/// Per-channel batch normalization. Running variance is the biased batch variance.
struct BatchNormLayer {
    std::size_t channels = 0;
    std::vector<double> gamma;
    std::vector<double> beta;
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double epsilon = 1e-5;
    double momentum = 0.1;

    // Normalized activations and 1/sqrt(var + eps) of the last train-mode forward.
    struct Cache {
        Shape4 shape;
        std::vector<double> normalized;
        std::vector<double> inv_std;
    };
    std::optional<Cache> cache;

    BatchNormLayer() = default;
    explicit BatchNormLayer(std::size_t channels);
};

/// Train mode normalizes by batch statistics, updates the running estimates and
/// caches what the backward pass needs. Eval mode uses the running estimates.
Tensor4 batchnorm_forward(const Tensor4& input, BatchNormLayer& layer, Mode mode);

/// Eval-mode normalization by the running estimates; never touches the layer.
Tensor4 batchnorm_inference(const Tensor4& input, const BatchNormLayer& layer);

struct BatchNormGrads {
    Tensor4 grad_input;
    std::vector<double> grad_gamma;
    std::vector<double> grad_beta;
};

BatchNormGrads batchnorm_backward(const Tensor4& input, const BatchNormLayer& layer, const Tensor4& grad_out);

Tensor4 relu(const Tensor4& input);
Tensor4 relu_backward(const Tensor4& input, const Tensor4& grad_out);

struct Loss {
    double value = 0.0;
    Tensor4 grad;
};

/// (1 / 2K) * sum_k ||target_k - pred_k||^2 with K the batch size.
Loss mse_loss(const Tensor4& pred, const Tensor4& target);

}  // namespace dbp::nn
