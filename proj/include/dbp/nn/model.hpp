#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dbp/image.hpp"
#include "dbp/nn/layers.hpp"
#include "dbp/nn/tensor.hpp"

namespace dbp::nn {

/// Conv(views -> width) + ReLU, then `depth` blocks of Conv(width -> width) + BN
/// + ReLU, then Conv(width -> 1).
struct ModelConfig {
    std::size_t views = 16;
    std::size_t width = 64;
    std::size_t depth = 15;

    void validate() const;
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ConvBnBlock {
    ConvLayer conv;
    BatchNormLayer bn;
};

class Model {
public:
    /// All parameters zero except BN gamma = 1 and running variance = 1.
    explicit Model(const ModelConfig& config);

    /// He-normal conv weights (std sqrt(2 / (in_ch * 9))), zero biases.
    static Model initialized(const ModelConfig& config, std::uint64_t seed);

    const ModelConfig& config() const noexcept { return config_; }

    ConvLayer& first() noexcept { return first_; }
    const ConvLayer& first() const noexcept { return first_; }
    std::vector<ConvBnBlock>& blocks() noexcept { return blocks_; }
    const std::vector<ConvBnBlock>& blocks() const noexcept { return blocks_; }
    ConvLayer& last() noexcept { return last_; }
    const ConvLayer& last() const noexcept { return last_; }

    /// Trainable tensors in layer order: first (w, b); per block (w, b, gamma,
    /// beta); last (w, b). Gradients from backward() use the same order.
    std::vector<std::span<double>> parameters();

    /// Every stored tensor in layer order, including BN running statistics.
    /// This is the checkpoint blob order.
    std::vector<std::span<double>> state_tensors();
    std::vector<std::span<const double>> state_tensors() const;

private:
    ModelConfig config_;
    ConvLayer first_;
    std::vector<ConvBnBlock> blocks_;
    ConvLayer last_;
};

/// Intermediate activations of a train-mode forward pass.
struct ForwardTrace {
    Tensor4 input;
    Tensor4 first_pre;               // first conv output, before ReLU
    std::vector<Tensor4> block_in;   // input to each block's conv
    std::vector<Tensor4> conv_out;   // each block's conv output (BN input)
    std::vector<Tensor4> bn_out;     // each block's BN output, before ReLU
    Tensor4 last_in;
};

/// Applies the layer chain to a (batch, views, h, w) tensor. Train mode uses
/// and updates BN batch statistics.
Tensor4 network_forward(const Tensor4& input, Model& model, Mode mode);

/// Eval-mode forward pass; reentrant.
Tensor4 network_forward(const Tensor4& input, const Model& model);

/// Train-mode forward that records the activations backward() needs.
Tensor4 forward_train(const Tensor4& input, Model& model, ForwardTrace& trace);

/// Gradients of the loss w.r.t. Model::parameters(), given dLoss/dOutput.
/// The input gradient is only computed when `grad_input` is given.
std::vector<std::vector<double>> backward(const Model& model, const ForwardTrace& trace, const Tensor4& grad_out,
                                          Tensor4* grad_input = nullptr);

/// Wraps one BpTensor as a 1 x views x n x n tensor.
Tensor4 to_tensor(const BpTensor& z);

}  // namespace dbp::nn
