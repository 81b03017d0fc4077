#include "dbp/nn/model.hpp"

#include <cassert>
#include <cmath>
#include <string>

#include "dbp/errors.hpp"
#include "dbp/random.hpp"

namespace dbp::nn {

namespace {

void check_input(const Tensor4& input, const ModelConfig& config) {
    const Shape4& s = input.shape();
    if (s.channels != config.views) {
        throw InvalidInput("network input has " + std::to_string(s.channels) + " channels, model expects " +
                           std::to_string(config.views) + " views");
    }
    if (s.height < 3 || s.width < 3) throw InvalidInput("network input spatial size must be at least 3");
    if (s.batch == 0) throw InvalidInput("network input batch is empty");
}

void he_init(ConvLayer& layer, Rng& rng) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(layer.in_channels * ConvLayer::kTaps));
    for (double& w : layer.weights) w = stddev * rng.normal();
}

template <class Span, class M>
std::vector<Span> collect_state(M& model) {
    std::vector<Span> out{model.first().weights, model.first().bias};
    for (auto& block : model.blocks()) {
        out.insert(out.end(), {block.conv.weights, block.conv.bias, block.bn.gamma, block.bn.beta,
                               block.bn.running_mean, block.bn.running_var});
    }
    out.insert(out.end(), {model.last().weights, model.last().bias});
    return out;
}

}  // namespace

void ModelConfig::validate() const {
    if (views == 0 || width == 0) throw InvalidInput("model views and width must be positive");
}

Model::Model(const ModelConfig& config)
    : config_(config), first_(config.width, config.views), last_(1, config.width) {
    config.validate();
    blocks_.reserve(config.depth);
    for (std::size_t d = 0; d < config.depth; ++d) {
        blocks_.push_back({ConvLayer(config.width, config.width), BatchNormLayer(config.width)});
    }
}

Model Model::initialized(const ModelConfig& config, std::uint64_t seed) {
    Model model(config);
    Rng rng(seed);
    he_init(model.first_, rng);
    for (auto& block : model.blocks_) he_init(block.conv, rng);
    he_init(model.last_, rng);
    return model;
}

std::vector<std::span<double>> Model::parameters() {
    std::vector<std::span<double>> out{first_.weights, first_.bias};
    for (auto& block : blocks_) {
        out.insert(out.end(), {block.conv.weights, block.conv.bias, block.bn.gamma, block.bn.beta});
    }
    out.insert(out.end(), {last_.weights, last_.bias});
    return out;
}

std::vector<std::span<double>> Model::state_tensors() { return collect_state<std::span<double>>(*this); }

std::vector<std::span<const double>> Model::state_tensors() const {
    return collect_state<std::span<const double>>(*this);
}

Tensor4 network_forward(const Tensor4& input, Model& model, Mode mode) {
    check_input(input, model.config());
    Tensor4 x = relu(conv2d_forward(input, model.first()));
    for (auto& block : model.blocks()) {
        x = relu(batchnorm_forward(conv2d_forward(x, block.conv), block.bn, mode));
        assert(x.all_finite());
    }
    return conv2d_forward(x, model.last());
}

Tensor4 network_forward(const Tensor4& input, const Model& model) {
    check_input(input, model.config());
    Tensor4 x = relu(conv2d_forward(input, model.first()));
    for (const auto& block : model.blocks()) {
        x = relu(batchnorm_inference(conv2d_forward(x, block.conv), block.bn));
        assert(x.all_finite());
    }
    return conv2d_forward(x, model.last());
}

Tensor4 forward_train(const Tensor4& input, Model& model, ForwardTrace& trace) {
    check_input(input, model.config());
    trace = ForwardTrace{};
    trace.input = input;
    trace.first_pre = conv2d_forward(input, model.first());
    Tensor4 x = relu(trace.first_pre);
    for (auto& block : model.blocks()) {
        trace.block_in.push_back(x);
        trace.conv_out.push_back(conv2d_forward(x, block.conv));
        trace.bn_out.push_back(batchnorm_forward(trace.conv_out.back(), block.bn, Mode::Train));
        x = relu(trace.bn_out.back());
        assert(x.all_finite());
    }
    trace.last_in = x;
    return conv2d_forward(x, model.last());
}

std::vector<std::vector<double>> backward(const Model& model, const ForwardTrace& trace, const Tensor4& grad_out,
                                          Tensor4* grad_input) {
    const std::size_t depth = model.blocks().size();
    if (trace.block_in.size() != depth) throw UsageError("backward called without a matching forward trace");

    // Filled back to front, then reported in parameters() order.
    std::vector<std::vector<double>> grads(2 + 4 * depth + 2);

    ConvGrads last = conv2d_backward(trace.last_in, model.last(), grad_out);
    grads[2 + 4 * depth] = std::move(last.grad_weights);
    grads[3 + 4 * depth] = std::move(last.grad_bias);
    Tensor4 g = std::move(last.grad_input);

    for (std::size_t d = depth; d-- > 0;) {
        const auto& block = model.blocks()[d];
        g = relu_backward(trace.bn_out[d], g);
        BatchNormGrads bn = batchnorm_backward(trace.conv_out[d], block.bn, g);
        ConvGrads conv = conv2d_backward(trace.block_in[d], block.conv, bn.grad_input);
        grads[2 + 4 * d] = std::move(conv.grad_weights);
        grads[3 + 4 * d] = std::move(conv.grad_bias);
        grads[4 + 4 * d] = std::move(bn.grad_gamma);
        grads[5 + 4 * d] = std::move(bn.grad_beta);
        g = std::move(conv.grad_input);
    }

    g = relu_backward(trace.first_pre, g);
    ConvGrads first = conv2d_backward(trace.input, model.first(), g, grad_input != nullptr);
    grads[0] = std::move(first.grad_weights);
    grads[1] = std::move(first.grad_bias);
    if (grad_input != nullptr) *grad_input = std::move(first.grad_input);
    return grads;
}

Tensor4 to_tensor(const BpTensor& z) {
    const auto data = z.data();
    return Tensor4({1, z.views(), z.size(), z.size()}, std::vector<double>(data.begin(), data.end()));
}

}  // namespace dbp::nn
