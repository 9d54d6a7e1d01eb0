#include "fundus/layers.hpp"

#include <cmath>
#include <utility>

#include "fundus/errors.hpp"

namespace fundus {

std::string join_path(const std::string& prefix, const std::string& name) {
    return prefix.empty() ? name : prefix + "/" + name;
}

void add_grad(GradMap& grads, const std::string& key, Tensor value) {
    auto it = grads.find(key);
    if (it == grads.end()) {
        grads.emplace(key, std::move(value));
        return;
    }
    if (!it->second.same_shape(value)) {
        throw ShapeMismatch("gradient for " + key + ": " + it->second.shape_str() +
                            " vs " + value.shape_str());
    }
    for (std::size_t i = 0; i < value.size(); ++i) it->second[i] += value[i];
}

double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(6.0 / double(fan_in + fan_out));
}

namespace {

void require_state(bool has_state, const char* layer) {
    if (!has_state) {
        throw StateMissing(std::string(layer) + " backward before forward");
    }
}

} // namespace

Conv2d::Conv2d(ConvSpec spec, SplitMix64& rng) : spec_(spec) {
    const std::size_t fan_in = spec.in_channels * spec.kernel_h * spec.kernel_w;
    const std::size_t fan_out = spec.out_channels * spec.kernel_h * spec.kernel_w;
    const double a = glorot_bound(fan_in, fan_out);
    weight = Tensor::random_uniform(
        {spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w}, -a, a,
        rng);
    bias = Tensor({spec.out_channels});
}

Tensor Conv2d::forward(const Tensor& input) {
    input_ = input;
    has_state_ = true;
    return conv2d(input, weight, bias, spec_);
}

Tensor Conv2d::backward(const Tensor& grad_output, const std::string& prefix,
                        GradMap& grads) {
    require_state(has_state_, "Conv2d");
    ConvGrads g = conv2d_backward(input_, weight, spec_, grad_output);
    add_grad(grads, join_path(prefix, "weight"), std::move(g.grad_weights));
    add_grad(grads, join_path(prefix, "bias"), std::move(g.grad_bias));
    return std::move(g.grad_input);
}

void Conv2d::collect_params(const std::string& prefix, ParamMap& out) {
    out[join_path(prefix, "weight")] = &weight;
    out[join_path(prefix, "bias")] = &bias;
}

ConvTranspose2d::ConvTranspose2d(std::size_t in_channels, std::size_t out_channels,
                                 std::size_t kernel, std::size_t stride,
                                 SplitMix64& rng)
    : stride_(stride) {
    const std::size_t fan_in = in_channels * kernel * kernel;
    const std::size_t fan_out = out_channels * kernel * kernel;
    const double a = glorot_bound(fan_in, fan_out);
    weight = Tensor::random_uniform({in_channels, out_channels, kernel, kernel},
                                    -a, a, rng);
    bias = Tensor({out_channels});
}

Tensor ConvTranspose2d::forward(const Tensor& input) {
    input_ = input;
    has_state_ = true;
    return conv2d_transpose(input, weight, bias, stride_, stride_, 0, 0);
}

Tensor ConvTranspose2d::backward(const Tensor& grad_output,
                                 const std::string& prefix, GradMap& grads) {
    require_state(has_state_, "ConvTranspose2d");
    ConvGrads g = conv2d_transpose_backward(input_, weight, stride_, stride_, 0, 0,
                                            grad_output);
    add_grad(grads, join_path(prefix, "weight"), std::move(g.grad_weights));
    add_grad(grads, join_path(prefix, "bias"), std::move(g.grad_bias));
    return std::move(g.grad_input);
}

void ConvTranspose2d::collect_params(const std::string& prefix, ParamMap& out) {
    out[join_path(prefix, "weight")] = &weight;
    out[join_path(prefix, "bias")] = &bias;
}

Pool2d::Pool2d(PoolKind kind, std::size_t window, std::size_t stride)
    : kind_(kind), window_(window), stride_(stride) {}

Tensor Pool2d::forward(const Tensor& input) {
    input_ = input;
    PoolResult r = pool2d(input, kind_, window_, window_, stride_, stride_);
    argmax_ = std::move(r.argmax);
    has_state_ = true;
    return std::move(r.output);
}

Tensor Pool2d::backward(const Tensor& grad_output, const std::string&, GradMap&) {
    require_state(has_state_, "Pool2d");
    return pool2d_backward(input_, kind_, window_, window_, stride_, stride_,
                           argmax_, grad_output);
}

Tensor GlobalAvgPool::forward(const Tensor& input) {
    input_shape_ = input.shape();
    return global_avg_pool(input);
}

Tensor GlobalAvgPool::backward(const Tensor& grad_output, const std::string&,
                               GradMap&) {
    require_state(!input_shape_.empty(), "GlobalAvgPool");
    return global_avg_pool_backward(input_shape_, grad_output);
}

Dense::Dense(std::size_t in_features, std::size_t out_features, SplitMix64& rng) {
    const double a = glorot_bound(in_features, out_features);
    weight = Tensor::random_uniform({in_features, out_features}, -a, a, rng);
    bias = Tensor({out_features});
}

Tensor Dense::forward(const Tensor& input) {
    input_ = input;
    has_state_ = true;
    return dense(input, weight, bias);
}

Tensor Dense::backward(const Tensor& grad_output, const std::string& prefix,
                       GradMap& grads) {
    require_state(has_state_, "Dense");
    DenseGrads g = dense_backward(input_, weight, grad_output);
    add_grad(grads, join_path(prefix, "weight"), std::move(g.grad_weights));
    add_grad(grads, join_path(prefix, "bias"), std::move(g.grad_bias));
    return std::move(g.grad_input);
}

void Dense::collect_params(const std::string& prefix, ParamMap& out) {
    out[join_path(prefix, "weight")] = &weight;
    out[join_path(prefix, "bias")] = &bias;
}

Tensor ActivationLayer::forward(const Tensor& input) {
    Tensor out = activate(input, kind_);
    // Relu differentiates from its input, sigmoid from its output.
    saved_ = kind_ == Activation::Relu ? input : out;
    has_state_ = true;
    return out;
}

Tensor ActivationLayer::backward(const Tensor& grad_output, const std::string&,
                                 GradMap&) {
    require_state(has_state_, "ActivationLayer");
    return activate_backward(saved_, kind_, grad_output);
}

} // namespace fundus
