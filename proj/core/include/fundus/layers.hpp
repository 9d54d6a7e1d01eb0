#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fundus/ops.hpp"
#include "fundus/rng.hpp"
#include "fundus/tensor.hpp"

namespace fundus {

// Parameter tensors by path, e.g. "enc0/conv1/weight". Pointers stay valid
// for the lifetime of the owning layer; optimizers update them in place.
using ParamMap = std::map<std::string, Tensor*>;
using GradMap = std::map<std::string, Tensor>;

std::string join_path(const std::string& prefix, const std::string& name);

// Accumulates (grads may already hold a tensor for `key` when a parameter
// receives gradient from more than one consumer).
void add_grad(GradMap& grads, const std::string& key, Tensor value);

class Layer {
public:
    virtual ~Layer() = default;

    // Saves whatever state backward needs.
    virtual Tensor forward(const Tensor& input) = 0;

    // Writes parameter gradients under `prefix` into `grads` and returns
    // d(loss)/d(input). Throws StateMissing if forward has not run.
    virtual Tensor backward(const Tensor& grad_output, const std::string& prefix,
                            GradMap& grads) = 0;

    virtual void collect_params(const std::string& prefix, ParamMap& out) {
        (void)prefix;
        (void)out;
    }
};

class Conv2d final : public Layer {
public:
    Conv2d(ConvSpec spec, SplitMix64& rng);

    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output, const std::string& prefix,
                    GradMap& grads) override;
    void collect_params(const std::string& prefix, ParamMap& out) override;

    const ConvSpec& spec() const { return spec_; }

    Tensor weight;
    Tensor bias;

private:
    ConvSpec spec_;
    Tensor input_;
    bool has_state_ = false;
};

class ConvTranspose2d final : public Layer {
public:
    ConvTranspose2d(std::size_t in_channels, std::size_t out_channels,
                    std::size_t kernel, std::size_t stride, SplitMix64& rng);

    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output, const std::string& prefix,
                    GradMap& grads) override;
    void collect_params(const std::string& prefix, ParamMap& out) override;

    Tensor weight;
    Tensor bias;

private:
    std::size_t stride_;
    Tensor input_;
    bool has_state_ = false;
};

class Pool2d final : public Layer {
public:
    Pool2d(PoolKind kind, std::size_t window, std::size_t stride);

    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output, const std::string& prefix,
                    GradMap& grads) override;

private:
    PoolKind kind_;
    std::size_t window_, stride_;
    Tensor input_;
    std::vector<std::size_t> argmax_;
    bool has_state_ = false;
};

class GlobalAvgPool final : public Layer {
public:
    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output, const std::string& prefix,
                    GradMap& grads) override;

private:
    std::vector<std::size_t> input_shape_;
};

class Dense final : public Layer {
public:
    Dense(std::size_t in_features, std::size_t out_features, SplitMix64& rng);

    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output, const std::string& prefix,
                    GradMap& grads) override;
    void collect_params(const std::string& prefix, ParamMap& out) override;

    Tensor weight;
    Tensor bias;

private:
    Tensor input_;
    bool has_state_ = false;
};

class ActivationLayer final : public Layer {
public:
    explicit ActivationLayer(Activation kind) : kind_(kind) {}

    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output, const std::string& prefix,
                    GradMap& grads) override;

private:
    Activation kind_;
    Tensor saved_;
    bool has_state_ = false;
};

// Glorot uniform bound for a weight tensor with the given fan counts.
double glorot_bound(std::size_t fan_in, std::size_t fan_out);

} // namespace fundus
