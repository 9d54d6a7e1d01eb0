#pragma once

#include <memory>
#include <vector>

#include "fundus/layers.hpp"

namespace fundus {

struct SEConfig {
    std::size_t channels = 0;
    std::size_t reduction = 8;

    std::size_t bottleneck() const;
};

// Channel attention: gap -> dense(C->C/r) -> relu -> dense(C/r->C) -> sigmoid,
// output = input scaled per channel by the gates.
class SEBlock final : public Layer {
public:
    SEBlock(SEConfig cfg, SplitMix64& rng);

    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output, const std::string& prefix,
                    GradMap& grads) override;
    void collect_params(const std::string& prefix, ParamMap& out) override;

    Dense& fc1() { return fc1_; }
    Dense& fc2() { return fc2_; }

private:
    SEConfig cfg_;
    GlobalAvgPool gap_;
    Dense fc1_;
    ActivationLayer relu_{Activation::Relu};
    Dense fc2_;
    ActivationLayer sigmoid_{Activation::Sigmoid};
    Tensor input_;
    Tensor gates_;
    bool has_state_ = false;
};

// `depth` repetitions of (3x3 conv, same-padding, stride 1, relu). Dilation
// (with padding = dilation) keeps spatial dims for the classifier body.
class ConvBlock final : public Layer {
public:
    ConvBlock(std::size_t in_channels, std::size_t out_channels, std::size_t depth,
              SplitMix64& rng, std::size_t dilation = 1);

    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output, const std::string& prefix,
                    GradMap& grads) override;
    void collect_params(const std::string& prefix, ParamMap& out) override;

    Conv2d& conv(std::size_t i) { return *convs_[i]; }

private:
    std::vector<std::unique_ptr<Conv2d>> convs_;
    std::vector<ActivationLayer> relus_;
};

struct ASPPConfig {
    std::size_t in_channels = 0;
    std::size_t branch_channels = 16;
    std::vector<std::size_t> rates = {1, 2, 4};
    bool include_image_pool = true;
};

// Parallel branches: 1x1 conv, one 3x3 conv per rate (dilation = padding =
// rate), optional image-pool branch; all relu-activated, concatenated, fused
// by a 1x1 conv + relu down to branch_channels.
class Aspp final : public Layer {
public:
    Aspp(ASPPConfig cfg, SplitMix64& rng);

    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_output, const std::string& prefix,
                    GradMap& grads) override;
    void collect_params(const std::string& prefix, ParamMap& out) override;

    const ASPPConfig& config() const { return cfg_; }
    Conv2d& fuse_conv() { return *fuse_; }

private:
    ASPPConfig cfg_;
    std::unique_ptr<Conv2d> conv1x1_;
    ActivationLayer relu1x1_{Activation::Relu};
    std::vector<std::unique_ptr<Conv2d>> rate_convs_;
    std::vector<ActivationLayer> rate_relus_;
    GlobalAvgPool gap_;
    std::unique_ptr<Conv2d> pool_conv_;
    ActivationLayer pool_relu_{Activation::Relu};
    std::unique_ptr<Conv2d> fuse_;
    ActivationLayer fuse_relu_{Activation::Relu};
    std::size_t in_h_ = 0, in_w_ = 0;
    bool has_state_ = false;
};

} // namespace fundus
