#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "fundus/blocks.hpp"

namespace fundus {

struct XUnetConfig {
    std::size_t depth = 3;          // encoder levels (bottleneck on top)
    std::size_t base_channels = 16; // doubles per level
    std::size_t input_levels = 3;   // pyramid inputs, <= depth
    std::size_t se_reduction = 8;
    std::size_t convs_per_block = 2;

    void validate() const;
};

// Multi-input U-Net regressor. The image enters at level 0; at each deeper
// level l < input_levels the image halved l times (bilinear) is concatenated
// onto the pooled features. Decoder upsamples with kernel-2 stride-2
// transposed convs, concatenates the same-level encoder skip, and a final
// 1x1 conv + sigmoid emits one regression channel at input resolution.
class XUnet final : public Layer {
public:
    XUnet(XUnetConfig cfg, std::uint64_t seed);

    Tensor forward(const Tensor& image) override;
    Tensor backward(const Tensor& grad_output, const std::string& prefix,
                    GradMap& grads) override;
    void collect_params(const std::string& prefix, ParamMap& out) override;

    const XUnetConfig& config() const { return cfg_; }
    std::uint64_t seed() const { return seed_; }

private:
    XUnetConfig cfg_;
    std::uint64_t seed_;
    std::vector<std::unique_ptr<ConvBlock>> enc_blocks_;
    std::vector<std::unique_ptr<SEBlock>> enc_se_;
    std::vector<std::unique_ptr<Pool2d>> pools_;
    std::unique_ptr<ConvBlock> bott_block_;
    std::unique_ptr<SEBlock> bott_se_;
    std::vector<std::unique_ptr<ConvTranspose2d>> ups_;
    std::vector<std::unique_ptr<ConvBlock>> dec_blocks_;
    std::vector<std::unique_ptr<SEBlock>> dec_se_;
    std::unique_ptr<Conv2d> head_;
    ActivationLayer out_sigmoid_{Activation::Sigmoid};

    std::vector<Tensor> pyramid_; // saved for backward through the resizes
    bool has_state_ = false;
};

struct ClassifierConfig {
    std::vector<std::size_t> stem_strides = {2, 2};
    std::vector<std::size_t> body_rates = {1, 2, 4};
    ASPPConfig aspp; // in_channels is forced to head_width at build
    std::size_t head_width = 16;

    void validate() const;
};

// DeepLab-style encoder classifier: stride-2 conv stem, dilated conv body,
// ASPP, global average pool, dense to a single logit. Sigmoid is applied by
// the loss / classifier_predict, not inside the model. Accepts any input
// size whose post-stem feature map still covers the largest ASPP rate.
class Classifier final : public Layer {
public:
    Classifier(ClassifierConfig cfg, std::uint64_t seed);

    // Returns [N,1] logits. Throws InputTooSmall below the stem/ASPP minimum.
    Tensor forward(const Tensor& image) override;
    Tensor backward(const Tensor& grad_output, const std::string& prefix,
                    GradMap& grads) override;
    void collect_params(const std::string& prefix, ParamMap& out) override;

    const ClassifierConfig& config() const { return cfg_; }
    std::uint64_t seed() const { return seed_; }

    // Smallest accepted input height/width.
    std::size_t min_input_dim() const;

private:
    ClassifierConfig cfg_;
    std::uint64_t seed_;
    std::vector<std::unique_ptr<Conv2d>> stem_;
    std::vector<ActivationLayer> stem_relus_;
    std::vector<std::unique_ptr<ConvBlock>> body_;
    std::unique_ptr<Aspp> aspp_;
    GlobalAvgPool gap_;
    std::unique_ptr<Dense> dense_;
};

// Per-item glaucoma probability: sigmoid of the model logit.
std::vector<double> classifier_predict(Classifier& model, const Tensor& images);

} // namespace fundus
