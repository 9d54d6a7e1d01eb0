#include "fundus/models.hpp"

#include <string>
#include <utility>

#include "fundus/errors.hpp"

namespace fundus {

namespace {

std::string level_name(const char* base, std::size_t level) {
    return std::string(base) + std::to_string(level);
}

} // namespace

void XUnetConfig::validate() const {
    if (depth < 1 || base_channels < 1 || convs_per_block < 1 ||
        se_reduction < 1) {
        throw ConfigInvalid("xunet sizes must be positive");
    }
    if (input_levels < 1 || input_levels > depth) {
        throw ConfigInvalid("xunet input_levels must be in [1, depth]");
    }
}

XUnet::XUnet(XUnetConfig cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) {
    cfg_.validate();
    SplitMix64 rng(seed);
    const std::size_t image_channels = 3;

    for (std::size_t l = 0; l < cfg_.depth; ++l) {
        const std::size_t out_c = cfg_.base_channels << l;
        std::size_t in_c = l == 0 ? image_channels : (cfg_.base_channels << (l - 1));
        if (l > 0 && l < cfg_.input_levels) in_c += image_channels;
        enc_blocks_.push_back(
            std::make_unique<ConvBlock>(in_c, out_c, cfg_.convs_per_block, rng));
        enc_se_.push_back(
            std::make_unique<SEBlock>(SEConfig{out_c, cfg_.se_reduction}, rng));
        pools_.push_back(std::make_unique<Pool2d>(PoolKind::Max, 2, 2));
    }

    const std::size_t top_c = cfg_.base_channels << cfg_.depth;
    bott_block_ = std::make_unique<ConvBlock>(cfg_.base_channels
                                                  << (cfg_.depth - 1),
                                              top_c, cfg_.convs_per_block, rng);
    bott_se_ =
        std::make_unique<SEBlock>(SEConfig{top_c, cfg_.se_reduction}, rng);

    ups_.resize(cfg_.depth);
    dec_blocks_.resize(cfg_.depth);
    dec_se_.resize(cfg_.depth);
    for (std::size_t l = cfg_.depth; l-- > 0;) {
        const std::size_t out_c = cfg_.base_channels << l;
        const std::size_t in_c = out_c * 2; // level above (or bottleneck)
        ups_[l] = std::make_unique<ConvTranspose2d>(in_c, out_c, 2, 2, rng);
        dec_blocks_[l] = std::make_unique<ConvBlock>(out_c * 2, out_c,
                                                     cfg_.convs_per_block, rng);
        dec_se_[l] =
            std::make_unique<SEBlock>(SEConfig{out_c, cfg_.se_reduction}, rng);
    }

    ConvSpec head;
    head.kernel_h = head.kernel_w = 1;
    head.in_channels = cfg_.base_channels;
    head.out_channels = 1;
    head_ = std::make_unique<Conv2d>(head, rng);
}

Tensor XUnet::forward(const Tensor& image) {
    if (image.rank() != 4 || image.dim(1) != 3) {
        throw ShapeMismatch("xunet expects [N,3,H,W], got " + image.shape_str());
    }
    const std::size_t H = image.dim(2), W = image.dim(3);
    const std::size_t factor = std::size_t(1) << cfg_.depth;
    if (H % factor != 0 || W % factor != 0 || H == 0 || W == 0) {
        throw ShapeMismatch("xunet input dims must be divisible by " +
                            std::to_string(factor) + ", got " + image.shape_str());
    }

    pyramid_.clear();
    pyramid_.push_back(image);
    for (std::size_t l = 1; l < cfg_.input_levels; ++l) {
        const Tensor& prev = pyramid_.back();
        pyramid_.push_back(
            resize_bilinear(prev, prev.dim(2) / 2, prev.dim(3) / 2));
    }
    has_state_ = true;

    std::vector<Tensor> skips;
    Tensor x = pyramid_[0];
    for (std::size_t l = 0; l < cfg_.depth; ++l) {
        if (l > 0 && l < cfg_.input_levels) {
            x = concat_channels(x, pyramid_[l]);
        }
        x = enc_se_[l]->forward(enc_blocks_[l]->forward(x));
        skips.push_back(x);
        x = pools_[l]->forward(x);
    }

    x = bott_se_->forward(bott_block_->forward(x));

    for (std::size_t l = cfg_.depth; l-- > 0;) {
        x = ups_[l]->forward(x);
        x = concat_channels(x, skips[l]);
        x = dec_se_[l]->forward(dec_blocks_[l]->forward(x));
    }
    return out_sigmoid_.forward(head_->forward(x));
}

Tensor XUnet::backward(const Tensor& grad_output, const std::string& prefix,
                       GradMap& grads) {
    if (!has_state_) throw StateMissing("xunet backward before forward");

    Tensor g = out_sigmoid_.backward(grad_output, "", grads);
    g = head_->backward(g, join_path(prefix, "head"), grads);

    std::vector<Tensor> skip_grads(cfg_.depth);
    for (std::size_t l = 0; l < cfg_.depth; ++l) {
        g = dec_se_[l]->backward(g, join_path(prefix, level_name("dec", l) + "/se"),
                                 grads);
        g = dec_blocks_[l]->backward(g, join_path(prefix, level_name("dec", l)),
                                     grads);
        auto [up_part, skip_part] = split_channels(g, cfg_.base_channels << l);
        skip_grads[l] = std::move(skip_part);
        g = ups_[l]->backward(up_part, join_path(prefix, level_name("up", l)),
                              grads);
    }

    g = bott_se_->backward(g, join_path(prefix, "bott/se"), grads);
    g = bott_block_->backward(g, join_path(prefix, "bott"), grads);

    std::vector<Tensor> pyramid_grads(cfg_.input_levels);
    for (std::size_t l = cfg_.depth; l-- > 0;) {
        g = pools_[l]->backward(g, "", grads);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += skip_grads[l][i];
        g = enc_se_[l]->backward(g, join_path(prefix, level_name("enc", l) + "/se"),
                                 grads);
        g = enc_blocks_[l]->backward(g, join_path(prefix, level_name("enc", l)),
                                     grads);
        if (l > 0 && l < cfg_.input_levels) {
            const std::size_t pooled_c = cfg_.base_channels << (l - 1);
            auto [trunk, pyr] = split_channels(g, pooled_c);
            pyramid_grads[l] = std::move(pyr);
            g = std::move(trunk);
        }
    }

    // Fold pyramid gradients down the repeated-halving chain.
    for (std::size_t l = cfg_.input_levels; l-- > 1;) {
        if (pyramid_grads[l].size() == 0) continue;
        Tensor up = resize_bilinear_backward(pyramid_[l - 1].dim(2),
                                             pyramid_[l - 1].dim(3),
                                             pyramid_grads[l]);
        if (pyramid_grads[l - 1].size() == 0) {
            pyramid_grads[l - 1] = std::move(up);
        } else {
            for (std::size_t i = 0; i < up.size(); ++i) {
                pyramid_grads[l - 1][i] += up[i];
            }
        }
    }
    if (cfg_.input_levels > 1 && pyramid_grads[0].size() != 0) {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += pyramid_grads[0][i];
    }
    return g;
}

void XUnet::collect_params(const std::string& prefix, ParamMap& out) {
    for (std::size_t l = 0; l < cfg_.depth; ++l) {
        enc_blocks_[l]->collect_params(join_path(prefix, level_name("enc", l)),
                                       out);
        enc_se_[l]->collect_params(join_path(prefix, level_name("enc", l) + "/se"),
                                   out);
    }
    bott_block_->collect_params(join_path(prefix, "bott"), out);
    bott_se_->collect_params(join_path(prefix, "bott/se"), out);
    for (std::size_t l = 0; l < cfg_.depth; ++l) {
        ups_[l]->collect_params(join_path(prefix, level_name("up", l)), out);
        dec_blocks_[l]->collect_params(join_path(prefix, level_name("dec", l)),
                                       out);
        dec_se_[l]->collect_params(join_path(prefix, level_name("dec", l) + "/se"),
                                   out);
    }
    head_->collect_params(join_path(prefix, "head"), out);
}

void ClassifierConfig::validate() const {
    if (head_width < 1) throw ConfigInvalid("classifier head_width must be >= 1");
    if (stem_strides.empty()) {
        throw ConfigInvalid("classifier needs at least one stem stage");
    }
    for (std::size_t s : stem_strides) {
        if (s < 1) throw ConfigInvalid("stem strides must be >= 1");
    }
    if (body_rates.empty()) {
        throw ConfigInvalid("classifier needs at least one body block");
    }
    for (std::size_t r : body_rates) {
        if (r < 1) throw ConfigInvalid("body rates must be >= 1");
    }
}

Classifier::Classifier(ClassifierConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)), seed_(seed) {
    cfg_.validate();
    cfg_.aspp.in_channels = cfg_.head_width;
    SplitMix64 rng(seed);

    std::size_t in_c = 3;
    for (std::size_t s : cfg_.stem_strides) {
        ConvSpec spec;
        spec.kernel_h = spec.kernel_w = 3;
        spec.stride_h = spec.stride_w = s;
        spec.pad_h = spec.pad_w = 1;
        spec.in_channels = in_c;
        spec.out_channels = cfg_.head_width;
        stem_.push_back(std::make_unique<Conv2d>(spec, rng));
        stem_relus_.emplace_back(Activation::Relu);
        in_c = cfg_.head_width;
    }
    for (std::size_t r : cfg_.body_rates) {
        body_.push_back(
            std::make_unique<ConvBlock>(cfg_.head_width, cfg_.head_width, 1, rng, r));
    }
    aspp_ = std::make_unique<Aspp>(cfg_.aspp, rng);
    dense_ = std::make_unique<Dense>(cfg_.aspp.branch_channels, 1, rng);
}

std::size_t Classifier::min_input_dim() const {
    // Post-stem feature map must cover the largest ASPP rate; invert the
    // stem's output-size arithmetic one stage at a time.
    std::size_t need = 1;
    for (std::size_t r : cfg_.aspp.rates) need = std::max(need, r + 1);
    for (std::size_t i = cfg_.stem_strides.size(); i-- > 0;) {
        const std::size_t s = cfg_.stem_strides[i];
        // out = floor((in - 1) / s) + 1 for kernel 3, pad 1
        need = (need - 1) * s + 1;
    }
    return need;
}

Tensor Classifier::forward(const Tensor& image) {
    if (image.rank() != 4 || image.dim(1) != 3) {
        throw ShapeMismatch("classifier expects [N,3,H,W], got " +
                            image.shape_str());
    }
    const std::size_t min_dim = min_input_dim();
    if (image.dim(2) < min_dim || image.dim(3) < min_dim) {
        throw InputTooSmall("classifier input " + image.shape_str() +
                            " below minimum " + std::to_string(min_dim));
    }
    Tensor x = image;
    for (std::size_t i = 0; i < stem_.size(); ++i) {
        x = stem_relus_[i].forward(stem_[i]->forward(x));
    }
    for (auto& block : body_) x = block->forward(x);
    x = aspp_->forward(x);
    x = gap_.forward(x);
    return dense_->forward(x);
}

Tensor Classifier::backward(const Tensor& grad_output, const std::string& prefix,
                            GradMap& grads) {
    Tensor g = dense_->backward(grad_output, join_path(prefix, "dense"), grads);
    g = gap_.backward(g, "", grads);
    g = aspp_->backward(g, join_path(prefix, "aspp"), grads);
    for (std::size_t i = body_.size(); i-- > 0;) {
        g = body_[i]->backward(g, join_path(prefix, level_name("body", i)), grads);
    }
    for (std::size_t i = stem_.size(); i-- > 0;) {
        g = stem_relus_[i].backward(g, "", grads);
        g = stem_[i]->backward(g, join_path(prefix, level_name("stem", i)), grads);
    }
    return g;
}

void Classifier::collect_params(const std::string& prefix, ParamMap& out) {
    for (std::size_t i = 0; i < stem_.size(); ++i) {
        stem_[i]->collect_params(join_path(prefix, level_name("stem", i)), out);
    }
    for (std::size_t i = 0; i < body_.size(); ++i) {
        body_[i]->collect_params(join_path(prefix, level_name("body", i)), out);
    }
    aspp_->collect_params(join_path(prefix, "aspp"), out);
    dense_->collect_params(join_path(prefix, "dense"), out);
}

std::vector<double> classifier_predict(Classifier& model, const Tensor& images) {
    Tensor logits = model.forward(images);
    std::vector<double> probs(logits.dim(0));
    for (std::size_t n = 0; n < probs.size(); ++n) {
        probs[n] = sigmoid(logits[n]);
    }
    return probs;
}

} // namespace fundus
