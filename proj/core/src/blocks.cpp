#include "fundus/blocks.hpp"

#include <algorithm>
#include <utility>

#include "fundus/errors.hpp"

namespace fundus {

namespace {

Tensor slice_channels(const Tensor& t, std::size_t c0, std::size_t count) {
    const std::size_t N = t.dim(0), C = t.dim(1), HW = t.dim(2) * t.dim(3);
    Tensor out({N, count, t.dim(2), t.dim(3)});
    for (std::size_t n = 0; n < N; ++n) {
        const double* src = t.data() + (n * C + c0) * HW;
        std::copy(src, src + count * HW, out.data() + n * count * HW);
    }
    return out;
}

ConvSpec conv_spec(std::size_t in_c, std::size_t out_c, std::size_t kernel,
                   std::size_t pad, std::size_t dilation) {
    ConvSpec s;
    s.kernel_h = s.kernel_w = kernel;
    s.pad_h = s.pad_w = pad;
    s.dilation_h = s.dilation_w = dilation;
    s.in_channels = in_c;
    s.out_channels = out_c;
    return s;
}

} // namespace

std::size_t SEConfig::bottleneck() const {
    if (channels == 0 || reduction == 0) {
        throw ConfigInvalid("SE channels and reduction must be positive");
    }
    return std::max<std::size_t>(1, channels / reduction);
}

SEBlock::SEBlock(SEConfig cfg, SplitMix64& rng)
    : cfg_(cfg),
      fc1_(cfg.channels, cfg.bottleneck(), rng),
      fc2_(cfg.bottleneck(), cfg.channels, rng) {}

Tensor SEBlock::forward(const Tensor& input) {
    if (input.rank() != 4 || input.dim(1) != cfg_.channels) {
        throw ShapeMismatch("se_block expects " + std::to_string(cfg_.channels) +
                            " channels, got " + input.shape_str());
    }
    input_ = input;
    Tensor squeezed = gap_.forward(input);
    Tensor hidden = relu_.forward(fc1_.forward(squeezed));
    gates_ = sigmoid_.forward(fc2_.forward(hidden));
    has_state_ = true;

    const std::size_t N = input.dim(0), C = input.dim(1);
    const std::size_t HW = input.dim(2) * input.dim(3);
    Tensor out(input.shape());
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t c = 0; c < C; ++c) {
            const double g = gates_[n * C + c];
            const double* src = input.data() + (n * C + c) * HW;
            double* dst = out.data() + (n * C + c) * HW;
            for (std::size_t i = 0; i < HW; ++i) dst[i] = src[i] * g;
        }
    }
    return out;
}

Tensor SEBlock::backward(const Tensor& grad_output, const std::string& prefix,
                         GradMap& grads) {
    if (!has_state_) throw StateMissing("se_block backward before forward");
    const std::size_t N = input_.dim(0), C = input_.dim(1);
    const std::size_t HW = input_.dim(2) * input_.dim(3);

    Tensor grad_gates({N, C});
    Tensor grad_input(input_.shape());
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t c = 0; c < C; ++c) {
            const double g = gates_[n * C + c];
            const double* go = grad_output.data() + (n * C + c) * HW;
            const double* x = input_.data() + (n * C + c) * HW;
            double* gx = grad_input.data() + (n * C + c) * HW;
            double acc = 0.0;
            for (std::size_t i = 0; i < HW; ++i) {
                gx[i] = go[i] * g;
                acc += go[i] * x[i];
            }
            grad_gates[n * C + c] = acc;
        }
    }

    Tensor d = sigmoid_.backward(grad_gates, "", grads);
    d = fc2_.backward(d, join_path(prefix, "fc2"), grads);
    d = relu_.backward(d, "", grads);
    d = fc1_.backward(d, join_path(prefix, "fc1"), grads);
    d = gap_.backward(d, "", grads);
    for (std::size_t i = 0; i < grad_input.size(); ++i) grad_input[i] += d[i];
    return grad_input;
}

void SEBlock::collect_params(const std::string& prefix, ParamMap& out) {
    fc1_.collect_params(join_path(prefix, "fc1"), out);
    fc2_.collect_params(join_path(prefix, "fc2"), out);
}

ConvBlock::ConvBlock(std::size_t in_channels, std::size_t out_channels,
                     std::size_t depth, SplitMix64& rng, std::size_t dilation) {
    if (depth < 1) throw ConfigInvalid("conv_block depth must be >= 1");
    convs_.reserve(depth);
    relus_.reserve(depth);
    for (std::size_t i = 0; i < depth; ++i) {
        const std::size_t c_in = i == 0 ? in_channels : out_channels;
        convs_.push_back(std::make_unique<Conv2d>(
            conv_spec(c_in, out_channels, 3, dilation, dilation), rng));
        relus_.emplace_back(Activation::Relu);
    }
}

Tensor ConvBlock::forward(const Tensor& input) {
    Tensor x = input;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
        x = relus_[i].forward(convs_[i]->forward(x));
    }
    return x;
}

Tensor ConvBlock::backward(const Tensor& grad_output, const std::string& prefix,
                           GradMap& grads) {
    Tensor g = grad_output;
    for (std::size_t i = convs_.size(); i-- > 0;) {
        g = relus_[i].backward(g, "", grads);
        g = convs_[i]->backward(g, join_path(prefix, "conv" + std::to_string(i)),
                                grads);
    }
    return g;
}

void ConvBlock::collect_params(const std::string& prefix, ParamMap& out) {
    for (std::size_t i = 0; i < convs_.size(); ++i) {
        convs_[i]->collect_params(join_path(prefix, "conv" + std::to_string(i)),
                                  out);
    }
}

Aspp::Aspp(ASPPConfig cfg, SplitMix64& rng) : cfg_(std::move(cfg)) {
    if (cfg_.rates.empty()) throw ConfigInvalid("aspp rates must be non-empty");
    for (std::size_t i = 0; i < cfg_.rates.size(); ++i) {
        if (cfg_.rates[i] < 1 || (i > 0 && cfg_.rates[i] <= cfg_.rates[i - 1])) {
            throw ConfigInvalid("aspp rates must be strictly increasing and >= 1");
        }
    }
    if (cfg_.in_channels == 0 || cfg_.branch_channels == 0) {
        throw ConfigInvalid("aspp channel counts must be positive");
    }
    conv1x1_ = std::make_unique<Conv2d>(
        conv_spec(cfg_.in_channels, cfg_.branch_channels, 1, 0, 1), rng);
    for (std::size_t r : cfg_.rates) {
        rate_convs_.push_back(std::make_unique<Conv2d>(
            conv_spec(cfg_.in_channels, cfg_.branch_channels, 3, r, r), rng));
        rate_relus_.emplace_back(Activation::Relu);
    }
    if (cfg_.include_image_pool) {
        pool_conv_ = std::make_unique<Conv2d>(
            conv_spec(cfg_.in_channels, cfg_.branch_channels, 1, 0, 1), rng);
    }
    const std::size_t branches =
        1 + cfg_.rates.size() + (cfg_.include_image_pool ? 1 : 0);
    fuse_ = std::make_unique<Conv2d>(
        conv_spec(branches * cfg_.branch_channels, cfg_.branch_channels, 1, 0, 1),
        rng);
}

Tensor Aspp::forward(const Tensor& input) {
    if (input.rank() != 4 || input.dim(1) != cfg_.in_channels) {
        throw ShapeMismatch("aspp expects " + std::to_string(cfg_.in_channels) +
                            " channels, got " + input.shape_str());
    }
    in_h_ = input.dim(2);
    in_w_ = input.dim(3);
    has_state_ = true;

    Tensor cat = relu1x1_.forward(conv1x1_->forward(input));
    for (std::size_t i = 0; i < rate_convs_.size(); ++i) {
        cat = concat_channels(cat,
                              rate_relus_[i].forward(rate_convs_[i]->forward(input)));
    }
    if (cfg_.include_image_pool) {
        Tensor pooled = gap_.forward(input);
        Tensor p = pool_relu_.forward(pool_conv_->forward(
            pooled.reshaped({input.dim(0), cfg_.in_channels, 1, 1})));
        // broadcast [N,Cb,1,1] back to H x W
        const std::size_t N = input.dim(0), CB = cfg_.branch_channels;
        Tensor wide({N, CB, in_h_, in_w_});
        for (std::size_t n = 0; n < N; ++n) {
            for (std::size_t c = 0; c < CB; ++c) {
                const double v = p[n * CB + c];
                double* dst = wide.data() + (n * CB + c) * in_h_ * in_w_;
                for (std::size_t i = 0; i < in_h_ * in_w_; ++i) dst[i] = v;
            }
        }
        cat = concat_channels(cat, wide);
    }
    return fuse_relu_.forward(fuse_->forward(cat));
}

Tensor Aspp::backward(const Tensor& grad_output, const std::string& prefix,
                      GradMap& grads) {
    if (!has_state_) throw StateMissing("aspp backward before forward");
    Tensor g = fuse_relu_.backward(grad_output, "", grads);
    g = fuse_->backward(g, join_path(prefix, "fuse"), grads);

    const std::size_t CB = cfg_.branch_channels;
    const std::size_t N = g.dim(0);

    Tensor d = relu1x1_.backward(slice_channels(g, 0, CB), "", grads);
    Tensor grad_input = conv1x1_->backward(d, join_path(prefix, "conv1x1"), grads);

    for (std::size_t i = 0; i < rate_convs_.size(); ++i) {
        d = rate_relus_[i].backward(slice_channels(g, (i + 1) * CB, CB), "", grads);
        d = rate_convs_[i]->backward(
            d, join_path(prefix, "rate" + std::to_string(i)), grads);
        for (std::size_t k = 0; k < grad_input.size(); ++k) grad_input[k] += d[k];
    }

    if (cfg_.include_image_pool) {
        Tensor wide = slice_channels(g, (1 + rate_convs_.size()) * CB, CB);
        Tensor dp({N, CB, 1, 1});
        for (std::size_t n = 0; n < N; ++n) {
            for (std::size_t c = 0; c < CB; ++c) {
                const double* src = wide.data() + (n * CB + c) * in_h_ * in_w_;
                double acc = 0.0;
                for (std::size_t i = 0; i < in_h_ * in_w_; ++i) acc += src[i];
                dp[n * CB + c] = acc;
            }
        }
        d = pool_relu_.backward(dp, "", grads);
        d = pool_conv_->backward(d, join_path(prefix, "pool"), grads);
        d = gap_.backward(d.reshaped({N, cfg_.in_channels}), "", grads);
        for (std::size_t k = 0; k < grad_input.size(); ++k) grad_input[k] += d[k];
    }
    return grad_input;
}

void Aspp::collect_params(const std::string& prefix, ParamMap& out) {
    conv1x1_->collect_params(join_path(prefix, "conv1x1"), out);
    for (std::size_t i = 0; i < rate_convs_.size(); ++i) {
        rate_convs_[i]->collect_params(
            join_path(prefix, "rate" + std::to_string(i)), out);
    }
    if (cfg_.include_image_pool) {
        pool_conv_->collect_params(join_path(prefix, "pool"), out);
    }
    fuse_->collect_params(join_path(prefix, "fuse"), out);
}

} // namespace fundus
