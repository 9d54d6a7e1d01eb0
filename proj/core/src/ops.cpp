#include "fundus/ops.hpp"

#include <algorithm>
#include <cmath>

#include "fundus/errors.hpp"

namespace fundus {

namespace {

using std::ptrdiff_t;

void require_nchw(const Tensor& t, const char* what) {
    if (t.rank() != 4) {
        throw ShapeMismatch(std::string(what) + " must be rank 4, got " +
                            t.shape_str());
    }
}

// Valid output range [lo, hi) such that 0 <= o*stride + offset < limit.
std::pair<ptrdiff_t, ptrdiff_t> valid_range(ptrdiff_t out_size, ptrdiff_t stride,
                                            ptrdiff_t offset, ptrdiff_t limit) {
    ptrdiff_t lo = 0;
    if (offset < 0) lo = (-offset + stride - 1) / stride;
    ptrdiff_t m = limit - 1 - offset;
    ptrdiff_t hi = m < 0 ? 0 : std::min(out_size, m / stride + 1);
    return {lo, std::max(lo, hi)};
}

struct KwRange {
    ptrdiff_t off, lo, hi;
};

} // namespace

std::pair<std::size_t, std::size_t> ConvSpec::output_dims(std::size_t in_h,
                                                          std::size_t in_w) const {
    ptrdiff_t num_h = ptrdiff_t(in_h) + 2 * ptrdiff_t(pad_h) -
                      ptrdiff_t(dilation_h) * (ptrdiff_t(kernel_h) - 1) - 1;
    ptrdiff_t num_w = ptrdiff_t(in_w) + 2 * ptrdiff_t(pad_w) -
                      ptrdiff_t(dilation_w) * (ptrdiff_t(kernel_w) - 1) - 1;
    if (num_h < 0 || num_w < 0) {
        throw DegenerateOutput("conv output dim < 1 for input " +
                               std::to_string(in_h) + "x" + std::to_string(in_w));
    }
    return {std::size_t(num_h) / stride_h + 1, std::size_t(num_w) / stride_w + 1};
}

Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              const ConvSpec& spec) {
    require_nchw(input, "conv2d input");
    require_nchw(weights, "conv2d weights");
    const std::size_t N = input.dim(0), C = input.dim(1);
    const std::size_t H = input.dim(2), W = input.dim(3);
    const std::size_t CO = spec.out_channels, KH = spec.kernel_h, KW = spec.kernel_w;
    if (C != spec.in_channels || weights.dim(0) != CO || weights.dim(1) != C ||
        weights.dim(2) != KH || weights.dim(3) != KW) {
        throw ShapeMismatch("conv2d weights " + weights.shape_str() +
                            " vs input " + input.shape_str());
    }
    if (bias.rank() != 1 || bias.dim(0) != CO) {
        throw ShapeMismatch("conv2d bias " + bias.shape_str());
    }
    auto [OH, OW] = spec.output_dims(H, W);

    Tensor out({N, CO, OH, OW});
    const ptrdiff_t sh = ptrdiff_t(spec.stride_h), sw = ptrdiff_t(spec.stride_w);
    const ptrdiff_t ph = ptrdiff_t(spec.pad_h), pw = ptrdiff_t(spec.pad_w);
    const ptrdiff_t dh = ptrdiff_t(spec.dilation_h), dw = ptrdiff_t(spec.dilation_w);

    // Horizontal tap ranges depend only on kw.
    std::vector<KwRange> taps(KW);
    for (std::size_t kw = 0; kw < KW; ++kw) {
        taps[kw].off = ptrdiff_t(kw) * dw - pw;
        auto [lo, hi] = valid_range(ptrdiff_t(OW), sw, taps[kw].off, ptrdiff_t(W));
        taps[kw].lo = lo;
        taps[kw].hi = hi;
    }

    // One output row is accumulated at a time; per element the order stays
    // bias first, then (ci, kh, kw), so results match the untiled loop bit
    // for bit while the output plane is written exactly once.
    std::vector<double> row(OW);
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t co = 0; co < CO; ++co) {
            double* oplane = out.data() + ((n * CO + co) * OH) * OW;
            const double bv = bias[co];
            const double* wbase = weights.data() + co * C * KH * KW;
            for (std::size_t oh = 0; oh < OH; ++oh) {
                for (std::size_t i = 0; i < OW; ++i) row[i] = bv;
                for (std::size_t ci = 0; ci < C; ++ci) {
                    const double* xplane = input.data() + ((n * C + ci) * H) * W;
                    const double* wrow = wbase + ci * KH * KW;
                    for (std::size_t kh = 0; kh < KH; ++kh) {
                        const ptrdiff_t ih =
                            ptrdiff_t(oh) * sh + ptrdiff_t(kh) * dh - ph;
                        if (ih < 0 || ih >= ptrdiff_t(H)) continue;
                        const double* xrow = xplane + ih * ptrdiff_t(W);
                        for (std::size_t kw = 0; kw < KW; ++kw) {
                            const double wv = wrow[kh * KW + kw];
                            const KwRange& t = taps[kw];
                            if (sw == 1) {
                                const double* xp = xrow + t.off;
                                for (ptrdiff_t ow = t.lo; ow < t.hi; ++ow) {
                                    row[ow] += wv * xp[ow];
                                }
                            } else {
                                for (ptrdiff_t ow = t.lo; ow < t.hi; ++ow) {
                                    row[ow] += wv * xrow[ow * sw + t.off];
                                }
                            }
                        }
                    }
                }
                std::copy(row.begin(), row.end(), oplane + oh * OW);
            }
        }
    }
    return out;
}

ConvGrads conv2d_backward(const Tensor& input, const Tensor& weights,
                          const ConvSpec& spec, const Tensor& grad_output) {
    require_nchw(grad_output, "conv2d grad_output");
    const std::size_t N = input.dim(0), C = input.dim(1);
    const std::size_t H = input.dim(2), W = input.dim(3);
    const std::size_t CO = spec.out_channels, KH = spec.kernel_h, KW = spec.kernel_w;
    auto [OH, OW] = spec.output_dims(H, W);
    if (grad_output.dim(0) != N || grad_output.dim(1) != CO ||
        grad_output.dim(2) != OH || grad_output.dim(3) != OW) {
        throw ShapeMismatch("conv2d grad_output " + grad_output.shape_str());
    }

    ConvGrads g{Tensor(input.shape()), Tensor(weights.shape()), Tensor({CO})};
    const ptrdiff_t sh = ptrdiff_t(spec.stride_h), sw = ptrdiff_t(spec.stride_w);
    const ptrdiff_t ph = ptrdiff_t(spec.pad_h), pw = ptrdiff_t(spec.pad_w);
    const ptrdiff_t dh = ptrdiff_t(spec.dilation_h), dw = ptrdiff_t(spec.dilation_w);

    // bias
    for (std::size_t co = 0; co < CO; ++co) {
        double acc = 0.0;
        for (std::size_t n = 0; n < N; ++n) {
            const double* gplane = grad_output.data() + ((n * CO + co) * OH) * OW;
            for (std::size_t i = 0; i < OH * OW; ++i) acc += gplane[i];
        }
        g.grad_bias[co] = acc;
    }

    // weights: all taps of a (co, ci) pair accumulate in one pass over the
    // gradient plane; each tap still sums in (n, oh, ow) order.
    std::vector<KwRange> taps(KW);
    for (std::size_t kw = 0; kw < KW; ++kw) {
        taps[kw].off = ptrdiff_t(kw) * dw - pw;
        auto [lo, hi] = valid_range(ptrdiff_t(OW), sw, taps[kw].off, ptrdiff_t(W));
        taps[kw].lo = lo;
        taps[kw].hi = hi;
    }
    std::vector<double> accs(KH * KW);
    for (std::size_t co = 0; co < CO; ++co) {
        for (std::size_t ci = 0; ci < C; ++ci) {
            std::fill(accs.begin(), accs.end(), 0.0);
            for (std::size_t n = 0; n < N; ++n) {
                const double* xplane = input.data() + ((n * C + ci) * H) * W;
                const double* gplane =
                    grad_output.data() + ((n * CO + co) * OH) * OW;
                for (std::size_t oh = 0; oh < OH; ++oh) {
                    const double* grow = gplane + oh * OW;
                    for (std::size_t kh = 0; kh < KH; ++kh) {
                        const ptrdiff_t ih =
                            ptrdiff_t(oh) * sh + ptrdiff_t(kh) * dh - ph;
                        if (ih < 0 || ih >= ptrdiff_t(H)) continue;
                        const double* xrow = xplane + ih * ptrdiff_t(W);
                        for (std::size_t kw = 0; kw < KW; ++kw) {
                            const KwRange& t = taps[kw];
                            double acc = accs[kh * KW + kw];
                            if (sw == 1) {
                                const double* xp = xrow + t.off;
                                for (ptrdiff_t ow = t.lo; ow < t.hi; ++ow) {
                                    acc += grow[ow] * xp[ow];
                                }
                            } else {
                                for (ptrdiff_t ow = t.lo; ow < t.hi; ++ow) {
                                    acc += grow[ow] * xrow[ow * sw + t.off];
                                }
                            }
                            accs[kh * KW + kw] = acc;
                        }
                    }
                }
            }
            std::copy(accs.begin(), accs.end(),
                      g.grad_weights.data() + (co * C + ci) * KH * KW);
        }
    }

    // input: one input row at a time; for a fixed row each (kh) selects at
    // most one output row, so per element the (co, kh, kw) order of the
    // untiled scatter is preserved while each row is written exactly once.
    std::vector<double> gxbuf(W);
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t ci = 0; ci < C; ++ci) {
            double* gxplane = g.grad_input.data() + ((n * C + ci) * H) * W;
            for (std::size_t ih = 0; ih < H; ++ih) {
                std::fill(gxbuf.begin(), gxbuf.end(), 0.0);
                for (std::size_t co = 0; co < CO; ++co) {
                    const double* gplane =
                        grad_output.data() + ((n * CO + co) * OH) * OW;
                    const double* wbase =
                        weights.data() + (co * C + ci) * KH * KW;
                    for (std::size_t kh = 0; kh < KH; ++kh) {
                        const ptrdiff_t t =
                            ptrdiff_t(ih) + ph - ptrdiff_t(kh) * dh;
                        if (t < 0 || t % sh != 0) continue;
                        const std::size_t oh = std::size_t(t / sh);
                        if (oh >= OH) continue;
                        const double* grow = gplane + oh * OW;
                        for (std::size_t kw = 0; kw < KW; ++kw) {
                            const double wv = wbase[kh * KW + kw];
                            const KwRange& tap = taps[kw];
                            if (sw == 1) {
                                double* gxp = gxbuf.data() + tap.off;
                                for (ptrdiff_t ow = tap.lo; ow < tap.hi; ++ow) {
                                    gxp[ow] += wv * grow[ow];
                                }
                            } else {
                                for (ptrdiff_t ow = tap.lo; ow < tap.hi; ++ow) {
                                    gxbuf[std::size_t(ow * sw + tap.off)] +=
                                        wv * grow[ow];
                                }
                            }
                        }
                    }
                }
                std::copy(gxbuf.begin(), gxbuf.end(),
                          gxplane + ih * ptrdiff_t(W));
            }
        }
    }
    return g;
}

namespace {

struct TransposeDims {
    std::size_t N, C, CO, H, W, KH, KW, OH, OW;
};

TransposeDims transpose_dims(const Tensor& input, const Tensor& weights,
                             const Tensor* bias, std::size_t stride_h,
                             std::size_t stride_w, std::size_t pad_h,
                             std::size_t pad_w) {
    require_nchw(input, "conv2d_transpose input");
    require_nchw(weights, "conv2d_transpose weights");
    TransposeDims d;
    d.N = input.dim(0);
    d.C = input.dim(1);
    d.H = input.dim(2);
    d.W = input.dim(3);
    d.CO = weights.dim(1);
    d.KH = weights.dim(2);
    d.KW = weights.dim(3);
    if (weights.dim(0) != d.C) {
        throw ShapeMismatch("conv2d_transpose weights " + weights.shape_str() +
                            " vs input " + input.shape_str());
    }
    if (bias && (bias->rank() != 1 || bias->dim(0) != d.CO)) {
        throw ShapeMismatch("conv2d_transpose bias " + bias->shape_str());
    }
    ptrdiff_t oh = (ptrdiff_t(d.H) - 1) * ptrdiff_t(stride_h) -
                   2 * ptrdiff_t(pad_h) + ptrdiff_t(d.KH);
    ptrdiff_t ow = (ptrdiff_t(d.W) - 1) * ptrdiff_t(stride_w) -
                   2 * ptrdiff_t(pad_w) + ptrdiff_t(d.KW);
    if (oh < 1 || ow < 1) {
        throw DegenerateOutput("conv2d_transpose output dim < 1");
    }
    d.OH = std::size_t(oh);
    d.OW = std::size_t(ow);
    return d;
}

// Input range [lo, hi) such that 0 <= h*stride - pad + k < out_size.
std::pair<ptrdiff_t, ptrdiff_t> scatter_range(ptrdiff_t in_size, ptrdiff_t stride,
                                              ptrdiff_t pad, ptrdiff_t k,
                                              ptrdiff_t out_size) {
    ptrdiff_t off = k - pad;
    ptrdiff_t lo = 0;
    if (off < 0) lo = (-off + stride - 1) / stride;
    ptrdiff_t m = out_size - 1 - off;
    ptrdiff_t hi = m < 0 ? 0 : std::min(in_size, m / stride + 1);
    return {lo, std::max(lo, hi)};
}

} // namespace

Tensor conv2d_transpose(const Tensor& input, const Tensor& weights,
                        const Tensor& bias, std::size_t stride_h,
                        std::size_t stride_w, std::size_t pad_h,
                        std::size_t pad_w) {
    const TransposeDims d =
        transpose_dims(input, weights, &bias, stride_h, stride_w, pad_h, pad_w);
    Tensor out({d.N, d.CO, d.OH, d.OW});
    const ptrdiff_t sh = ptrdiff_t(stride_h), sw = ptrdiff_t(stride_w);
    const ptrdiff_t ph = ptrdiff_t(pad_h), pw = ptrdiff_t(pad_w);

    for (std::size_t n = 0; n < d.N; ++n) {
        for (std::size_t co = 0; co < d.CO; ++co) {
            double* oplane = out.data() + ((n * d.CO + co) * d.OH) * d.OW;
            const double bv = bias[co];
            for (std::size_t i = 0; i < d.OH * d.OW; ++i) oplane[i] = bv;
            for (std::size_t ci = 0; ci < d.C; ++ci) {
                const double* xplane = input.data() + ((n * d.C + ci) * d.H) * d.W;
                const double* wbase =
                    weights.data() + (ci * d.CO + co) * d.KH * d.KW;
                for (std::size_t i = 0; i < d.KH; ++i) {
                    auto [h_lo, h_hi] =
                        scatter_range(ptrdiff_t(d.H), sh, ph, ptrdiff_t(i),
                                      ptrdiff_t(d.OH));
                    for (std::size_t j = 0; j < d.KW; ++j) {
                        const double wv = wbase[i * d.KW + j];
                        auto [w_lo, w_hi] =
                            scatter_range(ptrdiff_t(d.W), sw, pw, ptrdiff_t(j),
                                          ptrdiff_t(d.OW));
                        for (ptrdiff_t h = h_lo; h < h_hi; ++h) {
                            const ptrdiff_t oh = h * sh - ph + ptrdiff_t(i);
                            const double* xrow = xplane + h * ptrdiff_t(d.W);
                            double* orow = oplane + oh * ptrdiff_t(d.OW);
                            for (ptrdiff_t w = w_lo; w < w_hi; ++w) {
                                orow[w * sw - pw + ptrdiff_t(j)] += wv * xrow[w];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

ConvGrads conv2d_transpose_backward(const Tensor& input, const Tensor& weights,
                                    std::size_t stride_h, std::size_t stride_w,
                                    std::size_t pad_h, std::size_t pad_w,
                                    const Tensor& grad_output) {
    const TransposeDims d =
        transpose_dims(input, weights, nullptr, stride_h, stride_w, pad_h, pad_w);
    require_nchw(grad_output, "conv2d_transpose grad_output");
    if (grad_output.dim(0) != d.N || grad_output.dim(1) != d.CO ||
        grad_output.dim(2) != d.OH || grad_output.dim(3) != d.OW) {
        throw ShapeMismatch("conv2d_transpose grad_output " +
                            grad_output.shape_str());
    }
    ConvGrads g{Tensor(input.shape()), Tensor(weights.shape()), Tensor({d.CO})};
    const ptrdiff_t sh = ptrdiff_t(stride_h), sw = ptrdiff_t(stride_w);
    const ptrdiff_t ph = ptrdiff_t(pad_h), pw = ptrdiff_t(pad_w);

    for (std::size_t co = 0; co < d.CO; ++co) {
        double acc = 0.0;
        for (std::size_t n = 0; n < d.N; ++n) {
            const double* gplane =
                grad_output.data() + ((n * d.CO + co) * d.OH) * d.OW;
            for (std::size_t i = 0; i < d.OH * d.OW; ++i) acc += gplane[i];
        }
        g.grad_bias[co] = acc;
    }

    for (std::size_t ci = 0; ci < d.C; ++ci) {
        for (std::size_t co = 0; co < d.CO; ++co) {
            for (std::size_t i = 0; i < d.KH; ++i) {
                auto [h_lo, h_hi] = scatter_range(ptrdiff_t(d.H), sh, ph,
                                                  ptrdiff_t(i), ptrdiff_t(d.OH));
                for (std::size_t j = 0; j < d.KW; ++j) {
                    auto [w_lo, w_hi] =
                        scatter_range(ptrdiff_t(d.W), sw, pw, ptrdiff_t(j),
                                      ptrdiff_t(d.OW));
                    double acc = 0.0;
                    for (std::size_t n = 0; n < d.N; ++n) {
                        const double* xplane =
                            input.data() + ((n * d.C + ci) * d.H) * d.W;
                        const double* gplane =
                            grad_output.data() + ((n * d.CO + co) * d.OH) * d.OW;
                        for (ptrdiff_t h = h_lo; h < h_hi; ++h) {
                            const ptrdiff_t oh = h * sh - ph + ptrdiff_t(i);
                            const double* xrow = xplane + h * ptrdiff_t(d.W);
                            const double* grow = gplane + oh * ptrdiff_t(d.OW);
                            for (ptrdiff_t w = w_lo; w < w_hi; ++w) {
                                acc += xrow[w] * grow[w * sw - pw + ptrdiff_t(j)];
                            }
                        }
                    }
                    g.grad_weights[((ci * d.CO + co) * d.KH + i) * d.KW + j] = acc;
                }
            }
        }
    }

    for (std::size_t n = 0; n < d.N; ++n) {
        for (std::size_t ci = 0; ci < d.C; ++ci) {
            double* gxplane = g.grad_input.data() + ((n * d.C + ci) * d.H) * d.W;
            for (std::size_t co = 0; co < d.CO; ++co) {
                const double* gplane =
                    grad_output.data() + ((n * d.CO + co) * d.OH) * d.OW;
                const double* wbase =
                    weights.data() + (ci * d.CO + co) * d.KH * d.KW;
                for (std::size_t i = 0; i < d.KH; ++i) {
                    auto [h_lo, h_hi] = scatter_range(ptrdiff_t(d.H), sh, ph,
                                                      ptrdiff_t(i),
                                                      ptrdiff_t(d.OH));
                    for (std::size_t j = 0; j < d.KW; ++j) {
                        const double wv = wbase[i * d.KW + j];
                        auto [w_lo, w_hi] =
                            scatter_range(ptrdiff_t(d.W), sw, pw, ptrdiff_t(j),
                                          ptrdiff_t(d.OW));
                        for (ptrdiff_t h = h_lo; h < h_hi; ++h) {
                            const ptrdiff_t oh = h * sh - ph + ptrdiff_t(i);
                            double* gxrow = gxplane + h * ptrdiff_t(d.W);
                            const double* grow = gplane + oh * ptrdiff_t(d.OW);
                            for (ptrdiff_t w = w_lo; w < w_hi; ++w) {
                                gxrow[w] += wv * grow[w * sw - pw + ptrdiff_t(j)];
                            }
                        }
                    }
                }
            }
        }
    }
    return g;
}

PoolResult pool2d(const Tensor& input, PoolKind kind, std::size_t window_h,
                  std::size_t window_w, std::size_t stride_h,
                  std::size_t stride_w) {
    require_nchw(input, "pool2d input");
    const std::size_t N = input.dim(0), C = input.dim(1);
    const std::size_t H = input.dim(2), W = input.dim(3);
    if (window_h == 0 || window_w == 0 || window_h > H || window_w > W) {
        throw DegenerateOutput("pool window " + std::to_string(window_h) + "x" +
                               std::to_string(window_w) + " on input " +
                               input.shape_str());
    }
    const std::size_t OH = (H - window_h) / stride_h + 1;
    const std::size_t OW = (W - window_w) / stride_w + 1;

    PoolResult r{Tensor({N, C, OH, OW}), {}};
    if (kind == PoolKind::Max) r.argmax.assign(N * C * OH * OW, 0);
    const double inv_count = 1.0 / double(window_h * window_w);

    std::size_t out_idx = 0;
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t c = 0; c < C; ++c) {
            const std::size_t plane = ((n * C + c) * H) * W;
            for (std::size_t oh = 0; oh < OH; ++oh) {
                for (std::size_t ow = 0; ow < OW; ++ow, ++out_idx) {
                    const std::size_t h0 = oh * stride_h, w0 = ow * stride_w;
                    if (kind == PoolKind::Max) {
                        double best = input[plane + h0 * W + w0];
                        std::size_t best_idx = plane + h0 * W + w0;
                        for (std::size_t i = 0; i < window_h; ++i) {
                            for (std::size_t j = 0; j < window_w; ++j) {
                                const std::size_t idx =
                                    plane + (h0 + i) * W + (w0 + j);
                                if (input[idx] > best) {
                                    best = input[idx];
                                    best_idx = idx;
                                }
                            }
                        }
                        r.output[out_idx] = best;
                        r.argmax[out_idx] = best_idx;
                    } else {
                        double sum = 0.0;
                        for (std::size_t i = 0; i < window_h; ++i) {
                            for (std::size_t j = 0; j < window_w; ++j) {
                                sum += input[plane + (h0 + i) * W + (w0 + j)];
                            }
                        }
                        r.output[out_idx] = sum * inv_count;
                    }
                }
            }
        }
    }
    return r;
}

Tensor pool2d_backward(const Tensor& input, PoolKind kind, std::size_t window_h,
                       std::size_t window_w, std::size_t stride_h,
                       std::size_t stride_w, const std::vector<std::size_t>& argmax,
                       const Tensor& grad_output) {
    const std::size_t N = input.dim(0), C = input.dim(1);
    const std::size_t H = input.dim(2), W = input.dim(3);
    const std::size_t OH = grad_output.dim(2), OW = grad_output.dim(3);
    Tensor gx(input.shape());
    const double inv_count = 1.0 / double(window_h * window_w);

    if (kind == PoolKind::Max) {
        if (argmax.size() != grad_output.size()) {
            throw StateMissing("max pool backward without forward argmax");
        }
        for (std::size_t i = 0; i < grad_output.size(); ++i) {
            gx[argmax[i]] += grad_output[i];
        }
        return gx;
    }

    std::size_t out_idx = 0;
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t c = 0; c < C; ++c) {
            const std::size_t plane = ((n * C + c) * H) * W;
            for (std::size_t oh = 0; oh < OH; ++oh) {
                for (std::size_t ow = 0; ow < OW; ++ow, ++out_idx) {
                    const std::size_t h0 = oh * stride_h, w0 = ow * stride_w;
                    const double share = grad_output[out_idx] * inv_count;
                    for (std::size_t i = 0; i < window_h; ++i) {
                        for (std::size_t j = 0; j < window_w; ++j) {
                            gx[plane + (h0 + i) * W + (w0 + j)] += share;
                        }
                    }
                }
            }
        }
    }
    return gx;
}

Tensor global_avg_pool(const Tensor& input) {
    require_nchw(input, "global_avg_pool input");
    const std::size_t N = input.dim(0), C = input.dim(1);
    const std::size_t H = input.dim(2), W = input.dim(3);
    Tensor out({N, C});
    const double inv = 1.0 / double(H * W);
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t c = 0; c < C; ++c) {
            const double* plane = input.data() + ((n * C + c) * H) * W;
            double sum = 0.0;
            for (std::size_t i = 0; i < H * W; ++i) sum += plane[i];
            out[n * C + c] = sum * inv;
        }
    }
    return out;
}

Tensor global_avg_pool_backward(const std::vector<std::size_t>& input_shape,
                                const Tensor& grad_output) {
    if (input_shape.size() != 4) {
        throw ShapeMismatch("global_avg_pool_backward needs NCHW input shape");
    }
    const std::size_t N = input_shape[0], C = input_shape[1];
    const std::size_t H = input_shape[2], W = input_shape[3];
    if (grad_output.rank() != 2 || grad_output.dim(0) != N ||
        grad_output.dim(1) != C) {
        throw ShapeMismatch("global_avg_pool grad_output " +
                            grad_output.shape_str());
    }
    Tensor gx(input_shape);
    const double inv = 1.0 / double(H * W);
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t c = 0; c < C; ++c) {
            double* plane = gx.data() + ((n * C + c) * H) * W;
            const double share = grad_output[n * C + c] * inv;
            for (std::size_t i = 0; i < H * W; ++i) plane[i] = share;
        }
    }
    return gx;
}

Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    if (input.rank() != 2 || weights.rank() != 2 || bias.rank() != 1 ||
        input.dim(1) != weights.dim(0) || weights.dim(1) != bias.dim(0)) {
        throw ShapeMismatch("dense " + input.shape_str() + " * " +
                            weights.shape_str() + " + " + bias.shape_str());
    }
    const std::size_t N = input.dim(0), F = input.dim(1), G = weights.dim(1);
    Tensor out({N, G});
    for (std::size_t n = 0; n < N; ++n) {
        double* orow = out.data() + n * G;
        for (std::size_t g = 0; g < G; ++g) orow[g] = bias[g];
        const double* xrow = input.data() + n * F;
        for (std::size_t f = 0; f < F; ++f) {
            const double xv = xrow[f];
            const double* wrow = weights.data() + f * G;
            for (std::size_t g = 0; g < G; ++g) orow[g] += xv * wrow[g];
        }
    }
    return out;
}

DenseGrads dense_backward(const Tensor& input, const Tensor& weights,
                          const Tensor& grad_output) {
    const std::size_t N = input.dim(0), F = input.dim(1), G = weights.dim(1);
    if (grad_output.rank() != 2 || grad_output.dim(0) != N ||
        grad_output.dim(1) != G) {
        throw ShapeMismatch("dense grad_output " + grad_output.shape_str());
    }
    DenseGrads g{Tensor({N, F}), Tensor({F, G}), Tensor({G})};
    for (std::size_t n = 0; n < N; ++n) {
        const double* grow = grad_output.data() + n * G;
        const double* xrow = input.data() + n * F;
        double* gxrow = g.grad_input.data() + n * F;
        for (std::size_t f = 0; f < F; ++f) {
            const double* wrow = weights.data() + f * G;
            double* gwrow = g.grad_weights.data() + f * G;
            double acc = 0.0;
            const double xv = xrow[f];
            for (std::size_t k = 0; k < G; ++k) {
                acc += grow[k] * wrow[k];
                gwrow[k] += xv * grow[k];
            }
            gxrow[f] = acc;
        }
        double* gb = g.grad_bias.data();
        for (std::size_t k = 0; k < G; ++k) gb[k] += grow[k];
    }
    return g;
}

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Tensor activate(const Tensor& input, Activation kind) {
    Tensor out(input.shape());
    if (kind == Activation::Relu) {
        for (std::size_t i = 0; i < input.size(); ++i) {
            out[i] = input[i] > 0.0 ? input[i] : 0.0;
        }
    } else {
        for (std::size_t i = 0; i < input.size(); ++i) {
            out[i] = sigmoid(input[i]);
        }
    }
    return out;
}

Tensor activate_backward(const Tensor& saved, Activation kind,
                         const Tensor& grad_output) {
    if (!saved.same_shape(grad_output)) {
        throw ShapeMismatch("activation grad_output " + grad_output.shape_str());
    }
    Tensor gx(saved.shape());
    if (kind == Activation::Relu) {
        // saved is the forward input; subgradient 0 at the kink
        for (std::size_t i = 0; i < saved.size(); ++i) {
            gx[i] = saved[i] > 0.0 ? grad_output[i] : 0.0;
        }
    } else {
        // saved is the forward output y; dy/dx = y(1-y)
        for (std::size_t i = 0; i < saved.size(); ++i) {
            gx[i] = grad_output[i] * saved[i] * (1.0 - saved[i]);
        }
    }
    return gx;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    require_nchw(a, "concat input");
    require_nchw(b, "concat input");
    if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
        throw ShapeMismatch("concat " + a.shape_str() + " with " + b.shape_str());
    }
    const std::size_t N = a.dim(0), CA = a.dim(1), CB = b.dim(1);
    const std::size_t HW = a.dim(2) * a.dim(3);
    Tensor out({N, CA + CB, a.dim(2), a.dim(3)});
    for (std::size_t n = 0; n < N; ++n) {
        double* dst = out.data() + n * (CA + CB) * HW;
        const double* pa = a.data() + n * CA * HW;
        const double* pb = b.data() + n * CB * HW;
        std::copy(pa, pa + CA * HW, dst);
        std::copy(pb, pb + CB * HW, dst + CA * HW);
    }
    return out;
}

std::pair<Tensor, Tensor> split_channels(const Tensor& grad,
                                         std::size_t channels_a) {
    require_nchw(grad, "split input");
    const std::size_t N = grad.dim(0), C = grad.dim(1);
    if (channels_a == 0 || channels_a >= C) {
        throw ShapeMismatch("split at channel " + std::to_string(channels_a) +
                            " of " + grad.shape_str());
    }
    const std::size_t CB = C - channels_a;
    const std::size_t HW = grad.dim(2) * grad.dim(3);
    Tensor a({N, channels_a, grad.dim(2), grad.dim(3)});
    Tensor b({N, CB, grad.dim(2), grad.dim(3)});
    for (std::size_t n = 0; n < N; ++n) {
        const double* src = grad.data() + n * C * HW;
        std::copy(src, src + channels_a * HW, a.data() + n * channels_a * HW);
        std::copy(src + channels_a * HW, src + C * HW, b.data() + n * CB * HW);
    }
    return {std::move(a), std::move(b)};
}

namespace {

// Corner-aligned source coordinate for bilinear sampling.
inline void lerp_coords(std::size_t out_i, std::size_t out_n, std::size_t in_n,
                        std::size_t& i0, std::size_t& i1, double& frac) {
    if (out_n == 1 || in_n == 1) {
        i0 = i1 = 0;
        frac = 0.0;
        return;
    }
    const double src = double(out_i) * double(in_n - 1) / double(out_n - 1);
    const double fl = std::floor(src);
    i0 = std::size_t(fl);
    frac = src - fl;
    i1 = std::min(i0 + 1, in_n - 1);
}

} // namespace

Tensor resize_bilinear(const Tensor& input, std::size_t out_h, std::size_t out_w) {
    require_nchw(input, "resize input");
    if (out_h == 0 || out_w == 0) {
        throw ShapeMismatch("resize to zero dims");
    }
    const std::size_t N = input.dim(0), C = input.dim(1);
    const std::size_t H = input.dim(2), W = input.dim(3);
    Tensor out({N, C, out_h, out_w});
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t c = 0; c < C; ++c) {
            const double* plane = input.data() + ((n * C + c) * H) * W;
            double* oplane = out.data() + ((n * C + c) * out_h) * out_w;
            for (std::size_t oh = 0; oh < out_h; ++oh) {
                std::size_t y0, y1;
                double fy;
                lerp_coords(oh, out_h, H, y0, y1, fy);
                for (std::size_t ow = 0; ow < out_w; ++ow) {
                    std::size_t x0, x1;
                    double fx;
                    lerp_coords(ow, out_w, W, x0, x1, fx);
                    const double top = (1.0 - fx) * plane[y0 * W + x0] +
                                       fx * plane[y0 * W + x1];
                    const double bot = (1.0 - fx) * plane[y1 * W + x0] +
                                       fx * plane[y1 * W + x1];
                    oplane[oh * out_w + ow] = (1.0 - fy) * top + fy * bot;
                }
            }
        }
    }
    return out;
}

Tensor resize_bilinear_backward(std::size_t in_h, std::size_t in_w,
                                const Tensor& grad_output) {
    require_nchw(grad_output, "resize grad_output");
    const std::size_t N = grad_output.dim(0), C = grad_output.dim(1);
    const std::size_t OH = grad_output.dim(2), OW = grad_output.dim(3);
    Tensor gx({N, C, in_h, in_w});
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t c = 0; c < C; ++c) {
            double* plane = gx.data() + ((n * C + c) * in_h) * in_w;
            const double* gplane = grad_output.data() + ((n * C + c) * OH) * OW;
            for (std::size_t oh = 0; oh < OH; ++oh) {
                std::size_t y0, y1;
                double fy;
                lerp_coords(oh, OH, in_h, y0, y1, fy);
                for (std::size_t ow = 0; ow < OW; ++ow) {
                    std::size_t x0, x1;
                    double fx;
                    lerp_coords(ow, OW, in_w, x0, x1, fx);
                    const double gv = gplane[oh * OW + ow];
                    plane[y0 * in_w + x0] += (1.0 - fy) * (1.0 - fx) * gv;
                    plane[y0 * in_w + x1] += (1.0 - fy) * fx * gv;
                    plane[y1 * in_w + x0] += fy * (1.0 - fx) * gv;
                    plane[y1 * in_w + x1] += fy * fx * gv;
                }
            }
        }
    }
    return gx;
}

} // namespace fundus
