#pragma once

#include <cstddef>
#include <utility>

#include "fundus/tensor.hpp"

namespace fundus {

// Convolution geometry. Cross-correlation semantics (no kernel flip),
// zero padding. Output dim: floor((H + 2p - d*(k-1) - 1)/s) + 1.
struct ConvSpec {
    std::size_t kernel_h = 3, kernel_w = 3;
    std::size_t stride_h = 1, stride_w = 1;
    std::size_t pad_h = 0, pad_w = 0;
    std::size_t dilation_h = 1, dilation_w = 1;
    std::size_t in_channels = 1, out_channels = 1;

    // Throws DegenerateOutput when a computed dim would be < 1.
    std::pair<std::size_t, std::size_t> output_dims(std::size_t in_h,
                                                    std::size_t in_w) const;
};

struct ConvGrads {
    Tensor grad_input;
    Tensor grad_weights;
    Tensor grad_bias;
};

// input [N,Cin,H,W], weights [Cout,Cin,kh,kw], bias [Cout] -> [N,Cout,H',W'].
Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              const ConvSpec& spec);
ConvGrads conv2d_backward(const Tensor& input, const Tensor& weights,
                          const ConvSpec& spec, const Tensor& grad_output);

// Adjoint of conv2d. input [N,Cin,H,W], weights [Cin,Cout,kh,kw],
// bias [Cout] -> [N,Cout,H',W'] with H' = (H-1)*s - 2p + k.
Tensor conv2d_transpose(const Tensor& input, const Tensor& weights,
                        const Tensor& bias, std::size_t stride_h,
                        std::size_t stride_w, std::size_t pad_h,
                        std::size_t pad_w);
ConvGrads conv2d_transpose_backward(const Tensor& input, const Tensor& weights,
                                    std::size_t stride_h, std::size_t stride_w,
                                    std::size_t pad_h, std::size_t pad_w,
                                    const Tensor& grad_output);

enum class PoolKind { Max, Avg };

struct PoolResult {
    Tensor output;
    // For max pooling: flat input index that won each window, first in
    // row-major window order on ties. Empty for avg pooling.
    std::vector<std::size_t> argmax;
};

PoolResult pool2d(const Tensor& input, PoolKind kind, std::size_t window_h,
                  std::size_t window_w, std::size_t stride_h,
                  std::size_t stride_w);
Tensor pool2d_backward(const Tensor& input, PoolKind kind, std::size_t window_h,
                       std::size_t window_w, std::size_t stride_h,
                       std::size_t stride_w, const std::vector<std::size_t>& argmax,
                       const Tensor& grad_output);

// [N,C,H,W] -> [N,C] spatial mean.
Tensor global_avg_pool(const Tensor& input);
Tensor global_avg_pool_backward(const std::vector<std::size_t>& input_shape,
                                const Tensor& grad_output);

struct DenseGrads {
    Tensor grad_input;
    Tensor grad_weights;
    Tensor grad_bias;
};

// input [N,F], weights [F,G], bias [G] -> [N,G].
Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias);
DenseGrads dense_backward(const Tensor& input, const Tensor& weights,
                          const Tensor& grad_output);

enum class Activation { Relu, Sigmoid };

Tensor activate(const Tensor& input, Activation kind);
// Relu differentiates from the saved input, sigmoid from the saved output.
Tensor activate_backward(const Tensor& saved, Activation kind,
                         const Tensor& grad_output);

double sigmoid(double x);

// Channel concatenation of NCHW tensors and its backward split.
Tensor concat_channels(const Tensor& a, const Tensor& b);
std::pair<Tensor, Tensor> split_channels(const Tensor& grad,
                                         std::size_t channels_a);

// Corner-aligned bilinear resample of an NCHW tensor, and its transpose.
Tensor resize_bilinear(const Tensor& input, std::size_t out_h, std::size_t out_w);
Tensor resize_bilinear_backward(std::size_t in_h, std::size_t in_w,
                                const Tensor& grad_output);

} // namespace fundus
