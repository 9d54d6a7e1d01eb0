#pragma once

#include "fundus/tensor.hpp"

namespace fundus {

struct MaeResult {
    double loss;
    Tensor grad; // d(loss)/d(pred)
};

// loss = (1/n) * sum |pred - target|, grad = sign(pred - target)/n, sign(0)=0.
MaeResult mae_loss(const Tensor& pred, const Tensor& target);

struct BceResult {
    double loss;
    double prob;       // sigmoid(logit)
    double grad_logit; // prob - label
};

// Binary cross-entropy -(y log p + (1-y) log(1-p)) evaluated in logit form;
// label must be 0 or 1.
BceResult bce_loss(double logit, int label);

} // namespace fundus
