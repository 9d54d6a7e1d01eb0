#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "fundus/layers.hpp"

namespace fundus {

struct AdamState {
    double lr = 0.0001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t t = 0;
    std::map<std::string, Tensor> m;
    std::map<std::string, Tensor> v;
};

// One bias-corrected update over every parameter, in name order:
//   m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2
//   param <- param - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
// Moment tensors are created on first use. Every parameter must have a
// gradient of matching shape.
void adam_step(const ParamMap& params, const GradMap& grads, AdamState& state);

} // namespace fundus
