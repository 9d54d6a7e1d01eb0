#pragma once

#include <string>

#include "fundus/layers.hpp"

namespace fundus {

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_coordinate;

    bool ok(double tol = 1e-6) const { return max_rel_error < tol; }
};

// Central-difference check of layer.backward against layer.forward.
//
// The scalar objective is <forward(input), G> with G drawn from a fixed
// internal seed, so analytic gradients are exactly what backward returns
// for grad_output = G. Every input and parameter coordinate is perturbed;
// parameters are restored afterwards. Relative error per coordinate is
// |a - n| / max(1e-12, |a| + |n|).
GradCheckReport grad_check(Layer& layer, const Tensor& input, double eps = 1e-5);

} // namespace fundus
