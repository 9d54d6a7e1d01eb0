#include "fundus/adam.hpp"

#include <cmath>

#include "fundus/errors.hpp"

namespace fundus {

void adam_step(const ParamMap& params, const GradMap& grads, AdamState& state) {
    ++state.t;
    const double corr1 = 1.0 - std::pow(state.beta1, double(state.t));
    const double corr2 = 1.0 - std::pow(state.beta2, double(state.t));

    for (const auto& [name, param] : params) {
        const auto git = grads.find(name);
        if (git == grads.end() || !git->second.same_shape(*param)) {
            throw ShapeMismatch("adam_step gradient for " + name);
        }
        const Tensor& g = git->second;
        Tensor& m = state.m.try_emplace(name, Tensor(param->shape())).first->second;
        Tensor& v = state.v.try_emplace(name, Tensor(param->shape())).first->second;
        if (!m.same_shape(*param) || !v.same_shape(*param)) {
            throw ShapeMismatch("adam_step state for " + name);
        }
        for (std::size_t i = 0; i < g.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            (*param)[i] -=
                state.lr * (m[i] / corr1) / (std::sqrt(v[i] / corr2) + state.eps);
        }
    }
}

} // namespace fundus
