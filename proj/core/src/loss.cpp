#include "fundus/loss.hpp"

#include <cmath>

#include "fundus/errors.hpp"
#include "fundus/ops.hpp"

namespace fundus {

MaeResult mae_loss(const Tensor& pred, const Tensor& target) {
    if (!pred.same_shape(target)) {
        throw ShapeMismatch("mae_loss " + pred.shape_str() + " vs " +
                            target.shape_str());
    }
    if (pred.size() == 0) throw ShapeMismatch("mae_loss on empty tensor");

    const double inv_n = 1.0 / double(pred.size());
    MaeResult r{0.0, Tensor(pred.shape())};
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        acc += std::fabs(d);
        r.grad[i] = d > 0.0 ? inv_n : (d < 0.0 ? -inv_n : 0.0);
    }
    r.loss = acc * inv_n;
    return r;
}

BceResult bce_loss(double logit, int label) {
    if (label != 0 && label != 1) {
        throw LabelInvalid("bce label must be 0 or 1, got " +
                           std::to_string(label));
    }
    BceResult r;
    r.prob = sigmoid(logit);
    // softplus(z) = log(1 + exp(z)) without overflow
    const auto softplus = [](double z) {
        return std::log1p(std::exp(-std::fabs(z))) + std::max(z, 0.0);
    };
    r.loss = label == 1 ? softplus(-logit) : softplus(logit);
    r.grad_logit = r.prob - double(label);
    return r;
}

} // namespace fundus
