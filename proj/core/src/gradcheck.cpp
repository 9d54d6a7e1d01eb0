#include "fundus/gradcheck.hpp"

#include <cmath>

namespace fundus {

namespace {

constexpr std::uint64_t kDirectionSeed = 0x6772616463686BULL;

double relative_error(double analytic, double numeric) {
    return std::fabs(analytic - numeric) /
           std::max(1e-12, std::fabs(analytic) + std::fabs(numeric));
}

} // namespace

GradCheckReport grad_check(Layer& layer, const Tensor& input, double eps) {
    Tensor output = layer.forward(input);
    SplitMix64 rng(kDirectionSeed);
    // A positive direction keeps per-output contributions to each parameter
    // gradient from cancelling, so no coordinate sits below the
    // finite-difference noise floor merely by accident of the probe.
    const Tensor direction = Tensor::random_uniform(output.shape(), 0.5, 1.5, rng);

    GradMap grads;
    const Tensor analytic_input = layer.backward(direction, "", grads);

    const auto objective = [&](const Tensor& x) {
        return dot(layer.forward(x), direction);
    };

    GradCheckReport report;
    const auto record = [&](double analytic, double numeric,
                            const std::string& where) {
        const double rel = relative_error(analytic, numeric);
        if (rel > report.max_rel_error) {
            report.max_rel_error = rel;
            report.worst_coordinate = where;
        }
    };

    Tensor probe = input;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const double saved = probe[i];
        probe[i] = saved + eps;
        const double plus = objective(probe);
        probe[i] = saved - eps;
        const double minus = objective(probe);
        probe[i] = saved;
        record(analytic_input[i], (plus - minus) / (2.0 * eps),
               "input[" + std::to_string(i) + "]");
    }

    ParamMap params;
    layer.collect_params("", params);
    for (auto& [name, tensor] : params) {
        const Tensor& analytic = grads.at(name);
        for (std::size_t i = 0; i < tensor->size(); ++i) {
            const double saved = (*tensor)[i];
            (*tensor)[i] = saved + eps;
            const double plus = objective(input);
            (*tensor)[i] = saved - eps;
            const double minus = objective(input);
            (*tensor)[i] = saved;
            record(analytic[i], (plus - minus) / (2.0 * eps),
                   name + "[" + std::to_string(i) + "]");
        }
    }

    // Leave saved state consistent with the unperturbed input.
    layer.forward(input);
    return report;
}

} // namespace fundus
