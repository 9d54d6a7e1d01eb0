#include "fundus/tensor.hpp"

#include <cmath>
#include <sstream>

#include "fundus/errors.hpp"

namespace fundus {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
    for (std::size_t d : shape_) {
        if (d == 0) throw ShapeMismatch("zero dimension in shape " + shape_str());
    }
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != data_.size()) {
        throw ShapeMismatch("shape " + shape_str() + " does not match " +
                            std::to_string(data_.size()) + " values");
    }
}

void Tensor::fill(double value) {
    for (double& x : data_) x = value;
}

bool Tensor::all_finite() const {
    for (double x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
    if (shape_size(shape) != data_.size()) {
        throw ShapeMismatch("cannot reshape " + shape_str() + " to new size");
    }
    return Tensor(std::move(shape), data_);
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << 'x';
        os << shape_[i];
    }
    os << ']';
    return os.str();
}

Tensor Tensor::random_uniform(std::vector<std::size_t> shape, double lo,
                              double hi, SplitMix64& rng) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

double dot(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw ShapeMismatch("dot of " + a.shape_str() + " and " + b.shape_str());
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
    return sum;
}

Tensor stack_batch(const std::vector<const Tensor*>& items) {
    if (items.empty()) throw ShapeMismatch("stack_batch of zero tensors");
    const Tensor& first = *items.front();
    if (first.rank() == 0 || first.dim(0) != 1) {
        throw ShapeMismatch("stack_batch expects leading dimension 1");
    }
    std::vector<std::size_t> shape = first.shape();
    shape[0] = items.size();
    Tensor out(shape);
    std::size_t stride = first.size();
    for (std::size_t k = 0; k < items.size(); ++k) {
        if (!items[k]->same_shape(first)) {
            throw ShapeMismatch("stack_batch item " + std::to_string(k) +
                                " has shape " + items[k]->shape_str());
        }
        for (std::size_t i = 0; i < stride; ++i) {
            out[k * stride + i] = (*items[k])[i];
        }
    }
    return out;
}

} // namespace fundus
