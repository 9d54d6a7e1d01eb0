#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fundus/rng.hpp"

namespace fundus {

// Dense N-dimensional array of doubles, row-major. Image batches use NCHW.
// Tensors are plain values: copy freely, never aliased.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_[axis]; }
    std::size_t size() const { return data_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](std::size_t flat) { return data_[flat]; }
    double operator[](std::size_t flat) const { return data_[flat]; }

    // NCHW accessors; no bounds checking beyond the debug build.
    double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
        return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }
    double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
        return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }
    double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    void fill(double value);
    bool all_finite() const;

    // New tensor over the same data with a different shape of equal size.
    Tensor reshaped(std::vector<std::size_t> shape) const;

    std::string shape_str() const;

    static Tensor random_uniform(std::vector<std::size_t> shape, double lo,
                                 double hi, SplitMix64& rng);

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::size_t shape_size(const std::vector<std::size_t>& shape);

double dot(const Tensor& a, const Tensor& b);

// Stacks single-item tensors [1, ...] into one [k, ...] batch.
Tensor stack_batch(const std::vector<const Tensor*>& items);

} // namespace fundus
