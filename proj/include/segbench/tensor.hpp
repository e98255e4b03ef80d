// Copyright (c) 2026 segbench contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <vector>

#include "segbench/graph.hpp"

namespace segbench {

/// Dense NCHW tensor. Training runs in double so finite-difference checks
/// are not fighting float rounding.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(const TensorShape& shape) : shape_(shape), data_(shape.elems(), 0.0) {}
    Tensor(int64_t n, int64_t c, int64_t h, int64_t w) : Tensor(TensorShape{n, c, h, w}) {}

    const TensorShape& shape() const { return shape_; }
    int64_t size() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](int64_t i) { return data_[i]; }
    double operator[](int64_t i) const { return data_[i]; }

    double& at(int64_t n, int64_t c, int64_t h, int64_t w) { return data_[index(n, c, h, w)]; }
    double at(int64_t n, int64_t c, int64_t h, int64_t w) const { return data_[index(n, c, h, w)]; }

    double* plane(int64_t n, int64_t c) { return data_.data() + (n * shape_.channels + c) * plane_size(); }
    const double* plane(int64_t n, int64_t c) const {
        return data_.data() + (n * shape_.channels + c) * plane_size();
    }
    double* row(int64_t n, int64_t c, int64_t h) { return plane(n, c) + h * shape_.width; }
    const double* row(int64_t n, int64_t c, int64_t h) const { return plane(n, c) + h * shape_.width; }

    int64_t plane_size() const { return shape_.height * shape_.width; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
    void zero() { fill(0.0); }

    int64_t index(int64_t n, int64_t c, int64_t h, int64_t w) const {
        assert(n < shape_.batch && c < shape_.channels && h < shape_.height && w < shape_.width);
        return ((n * shape_.channels + c) * shape_.height + h) * shape_.width + w;
    }

private:
    TensorShape shape_{0, 0, 0, 0};
    std::vector<double> data_;
};

/// Deterministic RNG built on raw mt19937_64 draws; avoids the library
/// distribution objects so streams are reproducible across standard
/// libraries.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    uint64_t next() {
        // xorshift* keeps the generator header-only and portable.
        state_ ^= state_ >> 12;
        state_ ^= state_ << 25;
        state_ ^= state_ >> 27;
        return state_ * 0x2545f4914f6cdd1dull;
    }

    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int64_t uniform_int(int64_t lo, int64_t hi) {  // inclusive bounds
        return lo + static_cast<int64_t>(next() % static_cast<uint64_t>(hi - lo + 1));
    }
    double normal() {
        // Box-Muller; u clamped away from zero for the log.
        double u = uniform();
        if (u < 1e-300) u = 1e-300;
        double v = uniform();
        return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * 3.14159265358979323846 * v);
    }

private:
    uint64_t state_;
};

}  // namespace segbench
