#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "mmbridge/common.hpp"
#include "mmbridge/rng.hpp"

namespace mmbridge::nn {

/// Dense row-major tensor. T is float in the production models and double
/// inside the finite-difference checker.
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, T fill = T(0)) : shape(std::move(s)) {
        v.assign(numel_of(shape), fill);
    }

    static std::size_t numel_of(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) {
            require(d >= 0, "tensor dims must be non-negative");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    std::size_t numel() const { return v.size(); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    int rank() const { return static_cast<int>(shape.size()); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    // Indexed accessors for the common ranks.
    T& at(int i) { return v[static_cast<std::size_t>(i)]; }
    T at(int i) const { return v[static_cast<std::size_t>(i)]; }
    T& at(int i, int j) { return v[static_cast<std::size_t>(i) * shape[1] + j]; }
    T at(int i, int j) const { return v[static_cast<std::size_t>(i) * shape[1] + j]; }
    T& at(int c, int y, int x) {
        return v[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
    }
    T at(int c, int y, int x) const {
        return v[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
    }
    T& at(int a, int b, int y, int x) {
        return v[((static_cast<std::size_t>(a) * shape[1] + b) * shape[2] + y) * shape[3] + x];
    }
    T at(int a, int b, int y, int x) const {
        return v[((static_cast<std::size_t>(a) * shape[1] + b) * shape[2] + y) * shape[3] + x];
    }

    void check_finite(const char* what) const {
        for (const T& x : v)
            if (!std::isfinite(static_cast<double>(x)))
                throw NumericError(std::string("non-finite value in ") + what);
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.v.resize(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
        return out;
    }
};

/// Trainable parameter: value plus accumulated gradient.
template <typename T>
struct Param {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;

    Param() = default;
    Param(std::string n, std::vector<int> shape) : name(std::move(n)), value(shape), grad(shape) {}

    void zero_grad() { std::fill(grad.v.begin(), grad.v.end(), T(0)); }

    void init_uniform(Rng& rng, double bound) {
        for (auto& x : value.v) x = static_cast<T>(rng.uniform(-bound, bound));
    }
    /// Common fan-in scaled init for dense/conv weights.
    void init_kaiming(Rng& rng, std::size_t fan_in) {
        init_uniform(rng, std::sqrt(3.0 / static_cast<double>(fan_in ? fan_in : 1)));
    }
};

}  // namespace mmbridge::nn
