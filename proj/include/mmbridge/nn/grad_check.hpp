#pragma once

#include <functional>
#include <vector>

#include "mmbridge/nn/graph.hpp"
#include "mmbridge/rng.hpp"

namespace mmbridge::nn {

/// Central-difference gradient verification. The builder constructs the graph
/// from the current parameter values and returns the scalar loss node; it is
/// re-invoked for every probe, so it must be a pure function of the params.
///
/// Checks every coordinate, or a seeded subsample of at least 64 per tensor
/// when a tensor is larger than that. Relative error uses the standard
/// |a - n| / max(|a|, |n|, floor) form.
struct GradCheckResult {
    double max_rel_err = 0;
    std::size_t coords_checked = 0;
};

template <typename BuildFn>
GradCheckResult grad_check(BuildFn&& build, std::vector<Param<double>*> params,
                           double epsilon = 1e-5, double floor = 1e-6,
                           std::size_t max_coords_per_tensor = 64, std::uint64_t seed = 1234) {
    // Analytic gradients.
    for (auto* p : params) p->zero_grad();
    {
        Tape<double> tape;
        auto* loss = build(tape);
        require(loss->val.numel() == 1, "grad_check: loss must be scalar");
        tape.backward(loss);
    }
    std::vector<Tensor<double>> analytic;
    analytic.reserve(params.size());
    for (auto* p : params) analytic.push_back(p->grad);

    auto eval = [&]() {
        Tape<double> tape;
        return build(tape)->val.v[0];
    };

    GradCheckResult res;
    Rng rng(seed);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& value = params[k]->value;
        std::vector<std::size_t> coords;
        if (value.numel() <= max_coords_per_tensor) {
            coords.resize(value.numel());
            for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
        } else {
            for (std::size_t i = 0; i < max_coords_per_tensor; ++i)
                coords.push_back(rng.below(value.numel()));
        }
        for (std::size_t ci : coords) {
            const double orig = value.v[ci];
            value.v[ci] = orig + epsilon;
            const double up = eval();
            value.v[ci] = orig - epsilon;
            const double dn = eval();
            value.v[ci] = orig;
            const double numeric = (up - dn) / (2.0 * epsilon);
            const double a = analytic[k].v[ci];
            const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
            res.max_rel_err = std::max(res.max_rel_err, rel);
            ++res.coords_checked;
        }
    }
    return res;
}

}  // namespace mmbridge::nn
