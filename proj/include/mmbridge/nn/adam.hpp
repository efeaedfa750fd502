#pragma once

#include <cmath>
#include <vector>

#include "mmbridge/nn/tensor.hpp"

namespace mmbridge::nn {

/// Adam with decoupled weight decay. Defaults follow the training recipe used
/// across both models: lr = wd = 1e-3.
template <typename T>
class Adam {
public:
    struct Config {
        double lr = 1e-3;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        double weight_decay = 1e-3;
    };

    explicit Adam(std::vector<Param<T>*> params, Config cfg = {})
        : params_(std::move(params)), cfg_(cfg) {
        m_.reserve(params_.size());
        v_.reserve(params_.size());
        for (auto* p : params_) {
            m_.emplace_back(p->value.shape);
            v_.emplace_back(p->value.shape);
        }
    }

    void zero_grad() {
        for (auto* p : params_) p->zero_grad();
    }

    void step() {
        ++step_count_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, step_count_);
        const double bc2 = 1.0 - std::pow(cfg_.beta2, step_count_);
        for (std::size_t k = 0; k < params_.size(); ++k) {
            auto& p = *params_[k];
            require(p.grad.v.size() == p.value.v.size(), "adam: grad/value shape mismatch");
            for (std::size_t i = 0; i < p.value.v.size(); ++i) {
                const double g = static_cast<double>(p.grad.v[i]);
                double& m = m_[k].v[i];
                double& v = v_[k].v[i];
                m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
                v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
                const double mhat = m / bc1;
                const double vhat = v / bc2;
                double x = static_cast<double>(p.value.v[i]);
                x -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
                x -= cfg_.lr * cfg_.weight_decay * x;
                p.value.v[i] = static_cast<T>(x);
            }
        }
    }

    int step_count() const { return step_count_; }
    const Config& config() const { return cfg_; }

private:
    std::vector<Param<T>*> params_;
    Config cfg_;
    std::vector<Tensor<double>> m_, v_;
    int step_count_ = 0;
};

}  // namespace mmbridge::nn
