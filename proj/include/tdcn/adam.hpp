#pragma once

#include <cmath>
#include <vector>

#include "tdcn/tensor.hpp"

namespace tdcn {

// Per-parameter Adam moments; t counts completed steps for this parameter.
struct AdamState {
    Tensor m, v;
    int64_t t = 0;

    explicit AdamState(const Shape& shape) : m(shape), v(shape) {}
};

struct AdamConfig {
    real lr = real(1e-3);
    real beta1 = real(0.9);
    real beta2 = real(0.999);
    real eps = real(1e-8);
};

class AdamOptimizer {
public:
    AdamOptimizer(std::vector<Tensor> params, AdamConfig cfg = {})
        : params_(std::move(params)), cfg_(cfg) {
        states_.reserve(params_.size());
        for (auto& p : params_) states_.emplace_back(p.shape());
    }

    // One bias-corrected update from each parameter's current grad.
    void step() {
        for (size_t i = 0; i < params_.size(); ++i) {
            Tensor& p = params_[i];
            AdamState& s = states_[i];
            ++s.t;
            real bc1 = real(1) - std::pow(cfg_.beta1, real(s.t));
            real bc2 = real(1) - std::pow(cfg_.beta2, real(s.t));
            kernels::vadam(p.numel(), p.data(), p.grad(), s.m.data(), s.v.data(),
                           cfg_.lr, cfg_.beta1, cfg_.beta2, cfg_.eps, bc1, bc2);
        }
    }

    void zero_grad() {
        for (auto& p : params_) p.zero_grad();
    }

    const AdamConfig& config() const { return cfg_; }
    const AdamState& state(size_t i) const { return states_[i]; }
    size_t size() const { return params_.size(); }

private:
    std::vector<Tensor> params_;
    AdamConfig cfg_;
    std::vector<AdamState> states_;
};

} // namespace tdcn
