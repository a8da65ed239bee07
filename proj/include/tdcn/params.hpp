#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "tdcn/rng.hpp"
#include "tdcn/tensor.hpp"

namespace tdcn {

// Ordered, named trainable tensors. Order is the registration order; it
// defines optimizer and checkpoint iteration, so it is stable by design.
class ParamStore {
public:
    Tensor add(const std::string& name, Tensor t) {
        t.set_requires_grad(true);
        items_.emplace_back(name, t);
        return t;
    }

    Tensor* find(const std::string& name) {
        for (auto& [n, t] : items_)
            if (n == name) return &t;
        return nullptr;
    }

    const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }

    std::vector<Tensor> tensors() const {
        std::vector<Tensor> out;
        out.reserve(items_.size());
        for (auto& [n, t] : items_) out.push_back(t);
        return out;
    }

    int64_t count() const {
        int64_t n = 0;
        for (auto& [name, t] : items_) n += t.numel();
        return n;
    }

    void zero_grad() {
        for (auto& [n, t] : items_) t.zero_grad();
    }

private:
    std::vector<std::pair<std::string, Tensor>> items_;
};

namespace init {

// He/Kaiming uniform: U(-sqrt(6/fan_in), +sqrt(6/fan_in)).
inline void kaiming_uniform(Tensor& t, int64_t fan_in, Xoshiro256& rng) {
    double bound = std::sqrt(6.0 / double(fan_in));
    real* p = t.data();
    for (int64_t i = 0; i < t.numel(); ++i)
        p[i] = real(rng.uniform(-bound, bound));
}

inline void uniform(Tensor& t, double lo, double hi, Xoshiro256& rng) {
    real* p = t.data();
    for (int64_t i = 0; i < t.numel(); ++i) p[i] = real(rng.uniform(lo, hi));
}

inline void constant(Tensor& t, real v) {
    real* p = t.data();
    std::fill(p, p + t.numel(), v);
}

} // namespace init
} // namespace tdcn
