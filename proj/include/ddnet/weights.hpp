#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ddnet/tensor.hpp"

namespace ddnet {

template <class S>
struct NamedTensor {
    std::string name;
    Tensor<S> value;
    bool trainable = true;
};

/// Ordered table of named parameter tensors for one network.
template <class S>
struct NetworkWeights {
    std::vector<NamedTensor<S>> params;

    NamedTensor<S>& add(std::string name, Tensor<S> value, bool trainable = true) {
        value.set_requires_grad(trainable);
        params.push_back({std::move(name), std::move(value), trainable});
        return params.back();
    }

    Tensor<S>& at(const std::string& name) {
        for (auto& p : params)
            if (p.name == name) return p.value;
        throw std::out_of_range("no parameter named " + name);
    }
    const Tensor<S>& at(const std::string& name) const {
        return const_cast<NetworkWeights*>(this)->at(name);
    }
    bool has(const std::string& name) const {
        for (auto& p : params)
            if (p.name == name) return true;
        return false;
    }

    void zero_grad() {
        for (auto& p : params) p.value.zero_grad();
    }
};

struct ParamCounts {
    std::int64_t total = 0;
    std::int64_t trainable = 0;
    std::int64_t non_trainable = 0;
};

template <class S>
ParamCounts count_params(const NetworkWeights<S>& w) {
    ParamCounts c;
    for (const auto& p : w.params) {
        const auto n = static_cast<std::int64_t>(p.value.numel());
        c.total += n;
        (p.trainable ? c.trainable : c.non_trainable) += n;
    }
    return c;
}

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam optimizer state: per-parameter first/second moments plus step count.
template <class S>
struct AdamState {
    AdamConfig cfg;
    std::int64_t step_count = 0;
    std::map<std::string, std::pair<std::vector<S>, std::vector<S>>> moments;

    explicit AdamState(AdamConfig c = {}) : cfg(c) {}
};

/// One bias-corrected Adam update, in place, over all trainable parameters.
template <class S>
void adam_step(NetworkWeights<S>& weights, AdamState<S>& state) {
    for (auto& p : weights.params) {
        if (!p.trainable) continue;
        for (S g : p.value.grad())
            if (!std::isfinite(static_cast<double>(g)))
                throw std::runtime_error("adam_step: non-finite gradient in " + p.name);
    }
    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(state.cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(state.cfg.beta2, t);
    const S lr = S(state.cfg.learning_rate);
    const S b1 = S(state.cfg.beta1), b2 = S(state.cfg.beta2), eps = S(state.cfg.eps);
    for (auto& p : weights.params) {
        if (!p.trainable) continue;
        auto& [m, v] = state.moments[p.name];
        if (m.empty()) {
            m.assign(p.value.numel(), S(0));
            v.assign(p.value.numel(), S(0));
        }
        S* w = p.value.data().data();
        const S* g = p.value.grad().data();
        for (std::size_t i = 0; i < m.size(); ++i) {
            m[i] = b1 * m[i] + (S(1) - b1) * g[i];
            v[i] = b2 * v[i] + (S(1) - b2) * g[i] * g[i];
            const S mhat = m[i] / S(bc1);
            const S vhat = v[i] / S(bc2);
            w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

}  // namespace ddnet
