#pragma once

#include <functional>
#include <random>

#include "ddnet/weights.hpp"

namespace ddnet {

/// Compares reverse-mode gradients against central finite differences on a
/// random subset of parameter entries. Returns the maximum relative error.
/// Meaningful in 64-bit mode only.
template <class S>
double grad_check(const std::function<Tensor<S>(NetworkWeights<S>&)>& f,
                  NetworkWeights<S>& weights,
                  int samples_per_param = 8,
                  double step = 1e-5,
                  std::uint64_t seed = 0) {
    weights.zero_grad();
    Tensor<S> loss = f(weights);
    loss.backward();

    std::mt19937_64 rng(seed);
    double max_rel = 0.0;
    for (auto& p : weights.params) {
        if (!p.trainable) continue;
        const std::size_t n = p.value.numel();
        const int samples = std::min<std::size_t>(samples_per_param, n);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        for (int s = 0; s < samples; ++s) {
            const std::size_t i = pick(rng);
            const S saved = p.value.data()[i];
            p.value.data()[i] = saved + S(step);
            const double fp = static_cast<double>(f(weights).item());
            p.value.data()[i] = saved - S(step);
            const double fm = static_cast<double>(f(weights).item());
            p.value.data()[i] = saved;
            const double numeric = (fp - fm) / (2.0 * step);
            const double analytic = static_cast<double>(p.value.grad()[i]);
            const double rel = std::abs(analytic - numeric) /
                               std::max({1.0, std::abs(analytic), std::abs(numeric)});
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace ddnet
