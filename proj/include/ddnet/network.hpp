#pragma once

#include <random>
#include <string>
#include <vector>

#include "ddnet/convlstm.hpp"
#include "ddnet/weights.hpp"

namespace ddnet {

/// Stack of ConvLSTM layers with batchnorm between them and a 3-D
/// convolution head over the stacked hidden sequence.
struct NetworkSpec {
    int in_channels = 0;
    int out_channels = 0;
    int hidden_channels = 0;
    std::vector<int> kernels;  // one per ConvLSTM layer
    int head_kernel = 3;       // cubic (time, H, W)

    int num_layers() const { return static_cast<int>(kernels.size()); }
    bool batchnorm_after(int layer) const { return layer + 1 < num_layers(); }

    void validate() const {
        detail::require(in_channels > 0 && out_channels > 0 && hidden_channels > 0,
                        "network spec: channel counts must be positive");
        detail::require(!kernels.empty(), "network spec: at least one ConvLSTM layer");
        for (int k : kernels)
            detail::require(k > 0 && k % 2 == 1, "network spec: kernel sizes must be odd");
        detail::require(head_kernel > 0 && head_kernel % 2 == 1,
                        "network spec: head kernel must be odd");
    }

    static NetworkSpec prednet_reference() { return {8, 2, 64, {7, 5, 3, 1}, 3}; }
    static NetworkSpec danet_reference() { return {2, 1, 64, {5, 3, 1}, 3}; }
    static NetworkSpec prednet_desk(int hidden = 8) { return {8, 2, hidden, {5, 3, 1}, 3}; }
    static NetworkSpec danet_desk(int hidden = 8) { return {2, 1, hidden, {5, 3, 1}, 3}; }
};

namespace detail {

template <class S>
Tensor<S> uniform_init(Shape shape, double limit, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-limit, limit);
    std::vector<S> v(shape_numel(shape));
    for (auto& x : v) x = static_cast<S>(dist(rng));
    return Tensor<S>(std::move(shape), std::move(v));
}

}  // namespace detail

/// Initializes weights for a NetworkSpec: uniform fan-in kernels, forget-gate
/// bias +1, batchnorm scale 1 / shift 0, moving stats (0, 1).
template <class S>
NetworkWeights<S> build_network(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng(seed);
    NetworkWeights<S> w;
    const int hid = spec.hidden_channels;
    for (int l = 0; l < spec.num_layers(); ++l) {
        const int in = (l == 0) ? spec.in_channels : hid;
        const int k = spec.kernels[static_cast<std::size_t>(l)];
        const std::string pre = "layer" + std::to_string(l) + ".";
        w.add(pre + "input_kernel",
              detail::uniform_init<S>({4 * hid, in, k, k}, std::sqrt(1.0 / (in * k * k)), rng));
        w.add(pre + "recurrent_kernel",
              detail::uniform_init<S>({4 * hid, hid, k, k}, std::sqrt(1.0 / (hid * k * k)), rng));
        Tensor<S> bias({4 * hid});
        for (int c = hid; c < 2 * hid; ++c) bias.data()[c] = S(1);  // forget gate
        w.add(pre + "gate_bias", std::move(bias));
        if (spec.batchnorm_after(l)) {
            Tensor<S> scale({hid});
            std::fill(scale.data().begin(), scale.data().end(), S(1));
            w.add(pre + "bn.scale", std::move(scale));
            w.add(pre + "bn.shift", Tensor<S>({hid}));
            w.add(pre + "bn.moving_mean", Tensor<S>({hid}), /*trainable=*/false);
            Tensor<S> mv({hid});
            std::fill(mv.data().begin(), mv.data().end(), S(1));
            w.add(pre + "bn.moving_var", std::move(mv), /*trainable=*/false);
        }
    }
    const int hk = spec.head_kernel;
    w.add("head.kernel",
          detail::uniform_init<S>({spec.out_channels, hid, hk, hk, hk},
                                  std::sqrt(1.0 / (hid * hk * hk * hk)), rng));
    w.add("head.bias", Tensor<S>({spec.out_channels}));
    return w;
}

template <class S>
NetworkWeights<S> build_prednet(const NetworkSpec& spec, std::uint64_t seed) {
    return build_network<S>(spec, seed);
}

template <class S>
NetworkWeights<S> build_danet(const NetworkSpec& spec, std::uint64_t seed) {
    return build_network<S>(spec, seed);
}

template <class S>
ConvLSTMCell<S> cell_view(NetworkWeights<S>& w, const NetworkSpec& spec, int layer) {
    const int in = (layer == 0) ? spec.in_channels : spec.hidden_channels;
    const std::string pre = "layer" + std::to_string(layer) + ".";
    return {in, spec.hidden_channels, spec.kernels[static_cast<std::size_t>(layer)],
            w.at(pre + "input_kernel"), w.at(pre + "recurrent_kernel"), w.at(pre + "gate_bias")};
}

/// Runs the network over an input sequence [L,Cin,H,W]; hidden and cell
/// states start at zero on every call. Returns per-step outputs
/// [L,Cout,H,W]; callers typically consume the last step.
template <class S>
Tensor<S> forward_net(NetworkWeights<S>& weights, const NetworkSpec& spec,
                      Tensor<S> input_sequence, BNMode mode,
                      S bn_momentum = S(0.99), S bn_eps = S(1e-3)) {
    const auto& is = input_sequence.shape();
    detail::require(is.size() == 4, "forward_net: input must be [L,C,H,W]");
    detail::require(is[1] == spec.in_channels,
                    "forward_net: expected " + std::to_string(spec.in_channels) +
                        " input channels, got " + std::to_string(is[1]));
    const int L = is[0], H = is[2], W = is[3];
    const int hid = spec.hidden_channels;

    std::vector<Tensor<S>> seq(static_cast<std::size_t>(L));
    for (int t = 0; t < L; ++t) seq[static_cast<std::size_t>(t)] = slice_step(input_sequence, t);

    for (int l = 0; l < spec.num_layers(); ++l) {
        ConvLSTMCell<S> cell = cell_view(weights, spec, l);
        Tensor<S> h({hid, H, W}), c({hid, H, W});
        for (int t = 0; t < L; ++t) {
            auto [hn, cn] = convlstm_step(cell, seq[static_cast<std::size_t>(t)], h, c);
            h = hn;
            c = cn;
            seq[static_cast<std::size_t>(t)] = h;
        }
        if (spec.batchnorm_after(l)) {
            const std::string pre = "layer" + std::to_string(l) + ".bn.";
            for (int t = 0; t < L; ++t)
                seq[static_cast<std::size_t>(t)] =
                    batchnorm(seq[static_cast<std::size_t>(t)], weights.at(pre + "scale"),
                              weights.at(pre + "shift"), weights.at(pre + "moving_mean"),
                              weights.at(pre + "moving_var"), mode, bn_momentum, bn_eps);
        }
    }
    return conv3d(stack_steps(std::move(seq)), weights.at("head.kernel"), weights.at("head.bias"));
}

}  // namespace ddnet
