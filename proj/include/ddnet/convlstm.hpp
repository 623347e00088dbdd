#pragma once

#include <cstdint>
#include <utility>

#include "ddnet/ops.hpp"

namespace ddnet {

/// Parameters of one ConvLSTM cell, no peephole terms.
/// Gate order along the leading kernel axis is (i, f, g, o).
template <class S>
struct ConvLSTMCell {
    int in_channels = 0;
    int hidden_channels = 0;
    int kernel_size = 0;
    Tensor<S> input_kernel;      // [4*hidden, in, k, k]
    Tensor<S> recurrent_kernel;  // [4*hidden, hidden, k, k]
    Tensor<S> gate_bias;         // [4*hidden]
};

inline std::int64_t convlstm_param_count(int in, int hidden, int k) {
    return std::int64_t(4) * hidden * (in + hidden) * k * k + std::int64_t(4) * hidden;
}

/// One ConvLSTM recurrence step:
///   gates = conv(x; Wx) + conv(h; Wh) + b, split as (i, f, g, o)
///   c' = sigmoid(f) * c + sigmoid(i) * tanh(g)
///   h' = sigmoid(o) * tanh(c')
template <class S>
std::pair<Tensor<S>, Tensor<S>> convlstm_step(const ConvLSTMCell<S>& cell,
                                              Tensor<S> x, Tensor<S> h, Tensor<S> c) {
    const int hid = cell.hidden_channels;
    detail::require(x.shape().size() == 3 && x.dim(0) == cell.in_channels,
                    "convlstm_step: input channels mismatch");
    detail::require(h.shape().size() == 3 && h.dim(0) == hid && c.shape() == h.shape(),
                    "convlstm_step: state shape mismatch");

    Tensor<S> zero_bias({4 * hid});
    Tensor<S> gates = add(conv2d(x, cell.input_kernel, cell.gate_bias),
                          conv2d(h, cell.recurrent_kernel, zero_bias));
    Tensor<S> i = apply_activation(slice_channels(gates, 0, hid), Activation::Sigmoid);
    Tensor<S> f = apply_activation(slice_channels(gates, hid, 2 * hid), Activation::Sigmoid);
    Tensor<S> g = apply_activation(slice_channels(gates, 2 * hid, 3 * hid), Activation::Tanh);
    Tensor<S> o = apply_activation(slice_channels(gates, 3 * hid, 4 * hid), Activation::Sigmoid);

    Tensor<S> c_next = add(mul(f, c), mul(i, g));
    Tensor<S> h_next = mul(o, apply_activation(c_next, Activation::Tanh));
    return {h_next, c_next};
}

}  // namespace ddnet
