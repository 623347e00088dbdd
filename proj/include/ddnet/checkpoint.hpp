#pragma once

#include <optional>

#include "ddnet/network.hpp"
#include "ddnet/serialize.hpp"
#include "ddnet/weights.hpp"

namespace ddnet {

inline constexpr char kCheckpointMagic[4] = {'D', 'D', 'N', 'T'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

namespace detail {

inline void put_spec(ByteWriter& w, const NetworkSpec& spec) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(spec.in_channels));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(spec.out_channels));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(spec.hidden_channels));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(spec.kernels.size()));
    for (int k : spec.kernels) w.put<std::uint32_t>(static_cast<std::uint32_t>(k));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(spec.head_kernel));
}

inline NetworkSpec get_spec(ByteReader& r) {
    NetworkSpec spec;
    spec.in_channels = static_cast<int>(r.get<std::uint32_t>());
    spec.out_channels = static_cast<int>(r.get<std::uint32_t>());
    spec.hidden_channels = static_cast<int>(r.get<std::uint32_t>());
    const auto n = r.get<std::uint32_t>();
    spec.kernels.resize(n);
    for (auto& k : spec.kernels) k = static_cast<int>(r.get<std::uint32_t>());
    spec.head_kernel = static_cast<int>(r.get<std::uint32_t>());
    return spec;
}

}  // namespace detail

/// Serializes a weight set (and optionally its Adam state) to the "DDNT"
/// binary checkpoint format. Round trips are bit-exact.
template <class S>
void save_checkpoint(const NetworkWeights<S>& weights, const NetworkSpec& spec,
                     const std::string& path, const AdamState<S>* optimizer = nullptr) {
    ByteWriter w;
    w.raw(kCheckpointMagic, 4);
    w.put<std::uint16_t>(kCheckpointVersion);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(sizeof(S)));
    detail::put_spec(w, spec);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(weights.params.size()));
    for (const auto& p : weights.params) {
        w.put_string(p.name);
        w.put<std::uint8_t>(p.trainable ? 1 : 0);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(p.value.shape().size()));
        for (int d : p.value.shape()) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
        w.put_array(p.value.data());
    }
    if (optimizer) {
        w.put<std::uint8_t>(1);
        w.put<double>(optimizer->cfg.learning_rate);
        w.put<double>(optimizer->cfg.beta1);
        w.put<double>(optimizer->cfg.beta2);
        w.put<double>(optimizer->cfg.eps);
        w.put<std::int64_t>(optimizer->step_count);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(optimizer->moments.size()));
        for (const auto& [name, mv] : optimizer->moments) {
            w.put_string(name);
            w.put<std::uint64_t>(mv.first.size());
            w.put_array(mv.first);
            w.put_array(mv.second);
        }
    } else {
        w.put<std::uint8_t>(0);
    }
    seal_crc(w);
    write_file_bytes(path, w.bytes());
}

template <class S>
struct LoadedCheckpoint {
    NetworkSpec spec;
    NetworkWeights<S> weights;
    std::optional<AdamState<S>> optimizer;
};

template <class S>
LoadedCheckpoint<S> load_checkpoint(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    auto [payload, n] = check_crc(bytes, path);
    ByteReader r(payload, n, path);

    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw std::runtime_error(path + ": not a DDNT checkpoint");
    const auto version = r.get<std::uint16_t>();
    if (version != kCheckpointVersion)
        throw std::runtime_error(path + ": unsupported checkpoint version " +
                                 std::to_string(version));
    const auto prec = r.get<std::uint8_t>();
    if (prec != sizeof(S))
        throw std::runtime_error(path + ": precision mismatch, file holds " +
                                 std::to_string(prec * 8) + "-bit values");

    LoadedCheckpoint<S> out;
    out.spec = detail::get_spec(r);
    const auto count = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = r.get_string();
        const bool trainable = r.get<std::uint8_t>() != 0;
        const auto rank = r.get<std::uint32_t>();
        Shape shape(rank);
        for (auto& d : shape) d = static_cast<int>(r.get<std::uint32_t>());
        auto values = r.get_array<S>(shape_numel(shape));
        out.weights.add(std::move(name), Tensor<S>(std::move(shape), std::move(values)),
                        trainable);
    }
    if (r.get<std::uint8_t>() == 1) {
        AdamState<S> st;
        st.cfg.learning_rate = r.get<double>();
        st.cfg.beta1 = r.get<double>();
        st.cfg.beta2 = r.get<double>();
        st.cfg.eps = r.get<double>();
        st.step_count = r.get<std::int64_t>();
        const auto m = r.get<std::uint32_t>();
        for (std::uint32_t i = 0; i < m; ++i) {
            std::string name = r.get_string();
            const auto len = r.get<std::uint64_t>();
            auto first = r.get_array<S>(len);
            auto second = r.get_array<S>(len);
            st.moments[name] = {std::move(first), std::move(second)};
        }
        out.optimizer = std::move(st);
    }
    return out;
}

}  // namespace ddnet
