#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "ddnet/gradcheck.hpp"
#include "ddnet/network.hpp"

using namespace ddnet;

namespace {

TensorD random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = dist(rng);
    return TensorD(std::move(shape), std::move(v));
}

}  // namespace

TEST_CASE("convlstm_step with everything zero") {
    const int in = 2, hid = 3, k = 3, H = 4, W = 5;
    ConvLSTMCell<double> cell{in, hid, k, TensorD({4 * hid, in, k, k}),
                              TensorD({4 * hid, hid, k, k}), TensorD({4 * hid})};
    TensorD x({in, H, W}), h({hid, H, W}), c({hid, H, W});
    auto [hn, cn] = convlstm_step(cell, x, h, c);
    // gates sigmoid(0)=0.5, g=tanh(0)=0 -> c'=0, h'=0
    for (double v : cn.data()) CHECK(v == 0.0);
    for (double v : hn.data()) CHECK(v == 0.0);
    CHECK(hn.shape() == Shape{hid, H, W});
    CHECK(cn.shape() == Shape{hid, H, W});
}

TEST_CASE("convlstm parameter count formula reproduces Table rows") {
    CHECK(convlstm_param_count(8, 64, 7) == 903424);
    CHECK(convlstm_param_count(64, 64, 5) == 819456);
    CHECK(convlstm_param_count(64, 64, 3) == 295168);
    CHECK(convlstm_param_count(64, 64, 1) == 33024);
    CHECK(convlstm_param_count(2, 64, 5) == 422656);
    CHECK(convlstm_param_count(64, 64, 1) == 33024);
}

TEST_CASE("prednet reference per-layer and total parameter counts") {
    auto spec = NetworkSpec::prednet_reference();
    auto w = build_prednet<double>(spec, 0);

    auto layer_count = [&](const std::string& pre) {
        std::int64_t n = 0;
        for (auto& p : w.params)
            if (p.name.rfind(pre, 0) == 0) n += static_cast<std::int64_t>(p.value.numel());
        return n;
    };
    CHECK(layer_count("layer0.input_kernel") + layer_count("layer0.recurrent_kernel") +
              layer_count("layer0.gate_bias") == 903424);
    CHECK(layer_count("layer0.bn") == 256);
    CHECK(layer_count("layer1.input_kernel") + layer_count("layer1.recurrent_kernel") +
              layer_count("layer1.gate_bias") == 819456);
    CHECK(layer_count("layer1.bn") == 256);
    CHECK(layer_count("layer2.input_kernel") + layer_count("layer2.recurrent_kernel") +
              layer_count("layer2.gate_bias") == 295168);
    CHECK(layer_count("layer2.bn") == 256);
    CHECK(layer_count("layer3.") == 33024);
    CHECK(layer_count("head.") == 3458);

    auto c = count_params(w);
    CHECK(c.total == 2055298);
    CHECK(c.trainable == 2054914);
    CHECK(c.non_trainable == 384);
}

TEST_CASE("danet reference parameter counts") {
    auto spec = NetworkSpec::danet_reference();
    auto w = build_danet<double>(spec, 0);
    CHECK(w.at("layer0.input_kernel").numel() + w.at("layer0.recurrent_kernel").numel() +
              w.at("layer0.gate_bias").numel() == 422656);
    CHECK(w.at("head.kernel").numel() + w.at("head.bias").numel() == 1729);
    auto c = count_params(w);
    CHECK(c.total == 753089);
    CHECK(c.trainable == 752833);
    CHECK(c.non_trainable == 256);
}

TEST_CASE("desk-scale spec matches closed-form parameter arithmetic") {
    auto spec = NetworkSpec::prednet_desk(8);
    auto w = build_network<double>(spec, 0);
    std::int64_t expect = convlstm_param_count(8, 8, 5) + convlstm_param_count(8, 8, 3) +
                          convlstm_param_count(8, 8, 1) + 2 * 4 * 8 /* two bn blocks */ +
                          (8 * 2 * 27 + 2);
    CHECK(count_params(w).total == expect);
}

TEST_CASE("count_params on empty weight set") {
    NetworkWeights<double> w;
    auto c = count_params(w);
    CHECK(c.total == 0);
    CHECK(c.trainable == 0);
    CHECK(c.non_trainable == 0);
}

TEST_CASE("forward_net shape contract and zero-weight output") {
    NetworkSpec spec{3, 2, 4, {3, 1}, 3};
    auto w = build_network<double>(spec, 42);
    std::mt19937_64 rng(5);
    TensorD x = random_tensor({2, 3, 6, 8}, rng);
    TensorD y = forward_net(w, spec, x, BNMode::Infer);
    CHECK(y.shape() == Shape{2, 2, 6, 8});

    for (auto& p : w.params)
        if (p.name != "layer0.bn.moving_var")
            std::fill(p.value.data().begin(), p.value.data().end(), 0.0);
    TensorD y0 = forward_net(w, spec, x, BNMode::Infer);
    for (double v : y0.data()) CHECK(v == 0.0);
}

TEST_CASE("forward_net is stateful across the sequence") {
    NetworkSpec spec{2, 1, 4, {3}, 3};
    auto w = build_network<double>(spec, 7);
    std::mt19937_64 rng(9);
    TensorD frame = random_tensor({1, 2, 5, 5}, rng);
    std::vector<double> two(frame.data());
    two.insert(two.end(), frame.data().begin(), frame.data().end());
    TensorD seq2({2, 2, 5, 5}, std::move(two));

    TensorD y1 = forward_net(w, spec, frame, BNMode::Infer);
    TensorD y2 = forward_net(w, spec, seq2, BNMode::Infer);
    // last-step outputs differ in general: the cell state evolved over the sequence
    double diff = 0;
    const std::size_t n = 25;
    for (std::size_t i = 0; i < n; ++i)
        diff = std::max(diff, std::abs(y2.data()[n + i] - y1.data()[i]));
    CHECK(diff > 1e-8);
}

TEST_CASE("forward_net deterministic in infer mode") {
    NetworkSpec spec{2, 1, 4, {3, 1}, 3};
    auto w = build_network<double>(spec, 3);
    std::mt19937_64 rng(10);
    TensorD x = random_tensor({1, 2, 6, 6}, rng);
    TensorD a = forward_net(w, spec, x, BNMode::Infer);
    TensorD b = forward_net(w, spec, x, BNMode::Infer);
    CHECK(a.data() == b.data());
}

TEST_CASE("grad_check through a ConvLSTM cell") {
    const int in = 2, hid = 3, k = 3, H = 5, W = 5;
    std::mt19937_64 rng(21);
    NetworkWeights<double> w;
    w.add("wx", random_tensor({4 * hid, in, k, k}, rng, 0.4));
    w.add("wh", random_tensor({4 * hid, hid, k, k}, rng, 0.4));
    w.add("b", random_tensor({4 * hid}, rng, 0.2));
    TensorD x = random_tensor({in, H, W}, rng);
    TensorD h0 = random_tensor({hid, H, W}, rng, 0.3);
    TensorD c0 = random_tensor({hid, H, W}, rng, 0.3);
    TensorD target = random_tensor({hid, H, W}, rng, 0.5);
    auto f = [&](NetworkWeights<double>& p) {
        ConvLSTMCell<double> cell{in, hid, k, p.at("wx"), p.at("wh"), p.at("b")};
        auto [hn, cn] = convlstm_step(cell, x, h0, c0);
        return mse_loss(hn, target);
    };
    CHECK(grad_check<double>(f, w, 12) < 1e-6);
}

TEST_CASE("grad_check end-to-end on a hidden-4 PredNet") {
    NetworkSpec spec{8, 2, 4, {5, 3, 1}, 3};
    auto w = build_network<double>(spec, 99);
    std::mt19937_64 rng(31);
    TensorD x = random_tensor({1, 8, 6, 6}, rng);
    TensorD target = random_tensor({1, 2, 6, 6}, rng, 0.5);
    auto f = [&](NetworkWeights<double>& p) {
        return mse_loss(forward_net(p, spec, x, BNMode::Infer), target);
    };
    CHECK(grad_check<double>(f, w, 4) < 1e-4);
}

TEST_CASE("translation equivariance on the interior") {
    NetworkSpec spec{1, 1, 4, {3, 3}, 3};
    auto w = build_network<double>(spec, 17);
    const int H = 24, W = 24;
    auto response = [&](int cy, int cx) {
        TensorD x({1, 1, H, W});
        x.data()[cy * W + cx] = 1.0;
        return forward_net(w, spec, x, BNMode::Infer);
    };
    // shift the localized input by (2, 3); responses must shift identically
    TensorD a = response(10, 9);
    TensorD b = response(12, 12);
    // compare away from boundaries (>= 2 * max kernel cells)
    for (int y = 8; y < 16; ++y)
        for (int x = 8; x < 16; ++x)
            CHECK(a.data()[y * W + x] ==
                  doctest::Approx(b.data()[(y + 2) * W + (x + 3)]).epsilon(1e-9));
}

TEST_CASE("forward_net rejects channel mismatch") {
    NetworkSpec spec{3, 1, 4, {3}, 3};
    auto w = build_network<double>(spec, 1);
    TensorD x({1, 2, 4, 4});
    CHECK_THROWS_AS(forward_net(w, spec, x, BNMode::Infer), std::invalid_argument);
}
