#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

#include "adam.hpp"
#include "checkpoint.hpp"
#include "network.hpp"
#include "rng.hpp"
#include "support/refnet.hpp"

using namespace hfid;

namespace {

Tensor random_tensor(Dims d, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(d);
    for (int64_t i = 0; i < t.size(); ++i)
        t.data()[i] = static_cast<float>(rng.uniform(lo, hi));
    return t;
}

using CachePtr = std::unique_ptr<ForwardCache, CacheDeleter>;

// Central finite differences on the double-precision reference forward,
// compared against the analytic float gradient. Step 1e-3.
void check_gradients(const NetworkSpec& spec, uint64_t seed, double rel_tol = 1e-3) {
    Rng rng(seed);
    NetworkParams params = xavier_init(spec, seed);
    Tensor input = random_tensor(Dims{2, spec.input.c, spec.input.h, spec.input.w}, rng);

    LayerShape os = spec.output_shape();
    Tensor probe = random_tensor(Dims{2, os.c, os.h, os.w}, rng);
    std::vector<double> probe64(probe.data(), probe.data() + probe.size());

    CachePtr cache(cache_create());
    NetworkParams work = params;
    forward(spec, work, input, Mode::Train, cache.get());
    Tensor dinput;
    NetworkParams grads = backward(spec, params, *cache, probe, &dinput);

    const double h = 1e-3;
    auto fd_check = [&](Tensor& host, const Tensor& analytic, const char* what, size_t li) {
        refnet::DTensor in64 = refnet::from_tensor(input);
        auto fd_at = [&](int64_t i, double step) {
            float keep = host.data()[i];
            host.data()[i] = keep + static_cast<float>(step);
            double applied_up = host.data()[i];
            refnet::DParams up = refnet::from_params(params);
            double lp = refnet::probe_loss(spec, up, in64, probe64);
            host.data()[i] = keep - static_cast<float>(step);
            double applied_dn = host.data()[i];
            refnet::DParams dn = refnet::from_params(params);
            double lm = refnet::probe_loss(spec, dn, in64, probe64);
            host.data()[i] = keep;
            // Divide by the perturbation that survived float32 rounding.
            return (lp - lm) / (applied_up - applied_dn);
        };
        for (int64_t i = 0; i < host.size(); ++i) {
            double fd = fd_at(i, h);
            double an = analytic.data()[i];
            double scale = std::max({std::fabs(fd), std::fabs(an), 1e-2});
            if (std::fabs(an - fd) > rel_tol * scale) {
                // A relu/leaky kink inside the difference interval breaks the
                // central-difference estimate; a true gradient bug persists
                // when the step shrinks.
                fd = fd_at(i, 1e-5);
                scale = std::max({std::fabs(fd), std::fabs(an), 1e-2});
            }
            INFO(spec.name << " layer " << li + 1 << " " << what << " index " << i
                           << " fd=" << fd << " analytic=" << an);
            CHECK(std::fabs(an - fd) <= rel_tol * scale);
        }
    };

    for (size_t li = 0; li < spec.layers.size(); ++li) {
        LayerParams& p = params.layers[li];
        const LayerParams& g = grads.layers[li];
        if (!p.weight.empty()) fd_check(p.weight, g.weight, "weight", li);
        if (!p.bias.empty()) fd_check(p.bias, g.bias, "bias", li);
        if (!p.bn_scale.empty()) fd_check(p.bn_scale, g.bn_scale, "bn_scale", li);
        if (!p.bn_shift.empty()) fd_check(p.bn_shift, g.bn_shift, "bn_shift", li);
    }

    // Input gradient on a subsample of elements.
    refnet::DParams p64 = refnet::from_params(params);
    auto input_fd_at = [&](int64_t i, double step) {
        refnet::DTensor in64 = refnet::from_tensor(input);
        in64.v[static_cast<size_t>(i)] += step;
        double lp = refnet::probe_loss(spec, p64, in64, probe64);
        in64.v[static_cast<size_t>(i)] -= 2.0 * step;
        double lm = refnet::probe_loss(spec, p64, in64, probe64);
        return (lp - lm) / (2.0 * step);
    };
    for (int64_t i = 0; i < input.size(); i += std::max<int64_t>(1, input.size() / 37)) {
        double fd = input_fd_at(i, h);
        double an = dinput.data()[i];
        double scale = std::max({std::fabs(fd), std::fabs(an), 1e-2});
        if (std::fabs(an - fd) > rel_tol * scale) {
            fd = input_fd_at(i, 1e-5);
            scale = std::max({std::fabs(fd), std::fabs(an), 1e-2});
        }
        INFO(spec.name << " input grad index " << i << " fd=" << fd << " analytic=" << an);
        CHECK(std::fabs(an - fd) <= rel_tol * scale);
    }
}

NetworkSpec single_layer(LayerSpec l, LayerShape input) {
    NetworkSpec s;
    s.name = "single";
    s.input = input;
    s.layers = {l};
    return s;
}

} // namespace

TEST_CASE("canonical shape chains") {
    NetworkSpec d = discriminator_spec();
    validate_spec(d);
    LayerShape pre_fc = d.shape_at(static_cast<int>(d.layers.size()) - 2);
    CHECK(pre_fc.c == 256);
    CHECK(pre_fc.h == 8);
    CHECK(pre_fc.w == 8);
    CHECK(d.output_shape().c == 2);

    NetworkSpec hcd = hcd_spec();
    validate_spec(hcd);
    CHECK(hcd.output_shape().c == 4);
    CHECK(hcd.output_shape().h == 64);
    CHECK(hcd.output_shape().w == 64);

    NetworkSpec r = refiner_spec();
    validate_spec(r);
    CHECK(r.output_shape().c == 3);
    CHECK(r.output_shape().h == 64);

    NetworkSpec pi = pi_spec(8);
    validate_spec(pi);
    // Pools sit at listing positions 10, 13, 16; the last one leaves 8x8x256.
    CHECK(pi.layers[9].kind == LayerKind::MaxPool2x2);
    CHECK(pi.layers[12].kind == LayerKind::MaxPool2x2);
    CHECK(pi.layers[15].kind == LayerKind::MaxPool2x2);
    LayerShape after_pool3 = pi.shape_at(15);
    CHECK(after_pool3.c == 256);
    CHECK(after_pool3.h == 8);
    CHECK(after_pool3.w == 8);
    CHECK(pi.shape_at(16).c == 4096);
    CHECK(pi.shape_at(17).c == 4096);
    CHECK(pi.shape_at(18).c == 8);
    CHECK(pi.output_shape().c == 8);
}

TEST_CASE("forward output dims and batch handling") {
    Rng rng(7);
    NetworkSpec d = discriminator_spec();
    NetworkParams p = xavier_init(d, 1);
    Tensor logits = forward_eval(d, p, random_tensor(Dims{1, 3, 64, 64}, rng));
    CHECK(logits.dims() == Dims{1, 2, 1, 1});

    NetworkSpec hcd = hcd_spec();
    NetworkParams hp = xavier_init(hcd, 2);
    Tensor out = forward_eval(hcd, hp, random_tensor(Dims{1, 3, 64, 64}, rng));
    CHECK(out.dims() == Dims{1, 4, 64, 64});
    CHECK(all_finite(out));
}

TEST_CASE("identity kernel conv passes input through") {
    LayerShape in{3, 8, 8};
    NetworkSpec s = single_layer(
        LayerSpec{LayerKind::Conv3x3, 1, 3, Activation::None, false}, in);
    NetworkParams p = xavier_init(s, 0);
    // Weight = centered identity: out map i copies in map i.
    for (int64_t i = 0; i < p.layers[0].weight.size(); ++i)
        p.layers[0].weight.data()[i] = 0.0f;
    for (int64_t c = 0; c < 3; ++c)
        p.layers[0].weight.at(c, c, 1, 1) = 1.0f;
    Tensor input(Dims{1, 3, 8, 8}, 0.37f);
    Tensor out = forward_eval(s, p, input);
    CHECK(max_abs_diff(out, input) == 0.0f);
}

TEST_CASE("input shape mismatch is rejected with layer context") {
    NetworkSpec d = discriminator_spec();
    NetworkParams p = xavier_init(d, 1);
    Tensor bad(Dims{1, 3, 32, 32});
    CHECK_THROWS_AS(forward_eval(d, p, bad), Error);
}

TEST_CASE("float forward matches double reference") {
    NetworkSpec s;
    s.name = "mix";
    s.input = {3, 8, 8};
    s.layers = {
        LayerSpec{LayerKind::Conv3x3, 1, 6, Activation::Relu, true},
        LayerSpec{LayerKind::Conv3x3, 2, 5, Activation::LeakyRelu, false},
        LayerSpec{LayerKind::MaxPool2x2, 2, 0, Activation::None, false},
        LayerSpec{LayerKind::FullyConnected, 1, 7, Activation::Tanh, false},
        LayerSpec{LayerKind::FullyConnected, 1, 3, Activation::None, false},
        LayerSpec{LayerKind::Softmax, 1, 0, Activation::None, false},
    };
    validate_spec(s);
    Rng rng(11);
    NetworkParams p = xavier_init(s, 11);
    Tensor input = random_tensor(Dims{3, 3, 8, 8}, rng);
    NetworkParams work = p;
    Tensor out = forward(s, work, input, Mode::Train);
    refnet::DTensor ref = refnet::forward(s, refnet::from_params(p), refnet::from_tensor(input));
    double max_diff = 0.0;
    for (int64_t i = 0; i < out.size(); ++i)
        max_diff = std::max(max_diff, std::fabs(out.data()[i] - ref.v[static_cast<size_t>(i)]));
    CHECK(max_diff < 1e-4);
}

TEST_CASE("gradient check: conv stride 1") {
    check_gradients(single_layer(LayerSpec{LayerKind::Conv3x3, 1, 3, Activation::Relu, false},
                                 LayerShape{2, 6, 6}),
                    101);
}

TEST_CASE("gradient check: conv stride 2 with batch norm") {
    check_gradients(single_layer(LayerSpec{LayerKind::Conv3x3, 2, 4, Activation::LeakyRelu, true},
                                 LayerShape{3, 8, 8}),
                    102);
}

TEST_CASE("gradient check: conv tanh") {
    check_gradients(single_layer(LayerSpec{LayerKind::Conv3x3, 1, 2, Activation::Tanh, false},
                                 LayerShape{2, 5, 5}),
                    103);
}

TEST_CASE("gradient check: maxpool") {
    check_gradients(single_layer(LayerSpec{LayerKind::MaxPool2x2, 2, 0, Activation::None, false},
                                 LayerShape{3, 6, 6}),
                    104);
}

TEST_CASE("gradient check: fully connected") {
    check_gradients(single_layer(LayerSpec{LayerKind::FullyConnected, 1, 5, Activation::Relu, false},
                                 LayerShape{2, 4, 4}),
                    105);
}

TEST_CASE("gradient check: softmax head") {
    NetworkSpec s;
    s.name = "sm";
    s.input = {2, 3, 3};
    s.layers = {
        LayerSpec{LayerKind::FullyConnected, 1, 4, Activation::None, false},
        LayerSpec{LayerKind::Softmax, 1, 0, Activation::None, false},
    };
    check_gradients(s, 106);
}

TEST_CASE("gradient check: three-layer compositions") {
    NetworkSpec a;
    a.name = "comp-a";
    a.input = {2, 8, 8};
    a.layers = {
        LayerSpec{LayerKind::Conv3x3, 1, 4, Activation::Relu, true},
        LayerSpec{LayerKind::MaxPool2x2, 2, 0, Activation::None, false},
        LayerSpec{LayerKind::FullyConnected, 1, 3, Activation::None, false},
    };
    check_gradients(a, 201);

    NetworkSpec b;
    b.name = "comp-b";
    b.input = {3, 8, 8};
    b.layers = {
        LayerSpec{LayerKind::Conv3x3, 2, 4, Activation::LeakyRelu, false},
        LayerSpec{LayerKind::Conv3x3, 1, 3, Activation::Tanh, true},
        LayerSpec{LayerKind::FullyConnected, 1, 2, Activation::None, false},
    };
    check_gradients(b, 202);

    NetworkSpec c;
    c.name = "comp-c";
    c.input = {2, 6, 6};
    c.layers = {
        LayerSpec{LayerKind::Conv3x3, 1, 5, Activation::Relu, true},
        LayerSpec{LayerKind::FullyConnected, 1, 4, Activation::Relu, false},
        LayerSpec{LayerKind::Softmax, 1, 0, Activation::None, false},
    };
    check_gradients(c, 203);
}

TEST_CASE("zero output gradient yields zero parameter gradients") {
    NetworkSpec s = single_layer(LayerSpec{LayerKind::Conv3x3, 1, 4, Activation::Relu, true},
                                 LayerShape{2, 6, 6});
    NetworkParams p = xavier_init(s, 9);
    Rng rng(9);
    Tensor input = random_tensor(Dims{2, 2, 6, 6}, rng);
    CachePtr cache(cache_create());
    NetworkParams work = p;
    Tensor out = forward(s, work, input, Mode::Train, cache.get());
    Tensor zero(out.dims());
    NetworkParams g = backward(s, p, *cache, zero);
    for (const auto& lg : g.layers) {
        for (const Tensor* t : {&lg.weight, &lg.bias, &lg.bn_scale, &lg.bn_shift})
            for (int64_t i = 0; i < t->size(); ++i)
                CHECK(t->data()[i] == 0.0f);
    }
}

TEST_CASE("fc weight gradient is outer product for one sample") {
    NetworkSpec s = single_layer(
        LayerSpec{LayerKind::FullyConnected, 1, 3, Activation::None, false}, LayerShape{2, 2, 2});
    NetworkParams p = xavier_init(s, 5);
    Rng rng(5);
    Tensor input = random_tensor(Dims{1, 2, 2, 2}, rng);
    Tensor dout = random_tensor(Dims{1, 3, 1, 1}, rng);
    CachePtr cache(cache_create());
    NetworkParams work = p;
    forward(s, work, input, Mode::Train, cache.get());
    NetworkParams g = backward(s, p, *cache, dout);
    std::vector<float> x = flatten_chw(input);
    for (int64_t o = 0; o < 3; ++o)
        for (int64_t i = 0; i < 8; ++i) {
            float expect = dout.data()[o] * x[static_cast<size_t>(i)];
            CHECK(g.layers[0].weight.data()[o * 8 + i] == doctest::Approx(expect).epsilon(1e-6));
        }
}

TEST_CASE("eval-mode cache is rejected by backward") {
    NetworkSpec s = single_layer(LayerSpec{LayerKind::Conv3x3, 1, 2, Activation::None, false},
                                 LayerShape{1, 4, 4});
    NetworkParams p = xavier_init(s, 3);
    Rng rng(3);
    Tensor input = random_tensor(Dims{1, 1, 4, 4}, rng);
    CachePtr cache(cache_create());
    NetworkParams work = p;
    Tensor out = forward(s, work, input, Mode::Eval, cache.get());
    Tensor dout(out.dims(), 1.0f);
    CHECK_THROWS_AS(backward(s, p, *cache, dout), Error);
}

TEST_CASE("batch norm normalizes per channel in train mode") {
    NetworkSpec s = single_layer(LayerSpec{LayerKind::Conv3x3, 1, 4, Activation::None, true},
                                 LayerShape{2, 16, 16});
    NetworkParams p = xavier_init(s, 21); // scale 1, shift 0 at init
    Rng rng(21);
    Tensor input = random_tensor(Dims{4, 2, 16, 16}, rng);
    NetworkParams work = p;
    Tensor out = forward(s, work, input, Mode::Train);
    int64_t m = 4 * 16 * 16;
    for (int64_t c = 0; c < 4; ++c) {
        double sum = 0.0, sq = 0.0;
        for (int64_t n = 0; n < 4; ++n)
            for (int64_t y = 0; y < 16; ++y)
                for (int64_t x = 0; x < 16; ++x) {
                    double v = out.at(n, c, y, x);
                    sum += v;
                    sq += v * v;
                }
        double mean = sum / m;
        double var = sq / m - mean * mean;
        CHECK(std::fabs(mean) < 1e-3);
        CHECK(std::fabs(var - 1.0) < 1e-3);
    }
}

TEST_CASE("batch norm eval mode uses running statistics") {
    NetworkSpec s = single_layer(LayerSpec{LayerKind::Conv3x3, 1, 2, Activation::None, true},
                                 LayerShape{1, 8, 8});
    NetworkParams p = xavier_init(s, 22);
    Rng rng(22);
    Tensor input = random_tensor(Dims{2, 1, 8, 8}, rng);
    NetworkParams trained = p;
    forward(s, trained, input, Mode::Train);
    // Running stats moved off their (0,1) init.
    CHECK(trained.layers[0].bn_running_mean.data()[0] != 0.0f);
    // Eval forward leaves params untouched and differs from train output.
    Tensor eval1 = forward_eval(s, trained, input);
    Tensor eval2 = forward_eval(s, trained, input);
    CHECK(max_abs_diff(eval1, eval2) == 0.0f);
}

TEST_CASE("determinism: same seed gives bit-identical params and outputs") {
    NetworkSpec s = hcd_spec();
    NetworkParams a = xavier_init(s, 42);
    NetworkParams b = xavier_init(s, 42);
    CHECK(a == b);
    Rng rng(42);
    Tensor input = random_tensor(Dims{1, 3, 64, 64}, rng);
    Tensor oa = forward_eval(s, a, input);
    Tensor ob = forward_eval(s, b, input);
    CHECK(max_abs_diff(oa, ob) == 0.0f);
}

TEST_CASE("xavier init statistics") {
    // 64->64 conv: fan_in = fan_out = 576, bound = sqrt(6/1152).
    NetworkSpec s = single_layer(LayerSpec{LayerKind::Conv3x3, 1, 64, Activation::None, false},
                                 LayerShape{64, 8, 8});
    NetworkParams p = xavier_init(s, 77);
    const Tensor& w = p.layers[0].weight;
    REQUIRE(w.size() == 64 * 64 * 9); // 36864 draws
    double sum = 0.0, sq = 0.0;
    for (int64_t i = 0; i < w.size(); ++i) {
        sum += w.data()[i];
        sq += static_cast<double>(w.data()[i]) * w.data()[i];
    }
    double mean = sum / static_cast<double>(w.size());
    double var = sq / static_cast<double>(w.size()) - mean * mean;
    double expect = 2.0 / 1152.0;
    CHECK(std::fabs(var - expect) < 0.1 * expect);
    for (int64_t i = 0; i < p.layers[0].bias.size(); ++i)
        CHECK(p.layers[0].bias.data()[i] == 0.0f);
}

TEST_CASE("adam: zero gradient leaves params unchanged") {
    NetworkSpec s = single_layer(LayerSpec{LayerKind::FullyConnected, 1, 3, Activation::None, false},
                                 LayerShape{2, 2, 2});
    NetworkParams p = xavier_init(s, 1);
    NetworkParams before = p;
    NetworkParams zero = p;
    for (auto& l : zero.layers) {
        if (!l.weight.empty()) l.weight = Tensor(l.weight.dims());
        if (!l.bias.empty()) l.bias = Tensor(l.bias.dims());
    }
    AdamState st = adam_init(p);
    adam_step(p, zero, st, 0.1f);
    CHECK(p == before);
    CHECK(st.step == 1);
}

TEST_CASE("adam: first step matches the hand-computed value") {
    // Single scalar w=1, g=1, lr=0.1: bias-corrected mhat=vhat=1 -> w ~ 0.9.
    NetworkSpec s = single_layer(LayerSpec{LayerKind::FullyConnected, 1, 1, Activation::None, false},
                                 LayerShape{1, 1, 1});
    NetworkParams p = xavier_init(s, 1);
    p.layers[0].weight.data()[0] = 1.0f;
    NetworkParams g = p;
    g.layers[0].weight.data()[0] = 1.0f;
    g.layers[0].bias = Tensor(g.layers[0].bias.dims());
    AdamState st = adam_init(p);
    adam_step(p, g, st, 0.1f);
    CHECK(p.layers[0].weight.data()[0] == doctest::Approx(0.9f).epsilon(1e-5));
    CHECK(st.step == 1);
}

TEST_CASE("adam: identical runs are bit-identical") {
    NetworkSpec s = single_layer(LayerSpec{LayerKind::Conv3x3, 1, 4, Activation::Relu, false},
                                 LayerShape{2, 6, 6});
    auto run = [&] {
        NetworkParams p = xavier_init(s, 55);
        AdamState st = adam_init(p);
        Rng rng(55);
        for (int step = 0; step < 5; ++step) {
            Tensor input = random_tensor(Dims{2, 2, 6, 6}, rng);
            CachePtr cache(cache_create());
            Tensor out = forward(s, p, input, Mode::Train, cache.get());
            NetworkParams grads = backward(s, p, *cache, out);
            adam_step(p, grads, st, 1e-3f);
        }
        return p;
    };
    CHECK(run() == run());
}

TEST_CASE("softmax op") {
    auto p = softmax({0.0f, 0.0f});
    CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-7));
    CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-7));

    auto big = softmax({1000.0f, 1000.0f});
    CHECK(big[0] == doctest::Approx(0.5).epsilon(1e-7));
    CHECK(std::isfinite(big[0]));

    auto q = softmax({1.0f, 2.0f, 3.0f});
    std::vector<double> ref = softmax64({1.0, 2.0, 3.0});
    double sum = 0.0;
    for (size_t i = 0; i < q.size(); ++i) {
        CHECK(std::fabs(q[i] - ref[i]) < 1e-6);
        CHECK(q[i] > 0.0f);
        sum += q[i];
    }
    CHECK(std::fabs(sum - 1.0) < 1e-6);
}

TEST_CASE("checkpoint roundtrip is bit-identical") {
    NetworkSpec s = hcd_spec();
    NetworkParams p = xavier_init(s, 1234);
    // Move running stats off their init values so all six tensors matter.
    Rng rng(4);
    Tensor input = random_tensor(Dims{2, 3, 64, 64}, rng);
    forward(s, p, input, Mode::Train);
    std::string path = "/tmp/hfid_test_ckpt.hfck";
    save_checkpoint(p, path);
    NetworkParams q = load_checkpoint(path);
    CHECK(p == q);
    validate_params(s, q);
    std::remove(path.c_str());
}

TEST_CASE("checkpoint header carries the entry count") {
    NetworkSpec s = refiner_spec();
    NetworkParams p = xavier_init(s, 3);
    std::string path = "/tmp/hfid_test_count.hfck";
    save_checkpoint(p, path);
    std::ifstream in(path, std::ios::binary);
    char magic[4];
    uint16_t version;
    uint32_t count;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), 2);
    in.read(reinterpret_cast<char*>(&count), 4);
    CHECK(std::string(magic, 4) == "HFCK");
    CHECK(version == 1);
    // 8 conv layers x (weight + bias) + seed entry.
    CHECK(count == 17);
    std::remove(path.c_str());
}

TEST_CASE("checkpoint rejects corrupted headers with distinct errors") {
    NetworkSpec s = single_layer(LayerSpec{LayerKind::FullyConnected, 1, 2, Activation::None, false},
                                 LayerShape{1, 2, 2});
    NetworkParams p = xavier_init(s, 8);
    std::string path = "/tmp/hfid_test_bad.hfck";
    save_checkpoint(p, path);

    std::ifstream in(path, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), {});
    in.close();

    auto write_bytes = [&](const std::vector<char>& b) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(b.data(), static_cast<std::streamsize>(b.size()));
    };

    std::vector<char> bad = bytes;
    bad[0] = 'X';
    write_bytes(bad);
    try {
        load_checkpoint(path);
        FAIL("expected bad magic");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::BadMagic);
    }

    bad = bytes;
    bad[4] = 9;
    write_bytes(bad);
    try {
        load_checkpoint(path);
        FAIL("expected bad version");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::BadVersion);
    }

    bad = bytes;
    bad.resize(bytes.size() - 7);
    write_bytes(bad);
    try {
        load_checkpoint(path);
        FAIL("expected truncation");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Truncated);
    }

    // Oversized dim in the first entry after the seed: patch its dims field.
    // Seed entry: 2 (len) + 13 (name) + 16 (dims) + 8 (payload). Header is 10.
    bad = bytes;
    size_t first_entry = 10 + 2 + 13 + 16 + 8;
    uint32_t huge = 0x7fffffff;
    std::memcpy(bad.data() + first_entry + 2 + 13, &huge, 4);
    write_bytes(bad);
    try {
        load_checkpoint(path);
        FAIL("expected dim overflow");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DimOverflow);
    }

    std::remove(path.c_str());
}
