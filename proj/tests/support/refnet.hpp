#ifndef HFID_TESTS_REFNET_HPP
#define HFID_TESTS_REFNET_HPP

// Double-precision reference forward pass, written as plain NCHW loops with
// no shared code with the production engine. Finite-difference gradient
// checks and cross-implementation comparisons run against this.

#include <algorithm>
#include <cmath>
#include <vector>

#include "network.hpp"

namespace refnet {

struct DTensor {
    int64_t n = 0, c = 0, h = 0, w = 0;
    std::vector<double> v;

    DTensor() = default;
    DTensor(int64_t n_, int64_t c_, int64_t h_, int64_t w_)
        : n(n_), c(c_), h(h_), w(w_), v(static_cast<size_t>(n_ * c_ * h_ * w_), 0.0) {}

    double& at(int64_t in, int64_t ic, int64_t iy, int64_t ix) {
        return v[static_cast<size_t>(((in * c + ic) * h + iy) * w + ix)];
    }
    double at(int64_t in, int64_t ic, int64_t iy, int64_t ix) const {
        return v[static_cast<size_t>(((in * c + ic) * h + iy) * w + ix)];
    }
};

inline DTensor from_tensor(const hfid::Tensor& t) {
    DTensor d(t.dims().n, t.dims().c, t.dims().h, t.dims().w);
    for (int64_t i = 0; i < t.size(); ++i)
        d.v[static_cast<size_t>(i)] = t.data()[i];
    return d;
}

struct DParams {
    std::vector<std::vector<double>> weight, bias, bn_scale, bn_shift;
};

inline DParams from_params(const hfid::NetworkParams& p) {
    DParams d;
    auto conv = [](const hfid::Tensor& t) {
        return std::vector<double>(t.data(), t.data() + t.size());
    };
    for (const auto& lp : p.layers) {
        d.weight.push_back(conv(lp.weight));
        d.bias.push_back(conv(lp.bias));
        d.bn_scale.push_back(conv(lp.bn_scale));
        d.bn_shift.push_back(conv(lp.bn_shift));
    }
    return d;
}

inline double activate(hfid::Activation act, double x) {
    switch (act) {
    case hfid::Activation::None: return x;
    case hfid::Activation::Relu: return x > 0.0 ? x : 0.0;
    case hfid::Activation::LeakyRelu:
        return x > 0.0 ? x : static_cast<double>(hfid::kLeakyReluSlope) * x;
    case hfid::Activation::Tanh: return std::tanh(x);
    }
    return x;
}

// Train-mode forward: batch norm uses batch statistics (biased variance).
inline DTensor forward(const hfid::NetworkSpec& spec, const DParams& params,
                       const DTensor& input) {
    DTensor a = input;
    for (size_t li = 0; li < spec.layers.size(); ++li) {
        const hfid::LayerSpec& l = spec.layers[li];
        if (l.kind == hfid::LayerKind::Conv3x3) {
            int64_t ho = (a.h - 1) / l.stride + 1;
            int64_t wo = (a.w - 1) / l.stride + 1;
            DTensor z(a.n, l.out_maps, ho, wo);
            const auto& W = params.weight[li];
            const auto& B = params.bias[li];
            for (int64_t n = 0; n < a.n; ++n)
                for (int64_t co = 0; co < l.out_maps; ++co)
                    for (int64_t oy = 0; oy < ho; ++oy)
                        for (int64_t ox = 0; ox < wo; ++ox) {
                            double acc = B[static_cast<size_t>(co)];
                            for (int64_t ci = 0; ci < a.c; ++ci)
                                for (int64_t ky = 0; ky < 3; ++ky)
                                    for (int64_t kx = 0; kx < 3; ++kx) {
                                        int64_t iy = oy * l.stride + ky - 1;
                                        int64_t ix = ox * l.stride + kx - 1;
                                        if (iy < 0 || iy >= a.h || ix < 0 || ix >= a.w)
                                            continue;
                                        double wv = W[static_cast<size_t>(
                                            ((co * a.c + ci) * 3 + ky) * 3 + kx)];
                                        acc += wv * a.at(n, ci, iy, ix);
                                    }
                            z.at(n, co, oy, ox) = acc;
                        }
            if (l.batch_norm) {
                int64_t m = z.n * z.h * z.w;
                for (int64_t c = 0; c < z.c; ++c) {
                    double sum = 0.0;
                    for (int64_t n = 0; n < z.n; ++n)
                        for (int64_t y = 0; y < z.h; ++y)
                            for (int64_t x = 0; x < z.w; ++x)
                                sum += z.at(n, c, y, x);
                    double mean = sum / static_cast<double>(m);
                    double var = 0.0;
                    for (int64_t n = 0; n < z.n; ++n)
                        for (int64_t y = 0; y < z.h; ++y)
                            for (int64_t x = 0; x < z.w; ++x) {
                                double dv = z.at(n, c, y, x) - mean;
                                var += dv * dv;
                            }
                    var /= static_cast<double>(m);
                    double inv = 1.0 / std::sqrt(var + static_cast<double>(hfid::kBatchNormEps));
                    double g = params.bn_scale[li][static_cast<size_t>(c)];
                    double b = params.bn_shift[li][static_cast<size_t>(c)];
                    for (int64_t n = 0; n < z.n; ++n)
                        for (int64_t y = 0; y < z.h; ++y)
                            for (int64_t x = 0; x < z.w; ++x)
                                z.at(n, c, y, x) = g * (z.at(n, c, y, x) - mean) * inv + b;
                }
            }
            for (double& x : z.v)
                x = activate(l.activation, x);
            a = std::move(z);
        } else if (l.kind == hfid::LayerKind::MaxPool2x2) {
            DTensor z(a.n, a.c, a.h / 2, a.w / 2);
            for (int64_t n = 0; n < a.n; ++n)
                for (int64_t c = 0; c < a.c; ++c)
                    for (int64_t y = 0; y < z.h; ++y)
                        for (int64_t x = 0; x < z.w; ++x)
                            z.at(n, c, y, x) = std::max(
                                std::max(a.at(n, c, 2 * y, 2 * x), a.at(n, c, 2 * y, 2 * x + 1)),
                                std::max(a.at(n, c, 2 * y + 1, 2 * x),
                                         a.at(n, c, 2 * y + 1, 2 * x + 1)));
            a = std::move(z);
        } else if (l.kind == hfid::LayerKind::FullyConnected) {
            int64_t fan_in = a.c * a.h * a.w;
            DTensor z(a.n, l.out_maps, 1, 1);
            const auto& W = params.weight[li];
            const auto& B = params.bias[li];
            for (int64_t n = 0; n < a.n; ++n)
                for (int64_t o = 0; o < l.out_maps; ++o) {
                    double acc = B[static_cast<size_t>(o)];
                    // Input flattened in (c,h,w) order.
                    int64_t i = 0;
                    for (int64_t c = 0; c < a.c; ++c)
                        for (int64_t y = 0; y < a.h; ++y)
                            for (int64_t x = 0; x < a.w; ++x, ++i)
                                acc += W[static_cast<size_t>(o * fan_in + i)] * a.at(n, c, y, x);
                    z.at(n, o, 0, 0) = activate(l.activation, acc);
                }
            a = std::move(z);
        } else if (l.kind == hfid::LayerKind::Softmax) {
            DTensor z(a.n, a.c, 1, 1);
            for (int64_t n = 0; n < a.n; ++n) {
                double m = a.at(n, 0, 0, 0);
                for (int64_t c = 1; c < a.c; ++c)
                    m = std::max(m, a.at(n, c, 0, 0));
                double sum = 0.0;
                for (int64_t c = 0; c < a.c; ++c)
                    sum += std::exp(a.at(n, c, 0, 0) - m);
                for (int64_t c = 0; c < a.c; ++c)
                    z.at(n, c, 0, 0) = std::exp(a.at(n, c, 0, 0) - m) / sum;
            }
            a = std::move(z);
        }
    }
    return a;
}

// Loss used by the gradient checks: sum of output * probe.
inline double probe_loss(const hfid::NetworkSpec& spec, const DParams& params,
                         const DTensor& input, const std::vector<double>& probe) {
    DTensor out = forward(spec, params, input);
    double s = 0.0;
    for (size_t i = 0; i < out.v.size(); ++i)
        s += out.v[i] * probe[i];
    return s;
}

} // namespace refnet

#endif
