#include "network.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>

#include "rng.hpp"

namespace hfid {

namespace {

// ---------------------------------------------------------------------------
// Internal NHWC buffers. Public tensors are NCHW; the conv engine runs on
// channel-minor data so that im2col rows are contiguous and the GEMM sees
// its fast (spatial x channels) orientation.

struct Nhwc {
    int64_t n = 0, h = 0, w = 0, c = 0;
    std::vector<float> v;

    Nhwc() = default;
    Nhwc(int64_t n_, int64_t h_, int64_t w_, int64_t c_)
        : n(n_), h(h_), w(w_), c(c_), v(static_cast<size_t>(n_ * h_ * w_ * c_)) {}

    int64_t count() const { return n * h * w * c; }
    int64_t pixels() const { return n * h * w; }
    float* data() { return v.data(); }
    const float* data() const { return v.data(); }
    float* sample(int64_t i) { return v.data() + i * h * w * c; }
    const float* sample(int64_t i) const { return v.data() + i * h * w * c; }
};

Nhwc nchw_to_nhwc(const Tensor& t) {
    const Dims& d = t.dims();
    Nhwc out(d.n, d.h, d.w, d.c);
    const float* src = t.data();
    for (int64_t n = 0; n < d.n; ++n)
        for (int64_t c = 0; c < d.c; ++c) {
            const float* plane = src + (n * d.c + c) * d.h * d.w;
            float* dst = out.sample(n) + c;
            for (int64_t i = 0; i < d.h * d.w; ++i)
                dst[i * d.c] = plane[i];
        }
    return out;
}

Tensor nhwc_to_nchw(const Nhwc& a) {
    Tensor out(Dims{a.n, a.c, a.h, a.w});
    float* dst = out.data();
    for (int64_t n = 0; n < a.n; ++n)
        for (int64_t c = 0; c < a.c; ++c) {
            float* plane = dst + (n * a.c + c) * a.h * a.w;
            const float* src = a.sample(n) + c;
            for (int64_t i = 0; i < a.h * a.w; ++i)
                plane[i] = src[i * a.c];
        }
    return out;
}

// ---------------------------------------------------------------------------
// im2col for 3x3 kernels with padding 1.

void im2col_3x3(const float* in, int64_t h, int64_t w, int64_t cin, int stride,
                int64_t ho, int64_t wo, float* col) {
    const int64_t k = 9 * cin;
    for (int64_t oy = 0; oy < ho; ++oy) {
        for (int64_t ox = 0; ox < wo; ++ox) {
            float* row = col + (oy * wo + ox) * k;
            for (int t = 0; t < 9; ++t) {
                int64_t iy = oy * stride + t / 3 - 1;
                int64_t ix = ox * stride + t % 3 - 1;
                float* dst = row + t * cin;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w)
                    std::memset(dst, 0, static_cast<size_t>(cin) * sizeof(float));
                else
                    std::memcpy(dst, in + (iy * w + ix) * cin,
                                static_cast<size_t>(cin) * sizeof(float));
            }
        }
    }
}

void col2im_3x3(const float* dcol, int64_t h, int64_t w, int64_t cin, int stride,
                int64_t ho, int64_t wo, float* din) {
    const int64_t k = 9 * cin;
    for (int64_t oy = 0; oy < ho; ++oy) {
        for (int64_t ox = 0; ox < wo; ++ox) {
            const float* row = dcol + (oy * wo + ox) * k;
            for (int t = 0; t < 9; ++t) {
                int64_t iy = oy * stride + t / 3 - 1;
                int64_t ix = ox * stride + t % 3 - 1;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                float* dst = din + (iy * w + ix) * cin;
                const float* src = row + t * cin;
                for (int64_t c = 0; c < cin; ++c)
                    dst[c] += src[c];
            }
        }
    }
}

// Weight tensor (out,in,3,3) -> GEMM layout (9*in, out) matching im2col rows.
void pack_conv_weight(const Tensor& w, int64_t cin, int64_t cout, std::vector<float>& wg) {
    wg.resize(static_cast<size_t>(9 * cin * cout));
    const float* src = w.data();
    for (int64_t co = 0; co < cout; ++co)
        for (int64_t ci = 0; ci < cin; ++ci)
            for (int t = 0; t < 9; ++t)
                wg[static_cast<size_t>((t * cin + ci) * cout + co)] =
                    src[(co * cin + ci) * 9 + t];
}

void unpack_conv_weight_grad(const std::vector<float>& wg, int64_t cin, int64_t cout,
                             Tensor& dw) {
    float* dst = dw.data();
    for (int64_t co = 0; co < cout; ++co)
        for (int64_t ci = 0; ci < cin; ++ci)
            for (int t = 0; t < 9; ++t)
                dst[(co * cin + ci) * 9 + t] =
                    wg[static_cast<size_t>((t * cin + ci) * cout + co)];
}

// ---------------------------------------------------------------------------
// Activations (in place on NHWC buffers).

void apply_activation(Activation act, Nhwc& a) {
    float* p = a.data();
    int64_t n = a.count();
    switch (act) {
    case Activation::None:
        break;
    case Activation::Relu:
        for (int64_t i = 0; i < n; ++i)
            p[i] = p[i] > 0.0f ? p[i] : 0.0f;
        break;
    case Activation::LeakyRelu:
        for (int64_t i = 0; i < n; ++i)
            p[i] = p[i] > 0.0f ? p[i] : kLeakyReluSlope * p[i];
        break;
    case Activation::Tanh:
        for (int64_t i = 0; i < n; ++i)
            p[i] = std::tanh(p[i]);
        break;
    }
}

// Chain rule through the activation using the stored *output*; valid for all
// four kinds (monotone sign-preserving or expressible via the output).
void activation_backward(Activation act, const Nhwc& out, Nhwc& d) {
    const float* a = out.data();
    float* g = d.data();
    int64_t n = d.count();
    switch (act) {
    case Activation::None:
        break;
    case Activation::Relu:
        for (int64_t i = 0; i < n; ++i)
            if (a[i] <= 0.0f) g[i] = 0.0f;
        break;
    case Activation::LeakyRelu:
        for (int64_t i = 0; i < n; ++i)
            if (a[i] <= 0.0f) g[i] *= kLeakyReluSlope;
        break;
    case Activation::Tanh:
        for (int64_t i = 0; i < n; ++i)
            g[i] *= 1.0f - a[i] * a[i];
        break;
    }
}

} // namespace

// ---------------------------------------------------------------------------
// Spec handling.

LayerShape NetworkSpec::shape_at(int layer_index) const {
    LayerShape s = input;
    for (int i = 0; i <= layer_index && i < static_cast<int>(layers.size()); ++i) {
        const LayerSpec& l = layers[static_cast<size_t>(i)];
        switch (l.kind) {
        case LayerKind::Conv3x3:
            s.c = l.out_maps;
            s.h = (s.h - 1) / l.stride + 1;
            s.w = (s.w - 1) / l.stride + 1;
            break;
        case LayerKind::MaxPool2x2:
            s.h /= 2;
            s.w /= 2;
            break;
        case LayerKind::FullyConnected:
            s = LayerShape{l.out_maps, 1, 1};
            break;
        case LayerKind::Softmax:
            break;
        }
    }
    return s;
}

void validate_spec(const NetworkSpec& spec) {
    if (spec.layers.empty())
        raise(ErrorCode::InvalidArgument, spec.name + ": empty layer list");
    if (spec.input.c <= 0 || spec.input.h <= 0 || spec.input.w <= 0)
        raise(ErrorCode::InvalidArgument, spec.name + ": bad input shape");
    LayerShape s = spec.input;
    for (size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        std::string where = spec.name + " layer " + std::to_string(i + 1);
        switch (l.kind) {
        case LayerKind::Conv3x3:
            if (l.stride != 1 && l.stride != 2)
                raise(ErrorCode::InvalidArgument, where + ": conv stride must be 1 or 2");
            if (l.out_maps <= 0)
                raise(ErrorCode::InvalidArgument, where + ": conv needs positive feature maps");
            if (s.h < 1 || s.w < 1)
                raise(ErrorCode::ShapeMismatch, where + ": conv input collapsed");
            break;
        case LayerKind::MaxPool2x2:
            if (s.h % 2 != 0 || s.w % 2 != 0)
                raise(ErrorCode::ShapeMismatch, where + ": maxpool needs even input size");
            if (l.batch_norm || l.activation != Activation::None)
                raise(ErrorCode::InvalidArgument, where + ": maxpool carries no activation");
            break;
        case LayerKind::FullyConnected:
            if (l.out_maps <= 0)
                raise(ErrorCode::InvalidArgument, where + ": fc needs positive units");
            if (l.batch_norm)
                raise(ErrorCode::InvalidArgument, where + ": fc batch norm unsupported");
            break;
        case LayerKind::Softmax:
            if (s.h != 1 || s.w != 1)
                raise(ErrorCode::ShapeMismatch, where + ": softmax expects (n,1,1) input");
            if (l.batch_norm || l.activation != Activation::None)
                raise(ErrorCode::InvalidArgument, where + ": softmax carries no extras");
            break;
        }
        s = spec.shape_at(static_cast<int>(i));
    }
}

NetworkSpec refiner_spec() {
    // Eight conv layers; the printed stride-2 chain cannot reproduce an
    // image-shaped output, so all strides run at 1 and the final layer emits
    // 3 maps through tanh. Layer count and widths follow the listing.
    NetworkSpec s;
    s.name = "refiner";
    s.input = {3, 64, 64};
    auto conv = [](int maps, Activation act) {
        return LayerSpec{LayerKind::Conv3x3, 1, maps, act, false};
    };
    for (int i = 0; i < 6; ++i)
        s.layers.push_back(conv(64, Activation::Relu));
    s.layers.push_back(conv(16, Activation::Relu));
    s.layers.push_back(conv(3, Activation::Tanh));
    return s;
}

NetworkSpec discriminator_spec() {
    NetworkSpec s;
    s.name = "discriminator";
    s.input = {3, 64, 64};
    auto conv = [](int maps, int stride) {
        return LayerSpec{LayerKind::Conv3x3, stride, maps, Activation::LeakyRelu, false};
    };
    s.layers.push_back(conv(64, 1));
    s.layers.push_back(conv(64, 2));
    s.layers.push_back(conv(128, 1));
    s.layers.push_back(conv(128, 2));
    s.layers.push_back(conv(256, 1));
    s.layers.push_back(conv(256, 2));
    s.layers.push_back(LayerSpec{LayerKind::FullyConnected, 1, 2, Activation::None, false});
    return s;
}

NetworkSpec hcd_spec() {
    NetworkSpec s;
    s.name = "hcd";
    s.input = {3, 64, 64};
    auto conv = [](int maps, Activation act) {
        return LayerSpec{LayerKind::Conv3x3, 1, maps, act, true};
    };
    for (int i = 0; i < 7; ++i)
        s.layers.push_back(conv(64, Activation::Relu));
    s.layers.push_back(conv(4, Activation::None));
    return s;
}

NetworkSpec pi_spec(int n_printers) {
    if (n_printers < 2)
        raise(ErrorCode::InvalidArgument, "pi_spec: need at least 2 printers");
    NetworkSpec s;
    s.name = "pi";
    s.input = {3, 64, 64};
    auto conv = [](int maps) {
        return LayerSpec{LayerKind::Conv3x3, 1, maps, Activation::Relu, true};
    };
    auto pool = [] { return LayerSpec{LayerKind::MaxPool2x2, 2, 0, Activation::None, false}; };
    auto fc = [](int units, Activation act) {
        return LayerSpec{LayerKind::FullyConnected, 1, units, act, false};
    };
    for (int i = 0; i < 9; ++i)
        s.layers.push_back(conv(64));
    s.layers.push_back(pool());
    s.layers.push_back(conv(128));
    s.layers.push_back(conv(128));
    s.layers.push_back(pool());
    s.layers.push_back(conv(256));
    s.layers.push_back(conv(256));
    s.layers.push_back(pool());
    s.layers.push_back(fc(4096, Activation::Relu));
    s.layers.push_back(fc(4096, Activation::Relu));
    s.layers.push_back(fc(n_printers, Activation::None));
    s.layers.push_back(LayerSpec{LayerKind::Softmax, 1, 0, Activation::None, false});
    return s;
}

// ---------------------------------------------------------------------------
// Parameters.

bool NetworkParams::operator==(const NetworkParams& other) const {
    if (rng_seed != other.rng_seed || layers.size() != other.layers.size())
        return false;
    for (size_t i = 0; i < layers.size(); ++i) {
        const LayerParams& a = layers[i];
        const LayerParams& b = other.layers[i];
        if (!(a.weight == b.weight && a.bias == b.bias && a.bn_scale == b.bn_scale &&
              a.bn_shift == b.bn_shift && a.bn_running_mean == b.bn_running_mean &&
              a.bn_running_var == b.bn_running_var))
            return false;
    }
    return true;
}

NetworkParams xavier_init(const NetworkSpec& spec, uint64_t seed) {
    validate_spec(spec);
    NetworkParams params;
    params.rng_seed = seed;
    params.layers.resize(spec.layers.size());
    Rng rng(seed);
    LayerShape in = spec.input;
    for (size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        LayerParams& p = params.layers[i];
        if (l.kind == LayerKind::Conv3x3) {
            int64_t fan_in = in.c * 9;
            int64_t fan_out = l.out_maps * 9;
            float bound = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
            p.weight = Tensor(Dims{l.out_maps, in.c, 3, 3});
            for (int64_t j = 0; j < p.weight.size(); ++j)
                p.weight.data()[j] = static_cast<float>(rng.uniform(-bound, bound));
            p.bias = Tensor(Dims{1, l.out_maps, 1, 1});
            if (l.batch_norm) {
                p.bn_scale = Tensor(Dims{1, l.out_maps, 1, 1}, 1.0f);
                p.bn_shift = Tensor(Dims{1, l.out_maps, 1, 1}, 0.0f);
                p.bn_running_mean = Tensor(Dims{1, l.out_maps, 1, 1}, 0.0f);
                p.bn_running_var = Tensor(Dims{1, l.out_maps, 1, 1}, 1.0f);
            }
        } else if (l.kind == LayerKind::FullyConnected) {
            int64_t fan_in = in.c * in.h * in.w;
            int64_t fan_out = l.out_maps;
            float bound = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
            p.weight = Tensor(Dims{l.out_maps, fan_in, 1, 1});
            for (int64_t j = 0; j < p.weight.size(); ++j)
                p.weight.data()[j] = static_cast<float>(rng.uniform(-bound, bound));
            p.bias = Tensor(Dims{1, l.out_maps, 1, 1});
        }
        in = spec.shape_at(static_cast<int>(i));
    }
    return params;
}

void validate_params(const NetworkSpec& spec, const NetworkParams& params) {
    if (params.layers.size() != spec.layers.size())
        raise(ErrorCode::ShapeMismatch,
              spec.name + ": params have " + std::to_string(params.layers.size()) +
                  " layers, spec has " + std::to_string(spec.layers.size()));
    LayerShape in = spec.input;
    for (size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        const LayerParams& p = params.layers[i];
        std::string where = spec.name + " layer " + std::to_string(i + 1);
        if (l.kind == LayerKind::Conv3x3) {
            if (!(p.weight.dims() == Dims{l.out_maps, in.c, 3, 3}))
                raise(ErrorCode::ShapeMismatch, where + ": conv weight dims " +
                                                    to_string(p.weight.dims()));
            if (!(p.bias.dims() == Dims{1, l.out_maps, 1, 1}))
                raise(ErrorCode::ShapeMismatch, where + ": conv bias dims");
            if (l.batch_norm) {
                Dims want{1, l.out_maps, 1, 1};
                if (!(p.bn_scale.dims() == want && p.bn_shift.dims() == want &&
                      p.bn_running_mean.dims() == want && p.bn_running_var.dims() == want))
                    raise(ErrorCode::ShapeMismatch, where + ": batch-norm tensor dims");
            }
        } else if (l.kind == LayerKind::FullyConnected) {
            int64_t fan_in = in.c * in.h * in.w;
            if (!(p.weight.dims() == Dims{l.out_maps, fan_in, 1, 1}))
                raise(ErrorCode::ShapeMismatch, where + ": fc weight dims " +
                                                    to_string(p.weight.dims()));
            if (!(p.bias.dims() == Dims{1, l.out_maps, 1, 1}))
                raise(ErrorCode::ShapeMismatch, where + ": fc bias dims");
        }
        in = spec.shape_at(static_cast<int>(i));
    }
}

// ---------------------------------------------------------------------------
// Forward cache.

struct ForwardCache {
    bool valid = false;
    Mode mode = Mode::Eval;
    std::string spec_name;
    std::vector<Nhwc> acts; // acts[0] = input, acts[i+1] = output of layer i

    struct PerLayer {
        Nhwc pre_bn;
        std::vector<float> mean;
        std::vector<float> var;
        std::vector<uint8_t> pool_idx;
        std::vector<float> fc_in; // (N x fan_in), rows in (c,h,w) flatten order
    };
    std::vector<PerLayer> layer;
};

ForwardCache* cache_create() { return new ForwardCache(); }
void cache_destroy(ForwardCache* cache) { delete cache; }

namespace {

// ---------------------------------------------------------------------------
// Layer kernels.

void conv_forward(const Nhwc& in, const Tensor& weight, const Tensor& bias, int stride,
                  Nhwc& out) {
    int64_t cin = in.c, cout = out.c;
    std::vector<float> wg;
    pack_conv_weight(weight, cin, cout, wg);
    int64_t rows = out.h * out.w;
    int64_t k = 9 * cin;
    std::vector<float> col(static_cast<size_t>(rows * k));
    const float* b = bias.data();
    for (int64_t n = 0; n < in.n; ++n) {
        im2col_3x3(in.sample(n), in.h, in.w, cin, stride, out.h, out.w, col.data());
        float* y = out.sample(n);
        for (int64_t r = 0; r < rows; ++r)
            std::memcpy(y + r * cout, b, static_cast<size_t>(cout) * sizeof(float));
        cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(rows),
                    static_cast<int>(cout), static_cast<int>(k), 1.0f, col.data(),
                    static_cast<int>(k), wg.data(), static_cast<int>(cout), 1.0f, y,
                    static_cast<int>(cout));
    }
}

void conv_backward(const Nhwc& in, const Tensor& weight, int stride, const Nhwc& dout,
                   Nhwc* din, Tensor* dweight, Tensor* dbias) {
    int64_t cin = in.c, cout = dout.c;
    std::vector<float> wg;
    pack_conv_weight(weight, cin, cout, wg);
    int64_t rows = dout.h * dout.w;
    int64_t k = 9 * cin;
    std::vector<float> col(static_cast<size_t>(rows * k));
    std::vector<float> dcol(din ? static_cast<size_t>(rows * k) : 0);
    std::vector<float> dwg(dweight ? static_cast<size_t>(k * cout) : 0, 0.0f);
    std::vector<double> db(dbias ? static_cast<size_t>(cout) : 0, 0.0);

    for (int64_t n = 0; n < in.n; ++n) {
        const float* dy = dout.sample(n);
        if (dweight) {
            im2col_3x3(in.sample(n), in.h, in.w, cin, stride, dout.h, dout.w, col.data());
            // dWg += col^T * dY
            cblas_sgemm(CblasRowMajor, CblasTrans, CblasNoTrans, static_cast<int>(k),
                        static_cast<int>(cout), static_cast<int>(rows), 1.0f, col.data(),
                        static_cast<int>(k), dy, static_cast<int>(cout), 1.0f, dwg.data(),
                        static_cast<int>(cout));
        }
        if (dbias) {
            for (int64_t r = 0; r < rows; ++r)
                for (int64_t c = 0; c < cout; ++c)
                    db[static_cast<size_t>(c)] += dy[r * cout + c];
        }
        if (din) {
            // dcol = dY * Wg^T, then scatter back onto the input grid.
            cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, static_cast<int>(rows),
                        static_cast<int>(k), static_cast<int>(cout), 1.0f, dy,
                        static_cast<int>(cout), wg.data(), static_cast<int>(cout), 0.0f,
                        dcol.data(), static_cast<int>(k));
            float* dx = din->sample(n);
            std::memset(dx, 0, static_cast<size_t>(in.h * in.w * cin) * sizeof(float));
            col2im_3x3(dcol.data(), in.h, in.w, cin, stride, dout.h, dout.w, dx);
        }
    }
    if (dweight) {
        *dweight = Tensor(weight.dims());
        unpack_conv_weight_grad(dwg, cin, cout, *dweight);
    }
    if (dbias) {
        *dbias = Tensor(Dims{1, cout, 1, 1});
        for (int64_t c = 0; c < cout; ++c)
            dbias->data()[c] = static_cast<float>(db[static_cast<size_t>(c)]);
    }
}

void batchnorm_forward_train(Nhwc& a, LayerParams& p, std::vector<float>& mean_out,
                             std::vector<float>& var_out) {
    int64_t c = a.c;
    int64_t m = a.pixels();
    std::vector<double> sum(static_cast<size_t>(c), 0.0), sumsq(static_cast<size_t>(c), 0.0);
    const float* x = a.data();
    for (int64_t i = 0; i < m; ++i) {
        const float* px = x + i * c;
        for (int64_t j = 0; j < c; ++j) {
            double v = px[j];
            sum[static_cast<size_t>(j)] += v;
            sumsq[static_cast<size_t>(j)] += v * v;
        }
    }
    mean_out.resize(static_cast<size_t>(c));
    var_out.resize(static_cast<size_t>(c));
    std::vector<float> scale(static_cast<size_t>(c)), shift(static_cast<size_t>(c));
    for (int64_t j = 0; j < c; ++j) {
        double mu = sum[static_cast<size_t>(j)] / static_cast<double>(m);
        double var = std::max(0.0, sumsq[static_cast<size_t>(j)] / static_cast<double>(m) - mu * mu);
        mean_out[static_cast<size_t>(j)] = static_cast<float>(mu);
        var_out[static_cast<size_t>(j)] = static_cast<float>(var);
        float inv = 1.0f / std::sqrt(static_cast<float>(var) + kBatchNormEps);
        float g = p.bn_scale.data()[j];
        scale[static_cast<size_t>(j)] = g * inv;
        shift[static_cast<size_t>(j)] =
            p.bn_shift.data()[j] - static_cast<float>(mu) * g * inv;
        // Running statistics track the biased batch variance.
        p.bn_running_mean.data()[j] = kBatchNormMomentum * p.bn_running_mean.data()[j] +
                                      (1.0f - kBatchNormMomentum) * static_cast<float>(mu);
        p.bn_running_var.data()[j] = kBatchNormMomentum * p.bn_running_var.data()[j] +
                                     (1.0f - kBatchNormMomentum) * static_cast<float>(var);
    }
    float* y = a.data();
    for (int64_t i = 0; i < m; ++i) {
        float* py = y + i * c;
        for (int64_t j = 0; j < c; ++j)
            py[j] = scale[static_cast<size_t>(j)] * py[j] + shift[static_cast<size_t>(j)];
    }
}

void batchnorm_forward_eval(Nhwc& a, const LayerParams& p) {
    int64_t c = a.c;
    std::vector<float> scale(static_cast<size_t>(c)), shift(static_cast<size_t>(c));
    for (int64_t j = 0; j < c; ++j) {
        float inv = 1.0f / std::sqrt(p.bn_running_var.data()[j] + kBatchNormEps);
        float g = p.bn_scale.data()[j];
        scale[static_cast<size_t>(j)] = g * inv;
        shift[static_cast<size_t>(j)] = p.bn_shift.data()[j] - p.bn_running_mean.data()[j] * g * inv;
    }
    float* y = a.data();
    int64_t m = a.pixels();
    for (int64_t i = 0; i < m; ++i) {
        float* py = y + i * c;
        for (int64_t j = 0; j < c; ++j)
            py[j] = scale[static_cast<size_t>(j)] * py[j] + shift[static_cast<size_t>(j)];
    }
}

void batchnorm_backward(const Nhwc& pre_bn, const std::vector<float>& mean,
                        const std::vector<float>& var, const LayerParams& p, Nhwc& d,
                        Tensor* dscale, Tensor* dshift) {
    int64_t c = d.c;
    int64_t m = d.pixels();
    std::vector<float> inv(static_cast<size_t>(c));
    for (int64_t j = 0; j < c; ++j)
        inv[static_cast<size_t>(j)] = 1.0f / std::sqrt(var[static_cast<size_t>(j)] + kBatchNormEps);

    std::vector<double> s1(static_cast<size_t>(c), 0.0), s2(static_cast<size_t>(c), 0.0);
    const float* z = pre_bn.data();
    const float* dy = d.data();
    for (int64_t i = 0; i < m; ++i) {
        const float* pz = z + i * c;
        const float* pd = dy + i * c;
        for (int64_t j = 0; j < c; ++j) {
            float xhat = (pz[j] - mean[static_cast<size_t>(j)]) * inv[static_cast<size_t>(j)];
            s1[static_cast<size_t>(j)] += pd[j];
            s2[static_cast<size_t>(j)] += pd[j] * xhat;
        }
    }
    if (dscale) {
        *dscale = Tensor(Dims{1, c, 1, 1});
        *dshift = Tensor(Dims{1, c, 1, 1});
        for (int64_t j = 0; j < c; ++j) {
            dscale->data()[j] = static_cast<float>(s2[static_cast<size_t>(j)]);
            dshift->data()[j] = static_cast<float>(s1[static_cast<size_t>(j)]);
        }
    }
    float* g = d.data();
    double inv_m = 1.0 / static_cast<double>(m);
    for (int64_t i = 0; i < m; ++i) {
        const float* pz = z + i * c;
        float* pd = g + i * c;
        for (int64_t j = 0; j < c; ++j) {
            size_t js = static_cast<size_t>(j);
            float xhat = (pz[j] - mean[js]) * inv[js];
            double t = static_cast<double>(m) * pd[j] - s1[js] - xhat * s2[js];
            pd[j] = static_cast<float>(p.bn_scale.data()[j] * inv[js] * inv_m * t);
        }
    }
}

void maxpool_forward(const Nhwc& in, Nhwc& out, std::vector<uint8_t>& idx) {
    int64_t c = in.c;
    idx.resize(static_cast<size_t>(out.count()));
    for (int64_t n = 0; n < in.n; ++n) {
        const float* x = in.sample(n);
        float* y = out.sample(n);
        for (int64_t oy = 0; oy < out.h; ++oy)
            for (int64_t ox = 0; ox < out.w; ++ox) {
                const float* p00 = x + ((2 * oy) * in.w + 2 * ox) * c;
                const float* p01 = p00 + c;
                const float* p10 = p00 + in.w * c;
                const float* p11 = p10 + c;
                float* py = y + (oy * out.w + ox) * c;
                uint8_t* pi = idx.data() + ((n * out.h + oy) * out.w + ox) * c;
                for (int64_t j = 0; j < c; ++j) {
                    float best = p00[j];
                    uint8_t which = 0;
                    if (p01[j] > best) { best = p01[j]; which = 1; }
                    if (p10[j] > best) { best = p10[j]; which = 2; }
                    if (p11[j] > best) { best = p11[j]; which = 3; }
                    py[j] = best;
                    pi[j] = which;
                }
            }
    }
}

void maxpool_backward(const Nhwc& dout, const std::vector<uint8_t>& idx, Nhwc& din) {
    std::memset(din.data(), 0, static_cast<size_t>(din.count()) * sizeof(float));
    int64_t c = din.c;
    for (int64_t n = 0; n < dout.n; ++n) {
        const float* dy = dout.sample(n);
        float* dx = din.sample(n);
        for (int64_t oy = 0; oy < dout.h; ++oy)
            for (int64_t ox = 0; ox < dout.w; ++ox) {
                const float* pd = dy + (oy * dout.w + ox) * c;
                const uint8_t* pi = idx.data() + ((n * dout.h + oy) * dout.w + ox) * c;
                float* p00 = dx + ((2 * oy) * din.w + 2 * ox) * c;
                for (int64_t j = 0; j < c; ++j) {
                    int64_t off = (pi[j] / 2) * din.w * c + (pi[j] % 2) * c;
                    p00[off + j] += pd[j];
                }
            }
    }
}

// Rows of `fc_in` hold each sample flattened in (c,h,w) order so that
// checkpointed fc weights are layout-portable.
void flatten_rows(const Nhwc& in, std::vector<float>& fc_in) {
    int64_t fan_in = in.c * in.h * in.w;
    fc_in.resize(static_cast<size_t>(in.n * fan_in));
    for (int64_t n = 0; n < in.n; ++n) {
        const float* x = in.sample(n);
        float* row = fc_in.data() + n * fan_in;
        for (int64_t c = 0; c < in.c; ++c)
            for (int64_t i = 0; i < in.h * in.w; ++i)
                row[c * in.h * in.w + i] = x[i * in.c + c];
    }
}

void unflatten_rows(const std::vector<float>& rows, Nhwc& out) {
    int64_t fan_in = out.c * out.h * out.w;
    for (int64_t n = 0; n < out.n; ++n) {
        const float* row = rows.data() + n * fan_in;
        float* x = out.sample(n);
        for (int64_t c = 0; c < out.c; ++c)
            for (int64_t i = 0; i < out.h * out.w; ++i)
                x[i * out.c + c] = row[c * out.h * out.w + i];
    }
}

void fc_forward(const std::vector<float>& fc_in, int64_t n, int64_t fan_in,
                const Tensor& weight, const Tensor& bias, Nhwc& out) {
    int64_t units = out.c;
    float* y = out.data();
    const float* b = bias.data();
    for (int64_t i = 0; i < n; ++i)
        std::memcpy(y + i * units, b, static_cast<size_t>(units) * sizeof(float));
    cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, static_cast<int>(n),
                static_cast<int>(units), static_cast<int>(fan_in), 1.0f, fc_in.data(),
                static_cast<int>(fan_in), weight.data(), static_cast<int>(fan_in), 1.0f, y,
                static_cast<int>(units));
}

void softmax_rows(const Nhwc& in, Nhwc& out) {
    int64_t c = in.c;
    for (int64_t n = 0; n < in.n; ++n) {
        const float* x = in.sample(n);
        float* y = out.sample(n);
        float m = x[0];
        for (int64_t j = 1; j < c; ++j)
            m = std::max(m, x[j]);
        double sum = 0.0;
        for (int64_t j = 0; j < c; ++j) {
            float e = std::exp(x[j] - m);
            y[j] = e;
            sum += e;
        }
        float inv = static_cast<float>(1.0 / sum);
        for (int64_t j = 0; j < c; ++j)
            y[j] *= inv;
    }
}

Tensor forward_impl(const NetworkSpec& spec, const NetworkParams& params,
                    NetworkParams* mutable_params, const Tensor& input, Mode mode,
                    ForwardCache* cache, int n_layers) {
    validate_params(spec, params);
    const Dims& d = input.dims();
    if (d.c != spec.input.c || d.h != spec.input.h || d.w != spec.input.w)
        raise(ErrorCode::ShapeMismatch, spec.name + ": input dims " + to_string(d) +
                                            " do not match spec input");
    if (d.n < 1)
        raise(ErrorCode::InvalidArgument, spec.name + ": empty batch");
    if (mode == Mode::Train && mutable_params == nullptr)
        raise(ErrorCode::Internal, "train-mode forward requires mutable params");

    ForwardCache local;
    ForwardCache& cc = cache ? *cache : local;
    cc.valid = true;
    cc.mode = mode;
    cc.spec_name = spec.name;
    cc.acts.clear();
    cc.layer.assign(static_cast<size_t>(n_layers), {});

    cc.acts.push_back(nchw_to_nhwc(input));
    LayerShape shape = spec.input;
    for (int i = 0; i < n_layers; ++i) {
        const LayerSpec& l = spec.layers[static_cast<size_t>(i)];
        const LayerParams& p = params.layers[static_cast<size_t>(i)];
        LayerShape out_shape = spec.shape_at(i);
        Nhwc& in = cc.acts.back();
        Nhwc out(d.n, out_shape.h, out_shape.w, out_shape.c);
        ForwardCache::PerLayer& lc = cc.layer[static_cast<size_t>(i)];
        switch (l.kind) {
        case LayerKind::Conv3x3:
            conv_forward(in, p.weight, p.bias, l.stride, out);
            if (l.batch_norm) {
                if (mode == Mode::Train) {
                    lc.pre_bn = out; // copy of the pre-norm response
                    batchnorm_forward_train(
                        out, mutable_params->layers[static_cast<size_t>(i)], lc.mean, lc.var);
                } else {
                    batchnorm_forward_eval(out, p);
                }
            }
            apply_activation(l.activation, out);
            break;
        case LayerKind::MaxPool2x2:
            maxpool_forward(in, out, lc.pool_idx);
            break;
        case LayerKind::FullyConnected: {
            flatten_rows(in, lc.fc_in);
            fc_forward(lc.fc_in, d.n, in.c * in.h * in.w, p.weight, p.bias, out);
            apply_activation(l.activation, out);
            break;
        }
        case LayerKind::Softmax:
            softmax_rows(in, out);
            break;
        }
        cc.acts.push_back(std::move(out));
        shape = out_shape;
    }
    (void)shape;
    return nhwc_to_nchw(cc.acts.back());
}

} // namespace

Tensor forward(const NetworkSpec& spec, NetworkParams& params, const Tensor& input,
               Mode mode, ForwardCache* cache) {
    return forward_impl(spec, params, &params, input, mode, cache,
                        static_cast<int>(spec.layers.size()));
}

Tensor forward_eval(const NetworkSpec& spec, const NetworkParams& params, const Tensor& input) {
    return forward_impl(spec, params, nullptr, input, Mode::Eval, nullptr,
                        static_cast<int>(spec.layers.size()));
}

Tensor forward_prefix_eval(const NetworkSpec& spec, const NetworkParams& params,
                           const Tensor& input, int n_layers) {
    if (n_layers < 1 || n_layers > static_cast<int>(spec.layers.size()))
        raise(ErrorCode::InvalidArgument, "forward_prefix_eval: bad layer count");
    return forward_impl(spec, params, nullptr, input, Mode::Eval, nullptr, n_layers);
}

NetworkParams backward(const NetworkSpec& spec, const NetworkParams& params,
                       const ForwardCache& cache, const Tensor& output_gradient,
                       Tensor* input_grad, bool want_param_grads) {
    if (!cache.valid || cache.spec_name != spec.name ||
        cache.layer.size() != spec.layers.size())
        raise(ErrorCode::InvalidArgument, spec.name + ": cache does not match spec");
    if (cache.mode != Mode::Train)
        raise(ErrorCode::InvalidArgument,
              spec.name + ": backward requires a train-mode forward cache");
    validate_params(spec, params);

    const Nhwc& final_act = cache.acts.back();
    const Dims& gd = output_gradient.dims();
    if (gd.n != final_act.n || gd.c != final_act.c || gd.h != final_act.h ||
        gd.w != final_act.w)
        raise(ErrorCode::ShapeMismatch,
              spec.name + ": output gradient dims " + to_string(gd));

    NetworkParams grads;
    grads.rng_seed = params.rng_seed;
    grads.layers.resize(params.layers.size());

    Nhwc d = nchw_to_nhwc(output_gradient);
    for (int i = static_cast<int>(spec.layers.size()) - 1; i >= 0; --i) {
        const LayerSpec& l = spec.layers[static_cast<size_t>(i)];
        const LayerParams& p = params.layers[static_cast<size_t>(i)];
        const ForwardCache::PerLayer& lc = cache.layer[static_cast<size_t>(i)];
        const Nhwc& a_in = cache.acts[static_cast<size_t>(i)];
        const Nhwc& a_out = cache.acts[static_cast<size_t>(i) + 1];
        LayerParams& g = grads.layers[static_cast<size_t>(i)];
        bool need_input_grad = (i > 0) || (input_grad != nullptr);

        switch (l.kind) {
        case LayerKind::Conv3x3: {
            activation_backward(l.activation, a_out, d);
            if (l.batch_norm)
                batchnorm_backward(lc.pre_bn, lc.mean, lc.var, p, d,
                                   want_param_grads ? &g.bn_scale : nullptr,
                                   want_param_grads ? &g.bn_shift : nullptr);
            Nhwc din;
            if (need_input_grad) din = Nhwc(a_in.n, a_in.h, a_in.w, a_in.c);
            conv_backward(a_in, p.weight, l.stride, d, need_input_grad ? &din : nullptr,
                          want_param_grads ? &g.weight : nullptr,
                          want_param_grads ? &g.bias : nullptr);
            d = std::move(din);
            break;
        }
        case LayerKind::MaxPool2x2: {
            Nhwc din(a_in.n, a_in.h, a_in.w, a_in.c);
            maxpool_backward(d, lc.pool_idx, din);
            d = std::move(din);
            break;
        }
        case LayerKind::FullyConnected: {
            activation_backward(l.activation, a_out, d);
            int64_t n = a_in.n;
            int64_t fan_in = a_in.c * a_in.h * a_in.w;
            int64_t units = l.out_maps;
            if (want_param_grads) {
                g.weight = Tensor(Dims{units, fan_in, 1, 1});
                cblas_sgemm(CblasRowMajor, CblasTrans, CblasNoTrans, static_cast<int>(units),
                            static_cast<int>(fan_in), static_cast<int>(n), 1.0f, d.data(),
                            static_cast<int>(units), lc.fc_in.data(), static_cast<int>(fan_in),
                            0.0f, g.weight.data(), static_cast<int>(fan_in));
                g.bias = Tensor(Dims{1, units, 1, 1});
                for (int64_t r = 0; r < n; ++r)
                    for (int64_t j = 0; j < units; ++j)
                        g.bias.data()[j] += d.data()[r * units + j];
            }
            if (need_input_grad) {
                std::vector<float> dx(static_cast<size_t>(n * fan_in));
                cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(n),
                            static_cast<int>(fan_in), static_cast<int>(units), 1.0f, d.data(),
                            static_cast<int>(units), p.weight.data(), static_cast<int>(fan_in),
                            0.0f, dx.data(), static_cast<int>(fan_in));
                Nhwc din(a_in.n, a_in.h, a_in.w, a_in.c);
                unflatten_rows(dx, din);
                d = std::move(din);
            } else {
                d = Nhwc();
            }
            break;
        }
        case LayerKind::Softmax: {
            // dL/dx_j = p_j * (dL/dp_j - sum_k dL/dp_k * p_k)
            Nhwc din(a_in.n, a_in.h, a_in.w, a_in.c);
            int64_t c = a_in.c;
            for (int64_t n = 0; n < a_in.n; ++n) {
                const float* pr = a_out.sample(n);
                const float* dy = d.sample(n);
                float* dx = din.sample(n);
                double dot = 0.0;
                for (int64_t j = 0; j < c; ++j)
                    dot += static_cast<double>(dy[j]) * pr[j];
                for (int64_t j = 0; j < c; ++j)
                    dx[j] = pr[j] * (dy[j] - static_cast<float>(dot));
            }
            d = std::move(din);
            break;
        }
        }
    }
    if (input_grad)
        *input_grad = nhwc_to_nchw(d);

    if (want_param_grads) {
        // Layers whose parameters received no gradient path still need
        // zero-filled tensors so the result is params-shaped.
        for (size_t i = 0; i < grads.layers.size(); ++i) {
            const LayerParams& p = params.layers[i];
            LayerParams& g = grads.layers[i];
            if (!p.weight.empty() && g.weight.empty()) g.weight = Tensor(p.weight.dims());
            if (!p.bias.empty() && g.bias.empty()) g.bias = Tensor(p.bias.dims());
            if (!p.bn_scale.empty() && g.bn_scale.empty()) g.bn_scale = Tensor(p.bn_scale.dims());
            if (!p.bn_shift.empty() && g.bn_shift.empty()) g.bn_shift = Tensor(p.bn_shift.dims());
        }
    }
    return grads;
}

std::vector<float> softmax(const std::vector<float>& logits) {
    if (logits.empty())
        raise(ErrorCode::InvalidArgument, "softmax: empty logits");
    for (float v : logits)
        if (!std::isfinite(v))
            raise(ErrorCode::Numeric, "softmax: non-finite logit");
    float m = *std::max_element(logits.begin(), logits.end());
    std::vector<float> out(logits.size());
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        sum += out[i];
    }
    for (float& v : out)
        v = static_cast<float>(v / sum);
    return out;
}

std::vector<double> softmax64(const std::vector<double>& logits) {
    double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        sum += out[i];
    }
    for (double& v : out)
        v /= sum;
    return out;
}

std::vector<float> flatten_chw(const Tensor& t) {
    const Dims& d = t.dims();
    if (d.n != 1)
        raise(ErrorCode::InvalidArgument, "flatten_chw: expects batch of 1");
    return std::vector<float>(t.data(), t.data() + t.size());
}

} // namespace hfid
