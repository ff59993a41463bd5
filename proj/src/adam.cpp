#include "adam.hpp"

#include <cmath>

namespace hfid {

namespace {

Tensor moment_like(const Tensor& t) {
    return t.empty() ? Tensor() : Tensor(t.dims());
}

void update_tensor(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v,
                   const AdamState& s, float lr, float bc1, float bc2) {
    if (param.empty())
        return;
    if (!param.same_dims(grad))
        raise(ErrorCode::ShapeMismatch, "adam_step: gradient dims " + to_string(grad.dims()) +
                                            " vs param dims " + to_string(param.dims()));
    float* p = param.data();
    const float* g = grad.data();
    float* mp = m.data();
    float* vp = v.data();
    for (int64_t i = 0; i < param.size(); ++i) {
        mp[i] = s.beta1 * mp[i] + (1.0f - s.beta1) * g[i];
        vp[i] = s.beta2 * vp[i] + (1.0f - s.beta2) * g[i] * g[i];
        float mhat = mp[i] / bc1;
        float vhat = vp[i] / bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + s.eps);
    }
}

} // namespace

AdamState adam_init(const NetworkParams& params) {
    AdamState s;
    s.m.resize(params.layers.size());
    s.v.resize(params.layers.size());
    for (size_t i = 0; i < params.layers.size(); ++i) {
        const LayerParams& p = params.layers[i];
        for (auto* pair : {&s.m, &s.v}) {
            LayerParams& t = (*pair)[i];
            t.weight = moment_like(p.weight);
            t.bias = moment_like(p.bias);
            t.bn_scale = moment_like(p.bn_scale);
            t.bn_shift = moment_like(p.bn_shift);
        }
    }
    return s;
}

void adam_step(NetworkParams& params, const NetworkParams& grads, AdamState& state, float lr) {
    if (grads.layers.size() != params.layers.size() ||
        state.m.size() != params.layers.size())
        raise(ErrorCode::ShapeMismatch, "adam_step: layer count mismatch");
    state.step += 1;
    float bc1 = 1.0f - std::pow(state.beta1, static_cast<float>(state.step));
    float bc2 = 1.0f - std::pow(state.beta2, static_cast<float>(state.step));
    for (size_t i = 0; i < params.layers.size(); ++i) {
        LayerParams& p = params.layers[i];
        const LayerParams& g = grads.layers[i];
        update_tensor(p.weight, g.weight, state.m[i].weight, state.v[i].weight, state, lr, bc1, bc2);
        update_tensor(p.bias, g.bias, state.m[i].bias, state.v[i].bias, state, lr, bc1, bc2);
        update_tensor(p.bn_scale, g.bn_scale, state.m[i].bn_scale, state.v[i].bn_scale, state, lr,
                      bc1, bc2);
        update_tensor(p.bn_shift, g.bn_shift, state.m[i].bn_shift, state.v[i].bn_shift, state, lr,
                      bc1, bc2);
    }
}

} // namespace hfid
