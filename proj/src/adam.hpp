#ifndef HFID_ADAM_HPP
#define HFID_ADAM_HPP

#include <cstdint>

#include "network.hpp"

namespace hfid {

// Per-parameter first/second moments plus the shared step counter. Moments
// mirror the trainable tensors (weight, bias, bn scale/shift); running
// batch-norm statistics are not optimized.
struct AdamState {
    std::vector<LayerParams> m;
    std::vector<LayerParams> v;
    int64_t step = 0;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

AdamState adam_init(const NetworkParams& params);

// Standard bias-corrected Adam update, in place. Gradients must be shaped
// like the parameters.
void adam_step(NetworkParams& params, const NetworkParams& grads, AdamState& state, float lr);

} // namespace hfid

#endif
