#ifndef HFID_NETWORK_HPP
#define HFID_NETWORK_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace hfid {

enum class LayerKind { Conv3x3, MaxPool2x2, FullyConnected, Softmax };
enum class Activation { None, Relu, LeakyRelu, Tanh };

constexpr float kLeakyReluSlope = 0.2f;
constexpr float kBatchNormEps = 1e-5f;
constexpr float kBatchNormMomentum = 0.9f;

struct LayerSpec {
    LayerKind kind = LayerKind::Conv3x3;
    int stride = 1;          // conv only; 1 or 2 (same padding of 1 either way)
    int out_maps = 0;        // conv: feature maps, fc: output units
    Activation activation = Activation::None;
    bool batch_norm = false;
};

struct LayerShape {
    int64_t c = 0;
    int64_t h = 0;
    int64_t w = 0;
};

// Ordered layer list plus input dims. Shape chain is validated on build.
struct NetworkSpec {
    std::string name;
    LayerShape input;
    std::vector<LayerSpec> layers;

    // Output shape of layer i (0-based); index -1 gives the input shape.
    LayerShape shape_at(int layer_index) const;
    LayerShape output_shape() const { return shape_at(static_cast<int>(layers.size()) - 1); }
};

// Throws ShapeMismatch naming the offending layer when the chain is broken
// (fc/softmax placement, pool on odd sizes, nonpositive maps...).
void validate_spec(const NetworkSpec& spec);

// The four canonical architectures.
NetworkSpec refiner_spec();
NetworkSpec discriminator_spec();
NetworkSpec hcd_spec();
NetworkSpec pi_spec(int n_printers);

// Named tensors of one layer. Conv weight dims are (out, in, 3, 3), fc
// weight dims (out, in, 1, 1); bias and batch-norm vectors sit on the
// channel axis as (1, c, 1, 1). Tensors not used by the layer stay empty.
struct LayerParams {
    Tensor weight;
    Tensor bias;
    Tensor bn_scale;
    Tensor bn_shift;
    Tensor bn_running_mean;
    Tensor bn_running_var;
};

struct NetworkParams {
    std::vector<LayerParams> layers;
    uint64_t rng_seed = 0;

    bool operator==(const NetworkParams& other) const;
};

// Weights uniform in +-sqrt(6/(fan_in+fan_out)), biases zero, batch-norm
// scale 1 / shift 0 / running stats (0, 1). Reproducible per seed.
NetworkParams xavier_init(const NetworkSpec& spec, uint64_t seed);

// Throws when params do not match the spec layer-by-layer.
void validate_params(const NetworkSpec& spec, const NetworkParams& params);

enum class Mode { Train, Eval };

// Opaque per-forward state consumed by backward(). Holding one alive keeps
// every intermediate activation of the pass in memory.
struct ForwardCache;
ForwardCache* cache_create();
void cache_destroy(ForwardCache* cache);

struct CacheDeleter {
    void operator()(ForwardCache* c) const { cache_destroy(c); }
};

// Forward pass. In train mode batch-norm uses batch statistics and updates
// the running stats in `params`; in eval mode it reads the running stats and
// leaves params untouched. Deterministic given inputs.
Tensor forward(const NetworkSpec& spec, NetworkParams& params, const Tensor& input,
               Mode mode, ForwardCache* cache = nullptr);

// Eval-mode forward without cache; params stay const.
Tensor forward_eval(const NetworkSpec& spec, const NetworkParams& params, const Tensor& input);

// Forward through layers [0, n_layers) only; used for transfer checks.
Tensor forward_prefix_eval(const NetworkSpec& spec, const NetworkParams& params,
                           const Tensor& input, int n_layers);

// Backprop through a cached train-mode forward. Returns one gradient tensor
// per parameter tensor (running stats get empty gradients). Rejects caches
// recorded in eval mode. When `input_grad` is non-null it receives dL/dinput.
NetworkParams backward(const NetworkSpec& spec, const NetworkParams& params,
                       const ForwardCache& cache, const Tensor& output_gradient,
                       Tensor* input_grad = nullptr, bool want_param_grads = true);

// Numerically stabilized softmax of a logit vector.
std::vector<float> softmax(const std::vector<float>& logits);
std::vector<double> softmax64(const std::vector<double>& logits);

// Flattens a (1,c,h,w) tensor in (channel, row, column) order.
std::vector<float> flatten_chw(const Tensor& t);

} // namespace hfid

#endif
