#ifndef HFID_REFINER_HPP
#define HFID_REFINER_HPP

#include <cstdint>
#include <ostream>
#include <vector>

#include "network.hpp"
#include "rng.hpp"

namespace hfid {

// Two-class label convention for the discriminator outputs:
// index 0 = fake (refined), index 1 = real.
struct LabelConvention {
    static constexpr int kFake = 0;
    static constexpr int kReal = 1;
};

struct GanConfig {
    double lambda = 1e-5;    // self-regularization scale
    int batch_size = 32;     // b; must be even
    int max_iters = 1000;    // T
    float refiner_lr = 1e-5f;
    float disc_lr = 1e-5f;
    int buffer_capacity = 640; // 2 * b * 10 by default
};

// Bounded reservoir of previously refined images; stabilizes discriminator
// training. Size never exceeds capacity and stays at capacity once full.
struct HistoryBuffer {
    size_t capacity = 0;
    std::vector<Tensor> images; // each (1,3,64,64)

    explicit HistoryBuffer(size_t cap = 0) : capacity(cap) {}
    size_t size() const { return images.size(); }
    bool full() const { return images.size() >= capacity; }
};

// Sum over the batch of per-image L2 norms of (refined - original).
double reg_loss(const Tensor& refined, const Tensor& original);

// -log p(real) for one refined image's 2-class logits.
double realism_loss(const std::vector<float>& logits);

// Total refiner objective over a batch: sum_i realism_i + lambda * reg_i.
// `disc_logits` holds the discriminator outputs for the refined images.
double refiner_loss(const Tensor& refined, const Tensor& original, const Tensor& disc_logits,
                    double lambda);

// Two-class cross entropy: refined batch labeled fake, real batch labeled
// real, summed over both batches.
double discriminator_loss(const Tensor& logits_refined, const Tensor& logits_real);

// Algorithm step: append while below capacity (truncating), afterwards
// replace exactly b/2 uniformly chosen slots with b/2 uniformly chosen
// images of the incoming batch.
void buffer_update(HistoryBuffer& buffer, const Tensor& refined_batch, Rng& rng);

// Discriminator fake input: b/2 buffer samples (without replacement; falls
// back to replacement on an under-filled buffer and reports it) plus b/2
// fresh refined images.
Tensor disc_batch(const HistoryBuffer& buffer, const Tensor& fresh_refined, Rng& rng,
                  bool* sampled_with_replacement = nullptr);

// Refiner output: tanh activation rescaled from [-1,1] to [0,1].
Tensor refine_batch(const NetworkSpec& refiner, const NetworkParams& params,
                    const Tensor& batch);

struct GanStepRecord {
    int iter = 0;       // outer iteration, 1-based
    char kind = 'R';    // 'R' refiner update, 'D' discriminator update
    int inner = 0;      // k in {1,2} for refiner updates
    double loss = 0.0;
    double realism = 0.0; // refiner records only
    double reg = 0.0;     // refiner records only
};

struct RefinerTrainResult {
    NetworkParams refiner;
    NetworkParams discriminator;
    std::vector<GanStepRecord> history;
    bool buffer_fallback_logged = false;
};

// Adversarial refiner training: per outer iteration two refiner updates
// (each preceded by a history-buffer update) followed by one discriminator
// update on a half-buffer half-fresh fake batch. Deterministic per seed.
RefinerTrainResult train_refiner(const GanConfig& config, const std::vector<Tensor>& synth,
                                 const std::vector<Tensor>& real, uint64_t seed,
                                 std::ostream* log = nullptr);

} // namespace hfid

#endif
