#ifndef HFID_PRINTER_ID_HPP
#define HFID_PRINTER_ID_HPP

#include <cstdint>
#include <ostream>
#include <utility>
#include <vector>

#include "network.hpp"

namespace hfid {

// 1-based (hcd layer, pi layer) pairs; the default carries the seven shared
// 64-map conv layers across.
struct TransferMap {
    std::vector<std::pair<int, int>> pairs;

    static TransferMap default_map();
};

struct AugmentPolicy {
    std::vector<double> scales = {0.8, 1.0, 1.2};
    std::vector<double> rotations_deg = {-10.0, 0.0, 10.0};
};

struct PiConfig {
    float lr = 2e-5f;
    int batch_size = 32;
    int patience = 10; // epochs without validation-accuracy improvement
    int max_epochs = 60;
    int n_printers = 8;
};

// Copies mapped conv parameters (weights, biases, batch-norm tensors)
// verbatim from the HCD network; everything else is Xavier-initialized from
// `seed`. Shape mismatches are rejected naming the offending pair.
NetworkParams transfer_init(const NetworkParams& hcd_params, const NetworkSpec& pi,
                            const TransferMap& map, uint64_t seed);

// Same-size scale+rotate about the image center with bilinear interpolation
// and replicated borders. Identity parameters return the input unchanged.
Tensor rotate_scale(const Tensor& image, double scale, double theta_deg);

// Scales by s and rotates by theta about the 96x96 region center, then
// center-crops 64x64. Identity parameters reproduce the central crop
// exactly. Preconditions: s in [0.5,2], |theta| <= 45 degrees.
Tensor augment_block(const Tensor& source, double scale, double theta_deg);

// Labeled training blocks; each sample keeps its 96x96 source region so the
// augmented phase can rotate without importing padding. Sources are stored
// as 8-bit CHW to bound memory.
struct BlockSet {
    static constexpr int kSourceSide = 96;
    std::vector<std::vector<uint8_t>> sources;
    std::vector<int> labels;

    size_t size() const { return sources.size(); }
    void add(const Tensor& source96, int label);
    // Central 64x64 crop as float tensor.
    Tensor central_block(size_t i) const;
    Tensor source_tensor(size_t i) const;
};

struct PiCurvePoint {
    int epoch = 0;
    double train_loss = 0.0;
    double val_accuracy = 0.0;
};

struct PiTrainResult {
    NetworkParams params; // parameters at the best validation accuracy
    std::vector<PiCurvePoint> curve;
    int best_epoch = 0;
    int stop_epoch = 0;
};

// Softmax cross-entropy training with early stopping on validation
// accuracy (ties keep the earliest epoch). When `policy` is null the loop
// feeds unaugmented central crops (phase 1); otherwise every block draws an
// independent (s, theta) each epoch and validation uses a fixed per-block
// draw (phase 2).
PiTrainResult train_pi_phase(const PiConfig& config, const NetworkSpec& spec,
                             const BlockSet& train, const BlockSet& val,
                             const NetworkParams& init, const AugmentPolicy* policy,
                             uint64_t seed, std::ostream* log = nullptr);

// Eval-mode class probabilities for one 64x64 block.
std::vector<float> classify_block(const NetworkParams& params, const NetworkSpec& spec,
                                  const Tensor& block);

struct IdentifyResult {
    int printer = 0;                 // argmax of the mean score (lowest ties)
    std::vector<double> mean_scores; // 64-bit mean of block softmax vectors
    std::vector<std::vector<float>> block_scores;
    int blocks_y = 0;
    int blocks_x = 0;
};

// Tiles the image into disjoint 64x64 blocks (edge remainders discarded),
// classifies each block and averages the softmax vectors in double
// precision.
IdentifyResult identify_image(const NetworkParams& params, const NetworkSpec& spec,
                              const Tensor& image);

Tensor crop(const Tensor& image, int64_t y0, int64_t x0, int64_t h, int64_t w);

} // namespace hfid

#endif
