#ifndef HFID_HCD_HPP
#define HFID_HCD_HPP

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "network.hpp"

namespace hfid {

struct HcdConfig {
    float lr = 1e-4f;
    int batch_size = 32;
    int max_epochs = 40;
    int patience = 5; // epochs without validation-loss improvement
};

// In-memory paired samples; each rgb (1,3,64,64), each cmyk (1,4,64,64).
struct PairedSet {
    std::vector<Tensor> rgb;
    std::vector<Tensor> cmyk;

    size_t size() const { return rgb.size(); }
};

struct HcdCurvePoint {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct HcdTrainResult {
    NetworkParams params; // parameters at the best validation loss
    std::vector<HcdCurvePoint> curve;
    int best_epoch = 0;
};

// Sum over the batch of squared L2 distances, divided by 2N.
double euclidean_loss(const Tensor& pred, const Tensor& target);

// Adam on euclidean_loss with early stopping on the validation loss.
HcdTrainResult train_hcd(const HcdConfig& config, const PairedSet& train, const PairedSet& val,
                         uint64_t seed, std::ostream* log = nullptr);

// Eval-mode decomposition; channel order C,M,Y,K. Output is unclamped.
Tensor decompose(const NetworkParams& params, const Tensor& rgb);

struct ChannelMetrics {
    double psnr_hcd = 0.0;
    double psnr_profile = 0.0;
    double ssim_hcd = 0.0;
    double ssim_profile = 0.0;
};

struct DecompositionReport {
    ChannelMetrics channel[4]; // C, M, Y, K
    size_t sample_count = 0;
};

// Mean per-channel PSNR/SSIM of the HCD network and the naive profile
// baseline against ground truth; predictions clamped to [0,1] first.
DecompositionReport evaluate_decomposition(const NetworkParams& params, const PairedSet& eval_set);

std::string decomposition_report_tsv(const DecompositionReport& report);

} // namespace hfid

#endif
