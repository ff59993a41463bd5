#ifndef HFID_PIPELINE_HPP
#define HFID_PIPELINE_HPP

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "config.hpp"
#include "dataset.hpp"
#include "hcd.hpp"
#include "printer_id.hpp"

namespace hfid {

struct ConfusionMatrix {
    int n = 0;
    std::vector<int64_t> counts; // row = true printer, column = predicted

    explicit ConfusionMatrix(int n_printers = 0)
        : n(n_printers), counts(static_cast<size_t>(n_printers) * n_printers, 0) {}

    int64_t& at(int truth, int pred) { return counts[static_cast<size_t>(truth) * n + pred]; }
    int64_t at(int truth, int pred) const { return counts[static_cast<size_t>(truth) * n + pred]; }
    int64_t total() const;
    int64_t trace() const;
    int64_t row_sum(int truth) const;
    double accuracy() const;
};

struct ImageSet {
    std::vector<Tensor> images; // each (1,3,H,W)
    std::vector<int> labels;

    size_t size() const { return images.size(); }
};

struct IdentificationReport {
    ConfusionMatrix confusion;
    double image_accuracy = 0.0;
    double block_accuracy = 0.0;
};

// Runs identify_image over every labeled image and accumulates counts.
IdentificationReport evaluate_identification(const NetworkParams& params,
                                             const NetworkSpec& spec, const ImageSet& set);

enum class TransformAxis { Rotation, Scaling };

// Applies each transform value to the margin-sized test images, center-crops
// to eval_size and evaluates identification accuracy.
std::vector<double> sweep_accuracies(const NetworkParams& params, const NetworkSpec& spec,
                                     const ImageSet& margin_images,
                                     TransformAxis axis, const std::vector<double>& values,
                                     int eval_size);

struct RobustnessCurve {
    TransformAxis axis = TransformAxis::Rotation;
    std::vector<double> values;
    std::vector<double> mean_accuracy;
    std::vector<double> std_accuracy; // over cross-validation repetitions
};

RobustnessCurve merge_sweeps(TransformAxis axis, const std::vector<double>& values,
                             const std::vector<std::vector<double>>& per_run_accuracies);

// 2-fold cross validation with the held-out half split into validation and
// test halves, alternated: four configurations per experiment. Labels index
// images per printer; every configuration partitions all images.
struct CrossvalConfig {
    std::vector<size_t> train;
    std::vector<size_t> val;
    std::vector<size_t> test;
};
std::vector<CrossvalConfig> crossval_split(const std::vector<int>& labels, int fold_count,
                                           uint64_t seed);

// ---------------------------------------------------------------------------
// File-level stage operations shared by the CLI and run_experiment.

// style: synthetic | real | eval | pi-train | sweep
void synth_dataset(const RunConfig& config, const std::string& style,
                   const std::string& out_dir, std::ostream* log = nullptr);

void refine_dataset(const RunConfig& config, const std::string& dataset_dir,
                    const std::string& refiner_ckpt, const std::string& out_dir,
                    std::ostream* log = nullptr);

void train_refiner_files(const RunConfig& config, const std::string& synth_dir,
                         const std::string& real_dir, const std::string& refiner_out,
                         const std::string& disc_out, std::ostream* log = nullptr);

void train_hcd_files(const RunConfig& config, const std::string& refined_dir,
                     const std::string& out_ckpt, std::ostream* log = nullptr);

void eval_decompose_files(const RunConfig& config, const std::string& dataset_dir,
                          const std::string& hcd_ckpt, const std::string& out_tsv,
                          std::ostream* log = nullptr);

// phase 1 initializes from an HCD checkpoint (weight transfer); phase 2
// fine-tunes a phase-1 PI checkpoint with the augmentation policy.
void train_pi_files(const RunConfig& config, int phase, const std::string& composites_dir,
                    const std::string& init_ckpt, const std::string& out_ckpt,
                    std::ostream* log = nullptr);

struct IdentifyFileResult {
    int printer = 0;
    std::vector<double> scores;
};
IdentifyFileResult identify_file(const std::string& pi_ckpt, const std::string& image_png);

IdentificationReport evaluate_files(const RunConfig& config, const std::string& pi_ckpt,
                                    const std::string& dataset_dir, const std::string& out_tsv,
                                    std::ostream* log = nullptr);

void robustness_files(const RunConfig& config, const std::string& pi_phase1_ckpt,
                      const std::string& pi_phase2_ckpt, const std::string& sweep_dir,
                      const std::string& out_tsv, std::ostream* log = nullptr);

// Full pipeline into a run directory; returns the final image accuracy.
double run_experiment(const RunConfig& config, const std::string& run_dir,
                      std::ostream* log = nullptr);

// ---------------------------------------------------------------------------
// Helpers shared with tests and the acceptance suite.

// PNG-equivalent quantization: round to 8-bit levels in place.
void quantize01(Tensor& t);

// Builds the PI network spec matching a loaded checkpoint (reads the final
// fully-connected width).
NetworkSpec pi_spec_for(const NetworkParams& params);

PairedSet load_paired_set(const Dataset& dataset, size_t from = 0,
                          size_t count = SIZE_MAX);

ImageSet load_image_set(const Dataset& dataset);

// Tiles labeled composites into 96x96-source training blocks; entries whose
// printer id matches `val_label_skip` semantics are handled by the caller.
BlockSet blocks_from_images(const ImageSet& images);

std::string confusion_tsv(const ConfusionMatrix& m);
void write_confusion_png(const ConfusionMatrix& m, const std::string& path);
std::string robustness_tsv(const RobustnessCurve& phase1_rot, const RobustnessCurve& phase2_rot,
                           const RobustnessCurve& phase1_scale,
                           const RobustnessCurve& phase2_scale);

} // namespace hfid

#endif
