#include "pipeline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "checkpoint.hpp"
#include "metrics.hpp"
#include "png_io.hpp"
#include "rng.hpp"

namespace fs = std::filesystem;

namespace hfid {

namespace {

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void log_line(std::ostream* log, const std::string& line) {
    if (log)
        *log << line << "\n" << std::flush;
}

Tensor center_crop(const Tensor& image, int64_t size) {
    const Dims& d = image.dims();
    if (d.h < size || d.w < size)
        raise(ErrorCode::InvalidArgument, "center_crop: image smaller than crop");
    return crop(image, (d.h - size) / 2, (d.w - size) / 2, size, size);
}

struct StageGuard {
    // Re-raises any stage failure with the stage name attached; artifacts
    // written so far stay on disk.
    template <typename F>
    static void run(const char* name, std::ostream* log, F&& f) {
        log_line(log, std::string("[stage] ") + name);
        try {
            f();
        } catch (const Error& e) {
            throw Error(e.code(), std::string("stage '") + name + "': " + e.what());
        } catch (const std::exception& e) {
            throw Error(ErrorCode::Internal, std::string("stage '") + name + "': " + e.what());
        }
    }
};

} // namespace

int64_t ConfusionMatrix::total() const {
    int64_t t = 0;
    for (int64_t c : counts)
        t += c;
    return t;
}

int64_t ConfusionMatrix::trace() const {
    int64_t t = 0;
    for (int i = 0; i < n; ++i)
        t += at(i, i);
    return t;
}

int64_t ConfusionMatrix::row_sum(int truth) const {
    int64_t t = 0;
    for (int i = 0; i < n; ++i)
        t += at(truth, i);
    return t;
}

double ConfusionMatrix::accuracy() const {
    int64_t t = total();
    return t == 0 ? 0.0 : static_cast<double>(trace()) / static_cast<double>(t);
}

IdentificationReport evaluate_identification(const NetworkParams& params,
                                             const NetworkSpec& spec, const ImageSet& set) {
    if (set.size() == 0)
        raise(ErrorCode::InvalidArgument, "evaluate_identification: empty image set");
    int n = static_cast<int>(spec.output_shape().c);
    IdentificationReport report;
    report.confusion = ConfusionMatrix(n);
    int64_t block_hits = 0, block_total = 0;
    for (size_t i = 0; i < set.size(); ++i) {
        int truth = set.labels[i];
        if (truth < 0 || truth >= n)
            raise(ErrorCode::InvalidArgument, "evaluate_identification: label out of range");
        IdentifyResult res = identify_image(params, spec, set.images[i]);
        report.confusion.at(truth, res.printer) += 1;
        for (const auto& scores : res.block_scores) {
            int best = 0;
            for (size_t c = 1; c < scores.size(); ++c)
                if (scores[c] > scores[static_cast<size_t>(best)]) best = static_cast<int>(c);
            if (best == truth) ++block_hits;
            ++block_total;
        }
    }
    report.image_accuracy = report.confusion.accuracy();
    report.block_accuracy =
        block_total ? static_cast<double>(block_hits) / static_cast<double>(block_total) : 0.0;
    return report;
}

std::vector<double> sweep_accuracies(const NetworkParams& params, const NetworkSpec& spec,
                                     const ImageSet& margin_images, TransformAxis axis,
                                     const std::vector<double>& values, int eval_size) {
    if (eval_size < 64 || eval_size % 64 != 0)
        raise(ErrorCode::InvalidArgument, "sweep: eval size must be a positive multiple of 64");
    std::vector<double> out;
    out.reserve(values.size());
    for (double v : values) {
        int64_t hits = 0;
        for (size_t i = 0; i < margin_images.size(); ++i) {
            Tensor t = axis == TransformAxis::Rotation
                           ? rotate_scale(margin_images.images[i], 1.0, v)
                           : rotate_scale(margin_images.images[i], v, 0.0);
            Tensor view = center_crop(t, eval_size);
            IdentifyResult res = identify_image(params, spec, view);
            if (res.printer == margin_images.labels[i]) ++hits;
        }
        out.push_back(static_cast<double>(hits) / static_cast<double>(margin_images.size()));
    }
    return out;
}

RobustnessCurve merge_sweeps(TransformAxis axis, const std::vector<double>& values,
                             const std::vector<std::vector<double>>& per_run_accuracies) {
    if (per_run_accuracies.empty())
        raise(ErrorCode::InvalidArgument, "merge_sweeps: no runs");
    RobustnessCurve curve;
    curve.axis = axis;
    curve.values = values;
    curve.mean_accuracy.assign(values.size(), 0.0);
    curve.std_accuracy.assign(values.size(), 0.0);
    double runs = static_cast<double>(per_run_accuracies.size());
    for (const auto& run : per_run_accuracies) {
        if (run.size() != values.size())
            raise(ErrorCode::InvalidArgument, "merge_sweeps: run length mismatch");
        for (size_t i = 0; i < values.size(); ++i)
            curve.mean_accuracy[i] += run[i] / runs;
    }
    for (const auto& run : per_run_accuracies)
        for (size_t i = 0; i < values.size(); ++i) {
            double d = run[i] - curve.mean_accuracy[i];
            curve.std_accuracy[i] += d * d / runs;
        }
    for (double& s : curve.std_accuracy)
        s = std::sqrt(s);
    return curve;
}

std::vector<CrossvalConfig> crossval_split(const std::vector<int>& labels, int fold_count,
                                           uint64_t seed) {
    if (fold_count != 2)
        raise(ErrorCode::InvalidArgument, "crossval_split: the protocol is 2-fold");
    int max_label = -1;
    for (int l : labels)
        max_label = std::max(max_label, l);
    if (max_label < 0)
        raise(ErrorCode::InvalidArgument, "crossval_split: empty manifest");

    std::vector<std::vector<size_t>> per_printer(static_cast<size_t>(max_label + 1));
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0)
            raise(ErrorCode::InvalidArgument, "crossval_split: negative label");
        per_printer[static_cast<size_t>(labels[i])].push_back(i);
    }
    Rng rng(hash_combine(seed, 0x6376u));
    // halves[p][0/1], quarters[p][half][0/1]
    std::vector<std::array<std::vector<size_t>, 2>> halves(per_printer.size());
    std::vector<std::array<std::array<std::vector<size_t>, 2>, 2>> quarters(per_printer.size());
    for (size_t p = 0; p < per_printer.size(); ++p) {
        auto& idx = per_printer[p];
        if (idx.size() < 4)
            raise(ErrorCode::InvalidArgument,
                  "crossval_split: printer " + std::to_string(p) + " has fewer than 4 images");
        rng.shuffle(idx);
        size_t half = (idx.size() + 1) / 2;
        halves[p][0].assign(idx.begin(), idx.begin() + static_cast<int64_t>(half));
        halves[p][1].assign(idx.begin() + static_cast<int64_t>(half), idx.end());
        for (int h = 0; h < 2; ++h) {
            const auto& hold = halves[p][static_cast<size_t>(1 - h)];
            size_t q = (hold.size() + 1) / 2;
            quarters[p][static_cast<size_t>(h)][0].assign(hold.begin(),
                                                          hold.begin() + static_cast<int64_t>(q));
            quarters[p][static_cast<size_t>(h)][1].assign(hold.begin() + static_cast<int64_t>(q),
                                                          hold.end());
        }
    }

    std::vector<CrossvalConfig> configs(4);
    for (int fold = 0; fold < 2; ++fold)
        for (int alt = 0; alt < 2; ++alt) {
            CrossvalConfig& c = configs[static_cast<size_t>(fold * 2 + alt)];
            for (size_t p = 0; p < per_printer.size(); ++p) {
                const auto& tr = halves[p][static_cast<size_t>(fold)];
                c.train.insert(c.train.end(), tr.begin(), tr.end());
                const auto& v = quarters[p][static_cast<size_t>(fold)][static_cast<size_t>(alt)];
                const auto& te =
                    quarters[p][static_cast<size_t>(fold)][static_cast<size_t>(1 - alt)];
                c.val.insert(c.val.end(), v.begin(), v.end());
                c.test.insert(c.test.end(), te.begin(), te.end());
            }
        }
    return configs;
}

// ---------------------------------------------------------------------------

void quantize01(Tensor& t) {
    float* p = t.data();
    for (int64_t i = 0; i < t.size(); ++i)
        p[i] = static_cast<float>(std::lround(std::clamp(p[i], 0.0f, 1.0f) * 255.0f)) / 255.0f;
}

NetworkSpec pi_spec_for(const NetworkParams& params) {
    if (params.layers.size() != 20)
        raise(ErrorCode::ShapeMismatch, "pi checkpoint must have 20 layers, found " +
                                            std::to_string(params.layers.size()));
    const Tensor& w = params.layers[18].weight;
    if (w.empty())
        raise(ErrorCode::ShapeMismatch, "pi checkpoint missing the final fc weight");
    return pi_spec(static_cast<int>(w.dims().n));
}

PairedSet load_paired_set(const Dataset& dataset, size_t from, size_t count) {
    PairedSet set;
    size_t end = std::min(dataset.size(), count == SIZE_MAX ? dataset.size() : from + count);
    for (size_t i = from; i < end; ++i) {
        std::optional<Tensor> cmyk = load_cmyk(dataset, i);
        if (!cmyk)
            raise(ErrorCode::Io,
                  "sample has no cmyk ground truth: " + dataset.entries[i].rgb_path);
        set.rgb.push_back(load_rgb(dataset, i));
        set.cmyk.push_back(std::move(*cmyk));
    }
    return set;
}

ImageSet load_image_set(const Dataset& dataset) {
    ImageSet set;
    for (size_t i = 0; i < dataset.size(); ++i) {
        set.images.push_back(load_rgb(dataset, i));
        set.labels.push_back(dataset.entries[i].printer_id);
    }
    return set;
}

BlockSet blocks_from_images(const ImageSet& images) {
    BlockSet blocks;
    for (size_t i = 0; i < images.size(); ++i) {
        const Tensor& img = images.images[i];
        const Dims& d = img.dims();
        if (d.h < BlockSet::kSourceSide || d.w < BlockSet::kSourceSide)
            raise(ErrorCode::InvalidArgument, "blocks_from_images: composite below 96x96");
        int64_t by = d.h / 64, bx = d.w / 64;
        for (int64_t gy = 0; gy < by; ++gy)
            for (int64_t gx = 0; gx < bx; ++gx) {
                // 96x96 source window centered on the block, shifted inside
                // the image at the borders.
                int64_t y0 = std::clamp<int64_t>(gy * 64 - 16, 0, d.h - BlockSet::kSourceSide);
                int64_t x0 = std::clamp<int64_t>(gx * 64 - 16, 0, d.w - BlockSet::kSourceSide);
                blocks.add(crop(img, y0, x0, BlockSet::kSourceSide, BlockSet::kSourceSide),
                           images.labels[i]);
            }
    }
    return blocks;
}

// ---------------------------------------------------------------------------
// Dataset synthesis.

void synth_dataset(const RunConfig& config, const std::string& style,
                   const std::string& out_dir, std::ostream* log) {
    int n_printers = config.printer_count();
    uint64_t stream = hash_combine(config.seed(), fnv1a(style));

    bool per_printer_counts = false;
    bool real_camera = false;
    bool with_cmyk = false;
    int64_t count = 0;
    int64_t size = kBlockSize;

    if (style == "synthetic") {
        count = config.get_int("data.gan_synth");
        with_cmyk = true;
    } else if (style == "real") {
        count = config.get_int("data.gan_real");
        real_camera = true;
    } else if (style == "hcd") {
        count = config.get_int("data.hcd_samples");
        with_cmyk = true;
    } else if (style == "hcd-eval") {
        count = config.get_int("data.hcd_eval");
        with_cmyk = true;
    } else if (style == "pi-train") {
        count = config.get_int("data.pi_train_images");
        per_printer_counts = true;
        real_camera = true;
        size = config.get_int("data.pi_image_size");
    } else if (style == "eval") {
        count = config.get_int("data.eval_images");
        per_printer_counts = true;
        real_camera = true;
        size = config.get_int("data.pi_image_size");
    } else if (style == "sweep") {
        count = config.get_int("data.sweep_images");
        per_printer_counts = true;
        real_camera = true;
        // Margin so that every sweep transform stays inside real pixels.
        int64_t eval_size = config.get_int("robust.eval_size");
        size = ((eval_size * 3 / 2) + 63) / 64 * 64;
    } else {
        raise(ErrorCode::InvalidArgument, "unknown dataset style: " + style);
    }
    if (count < 1)
        raise(ErrorCode::Config, "dataset style " + style + " has a nonpositive count");
    if (size % 64 != 0)
        raise(ErrorCode::Config, "data.pi_image_size must be a multiple of 64");

    std::vector<VirtualPrinter> printers = config.printers(real_camera);
    Dataset ds;
    ds.root = out_dir;
    std::vector<int> counters(static_cast<size_t>(n_printers), 0);
    int64_t total = per_printer_counts ? count * n_printers : count;
    for (int64_t i = 0; i < total; ++i) {
        int pid = per_printer_counts ? static_cast<int>(i / count) : static_cast<int>(i % n_printers);
        DatasetEntry e;
        e.printer_id = pid;
        e.content_seed = hash_combine(stream, static_cast<uint64_t>(2 * i));
        e.noise_seed = hash_combine(stream, static_cast<uint64_t>(2 * i + 1));
        e.rgb_path = "printer_" + std::to_string(pid) + "/sample_" +
                     std::to_string(counters[static_cast<size_t>(pid)]++) + ".png";
        RenderedImage img = generate_image(printers[static_cast<size_t>(pid)],
                                           static_cast<int>(size), static_cast<int>(size),
                                           e.content_seed, e.noise_seed);
        save_sample_files(out_dir, e, img.rgb, with_cmyk ? &img.cmyk : nullptr);
        ds.entries.push_back(std::move(e));
    }
    write_manifest(ds);
    log_line(log, "wrote " + std::to_string(total) + " " + style + " samples (" +
                      std::to_string(size) + "px) to " + out_dir);
}

void refine_dataset(const RunConfig& config, const std::string& dataset_dir,
                    const std::string& refiner_ckpt, const std::string& out_dir,
                    std::ostream* log) {
    (void)config;
    Dataset in = load_dataset(dataset_dir);
    if (in.size() == 0)
        raise(ErrorCode::InvalidArgument, "refine: empty dataset " + dataset_dir);
    NetworkParams params = load_checkpoint(refiner_ckpt);
    NetworkSpec spec = refiner_spec();
    validate_params(spec, params);

    Dataset out = in;
    out.root = out_dir;
    const size_t batch = 32;
    for (size_t start = 0; start < in.size(); start += batch) {
        size_t end = std::min(in.size(), start + batch);
        std::vector<Tensor> items;
        for (size_t i = start; i < end; ++i)
            items.push_back(load_rgb(in, i));
        Tensor refined = refine_batch(spec, params, stack_batch(items));
        for (size_t i = start; i < end; ++i) {
            Tensor one = slice_batch(refined, static_cast<int64_t>(i - start));
            fs::path dst = fs::path(out_dir) / in.entries[i].rgb_path;
            std::error_code ec;
            fs::create_directories(dst.parent_path(), ec);
            write_png(one, dst.string());
            // Ground truth carries over untouched.
            fs::path gt_src = fs::path(dataset_dir) / cmyk_path_for(in.entries[i].rgb_path);
            if (fs::exists(gt_src))
                fs::copy_file(gt_src, fs::path(out_dir) / cmyk_path_for(in.entries[i].rgb_path),
                              fs::copy_options::overwrite_existing);
        }
    }
    write_manifest(out);
    log_line(log, "refined " + std::to_string(in.size()) + " samples into " + out_dir);
}

// ---------------------------------------------------------------------------
// Training stages.

namespace {

std::vector<Tensor> load_all_rgb(const Dataset& ds) {
    std::vector<Tensor> out;
    out.reserve(ds.size());
    for (size_t i = 0; i < ds.size(); ++i) {
        Tensor t = load_rgb(ds, i);
        if (!(t.dims() == Dims{1, 3, kBlockSize, kBlockSize}))
            raise(ErrorCode::ShapeMismatch,
                  "expected 64x64 rgb sample: " + ds.entries[i].rgb_path);
        out.push_back(std::move(t));
    }
    return out;
}

} // namespace

void train_refiner_files(const RunConfig& config, const std::string& synth_dir,
                         const std::string& real_dir, const std::string& refiner_out,
                         const std::string& disc_out, std::ostream* log) {
    std::vector<Tensor> synth = load_all_rgb(load_dataset(synth_dir));
    std::vector<Tensor> real = load_all_rgb(load_dataset(real_dir));
    RefinerTrainResult result =
        train_refiner(config.gan(), synth, real, hash_combine(config.seed(), 0x67616eu), log);
    save_checkpoint(result.refiner, refiner_out);
    save_checkpoint(result.discriminator, disc_out);
    log_line(log, "saved refiner to " + refiner_out);
}

void train_hcd_files(const RunConfig& config, const std::string& refined_dir,
                     const std::string& out_ckpt, std::ostream* log) {
    Dataset ds = load_dataset(refined_dir);
    PairedSet all = load_paired_set(ds);
    // 90/10 split keyed on the manifest path hash.
    PairedSet train, val;
    for (size_t i = 0; i < all.size(); ++i) {
        bool is_val = fnv1a(ds.entries[i].rgb_path) % 10 == 0;
        (is_val ? val : train).rgb.push_back(std::move(all.rgb[i]));
        (is_val ? val : train).cmyk.push_back(std::move(all.cmyk[i]));
    }
    if (val.size() == 0) {
        // Tiny datasets can hash entirely into train; peel off one sample.
        val.rgb.push_back(train.rgb.back());
        val.cmyk.push_back(train.cmyk.back());
        train.rgb.pop_back();
        train.cmyk.pop_back();
    }
    HcdTrainResult result =
        train_hcd(config.hcd(), train, val, hash_combine(config.seed(), 0x686364u), log);
    save_checkpoint(result.params, out_ckpt);
    log_line(log, "saved hcd (best epoch " + std::to_string(result.best_epoch) + ") to " +
                      out_ckpt);
}

void eval_decompose_files(const RunConfig& config, const std::string& dataset_dir,
                          const std::string& hcd_ckpt, const std::string& out_tsv,
                          std::ostream* log) {
    (void)config;
    NetworkParams params = load_checkpoint(hcd_ckpt);
    validate_params(hcd_spec(), params);
    PairedSet set = load_paired_set(load_dataset(dataset_dir));
    DecompositionReport report = evaluate_decomposition(params, set);
    std::ofstream out(out_tsv);
    if (!out)
        raise(ErrorCode::Io, "cannot write report: " + out_tsv);
    out << decomposition_report_tsv(report);
    log_line(log, "decomposition report over " + std::to_string(report.sample_count) +
                      " samples -> " + out_tsv);
}

namespace {

void split_blocks(const RunConfig& config, const std::string& composites_dir, BlockSet& train,
                  BlockSet& val) {
    Dataset ds = load_dataset(composites_dir);
    if (ds.size() == 0)
        raise(ErrorCode::InvalidArgument, "empty composites dataset: " + composites_dir);
    int64_t val_images = config.get_int("data.pi_val_images");
    // Hold out the last val_images manifest entries of each printer.
    std::map<int, int64_t> totals;
    for (const DatasetEntry& e : ds.entries)
        totals[e.printer_id] += 1;
    std::map<int, int64_t> seen;
    ImageSet train_images, val_images_set;
    for (size_t i = 0; i < ds.size(); ++i) {
        const DatasetEntry& e = ds.entries[i];
        int64_t pos = seen[e.printer_id]++;
        bool hold_out = pos >= totals[e.printer_id] - val_images;
        ImageSet& target = hold_out ? val_images_set : train_images;
        target.images.push_back(load_rgb(ds, i));
        target.labels.push_back(e.printer_id);
    }
    if (train_images.size() == 0 || val_images_set.size() == 0)
        raise(ErrorCode::InvalidArgument,
              "pi training needs at least one train and one validation image per printer");
    train = blocks_from_images(train_images);
    val = blocks_from_images(val_images_set);
}

} // namespace

void train_pi_files(const RunConfig& config, int phase, const std::string& composites_dir,
                    const std::string& init_ckpt, const std::string& out_ckpt,
                    std::ostream* log) {
    if (phase != 1 && phase != 2)
        raise(ErrorCode::InvalidArgument, "train_pi_files: phase must be 1 or 2");
    NetworkSpec spec = pi_spec(config.printer_count());
    BlockSet train, val;
    split_blocks(config, composites_dir, train, val);
    log_line(log, "pi phase " + std::to_string(phase) + ": " + std::to_string(train.size()) +
                      " train blocks, " + std::to_string(val.size()) + " val blocks");

    NetworkParams init;
    AugmentPolicy policy;
    const AugmentPolicy* policy_ptr = nullptr;
    if (phase == 1) {
        NetworkParams hcd_params = load_checkpoint(init_ckpt);
        validate_params(hcd_spec(), hcd_params);
        init = transfer_init(hcd_params, spec, TransferMap::default_map(),
                             hash_combine(config.seed(), 0x7472616eu));
    } else {
        init = load_checkpoint(init_ckpt);
        validate_params(spec, init);
        policy = config.augment_policy();
        policy_ptr = &policy;
    }
    PiTrainResult result =
        train_pi_phase(config.pi(), spec, train, val, init, policy_ptr,
                       hash_combine(config.seed(), static_cast<uint64_t>(phase)), log);
    save_checkpoint(result.params, out_ckpt);
    log_line(log, "saved pi phase " + std::to_string(phase) + " (best epoch " +
                      std::to_string(result.best_epoch) + ", stop epoch " +
                      std::to_string(result.stop_epoch) + ") to " + out_ckpt);
}

IdentifyFileResult identify_file(const std::string& pi_ckpt, const std::string& image_png) {
    NetworkParams params = load_checkpoint(pi_ckpt);
    NetworkSpec spec = pi_spec_for(params);
    validate_params(spec, params);
    Tensor image = read_png(image_png);
    if (image.dims().c != 3)
        raise(ErrorCode::InvalidArgument, "identify expects an RGB image: " + image_png);
    IdentifyResult res = identify_image(params, spec, image);
    return IdentifyFileResult{res.printer, res.mean_scores};
}

IdentificationReport evaluate_files(const RunConfig& config, const std::string& pi_ckpt,
                                    const std::string& dataset_dir, const std::string& out_tsv,
                                    std::ostream* log) {
    (void)config;
    NetworkParams params = load_checkpoint(pi_ckpt);
    NetworkSpec spec = pi_spec_for(params);
    validate_params(spec, params);
    ImageSet set = load_image_set(load_dataset(dataset_dir));
    IdentificationReport report = evaluate_identification(params, spec, set);
    if (!out_tsv.empty()) {
        std::ofstream out(out_tsv);
        if (!out)
            raise(ErrorCode::Io, "cannot write report: " + out_tsv);
        out << confusion_tsv(report.confusion);
        fs::path png = fs::path(out_tsv).replace_extension(".png");
        write_confusion_png(report.confusion, png.string());
    }
    std::ostringstream msg;
    msg << "evaluated " << set.size() << " images: image accuracy " << report.image_accuracy
        << ", block accuracy " << report.block_accuracy;
    log_line(log, msg.str());
    return report;
}

void robustness_files(const RunConfig& config, const std::string& pi_phase1_ckpt,
                      const std::string& pi_phase2_ckpt, const std::string& sweep_dir,
                      const std::string& out_tsv, std::ostream* log) {
    NetworkParams p1 = load_checkpoint(pi_phase1_ckpt);
    NetworkParams p2 = load_checkpoint(pi_phase2_ckpt);
    NetworkSpec spec = pi_spec_for(p2);
    validate_params(spec, p1);
    validate_params(spec, p2);
    ImageSet margin = load_image_set(load_dataset(sweep_dir));
    int eval_size = static_cast<int>(config.get_int("robust.eval_size"));
    std::vector<double> rot = config.get_list("robust.rotations");
    std::vector<double> scl = config.get_list("robust.scales");

    auto run = [&](const NetworkParams& p, TransformAxis axis, const std::vector<double>& vals) {
        return merge_sweeps(axis, vals,
                            {sweep_accuracies(p, spec, margin, axis, vals, eval_size)});
    };
    RobustnessCurve r1 = run(p1, TransformAxis::Rotation, rot);
    RobustnessCurve r2 = run(p2, TransformAxis::Rotation, rot);
    RobustnessCurve s1 = run(p1, TransformAxis::Scaling, scl);
    RobustnessCurve s2 = run(p2, TransformAxis::Scaling, scl);
    std::ofstream out(out_tsv);
    if (!out)
        raise(ErrorCode::Io, "cannot write report: " + out_tsv);
    out << robustness_tsv(r1, r2, s1, s2);
    log_line(log, "robustness curves -> " + out_tsv);
}

// ---------------------------------------------------------------------------

double run_experiment(const RunConfig& config, const std::string& run_dir, std::ostream* log) {
    fs::path root(run_dir);
    std::error_code ec;
    fs::create_directories(root / "checkpoints", ec);
    fs::create_directories(root / "reports", ec);
    fs::create_directories(root / "datasets", ec);
    {
        std::ofstream cfg(root / "config.txt");
        cfg << config.dump();
    }

    auto dsdir = [&](const char* name) { return (root / "datasets" / name).string(); };
    auto ckpt = [&](const char* name) {
        return (root / "checkpoints" / (std::string(name) + ".hfck")).string();
    };
    auto report = [&](const char* name) { return (root / "reports" / name).string(); };
    bool skip_refine = config.get_bool("pipeline.skip_refine");

    StageGuard::run("synthesize datasets", log, [&] {
        synth_dataset(config, "synthetic", dsdir("gan_synth"), log);
        synth_dataset(config, "real", dsdir("gan_real"), log);
        synth_dataset(config, "hcd", dsdir("hcd_raw"), log);
        synth_dataset(config, "hcd-eval", dsdir("hcd_eval_raw"), log);
        synth_dataset(config, "pi-train", dsdir("pi_train"), log);
        synth_dataset(config, "eval", dsdir("eval"), log);
        synth_dataset(config, "sweep", dsdir("sweep"), log);
    });

    std::string hcd_train_dir = dsdir("hcd_raw");
    std::string hcd_eval_dir = dsdir("hcd_eval_raw");
    if (!skip_refine) {
        StageGuard::run("train refiner", log, [&] {
            train_refiner_files(config, dsdir("gan_synth"), dsdir("gan_real"), ckpt("refiner"),
                                ckpt("discriminator"), log);
        });
        StageGuard::run("refine dataset", log, [&] {
            refine_dataset(config, dsdir("hcd_raw"), ckpt("refiner"), dsdir("hcd_refined"), log);
            refine_dataset(config, dsdir("hcd_eval_raw"), ckpt("refiner"),
                           dsdir("hcd_eval_refined"), log);
        });
        hcd_train_dir = dsdir("hcd_refined");
        hcd_eval_dir = dsdir("hcd_eval_refined");
    } else {
        log_line(log, "[stage] refinement skipped (ablation)");
    }

    StageGuard::run("train hcd", log,
                    [&] { train_hcd_files(config, hcd_train_dir, ckpt("hcd"), log); });
    StageGuard::run("decomposition report", log, [&] {
        eval_decompose_files(config, hcd_eval_dir, ckpt("hcd"), report("decomposition.tsv"), log);
    });
    StageGuard::run("train pi phase 1", log, [&] {
        train_pi_files(config, 1, dsdir("pi_train"), ckpt("hcd"), ckpt("pi_phase1"), log);
    });
    StageGuard::run("train pi phase 2", log, [&] {
        train_pi_files(config, 2, dsdir("pi_train"), ckpt("pi_phase1"), ckpt("pi"), log);
    });

    double final_accuracy = 0.0;
    StageGuard::run("evaluate", log, [&] {
        IdentificationReport rep =
            evaluate_files(config, ckpt("pi"), dsdir("eval"), report("confusion.tsv"), log);
        final_accuracy = rep.image_accuracy;
        std::ofstream summary(root / "reports" / "summary.txt");
        summary << "image_accuracy=" << rep.image_accuracy << "\n"
                << "block_accuracy=" << rep.block_accuracy << "\n";
    });
    StageGuard::run("robustness", log, [&] {
        robustness_files(config, ckpt("pi_phase1"), ckpt("pi"), dsdir("sweep"),
                         report("robustness.tsv"), log);
    });
    log_line(log, "run complete: image accuracy " + std::to_string(final_accuracy));
    return final_accuracy;
}

// ---------------------------------------------------------------------------
// Report rendering.

std::string confusion_tsv(const ConfusionMatrix& m) {
    std::ostringstream out;
    out << "true_printer";
    for (int i = 0; i < m.n; ++i)
        out << "\tpred_" << i;
    out << "\n";
    for (int t = 0; t < m.n; ++t) {
        out << t;
        for (int p = 0; p < m.n; ++p)
            out << '\t' << m.at(t, p);
        out << "\n";
    }
    return out.str();
}

void write_confusion_png(const ConfusionMatrix& m, const std::string& path) {
    const int cell = 32;
    int64_t side = static_cast<int64_t>(m.n) * cell;
    Tensor img(Dims{1, 3, side, side});
    for (int t = 0; t < m.n; ++t) {
        int64_t row_total = m.row_sum(t);
        for (int p = 0; p < m.n; ++p) {
            double v = row_total ? static_cast<double>(m.at(t, p)) / row_total : 0.0;
            // White through deep blue ramp.
            float r = static_cast<float>(1.0 - 0.9 * v);
            float g = static_cast<float>(1.0 - 0.8 * v);
            float b = static_cast<float>(1.0 - 0.4 * v);
            for (int64_t y = t * cell; y < (t + 1) * static_cast<int64_t>(cell); ++y)
                for (int64_t x = p * cell; x < (p + 1) * static_cast<int64_t>(cell); ++x) {
                    img.at(0, 0, y, x) = r;
                    img.at(0, 1, y, x) = g;
                    img.at(0, 2, y, x) = b;
                }
        }
    }
    write_png(img, path);
}

std::string robustness_tsv(const RobustnessCurve& phase1_rot, const RobustnessCurve& phase2_rot,
                           const RobustnessCurve& phase1_scale,
                           const RobustnessCurve& phase2_scale) {
    std::ostringstream out;
    out << "axis\tvalue\tphase1_mean\tphase1_std\tphase2_mean\tphase2_std\n";
    auto rows = [&](const char* axis, const RobustnessCurve& a, const RobustnessCurve& b) {
        for (size_t i = 0; i < a.values.size(); ++i)
            out << axis << '\t' << a.values[i] << '\t' << a.mean_accuracy[i] << '\t'
                << a.std_accuracy[i] << '\t' << b.mean_accuracy[i] << '\t' << b.std_accuracy[i]
                << "\n";
    };
    rows("rotation", phase1_rot, phase2_rot);
    rows("scaling", phase1_scale, phase2_scale);
    return out.str();
}

} // namespace hfid
