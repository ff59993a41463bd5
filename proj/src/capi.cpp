#include "hfid.h"

#include <cstring>
#include <iostream>
#include <string>

#include "config.hpp"
#include "pipeline.hpp"

using namespace hfid;

namespace {

thread_local std::string g_last_error;
thread_local bool g_verbose = false;

std::ostream* log_stream() {
    return g_verbose ? &std::cerr : nullptr;
}

hfid_status map_code(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidArgument: return HFID_ERR_INVALID_ARGUMENT;
    case ErrorCode::ShapeMismatch: return HFID_ERR_SHAPE_MISMATCH;
    case ErrorCode::Io: return HFID_ERR_IO;
    case ErrorCode::BadMagic:
    case ErrorCode::BadVersion:
    case ErrorCode::Truncated:
    case ErrorCode::DimOverflow: return HFID_ERR_FORMAT;
    case ErrorCode::Numeric: return HFID_ERR_NUMERIC;
    case ErrorCode::Config: return HFID_ERR_CONFIG;
    case ErrorCode::Internal: return HFID_ERR_INTERNAL;
    }
    return HFID_ERR_INTERNAL;
}

template <typename F>
hfid_status guarded(F&& f) {
    try {
        f();
        g_last_error.clear();
        return HFID_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return map_code(e.code());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return HFID_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return HFID_ERR_INTERNAL;
    }
}

hfid_status require(bool ok, const char* message) {
    if (ok)
        return HFID_OK;
    g_last_error = message;
    return HFID_ERR_INVALID_ARGUMENT;
}

const RunConfig& cfg(const hfid_config* config) {
    return *reinterpret_cast<const RunConfig*>(config);
}

RunConfig& cfg(hfid_config* config) {
    return *reinterpret_cast<RunConfig*>(config);
}

} // namespace

extern "C" {

const char* hfid_status_name(hfid_status status) {
    switch (status) {
    case HFID_OK: return "ok";
    case HFID_ERR_INVALID_ARGUMENT: return "invalid-argument";
    case HFID_ERR_SHAPE_MISMATCH: return "shape-mismatch";
    case HFID_ERR_IO: return "io";
    case HFID_ERR_FORMAT: return "format";
    case HFID_ERR_NUMERIC: return "numeric";
    case HFID_ERR_CONFIG: return "config";
    case HFID_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

const char* hfid_last_error(void) {
    return g_last_error.c_str();
}

const char* hfid_version(void) {
    return "1.0.0";
}

void hfid_set_verbose(int verbose) {
    g_verbose = verbose != 0;
}

hfid_status hfid_config_create(hfid_config** out_config) {
    if (hfid_status s = require(out_config != nullptr, "out_config is null"))
        return s;
    return guarded([&] { *out_config = reinterpret_cast<hfid_config*>(new RunConfig()); });
}

void hfid_config_destroy(hfid_config* config) {
    delete reinterpret_cast<RunConfig*>(config);
}

hfid_status hfid_config_load(hfid_config* config, const char* path) {
    if (hfid_status s = require(config && path, "null argument"))
        return s;
    return guarded([&] { cfg(config).load_file(path); });
}

hfid_status hfid_config_set(hfid_config* config, const char* key, const char* value) {
    if (hfid_status s = require(config && key && value, "null argument"))
        return s;
    return guarded([&] { cfg(config).set(key, value); });
}

hfid_status hfid_config_set_seed(hfid_config* config, uint64_t seed) {
    if (hfid_status s = require(config != nullptr, "null config"))
        return s;
    return guarded([&] { cfg(config).set_seed(seed); });
}

hfid_status hfid_config_get(const hfid_config* config, const char* key, char* buf,
                            size_t buf_len) {
    if (hfid_status s = require(config && key && buf && buf_len > 0, "null argument"))
        return s;
    return guarded([&] {
        const std::string& v = cfg(config).get(key);
        size_t n = std::min(buf_len - 1, v.size());
        std::memcpy(buf, v.data(), n);
        buf[n] = '\0';
    });
}

hfid_status hfid_config_dump(const hfid_config* config, char* buf, size_t buf_len,
                             size_t* out_len) {
    if (hfid_status s = require(config != nullptr, "null config"))
        return s;
    return guarded([&] {
        std::string dump = cfg(config).dump();
        if (out_len)
            *out_len = dump.size() + 1;
        if (buf && buf_len > 0) {
            size_t n = std::min(buf_len - 1, dump.size());
            std::memcpy(buf, dump.data(), n);
            buf[n] = '\0';
        }
    });
}

hfid_status hfid_synth(const hfid_config* config, const char* style, const char* out_dir) {
    if (hfid_status s = require(config && style && out_dir, "null argument"))
        return s;
    return guarded([&] { synth_dataset(cfg(config), style, out_dir, log_stream()); });
}

hfid_status hfid_train_refiner(const hfid_config* config, const char* synth_dir,
                               const char* real_dir, const char* refiner_ckpt,
                               const char* discriminator_ckpt) {
    if (hfid_status s = require(config && synth_dir && real_dir && refiner_ckpt &&
                                    discriminator_ckpt,
                                "null argument"))
        return s;
    return guarded([&] {
        train_refiner_files(cfg(config), synth_dir, real_dir, refiner_ckpt, discriminator_ckpt,
                            log_stream());
    });
}

hfid_status hfid_refine(const hfid_config* config, const char* dataset_dir,
                        const char* refiner_ckpt, const char* out_dir) {
    if (hfid_status s = require(config && dataset_dir && refiner_ckpt && out_dir,
                                "null argument"))
        return s;
    return guarded(
        [&] { refine_dataset(cfg(config), dataset_dir, refiner_ckpt, out_dir, log_stream()); });
}

hfid_status hfid_train_hcd(const hfid_config* config, const char* refined_dir,
                           const char* out_ckpt) {
    if (hfid_status s = require(config && refined_dir && out_ckpt, "null argument"))
        return s;
    return guarded([&] { train_hcd_files(cfg(config), refined_dir, out_ckpt, log_stream()); });
}

hfid_status hfid_eval_decompose(const hfid_config* config, const char* dataset_dir,
                                const char* hcd_ckpt, const char* out_tsv) {
    if (hfid_status s = require(config && dataset_dir && hcd_ckpt && out_tsv, "null argument"))
        return s;
    return guarded([&] {
        eval_decompose_files(cfg(config), dataset_dir, hcd_ckpt, out_tsv, log_stream());
    });
}

hfid_status hfid_train_pi(const hfid_config* config, int phase, const char* composites_dir,
                          const char* init_ckpt, const char* out_ckpt) {
    if (hfid_status s = require(config && composites_dir && init_ckpt && out_ckpt,
                                "null argument"))
        return s;
    return guarded([&] {
        train_pi_files(cfg(config), phase, composites_dir, init_ckpt, out_ckpt, log_stream());
    });
}

hfid_status hfid_identify(const char* pi_ckpt, const char* image_png, int* out_printer,
                          double* scores, size_t scores_cap, size_t* n_scores) {
    if (hfid_status s = require(pi_ckpt && image_png && out_printer, "null argument"))
        return s;
    return guarded([&] {
        IdentifyFileResult res = identify_file(pi_ckpt, image_png);
        *out_printer = res.printer;
        if (n_scores)
            *n_scores = res.scores.size();
        if (scores) {
            size_t n = std::min(scores_cap, res.scores.size());
            for (size_t i = 0; i < n; ++i)
                scores[i] = res.scores[i];
        }
    });
}

hfid_status hfid_evaluate(const hfid_config* config, const char* pi_ckpt,
                          const char* dataset_dir, const char* out_tsv,
                          double* out_image_accuracy, double* out_block_accuracy) {
    if (hfid_status s = require(config && pi_ckpt && dataset_dir, "null argument"))
        return s;
    return guarded([&] {
        IdentificationReport rep = evaluate_files(cfg(config), pi_ckpt, dataset_dir,
                                                  out_tsv ? out_tsv : "", log_stream());
        if (out_image_accuracy)
            *out_image_accuracy = rep.image_accuracy;
        if (out_block_accuracy)
            *out_block_accuracy = rep.block_accuracy;
    });
}

hfid_status hfid_robustness(const hfid_config* config, const char* pi_phase1_ckpt,
                            const char* pi_phase2_ckpt, const char* sweep_dir,
                            const char* out_tsv) {
    if (hfid_status s = require(config && pi_phase1_ckpt && pi_phase2_ckpt && sweep_dir &&
                                    out_tsv,
                                "null argument"))
        return s;
    return guarded([&] {
        robustness_files(cfg(config), pi_phase1_ckpt, pi_phase2_ckpt, sweep_dir, out_tsv,
                         log_stream());
    });
}

hfid_status hfid_run_all(const hfid_config* config, const char* run_dir,
                         double* out_accuracy) {
    if (hfid_status s = require(config && run_dir, "null argument"))
        return s;
    return guarded([&] {
        double acc = run_experiment(cfg(config), run_dir, log_stream());
        if (out_accuracy)
            *out_accuracy = acc;
    });
}

} // extern "C"
