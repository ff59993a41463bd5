/* hfid - source color laser printer identification from halftone structure.
 *
 * C API over the core library: opaque handles, integer status codes, and
 * coarse pipeline operations. All functions return HFID_OK on success; on
 * failure hfid_last_error() describes the most recent error in the calling
 * thread.
 */

#ifndef HFID_H
#define HFID_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hfid_status {
    HFID_OK = 0,
    HFID_ERR_INVALID_ARGUMENT = 1,
    HFID_ERR_SHAPE_MISMATCH = 2,
    HFID_ERR_IO = 3,
    HFID_ERR_FORMAT = 4,   /* checkpoint magic/version/truncation/dims */
    HFID_ERR_NUMERIC = 5,  /* NaN/Inf encountered during training */
    HFID_ERR_CONFIG = 6,   /* unknown key or malformed value */
    HFID_ERR_INTERNAL = 7
} hfid_status;

const char* hfid_status_name(hfid_status status);

/* Thread-local message for the last failing call; empty string if none. */
const char* hfid_last_error(void);

const char* hfid_version(void);

/* ------------------------------------------------------------------ */
/* Configuration: flat key=value settings with documented defaults.    */

typedef struct hfid_config hfid_config;

hfid_status hfid_config_create(hfid_config** out_config);
void hfid_config_destroy(hfid_config* config);

hfid_status hfid_config_load(hfid_config* config, const char* path);
hfid_status hfid_config_set(hfid_config* config, const char* key, const char* value);
hfid_status hfid_config_set_seed(hfid_config* config, uint64_t seed);

/* Copies the value of `key` into buf (NUL terminated, truncating). */
hfid_status hfid_config_get(const hfid_config* config, const char* key, char* buf,
                            size_t buf_len);

/* Full key=value dump into buf; returns required length via out_len. */
hfid_status hfid_config_dump(const hfid_config* config, char* buf, size_t buf_len,
                             size_t* out_len);

/* ------------------------------------------------------------------ */
/* Pipeline stages. Paths are UTF-8; directories are created on demand. */

/* style: "synthetic" | "real" | "hcd" | "hcd-eval" | "pi-train" | "eval"
 * | "sweep" */
hfid_status hfid_synth(const hfid_config* config, const char* style, const char* out_dir);

hfid_status hfid_train_refiner(const hfid_config* config, const char* synth_dir,
                               const char* real_dir, const char* refiner_ckpt,
                               const char* discriminator_ckpt);

hfid_status hfid_refine(const hfid_config* config, const char* dataset_dir,
                        const char* refiner_ckpt, const char* out_dir);

hfid_status hfid_train_hcd(const hfid_config* config, const char* refined_dir,
                           const char* out_ckpt);

hfid_status hfid_eval_decompose(const hfid_config* config, const char* dataset_dir,
                                const char* hcd_ckpt, const char* out_tsv);

/* phase 1: init_ckpt is an HCD checkpoint (weight transfer); phase 2:
 * init_ckpt is a phase-1 PI checkpoint. */
hfid_status hfid_train_pi(const hfid_config* config, int phase, const char* composites_dir,
                          const char* init_ckpt, const char* out_ckpt);

/* Blockwise identification of one PNG. scores may be NULL; otherwise up to
 * scores_cap mean per-printer scores are written and *n_scores set. */
hfid_status hfid_identify(const char* pi_ckpt, const char* image_png, int* out_printer,
                          double* scores, size_t scores_cap, size_t* n_scores);

hfid_status hfid_evaluate(const hfid_config* config, const char* pi_ckpt,
                          const char* dataset_dir, const char* out_tsv,
                          double* out_image_accuracy, double* out_block_accuracy);

hfid_status hfid_robustness(const hfid_config* config, const char* pi_phase1_ckpt,
                            const char* pi_phase2_ckpt, const char* sweep_dir,
                            const char* out_tsv);

/* Full pipeline into run_dir; writes checkpoints and reports, returns the
 * final image-level accuracy. */
hfid_status hfid_run_all(const hfid_config* config, const char* run_dir,
                         double* out_accuracy);

/* Enables stage logging to stderr (nonzero) for subsequent calls on this
 * thread. */
void hfid_set_verbose(int verbose);

#ifdef __cplusplus
}
#endif

#endif /* HFID_H */
