#ifndef MEANFLOW_MEANFLOW_H
#define MEANFLOW_MEANFLOW_H

/* C interface to the meanflow training laboratory.
 *
 * All entry points are thread-compatible: distinct contexts may be used from
 * distinct threads. Functions return MF_OK (0) on success; any other status
 * is also the conventional process exit code for that failure class, and the
 * human-readable detail is retrievable with mf_last_error().
 */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define MEANFLOW_API_VERSION 1u

typedef enum mf_status {
    MF_OK = 0,
    MF_ERR_CONFIG = 2,  /* bad config file, key, value or CLI usage */
    MF_ERR_NUMERIC = 3, /* NaN/Inf escaped a numeric path */
    MF_ERR_IO = 4,      /* unreadable/corrupt files, failed writes */
    MF_ERR_INVALID = 5  /* contract violation (bad handle, shape, argument) */
} mf_status;

typedef struct mf_context mf_context;
typedef struct mf_model mf_model;

uint32_t mf_api_version(void);
const char* mf_version(void);

mf_context* mf_context_create(void);
void mf_context_destroy(mf_context* ctx);

/* Copies the last error message into buf (NUL-terminated, at most
 * buf_size - 1 chars) and returns the full message length. */
size_t mf_last_error(const mf_context* ctx, char* buf, size_t buf_size);

/* ---- run drivers (the CLI verbs) ------------------------------------- */

/* Trains per the JSON config; "path.to.key=value" overrides are applied in
 * order. out_dir NULL resolves from the config and $MEANFLOW_OUT_ROOT.
 * Artifacts: manifest.json, config.resolved.json, metrics.csv,
 * checkpoint.json. */
mf_status mf_train(mf_context* ctx, const char* config_path, const char* const* overrides,
                   size_t n_overrides, const char* out_dir);

/* Reruns one of the observational studies: obs1 | obs2 | obs3 | ablation |
 * ksweep. profile_json (may be NULL) adjusts the desk-scale sizing, e.g.
 * {"task":"gauss8","total_iters":4000,"seeds":[1,2,3],"parallel":2}.
 * Completed cells found in out_dir are reused. */
mf_status mf_reproduce(mf_context* ctx, const char* study, const char* out_dir,
                       const char* profile_json);

/* W2 readouts of a checkpoint on a task. mode is "mean-step" or "euler-v";
 * w2_out must hold n_nfe doubles. out_csv NULL skips the file. */
mf_status mf_eval(mf_context* ctx, const char* checkpoint_path, const char* task,
                  const char* mode, const int* nfe_list, size_t n_nfe, double* w2_out,
                  const char* out_csv);

/* Draws n samples and writes <out_base>.csv plus raw doubles in
 * <out_base>.f64 (row-major, n x dim). */
mf_status mf_sample_to_file(mf_context* ctx, const char* checkpoint_path, const char* mode,
                            int nfe, size_t n, uint64_t seed, const char* out_base);

/* Copies the generated configuration reference text. */
size_t mf_config_reference(char* buf, size_t buf_size);

/* ---- model handles ---------------------------------------------------- */

mf_status mf_model_load(mf_context* ctx, const char* checkpoint_path, mf_model** out_model);
void mf_model_destroy(mf_model* model);
int32_t mf_model_dim(const mf_model* model);
int64_t mf_model_param_count(const mf_model* model);

/* Samples into caller memory: out holds n * dim doubles. */
mf_status mf_model_sample(mf_context* ctx, const mf_model* model, const char* mode, int nfe,
                          size_t n, uint64_t seed, double* out);

/* Average-velocity query u(z, r, t) for a batch of n points. */
mf_status mf_model_velocity(mf_context* ctx, const mf_model* model, const double* z, size_t n,
                            double r, double t, double* out);

/* ---- standalone utilities --------------------------------------------- */

/* Exact 2-Wasserstein distance between two n x dim clouds (n <= 4096). */
mf_status mf_wasserstein2(mf_context* ctx, const double* a, const double* b, size_t n,
                          size_t dim, double* out);

#ifdef __cplusplus
}
#endif

#endif /* MEANFLOW_MEANFLOW_H */
