/* C API for the failure-discovery engine. All entry points are exported from
 * the shared library; the CLI links against this interface only. */
#ifndef PROBELLM_H
#define PROBELLM_H

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pl_status {
    PL_OK = 0,
    PL_ERR_VALIDATION = 2,
    PL_ERR_RUNTIME = 3,
    PL_ERR_RESUME_REFUSED = 4,
} pl_status;

/* Opaque engine handle carrying a loaded configuration and the last error. */
typedef struct pl_engine pl_engine;

/* Loads a JSON config file. Returns NULL only on allocation failure; config
 * problems are reported by pl_engine_validate / the run entry points. */
pl_engine* pl_engine_create(const char* config_path);
void pl_engine_free(pl_engine* e);

/* Last human-readable error for this handle; empty string when none.
 * The pointer stays valid until the next call on the same handle. */
const char* pl_last_error(const pl_engine* e);

/* Scalar config overrides applied on top of the loaded file. Supported keys:
 * "output_dir", "seed_file", "rng_seed", "max_simulations", "synthetic"
 * (value "default" installs a stock synthetic field when none is configured),
 * "benchmark". */
pl_status pl_engine_set_override(pl_engine* e, const char* key,
                                 const char* value);

/* Config validation only; no side effects. */
pl_status pl_engine_validate(pl_engine* e);

/* Full pipeline: probing, mining, induction, report. */
pl_status pl_engine_probe(pl_engine* e);

/* Variant that aborts with a resumable checkpoint after N simulations. */
pl_status pl_engine_probe_interrupted(pl_engine* e, long interrupt_after);

/* Stages 3-4 plus report over the checkpoint in output_dir. */
pl_status pl_engine_mine(pl_engine* e);

/* Metrics recomputation; compare_dir may be NULL, otherwise overlap analysis
 * runs against that run's embeddings. */
pl_status pl_engine_analyze(pl_engine* e, const char* compare_dir);

/* Clustering-parameter sensitivity sweep over the stored embeddings. */
pl_status pl_engine_sweep(pl_engine* e);

/* Resume from an explicit checkpoint path. Refuses on config-hash or
 * checkpoint-version mismatch. */
pl_status pl_engine_resume(pl_engine* e, const char* checkpoint_path);

#ifdef __cplusplus
}
#endif

#endif /* PROBELLM_H */
