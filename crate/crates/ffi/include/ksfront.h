#ifndef KSFRONT_H
#define KSFRONT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum KsfStatus {
  KSF_STATUS_OK = 0,
  KSF_STATUS_NULL_POINTER = 1,
  KSF_STATUS_INVALID_ARGUMENT = 2,
  /*
   A model hypothesis or admissibility inequality failed.
   */
  KSF_STATUS_HYPOTHESIS = 3,
  /*
   Stability refusal, negativity, non-convergence or an envelope violation.
   */
  KSF_STATUS_NUMERICAL = 4,
  KSF_STATUS_CONFIG = 5,
  KSF_STATUS_IO = 6,
  KSF_STATUS_PANIC = 7,
  KSF_STATUS_BUFFER_TOO_SMALL = 8,
} KsfStatus;

typedef enum KsfTail {
  KSF_TAIL_ZERO = 0,
  KSF_TAIL_CONSTANT_LEFT = 1,
  KSF_TAIL_CONSTANT_BOTH = 2,
} KsfTail;

typedef enum KsfScheme {
  KSF_SCHEME_IMEX = 0,
  KSF_SCHEME_EXPLICIT_EULER = 1,
} KsfScheme;

/*
 Model constants.
 */
typedef struct KsfModel KsfModel;

/*
 The outcome of a scenario run.
 */
typedef struct KsfReport KsfReport;

/*
 A time-dependent run advanced step by step.
 */
typedef struct KsfSimulation KsfSimulation;

/*
 A converged traveling-wave profile.
 */
typedef struct KsfWave KsfWave;

typedef struct KsfSpeedConstants {
  double c0_star;
  double a_star;
  double c_star;
  double c_star_star;
} KsfSpeedConstants;

typedef struct KsfWaveDiagnostics {
  double speed;
  double residual;
  double right_tail_deviation;
  double left_value;
  double left_deviation;
  double envelope_margin;
  double envelope_d;
  uint32_t outer_iterations;
} KsfWaveDiagnostics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the most recent failure on this thread, or NULL. The pointer stays
 valid until the next failing call on the same thread.
 */
const char *ksf_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *ksf_version(void);

/*
 Create a model. `a`, `b`, `lambda`, `mu` must be positive and `chi` nonnegative.

 # Safety
 `out_model` must be a valid pointer to writable storage for a handle.
 */
enum KsfStatus ksf_model_new(double chi,
                             double a,
                             double b,
                             double lambda,
                             double mu,
                             struct KsfModel **out_model);

/*
 # Safety
 `model` must be NULL or a handle from [`ksf_model_new`] not yet freed.
 */
void ksf_model_free(struct KsfModel *model);

/*
 `chi mu < b`.

 # Safety
 Pointers must be valid.
 */
enum KsfStatus ksf_model_global_existence(const struct KsfModel *model, bool *out_flag);

/*
 Whether the hypothesis under which the spreading speed equals `2 sqrt(a)` holds.

 # Safety
 Pointers must be valid.
 */
enum KsfStatus ksf_model_hypothesis_h(const struct KsfModel *model, bool *out_flag);

/*
 # Safety
 Pointers must be valid.
 */
enum KsfStatus ksf_model_kappa_admissible(const struct KsfModel *model,
                                          double kappa,
                                          bool *out_flag);

/*
 `(kappa^2 + a) / kappa`.

 # Safety
 Pointers must be valid.
 */
enum KsfStatus ksf_model_c_kappa(const struct KsfModel *model, double kappa, double *out_speed);

/*
 Fails with `KSF_STATUS_HYPOTHESIS` when `chi mu >= b`.

 # Safety
 Pointers must be valid.
 */
enum KsfStatus ksf_model_speed_constants(const struct KsfModel *model,
                                         struct KsfSpeedConstants *out_constants);

/*
 Chemical field `v` and its derivative for nodal density `u` on `[-half_length, half_length]`.

 # Safety
 `u`, `out_v`, `out_v_x` must each point to `n_nodes` doubles; `out_v_x` may be NULL.
 */
enum KsfStatus ksf_psi_fast(const struct KsfModel *model,
                            double half_length,
                            const double *u,
                            size_t n_nodes,
                            int32_t tail,
                            double *out_v,
                            double *out_v_x);

/*
 Start a run from nodal data `u0` on `[-half_length, half_length]`.

 # Safety
 `model` must be valid, `u0` must point to `n_nodes` doubles and `out_sim` to handle storage.
 */
enum KsfStatus ksf_simulation_new(const struct KsfModel *model,
                                  double half_length,
                                  const double *u0,
                                  size_t n_nodes,
                                  double dt,
                                  int32_t scheme,
                                  int32_t tail,
                                  struct KsfSimulation **out_sim);

/*
 # Safety
 `sim` must be NULL or a handle from [`ksf_simulation_new`] not yet freed.
 */
void ksf_simulation_free(struct KsfSimulation *sim);

/*
 Advance to `t_target` with uniform steps no larger than the configured `dt`.
 On failure the handle keeps the last good state.

 # Safety
 `sim` must be a valid handle.
 */
enum KsfStatus ksf_simulation_advance(struct KsfSimulation *sim, double t_target);

/*
 # Safety
 Pointers must be valid.
 */
enum KsfStatus ksf_simulation_time(const struct KsfSimulation *sim, double *out_t);

/*
 Copy the current `u`, `v`, `v_x`; any output may be NULL. `len` must equal the node count.

 # Safety
 Non-NULL outputs must point to `len` doubles.
 */
enum KsfStatus ksf_simulation_copy(const struct KsfSimulation *sim,
                                   double *out_u,
                                   double *out_v,
                                   double *out_v_x,
                                   size_t len);

/*
 Construct the traveling wave with decay rate `kappa` on `[-half_length, half_length]`
 with spacing close to `h`, using default tolerances.

 # Safety
 `model` and `out_wave` must be valid.
 */
enum KsfStatus ksf_wave_new(const struct KsfModel *model,
                            double kappa,
                            double half_length,
                            double h,
                            struct KsfWave **out_wave);

/*
 # Safety
 `wave` must be NULL or a handle from [`ksf_wave_new`] not yet freed.
 */
void ksf_wave_free(struct KsfWave *wave);

/*
 # Safety
 Pointers must be valid.
 */
enum KsfStatus ksf_wave_len(const struct KsfWave *wave, size_t *out_len);

/*
 Copy nodes and the profile; any output may be NULL. `len` must equal [`ksf_wave_len`].

 # Safety
 Non-NULL outputs must point to `len` doubles.
 */
enum KsfStatus ksf_wave_copy(const struct KsfWave *wave,
                             double *out_x,
                             double *out_u,
                             double *out_v,
                             double *out_v_x,
                             size_t len);

/*
 # Safety
 Pointers must be valid.
 */
enum KsfStatus ksf_wave_diagnostics(const struct KsfWave *wave,
                                    struct KsfWaveDiagnostics *out_diag);

/*
 Parse and run a scenario from configuration text. `kind` (e.g. `"speed"`) overrides
 the file's kind when not NULL. Outputs are written to `out_dir` when not NULL.

 # Safety
 `config_text` must be a NUL-terminated string; `kind` and `out_dir` NULL or NUL-terminated.
 */
enum KsfStatus ksf_scenario_run(const char *config_text,
                                const char *kind,
                                const char *out_dir,
                                bool refine,
                                struct KsfReport **out_report);

/*
 # Safety
 `report` must be NULL or a handle from [`ksf_scenario_run`] not yet freed.
 */
void ksf_report_free(struct KsfReport *report);

/*
 # Safety
 Pointers must be valid.
 */
enum KsfStatus ksf_report_passed(const struct KsfReport *report, bool *out_flag);

/*
 Rendered report text owned by the handle, or NULL for a NULL handle.

 # Safety
 `report` must be NULL or valid.
 */
const char *ksf_report_text(const struct KsfReport *report);

/*
 Value of the measurement `name`; `KSF_STATUS_INVALID_ARGUMENT` if absent.

 # Safety
 Pointers must be valid and `name` NUL-terminated.
 */
enum KsfStatus ksf_report_measurement(const struct KsfReport *report,
                                      const char *name,
                                      double *out_value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KSFRONT_H */
