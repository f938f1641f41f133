#ifndef METASTABLE_H
#define METASTABLE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MsStatus {
  MS_STATUS_OK = 0,
  MS_STATUS_NULL_POINTER = 1,
  MS_STATUS_INVALID_ARGUMENT = 2,
  MS_STATUS_CONFIG = 3,
  MS_STATUS_NUMERICAL = 4,
  MS_STATUS_ABORTED = 5,
  MS_STATUS_IO = 6,
  MS_STATUS_PANIC = 7,
} MsStatus;

// Opaque reduced-dynamics context: cached slow mode over the default interval.
typedef struct MsContext MsContext;

// Opaque model handle.
typedef struct MsModel MsModel;

// Opaque full-model trajectory.
typedef struct MsTrajectory MsTrajectory;

// One trajectory row; NaN marks unavailable columns.
typedef struct MsSample {
  double t;
  double xi_tracked;
  double xi_projected;
  double v_l2;
  double v_h1;
  double v1_abs;
  double dt;
} MsSample;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` (NUL-terminated,
// truncated to `len`) and returns the full message length without the NUL.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
size_t ms_last_error_message(char *buf, size_t len);

// Viscous Burgers model with boundary values `±u_star` on `[−ell, ell]`.
//
// # Safety
// `out` must be valid for one write.
enum MsStatus ms_burgers_new(double epsilon, double ell, double u_star, struct MsModel **out);

// Jin-Xin relaxation model with quadratic flux and speed `a`.
//
// # Safety
// `out` must be valid for one write.
enum MsStatus ms_jinxin_new(double epsilon,
                            double a,
                            double ell,
                            double u_star,
                            struct MsModel **out);

// # Safety
// `model` must be null or a handle from a `ms_*_new` call, freed once.
void ms_model_free(struct MsModel *model);

// Leading eigenvalue (real part) of the model linearized at the profile with layer at `xi`.
//
// # Safety
// `model` must be a live handle and `out` valid for one write.
enum MsStatus ms_lambda1(const struct MsModel *model, double xi, size_t n_interior, double *out);

// Asymptotic drift amplitude `Ω(ξ)` of the layer.
//
// # Safety
// `model` must be a live handle and `out` valid for one write.
enum MsStatus ms_omega(const struct MsModel *model, double xi, double *out);

// # Safety
// `model` must be a live handle and `out` valid for one write.
enum MsStatus ms_context_new(const struct MsModel *model,
                             size_t n_interior,
                             struct MsContext **out);

// # Safety
// `ctx` must be null or a handle from `ms_context_new`, freed once.
void ms_context_free(struct MsContext *ctx);

// Reduced layer velocity `θ(ξ)`.
//
// # Safety
// `ctx` must be a live handle and `out` valid for one write.
enum MsStatus ms_theta(const struct MsContext *ctx, double xi, double *out);

// Reduced-dynamics travel time from `xi0` to `target`.
//
// # Safety
// `ctx` must be a live handle and `out` valid for one write.
enum MsStatus ms_time_to_reach(const struct MsContext *ctx, double xi0, double target, double *out);

// Convergence rate `β = −θ′(ξ̄)` at the equilibrium `xi_bar`.
//
// # Safety
// `ctx` must be a live handle and `out` valid for one write.
enum MsStatus ms_beta(const struct MsContext *ctx, double xi_bar, double *out);

// Full-model run from the default initial data with the default adaptive
// integrator. An early stop still yields a trajectory; check
// `ms_trajectory_aborted`.
//
// # Safety
// `model` must be a live handle, `times` valid for `n_times` reads and
// `out` valid for one write.
enum MsStatus ms_simulate(const struct MsModel *model,
                          size_t n_interior,
                          const double *times,
                          size_t n_times,
                          struct MsTrajectory **out);

// # Safety
// `traj` must be null or a handle from `ms_simulate`, freed once.
void ms_trajectory_free(struct MsTrajectory *traj);

// # Safety
// `traj` must be a live handle and `out` valid for one write.
enum MsStatus ms_trajectory_len(const struct MsTrajectory *traj, size_t *out);

// # Safety
// `traj` must be a live handle and `out` valid for one write.
enum MsStatus ms_trajectory_aborted(const struct MsTrajectory *traj, bool *out);

// # Safety
// `traj` must be a live handle and `out` valid for one write.
enum MsStatus ms_trajectory_sample(const struct MsTrajectory *traj,
                                   size_t index,
                                   struct MsSample *out);

// Runs a CLI subcommand (`simulate`, `table1`, `table2`, `spectrum`,
// `hypotheses`, `coupled`) with configuration text, writing into `out_dir`.
// Aborted runs return `MS_STATUS_ABORTED` after writing partial outputs.
//
// # Safety
// All string arguments must be null-terminated and valid.
enum MsStatus ms_run_command(const char *command,
                             const char *config_text,
                             const char *out_dir,
                             size_t jobs);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* METASTABLE_H */
