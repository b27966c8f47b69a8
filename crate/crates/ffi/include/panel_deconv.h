#ifndef PANEL_DECONV_H
#define PANEL_DECONV_H

#include <stddef.h>
#include <stdint.h>

#define PD_ESTIMATOR_KOTLARSKI 0

#define PD_ESTIMATOR_LI_VUONG 1

#define PD_ESTIMATOR_RESIDUAL 2

#define PD_ESTIMATOR_SYMMETRIC 3

#define PD_KERNEL_SINC 0

#define PD_KERNEL_GAUSSIAN 1

#define PD_TARGET_LATENT 0

#define PD_TARGET_ERROR 1

// Result code of every fallible call.
typedef enum PdStatus {
  PD_STATUS_OK = 0,
  PD_STATUS_NULL_POINTER = 1,
  PD_STATUS_INVALID_ARGUMENT = 2,
  PD_STATUS_CONFIG = 3,
  PD_STATUS_ESTIMATOR = 4,
  PD_STATUS_TOO_FEW_OBSERVATIONS = 5,
  PD_STATUS_UNSUPPORTED_RATE_CASE = 6,
  PD_STATUS_PARSE = 7,
  PD_STATUS_IO = 8,
  PD_STATUS_PANIC = 9,
} PdStatus;

// A characteristic function sampled on a symmetric frequency grid.
typedef struct PdCurve PdCurve;

// A panel of paired measurements.
typedef struct PdPanel PdPanel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call into this library on the
// same thread.
const char *pd_last_error(void);

// Library version as a static NUL-terminated string.
const char *pd_version(void);

// Copies `n` rows of paired measurements into a new panel.
//
// # Safety
// `y1` and `y2` must point to `n` readable doubles; `out` must be writable.
enum PdStatus pd_panel_new(const double *y1, const double *y2, size_t n, struct PdPanel **out);

// Simulates `n` rows from two model literals such as `"gamma(4,2)"` and
// `"bgamma(2,2,3,3)"`, on the random stream `(seed, rep)`.
//
// # Safety
// `model_x` and `model_eps` must be NUL-terminated strings; `out` must be writable.
enum PdStatus pd_panel_simulate(const char *model_x,
                                const char *model_eps,
                                size_t n,
                                uint64_t seed,
                                uint64_t rep,
                                struct PdPanel **out);

// Number of rows, or 0 for a null handle.
//
// # Safety
// `panel` must be null or a live handle.
size_t pd_panel_len(const struct PdPanel *panel);

// # Safety
// `panel` must be null or a handle not yet freed.
void pd_panel_free(struct PdPanel *panel);

// Runs an estimator on the grid `[-u_max, u_max]` with spacing `step`.
//
// # Safety
// `panel` must be a live handle; `out` must be writable.
enum PdStatus pd_estimate(const struct PdPanel *panel,
                          int32_t estimator_code,
                          double u_max,
                          double step,
                          struct PdCurve **out);

// Number of grid points, or 0 for a null handle.
//
// # Safety
// `curve` must be null or a live handle.
size_t pd_curve_len(const struct PdCurve *curve);

// Copies the grid points and the real and imaginary parts into arrays of
// length `len`, which must equal [`pd_curve_len`].
//
// # Safety
// `curve` must be a live handle; each output must hold `len` doubles.
enum PdStatus pd_curve_copy(const struct PdCurve *curve,
                            double *u,
                            double *re,
                            double *im,
                            size_t len);

// # Safety
// `curve` must be null or a handle not yet freed.
void pd_curve_free(struct PdCurve *curve);

// Kernel density estimate at the uniform points `x[0..len]`, written to `out`.
//
// # Safety
// `curve` must be a live handle; `x` and `out` must hold `len` doubles.
enum PdStatus pd_density(const struct PdCurve *curve,
                         int32_t kernel_code,
                         double h,
                         const double *x,
                         size_t len,
                         double *out);

// Cross-validated bandwidth `h = 1/m`.
//
// # Safety
// `panel` must be a live handle; `m` and `h` must be writable.
enum PdStatus pd_cv_select(const struct PdPanel *panel,
                           int32_t kernel_code,
                           double u_max,
                           double step,
                           size_t *m,
                           double *h);

// Convergence rate `n^{-poly} (log n)^{-log}` of the density estimator for
// `target`. `p = 0` stands for infinitely many moments.
//
// # Safety
// `poly` and `log` must be writable.
enum PdStatus pd_predicted_rate(int32_t target,
                                double beta_x,
                                double c_x,
                                double rho_x,
                                double beta_eps,
                                double c_eps,
                                double rho_eps,
                                uint32_t p,
                                double *poly,
                                double *log);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PANEL_DECONV_H */
