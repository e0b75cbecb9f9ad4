#ifndef QMC_TSFP_H
#define QMC_TSFP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Kernel sign convention, see `KernelSign` in the Rust crate.
typedef enum QtKernelSign {
  QT_KERNEL_SIGN_STANDARD = 0,
  QT_KERNEL_SIGN_LITERAL = 1,
} QtKernelSign;

// Result of an FFI call.
typedef enum QtStatus {
  QT_STATUS_OK = 0,
  QT_STATUS_OTHER = 1,
  QT_STATUS_CONFIG = 2,
  QT_STATUS_BUDGET = 3,
  QT_STATUS_NUMERICAL = 4,
  QT_STATUS_INVALID_ARGUMENT = 5,
  QT_STATUS_NULL_POINTER = 6,
  QT_STATUS_PANIC = 7,
  QT_STATUS_IO = 8,
} QtStatus;

// Rank-1 lattice generating vector.
typedef struct QtLatticeRule QtLatticeRule;

// Random potential sampled on a fixed grid.
typedef struct QtPotential QtPotential;

// Strang split-step integrator on a fixed grid and time step.
typedef struct QtSolver QtSolver;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null after a success.
// The pointer stays valid until the next FFI call on the same thread.
const char *qt_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *qt_version(void);

// `B_2(x) = x^2 - x + 1/6` for `x` in `[0, 1)`.
//
// # Safety
// `out` must be valid for one write.
enum QtStatus qt_bernoulli_kernel(double x, double *out);

// Shift-averaged worst-case error of the `m`-dimensional vector `z` for `n`
// points with weights `gamma[0..m]`.
//
// # Safety
// `z` and `gamma` must hold `m` values; `out` must be valid for one write.
enum QtStatus qt_worst_case_error(const uint64_t *z,
                                  const double *gamma,
                                  size_t m,
                                  uint64_t n,
                                  enum QtKernelSign sign,
                                  double *out);

// Component-by-component construction for `n` points in `m` dimensions with
// weights `gamma[0..m]`. On success `*out` owns a new rule.
//
// # Safety
// `gamma` must hold `m` values; `out` must be valid for one write.
enum QtStatus qt_cbc_construct(size_t m,
                               uint64_t n,
                               const double *gamma,
                               enum QtKernelSign sign,
                               struct QtLatticeRule **out);

// Rule from an explicit generating vector `z[0..m]` and point count `n`.
//
// # Safety
// `z` must hold `m` values; `out` must be valid for one write.
enum QtStatus qt_lattice_rule_new(const uint64_t *z,
                                  size_t m,
                                  uint64_t n,
                                  struct QtLatticeRule **out);

// Dimension `m` and point count `n` of a rule.
//
// # Safety
// `rule` must come from this library; `m` and `n` must be valid for writes.
enum QtStatus qt_lattice_rule_shape(const struct QtLatticeRule *rule, size_t *m, uint64_t *n);

// Copies the generating vector into `z[0..len]`; `len` must equal the
// dimension.
//
// # Safety
// `rule` must come from this library; `z` must hold `len` values.
enum QtStatus qt_lattice_rule_vector(const struct QtLatticeRule *rule, uint64_t *z, size_t len);

// # Safety
// `rule` must come from this library and not be used afterwards. Null is
// ignored.
void qt_lattice_rule_free(struct QtLatticeRule *rule);

// Solver on `nodes` points of `[-half_width, half_width)` stepping `tau` up
// to `final_time`, which must be a multiple of `tau`.
//
// # Safety
// `out` must be valid for one write.
enum QtStatus qt_solver_new(double half_width,
                            size_t nodes,
                            double tau,
                            double final_time,
                            double alpha,
                            struct QtSolver **out);

// Integrates `psi` (real parts `re`, imaginary parts `im`, both of length
// `nodes`) in place to the final time under the real potential `v`.
//
// # Safety
// `solver` must come from this library; `re`, `im` and `v` must hold
// `nodes` values.
enum QtStatus qt_solver_run(struct QtSolver *solver,
                            double *re,
                            double *im,
                            const double *v,
                            size_t nodes);

// # Safety
// `solver` must come from this library and not be used afterwards. Null is
// ignored.
void qt_solver_free(struct QtSolver *solver);

// Cosine-family potential
// `offset + sigma * sum_{j=1}^m j^(-decay) xi_j cos(j x)` sampled on
// `nodes` points of `[-half_width, half_width)`.
//
// # Safety
// `out` must be valid for one write.
enum QtStatus qt_potential_cosine_new(double offset,
                                      double sigma,
                                      double decay,
                                      size_t m,
                                      double half_width,
                                      size_t nodes,
                                      struct QtPotential **out);

// Writes `V(xi, x_k)` for `xi[0..m]` in `[-scale/2, scale/2]^m` to
// `values[0..nodes]`.
//
// # Safety
// `potential` must come from this library; `xi` must hold `m` values and
// `values` `nodes` values.
enum QtStatus qt_potential_evaluate(const struct QtPotential *potential,
                                    const double *xi,
                                    size_t m,
                                    double scale,
                                    double *values,
                                    size_t nodes);

// # Safety
// `potential` must come from this library and not be used afterwards. Null
// is ignored.
void qt_potential_free(struct QtPotential *potential);

// Runs experiment `kind` (for example `"converge-qmc"`) from the JSON config
// at `config_path` and writes its outputs to `out_path`, or to the config's
// `output` or the default name when `out_path` is null. `workers = 0` uses
// the default pool size.
//
// # Safety
// `kind` and `config_path` must be NUL-terminated strings; `out_path` may be
// null.
enum QtStatus qt_run_experiment(const char *kind,
                                const char *config_path,
                                const char *out_path,
                                size_t workers,
                                bool allow_expensive);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QMC_TSFP_H */
