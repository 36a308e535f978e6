#ifndef IMEXLAB_H
#define IMEXLAB_H

#include <stdbool.h>
#include <stddef.h>

typedef enum ImexStatus {
  IMEX_STATUS_OK = 0,
  IMEX_STATUS_NULL_POINTER = 1,
  IMEX_STATUS_INVALID_UTF8 = 2,
  IMEX_STATUS_UNKNOWN_SCHEME = 3,
  IMEX_STATUS_INVALID_ARGUMENT = 4,
  IMEX_STATUS_PARSE = 5,
  IMEX_STATUS_NUMERICAL = 6,
  IMEX_STATUS_PANIC = 7,
} ImexStatus;

typedef enum ImexStencil {
  IMEX_STENCIL_THREE_POINT = 0,
  IMEX_STENCIL_FOURTH_ORDER = 1,
} ImexStencil;

/**
 * Opaque additive tableau. Plain methods are stored paired with themselves.
 */
typedef struct ImexTableau ImexTableau;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into the library from this thread.
 */
const char *imex_last_error(void);

/**
 * Create a built-in tableau. Pass NaN for `gamma` to use the default;
 * only `imex_ssp2_222` accepts another value.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ImexStatus imex_tableau_builtin(const char *name, double gamma, struct ImexTableau **out);

/**
 * Parse a tableau in the text format written by [`imex_tableau_to_string`].
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ImexStatus imex_tableau_parse(const char *text, struct ImexTableau **out);

/**
 * Release a tableau. NULL is ignored.
 *
 * # Safety
 * `t` must come from this library and not be used afterwards.
 */
void imex_tableau_free(struct ImexTableau *t);

/**
 * Number of stages, 0 for NULL.
 *
 * # Safety
 * `t` must be NULL or a live handle.
 */
size_t imex_tableau_stages(const struct ImexTableau *t);

/**
 * Text form of the tableau; release with [`imex_string_free`].
 *
 * # Safety
 * `t` must be a live handle and `out` a valid pointer.
 */
enum ImexStatus imex_tableau_to_string(const struct ImexTableau *t, char **out);

/**
 * # Safety
 * `s` must be NULL or come from [`imex_tableau_to_string`].
 */
void imex_string_free(char *s);

/**
 * `R(z)` on the split test equation: `Re z` feeds the implicit part,
 * `Im z` the explicit one. A pole gives an infinite modulus.
 *
 * # Safety
 * `t` must be a live handle; `out_re`, `out_im` valid pointers.
 */
enum ImexStatus imex_stability_value(const struct ImexTableau *t,
                                     double re,
                                     double im,
                                     double *out_re,
                                     double *out_im);

/**
 * Left end of the real stability interval; `*unbounded` is set when |R| < 1
 * out to -1e6, in which case `*out` is -infinity.
 *
 * # Safety
 * `t` must be a live handle; `out`, `unbounded` valid pointers.
 */
enum ImexStatus imex_z_left(const struct ImexTableau *t, double *out, bool *unbounded);

/**
 * `g(θ, μ)` of the implicit part with the given stencil.
 *
 * # Safety
 * `t` must be a live handle and `out` a valid pointer.
 */
enum ImexStatus imex_amplification(const struct ImexTableau *t,
                                   enum ImexStencil stencil,
                                   double theta,
                                   double mu,
                                   double *out);

/**
 * First zero and first unit-modulus crossing of `g(π, ·)` of the implicit
 * part; NaN where none exists up to μ = 1e3.
 *
 * # Safety
 * `t` must be a live handle; both outputs valid pointers.
 */
enum ImexStatus imex_dissipativity_landmarks(const struct ImexTableau *t,
                                             enum ImexStencil stencil,
                                             double *first_zero,
                                             double *unit_modulus);

/**
 * Absolute monotonicity of the pair at `(r, r̃)`.
 *
 * # Safety
 * `t` must be a live handle and `out` a valid pointer.
 */
enum ImexStatus imex_am_at_point(const struct ImexTableau *t, double r, double rtilde, bool *out);

/**
 * `R(Ã)` of the `imex_ssp2_222` family.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ImexStatus imex_radius_implicit_gamma(double gamma, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IMEXLAB_H */
