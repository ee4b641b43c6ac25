#ifndef COOLCHAIN_H
#define COOLCHAIN_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum CcStatus {
  CC_STATUS_OK = 0,
  CC_STATUS_NULL_POINTER = 1,
  CC_STATUS_INVALID_PARAMETER = 2,
  CC_STATUS_NO_CONVERGENCE = 3,
  CC_STATUS_NOT_EQUILIBRIUM = 4,
  CC_STATUS_NOT_CRYSTALLIZED = 5,
  CC_STATUS_DIMENSION_MISMATCH = 6,
  CC_STATUS_BUDGET_EXCEEDED = 7,
  CC_STATUS_TRUNCATION_INSUFFICIENT = 8,
  CC_STATUS_EMPTY_SHELL = 9,
  CC_STATUS_NO_AXIAL_COOLING = 10,
  CC_STATUS_NO_STEADY_STATE = 11,
  CC_STATUS_HEATING_REGIME = 12,
  CC_STATUS_UNNORMALIZED_PATTERN = 13,
  CC_STATUS_CFL_VIOLATION = 14,
  CC_STATUS_NEGATIVE_DENSITY = 15,
  CC_STATUS_IO = 16,
  CC_STATUS_BUFFER_TOO_SMALL = 17,
  CC_STATUS_PANIC = 18,
} CcStatus;

/**
 * Equilibrium positions and normal modes of a chain.
 */
typedef struct CcChain CcChain;

/**
 * Laser, recoil and emission parameters.
 */
typedef struct CcCoolingParams CcCoolingParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread, NUL-terminated and
 * truncated to `len` bytes. Returns the full message length excluding NUL.
 */
size_t cc_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cc_version(void);

/**
 * Solves the chain of `n_ions` ions with recoil frequency `recoil`.
 */
enum CcStatus cc_chain_new(size_t n_ions, double recoil, struct CcChain **out);

void cc_chain_free(struct CcChain *chain);

enum CcStatus cc_chain_n_modes(const struct CcChain *chain, size_t *out);

/**
 * Mode frequencies in ascending order; `len` must be at least the mode count.
 */
enum CcStatus cc_chain_frequencies(const struct CcChain *chain, double *out, size_t len);

/**
 * Equilibrium positions in units of the Coulomb length.
 */
enum CcStatus cc_chain_positions(const struct CcChain *chain, double *out, size_t len);

/**
 * Lamb-Dicke parameters, row-major `[ion][mode]`.
 */
enum CcStatus cc_chain_lamb_dicke(const struct CcChain *chain,
                                  double cos_theta0,
                                  double *out,
                                  size_t len);

/**
 * Parameters at the optimal detuning `-gamma/2`, axial laser, isotropic
 * emission and all ions driven.
 */
enum CcStatus cc_params_new(size_t n_ions,
                            double gamma,
                            double rabi,
                            double recoil,
                            struct CcCoolingParams **out);

void cc_params_free(struct CcCoolingParams *params);

enum CcStatus cc_params_set_detuning(struct CcCoolingParams *params, double detuning);

enum CcStatus cc_params_set_cos_theta0(struct CcCoolingParams *params, double cos_theta0);

enum CcStatus cc_params_set_m_driven(struct CcCoolingParams *params, size_t m_driven);

/**
 * `name` is one of `isotropic`, `dipole_linear`, `dipole_circular`.
 */
enum CcStatus cc_params_set_pattern(struct CcCoolingParams *params, const char *name);

/**
 * Tabulated pattern from `len` pairs `(cos[i], density[i])`.
 */
enum CcStatus cc_params_set_pattern_table(struct CcCoolingParams *params,
                                          const double *cos,
                                          const double *density,
                                          size_t len);

/**
 * Total steady-state energy of the Fokker-Planck limit.
 */
enum CcStatus cc_steady_energy(const struct CcCoolingParams *params, double *out);

/**
 * Exponential relaxation rate of the mean energy.
 */
enum CcStatus cc_cooling_rate(const struct CcCoolingParams *params, double *out);

/**
 * Lamb-Dicke steady occupations per mode.
 */
enum CcStatus cc_ld_steady(const struct CcChain *chain,
                           const struct CcCoolingParams *params,
                           double *out,
                           size_t len);

/**
 * `|<l| exp(i eta (a + a†)) |n>|^2`.
 */
enum CcStatus cc_fc_probability(uint32_t n, uint32_t l, double eta, double *out);

/**
 * Normalization, mean shift and variance of the energy-transfer kernel.
 */
enum CcStatus cc_kernel_moments(double energy,
                                double recoil,
                                size_t n_ions,
                                double *norm,
                                double *mean_shift,
                                double *variance);

/**
 * Integrates the ergodic rate equation from a thermal start of mean energy
 * `e0` on shells of width `de` up to `emax` and reports the mean energy at
 * `t_final`. A non-positive `dt` selects the stability bound.
 */
enum CcStatus cc_evolve_ergodic(const struct CcChain *chain,
                                const struct CcCoolingParams *params,
                                double de,
                                double emax,
                                double e0,
                                double t_final,
                                double dt,
                                double *mean_energy);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COOLCHAIN_H */
