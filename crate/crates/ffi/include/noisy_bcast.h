#ifndef NOISY_BCAST_H
#define NOISY_BCAST_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NbStatus {
  NB_STATUS_OK = 0,
  NB_STATUS_NULL_POINTER = 1,
  NB_STATUS_INVALID_ARGUMENT = 2,
  NB_STATUS_INVALID_CONFIG = 3,
  NB_STATUS_LENGTH_MISMATCH = 4,
  NB_STATUS_DECODE_FAILED = 5,
  NB_STATUS_INVARIANT = 6,
  NB_STATUS_PANIC = 7,
} NbStatus;

// Classification of an input-learning run.
typedef enum NbOutcome {
  NB_OUTCOME_SUCCESS = 0,
  NB_OUTCOME_FAIL_WITH_KNOWLEDGE = 1,
  NB_OUTCOME_FAIL_WITHOUT_KNOWLEDGE = 2,
} NbOutcome;

// A binary code for `k`-bit messages.
typedef struct NbCode NbCode;

// A channel: `n` processors, erasure probability, repetitions, seed and round counter.
typedef struct NbSimulator NbSimulator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the next failing call.
const char *nb_last_error(void);

// # Safety
// `out` must be a valid pointer to write a handle to.
enum NbStatus nb_simulator_new(size_t n,
                               double p,
                               uint32_t gamma,
                               uint64_t seed,
                               struct NbSimulator **out);

// # Safety
// `sim` must come from [`nb_simulator_new`] and not be used afterwards. Null is ignored.
void nb_simulator_free(struct NbSimulator *sim);

// Physical rounds consumed so far (0 for a null handle).
//
// # Safety
// `sim` must be null or a live handle.
uint64_t nb_simulator_rounds_used(const struct NbSimulator *sim);

// AND of `n` bits; `out` receives `n` outputs.
//
// # Safety
// `bits` and `out` must hold `n` bytes.
enum NbStatus nb_run_and(struct NbSimulator *sim, const uint8_t *bits, size_t n, uint8_t *out);

// Equality test on `n` strings of `k` bits, row-major in `inputs`; `out` receives `n` outputs.
//
// # Safety
// `inputs` must hold `n * k` bytes and `out` `n` bytes.
enum NbStatus nb_run_equality_test(struct NbSimulator *sim,
                                   const uint8_t *inputs,
                                   size_t n,
                                   size_t k,
                                   uint8_t *out);

// Input learning. `outputs` receives `n * n` bytes (row `i` is processor `i`'s
// reconstruction), `verified` `n` flags, `outcome` the classification.
//
// # Safety
// Buffers must have the stated sizes.
enum NbStatus nb_run_learn_input(struct NbSimulator *sim,
                                 const uint8_t *bits,
                                 size_t n,
                                 uint8_t *outputs,
                                 uint8_t *verified,
                                 enum NbOutcome *outcome);

// Large-alphabet learning over the prime `q` (0 selects the smallest prime `>= n^6`).
// `outputs` receives `n * n` values, `solved` `n` uniqueness flags.
//
// # Safety
// Buffers must have the stated sizes.
enum NbStatus nb_run_large_alphabet(struct NbSimulator *sim,
                                    uint64_t q,
                                    const uint64_t *inputs,
                                    size_t n,
                                    uint64_t *outputs,
                                    uint8_t *solved);

// Hamming weight with the calibrated interval scale; `out` receives `n` weights, -1 for FAIL.
//
// # Safety
// `bits` and `out` must hold `n` elements.
enum NbStatus nb_run_hamming_weight(struct NbSimulator *sim,
                                    const uint8_t *bits,
                                    size_t n,
                                    int64_t *out);

// Least `gamma` with `p^gamma <= target`.
//
// # Safety
// `out` must be valid for writes.
enum NbStatus nb_required_gamma(double p, double target, uint32_t *out);

// Least prime `>= m`.
//
// # Safety
// `out` must be valid for writes.
enum NbStatus nb_smallest_prime_at_least(uint64_t m, uint64_t *out);

// `θ_ℓ` for `ℓ = a..=b`; `out` receives `b - a + 1` values.
//
// # Safety
// `out` must hold `b - a + 1` doubles.
enum NbStatus nb_theta_table(uint64_t a, uint64_t b, double p, double *out);

// # Safety
// `out` must be valid for writes.
enum NbStatus nb_code_new(size_t k, struct NbCode **out);

// # Safety
// `code` must come from [`nb_code_new`] and not be used afterwards. Null is ignored.
void nb_code_free(struct NbCode *code);

// Codeword length in bits (0 for a null handle).
//
// # Safety
// `code` must be null or a live handle.
size_t nb_code_len(const struct NbCode *code);

// Encode `k` message bits into `nb_code_len` codeword bits.
//
// # Safety
// `message` must hold `k` bytes and `codeword` `nb_code_len(code)` bytes.
enum NbStatus nb_code_encode(const struct NbCode *code, const uint8_t *message, uint8_t *codeword);

// Decode a received word (bytes 0, 1, or 2 for an erasure) into `k` message bits.
//
// # Safety
// `received` must hold `nb_code_len(code)` bytes and `message` `k` bytes.
enum NbStatus nb_code_decode(const struct NbCode *code, const uint8_t *received, uint8_t *message);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NOISY_BCAST_H */
