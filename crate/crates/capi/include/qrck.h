#ifndef QRCK_H
#define QRCK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes mirroring the library's error classes.
 */
typedef enum QrckStatus {
  /**
   * Success.
   */
  QrckStatus_Ok = 0,
  /**
   * A NULL pointer or invalid argument was passed.
   */
  QrckStatus_NullArgument = 1,
  /**
   * Configuration or input text failed to parse/validate.
   */
  QrckStatus_InvalidConfig = 2,
  /**
   * An I/O operation failed.
   */
  QrckStatus_IoError = 3,
  /**
   * A data file had the wrong format.
   */
  QrckStatus_DataFormat = 4,
  /**
   * A numerical routine failed (non-Hermitian input, singular solve, ...).
   */
  QrckStatus_NumericalError = 5,
  /**
   * A string did not fit in the caller-provided buffer.
   */
  QrckStatus_BufferTooSmall = 6,
} QrckStatus;

/**
 * Opaque experiment-configuration handle.
 */
typedef struct QrckConfig QrckConfig;

/**
 * Opaque trained-readout handle.
 */
typedef struct QrckReadout QrckReadout;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy of the thread-local message describing the most recent error.
 * Returns the number of bytes the full message needs (including the
 * terminating NUL); writes at most `len` bytes.
 */
uintptr_t qrck_last_error(char *buf, uintptr_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qrck_version(void);

/**
 * Parse an experiment configuration from NUL-terminated text.
 *
 * # Safety
 * `text` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum QrckStatus qrck_config_parse(const char *text, struct QrckConfig **out);

/**
 * Load an experiment configuration from a file path.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum QrckStatus qrck_config_load(const char *path, struct QrckConfig **out);

/**
 * Release a configuration handle (NULL is a no-op).
 *
 * # Safety
 * `config` must come from `qrck_config_parse`/`qrck_config_load` and must
 * not be used afterwards.
 */
void qrck_config_free(struct QrckConfig *config);

/**
 * Write the fully resolved configuration (defaults included) into `buf`.
 *
 * # Safety
 * `config` must be a live handle; `buf` must point to `len` writable bytes.
 */
enum QrckStatus qrck_config_echo(const struct QrckConfig *config, char *buf, uintptr_t len);

/**
 * Override the configured output directory.
 *
 * # Safety
 * `config` must be a live handle; `dir` a valid NUL-terminated string.
 */
enum QrckStatus qrck_config_set_output_dir(struct QrckConfig *config, const char *dir);

/**
 * Add an offset to the configured base seed.
 *
 * # Safety
 * `config` must be a live handle.
 */
enum QrckStatus qrck_config_seed_offset(struct QrckConfig *config, uint64_t offset);

/**
 * Run the configured experiment and write the result table and manifest to
 * the configured output directory.
 *
 * # Safety
 * `config` must be a live handle.
 */
enum QrckStatus qrck_run(const struct QrckConfig *config);

/**
 * Generate a Lorenz-63 series into a caller-provided buffer of
 * `n_samples * 3` doubles (row-major x, y, z per sample).
 *
 * # Safety
 * `x0` must point to 3 doubles and `out` to `n_samples * 3` doubles.
 */
enum QrckStatus qrck_gen_lorenz(const double *x0,
                                uintptr_t n_samples,
                                double dt_sample,
                                uint64_t seed,
                                double *out);

/**
 * Load a trained readout from a file.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum QrckStatus qrck_readout_load(const char *path, struct QrckReadout **out);

/**
 * Number of qubits the readout was trained on.
 *
 * # Safety
 * `readout` must be a live handle; `out` a valid pointer.
 */
enum QrckStatus qrck_readout_n_qubits(const struct QrckReadout *readout, uintptr_t *out);

/**
 * Release a readout handle (NULL is a no-op).
 *
 * # Safety
 * `readout` must come from `qrck_readout_load` and must not be used
 * afterwards.
 */
void qrck_readout_free(struct QrckReadout *readout);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* QRCK_H */
