#ifndef COORDETECT_H
#define COORDETECT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum CdStatus {
  CD_STATUS_OK = 0,
  CD_STATUS_NULL_POINTER = 1,
  CD_STATUS_INVALID_ARGUMENT = 2,
  CD_STATUS_DIMENSION = 3,
  CD_STATUS_UNSUPPORTED = 4,
  CD_STATUS_DOMAIN = 5,
  CD_STATUS_NUMERICAL = 6,
  CD_STATUS_PARSE = 7,
  CD_STATUS_IO = 8,
  CD_STATUS_PANIC = 9,
} CdStatus;

// Opaque probe/response dataset.
typedef struct CdDataset CdDataset;

// Opaque detector report.
typedef struct CdReport CdReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. Valid until the
// next `cd_*` call on the same thread.
const char *cd_last_error(void);

// Reads a dataset CSV file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum CdStatus cd_dataset_read(const char *path, struct CdDataset **out);

// Writes a dataset CSV file.
//
// # Safety
// `ds` must come from this library and `path` be NUL-terminated.
enum CdStatus cd_dataset_write(const struct CdDataset *ds, const char *path);

// Builds a dataset from row-major arrays: `probes[t*n + c]` and
// `responses[(t*m + i)*n + c]`.
//
// # Safety
// `probes` must hold `t*n` values, `responses` `t*m*n` values.
enum CdStatus cd_dataset_new(size_t t,
                             size_t m,
                             size_t n,
                             const double *probes,
                             const double *responses,
                             int noisy,
                             struct CdDataset **out);

// Coordinated data from the reference generator (`regime = 0`) or
// non-coordinated data (`regime = 1`) with `T = t`.
//
// # Safety
// `out` must be a valid pointer.
enum CdStatus cd_generate(int regime, size_t t, uint64_t seed, struct CdDataset **out);

// Returns a noisy copy with i.i.d. Gaussian noise of standard deviation `sigma`.
//
// # Safety
// `ds` must come from this library and `out` be a valid pointer.
enum CdStatus cd_dataset_add_noise(const struct CdDataset *ds,
                                   double sigma,
                                   uint64_t seed,
                                   struct CdDataset **out);

// Dimensions `T`, `M`, `n`. Any output pointer may be null.
//
// # Safety
// `ds` must come from this library.
enum CdStatus cd_dataset_shape(const struct CdDataset *ds, size_t *t, size_t *m, size_t *n);

// # Safety
// `ds` must come from this library (or be null) and not be used afterwards.
void cd_dataset_free(struct CdDataset *ds);

// Sets `*consistent` to 1 when every agent passes the Afriat test.
//
// # Safety
// `ds` must come from this library and `consistent` be valid.
enum CdStatus cd_test_rationalizable(const struct CdDataset *ds, int *consistent);

// Worst-agent minimal perturbation `Φ*`.
//
// # Safety
// `ds` must come from this library and `value` be valid.
enum CdStatus cd_phi_star(const struct CdDataset *ds, double *value);

// Runs the detector with `l` Monte-Carlo samples of the noise bound under
// Gaussian noise of standard deviation `sigma_assumed`.
//
// # Safety
// `ds` must come from this library and `out` be a valid pointer.
enum CdStatus cd_detect(const struct CdDataset *ds,
                        double sigma_assumed,
                        double gamma,
                        size_t l,
                        uint64_t seed,
                        struct CdReport **out);

// Test statistic `1 − F̂(Φ*)`, or NaN for a null handle.
//
// # Safety
// `r` must come from this library or be null.
double cd_report_statistic(const struct CdReport *r);

// # Safety
// `r` must come from this library or be null.
double cd_report_phi_star(const struct CdReport *r);

// 0 for H0 (coordinated), 1 for H1, -1 for a null handle.
//
// # Safety
// `r` must come from this library or be null.
int cd_report_hypothesis(const struct CdReport *r);

// Report as JSON. Release the string with [`cd_string_free`].
//
// # Safety
// `r` must come from this library and `out` be a valid pointer.
enum CdStatus cd_report_json(const struct CdReport *r, char **out);

// # Safety
// `s` must come from [`cd_report_json`] (or be null).
void cd_string_free(char *s);

// # Safety
// `r` must come from this library (or be null) and not be used afterwards.
void cd_report_free(struct CdReport *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COORDETECT_H */
