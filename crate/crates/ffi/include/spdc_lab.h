#ifndef SPDC_LAB_H
#define SPDC_LAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SpdcStatus {
  SPDC_STATUS_OK = 0,
  SPDC_STATUS_INVALID_ARGUMENT = 1,
  SPDC_STATUS_NULL_POINTER = 2,
  SPDC_STATUS_REGIME = 3,
  SPDC_STATUS_GRID = 4,
  SPDC_STATUS_UNSORTED = 5,
  SPDC_STATUS_EMPTY_DURATION = 6,
  SPDC_STATUS_ZERO_RATE = 7,
  SPDC_STATUS_FORMAT = 8,
  SPDC_STATUS_IO = 9,
  SPDC_STATUS_CONFIG = 10,
  SPDC_STATUS_PANIC = 11,
} SpdcStatus;

typedef enum SpdcShape {
  SPDC_SHAPE_BOX = 0,
  SPDC_SHAPE_TRIANGLE = 1,
} SpdcShape;

typedef enum SpdcChannel {
  SPDC_CHANNEL_IDLER = 0,
  SPDC_CHANNEL_SIGNAL1 = 1,
  SPDC_CHANNEL_SIGNAL2 = 2,
} SpdcChannel;

typedef enum SpdcModel {
  SPDC_MODEL_THERMAL = 0,
  SPDC_MODEL_POISSON = 1,
} SpdcModel;

typedef enum SpdcWindowMode {
  SPDC_WINDOW_MODE_CENTERED = 0,
  SPDC_WINDOW_MODE_ONE_SIDED = 1,
} SpdcWindowMode;

typedef struct SpdcEventFile SpdcEventFile;

typedef struct SpdcHistogram SpdcHistogram;

typedef struct SpdcKernel SpdcKernel;

typedef struct SpdcSource SpdcSource;

typedef struct SpdcStream SpdcStream;

// Plateau levels predicted for a source seen through a response kernel.
typedef struct SpdcPlateaus {
  double x;
  double g2si_plateau;
  double nssi_short;
  double nssi_long;
  double gbar2c_short;
} SpdcPlateaus;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` as a
// NUL-terminated string, truncating to `len - 1` bytes. Returns the full
// message length without the terminator, so a caller can size a retry.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t spdc_last_error_message(char *buf, size_t len);

// # Safety
// `out_source` must be writable.
enum SpdcStatus spdc_source_new(double pair_rate_hz,
                                double coherence_time_s,
                                enum SpdcShape shape,
                                struct SpdcSource **out_source);

// # Safety
// `source` must be null or a handle from [`spdc_source_new`] not yet freed.
void spdc_source_free(struct SpdcSource *source);

// Mean pairs per coherence cell, `R Δt`.
//
// # Safety
// `source` must be a live handle; returns NaN for null.
double spdc_source_mean_pairs(const struct SpdcSource *source);

// Signal-idler cross-correlation at delay `tau_s`; NaN for a null handle.
//
// # Safety
// `source` must be null or a live handle.
double spdc_g2_si(const struct SpdcSource *source, double tau_s);

// Unconditioned signal-signal autocorrelation; NaN for a null handle.
//
// # Safety
// `source` must be null or a live handle.
double spdc_g2_ss(const struct SpdcSource *source, double tau_s);

// Triple-coincidence probability density at detection times `t1`, `t2`
// (signals) and `ti` (idler); NaN for a null handle.
//
// # Safety
// `source` must be null or a live handle.
double spdc_p_ssi(const struct SpdcSource *source, double t1_s, double t2_s, double ti_s);

// Conditioned signal-signal coherence; NaN for a null handle.
//
// # Safety
// `source` must be null or a live handle.
double spdc_g2_c(const struct SpdcSource *source, double t1_s, double t2_s, double ti_s);

// Writes the heralding ratio and the unconditioned signal-signal ratio at
// delay `tau_s`, both formed from limits of the triple density alone.
//
// # Safety
// `source` must be a live handle; both out pointers must be writable.
enum SpdcStatus spdc_limit_ratios(const struct SpdcSource *source,
                                  double tau_s,
                                  double *out_heralding,
                                  double *out_unconditioned);

// Response kernel for a coincidence half-width, a jitter full width and a
// sampling step.
//
// # Safety
// `out_kernel` must be writable.
enum SpdcStatus spdc_kernel_new(double coincidence_halfwidth_s,
                                double jitter_s,
                                double step_s,
                                struct SpdcKernel **out_kernel);

// # Safety
// `kernel` must be null or a handle from [`spdc_kernel_new`] not yet freed.
void spdc_kernel_free(struct SpdcKernel *kernel);

// # Safety
// `source` and `kernel` must be live handles; `out_plateaus` writable.
enum SpdcStatus spdc_predict_plateaus(const struct SpdcSource *source,
                                      const struct SpdcKernel *kernel,
                                      struct SpdcPlateaus *out_plateaus);

// Copies `len` sorted timestamps into a new stream observed over
// `[0, duration_ticks)`. Unsorted or out-of-range input is rejected.
//
// # Safety
// `timestamps` must point to `len` readable values (may be null when `len`
// is zero); `out_stream` must be writable.
enum SpdcStatus spdc_stream_new(enum SpdcChannel ch,
                                const uint64_t *timestamps,
                                size_t len,
                                uint64_t duration_ticks,
                                struct SpdcStream **out_stream);

// # Safety
// `stream` must be null or a live handle.
size_t spdc_stream_len(const struct SpdcStream *stream);

// # Safety
// `stream` must be null or a live handle.
uint64_t spdc_stream_duration_ticks(const struct SpdcStream *stream);

// Borrowed view of the timestamps, valid until the stream is freed. Null for
// a null handle or an empty stream.
//
// # Safety
// `stream` must be null or a live handle.
const uint64_t *spdc_stream_timestamps(const struct SpdcStream *stream);

// # Safety
// `stream` must be null or a handle not yet freed.
void spdc_stream_free(struct SpdcStream *stream);

// Simulates a run of `duration_s` seconds and writes the idler and the two
// signal streams. Identical arguments give identical streams.
//
// # Safety
// `source` must be a live handle; the three out pointers must be writable.
enum SpdcStatus spdc_simulate(const struct SpdcSource *source,
                              enum SpdcModel model,
                              double eta_idler,
                              double eta_signal,
                              double splitter,
                              double jitter_s,
                              double duration_s,
                              uint64_t seed,
                              struct SpdcStream **out_idler,
                              struct SpdcStream **out_signal1,
                              struct SpdcStream **out_signal2);

// Counts `t_a - t_b` coincidences at delays `start + k * step` ticks,
// `k < len`, with window half-width `tauc_s`.
//
// # Safety
// `a` and `b` must be live handles; `out_hist` writable.
enum SpdcStatus spdc_pair_histogram(const struct SpdcStream *a,
                                    const struct SpdcStream *b,
                                    int64_t delay_start_ticks,
                                    int64_t delay_step_ticks,
                                    size_t len,
                                    double tauc_s,
                                    enum SpdcWindowMode window,
                                    struct SpdcHistogram **out_hist);

// Counts idler-anchored triples with signal 1 within `tauc_s` of zero delay
// and signal 2 within `tauc_s` of each grid delay.
//
// # Safety
// The three streams must be live handles; `out_hist` writable.
enum SpdcStatus spdc_triple_histogram(const struct SpdcStream *idler,
                                      const struct SpdcStream *signal1,
                                      const struct SpdcStream *signal2,
                                      int64_t delay_start_ticks,
                                      int64_t delay_step_ticks,
                                      size_t len,
                                      double tauc_s,
                                      enum SpdcWindowMode window,
                                      struct SpdcHistogram **out_hist);

// # Safety
// `hist` must be null or a live handle.
size_t spdc_histogram_len(const struct SpdcHistogram *hist);

// Borrowed view of the counts, valid until the histogram is freed.
//
// # Safety
// `hist` must be null or a live handle.
const uint64_t *spdc_histogram_counts(const struct SpdcHistogram *hist);

// # Safety
// `hist` must be null or a handle not yet freed.
void spdc_histogram_free(struct SpdcHistogram *hist);

// Reads every channel of an `.evt` file.
//
// # Safety
// `path` must be a NUL-terminated string; `out_file` writable.
enum SpdcStatus spdc_events_read(const char *path, struct SpdcEventFile **out_file);

// # Safety
// `file` must be null or a live handle.
size_t spdc_events_count(const struct SpdcEventFile *file);

// Copies channel `index` of the file into a new stream handle.
//
// # Safety
// `file` must be a live handle; `out_stream` writable.
enum SpdcStatus spdc_events_get(const struct SpdcEventFile *file,
                                size_t index,
                                struct SpdcStream **out_stream);

// # Safety
// `file` must be null or a handle not yet freed.
void spdc_events_free(struct SpdcEventFile *file);

// Writes `count` streams to `path` atomically.
//
// # Safety
// `path` must be a NUL-terminated string; `streams` must point to `count`
// live stream handles.
enum SpdcStatus spdc_events_write(const char *path,
                                  const struct SpdcStream *const *streams,
                                  size_t count);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPDC_LAB_H */
