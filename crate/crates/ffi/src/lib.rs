//! C ABI over `spdc-lab`.
//!
//! Every object crosses the boundary as an opaque pointer created by a
//! `*_new`/`*_read`/`spdc_simulate` call and released by the matching
//! `*_free`. Fallible calls return an [`SpdcStatus`]; on failure the message is
//! kept per thread and can be copied out with [`spdc_last_error_message`].
//! Panics never unwind into C: they are caught and reported as
//! [`SpdcStatus::Panic`].
//!
//! Times are seconds as `double` unless a parameter name ends in `_ticks`, in
//! which case they are femtosecond ticks.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use spdc_lab::correlator::{self, DelayGrid, Histogram, WindowMode};
use spdc_lab::lab::evt;
use spdc_lab::sim::{self, DetectorChain, SourceModel};
use spdc_lab::smearing::{self, ResponseKernel};
use spdc_lab::{Channel, Error, EventStream, Shape, SourceParams};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpdcStatus {
    Ok = 0,
    InvalidArgument = 1,
    NullPointer = 2,
    Regime = 3,
    Grid = 4,
    Unsorted = 5,
    EmptyDuration = 6,
    ZeroRate = 7,
    Format = 8,
    Io = 9,
    Config = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpdcShape {
    Box = 0,
    Triangle = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpdcModel {
    Thermal = 0,
    Poisson = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpdcWindowMode {
    Centered = 0,
    OneSided = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpdcChannel {
    Idler = 0,
    Signal1 = 1,
    Signal2 = 2,
}

/// Plateau levels predicted for a source seen through a response kernel.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SpdcPlateaus {
    pub x: f64,
    pub g2si_plateau: f64,
    pub nssi_short: f64,
    pub nssi_long: f64,
    pub gbar2c_short: f64,
}

pub struct SpdcSource(SourceParams);
pub struct SpdcKernel(ResponseKernel);
pub struct SpdcStream(EventStream);
pub struct SpdcHistogram(Histogram);
pub struct SpdcEventFile(Vec<EventStream>);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_last_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> SpdcStatus {
    match err {
        Error::InvalidParameter(_) => SpdcStatus::InvalidArgument,
        Error::Regime(_) => SpdcStatus::Regime,
        Error::GridMismatch(_) | Error::GridTooCoarse(_) | Error::GridTooLarge { .. } => {
            SpdcStatus::Grid
        }
        Error::Unsorted { .. } => SpdcStatus::Unsorted,
        Error::EmptyDuration => SpdcStatus::EmptyDuration,
        Error::ZeroRate(_) => SpdcStatus::ZeroRate,
        Error::Config(_) => SpdcStatus::Config,
        Error::Format(_) => SpdcStatus::Format,
        Error::Io(_) => SpdcStatus::Io,
    }
}

/// Failure inside the shim, before or after the library call.
struct Fail(SpdcStatus, String);

impl From<Error> for Fail {
    fn from(err: Error) -> Self {
        Fail(status_of(&err), err.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(SpdcStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SpdcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SpdcStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            SpdcStatus::Panic
        }
    }
}

/// Runs `f` and returns its value, or `fallback` after a panic.
fn guard_value<T>(fallback: T, f: impl FnOnce() -> T) -> T {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or(fallback)
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(SpdcStatus::InvalidArgument, "path is not UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Copies the calling thread's last error message into `buf` as a
/// NUL-terminated string, truncating to `len - 1` bytes. Returns the full
/// message length without the terminator, so a caller can size a retry.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn spdc_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// # Safety
/// `out_source` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spdc_source_new(
    pair_rate_hz: f64,
    coherence_time_s: f64,
    shape: SpdcShape,
    out_source: *mut *mut SpdcSource,
) -> SpdcStatus {
    guard(|| {
        let slot = out(out_source, "out_source")?;
        let shape = match shape {
            SpdcShape::Box => Shape::Box,
            SpdcShape::Triangle => Shape::Triangle,
        };
        let params = SourceParams::new(pair_rate_hz, coherence_time_s, shape)?;
        *slot = boxed(SpdcSource(params));
        Ok(())
    })
}

/// # Safety
/// `source` must be null or a handle from [`spdc_source_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn spdc_source_free(source: *mut SpdcSource) {
    release(source);
}

/// Mean pairs per coherence cell, `R Δt`.
///
/// # Safety
/// `source` must be a live handle; returns NaN for null.
#[no_mangle]
pub unsafe extern "C" fn spdc_source_mean_pairs(source: *const SpdcSource) -> f64 {
    source
        .as_ref()
        .map_or(f64::NAN, |s| s.0.mean_pairs_per_cell())
}

/// Signal-idler cross-correlation at delay `tau_s`; NaN for a null handle.
///
/// # Safety
/// `source` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn spdc_g2_si(source: *const SpdcSource, tau_s: f64) -> f64 {
    let Some(s) = source.as_ref() else {
        return f64::NAN;
    };
    guard_value(f64::NAN, || spdc_lab::model::g2_si(&s.0, tau_s))
}

/// Unconditioned signal-signal autocorrelation; NaN for a null handle.
///
/// # Safety
/// `source` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn spdc_g2_ss(source: *const SpdcSource, tau_s: f64) -> f64 {
    let Some(s) = source.as_ref() else {
        return f64::NAN;
    };
    guard_value(f64::NAN, || {
        spdc_lab::model::g2_ss_unconditional(&s.0, tau_s)
    })
}

/// Triple-coincidence probability density at detection times `t1`, `t2`
/// (signals) and `ti` (idler); NaN for a null handle.
///
/// # Safety
/// `source` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn spdc_p_ssi(
    source: *const SpdcSource,
    t1_s: f64,
    t2_s: f64,
    ti_s: f64,
) -> f64 {
    let Some(s) = source.as_ref() else {
        return f64::NAN;
    };
    guard_value(f64::NAN, || spdc_lab::model::p_ssi(&s.0, t1_s, t2_s, ti_s))
}

/// Conditioned signal-signal coherence; NaN for a null handle.
///
/// # Safety
/// `source` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn spdc_g2_c(
    source: *const SpdcSource,
    t1_s: f64,
    t2_s: f64,
    ti_s: f64,
) -> f64 {
    let Some(s) = source.as_ref() else {
        return f64::NAN;
    };
    guard_value(f64::NAN, || spdc_lab::model::g2_c(&s.0, t1_s, t2_s, ti_s))
}

/// Writes the heralding ratio and the unconditioned signal-signal ratio at
/// delay `tau_s`, both formed from limits of the triple density alone.
///
/// # Safety
/// `source` must be a live handle; both out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn spdc_limit_ratios(
    source: *const SpdcSource,
    tau_s: f64,
    out_heralding: *mut f64,
    out_unconditioned: *mut f64,
) -> SpdcStatus {
    guard(|| {
        let s = handle(source, "source")?;
        let heralding = out(out_heralding, "out_heralding")?;
        let unconditioned = out(out_unconditioned, "out_unconditioned")?;
        (*heralding, *unconditioned) = spdc_lab::model::limit_ratios(&s.0, tau_s);
        Ok(())
    })
}

/// Response kernel for a coincidence half-width, a jitter full width and a
/// sampling step.
///
/// # Safety
/// `out_kernel` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spdc_kernel_new(
    coincidence_halfwidth_s: f64,
    jitter_s: f64,
    step_s: f64,
    out_kernel: *mut *mut SpdcKernel,
) -> SpdcStatus {
    guard(|| {
        let slot = out(out_kernel, "out_kernel")?;
        let k = smearing::build_kernel(coincidence_halfwidth_s, jitter_s, step_s)?;
        *slot = boxed(SpdcKernel(k));
        Ok(())
    })
}

/// # Safety
/// `kernel` must be null or a handle from [`spdc_kernel_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn spdc_kernel_free(kernel: *mut SpdcKernel) {
    release(kernel);
}

/// # Safety
/// `source` and `kernel` must be live handles; `out_plateaus` writable.
#[no_mangle]
pub unsafe extern "C" fn spdc_predict_plateaus(
    source: *const SpdcSource,
    kernel: *const SpdcKernel,
    out_plateaus: *mut SpdcPlateaus,
) -> SpdcStatus {
    guard(|| {
        let s = handle(source, "source")?;
        let k = handle(kernel, "kernel")?;
        let slot = out(out_plateaus, "out_plateaus")?;
        let p = smearing::predict_plateaus(&s.0, &k.0);
        *slot = SpdcPlateaus {
            x: p.x,
            g2si_plateau: p.g2si_plateau,
            nssi_short: p.nssi_short,
            nssi_long: p.nssi_long,
            gbar2c_short: p.gbar2c_short,
        };
        Ok(())
    })
}

fn channel(c: SpdcChannel) -> Channel {
    match c {
        SpdcChannel::Idler => Channel::Idler,
        SpdcChannel::Signal1 => Channel::Signal1,
        SpdcChannel::Signal2 => Channel::Signal2,
    }
}

/// Copies `len` sorted timestamps into a new stream observed over
/// `[0, duration_ticks)`. Unsorted or out-of-range input is rejected.
///
/// # Safety
/// `timestamps` must point to `len` readable values (may be null when `len`
/// is zero); `out_stream` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spdc_stream_new(
    ch: SpdcChannel,
    timestamps: *const u64,
    len: usize,
    duration_ticks: u64,
    out_stream: *mut *mut SpdcStream,
) -> SpdcStatus {
    guard(|| {
        let slot = out(out_stream, "out_stream")?;
        let ts = if len == 0 {
            Vec::new()
        } else {
            if timestamps.is_null() {
                return Err(null("timestamps"));
            }
            std::slice::from_raw_parts(timestamps, len).to_vec()
        };
        let stream = EventStream::new(channel(ch), ts, duration_ticks)?;
        *slot = boxed(SpdcStream(stream));
        Ok(())
    })
}

/// # Safety
/// `stream` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn spdc_stream_len(stream: *const SpdcStream) -> usize {
    stream.as_ref().map_or(0, |s| s.0.len())
}

/// # Safety
/// `stream` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn spdc_stream_duration_ticks(stream: *const SpdcStream) -> u64 {
    stream.as_ref().map_or(0, |s| s.0.duration_ticks())
}

/// Borrowed view of the timestamps, valid until the stream is freed. Null for
/// a null handle or an empty stream.
///
/// # Safety
/// `stream` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn spdc_stream_timestamps(stream: *const SpdcStream) -> *const u64 {
    match stream.as_ref() {
        Some(s) if !s.0.is_empty() => s.0.timestamps().as_ptr(),
        _ => ptr::null(),
    }
}

/// # Safety
/// `stream` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn spdc_stream_free(stream: *mut SpdcStream) {
    release(stream);
}

/// Simulates a run of `duration_s` seconds and writes the idler and the two
/// signal streams. Identical arguments give identical streams.
///
/// # Safety
/// `source` must be a live handle; the three out pointers must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn spdc_simulate(
    source: *const SpdcSource,
    model: SpdcModel,
    eta_idler: f64,
    eta_signal: f64,
    splitter: f64,
    jitter_s: f64,
    duration_s: f64,
    seed: u64,
    out_idler: *mut *mut SpdcStream,
    out_signal1: *mut *mut SpdcStream,
    out_signal2: *mut *mut SpdcStream,
) -> SpdcStatus {
    guard(|| {
        let s = handle(source, "source")?;
        let oi = out(out_idler, "out_idler")?;
        let o1 = out(out_signal1, "out_signal1")?;
        let o2 = out(out_signal2, "out_signal2")?;
        let model = match model {
            SpdcModel::Thermal => SourceModel::Thermal,
            SpdcModel::Poisson => SourceModel::Poisson,
        };
        let chain = DetectorChain::new(eta_idler, eta_signal, splitter, jitter_s)?;
        let (i, a, b) = sim::simulate(model, &s.0, &chain, duration_s, seed)?;
        *oi = boxed(SpdcStream(i));
        *o1 = boxed(SpdcStream(a));
        *o2 = boxed(SpdcStream(b));
        Ok(())
    })
}

fn mode(m: SpdcWindowMode) -> WindowMode {
    match m {
        SpdcWindowMode::Centered => WindowMode::Centered,
        SpdcWindowMode::OneSided => WindowMode::OneSided,
    }
}

/// Counts `t_a - t_b` coincidences at delays `start + k * step` ticks,
/// `k < len`, with window half-width `tauc_s`.
///
/// # Safety
/// `a` and `b` must be live handles; `out_hist` writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn spdc_pair_histogram(
    a: *const SpdcStream,
    b: *const SpdcStream,
    delay_start_ticks: i64,
    delay_step_ticks: i64,
    len: usize,
    tauc_s: f64,
    window: SpdcWindowMode,
    out_hist: *mut *mut SpdcHistogram,
) -> SpdcStatus {
    guard(|| {
        let a = handle(a, "a")?;
        let b = handle(b, "b")?;
        let slot = out(out_hist, "out_hist")?;
        let grid = DelayGrid::new(delay_start_ticks, delay_step_ticks, len)?;
        let h = correlator::pair_histogram(&a.0, &b.0, &grid, tauc_s, mode(window))?;
        *slot = boxed(SpdcHistogram(h));
        Ok(())
    })
}

/// Counts idler-anchored triples with signal 1 within `tauc_s` of zero delay
/// and signal 2 within `tauc_s` of each grid delay.
///
/// # Safety
/// The three streams must be live handles; `out_hist` writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn spdc_triple_histogram(
    idler: *const SpdcStream,
    signal1: *const SpdcStream,
    signal2: *const SpdcStream,
    delay_start_ticks: i64,
    delay_step_ticks: i64,
    len: usize,
    tauc_s: f64,
    window: SpdcWindowMode,
    out_hist: *mut *mut SpdcHistogram,
) -> SpdcStatus {
    guard(|| {
        let i = handle(idler, "idler")?;
        let s1 = handle(signal1, "signal1")?;
        let s2 = handle(signal2, "signal2")?;
        let slot = out(out_hist, "out_hist")?;
        let grid = DelayGrid::new(delay_start_ticks, delay_step_ticks, len)?;
        let h = correlator::triple_histogram(&i.0, &s1.0, &s2.0, &grid, tauc_s, mode(window))?;
        *slot = boxed(SpdcHistogram(h));
        Ok(())
    })
}

/// # Safety
/// `hist` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn spdc_histogram_len(hist: *const SpdcHistogram) -> usize {
    hist.as_ref().map_or(0, |h| h.0.counts().len())
}

/// Borrowed view of the counts, valid until the histogram is freed.
///
/// # Safety
/// `hist` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn spdc_histogram_counts(hist: *const SpdcHistogram) -> *const u64 {
    hist.as_ref().map_or(ptr::null(), |h| h.0.counts().as_ptr())
}

/// # Safety
/// `hist` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn spdc_histogram_free(hist: *mut SpdcHistogram) {
    release(hist);
}

/// Reads every channel of an `.evt` file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_file` writable.
#[no_mangle]
pub unsafe extern "C" fn spdc_events_read(
    path: *const c_char,
    out_file: *mut *mut SpdcEventFile,
) -> SpdcStatus {
    guard(|| {
        let path = path_arg(path)?;
        let slot = out(out_file, "out_file")?;
        *slot = boxed(SpdcEventFile(evt::read_events(&path)?));
        Ok(())
    })
}

/// # Safety
/// `file` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn spdc_events_count(file: *const SpdcEventFile) -> usize {
    file.as_ref().map_or(0, |f| f.0.len())
}

/// Copies channel `index` of the file into a new stream handle.
///
/// # Safety
/// `file` must be a live handle; `out_stream` writable.
#[no_mangle]
pub unsafe extern "C" fn spdc_events_get(
    file: *const SpdcEventFile,
    index: usize,
    out_stream: *mut *mut SpdcStream,
) -> SpdcStatus {
    guard(|| {
        let f = handle(file, "file")?;
        let slot = out(out_stream, "out_stream")?;
        let s = f.0.get(index).ok_or_else(|| {
            Fail(
                SpdcStatus::InvalidArgument,
                format!(
                    "channel index {index} out of range ({} channels)",
                    f.0.len()
                ),
            )
        })?;
        *slot = boxed(SpdcStream(s.clone()));
        Ok(())
    })
}

/// # Safety
/// `file` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn spdc_events_free(file: *mut SpdcEventFile) {
    release(file);
}

/// Writes `count` streams to `path` atomically.
///
/// # Safety
/// `path` must be a NUL-terminated string; `streams` must point to `count`
/// live stream handles.
#[no_mangle]
pub unsafe extern "C" fn spdc_events_write(
    path: *const c_char,
    streams: *const *const SpdcStream,
    count: usize,
) -> SpdcStatus {
    guard(|| {
        let path = path_arg(path)?;
        if streams.is_null() && count > 0 {
            return Err(null("streams"));
        }
        let handles = if count == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(streams, count)
        };
        let owned = handles
            .iter()
            .map(|&h| handle(h, "streams[i]").map(|s| s.0.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        evt::write_events(&owned, &path)?;
        Ok(())
    })
}
