//! Streaming coincidence counting and the normalized estimators.
//!
//! A pair `(a, b)` is coincident at delay `τ` when `|t_a - t_b - τ| <= τc` in
//! integer ticks, so boundary ties count. Every partner inside the window
//! counts. All delays of a grid are filled in one pass: each anchor event
//! walks the partners inside the grid's reach and adds one to the contiguous
//! range of delays whose window contains the partner, through a difference
//! array.
//!
//! Parallel counting shards the anchor stream by time and gives each shard the
//! partner events within reach of it. Every coincidence belongs to exactly
//! one anchor, so summing shard histograms reproduces the serial counts
//! exactly.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::grid::{seconds_to_ticks, UniformGrid, TICKS_PER_SECOND};
use crate::stream::EventStream;

/// A rate with its one-sigma statistical error, both in events per second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rate {
    pub value: f64,
    pub stderr: f64,
}

impl Rate {
    fn from_count(count: u64, seconds: f64) -> Self {
        Self {
            value: count as f64 / seconds,
            stderr: (count as f64).sqrt() / seconds,
        }
    }

    pub fn relative_error(&self) -> f64 {
        self.stderr / self.value
    }
}

/// Count over duration, with Poisson error.
pub fn singles_rate(stream: &EventStream) -> Result<Rate> {
    if stream.duration_ticks() == 0 {
        return Err(Error::EmptyDuration);
    }
    Ok(Rate::from_count(
        stream.len() as u64,
        stream.duration_seconds(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WindowMode {
    /// `|Δ - τ| <= τc`.
    #[default]
    Centered,
    /// `0 <= Δ - τ < 2τc`.
    OneSided,
}

impl WindowMode {
    /// Inclusive range of `Δ - τ` accepted by the window.
    fn offsets(self, tauc: i64) -> (i64, i64) {
        match self {
            WindowMode::Centered => (-tauc, tauc),
            WindowMode::OneSided => (0, 2 * tauc - 1),
        }
    }
}

impl fmt::Display for WindowMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WindowMode::Centered => "centered",
            WindowMode::OneSided => "one-sided",
        })
    }
}

impl FromStr for WindowMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "centered" => Ok(WindowMode::Centered),
            "one-sided" | "onesided" => Ok(WindowMode::OneSided),
            other => Err(invalid(format!("unknown window mode `{other}`"))),
        }
    }
}

/// Uniform delays `start + k * step` in ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DelayGrid {
    start: i64,
    step: i64,
    len: usize,
}

impl DelayGrid {
    pub fn new(start: i64, step: i64, len: usize) -> Result<Self> {
        if step <= 0 || len == 0 {
            return Err(invalid(
                "delay grid needs a positive step and at least one delay",
            ));
        }
        Ok(Self { start, step, len })
    }

    /// Delays `k * bin` for `|k * bin| <= half_span`, in seconds.
    pub fn symmetric(half_span: f64, bin: f64) -> Result<Self> {
        Self::from_grid(&UniformGrid::symmetric(half_span, bin)?)
    }

    pub fn from_grid(grid: &UniformGrid) -> Result<Self> {
        Self::new(
            seconds_to_ticks(grid.start()),
            seconds_to_ticks(grid.step()),
            grid.len(),
        )
    }

    pub fn single(delay: i64) -> Self {
        Self {
            start: delay,
            step: 1,
            len: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn delay(&self, k: usize) -> i64 {
        self.start + k as i64 * self.step
    }

    pub fn last(&self) -> i64 {
        self.delay(self.len - 1)
    }

    pub fn delays_seconds(&self) -> Vec<f64> {
        (0..self.len)
            .map(|k| self.delay(k) as f64 / TICKS_PER_SECOND)
            .collect()
    }

    pub fn index_of(&self, delay: i64) -> Option<usize> {
        let off = delay - self.start;
        (off >= 0 && off % self.step == 0 && ((off / self.step) as usize) < self.len)
            .then(|| (off / self.step) as usize)
    }

    /// Delays whose window `[τ + lo, τ + hi]` contains `diff`.
    fn covering(&self, diff: i64, (lo, hi): (i64, i64)) -> Option<(usize, usize)> {
        let first = ceil_div(diff - hi - self.start, self.step).max(0);
        let last = (diff - lo - self.start)
            .div_euclid(self.step)
            .min(self.len as i64 - 1);
        (first <= last).then_some((first as usize, last as usize))
    }
}

fn ceil_div(x: i64, d: i64) -> i64 {
    -(-x).div_euclid(d)
}

/// Raw coincidence counts per delay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    grid: DelayGrid,
    counts: Vec<u64>,
    duration: u64,
    tauc: u64,
    mode: WindowMode,
}

impl Histogram {
    pub fn grid(&self) -> &DelayGrid {
        &self.grid
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn duration_seconds(&self) -> f64 {
        self.duration as f64 / TICKS_PER_SECOND
    }

    pub fn tauc_seconds(&self) -> f64 {
        self.tauc as f64 / TICKS_PER_SECOND
    }

    pub fn mode(&self) -> WindowMode {
        self.mode
    }

    /// Full window measure `2τc` in seconds.
    pub fn window_seconds(&self) -> f64 {
        2.0 * self.tauc_seconds()
    }

    pub fn delays_seconds(&self) -> Vec<f64> {
        self.grid.delays_seconds()
    }

    pub fn rate(&self, k: usize) -> Rate {
        Rate::from_count(self.counts[k], self.duration_seconds())
    }

    pub fn rates(&self) -> Vec<Rate> {
        (0..self.counts.len()).map(|k| self.rate(k)).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Accumulates range increments, resolved by a prefix sum.
struct Accumulator {
    diff: Vec<i64>,
}

impl Accumulator {
    fn new(len: usize) -> Self {
        Self {
            diff: vec![0; len + 1],
        }
    }

    fn add(&mut self, (first, last): (usize, usize), weight: i64) {
        self.diff[first] += weight;
        self.diff[last + 1] -= weight;
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.diff.iter_mut().zip(other.diff) {
            *a += b;
        }
        self
    }

    fn finish(self) -> Vec<u64> {
        let mut running = 0i64;
        let mut out = Vec::with_capacity(self.diff.len() - 1);
        for d in &self.diff[..self.diff.len() - 1] {
            running += d;
            out.push(running as u64);
        }
        out
    }
}

fn check_inputs(streams: &[&EventStream], tauc: f64) -> Result<(u64, i64)> {
    let duration = streams[0].duration_ticks();
    if duration == 0 {
        return Err(Error::EmptyDuration);
    }
    if streams.iter().any(|s| s.duration_ticks() != duration) {
        return Err(invalid("streams cover different durations"));
    }
    let tauc_ticks = seconds_to_ticks(tauc);
    if !(tauc.is_finite() && tauc_ticks > 0) {
        return Err(invalid(format!(
            "coincidence half-width must be > 0, got {tauc}"
        )));
    }
    Ok((duration, tauc_ticks))
}

/// Shard boundaries in anchor time; the last shard ends past the duration.
fn shard_edges(duration: u64, shards: usize) -> Vec<(u64, u64)> {
    let shards = shards.max(1) as u64;
    let width = duration / shards + 1;
    (0..shards)
        .map(|s| {
            (
                s * width,
                if s + 1 == shards {
                    u64::MAX
                } else {
                    (s + 1) * width
                },
            )
        })
        .collect()
}

fn default_shards(anchors: usize) -> usize {
    (rayon::current_num_threads() * 4).min(anchors / 4096 + 1)
}

/// Partner events with `anchor + lo <= t <= anchor + hi` for anchors in `[from, to)`.
fn partner_slice(stream: &[u64], from: u64, to: u64, (lo, hi): (i64, i64)) -> &[u64] {
    let start = (from as i64).saturating_add(lo);
    let end = (to.min(i64::MAX as u64) as i64).saturating_add(hi);
    let a = stream.partition_point(|&t| (t as i64) < start);
    let b = stream.partition_point(|&t| (t as i64) <= end);
    &stream[a..b.max(a)]
}

/// Sliding window over a sorted partner slice.
struct Window<'a> {
    events: &'a [u64],
    lo: usize,
}

impl<'a> Window<'a> {
    /// Partners with `anchor + lo <= t <= anchor + hi`; anchors must not decrease.
    fn advance(&mut self, anchor: i64, (lo, hi): (i64, i64)) -> &'a [u64] {
        let start = anchor.saturating_add(lo);
        while self.lo < self.events.len() && (self.events[self.lo] as i64) < start {
            self.lo += 1;
        }
        let end = anchor.saturating_add(hi);
        let mut k = self.lo;
        while k < self.events.len() && (self.events[k] as i64) <= end {
            k += 1;
        }
        &self.events[self.lo..k]
    }
}

fn count_pairs(a: &[u64], b: &[u64], grid: &DelayGrid, window: (i64, i64)) -> Accumulator {
    let reach = (grid.start + window.0, grid.last() + window.1);
    let mut acc = Accumulator::new(grid.len);
    let mut partners = Window { events: a, lo: 0 };
    for &tb in b {
        for &ta in partners.advance(tb as i64, reach) {
            if let Some(range) = grid.covering(ta as i64 - tb as i64, window) {
                acc.add(range, 1);
            }
        }
    }
    acc
}

/// Pairs with `t_a - t_b` inside the window around each delay.
pub fn pair_histogram(
    a: &EventStream,
    b: &EventStream,
    grid: &DelayGrid,
    tauc: f64,
    mode: WindowMode,
) -> Result<Histogram> {
    pair_histogram_sharded(a, b, grid, tauc, mode, default_shards(b.len()))
}

/// [`pair_histogram`] with an explicit number of time shards.
pub fn pair_histogram_sharded(
    a: &EventStream,
    b: &EventStream,
    grid: &DelayGrid,
    tauc: f64,
    mode: WindowMode,
    shards: usize,
) -> Result<Histogram> {
    let (duration, tauc_ticks) = check_inputs(&[a, b], tauc)?;
    let window = mode.offsets(tauc_ticks);
    let reach = (grid.start + window.0, grid.last() + window.1);
    let acc = shard_edges(duration, shards)
        .into_par_iter()
        .map(|(from, to)| {
            let anchors = b.slice_ticks(from, to);
            let partners = partner_slice(a.timestamps(), from, to, reach);
            count_pairs(partners, anchors, grid, window)
        })
        .reduce(|| Accumulator::new(grid.len), Accumulator::merge);
    Ok(Histogram {
        grid: *grid,
        counts: acc.finish(),
        duration,
        tauc: tauc_ticks as u64,
        mode,
    })
}

fn count_triples(
    idler: &[u64],
    s1: &[u64],
    s2: &[u64],
    grid: &DelayGrid,
    window: (i64, i64),
) -> Accumulator {
    let reach = (grid.start + window.0, grid.last() + window.1);
    let mut acc = Accumulator::new(grid.len);
    let mut first = Window { events: s1, lo: 0 };
    let mut second = Window { events: s2, lo: 0 };
    for &ti in idler {
        let ti = ti as i64;
        let heralds = first.advance(ti, window).len() as i64;
        let partners = second.advance(ti, reach);
        if heralds == 0 {
            continue;
        }
        for &t2 in partners {
            if let Some(range) = grid.covering(t2 as i64 - ti, window) {
                acc.add(range, heralds);
            }
        }
    }
    acc
}

/// Triples with `t_s1 - t_i` inside the zero-delay window and `t_s2 - t_i`
/// inside the window around each delay.
pub fn triple_histogram(
    idler: &EventStream,
    s1: &EventStream,
    s2: &EventStream,
    grid: &DelayGrid,
    tauc: f64,
    mode: WindowMode,
) -> Result<Histogram> {
    triple_histogram_sharded(idler, s1, s2, grid, tauc, mode, default_shards(idler.len()))
}

/// [`triple_histogram`] with an explicit number of time shards.
pub fn triple_histogram_sharded(
    idler: &EventStream,
    s1: &EventStream,
    s2: &EventStream,
    grid: &DelayGrid,
    tauc: f64,
    mode: WindowMode,
    shards: usize,
) -> Result<Histogram> {
    let (duration, tauc_ticks) = check_inputs(&[idler, s1, s2], tauc)?;
    let window = mode.offsets(tauc_ticks);
    let reach = (grid.start + window.0, grid.last() + window.1);
    let acc = shard_edges(duration, shards)
        .into_par_iter()
        .map(|(from, to)| {
            let anchors = idler.slice_ticks(from, to);
            let heralds = partner_slice(s1.timestamps(), from, to, window);
            let partners = partner_slice(s2.timestamps(), from, to, reach);
            count_triples(anchors, heralds, partners, grid, window)
        })
        .reduce(|| Accumulator::new(grid.len), Accumulator::merge);
    Ok(Histogram {
        grid: *grid,
        counts: acc.finish(),
        duration,
        tauc: tauc_ticks as u64,
        mode,
    })
}

/// Rate of `a`–`b` coincidences at zero delay.
pub fn coincidence_rate(
    a: &EventStream,
    b: &EventStream,
    tauc: f64,
    mode: WindowMode,
) -> Result<Rate> {
    Ok(pair_histogram(a, b, &DelayGrid::single(0), tauc, mode)?.rate(0))
}

/// Normalized correlation estimate per delay.
///
/// `defined` is false where a denominator was zero; such bins carry value and
/// error 0.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorCurve {
    pub delays: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub defined: Vec<bool>,
}

impl EstimatorCurve {
    fn from_parts(delays: Vec<f64>, parts: Vec<Option<(f64, f64)>>) -> Self {
        let defined = parts.iter().map(Option::is_some).collect();
        let (values, stderr) = parts.into_iter().map(|p| p.unwrap_or((0.0, 0.0))).unzip();
        Self {
            delays,
            values,
            stderr,
            defined,
        }
    }

    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }

    /// Indices of defined bins with `lo <= |τ| <= hi`.
    pub fn bins_within(&self, lo: f64, hi: f64) -> Vec<usize> {
        (0..self.len())
            .filter(|&k| self.defined[k] && (lo..=hi).contains(&self.delays[k].abs()))
            .collect()
    }

    /// Mean of the defined bins with `lo <= |τ| <= hi`.
    ///
    /// Neighbouring bins share coincidences whenever the bin width is below the
    /// window, so the error is the mean per-bin error rather than that divided
    /// by the square root of the bin count.
    pub fn plateau(&self, lo: f64, hi: f64) -> Option<Rate> {
        let bins = self.bins_within(lo, hi);
        if bins.is_empty() {
            return None;
        }
        let n = bins.len() as f64;
        let value = bins.iter().map(|&k| self.values[k]).sum::<f64>() / n;
        let stderr = bins.iter().map(|&k| self.stderr[k]).sum::<f64>() / n;
        Some(Rate { value, stderr })
    }

    /// Per-bin `(a - b) / sqrt(σa² + σb²)` where both bins are defined.
    pub fn z_scores(&self, other: &EstimatorCurve) -> Result<Vec<Option<f64>>> {
        if self.delays != other.delays {
            return Err(Error::GridMismatch(
                "estimator curves use different delays".into(),
            ));
        }
        Ok((0..self.len())
            .map(|k| {
                let sigma = self.stderr[k].hypot(other.stderr[k]);
                (self.defined[k] && other.defined[k] && sigma > 0.0)
                    .then(|| (self.values[k] - other.values[k]) / sigma)
            })
            .collect())
    }
}

fn nonzero(rate: Rate, what: &'static str) -> Result<Rate> {
    if rate.value > 0.0 && rate.value.is_finite() {
        Ok(rate)
    } else {
        Err(Error::ZeroRate(what))
    }
}

/// `N_si(τ) / (r_a r_b 2τc)`.
pub fn estimate_g2bar_si(pairs: &Histogram, a_rate: Rate, b_rate: Rate) -> Result<EstimatorCurve> {
    let a = nonzero(a_rate, "first stream")?;
    let b = nonzero(b_rate, "second stream")?;
    let norm = a.value * b.value * pairs.window_seconds();
    let rate_var = a.relative_error().powi(2) + b.relative_error().powi(2);
    let parts = pairs
        .rates()
        .into_iter()
        .zip(pairs.counts())
        .map(|(r, &n)| {
            let value = r.value / norm;
            let count_var = 1.0 / (n.max(1) as f64);
            Some((
                value,
                value.max(1.0 / norm / pairs.duration_seconds()) * (count_var + rate_var).sqrt(),
            ))
        })
        .collect();
    Ok(EstimatorCurve::from_parts(pairs.delays_seconds(), parts))
}

/// `N_ssi(τ) · r_i / (N_si(0) · N_si(τ))` with the measured idler rate.
///
/// `pairs0` is the zero-delay signal1–idler rate, `pairs` the signal2–idler
/// histogram on the same delays as `triples`.
pub fn estimate_gbar2_c(
    triples: &Histogram,
    pairs0: Rate,
    pairs: &Histogram,
    idler_rate: Rate,
) -> Result<EstimatorCurve> {
    if triples.grid() != pairs.grid() {
        return Err(Error::GridMismatch(
            "triple and pair histograms use different delays".into(),
        ));
    }
    let idler = nonzero(idler_rate, "idler")?;
    let fixed_var = idler.relative_error().powi(2)
        + if pairs0.value > 0.0 {
            pairs0.relative_error().powi(2)
        } else {
            0.0
        };
    let parts = triples
        .rates()
        .into_iter()
        .zip(pairs.rates())
        .zip(triples.counts().iter().zip(pairs.counts()))
        .map(|((t, p), (&nt, &np))| {
            if pairs0.value <= 0.0 || np == 0 {
                return None;
            }
            let value = t.value * idler.value / (pairs0.value * p.value);
            let unit = idler.value / (pairs0.value * p.value * triples.duration_seconds());
            let var = 1.0 / nt.max(1) as f64 + 1.0 / np as f64 + fixed_var;
            Some((value, value.max(unit) * var.sqrt()))
        })
        .collect();
    Ok(EstimatorCurve::from_parts(triples.delays_seconds(), parts))
}

/// Zero-delay `<n(n-1)> / <n>²` of counts in fixed bins aligned to time 0.
///
/// Unlike a sliding window, the fixed bins resolve structure that lives on a
/// fixed time lattice, such as the coherence cells of the simulated source.
pub fn binned_g2_zero(stream: &EventStream, bin: f64) -> Result<Rate> {
    let bin_ticks = seconds_to_ticks(bin);
    if bin_ticks <= 0 {
        return Err(invalid(format!("bin width must be > 0, got {bin}")));
    }
    let duration = stream.duration_ticks();
    if duration == 0 {
        return Err(Error::EmptyDuration);
    }
    let bins = duration.div_ceil(bin_ticks as u64) as f64;
    let mut pairs = 0u64;
    let mut run = 0u64;
    let mut current = u64::MAX;
    for &t in stream.timestamps() {
        let b = t / bin_ticks as u64;
        if b != current {
            pairs += run * run.saturating_sub(1);
            run = 0;
            current = b;
        }
        run += 1;
    }
    pairs += run * run.saturating_sub(1);
    let n = stream.len() as f64;
    if n == 0.0 {
        return Err(Error::ZeroRate("binned stream"));
    }
    let mean = n / bins;
    let value = pairs as f64 / bins / (mean * mean);
    // Unordered pairs are close to Poisson; the mean enters squared.
    let rel = (2.0 / pairs.max(1) as f64 + 4.0 / n).sqrt();
    Ok(Rate {
        value,
        stderr: value.max(1.0 / (bins * mean * mean)) * rel,
    })
}
