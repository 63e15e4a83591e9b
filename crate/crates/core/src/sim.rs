//! Coherence-cell point-process sources and the detector chain.
//!
//! The time axis is cut into cells of one coherence time `Δt`. Each cell holds
//! `n` pairs, Bose–Einstein distributed for the thermal model and Poisson for
//! the null model, all with mean `μ = RΔt`. A pair gets one uniform time in its
//! cell, shared by signal and idler.
//!
//! Randomness is addressed by `(seed, purpose, block)`: every block of cells or
//! pairs draws from its own ChaCha8 stream, so results do not depend on the
//! thread count and switching one decision off leaves the others untouched.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, Poisson};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::grid::TICKS_PER_SECOND;
use crate::model::SourceParams;
use crate::stream::{Channel, EventStream};

/// Cells per source substream.
const CELL_BLOCK: u64 = 1 << 22;
/// Pairs per detector-chain substream.
const PAIR_BLOCK: usize = 1 << 16;
/// Above this mean the zero-truncated Poisson draw switches from inversion to
/// rejection.
const POISSON_INVERSION_LIMIT: f64 = 30.0;

#[derive(Debug, Clone, Copy)]
#[repr(u64)]
enum Purpose {
    Source = 1,
    IdlerKeep,
    IdlerJitter,
    SignalKeep,
    Route,
    Signal1Jitter,
    Signal2Jitter,
}

fn substream(seed: u64, purpose: Purpose, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 48) | block);
    rng
}

fn duration_ticks(duration: f64) -> Result<u64> {
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(invalid(format!(
            "duration must be finite and >= 0, got {duration}"
        )));
    }
    let ticks = (duration * TICKS_PER_SECOND).round();
    if ticks > i64::MAX as f64 {
        return Err(invalid(format!(
            "duration {duration} s overflows the tick range"
        )));
    }
    Ok(ticks as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SourceModel {
    #[default]
    Thermal,
    Poisson,
}

impl SourceModel {
    pub fn name(self) -> &'static str {
        match self {
            SourceModel::Thermal => "thermal",
            SourceModel::Poisson => "poisson",
        }
    }

    pub fn generate(self, params: &SourceParams, duration: f64, seed: u64) -> Result<PairList> {
        match self {
            SourceModel::Thermal => gen_thermal_cells(params, duration, seed),
            SourceModel::Poisson => gen_poisson_pairs(params, duration, seed),
        }
    }
}

impl fmt::Display for SourceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SourceModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "thermal" => Ok(SourceModel::Thermal),
            "poisson" => Ok(SourceModel::Poisson),
            other => Err(invalid(format!("unknown source model `{other}`"))),
        }
    }
}

/// Pair emission times in femtosecond ticks; signal and idler share the time.
#[derive(Debug, Clone, PartialEq)]
pub struct PairList {
    times: Vec<u64>,
    duration: u64,
    cell_ticks: f64,
}

impl PairList {
    pub fn times(&self) -> &[u64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn duration_ticks(&self) -> u64 {
        self.duration
    }

    pub fn duration_seconds(&self) -> f64 {
        self.duration as f64 / TICKS_PER_SECOND
    }

    /// Coherence cell that emitted pair `i`.
    pub fn cell_index(&self, i: usize) -> u64 {
        (self.times[i] as f64 / self.cell_ticks).floor() as u64
    }

    pub fn cell_count(&self) -> u64 {
        (self.duration as f64 / self.cell_ticks).ceil() as u64
    }

    /// Pairs per cell over every cell of the run, including empty ones.
    pub fn occupancy(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.cell_count() as usize];
        for i in 0..self.len() {
            counts[self.cell_index(i) as usize] += 1;
        }
        counts
    }
}

/// Bose–Einstein cell occupancy; rejects `μ >= 1`.
pub fn gen_thermal_cells(params: &SourceParams, duration: f64, seed: u64) -> Result<PairList> {
    let mu = params.mean_pairs_per_cell();
    if mu >= 1.0 {
        return Err(Error::Regime(format!(
            "thermal cell model needs mean pairs per cell < 1, got {mu}"
        )));
    }
    // P(n) = (1 - q) q^n; given n >= 1, n - 1 follows the same law.
    let q = mu / (1.0 + mu);
    let extra = Geometric::new(1.0 - q).map_err(|e| invalid(e.to_string()))?;
    generate(params, duration, seed, q, |rng| 1 + extra.sample(rng))
}

/// Poisson cell occupancy with the same mean.
pub fn gen_poisson_pairs(params: &SourceParams, duration: f64, seed: u64) -> Result<PairList> {
    let mu = params.mean_pairs_per_cell();
    let occupied = -(-mu).exp_m1();
    let full = Poisson::new(mu).map_err(|e| invalid(e.to_string()))?;
    generate(params, duration, seed, occupied, |rng| {
        if mu > POISSON_INVERSION_LIMIT {
            loop {
                let n = full.sample(rng) as u64;
                if n > 0 {
                    return n;
                }
            }
        }
        // Inversion of P(n | n >= 1) = μⁿ / (n! (e^μ - 1)).
        let u: f64 = rng.random();
        let mut n = 1u64;
        let mut p = mu / mu.exp_m1();
        let mut cdf = p;
        while u > cdf && p > 0.0 {
            n += 1;
            p *= mu / n as f64;
            cdf += p;
        }
        n
    })
}

/// Shared cell walk: skip empty cells geometrically, draw the occupancy of
/// each occupied cell, place its pairs uniformly.
fn generate<F>(
    params: &SourceParams,
    duration: f64,
    seed: u64,
    occupied_prob: f64,
    occupancy: F,
) -> Result<PairList>
where
    F: Fn(&mut ChaCha8Rng) -> u64 + Sync,
{
    let duration = duration_ticks(duration)?;
    let cell_ticks = params.coherence_time() * TICKS_PER_SECOND;
    if cell_ticks < 1.0 {
        return Err(invalid("coherence time is below one femtosecond tick"));
    }
    let cells = (duration as f64 / cell_ticks).ceil() as u64;
    let skip = Geometric::new(occupied_prob.min(1.0)).map_err(|e| invalid(e.to_string()))?;
    let blocks = cells.div_ceil(CELL_BLOCK);
    let parts: Vec<Vec<u64>> = (0..blocks)
        .into_par_iter()
        .map(|block| {
            let mut rng = substream(seed, Purpose::Source, block);
            let end = ((block + 1) * CELL_BLOCK).min(cells);
            let mut cell = block * CELL_BLOCK;
            let mut out = Vec::new();
            loop {
                cell = cell.saturating_add(skip.sample(&mut rng));
                if cell >= end {
                    break;
                }
                let start = cell as f64 * cell_ticks;
                for _ in 0..occupancy(&mut rng) {
                    let t = (start + rng.random::<f64>() * cell_ticks) as u64;
                    if t <= duration {
                        out.push(t);
                    }
                }
                cell += 1;
            }
            out.sort_unstable();
            out
        })
        .collect();
    Ok(PairList {
        times: parts.concat(),
        duration,
        cell_ticks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorChain {
    idler_efficiency: f64,
    signal_efficiency: f64,
    splitter_ratio: f64,
    jitter_width: f64,
}

impl Default for DetectorChain {
    fn default() -> Self {
        Self {
            idler_efficiency: 1.0,
            signal_efficiency: 1.0,
            splitter_ratio: 0.5,
            jitter_width: 0.0,
        }
    }
}

impl DetectorChain {
    /// `jitter_width` is the full width of each detector's uniform jitter.
    pub fn new(
        idler_efficiency: f64,
        signal_efficiency: f64,
        splitter_ratio: f64,
        jitter_width: f64,
    ) -> Result<Self> {
        for (name, p) in [
            ("idler efficiency", idler_efficiency),
            ("signal efficiency", signal_efficiency),
            ("splitter ratio", splitter_ratio),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if !(jitter_width.is_finite() && jitter_width >= 0.0) {
            return Err(invalid(format!(
                "jitter width must be >= 0, got {jitter_width}"
            )));
        }
        Ok(Self {
            idler_efficiency,
            signal_efficiency,
            splitter_ratio,
            jitter_width,
        })
    }

    pub fn idler_efficiency(&self) -> f64 {
        self.idler_efficiency
    }

    pub fn signal_efficiency(&self) -> f64 {
        self.signal_efficiency
    }

    pub fn splitter_ratio(&self) -> f64 {
        self.splitter_ratio
    }

    pub fn jitter_width(&self) -> f64 {
        self.jitter_width
    }

    /// Both efficiencies multiplied by `factor`.
    pub fn scaled_efficiency(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.idler_efficiency * factor,
            self.signal_efficiency * factor,
            self.splitter_ratio,
            self.jitter_width,
        )
    }
}

struct ChainBlock {
    idler: Vec<u64>,
    signal1: Vec<u64>,
    signal2: Vec<u64>,
}

/// Thins, routes and jitters every pair; returns `(idler, signal1, signal2)`.
pub fn apply_detector_chain(
    pairs: &PairList,
    chain: &DetectorChain,
    seed: u64,
) -> (EventStream, EventStream, EventStream) {
    let duration = pairs.duration;
    let width = chain.jitter_width * TICKS_PER_SECOND;
    let jitter = |rng: &mut ChaCha8Rng, t: u64| -> u64 {
        let offset = ((rng.random::<f64>() - 0.5) * width).round() as i64;
        (t as i64).saturating_add(offset).clamp(0, duration as i64) as u64
    };
    let blocks: Vec<ChainBlock> = pairs
        .times
        .par_chunks(PAIR_BLOCK)
        .enumerate()
        .map(|(b, times)| {
            let b = b as u64;
            let mut idler_keep = substream(seed, Purpose::IdlerKeep, b);
            let mut idler_jitter = substream(seed, Purpose::IdlerJitter, b);
            let mut signal_keep = substream(seed, Purpose::SignalKeep, b);
            let mut route = substream(seed, Purpose::Route, b);
            let mut s1_jitter = substream(seed, Purpose::Signal1Jitter, b);
            let mut s2_jitter = substream(seed, Purpose::Signal2Jitter, b);
            let mut out = ChainBlock {
                idler: Vec::new(),
                signal1: Vec::new(),
                signal2: Vec::new(),
            };
            for &t in times {
                let ti = jitter(&mut idler_jitter, t);
                if idler_keep.random::<f64>() < chain.idler_efficiency {
                    out.idler.push(ti);
                }
                let t1 = jitter(&mut s1_jitter, t);
                let t2 = jitter(&mut s2_jitter, t);
                let kept = signal_keep.random::<f64>() < chain.signal_efficiency;
                let to_first = route.random::<f64>() < chain.splitter_ratio;
                match (kept, to_first) {
                    (true, true) => out.signal1.push(t1),
                    (true, false) => out.signal2.push(t2),
                    _ => {}
                }
            }
            out
        })
        .collect();
    let gather = |pick: fn(&ChainBlock) -> &Vec<u64>, channel| {
        let all: Vec<u64> = blocks
            .iter()
            .flat_map(|b| pick(b).iter().copied())
            .collect();
        EventStream::from_unsorted(channel, all, duration)
    };
    (
        gather(|b| &b.idler, Channel::Idler),
        gather(|b| &b.signal1, Channel::Signal1),
        gather(|b| &b.signal2, Channel::Signal2),
    )
}

/// Source generation followed by the detector chain, both from one seed.
pub fn simulate(
    model: SourceModel,
    params: &SourceParams,
    chain: &DetectorChain,
    duration: f64,
    seed: u64,
) -> Result<(EventStream, EventStream, EventStream)> {
    let pairs = model.generate(params, duration, seed)?;
    Ok(apply_detector_chain(&pairs, chain, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Shape;

    fn mean_var(counts: &[u32]) -> (f64, f64) {
        let n = counts.len() as f64;
        let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
        let var = counts
            .iter()
            .map(|&c| (c as f64 - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        (mean, var)
    }

    fn params(mu: f64) -> SourceParams {
        SourceParams::with_mean_pairs(2e7, mu, Shape::Box).unwrap()
    }

    #[test]
    fn bose_einstein_pmf() {
        let mu: f64 = 0.02;
        let pmf = |n: i32| mu.powi(n) / (1.0 + mu).powi(n + 1);
        assert!((pmf(0) - 0.9804).abs() < 1e-4);
        assert!((pmf(1) - 0.01922).abs() < 1e-5);
        assert!((pmf(2) - 3.77e-4).abs() < 1e-6);
        let pairs = gen_thermal_cells(&params(mu), 2e6 * 1e-9, 5).unwrap();
        let occ = pairs.occupancy();
        let cells = occ.len() as f64;
        for n in 0..3 {
            let seen = occ.iter().filter(|&&c| c == n as u32).count() as f64;
            let expect = pmf(n) * cells;
            assert!(
                (seen - expect).abs() < 5.0 * expect.sqrt(),
                "n={n}: {seen} vs {expect}"
            );
        }
    }

    #[test]
    fn pmf_ratio_separates_models() {
        let mu = 0.02;
        let ratio = |occ: &[u32]| {
            let c = |n| occ.iter().filter(|&&x| x == n).count() as f64;
            c(2) / c(1)
        };
        let d = 4e6 * 1e-9;
        let th = ratio(&gen_thermal_cells(&params(mu), d, 1).unwrap().occupancy());
        let po = ratio(&gen_poisson_pairs(&params(mu), d, 1).unwrap().occupancy());
        assert!((th - mu / (1.0 + mu)).abs() < 0.1 * mu, "{th}");
        assert!((po - mu / 2.0).abs() < 0.1 * mu, "{po}");
    }

    #[test]
    fn variance_to_mean() {
        let mu = 0.2;
        let d = 1e6 * 1e-8;
        let p = params(mu);
        let (m, v) = mean_var(&gen_thermal_cells(&p, d, 2).unwrap().occupancy());
        assert!((m - mu).abs() < 5.0 * (mu * (1.0 + mu) / 1e6).sqrt());
        assert!((v / m - (1.0 + mu)).abs() < 0.02, "{}", v / m);
        let (m, v) = mean_var(&gen_poisson_pairs(&p, d, 2).unwrap().occupancy());
        assert!((m - mu).abs() < 5.0 * (mu / 1e6).sqrt());
        assert!((v / m - 1.0).abs() < 0.02, "{}", v / m);
    }

    #[test]
    fn poisson_pair_rate_and_large_mean() {
        let p = SourceParams::new(2e7, 1e-9, Shape::Box).unwrap();
        let pairs = gen_poisson_pairs(&p, 0.05, 3).unwrap();
        let rate = pairs.len() as f64 / 0.05;
        assert!((rate - 2e7).abs() < 3.0 * (2e7 / 0.05f64).sqrt(), "{rate}");
        let big = SourceParams::with_mean_pairs(1e9, 40.0, Shape::Box).unwrap();
        let (m, _) = mean_var(&gen_poisson_pairs(&big, 1e4 * 4e-8, 3).unwrap().occupancy());
        assert!((m - 40.0).abs() < 0.5, "{m}");
    }

    #[test]
    fn thermal_rejects_multi_pair_regime() {
        let p = SourceParams::with_mean_pairs(1e7, 1.0, Shape::Box).unwrap();
        assert!(matches!(
            gen_thermal_cells(&p, 1e-6, 0),
            Err(Error::Regime(_))
        ));
        assert!(gen_poisson_pairs(&p, 1e-6, 0).is_ok());
    }

    #[test]
    fn zero_duration_is_empty() {
        let p = params(0.02);
        assert!(gen_thermal_cells(&p, 0.0, 9).unwrap().is_empty());
        let (i, s1, s2) = apply_detector_chain(
            &gen_poisson_pairs(&p, 0.0, 9).unwrap(),
            &DetectorChain::default(),
            9,
        );
        assert!(i.is_empty() && s1.is_empty() && s2.is_empty());
        assert!(gen_thermal_cells(&p, -1.0, 9).is_err());
    }

    #[test]
    fn generation_is_deterministic_and_sorted() {
        let p = params(0.05);
        let a = gen_thermal_cells(&p, 0.02, 77).unwrap();
        let b = gen_thermal_cells(&p, 0.02, 77).unwrap();
        let c = gen_thermal_cells(&p, 0.02, 78).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.times().windows(2).all(|w| w[0] <= w[1]));
        let chain = DetectorChain::new(0.7, 0.6, 0.5, 1e-9).unwrap();
        assert_eq!(
            apply_detector_chain(&a, &chain, 4),
            apply_detector_chain(&b, &chain, 4)
        );
    }

    #[test]
    fn identity_chain() {
        let pairs = gen_thermal_cells(&params(0.02), 1e-3, 11).unwrap();
        let chain = DetectorChain::new(1.0, 1.0, 1.0, 0.0).unwrap();
        let (i, s1, s2) = apply_detector_chain(&pairs, &chain, 11);
        let mut expect = pairs.times().to_vec();
        expect.dedup();
        assert_eq!(i.timestamps(), expect.as_slice());
        assert_eq!(s1.timestamps(), expect.as_slice());
        assert!(s2.is_empty());
    }

    #[test]
    fn binomial_thinning() {
        let pairs = gen_poisson_pairs(&params(0.02), 5e-3, 12).unwrap();
        let n = pairs.len() as f64;
        let chain = DetectorChain::new(0.5, 1.0, 0.5, 0.0).unwrap();
        let (i, _, _) = apply_detector_chain(&pairs, &chain, 12);
        assert!(
            (i.len() as f64 - n / 2.0).abs() < 1.5 * n.sqrt(),
            "{} of {n}",
            i.len()
        );
    }

    #[test]
    fn splitting_recovers_thinned_signal() {
        let pairs = gen_thermal_cells(&params(0.02), 2e-3, 13).unwrap();
        let split = DetectorChain::new(0.9, 0.6, 0.5, 0.0).unwrap();
        let whole = DetectorChain::new(0.9, 0.6, 1.0, 0.0).unwrap();
        let (i_a, s1, s2) = apply_detector_chain(&pairs, &split, 13);
        let (i_b, all, none) = apply_detector_chain(&pairs, &whole, 13);
        assert_eq!(s1.merged(&s2, Channel::Signal1), all);
        assert!(none.is_empty());
        // Routing draws do not touch the idler decisions.
        assert_eq!(i_a, i_b);
    }

    #[test]
    fn jitter_stays_in_width_and_duration() {
        let pairs = gen_poisson_pairs(&params(0.02), 1e-4, 14).unwrap();
        let chain = DetectorChain::new(1.0, 1.0, 1.0, 2e-9).unwrap();
        let (i, s1, _) = apply_detector_chain(&pairs, &chain, 14);
        assert_eq!(i.len(), pairs.len());
        let half = 1e-9 * TICKS_PER_SECOND;
        for (a, b) in pairs.times().iter().zip(i.timestamps()) {
            // Sorting is 1-Lipschitz in the sup norm, so order statistics move
            // by at most the largest offset.
            assert!((*a as f64 - *b as f64).abs() <= half + 1.0);
        }
        assert!(s1.timestamps().iter().all(|&t| t <= s1.duration_ticks()));
    }

    #[test]
    fn chain_rejects_bad_probabilities() {
        assert!(DetectorChain::new(1.1, 1.0, 0.5, 0.0).is_err());
        assert!(DetectorChain::new(1.0, -0.1, 0.5, 0.0).is_err());
        assert!(DetectorChain::new(1.0, 1.0, 0.5, -1.0).is_err());
        assert!("Thermal".parse::<SourceModel>().unwrap() == SourceModel::Thermal);
        assert!("gauss".parse::<SourceModel>().is_err());
    }
}
