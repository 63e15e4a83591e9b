//! Closed-form correlation and coherence functions of a continuously pumped
//! SPDC source.
//!
//! All auto- and cross-correlations of the signal and idler arms are built
//! from two real even functions: the first-order coherence `R(τ)` of each arm
//! (with `R(0) = R`, the pair rate) and the signal-idler amplitude correlation
//! `C(τ)`, normalised so that `C²(0) / R² = 1 / (R Δt)`. Only `C²` enters the
//! observables below except for the central `2 C C R` term, where `C` is taken
//! real and non-negative.

use std::fmt;
use std::str::FromStr;

use crate::curve::{CorrelationCurve, CorrelationSurface, Unit};
use crate::error::{invalid, Error, Result};
use crate::grid::UniformGrid;

/// Mean pairs per coherence cell above which multi-pair terms stop being small.
pub const MULTI_PAIR_WARNING: f64 = 0.1;

/// Offsets standing in for "infinitely far" in the limit identities, in units
/// of the coherence time.
pub const FAR_OFFSET_CELLS: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Shape {
    /// `R(τ)` and `C(τ)` constant on `|τ| <= Δt/2`.
    #[default]
    Box,
    /// `R(τ)` and `C²(τ)` decay linearly to zero at `|τ| = Δt`.
    Triangle,
}

impl Shape {
    /// Half-width of the support of `R` and `C`, in units of `Δt`.
    pub fn support(self) -> f64 {
        match self {
            Shape::Box => 0.5,
            Shape::Triangle => 1.0,
        }
    }

    /// `R(τ) / R` at `u = τ / Δt`.
    fn auto_profile(self, u: f64) -> f64 {
        match self {
            Shape::Box => (u.abs() <= 0.5) as u8 as f64,
            Shape::Triangle => (1.0 - u.abs()).max(0.0),
        }
    }

    /// `C²(τ) Δt / R` at `u = τ / Δt`; unit integral over `u`.
    fn cross_sq_profile(self, u: f64) -> f64 {
        match self {
            Shape::Box => (u.abs() <= 0.5) as u8 as f64,
            Shape::Triangle => (1.0 - u.abs()).max(0.0),
        }
    }

    /// `∫_0^u` of the cross-correlation profile (odd in `u`).
    fn cross_sq_primitive(self, u: f64) -> f64 {
        match self {
            Shape::Box => u.clamp(-0.5, 0.5),
            Shape::Triangle => {
                let v = u.abs().min(1.0);
                u.signum() * (v - 0.5 * v * v)
            }
        }
    }

    /// Even second primitive `G` of `(R(τ)/R)²` with `G(0) = 0`, `G'' = ρ²`.
    fn auto_sq_second_primitive(self, u: f64) -> f64 {
        let a = u.abs();
        match self {
            Shape::Box => {
                if a <= 0.5 {
                    0.5 * a * a
                } else {
                    0.5 * a - 0.125
                }
            }
            Shape::Triangle => {
                if a <= 1.0 {
                    (a + (1.0 - a).powi(4) / 4.0 - 0.25) / 3.0
                } else {
                    0.25 + (a - 1.0) / 3.0
                }
            }
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Shape::Box => "box",
            Shape::Triangle => "triangle",
        })
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "box" => Ok(Shape::Box),
            "triangle" => Ok(Shape::Triangle),
            other => Err(invalid(format!("unknown correlation shape `{other}`"))),
        }
    }
}

/// Pair-generation rate `R` (1/s), coherence time `Δt` (s) and shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceParams {
    pair_rate: f64,
    coherence_time: f64,
    shape: Shape,
}

impl SourceParams {
    pub fn new(pair_rate: f64, coherence_time: f64, shape: Shape) -> Result<Self> {
        if !(pair_rate > 0.0) || !pair_rate.is_finite() {
            return Err(invalid(format!(
                "pair rate must be positive, got {pair_rate}"
            )));
        }
        if !(coherence_time > 0.0) || !coherence_time.is_finite() {
            return Err(invalid(format!(
                "coherence time must be positive, got {coherence_time}"
            )));
        }
        if !(pair_rate * coherence_time).is_finite() {
            return Err(invalid("mean pairs per coherence cell is not finite"));
        }
        Ok(Self {
            pair_rate,
            coherence_time,
            shape,
        })
    }

    /// Source with a given `R` and `μ = R Δt`.
    pub fn with_mean_pairs(pair_rate: f64, mean_pairs: f64, shape: Shape) -> Result<Self> {
        Self::new(pair_rate, mean_pairs / pair_rate, shape)
    }

    pub fn pair_rate(&self) -> f64 {
        self.pair_rate
    }

    pub fn coherence_time(&self) -> f64 {
        self.coherence_time
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn with_shape(self, shape: Shape) -> Self {
        Self { shape, ..self }
    }

    /// `μ = R Δt`.
    pub fn mean_pairs_per_cell(&self) -> f64 {
        self.pair_rate * self.coherence_time
    }

    /// True when `μ >= 0.1`, where multi-pair terms are no longer negligible.
    pub fn multi_pair_warning(&self) -> bool {
        self.mean_pairs_per_cell() >= MULTI_PAIR_WARNING
    }
}

/// The pair `R(τ)`, `C(τ)` of a source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationPair {
    rate: f64,
    dt: f64,
    shape: Shape,
    cross_enabled: bool,
}

pub fn correlation_pair(params: &SourceParams) -> CorrelationPair {
    CorrelationPair {
        rate: params.pair_rate,
        dt: params.coherence_time,
        shape: params.shape,
        cross_enabled: true,
    }
}

impl CorrelationPair {
    /// The same source with the signal-idler correlation switched off.
    pub fn without_cross(self) -> Self {
        Self {
            cross_enabled: false,
            ..self
        }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// `R(τ)` in 1/s.
    pub fn auto(&self, tau: f64) -> f64 {
        self.rate * self.shape.auto_profile(tau / self.dt)
    }

    /// `C²(τ)` in 1/s².
    pub fn cross_sq(&self, tau: f64) -> f64 {
        if !self.cross_enabled {
            return 0.0;
        }
        self.rate / self.dt * self.shape.cross_sq_profile(tau / self.dt)
    }

    /// `C(τ) >= 0` in 1/s.
    pub fn cross(&self, tau: f64) -> f64 {
        self.cross_sq(tau).sqrt()
    }

    /// `1 + C²(τ)/R²`.
    pub fn g2_si(&self, tau: f64) -> f64 {
        1.0 + self.cross_sq(tau) / (self.rate * self.rate)
    }

    /// `1 + R²(τ)/R²`, the unconditioned signal-signal coherence.
    pub fn g2_ss(&self, tau: f64) -> f64 {
        let rho = self.auto(tau) / self.rate;
        1.0 + rho * rho
    }

    /// Ideal triple-coincidence rate `P_ssi(t1, t2, ti)` in 1/s³.
    pub fn p_ssi(&self, t1: f64, t2: f64, ti: f64) -> f64 {
        let r = self.rate;
        let d12 = t1 - t2;
        let (d1, d2) = (t1 - ti, t2 - ti);
        let r12 = self.auto(d12);
        2.0 * self.cross(d1) * self.cross(d2) * r12
            + r * (r * r + r12 * r12 + self.cross_sq(d1) + self.cross_sq(d2))
    }

    /// `P_ssi(ti, ti + τ, ti)`.
    pub fn p_ssi_diag(&self, tau: f64) -> f64 {
        self.p_ssi(0.0, tau, 0.0)
    }

    /// Conditioned second-order coherence `g2_c(t1, t2 | ti)`.
    pub fn g2_c(&self, t1: f64, t2: f64, ti: f64) -> f64 {
        let r3 = self.rate.powi(3);
        self.p_ssi(t1, t2, ti) / (r3 * self.g2_si(t1 - ti) * self.g2_si(t2 - ti))
    }

    /// Stand-in for an infinite offset from a point at delay `tau`.
    fn far_offset(&self, tau: f64) -> f64 {
        FAR_OFFSET_CELLS * self.dt + 2.0 * tau.abs()
    }

    /// `(P(τ, ∞ | 0) / P(-∞, ∞ | 0), P(τ, 0 | -∞) / P(τ, ∞ | -∞))`.
    pub fn limit_ratios(&self, tau: f64) -> (f64, f64) {
        let far = self.far_offset(tau);
        let reach = self.shape.support() * self.dt;
        // Every correlation argument that should have died out lies outside
        // the support.
        assert!(far - tau.abs() > reach && far > reach);
        assert!(self.auto(tau - far) == 0.0 && self.cross_sq(far) == 0.0);

        let heralding = self.p_ssi(tau, far, 0.0) / self.p_ssi(-far, far, 0.0);
        let signal_signal = self.p_ssi(tau, 0.0, -far) / self.p_ssi(tau, far, -far);
        (heralding, signal_signal)
    }

    /// Mean of `C²` over `[lo, hi]`.
    pub fn cross_sq_mean(&self, lo: f64, hi: f64) -> f64 {
        if !self.cross_enabled {
            return 0.0;
        }
        let (p, dt) = (self.shape, self.dt);
        self.rate * (p.cross_sq_primitive(hi / dt) - p.cross_sq_primitive(lo / dt)) / (hi - lo)
    }

    /// Mean of `g2_si` over `[lo, hi]`.
    pub fn g2_si_mean(&self, lo: f64, hi: f64) -> f64 {
        1.0 + self.cross_sq_mean(lo, hi) / (self.rate * self.rate)
    }

    /// Mean of `R²(s1 - s2)` over the rectangle `[x0, x1] × [y0, y1]`.
    fn auto_sq_mean(&self, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
        let dt = self.dt;
        let g = |d: f64| self.shape.auto_sq_second_primitive(d / dt);
        let combo = g(x1 - y0) - g(x0 - y0) - g(x1 - y1) + g(x0 - y1);
        self.rate * self.rate * dt * dt * combo / ((x1 - x0) * (y1 - y0))
    }

    /// Mean of the central term `2 C(s1) C(s2) R(s1 - s2)` over a rectangle.
    ///
    /// Exact for the box shape (a clipped polygon area). The triangle term is
    /// integrated with a midpoint rule resolving `Δt / 64` on the intersection
    /// with the support square.
    fn central_mean(&self, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
        if !self.cross_enabled {
            return 0.0;
        }
        let reach = self.shape.support() * self.dt;
        let (ax, bx) = (x0.max(-reach), x1.min(reach));
        let (ay, by) = (y0.max(-reach), y1.min(reach));
        if ax >= bx || ay >= by {
            return 0.0;
        }
        if self.shape == Shape::Box {
            let area = band_clipped_area([ax, bx, ay, by], reach);
            return 2.0 * self.rate * self.rate / self.dt * area / ((x1 - x0) * (y1 - y0));
        }
        let nodes = |len: f64| ((64.0 * len / self.dt).ceil() as usize).clamp(4, 256);
        let (nx, ny) = (nodes(bx - ax), nodes(by - ay));
        let (hx, hy) = ((bx - ax) / nx as f64, (by - ay) / ny as f64);
        let mut sum = 0.0;
        for i in 0..nx {
            let s1 = ax + (i as f64 + 0.5) * hx;
            let c1 = self.cross(s1);
            if c1 == 0.0 {
                continue;
            }
            for j in 0..ny {
                let s2 = ay + (j as f64 + 0.5) * hy;
                sum += c1 * self.cross(s2) * self.auto(s1 - s2);
            }
        }
        2.0 * sum * hx * hy / ((x1 - x0) * (y1 - y0))
    }

    /// Mean of `P_ssi(s1, s2, 0)` over the rectangle `[x0, x1] × [y0, y1]`.
    pub fn p_ssi_mean(&self, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
        let r = self.rate;
        r * r * r
            + r * (self.auto_sq_mean(x0, x1, y0, y1)
                + self.cross_sq_mean(x0, x1)
                + self.cross_sq_mean(y0, y1))
            + self.central_mean(x0, x1, y0, y1)
    }
}

/// Area of the rectangle `[ax, bx] × [ay, by]` inside the band `|x - y| <= w`.
fn band_clipped_area([ax, bx, ay, by]: [f64; 4], w: f64) -> f64 {
    let mut poly = vec![(ax, ay), (bx, ay), (bx, by), (ax, by)];
    // Keep x - y <= w, then y - x <= w.
    poly = clip_half_plane(&poly, |(x, y)| w - (x - y));
    poly = clip_half_plane(&poly, |(x, y)| w - (y - x));
    let n = poly.len();
    let twice: f64 = (0..n)
        .map(|i| {
            let (p, q) = (poly[i], poly[(i + 1) % n]);
            p.0 * q.1 - q.0 * p.1
        })
        .sum();
    0.5 * twice.abs()
}

/// Sutherland–Hodgman step keeping the points where the affine `side >= 0`.
fn clip_half_plane(poly: &[(f64, f64)], side: impl Fn((f64, f64)) -> f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        let (sp, sq) = (side(p), side(q));
        if sp >= 0.0 {
            out.push(p);
        }
        if (sp >= 0.0) != (sq >= 0.0) {
            let t = sp / (sp - sq);
            out.push((p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1)));
        }
    }
    out
}

pub fn g2_si(params: &SourceParams, tau: f64) -> f64 {
    correlation_pair(params).g2_si(tau)
}

pub fn g2_ss_unconditional(params: &SourceParams, tau: f64) -> f64 {
    correlation_pair(params).g2_ss(tau)
}

pub fn p_ssi(params: &SourceParams, t1: f64, t2: f64, ti: f64) -> f64 {
    correlation_pair(params).p_ssi(t1, t2, ti)
}

pub fn p_ssi_diag(params: &SourceParams, tau: f64) -> f64 {
    correlation_pair(params).p_ssi_diag(tau)
}

pub fn g2_c(params: &SourceParams, t1: f64, t2: f64, ti: f64) -> f64 {
    correlation_pair(params).g2_c(t1, t2, ti)
}

/// Heralding ratio (equals `g2_si(τ)`) and unconditioned signal-signal ratio
/// (equals `g2_ss_unconditional(τ)`), both computed from `P_ssi` alone.
pub fn limit_ratios(params: &SourceParams, tau: f64) -> (f64, f64) {
    correlation_pair(params).limit_ratios(tau)
}

/// `g2_si` averaged over each grid cell `[τ - h/2, τ + h/2]`.
///
/// Cell averaging keeps `∫ (g2_si - 1) dτ = 1/R` exact on any grid, including
/// grids far coarser than `Δt`, where the peak collapses into a single cell.
pub fn g2_si_curve(params: &SourceParams, grid: UniformGrid) -> Result<CorrelationCurve> {
    let pair = correlation_pair(params);
    let h = grid.step();
    CorrelationCurve::sample(grid, Unit::Dimensionless, |t| {
        pair.g2_si_mean(t - 0.5 * h, t + 0.5 * h)
    })
}

/// `P_ssi(t1, t2, 0)` averaged over each grid cell of the square `axis × axis`.
pub fn p_ssi_surface(params: &SourceParams, axis: UniformGrid) -> Result<CorrelationSurface> {
    p_ssi_surface_of(&correlation_pair(params), axis)
}

pub fn p_ssi_surface_of(pair: &CorrelationPair, axis: UniformGrid) -> Result<CorrelationSurface> {
    let n = axis.len();
    let cells = n.saturating_mul(n);
    if cells > crate::curve::MAX_SURFACE_CELLS {
        return Err(Error::GridTooLarge {
            cells,
            limit: crate::curve::MAX_SURFACE_CELLS,
        });
    }
    let h = axis.step();
    let mut values = Vec::with_capacity(cells);
    for i in 0..n {
        let (x0, x1) = (axis.point(i) - 0.5 * h, axis.point(i) + 0.5 * h);
        for j in 0..n {
            let (y0, y1) = (axis.point(j) - 0.5 * h, axis.point(j) + 0.5 * h);
            values.push(pair.p_ssi_mean(x0, x1, y0, y1));
        }
    }
    CorrelationSurface::new(axis, values, Unit::RateCubed)
}
