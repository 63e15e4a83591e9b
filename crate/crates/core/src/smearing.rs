//! Detector jitter and software coincidence windows as a moving-window
//! convolution.
//!
//! The combined response of a `±τc` coincidence window and a relative detector
//! jitter of full width `2τd` is the density of `U(-τc, τc) + U(-τd, τd)`: a
//! unit-area trapezoid with plateau `p = 1/(2τc)` on `|τ| < τc - τd`, linear
//! transitions of width `2τd`, and zero beyond `τc + τd`. Smeared observables
//! see only the integral of the sub-nanosecond correlation peaks, which is why
//! the plateau levels depend on `X = p / R` and nothing else.

use rayon::prelude::*;

use crate::curve::{CorrelationCurve, CorrelationSurface, Unit, MAX_SURFACE_CELLS};
use crate::error::{invalid, Error, Result};
use crate::grid::UniformGrid;
use crate::model::{correlation_pair, g2_si_curve, p_ssi_surface_of, SourceParams};

/// Finest transition (or window) a kernel grid must resolve, in grid steps.
pub const MIN_STEPS_PER_TRANSITION: f64 = 20.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseKernel {
    coincidence_halfwidth: f64,
    jitter: f64,
    step: f64,
    /// Cell averages of the density at offsets `(k - half_len) * step`.
    samples: Vec<f64>,
    plateau_height: f64,
}

/// CDF of `U(-a, a) + U(-b, b)` with `a > 0`, `b >= 0`.
fn window_cdf(a: f64, b: f64, x: f64) -> f64 {
    let uniform = |y: f64| ((y + a) / (2.0 * a)).clamp(0.0, 1.0);
    if b == 0.0 {
        return uniform(x);
    }
    // Primitive of the uniform CDF.
    let primitive = |y: f64| {
        if y < -a {
            0.0
        } else if y <= a {
            (y + a) * (y + a) / (4.0 * a)
        } else {
            y
        }
    };
    ((primitive(x + b) - primitive(x - b)) / (2.0 * b)).clamp(0.0, 1.0)
}

pub fn build_kernel(coincidence_halfwidth: f64, jitter: f64, step: f64) -> Result<ResponseKernel> {
    let (tc, td) = (coincidence_halfwidth, jitter);
    if !(tc > 0.0) || !tc.is_finite() {
        return Err(invalid(format!(
            "coincidence half-width must be positive, got {tc}"
        )));
    }
    if !(td >= 0.0) || !td.is_finite() {
        return Err(invalid(format!("jitter must be non-negative, got {td}")));
    }
    if !(step > 0.0) || !step.is_finite() {
        return Err(invalid(format!("grid step must be positive, got {step}")));
    }
    let finest = if td > 0.0 { td.min(tc) } else { tc };
    let limit = finest / MIN_STEPS_PER_TRANSITION;
    if step > limit * (1.0 + 1e-12) {
        return Err(Error::GridTooCoarse(format!(
            "step {step:e} s exceeds {limit:e} s needed to resolve the kernel"
        )));
    }

    let reach = tc + td;
    let half_len = (reach / step + 0.5).ceil() as usize;
    let samples = (0..=2 * half_len)
        .map(|k| {
            let x = (k as f64 - half_len as f64) * step;
            (window_cdf(tc, td, x + 0.5 * step) - window_cdf(tc, td, x - 0.5 * step)) / step
        })
        .collect();
    Ok(ResponseKernel {
        coincidence_halfwidth: tc,
        jitter: td,
        step,
        samples,
        plateau_height: 1.0 / (2.0 * tc.max(td)),
    })
}

impl ResponseKernel {
    pub fn coincidence_halfwidth(&self) -> f64 {
        self.coincidence_halfwidth
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn half_len(&self) -> usize {
        (self.samples.len() - 1) / 2
    }

    /// `p`: the plateau height, or the kernel maximum when `τc <= τd`.
    pub fn plateau_height(&self) -> f64 {
        self.plateau_height
    }

    pub fn has_plateau(&self) -> bool {
        self.coincidence_halfwidth > self.jitter
    }

    /// Continuous density at offset `tau`.
    pub fn density(&self, tau: f64) -> f64 {
        let (a, b) = (self.coincidence_halfwidth, self.jitter);
        if b == 0.0 {
            return if tau.abs() <= a { 1.0 / (2.0 * a) } else { 0.0 };
        }
        let overlap = ((tau + b).min(a) - (tau - b).max(-a)).max(0.0);
        overlap / (4.0 * a * b)
    }

    /// Discrete integral of the samples.
    pub fn area(&self) -> f64 {
        self.samples.iter().sum::<f64>() * self.step
    }

    fn weights(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s * self.step).collect()
    }
}

/// Convolves `values` with the kernel weights, extending the ends as constants.
fn convolve_into(values: &[f64], weights: &[f64], out: &mut [f64]) {
    let n = values.len() as isize;
    let half = (weights.len() / 2) as isize;
    for (j, o) in out.iter_mut().enumerate() {
        let j = j as isize;
        let mut acc = 0.0;
        for (k, w) in weights.iter().enumerate() {
            let idx = (j - (k as isize - half)).clamp(0, n - 1);
            acc += w * values[idx as usize];
        }
        *o = acc;
    }
}

pub fn smear_curve(curve: &CorrelationCurve, kernel: &ResponseKernel) -> Result<CorrelationCurve> {
    if !curve.grid().same_step(kernel.step) {
        return Err(Error::GridMismatch(format!(
            "curve step {:e} s differs from kernel step {:e} s",
            curve.grid().step(),
            kernel.step
        )));
    }
    let mut out = vec![0.0; curve.values().len()];
    convolve_into(curve.values(), &kernel.weights(), &mut out);
    CorrelationCurve::new(*curve.grid(), out, curve.unit())
}

fn check_surface(surface: &CorrelationSurface, kernel: &ResponseKernel) -> Result<()> {
    if !surface.axis().same_step(kernel.step) {
        return Err(Error::GridMismatch(format!(
            "surface step {:e} s differs from kernel step {:e} s",
            surface.axis().step(),
            kernel.step
        )));
    }
    let n = surface.axis().len();
    if n.saturating_mul(n) > MAX_SURFACE_CELLS {
        return Err(Error::GridTooLarge {
            cells: n.saturating_mul(n),
            limit: MAX_SURFACE_CELLS,
        });
    }
    Ok(())
}

/// Kernel-weighted combination of surface rows around row `i1`.
fn combine_rows(surface: &CorrelationSurface, weights: &[f64], i1: usize) -> Vec<f64> {
    let n = surface.axis().len() as isize;
    let half = (weights.len() / 2) as isize;
    let mut acc = vec![0.0; n as usize];
    for (k, w) in weights.iter().enumerate() {
        let src = (i1 as isize - (k as isize - half)).clamp(0, n - 1) as usize;
        for (a, v) in acc.iter_mut().zip(surface.row(src)) {
            *a += w * v;
        }
    }
    acc
}

/// Separable two-axis smearing of a `(t1 - ti, t2 - ti)` surface; rows are
/// processed in parallel with results independent of the thread count.
pub fn smear_surface(
    surface: &CorrelationSurface,
    kernel: &ResponseKernel,
) -> Result<CorrelationSurface> {
    check_surface(surface, kernel)?;
    let n = surface.axis().len();
    let weights = kernel.weights();
    let mut values = vec![0.0; n * n];
    values.par_chunks_mut(n).enumerate().for_each(|(i1, out)| {
        let combined = combine_rows(surface, &weights, i1);
        convolve_into(&combined, &weights, out);
    });
    CorrelationSurface::new(*surface.axis(), values, surface.unit())
}

/// Row `i1` of [`smear_surface`] without smearing the whole surface.
pub fn smear_surface_row(
    surface: &CorrelationSurface,
    kernel: &ResponseKernel,
    i1: usize,
) -> Result<CorrelationCurve> {
    check_surface(surface, kernel)?;
    if i1 >= surface.axis().len() {
        return Err(invalid(format!("row {i1} outside the surface")));
    }
    let weights = kernel.weights();
    let combined = combine_rows(surface, &weights, i1);
    let mut out = vec![0.0; combined.len()];
    convolve_into(&combined, &weights, &mut out);
    CorrelationCurve::new(*surface.axis(), out, surface.unit())
}

/// Closed-form plateau levels in terms of `X = p / R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateauPrediction {
    pub x: f64,
    pub g2si_plateau: f64,
    pub nssi_short: f64,
    pub nssi_long: f64,
    pub gbar2c_short: f64,
}

pub fn predict_plateaus(params: &SourceParams, kernel: &ResponseKernel) -> PlateauPrediction {
    let r = params.pair_rate();
    let x = kernel.plateau_height() / r;
    let r3 = r * r * r;
    PlateauPrediction {
        x,
        g2si_plateau: 1.0 + x,
        nssi_short: r3 * (1.0 + 2.0 * x),
        nssi_long: r3 * (1.0 + x),
        gbar2c_short: (1.0 + 2.0 * x) / ((1.0 + x) * (1.0 + x)),
    }
}

/// Smeared `g2_si` on `grid` (cell-averaged before smearing).
pub fn g2bar_si_analytic(
    params: &SourceParams,
    kernel: &ResponseKernel,
    grid: UniformGrid,
) -> Result<CorrelationCurve> {
    smear_curve(&g2_si_curve(params, grid)?, kernel)
}

/// Time-averaged conditioned coherence
/// `N_ssi(0, τ) R / (N_si(0) N_si(τ))` from the smeared `P_ssi` surface and the
/// smeared signal-idler rate `N_si = R² ḡ2_si`.
///
/// The surface is evaluated on `grid` padded by the kernel reach so that the
/// constant-extension edges never touch the returned values. `grid` must
/// share the kernel step and contain zero delay.
pub fn gbar2c_analytic(
    params: &SourceParams,
    kernel: &ResponseKernel,
    grid: UniformGrid,
) -> Result<CorrelationCurve> {
    if !grid.same_step(kernel.step) {
        return Err(Error::GridMismatch(format!(
            "delay grid step {:e} s differs from kernel step {:e} s",
            grid.step(),
            kernel.step
        )));
    }
    if grid.index_of(0.0).is_none() {
        return Err(Error::GridMismatch("delay grid must contain zero".into()));
    }
    let support = params.shape().support() * params.coherence_time();
    let pad = kernel.half_len() + (support / grid.step()).ceil() as usize + 2;
    let axis = grid.extended(pad);
    let zero = axis.index_of(0.0).expect("padded grid keeps zero");

    let pair = correlation_pair(params);
    let surface = p_ssi_surface_of(&pair, axis)?;
    let nssi = smear_surface_row(&surface, kernel, zero)?;
    let g2bar = g2bar_si_analytic(params, kernel, axis)?;

    let r = params.pair_rate();
    let nsi = |i: usize| r * r * g2bar.values()[i];
    let nsi0 = nsi(zero);
    let values = (0..grid.len())
        .map(|i| nssi.values()[i + pad] * r / (nsi0 * nsi(i + pad)))
        .collect();
    CorrelationCurve::new(grid, values, Unit::Dimensionless)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{p_ssi_surface, Shape};

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn fast_source() -> SourceParams {
        SourceParams::with_mean_pairs(43e6, 1.4e-5, Shape::Box).unwrap()
    }

    /// Simpson quadrature of the continuous density, split at the kinks.
    fn quadrature_area(k: &ResponseKernel) -> f64 {
        let (a, b) = (k.coincidence_halfwidth(), k.jitter());
        let mut pts = vec![-(a + b), -(a - b).abs(), (a - b).abs(), a + b];
        pts.dedup();
        let mut total = 0.0;
        for w in pts.windows(2) {
            let n = 1000;
            let h = (w[1] - w[0]) / n as f64;
            let mut s = k.density(w[0] + 1e-9 * h) + k.density(w[1] - 1e-9 * h);
            for i in 1..n {
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * k.density(w[0] + i as f64 * h);
            }
            total += s * h / 3.0;
        }
        total
    }

    #[test]
    fn zero_jitter_kernel_is_a_box() {
        let k = build_kernel(1.5e-9, 0.0, 1.5e-9 / 40.0).unwrap();
        assert!(rel(k.plateau_height(), 1.0 / 3e-9) < 1e-14);
        assert_eq!(k.density(1.49e-9), 1.0 / 3e-9);
        assert_eq!(k.density(1.51e-9), 0.0);
        assert!((k.area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trapezoid_geometry() {
        let k = build_kernel(1.5e-9, 0.35e-9, 0.35e-9 / 20.0).unwrap();
        let p = 1.0 / 3e-9;
        assert!(rel(k.density(0.0), p) < 1e-12);
        assert!(rel(k.density(1.149e-9), p) < 1e-12);
        assert!(k.density(1.16e-9) < p);
        assert!(k.density(1.84e-9) > 0.0);
        assert_eq!(k.density(1.86e-9), 0.0);
        // Linear transition: midpoint at half height.
        assert!(rel(k.density(1.5e-9), 0.5 * p) < 1e-12);
        assert!((k.area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kernel_height_and_area_by_quadrature() {
        let k = build_kernel(5e-9, 1e-9, 0.05e-9).unwrap();
        assert!(rel(k.plateau_height(), 1e8) < 1e-14);
        assert!((quadrature_area(&k) - 1.0).abs() < 1e-9);
        assert!((k.area() - 1.0).abs() < 1e-12);
        // Interior samples equal the plateau height.
        let mid = k.half_len();
        assert!(rel(k.samples()[mid], 1e8) < 1e-12);
    }

    #[test]
    fn generalised_plateau_when_jitter_dominates() {
        let k = build_kernel(0.5e-9, 1e-9, 0.02e-9).unwrap();
        assert!(!k.has_plateau());
        assert!(rel(k.plateau_height(), 0.5e9) < 1e-14);
        assert!(rel(k.density(0.0), k.plateau_height()) < 1e-12);
        assert!((k.area() - 1.0).abs() < 1e-12);
        assert!((quadrature_area(&k) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn coarse_grid_is_rejected() {
        assert!(matches!(
            build_kernel(1.5e-9, 0.35e-9, 0.1e-9),
            Err(Error::GridTooCoarse(_))
        ));
        assert!(matches!(
            build_kernel(1.5e-9, 0.0, 0.1e-9),
            Err(Error::GridTooCoarse(_))
        ));
        assert!(build_kernel(0.0, 0.0, 1e-12).is_err());
        assert!(build_kernel(1e-9, -1e-12, 1e-12).is_err());
    }

    #[test]
    fn smeared_plateau_matches_x() {
        let p = fast_source();
        let tc = 1.5e-9;
        let k = build_kernel(tc, 0.0, tc / 40.0).unwrap();
        let grid = UniformGrid::symmetric(3e-9, k.step()).unwrap();
        let s = g2bar_si_analytic(&p, &k, grid).unwrap();
        let x = 1.0 / (2.0 * 43e6 * tc);
        assert!((x - 7.752).abs() < 1e-3);
        assert!(rel(s.value_at(0.0).unwrap(), 1.0 + x) < 1e-9);
        assert!(rel(s.value_at(20.0 * k.step()).unwrap(), 1.0 + x) < 1e-9);
        assert!(rel(s.value_at(60.0 * k.step()).unwrap(), 1.0) < 1e-12);
    }

    #[test]
    fn constant_curve_is_unchanged() {
        let k = build_kernel(2e-9, 0.5e-9, 0.025e-9).unwrap();
        let g = UniformGrid::symmetric(6e-9, k.step()).unwrap();
        let c = CorrelationCurve::sample(g, Unit::Dimensionless, |_| 1.0).unwrap();
        let s = smear_curve(&c, &k).unwrap();
        assert!(s.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let k = build_kernel(2e-9, 0.5e-9, 0.025e-9).unwrap();
        let g = UniformGrid::symmetric(6e-9, 0.02e-9).unwrap();
        let c = CorrelationCurve::sample(g, Unit::Dimensionless, |_| 1.0).unwrap();
        assert!(matches!(smear_curve(&c, &k), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn triangle_gives_the_same_plateau() {
        let tc = 1.5e-9;
        let k = build_kernel(tc, 0.0, tc / 40.0).unwrap();
        let grid = UniformGrid::symmetric(3e-9, k.step()).unwrap();
        let b = g2bar_si_analytic(&fast_source(), &k, grid).unwrap();
        let t = g2bar_si_analytic(&fast_source().with_shape(Shape::Triangle), &k, grid).unwrap();
        let x = 1.0 / (2.0 * 43e6 * tc);
        assert!(rel(t.value_at(0.0).unwrap(), 1.0 + x) < 1e-9);
        assert!(rel(t.value_at(0.0).unwrap(), b.value_at(0.0).unwrap()) < 1e-12);
    }

    #[test]
    fn excess_integral_is_conserved() {
        for shape in [Shape::Box, Shape::Triangle] {
            let p = SourceParams::new(2e7, 1e-9, shape).unwrap();
            let k = build_kernel(5e-9, 1e-9, 0.05e-9).unwrap();
            let grid = UniformGrid::symmetric(10e-9, k.step()).unwrap();
            let raw = g2_si_curve(&p, grid).unwrap();
            let s = smear_curve(&raw, &k).unwrap();
            assert!(rel(raw.excess_integral(1.0), 1.0 / 2e7) < 1e-9);
            assert!(rel(s.excess_integral(1.0), 1.0 / 2e7) < 1e-6, "{shape}");
        }
    }

    #[test]
    fn shape_independence_with_jitter() {
        // The residual shape term peaks near |τ| = τc + τd at about X·Δt/(48τd).
        let p = SourceParams::new(2e7, 1e-9, Shape::Box).unwrap();
        let dt = p.coherence_time();
        let tc = 100.0 * dt;
        let k = build_kernel(tc, tc / 5.0, dt / 4.0).unwrap();
        let grid = UniformGrid::symmetric(2.0 * tc, k.step()).unwrap();
        let b = g2bar_si_analytic(&p, &k, grid).unwrap();
        let t = g2bar_si_analytic(&p.with_shape(Shape::Triangle), &k, grid).unwrap();
        let worst = b
            .values()
            .iter()
            .zip(t.values())
            .map(|(x, y)| rel(*y, *x))
            .fold(0.0, f64::max);
        assert!(worst < 1e-3, "{worst}");
    }

    #[test]
    fn plateau_prediction_examples() {
        let tc = 1.5e-9;
        let k = build_kernel(tc, 0.0, tc / 40.0).unwrap();
        let pp = predict_plateaus(&fast_source(), &k);
        assert!((pp.x - 7.752).abs() < 1e-3);
        assert!((pp.gbar2c_short - 16.504 / 76.597).abs() < 1e-4);
        assert!((pp.gbar2c_short - 0.2155).abs() < 1e-4);
        let approx = 4.0 * 43e6 * tc;
        assert!((approx - 0.258).abs() < 1e-12);

        let desk = SourceParams::new(2e7, 1e-9, Shape::Box).unwrap();
        let k = build_kernel(5e-9, 1e-9, 0.05e-9).unwrap();
        let pp = predict_plateaus(&desk, &k);
        assert!(rel(pp.x, 5.0) < 1e-12);
        assert!(rel(pp.g2si_plateau, 6.0) < 1e-12);
        assert!(rel(pp.gbar2c_short, 11.0 / 36.0) < 1e-12);
        assert!(rel(pp.nssi_short, 8e21 * 11.0) < 1e-12);
        assert!(rel(pp.nssi_long, 8e21 * 6.0) < 1e-12);

        // X -> infinity: gbar2c_short -> 2 / X.
        let faint = SourceParams::new(1.0, 1e-12, Shape::Box).unwrap();
        let pp = predict_plateaus(&faint, &k);
        assert!(rel(pp.gbar2c_short, 2.0 / pp.x) < 1e-7);
    }

    #[test]
    fn surface_levels() {
        // Floor, ridges and center of the smeared P_ssi surface.
        let p = SourceParams::with_mean_pairs(43e6, 1.4e-5, Shape::Box).unwrap();
        let dt = p.coherence_time();
        let tc = 100.0 * dt;
        let k = build_kernel(tc, tc / 5.0, dt).unwrap();
        // Asymptotic points keep |t1 - t2| beyond the smeared diagonal reach.
        let axis = UniformGrid::symmetric(300.0 * dt, dt).unwrap();
        let smeared = smear_surface(&p_ssi_surface(&p, axis).unwrap(), &k).unwrap();
        let pp = predict_plateaus(&p, &k);
        let r3 = p.pair_rate().powi(3);
        let at = |a: f64, b: f64| smeared.value_at(a * dt, b * dt).unwrap();
        assert!(rel(at(260.0, -260.0), r3) < 1e-6);
        assert!(rel(at(0.0, -260.0), pp.nssi_long) < 1e-6);
        assert!(rel(at(260.0, 0.0), pp.nssi_long) < 1e-6);
        let ridge = at(0.0, -260.0) - r3;
        let center = at(0.0, 0.0) - r3;
        assert!((center / ridge - 2.0).abs() < 0.01, "{}", center / ridge);
        assert!((center - 2.0 * ridge).abs() / ridge <= 5.0 * dt / tc);
        // Axis swap symmetry survives smearing.
        assert!(rel(at(30.0, -70.0), at(-70.0, 30.0)) < 1e-12);
    }

    #[test]
    fn surface_row_matches_full_smear() {
        let p = SourceParams::new(2e7, 1e-9, Shape::Box).unwrap();
        let k = build_kernel(2e-9, 0.5e-9, 0.025e-9).unwrap();
        let axis = UniformGrid::symmetric(4e-9, k.step()).unwrap();
        let surface = p_ssi_surface(&p, axis).unwrap();
        let full = smear_surface(&surface, &k).unwrap();
        let i = axis.index_of(0.0).unwrap();
        let row = smear_surface_row(&surface, &k, i).unwrap();
        assert_eq!(row.values(), full.row(i));
    }

    #[test]
    fn gbar2c_analytic_extremes() {
        // Δt far below τc: the closed form is reached.
        let p = SourceParams::new(2e7, 1e-12, Shape::Box).unwrap();
        let k = build_kernel(5e-9, 1e-9, 0.05e-9).unwrap();
        let grid = UniformGrid::symmetric(16e-9, k.step()).unwrap();
        let g = gbar2c_analytic(&p, &k, grid).unwrap();
        assert!(rel(g.value_at(0.0).unwrap(), 11.0 / 36.0) < 1e-3);
        assert!(rel(g.value_at(3.5e-9).unwrap(), 11.0 / 36.0) < 1e-3);
        // The smeared diagonal term still reaches out to 2(τc + τd).
        assert!(g.value_at(8e-9).unwrap() > 1.0);
        assert!(rel(g.value_at(13e-9).unwrap(), 1.0) < 1e-9);
        assert!(rel(g.value_at(-13e-9).unwrap(), 1.0) < 1e-9);
    }

    #[test]
    fn gbar2c_analytic_finite_coherence_time() {
        // With Δt = τc/5 the central peak and the thermal diagonal add
        // 0.75 X Δt/τc + μ X (1 - τd/(3τc)) to N_ssi(0)/R³ on top of 1 + 2X.
        let p = SourceParams::new(2e7, 1e-9, Shape::Box).unwrap();
        let (tc, td) = (5e-9, 1e-9);
        let k = build_kernel(tc, td, 0.05e-9).unwrap();
        let grid = UniformGrid::symmetric(10e-9, k.step()).unwrap();
        let g = gbar2c_analytic(&p, &k, grid).unwrap();
        let (x, mu) = (5.0, 0.02);
        let expected = (1.0 + 2.0 * x + 0.75 * x * 1e-9 / tc + mu * x * (1.0 - td / (3.0 * tc)))
            / ((1.0 + x) * (1.0 + x));
        assert!(
            rel(g.value_at(0.0).unwrap(), expected) < 2e-3,
            "{}",
            g.value_at(0.0).unwrap()
        );
    }

    #[test]
    fn gbar2c_steps_at_tc_without_jitter() {
        let p = SourceParams::new(2e7, 1e-12, Shape::Box).unwrap();
        let tc = 5e-9;
        let k = build_kernel(tc, 0.0, tc / 40.0).unwrap();
        let grid = UniformGrid::symmetric(12e-9, k.step()).unwrap();
        let g = gbar2c_analytic(&p, &k, grid).unwrap();
        let short = g.value_at(0.0).unwrap();
        let edge = g.value_at(tc).unwrap();
        assert!(edge > short && edge < 1.0, "{short} {edge}");
        let zero = grid.index_of(0.0).unwrap();
        let edge_ix = grid.index_of(tc).unwrap();
        let rising = &g.values()[zero..=edge_ix];
        // The plateau carries only a slow diagonal drift; the step sits at τc.
        assert!(rising[..rising.len() - 1]
            .iter()
            .all(|&v| rel(v, short) < 1e-5));
        // Between τc and 2τc only the positive diagonal tail remains.
        let far = grid.index_of(2.0 * tc).unwrap();
        assert!(g.values()[edge_ix + 2..far].iter().all(|&v| v >= 1.0));
        assert!(rel(g.value_at(11e-9).unwrap(), 1.0) < 1e-12);
    }
}
