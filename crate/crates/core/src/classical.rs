//! Area-preserving kicked maps on the cylinder and torus.
//!
//! The one-step map is `J' = J + F(theta)`, `theta' = theta + J' + drift`
//! with the angle reduced into `[0, 2pi)` by a floor-based modulo.

use crate::error::{Error, Result};
use crate::rng;
use crate::series::TimeSeries;
use crate::special::bessel_j;
use crate::stats::{self, Neumaier};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Resonance-overlap estimate of the critical kick strength.
pub const CHIRIKOV_OVERLAP_K: f64 = PI * PI / 4.0;
/// Accepted critical value for the breakup of the last spanning torus.
pub const CRITICAL_K: f64 = 0.971_635;
/// Half-width of the excluded interval around the singular point of
/// [`KickPotential::PowerLaw`] and [`KickPotential::Log`].
pub const SINGULAR_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub theta: f64,
    #[serde(rename = "J")]
    pub j: f64,
}

impl PhasePoint {
    pub fn new(theta: f64, j: f64) -> Self {
        PhasePoint { theta, j }
    }
}

/// Floor-based reduction into `[0, 2pi)`.
#[inline]
pub fn wrap_angle(theta: f64) -> f64 {
    let r = theta - TAU * (theta / TAU).floor();
    // rounding can push r onto 2pi exactly
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Reduction into `[-pi, pi)`, used by potentials singular at zero.
#[inline]
pub fn wrap_centered(theta: f64) -> f64 {
    wrap_angle(theta + PI) - PI
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KickPotential {
    /// `V = k cos(theta)`
    Cosine { k: f64 },
    /// `V = k cos(theta + phase)`
    CosinePhase { k: f64, phase: f64 },
    /// `V = -k (theta - pi)^2 / 2` on `[0, 2pi)`
    Sawtooth { k: f64 },
    /// `V = k |theta|^alpha` on `[-pi, pi)`, `alpha` in `[-1, 1]`
    PowerLaw { k: f64, alpha: f64 },
    /// `V = k ln|theta|` on `[-pi, pi)`
    Log { k: f64 },
    /// `V = k (1 - 2|theta|/pi)` on `[-pi, pi)`; odd under `theta -> theta + pi`
    PiecewiseLinear { k: f64 },
}

impl KickPotential {
    pub fn cosine(k: f64) -> Self {
        KickPotential::Cosine { k }
    }

    pub fn power_law(k: f64, alpha: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&alpha) {
            return Err(Error::domain("alpha", format!("{alpha} outside [-1, 1]")));
        }
        Ok(KickPotential::PowerLaw { k, alpha })
    }

    pub fn strength(&self) -> f64 {
        match *self {
            KickPotential::Cosine { k }
            | KickPotential::CosinePhase { k, .. }
            | KickPotential::Sawtooth { k }
            | KickPotential::PowerLaw { k, .. }
            | KickPotential::Log { k }
            | KickPotential::PiecewiseLinear { k } => k,
        }
    }

    pub fn with_strength(&self, k: f64) -> Self {
        let mut p = *self;
        match &mut p {
            KickPotential::Cosine { k: s }
            | KickPotential::CosinePhase { k: s, .. }
            | KickPotential::Sawtooth { k: s }
            | KickPotential::PowerLaw { k: s, .. }
            | KickPotential::Log { k: s }
            | KickPotential::PiecewiseLinear { k: s } => *s = k,
        }
        p
    }

    fn guarded(theta: f64) -> f64 {
        let x = wrap_centered(theta);
        if x.abs() < SINGULAR_GUARD {
            if x < 0.0 {
                -SINGULAR_GUARD
            } else {
                SINGULAR_GUARD
            }
        } else {
            x
        }
    }

    pub fn value(&self, theta: f64) -> f64 {
        match *self {
            KickPotential::Cosine { k } => k * theta.cos(),
            KickPotential::CosinePhase { k, phase } => k * (theta + phase).cos(),
            KickPotential::Sawtooth { k } => {
                let x = wrap_angle(theta) - PI;
                -0.5 * k * x * x
            }
            KickPotential::PowerLaw { k, alpha } => k * Self::guarded(theta).abs().powf(alpha),
            KickPotential::Log { k } => k * Self::guarded(theta).abs().ln(),
            KickPotential::PiecewiseLinear { k } => {
                let x = wrap_centered(theta);
                k * (1.0 - 2.0 * x.abs() / PI)
            }
        }
    }

    /// `F = -dV/dtheta`.
    pub fn force(&self, theta: f64) -> f64 {
        match *self {
            KickPotential::Cosine { k } => k * theta.sin(),
            KickPotential::CosinePhase { k, phase } => k * (theta + phase).sin(),
            KickPotential::Sawtooth { k } => k * (wrap_angle(theta) - PI),
            KickPotential::PowerLaw { k, alpha } => {
                let x = Self::guarded(theta);
                -k * alpha * x.abs().powf(alpha - 1.0) * x.signum()
            }
            KickPotential::Log { k } => -k / Self::guarded(theta),
            KickPotential::PiecewiseLinear { k } => {
                let x = wrap_centered(theta);
                if x < 0.0 {
                    -2.0 * k / PI
                } else {
                    2.0 * k / PI
                }
            }
        }
    }

    /// `dF/dtheta` away from kinks.
    pub fn force_derivative(&self, theta: f64) -> f64 {
        match *self {
            KickPotential::Cosine { k } => k * theta.cos(),
            KickPotential::CosinePhase { k, phase } => k * (theta + phase).cos(),
            KickPotential::Sawtooth { k } => k,
            KickPotential::PowerLaw { k, alpha } => {
                let x = Self::guarded(theta).abs();
                -k * alpha * (alpha - 1.0) * x.powf(alpha - 2.0)
            }
            KickPotential::Log { k } => {
                let x = Self::guarded(theta);
                k / (x * x)
            }
            KickPotential::PiecewiseLinear { .. } => 0.0,
        }
    }

    /// Even under `theta -> -theta`.
    pub fn is_even(&self) -> bool {
        !matches!(self, KickPotential::CosinePhase { phase, .. } if phase.sin().abs() > 1e-15)
    }
}

fn check_finite(p: PhasePoint, pot: &KickPotential) -> Result<PhasePoint> {
    if p.j.is_finite() && p.theta.is_finite() {
        Ok(p)
    } else {
        let param = match pot {
            KickPotential::PowerLaw { .. } => "alpha",
            _ => "k",
        };
        Err(Error::domain(param, format!("non-finite map output {p:?} for {pot:?}")))
    }
}

/// Kick then free rotation, angle left unreduced.
#[inline]
pub fn step_unwrapped(p: PhasePoint, pot: &KickPotential, drift: f64) -> PhasePoint {
    let j = p.j + pot.force(p.theta);
    PhasePoint {
        theta: p.theta + j + drift,
        j,
    }
}

pub fn step_map(p: PhasePoint, pot: &KickPotential, drift: Option<f64>) -> Result<PhasePoint> {
    let mut q = step_unwrapped(p, pot, drift.unwrap_or(0.0));
    q.theta = wrap_angle(q.theta);
    check_finite(q, pot)
}

/// Exact inverse of [`step_map`].
pub fn inverse_step(p: PhasePoint, pot: &KickPotential, drift: Option<f64>) -> PhasePoint {
    let theta = wrap_angle(p.theta - p.j - drift.unwrap_or(0.0));
    PhasePoint {
        theta,
        j: p.j - pot.force(theta),
    }
}

/// Analytic tangent map `d(J', theta') / d(J, theta)` as `[[a, b], [c, d]]`
/// acting on `(dJ, dtheta)`.
pub fn tangent(p: PhasePoint, pot: &KickPotential) -> [[f64; 2]; 2] {
    let f = pot.force_derivative(p.theta);
    [[1.0, f], [1.0, 1.0 + f]]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    Cylinder,
    /// J reduced modulo `2 pi cells` into `[-pi cells, pi cells)`.
    Torus { cells: u32 },
}

impl Geometry {
    #[inline]
    pub fn reduce(&self, j: f64) -> f64 {
        match *self {
            Geometry::Cylinder => j,
            Geometry::Torus { cells } => {
                let p = TAU * cells as f64;
                j - p * ((j + 0.5 * p) / p).floor()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub points: Vec<PhasePoint>,
    pub seed: u64,
    pub geometry: Geometry,
}

impl Ensemble {
    /// `n` points with uniform angles and a common momentum `j0`. The angle
    /// of point `i` is drawn from stream `i` of `seed`.
    pub fn uniform_theta(n: usize, j0: f64, seed: u64) -> Self {
        let points = (0..n)
            .map(|i| {
                let mut r = rng::stream(seed, i as u64);
                PhasePoint::new(TAU * rng::unit(&mut r), j0)
            })
            .collect();
        Ensemble {
            points,
            seed,
            geometry: Geometry::Cylinder,
        }
    }

    /// Independent Gaussian samples in both coordinates.
    pub fn gaussian(n: usize, center: PhasePoint, sigma_theta: f64, sigma_j: f64, seed: u64) -> Self {
        let points = (0..n)
            .map(|i| {
                let mut r = rng::stream(seed, i as u64);
                let th = center.theta + sigma_theta * rng::normal(&mut r);
                let j = center.j + sigma_j * rng::normal(&mut r);
                PhasePoint::new(wrap_angle(th), j)
            })
            .collect();
        Ensemble {
            points,
            seed,
            geometry: Geometry::Cylinder,
        }
    }

    pub fn with_geometry(mut self, geometry: Geometry) -> Self {
        self.geometry = geometry;
        self
    }
}

/// Moments of an ensemble evolution plus optional snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleRun {
    /// Columns `t, meanJ, varJ`; row 0 is the initial ensemble.
    pub series: TimeSeries,
    pub snapshots: Vec<(usize, Vec<PhasePoint>)>,
    pub final_points: Vec<PhasePoint>,
}

pub fn evolve_ensemble(
    e: &Ensemble,
    pot: &KickPotential,
    steps: usize,
    drift: Option<f64>,
    snapshot_at: &[usize],
) -> Result<EnsembleRun> {
    if e.points.is_empty() {
        return Err(Error::usage("empty ensemble"));
    }
    if steps == 0 {
        return Err(Error::usage("steps must be >= 1"));
    }
    let drift = drift.unwrap_or(0.0);
    let n = e.points.len();
    let chunk = stats::REDUCE_CHUNK;
    let geometry = e.geometry;

    struct Chunk {
        s1: Vec<Neumaier>,
        s2: Vec<Neumaier>,
        points: Vec<PhasePoint>,
        snaps: Vec<Vec<PhasePoint>>,
        bad: Option<PhasePoint>,
    }

    let chunks: Vec<Chunk> = e
        .points
        .par_chunks(chunk)
        .map(|pts| {
            let mut s1 = vec![Neumaier::default(); steps + 1];
            let mut s2 = vec![Neumaier::default(); steps + 1];
            let mut snaps = vec![Vec::with_capacity(pts.len()); snapshot_at.len()];
            let mut out = Vec::with_capacity(pts.len());
            let mut bad = None;
            for &p0 in pts {
                let mut p = p0;
                p.j = geometry.reduce(p.j);
                s1[0].add(p.j);
                s2[0].add(p.j * p.j);
                for t in 1..=steps {
                    let mut q = step_unwrapped(p, pot, drift);
                    q.theta = wrap_angle(q.theta);
                    q.j = geometry.reduce(q.j);
                    if !q.j.is_finite() && bad.is_none() {
                        bad = Some(p);
                    }
                    p = q;
                    s1[t].add(p.j);
                    s2[t].add(p.j * p.j);
                    for (k, &ts) in snapshot_at.iter().enumerate() {
                        if ts == t {
                            snaps[k].push(p);
                        }
                    }
                }
                out.push(p);
            }
            Chunk {
                s1,
                s2,
                points: out,
                snaps,
                bad,
            }
        })
        .collect();

    if let Some(p) = chunks.iter().find_map(|c| c.bad) {
        return Err(Error::domain(
            "k",
            format!("non-finite momentum reached from {p:?} under {pot:?}"),
        ));
    }

    let mut series = TimeSeries::new(&["t", "meanJ", "varJ"]);
    let nf = n as f64;
    for t in 0..=steps {
        let mut a = Neumaier::default();
        let mut b = Neumaier::default();
        for c in &chunks {
            a.merge(&c.s1[t]);
            b.merge(&c.s2[t]);
        }
        let m = a.value() / nf;
        let var = (b.value() / nf - m * m).max(0.0);
        series.push(vec![t as f64, m, var]);
    }
    let mut snapshots: Vec<(usize, Vec<PhasePoint>)> =
        snapshot_at.iter().map(|&t| (t, Vec::with_capacity(n))).collect();
    let mut final_points = Vec::with_capacity(n);
    for c in chunks {
        for (k, s) in c.snaps.into_iter().enumerate() {
            snapshots[k].1.extend(s);
        }
        final_points.extend(c.points);
    }
    Ok(EnsembleRun {
        series,
        snapshots,
        final_points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionFit {
    pub d: f64,
    /// Slope standard error inflated by the residual lag-1 autocorrelation.
    pub err: f64,
    pub r2: f64,
    pub points: usize,
}

/// Slope of `varJ` against `t` within `[t_lo, t_hi]`.
pub fn diffusion_coefficient(series: &TimeSeries, window: (f64, f64)) -> Result<DiffusionFit> {
    let t = series.column("t").ok_or_else(|| Error::usage("series lacks column t"))?;
    let v = series
        .column("varJ")
        .ok_or_else(|| Error::usage("series lacks column varJ"))?;
    let (x, y): (Vec<f64>, Vec<f64>) = t
        .iter()
        .zip(&v)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(a, b)| (*a, *b))
        .unzip();
    if x.len() < 50 {
        return Err(Error::Fit {
            msg: format!("{} points in window, need >= 50", x.len()),
            residual: f64::NAN,
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit {
            msg: "non-finite variance".into(),
            residual: f64::NAN,
        });
    }
    if y.iter().all(|&v| v == y[0]) {
        return Ok(DiffusionFit {
            d: 0.0,
            err: 0.0,
            r2: 1.0,
            points: x.len(),
        });
    }
    let fit = stats::fit_line(&x, &y).ok_or_else(|| Error::Fit {
        msg: "degenerate window".into(),
        residual: f64::NAN,
    })?;
    let resid: Vec<f64> = x
        .iter()
        .zip(&y)
        .map(|(a, b)| b - fit.intercept - fit.slope * a)
        .collect();
    let rho = stats::lag1_autocorrelation(&resid).clamp(-0.99, 0.99);
    let err = fit.slope_err * ((1.0 + rho) / (1.0 - rho)).sqrt();
    if fit.slope < 0.0 && fit.slope.abs() > 3.0 * err {
        return Err(Error::Fit {
            msg: format!("variance decreases (slope {:.3e})", fit.slope),
            residual: fit.rms,
        });
    }
    Ok(DiffusionFit {
        d: fit.slope,
        err,
        r2: fit.r2,
        points: x.len(),
    })
}

/// Random-phase estimate with the leading correlation correction,
/// `(K^2/2)(1 - J_2(K))`.
pub fn diffusion_estimate(k: f64) -> f64 {
    0.5 * k * k * (1.0 - bessel_j(2, k))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub lambda: f64,
    /// Standard error across ten equal blocks of the measured window.
    pub block_err: f64,
    /// Set when the estimate is indistinguishable from zero, as for an
    /// orbit on a regular island.
    pub likely_regular: bool,
}

/// Benettin estimate of the largest Lyapunov exponent with renormalisation
/// every step.
pub fn max_lyapunov(
    pot: &KickPotential,
    p0: PhasePoint,
    steps: usize,
    transient: usize,
) -> Result<LyapunovEstimate> {
    if steps < 10 || steps <= transient {
        return Err(Error::usage("need steps > transient and steps >= 10"));
    }
    let mut p = p0;
    let mut v = [1.0f64, 1.0];
    let norm = (v[0] * v[0] + v[1] * v[1]).sqrt();
    v = [v[0] / norm, v[1] / norm];
    let measured = steps - transient;
    let blocks = 10usize;
    let block_len = (measured / blocks).max(1);
    let mut block_sums = vec![Neumaier::default(); blocks];
    let mut total = Neumaier::default();
    for t in 0..steps {
        let m = tangent(p, pot);
        let w = [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]];
        let g = (w[0] * w[0] + w[1] * w[1]).sqrt();
        v = [w[0] / g, w[1] / g];
        p = step_map(p, pot, None)?;
        if t >= transient {
            let l = g.ln();
            total.add(l);
            let b = ((t - transient) / block_len).min(blocks - 1);
            block_sums[b].add(l);
        }
    }
    let lambda = total.value() / measured as f64;
    let counts: Vec<usize> = (0..blocks)
        .map(|b| {
            if b + 1 < blocks {
                block_len
            } else {
                measured - block_len * (blocks - 1)
            }
        })
        .collect();
    let means: Vec<f64> = block_sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s.value() / c.max(1) as f64)
        .collect();
    let mm = stats::mean(&means);
    let var = means.iter().map(|x| (x - mm) * (x - mm)).sum::<f64>() / (blocks - 1) as f64;
    let block_err = (var / blocks as f64).sqrt();
    let likely_regular = lambda.abs() < 1e-3 || lambda < 2.0 * block_err;
    Ok(LyapunovEstimate {
        lambda,
        block_err,
        likely_regular,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectionCloud {
    pub seed_id: usize,
    /// Samples with J reduced onto the torus.
    pub points: Vec<PhasePoint>,
    /// Largest `|J - J0|` along the unreduced orbit.
    pub max_excursion: f64,
}

pub fn poincare_section(
    pot: &KickPotential,
    seeds: &[PhasePoint],
    steps: usize,
    geometry: Geometry,
) -> Result<Vec<SectionCloud>> {
    if matches!(geometry, Geometry::Cylinder) {
        return Err(Error::usage("Poincare sections require torus geometry"));
    }
    seeds
        .par_iter()
        .enumerate()
        .map(|(id, &s)| {
            let mut p = s;
            let mut points = Vec::with_capacity(steps);
            let mut exc: f64 = 0.0;
            for _ in 0..steps {
                p = step_map(p, pot, None)?;
                exc = exc.max((p.j - s.j).abs());
                points.push(PhasePoint::new(p.theta, geometry.reduce(p.j)));
            }
            Ok(SectionCloud {
                seed_id: id,
                points,
                max_excursion: exc,
            })
        })
        .collect()
}

/// Section clouds as `seed_id, theta, J` rows.
pub fn section_table(clouds: &[SectionCloud]) -> TimeSeries {
    let mut s = TimeSeries::new(&["seed_id", "theta", "J"]);
    for c in clouds {
        for p in &c.points {
            s.push(vec![c.seed_id as f64, p.theta, p.j]);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_point_and_free_rotor() {
        let p = step_map(PhasePoint::new(0.0, 0.0), &KickPotential::cosine(5.0), None).unwrap();
        assert_eq!(p, PhasePoint::new(0.0, 0.0));
        let q = step_map(PhasePoint::new(1.0, 2.5), &KickPotential::cosine(0.0), None).unwrap();
        assert!((q.theta - 3.5).abs() < 1e-15 && q.j == 2.5);
    }

    #[test]
    fn direct_arithmetic_example() {
        let p = step_map(PhasePoint::new(PI / 2.0, 0.0), &KickPotential::cosine(1.0), Some(0.0)).unwrap();
        assert!((p.j - 1.0).abs() < 1e-15);
        assert!((p.theta - (PI / 2.0 + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn wrap_is_half_open() {
        for x in [-1e-18, -TAU, TAU, 3.0 * TAU + 0.5, -0.25] {
            let w = wrap_angle(x);
            assert!((0.0..TAU).contains(&w), "{x} -> {w}");
        }
    }

    #[test]
    fn overlap_constant_exceeds_critical() {
        assert!(CHIRIKOV_OVERLAP_K > CRITICAL_K);
    }

    #[test]
    fn power_law_rejects_alpha() {
        assert!(KickPotential::power_law(1.0, 1.5).is_err());
    }

    #[test]
    fn piecewise_linear_is_odd_under_half_shift() {
        let v = KickPotential::PiecewiseLinear { k: 1.0 };
        for i in 0..50 {
            let th = -PI + i as f64 * 0.1;
            assert!((v.value(th) + v.value(th + PI)).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_ensemble_is_usage_error() {
        let e = Ensemble {
            points: vec![],
            seed: 0,
            geometry: Geometry::Cylinder,
        };
        assert!(matches!(
            evolve_ensemble(&e, &KickPotential::cosine(1.0), 5, None, &[]),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn zero_kick_keeps_variance() {
        let e = Ensemble::gaussian(500, PhasePoint::new(1.0, 0.0), 0.3, 0.7, 3);
        let run = evolve_ensemble(&e, &KickPotential::cosine(0.0), 60, None, &[]).unwrap();
        let v = run.series.column("varJ").unwrap();
        assert!(v.iter().all(|x| (x - v[0]).abs() < 1e-12));
        let d = diffusion_coefficient(&run.series, (0.0, 60.0)).unwrap();
        assert!(d.d.abs() < 1e-12);
    }

    #[test]
    fn zero_kick_lyapunov_vanishes() {
        let l = max_lyapunov(&KickPotential::cosine(0.0), PhasePoint::new(0.3, 0.2), 5000, 1000).unwrap();
        // tangent vectors of a shear grow linearly, so lambda ~ ln(t)/t
        assert!(l.lambda < 5e-3);
    }

    #[test]
    fn torus_reduction_range() {
        let g = Geometry::Torus { cells: 2 };
        for j in [-100.0, -2.0 * PI, 0.0, 13.0, 2.0 * PI * 2.0] {
            let r = g.reduce(j);
            assert!((-2.0 * PI..2.0 * PI).contains(&r));
            let k = (j - r) / (4.0 * PI);
            assert!((k - k.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn section_requires_torus() {
        let pot = KickPotential::cosine(1.0);
        assert!(poincare_section(&pot, &[PhasePoint::new(0.0, 0.0)], 10, Geometry::Cylinder).is_err());
        let c = poincare_section(&pot, &[PhasePoint::new(0.0, 0.0)], 10, Geometry::Torus { cells: 1 }).unwrap();
        assert!(c[0].points.iter().all(|p| *p == PhasePoint::new(0.0, 0.0)));
    }
}
