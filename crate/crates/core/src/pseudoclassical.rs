//! Near-resonant dynamics as classical maps in which the detuning plays the
//! role of Planck's constant.

use crate::classical::{self, wrap_angle, KickPotential, PhasePoint};
use crate::error::{Error, Result};
use crate::quantum::{init_state, FloquetSpec, InitKind, Propagator};
use crate::rng;
use crate::series::TimeSeries;
use crate::stats::{self, Neumaier};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// `T = 2 pi l + delta` with the rescaled kick `K = k delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detuning {
    pub l: i64,
    pub delta: f64,
    pub keff: f64,
}

impl Detuning {
    pub fn new(l: i64, delta: f64, k: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::domain("delta", "detuning must be positive"));
        }
        Ok(Detuning {
            l,
            delta,
            keff: k * delta,
        })
    }

    pub fn period(&self) -> f64 {
        TAU * self.l as f64 + self.delta
    }

    pub fn k_quantum(&self) -> f64 {
        self.keff / self.delta
    }
}

pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub l: usize,
    /// Bloch phase `2 pi r l / s`, reduced to `[0, 2pi)`.
    pub bloch_phase: f64,
    pub amplitude: C64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussSums {
    pub r: i64,
    pub s: i64,
    pub g: Vec<C64>,
    /// Nonzero coefficients, `|G_l| > 1e-12`.
    pub bands: Vec<Band>,
}

impl GaussSums {
    pub fn band_count(&self) -> usize {
        self.bands.len()
    }

    /// `N = s` for odd `s`, `s/2` for even `s`.
    pub fn expected_band_count(s: i64) -> usize {
        if s % 2 == 0 {
            (s / 2) as usize
        } else {
            s as usize
        }
    }
}

/// `G_l = (1/s) sum_m exp(-i 2 pi (r/s) m (m - l))`, with the exponent
/// reduced exactly in integers before the complex exponential.
pub fn gauss_sums(r: i64, s: i64) -> Result<GaussSums> {
    if s < 1 {
        return Err(Error::usage("s must be >= 1"));
    }
    if gcd(r, s) != 1 {
        return Err(Error::usage(format!("gcd({r}, {s}) != 1")));
    }
    let g: Vec<C64> = (0..s)
        .map(|l| {
            let mut acc = C64::new(0.0, 0.0);
            for m in 0..s {
                let e = (r * m * (m - l)).rem_euclid(s);
                acc += C64::from_polar(1.0, -TAU * e as f64 / s as f64);
            }
            acc / s as f64
        })
        .collect();
    let bands = g
        .iter()
        .enumerate()
        .filter(|(_, z)| z.norm() > 1e-12)
        .map(|(l, z)| Band {
            l,
            bloch_phase: TAU * ((r * l as i64).rem_euclid(s)) as f64 / s as f64,
            amplitude: *z,
        })
        .collect();
    Ok(GaussSums { r, s, g, bands })
}

/// `J' = J + K sin(theta)`, `theta' = theta + J' + pi l`.
pub fn pc_step(p: PhasePoint, k: f64, l: i64) -> PhasePoint {
    let drift = if l.rem_euclid(2) == 0 { 0.0 } else { PI };
    classical::step_unwrapped(p, &KickPotential::cosine(k), drift).map_theta(wrap_angle)
}

trait MapTheta {
    fn map_theta(self, f: impl Fn(f64) -> f64) -> Self;
}

impl MapTheta for PhasePoint {
    fn map_theta(self, f: impl Fn(f64) -> f64) -> Self {
        PhasePoint::new(f(self.theta), self.j)
    }
}

/// The double-kick map without angle reduction.
pub fn dkr_pc_step_unwrapped(p: PhasePoint, k: f64) -> PhasePoint {
    let j1 = p.j + k * p.theta.sin();
    let t1 = p.theta + PI + j1;
    let j2 = j1 + k * t1.sin();
    let t2 = t1 - PI - j1 - k * t1.sin();
    PhasePoint::new(t2, j2)
}

/// Two kicks per period near `T = 4 pi`, `T0 = 2 pi + delta`.
pub fn dkr_pc_step(p: PhasePoint, k: f64) -> PhasePoint {
    dkr_pc_step_unwrapped(p, k).map_theta(wrap_angle)
}

/// `(J, theta) -> (u = J + theta, theta)`.
pub fn to_harper(p: PhasePoint) -> (f64, f64) {
    (p.j + p.theta, p.theta)
}

pub fn from_harper(u: f64, theta: f64) -> PhasePoint {
    PhasePoint::new(theta, u - theta)
}

/// One step of the kicked-Harper map in `(u, theta)`.
pub fn harper_step(u: f64, theta: f64, k: f64) -> (f64, f64) {
    let u1 = u + k * theta.sin();
    (u1, theta + k * u1.sin())
}

/// Fourth-order central-difference Jacobian `d(J', theta') / d(J, theta)` of an
/// unreduced map.
pub fn fd_jacobian(f: impl Fn(PhasePoint) -> PhasePoint, p: PhasePoint, h: f64) -> [[f64; 2]; 2] {
    let diff = |g: &dyn Fn(f64) -> PhasePoint| -> (f64, f64) {
        let (a, b, c, d) = (g(h), g(-h), g(2.0 * h), g(-2.0 * h));
        let w = |x: f64, y: f64, z: f64, u: f64| (8.0 * (x - y) - (z - u)) / (12.0 * h);
        (w(a.j, b.j, c.j, d.j), w(a.theta, b.theta, c.theta, d.theta))
    };
    let (jj, tj) = diff(&|e| f(PhasePoint::new(p.theta, p.j + e)));
    let (jt, tt) = diff(&|e| f(PhasePoint::new(p.theta + e, p.j)));
    [[jj, jt], [tj, tt]]
}

/// Largest eigenvalue modulus of a real 2x2 matrix.
pub fn spectral_radius(m: [[f64; 2]; 2]) -> f64 {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        ((tr + s) / 2.0).abs().max(((tr - s) / 2.0).abs())
    } else {
        det.abs().sqrt()
    }
}

pub const FD_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointAnalysis {
    pub k: f64,
    /// From the differentiated map at `(J, theta) = (0, pi)`; used for predictions.
    pub lambda_plus_numeric: f64,
    /// The closed form `ln[(K^2 + 2 + sqrt(K^2 + 4K)) / 2]`, reported for comparison.
    pub lambda_plus_closed_form: f64,
    /// `ln[(K^2 + 2 + K sqrt(K^2 + 4)) / 2]`, from the trace `K^2 + 2`.
    pub lambda_plus_trace: f64,
}

impl FixedPointAnalysis {
    /// `ln(pi / delta) / lambda_plus_numeric`.
    pub fn t_exp(&self, delta: f64) -> f64 {
        (PI / delta).ln() / self.lambda_plus_numeric
    }
}

pub fn fixed_point_analysis(k: f64) -> FixedPointAnalysis {
    let jac = fd_jacobian(|p| dkr_pc_step_unwrapped(p, k), PhasePoint::new(PI, 0.0), FD_STEP);
    FixedPointAnalysis {
        k,
        lambda_plus_numeric: spectral_radius(jac).ln(),
        lambda_plus_closed_form: ((k * k + 2.0 + (k * k + 4.0 * k).sqrt()) / 2.0).ln(),
        lambda_plus_trace: ((k * k + 2.0 + k * (k * k + 4.0).sqrt()) / 2.0).ln(),
    }
}

/// Growth rate of a small separation from the fixed point `(J, theta) = (0, pi)`,
/// renormalized to `d0` after every step.
pub fn divergence_rate(k: f64, d0: f64, steps: usize) -> f64 {
    let fp = PhasePoint::new(PI, 0.0);
    let mut dir = (1.0f64, 0.0f64);
    let mut acc = Neumaier::default();
    for _ in 0..steps {
        let q = dkr_pc_step_unwrapped(PhasePoint::new(PI + d0 * dir.1, d0 * dir.0), k);
        let (dj, dt) = (q.j - fp.j, q.theta - fp.theta);
        let d = dj.hypot(dt);
        acc.add((d / d0).ln());
        dir = (dj / d, dt / d);
    }
    acc.value() / steps as f64
}

/// Ensemble with `J` uniform in `[-delta/2, delta/2]` at `theta = pi`.
/// Columns `t, J2, lnJ2`.
pub fn dkr_spreading(k: f64, delta: f64, n: usize, steps: usize, seed: u64) -> Result<TimeSeries> {
    if n == 0 {
        return Err(Error::usage("empty ensemble"));
    }
    let sums = stats::par_map_sum(n, steps + 1, |i, out| {
        let mut r = rng::stream(seed, i as u64);
        let mut p = PhasePoint::new(PI, delta * (rng::unit(&mut r) - 0.5));
        out[0] = p.j * p.j;
        for o in out.iter_mut().skip(1) {
            p = dkr_pc_step(p, k);
            *o = p.j * p.j;
        }
    });
    let mut s = TimeSeries::new(&["t", "J2", "lnJ2"]);
    for (t, v) in sums.iter().enumerate() {
        let j2 = v / n as f64;
        s.push(vec![t as f64, j2, j2.ln()]);
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadingFit {
    /// Slope of `ln <J^2>` in the exponential window.
    pub slope: f64,
    pub r2: f64,
    /// First time `<J^2>` reaches 1, linearly interpolated.
    pub t_cross: f64,
    pub window: (f64, f64),
}

/// Exponential window `10 delta^2 < <J^2> < 0.1 pi^2`, before the crossover.
pub fn fit_spreading(series: &TimeSeries, delta: f64) -> Result<SpreadingFit> {
    let t = series.column("t").ok_or_else(|| Error::usage("missing t"))?;
    let j2 = series.column("J2").ok_or_else(|| Error::usage("missing J2"))?;
    let lo = 10.0 * delta * delta;
    let hi = 0.1 * PI * PI;
    let first_hi = j2.iter().position(|&v| v >= hi).unwrap_or(j2.len());
    let idx: Vec<usize> = (0..first_hi).filter(|&i| j2[i] > lo).collect();
    if idx.len() < 5 {
        return Err(Error::Fit {
            msg: format!("{} points in exponential window", idx.len()),
            residual: f64::NAN,
        });
    }
    let x: Vec<f64> = idx.iter().map(|&i| t[i]).collect();
    let y: Vec<f64> = idx.iter().map(|&i| j2[i].ln()).collect();
    let f = stats::fit_line(&x, &y).ok_or(Error::Fit {
        msg: "degenerate window".into(),
        residual: f64::NAN,
    })?;
    let c = j2.iter().position(|&v| v >= 1.0).ok_or(Error::Fit {
        msg: "<J^2> never reaches 1".into(),
        residual: f64::NAN,
    })?;
    let t_cross = if c == 0 {
        t[0]
    } else {
        let (a, b) = (j2[c - 1].ln(), j2[c].ln());
        t[c - 1] + (t[c] - t[c - 1]) * (0.0 - a) / (b - a)
    };
    Ok(SpreadingFit {
        slope: f.slope,
        r2: f.r2,
        t_cross,
        window: (x[0], *x.last().unwrap()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub j: f64,
    pub theta: f64,
    pub amp: C64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchState {
    pub branches: Vec<Branch>,
    pub capacity: usize,
    pub dropped_weight: f64,
}

impl BranchState {
    pub fn single(p: PhasePoint, capacity: usize) -> Self {
        BranchState {
            branches: vec![Branch {
                j: p.j,
                theta: p.theta,
                amp: C64::new(1.0, 0.0),
            }],
            capacity,
            dropped_weight: 0.0,
        }
    }

    pub fn weight(&self) -> f64 {
        let mut acc = Neumaier::default();
        for b in &self.branches {
            acc.add(b.amp.norm_sqr());
        }
        acc.value()
    }
}

pub const DEFAULT_PRUNE: f64 = 1e-12;

/// Each branch kicks and rotates under the `l = 0` band Hamiltonian, then
/// splits into one child per nonzero Gaussian sum, shifted by its Bloch
/// phase and weighted by its amplitude. Columns `t, branches, weight,
/// dropped, meanJ, J2`, weighted by `|A|^2`.
pub fn multibranch_evolve(
    b: &BranchState,
    k: f64,
    bands: &GaussSums,
    steps: usize,
    prune_threshold: f64,
) -> Result<(BranchState, TimeSeries)> {
    let mut state = b.clone();
    let mut out = TimeSeries::new(&["t", "branches", "weight", "dropped", "meanJ", "J2"]);
    let record = |s: &BranchState, t: usize, out: &mut TimeSeries| {
        let w = s.weight();
        let mut m1 = Neumaier::default();
        let mut m2 = Neumaier::default();
        for br in &s.branches {
            let p = br.amp.norm_sqr();
            m1.add(p * br.j);
            m2.add(p * br.j * br.j);
        }
        out.push(vec![
            t as f64,
            s.branches.len() as f64,
            w,
            s.dropped_weight,
            m1.value() / w,
            m2.value() / w,
        ]);
    };
    record(&state, 0, &mut out);
    let pot = KickPotential::cosine(k);
    for t in 1..=steps {
        let mut next = Vec::with_capacity(state.branches.len() * bands.band_count());
        let mut dropped = Neumaier::default();
        dropped.add(state.dropped_weight);
        for br in &state.branches {
            let p = classical::step_unwrapped(PhasePoint::new(br.theta, br.j), &pot, 0.0);
            for band in &bands.bands {
                let amp = br.amp * band.amplitude;
                if amp.norm_sqr() < prune_threshold {
                    dropped.add(amp.norm_sqr());
                    continue;
                }
                next.push(Branch {
                    j: p.j,
                    theta: wrap_angle(wrap_angle(p.theta) + band.bloch_phase),
                    amp,
                });
            }
        }
        if next.len() > state.capacity {
            let mut kept = Neumaier::default();
            for br in &next {
                kept.add(br.amp.norm_sqr());
            }
            return Err(Error::Capacity {
                capacity: state.capacity,
                retained_weight: kept.value(),
            });
        }
        state.branches = next;
        state.dropped_weight = dropped.value();
        record(&state, t, &mut out);
    }
    Ok((state, out))
}

/// Rows `step, J, theta, reA, imA`.
pub fn branch_table(b: &BranchState, step: usize) -> TimeSeries {
    let mut t = TimeSeries::new(&["step", "J", "theta", "reA", "imA"]);
    for br in &b.branches {
        t.push(vec![step as f64, br.j, br.theta, br.amp.re, br.amp.im]);
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceParams {
    pub k: f64,
    pub delta: f64,
    pub l: i64,
    pub beta_samples: usize,
    pub theta_samples: usize,
    pub steps: usize,
    pub lattice: usize,
    pub seed: u64,
}

/// Quantum `<J^2>` with `J = delta (m + beta)` averaged over equally spaced
/// quasi-momenta, against the pseudoclassical ensemble with
/// `J0 = delta beta` and drift `pi l (1 + 2 beta)`. Columns
/// `t, J2_quantum, J2_classical, J2_quantum_beta0`.
pub fn pseudoclassical_correspondence(p: &CorrespondenceParams) -> Result<TimeSeries> {
    let det = Detuning::new(p.l, p.delta, p.k)?;
    if p.beta_samples == 0 || p.theta_samples == 0 {
        return Err(Error::usage("need at least one beta and one theta sample"));
    }
    let betas: Vec<f64> = (0..p.beta_samples)
        .map(|i| i as f64 / p.beta_samples as f64)
        .collect();
    let quantum: Vec<Vec<f64>> = betas
        .par_iter()
        .map(|&beta| -> Result<Vec<f64>> {
            let spec = FloquetSpec::kicked_rotor(det.k_quantum(), det.period()).with_beta(beta);
            let mut prop = Propagator::new(&spec, p.lattice);
            let mut s = init_state(p.lattice, det.period(), &InitKind::Delta { m0: 0 })?;
            let mut out = Vec::with_capacity(p.steps + 1);
            let j2 = |s: &crate::quantum::RotorState| {
                let mut acc = Neumaier::default();
                for (i, a) in s.amps.iter().enumerate() {
                    let j = p.delta * (i as f64 - p.lattice as f64 + beta);
                    acc.add(a.norm_sqr() * j * j);
                }
                acc.value() / s.norm()
            };
            out.push(j2(&s));
            for t in 0..p.steps {
                let r = prop.step(&mut s, t)?;
                if r.spill {
                    return Err(Error::Truncation(format!(
                        "edge occupation {:.2e} at step {} for beta {beta}",
                        r.edge,
                        t + 1
                    )));
                }
                out.push(j2(&s));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let n_cls = p.beta_samples * p.theta_samples;
    let pot = KickPotential::cosine(det.keff);
    let classical = stats::par_map_sum(n_cls, p.steps + 1, |i, out| {
        let beta = betas[i / p.theta_samples];
        let mut r = rng::stream(p.seed, i as u64);
        let drift = PI * p.l as f64 * (1.0 + 2.0 * beta);
        let mut q = PhasePoint::new(TAU * rng::unit(&mut r), p.delta * beta);
        out[0] = q.j * q.j;
        for o in out.iter_mut().skip(1) {
            q = classical::step_unwrapped(q, &pot, drift);
            q.theta = wrap_angle(q.theta);
            *o = q.j * q.j;
        }
    });
    let mut s = TimeSeries::new(&["t", "J2_quantum", "J2_classical", "J2_quantum_beta0"]);
    for t in 0..=p.steps {
        let mut acc = Neumaier::default();
        for q in &quantum {
            acc.add(q[t]);
        }
        s.push(vec![
            t as f64,
            acc.value() / quantum.len() as f64,
            classical[t] / n_cls as f64,
            quantum[0][t],
        ]);
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_integer_resonance_sums() {
        let g = gauss_sums(1, 2).unwrap();
        assert!(g.g[0].norm() < 1e-15);
        assert!((g.g[1] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(g.band_count(), 1);
    }

    #[test]
    fn gauss_sums_reject_common_factor() {
        assert!(matches!(gauss_sums(2, 4), Err(Error::Usage(_))));
    }

    #[test]
    fn gauss_sum_norm_and_band_count() {
        for s in 1..=8 {
            for r in 1..=2 * s {
                if gcd(r, s) != 1 {
                    continue;
                }
                let g = gauss_sums(r, s).unwrap();
                let n: f64 = g.g.iter().map(|z| z.norm_sqr()).sum();
                assert!((n - 1.0).abs() < 1e-12);
                assert_eq!(g.band_count(), GaussSums::expected_band_count(s), "r={r} s={s}");
            }
        }
    }

    #[test]
    fn pc_even_order_is_standard_map() {
        let p = PhasePoint::new(1.3, -0.4);
        let q = pc_step(p, 0.7, 4);
        let r = classical::step_map(p, &KickPotential::cosine(0.7), Some(0.0)).unwrap();
        assert_eq!(q, r);
    }

    #[test]
    fn pc_odd_order_at_pi() {
        let q = pc_step(PhasePoint::new(PI, 0.0), 2.0, 1);
        assert!(q.j.abs() < 1e-15);
        assert!(q.theta < 1e-14 || TAU - q.theta < 1e-14);
    }

    #[test]
    fn dkr_fixed_points() {
        let p = dkr_pc_step(PhasePoint::new(PI, 0.0), 0.3);
        assert!(p.j.abs() < 1e-15 && (p.theta - PI).abs() < 1e-14);
        for (n, m) in [(0i64, 0i64), (1, 1), (2, 0), (-1, 1), (3, 1)] {
            let (u, th) = (n as f64 * PI, m as f64 * PI);
            let q = dkr_pc_step_unwrapped(from_harper(u, th), 0.4);
            let (u2, th2) = to_harper(q);
            assert!((u2 - u).abs() < 1e-12 && (th2 - th).abs() < 1e-12, "({n},{m})");
        }
    }

    #[test]
    fn lambda_values() {
        // Identity Jacobian is defective, so rounding noise enters as its square root.
        assert!(fixed_point_analysis(0.0).lambda_plus_numeric.abs() < 1e-4);
        let f = fixed_point_analysis(0.005);
        assert!((f.lambda_plus_closed_form - 0.0684).abs() < 5e-4);
        assert!((f.lambda_plus_numeric / f.lambda_plus_trace - 1.0).abs() < 1e-6);
        let rate = divergence_rate(0.005, 1e-9, 4000);
        assert!((rate / f.lambda_plus_numeric - 1.0).abs() < 0.1, "{rate}");
    }

    #[test]
    fn maps_preserve_area() {
        let mut r = rng::stream(5, 0);
        for _ in 0..100 {
            let p = PhasePoint::new(TAU * rng::unit(&mut r), 4.0 * rng::unit(&mut r) - 2.0);
            let k = 3.0 * rng::unit(&mut r);
            let pot = KickPotential::cosine(k);
            let maps: [&dyn Fn(PhasePoint) -> PhasePoint; 3] = [
                &|q| dkr_pc_step_unwrapped(q, k),
                &|q| classical::step_unwrapped(q, &pot, PI),
                &|q| {
                    let (u, t) = to_harper(q);
                    let (u1, t1) = harper_step(u, t, k);
                    from_harper(u1, t1)
                },
            ];
            for f in maps {
                let m = fd_jacobian(f, p, FD_STEP);
                let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                assert!((det - 1.0).abs() < 1e-9, "{det} {k} {p:?} {m:?}");
            }
        }
    }

    #[test]
    fn weights_are_conserved_with_pruning() {
        let g = gauss_sums(1, 5).unwrap();
        let (_, ser) = multibranch_evolve(&BranchState::single(PhasePoint::new(0.3, 0.1), 1 << 20), 0.7, &g, 6, 1e-4).unwrap();
        let w = ser.column("weight").unwrap();
        let d = ser.column("dropped").unwrap();
        for (a, b) in w.iter().zip(&d) {
            assert!((a + b - 1.0).abs() < 1e-10);
        }
        assert!(d[6] > 0.0);
    }

    #[test]
    fn single_band_has_no_proliferation() {
        let g = gauss_sums(1, 2).unwrap();
        let p0 = PhasePoint::new(0.4, 0.2);
        let (s, _) = multibranch_evolve(&BranchState::single(p0, 4), 0.8, &g, 20, DEFAULT_PRUNE).unwrap();
        assert_eq!(s.branches.len(), 1);
        let mut p = p0;
        for _ in 0..20 {
            p = pc_step(p, 0.8, 1);
        }
        assert!((s.branches[0].j - p.j).abs() < 1e-9);
    }

    #[test]
    fn three_bands_proliferate() {
        let g = gauss_sums(1, 3).unwrap();
        let (s, ser) = multibranch_evolve(&BranchState::single(PhasePoint::new(0.1, 0.0), 1000), 0.5, &g, 5, 0.0).unwrap();
        assert_eq!(s.branches.len(), 243);
        let w = ser.column("weight").unwrap();
        assert!((w[5] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn capacity_is_enforced() {
        let g = gauss_sums(1, 3).unwrap();
        let r = multibranch_evolve(&BranchState::single(PhasePoint::new(0.1, 0.0), 10), 0.5, &g, 5, 0.0);
        assert!(matches!(r, Err(Error::Capacity { capacity: 10, .. })));
    }
}
