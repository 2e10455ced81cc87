use super::spin::{spin_factor, SpinKick};
use crate::classical::KickPotential;
use crate::error::{Error, Result};
use crate::series::TimeSeries;
use crate::special::bessel_j;
use ndarray::Array2;
use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

/// Edge occupation above which a step reports spill.
pub const DEFAULT_SPILL_THRESHOLD: f64 = 1e-8;

/// Amplitudes over `m in [-L, L]`, stored component-major with index
/// `c * (2L + 1) + m + L`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotorState {
    pub l: usize,
    pub components: usize,
    pub amps: Vec<C64>,
    pub hbar_eff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitKind {
    Delta { m0: i64 },
    /// Minimum-uncertainty packet. `width` is the momentum spread in units of
    /// `J = hbar_eff * m`, so the lattice standard deviation of `|A_m|^2`
    /// is `width / hbar_eff`. `theta0` places the packet in angle.
    Gaussian { center: f64, width: f64, theta0: f64 },
    Uniform,
    Custom { amps: Vec<C64> },
}

impl RotorState {
    pub fn dim(&self) -> usize {
        2 * self.l + 1
    }

    pub fn index(&self, m: i64) -> Result<usize> {
        if m.unsigned_abs() as usize > self.l {
            return Err(Error::Range {
                index: m,
                half_width: self.l,
            });
        }
        Ok((m + self.l as i64) as usize)
    }

    pub fn component(&self, c: usize) -> &[C64] {
        let n = self.dim();
        &self.amps[c * n..(c + 1) * n]
    }

    pub fn amplitude(&self, c: usize, m: i64) -> Result<C64> {
        Ok(self.component(c)[self.index(m)?])
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::DegenerateState);
        }
        let s = 1.0 / n.sqrt();
        self.amps.iter_mut().for_each(|a| *a *= s);
        Ok(())
    }

    /// Summed occupation of the two boundary sites over all components.
    pub fn edge_occupation(&self) -> f64 {
        let n = self.dim();
        (0..self.components)
            .map(|c| self.amps[c * n].norm_sqr() + self.amps[c * n + n - 1].norm_sqr())
            .sum()
    }

    /// Embeds the state into a wider lattice, padding with zeros.
    pub fn grown(&self, new_l: usize) -> RotorState {
        assert!(new_l >= self.l);
        let n = 2 * new_l + 1;
        let off = new_l - self.l;
        let mut amps = vec![C64::new(0.0, 0.0); n * self.components];
        for c in 0..self.components {
            amps[c * n + off..c * n + off + self.dim()].copy_from_slice(self.component(c));
        }
        RotorState {
            l: new_l,
            components: self.components,
            amps,
            hbar_eff: self.hbar_eff,
        }
    }
}

pub fn init_state(l: usize, hbar_eff: f64, kind: &InitKind) -> Result<RotorState> {
    if l < 1 {
        return Err(Error::domain("L", "lattice half-width must be >= 1"));
    }
    let n = 2 * l + 1;
    let mut s = RotorState {
        l,
        components: 1,
        amps: vec![C64::new(0.0, 0.0); n],
        hbar_eff,
    };
    match kind {
        InitKind::Delta { m0 } => {
            let i = s.index(*m0)?;
            s.amps[i] = C64::new(1.0, 0.0);
        }
        InitKind::Gaussian {
            center,
            width,
            theta0,
        } => {
            let sigma = width / hbar_eff;
            if !(sigma >= 1.0) {
                return Err(Error::domain(
                    "width",
                    format!("lattice width {sigma} below one site"),
                ));
            }
            if center.abs() > l as f64 {
                return Err(Error::Range {
                    index: center.round() as i64,
                    half_width: l,
                });
            }
            for (i, a) in s.amps.iter_mut().enumerate() {
                let m = i as f64 - l as f64;
                let d = m - center;
                *a = C64::from_polar((-d * d / (4.0 * sigma * sigma)).exp(), -m * theta0);
            }
            s.normalize()?;
        }
        InitKind::Uniform => {
            let v = 1.0 / (n as f64).sqrt();
            s.amps.iter_mut().for_each(|a| *a = C64::new(v, 0.0));
        }
        InitKind::Custom { amps } => {
            if amps.len() != n {
                return Err(Error::usage(format!(
                    "custom amplitudes have length {}, lattice needs {n}",
                    amps.len()
                )));
            }
            s.amps.clone_from(amps);
            s.normalize()?;
        }
    }
    Ok(s)
}

/// Two-component state with a fixed spinor on top of the scalar profile.
pub fn init_spinor(l: usize, hbar_eff: f64, kind: &InitKind, spinor: [C64; 2]) -> Result<RotorState> {
    let s = init_state(l, hbar_eff, kind)?;
    let nrm = (spinor[0].norm_sqr() + spinor[1].norm_sqr()).sqrt();
    if !(nrm > 0.0) {
        return Err(Error::DegenerateState);
    }
    let mut amps = Vec::with_capacity(2 * s.dim());
    for sp in spinor {
        amps.extend(s.amps.iter().map(|a| a * sp / nrm));
    }
    Ok(RotorState {
        l,
        components: 2,
        amps,
        hbar_eff,
    })
}

/// Kick amplitude factor `1 + eps cos(omega2 t) cos(omega3 t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Modulation {
    pub eps: f64,
    pub omega2: f64,
    pub omega3: f64,
}

impl Modulation {
    pub fn factor(&self, t: usize) -> f64 {
        let t = t as f64;
        1.0 + self.eps * (self.omega2 * t).cos() * (self.omega3 * t).cos()
    }
}

/// One driven-rotor protocol. The kick `exp(-i V(theta))` is followed by
/// the free factor `exp(-i T (m + beta)^2 / 2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloquetSpec {
    pub period: f64,
    pub potential: KickPotential,
    /// Gain/loss: adds `i gamma k sin(theta)` to the kick potential.
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub modulation: Option<Modulation>,
    #[serde(default)]
    pub spin_kick: Option<SpinKick>,
    #[serde(default)]
    pub half_step_split: bool,
    /// Quasi-momentum offset of the lattice.
    #[serde(default)]
    pub beta: f64,
}

impl FloquetSpec {
    pub fn kicked_rotor(k: f64, period: f64) -> Self {
        FloquetSpec {
            period,
            potential: KickPotential::cosine(k),
            gamma: 0.0,
            modulation: None,
            spin_kick: None,
            half_step_split: false,
            beta: 0.0,
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_modulation(mut self, m: Modulation) -> Self {
        self.modulation = Some(m);
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn is_hermitian(&self) -> bool {
        self.gamma == 0.0
    }

    pub fn components(&self) -> usize {
        if self.spin_kick.is_some() {
            2
        } else {
            1
        }
    }
}

/// `<n| exp(-i k cos theta) |m> = (-i)^(n-m) J_(n-m)(k)`.
pub fn bessel_kick_element(n: i64, m: i64, k: f64) -> C64 {
    let d = n - m;
    let phase = match d.rem_euclid(4) {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, -1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, 1.0),
    };
    phase * bessel_j(d, k)
}

/// `exp(-i 2 pi frac(x))`, exact when `x` is an integer or half-integer.
#[inline]
fn turn_phase(x: f64) -> C64 {
    let f = x - x.floor();
    C64::from_polar(1.0, -TAU * f)
}

/// Free-rotation phases `exp(-i tau (m + beta)^2 / 2)` for `m in [-L, L]`.
pub fn free_phases(l: usize, tau: f64, beta: f64) -> Vec<C64> {
    let c = tau / (4.0 * PI);
    (0..2 * l + 1)
        .map(|i| {
            let m = i as f64 - l as f64 + beta;
            turn_phase(c * m * m)
        })
        .collect()
}

/// Uniform angle grid `theta_j = 2 pi j / (2L + 1)`.
pub fn theta_grid(l: usize) -> Vec<f64> {
    let n = 2 * l + 1;
    (0..n).map(|j| TAU * j as f64 / n as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    pub spill: bool,
    pub edge: f64,
}

/// Reusable workspace for one lattice size and one spec.
pub struct Propagator {
    spec: FloquetSpec,
    l: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<C64>,
    free: Vec<C64>,
    /// Real and imaginary parts of the potential on the grid, including the
    /// `1/N` transform normalisation in the static factor below.
    v_re: Vec<f64>,
    v_im: Vec<f64>,
    theta: Vec<f64>,
    static_kick: Option<Vec<C64>>,
    pub spill_threshold: f64,
}

impl Propagator {
    pub fn new(spec: &FloquetSpec, l: usize) -> Self {
        let n = 2 * l + 1;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        let tau = if spec.half_step_split {
            0.5 * spec.period
        } else {
            spec.period
        };
        let theta = theta_grid(l);
        let k = spec.potential.strength();
        let v_re: Vec<f64> = theta.iter().map(|&t| spec.potential.value(t)).collect();
        let v_im: Vec<f64> = theta.iter().map(|&t| spec.gamma * k * t.sin()).collect();
        let mut p = Propagator {
            spec: spec.clone(),
            l,
            fwd,
            inv,
            scratch: vec![C64::new(0.0, 0.0); scratch_len],
            free: free_phases(l, tau, spec.beta),
            v_re,
            v_im,
            theta,
            static_kick: None,
            spill_threshold: DEFAULT_SPILL_THRESHOLD,
        };
        if spec.modulation.is_none() {
            p.static_kick = Some(p.kick_factor(1.0));
        }
        p
    }

    pub fn spec(&self) -> &FloquetSpec {
        &self.spec
    }

    pub fn half_width(&self) -> usize {
        self.l
    }

    fn kick_factor(&self, f: f64) -> Vec<C64> {
        let inv_n = 1.0 / (2 * self.l + 1) as f64;
        self.v_re
            .iter()
            .zip(&self.v_im)
            .map(|(&vr, &vi)| C64::from_polar(inv_n * (f * vi).exp(), -f * vr))
            .collect()
    }

    fn free(&self, s: &mut RotorState) {
        let n = self.l * 2 + 1;
        for c in 0..s.components {
            for (a, f) in s.amps[c * n..(c + 1) * n].iter_mut().zip(&self.free) {
                *a *= f;
            }
        }
    }

    fn kick(&mut self, s: &mut RotorState, t: usize) {
        let n = 2 * self.l + 1;
        let f = self.spec.modulation.map_or(1.0, |m| m.factor(t));
        let dynamic;
        let kick: &[C64] = match &self.static_kick {
            Some(k) => k,
            None => {
                dynamic = self.kick_factor(f);
                &dynamic
            }
        };
        for c in 0..s.components {
            let a = &mut s.amps[c * n..(c + 1) * n];
            self.inv.process_with_scratch(a, &mut self.scratch);
            for (x, k) in a.iter_mut().zip(kick) {
                *x *= k;
            }
        }
        if let Some(sk) = &self.spec.spin_kick {
            let (up, down) = s.amps.split_at_mut(n);
            for j in 0..n {
                let (v0, v) = sk.fields(self.theta[j], t);
                let u = spin_factor(v0, v);
                let (a, b) = (up[j], down[j]);
                up[j] = u[0][0] * a + u[0][1] * b;
                down[j] = u[1][0] * a + u[1][1] * b;
            }
        }
        for c in 0..s.components {
            let a = &mut s.amps[c * n..(c + 1) * n];
            self.fwd.process_with_scratch(a, &mut self.scratch);
        }
    }

    /// Advances by one period; `t` is the kick index seen by time-dependent
    /// modulations.
    pub fn step(&mut self, s: &mut RotorState, t: usize) -> Result<StepReport> {
        if s.l != self.l || s.components != self.spec.components() {
            return Err(Error::usage(format!(
                "state (L={}, components={}) does not match propagator (L={}, components={})",
                s.l,
                s.components,
                self.l,
                self.spec.components()
            )));
        }
        if self.spec.half_step_split {
            self.free(s);
            self.kick(s, t);
            self.free(s);
        } else {
            self.kick(s, t);
            self.free(s);
        }
        let edge = s.edge_occupation() / s.norm().max(f64::MIN_POSITIVE);
        Ok(StepReport {
            spill: edge > self.spill_threshold,
            edge,
        })
    }

    /// The one-period operator as a dense matrix, built column by column.
    /// Scalar, time-independent specs only.
    pub fn dense_matrix(&mut self) -> Result<Array2<C64>> {
        if self.spec.components() != 1 || self.spec.modulation.is_some() {
            return Err(Error::usage("dense matrix needs a scalar static spec"));
        }
        let n = 2 * self.l + 1;
        let mut out = Array2::zeros((n, n));
        for j in 0..n {
            let mut amps = vec![C64::new(0.0, 0.0); n];
            amps[j] = C64::new(1.0, 0.0);
            let mut s = RotorState {
                l: self.l,
                components: 1,
                amps,
                hbar_eff: self.spec.period,
            };
            self.step(&mut s, 0)?;
            for i in 0..n {
                out[[i, j]] = s.amps[i];
            }
        }
        Ok(out)
    }
}

/// One period with a fresh workspace. Prefer [`Propagator`] in loops.
pub fn floquet_step(s: &RotorState, spec: &FloquetSpec, t: usize) -> Result<(RotorState, StepReport)> {
    let mut p = Propagator::new(spec, s.l);
    let mut out = s.clone();
    let r = p.step(&mut out, t)?;
    Ok((out, r))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observables {
    pub norm: f64,
    /// `<m^2>/2`, normalised by the current norm.
    pub energy: f64,
    pub mean_i: f64,
    /// `P(m)` summed over components, normalised.
    pub prob: Vec<f64>,
}

pub fn observables(s: &RotorState) -> Result<Observables> {
    let n = s.dim();
    let mut prob = vec![0.0; n];
    for c in 0..s.components {
        for (p, a) in prob.iter_mut().zip(s.component(c)) {
            *p += a.norm_sqr();
        }
    }
    let norm: f64 = prob.iter().sum();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::DegenerateState);
    }
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for (i, p) in prob.iter_mut().enumerate() {
        let m = i as f64 - s.l as f64;
        *p /= norm;
        m1 += m * *p;
        m2 += m * m * *p;
    }
    Ok(Observables {
        norm,
        energy: 0.5 * m2,
        mean_i: m1,
        prob,
    })
}

/// Probability table with columns `m, prob`.
pub fn distribution_table(s: &RotorState) -> Result<TimeSeries> {
    let o = observables(s)?;
    let mut t = TimeSeries::new(&["m", "prob"]);
    for (i, p) in o.prob.iter().enumerate() {
        t.push(vec![i as f64 - s.l as f64, *p]);
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveResult {
    /// Columns `t, norm, energy, meanI`.
    pub series: TimeSeries,
    pub state: RotorState,
    /// First step whose edge occupation crossed the spill threshold.
    pub first_spill: Option<usize>,
    pub max_edge: f64,
}

pub fn evolve(s: &RotorState, spec: &FloquetSpec, steps: usize, record_every: usize) -> Result<EvolveResult> {
    let mut p = Propagator::new(spec, s.l);
    evolve_with(&mut p, s, steps, record_every)
}

pub fn evolve_with(p: &mut Propagator, s: &RotorState, steps: usize, record_every: usize) -> Result<EvolveResult> {
    if steps == 0 {
        return Err(Error::usage("steps must be >= 1"));
    }
    let every = record_every.max(1);
    let mut state = s.clone();
    let mut series = TimeSeries::new(&["t", "norm", "energy", "meanI"]);
    let push = |series: &mut TimeSeries, t: usize, st: &RotorState| -> Result<()> {
        let o = observables(st)?;
        series.push(vec![t as f64, o.norm, o.energy, o.mean_i]);
        Ok(())
    };
    push(&mut series, 0, &state)?;
    let mut first_spill = None;
    let mut max_edge: f64 = 0.0;
    for t in 0..steps {
        let r = p.step(&mut state, t)?;
        max_edge = max_edge.max(r.edge);
        if r.spill && first_spill.is_none() {
            first_spill = Some(t + 1);
        }
        if (t + 1) % every == 0 || t + 1 == steps {
            push(&mut series, t + 1, &state)?;
        }
    }
    Ok(EvolveResult {
        series,
        state,
        first_spill,
        max_edge,
    })
}

/// Kicked rotor with quasiperiodically modulated kicks. `k_classical` is
/// `K = k * hbar_eff`, the period equals `hbar_eff`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiperiodicParams {
    pub k_classical: f64,
    pub eps: f64,
    pub omega2: f64,
    pub omega3: f64,
    pub hbar_eff: f64,
    pub steps: usize,
    pub l: usize,
}

pub fn quasiperiodic_run(p: &QuasiperiodicParams) -> Result<EvolveResult> {
    let spec = FloquetSpec::kicked_rotor(p.k_classical / p.hbar_eff, p.hbar_eff).with_modulation(Modulation {
        eps: p.eps,
        omega2: p.omega2,
        omega3: p.omega3,
    });
    let s = init_state(p.l, p.hbar_eff, &InitKind::Delta { m0: 0 })?;
    evolve(&s, &spec, p.steps, 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_and_superposition_observables() {
        let s = init_state(8, 1.0, &InitKind::Delta { m0: 3 }).unwrap();
        let o = observables(&s).unwrap();
        assert_eq!((o.mean_i, o.energy), (3.0, 4.5));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = vec![C64::new(0.0, 0.0); 17];
        amps[7] = C64::new(h, 0.0);
        amps[9] = C64::new(h, 0.0);
        let s = init_state(8, 1.0, &InitKind::Custom { amps }).unwrap();
        let o = observables(&s).unwrap();
        assert!(o.mean_i.abs() < 1e-15 && (o.energy - 0.5).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_delta() {
        assert!(matches!(
            init_state(4, 1.0, &InitKind::Delta { m0: 5 }),
            Err(Error::Range { index: 5, .. })
        ));
    }

    #[test]
    fn uniform_probabilities() {
        let s = init_state(5, 1.0, &InitKind::Uniform).unwrap();
        let o = observables(&s).unwrap();
        assert!(o.prob.iter().all(|p| (p - 1.0 / 11.0).abs() < 1e-15));
    }

    #[test]
    fn gaussian_width_in_momentum_units() {
        let hbar = 0.25;
        let w = 0.25f64.sqrt();
        let s = init_state(64, hbar, &InitKind::Gaussian { center: 0.0, width: w, theta0: 0.0 }).unwrap();
        let o = observables(&s).unwrap();
        let j2 = 2.0 * o.energy * hbar * hbar;
        assert!((j2 / (w * w) - 1.0).abs() < 0.01, "{j2}");
    }

    #[test]
    fn zero_norm_is_degenerate() {
        let s = RotorState {
            l: 2,
            components: 1,
            amps: vec![C64::new(0.0, 0.0); 5],
            hbar_eff: 1.0,
        };
        assert_eq!(observables(&s), Err(Error::DegenerateState));
    }

    #[test]
    fn zero_kick_keeps_moduli() {
        let s = init_state(16, 1.0, &InitKind::Gaussian { center: 2.0, width: 3.0, theta0: 0.4 }).unwrap();
        let (t, _) = floquet_step(&s, &FloquetSpec::kicked_rotor(0.0, 1.3), 0).unwrap();
        for (a, b) in s.amps.iter().zip(&t.amps) {
            assert!((a.norm() - b.norm()).abs() < 1e-13);
        }
    }

    #[test]
    fn principal_resonance_free_factor_is_identity() {
        for f in free_phases(200, 4.0 * PI, 0.0) {
            assert!((f - C64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn grown_state_keeps_amplitudes() {
        let s = init_state(4, 1.0, &InitKind::Gaussian { center: 1.0, width: 1.5, theta0: 0.0 }).unwrap();
        let g = s.grown(10);
        for m in -4..=4 {
            assert_eq!(s.amplitude(0, m).unwrap(), g.amplitude(0, m).unwrap());
        }
        assert!((g.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn modulation_zero_matches_plain() {
        let s = init_state(32, 1.0, &InitKind::Delta { m0: 0 }).unwrap();
        let plain = FloquetSpec::kicked_rotor(3.0, 1.0);
        let modded = plain.clone().with_modulation(Modulation { eps: 0.0, omega2: 1.1, omega3: 0.7 });
        let a = evolve(&s, &plain, 20, 1).unwrap();
        let b = evolve(&s, &modded, 20, 1).unwrap();
        assert_eq!(a.series, b.series);
    }
}
