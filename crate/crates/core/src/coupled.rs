//! Two kicked rotors coupled through `xi cos(theta1 - theta2)`.

use crate::error::{Error, Result};
use crate::linalg;
use crate::quantum::{free_phases, init_state, theta_grid, FloquetSpec, InitKind, Propagator, RotorState, StepReport, DEFAULT_SPILL_THRESHOLD};
use crate::series::TimeSeries;
use crate::stats::Neumaier;
use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Eigenvalues of a reduced density matrix below this count as zero.
pub const EIGEN_FLOOR: f64 = 1e-14;
pub const TRACE_TOLERANCE: f64 = 1e-8;

/// `U = exp(-i (I1^2 + I2^2) / 2) exp(-i (K1 cos t1 + K2 cos t2 + xi cos(t1 - t2)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledSpec {
    pub k1: f64,
    pub k2: f64,
    pub xi: f64,
}

impl CoupledSpec {
    pub fn new(k1: f64, k2: f64, xi: f64) -> Result<Self> {
        if !(xi >= 0.0) {
            return Err(Error::domain("xi", "coupling must be non-negative"));
        }
        Ok(CoupledSpec { k1, k2, xi })
    }

    pub fn potential(&self, t1: f64, t2: f64) -> f64 {
        self.k1 * t1.cos() + self.k2 * t2.cos() + self.xi * (t1 - t2).cos()
    }
}

/// Row-major amplitudes `psi[(m1 + L1) * (2 L2 + 1) + m2 + L2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoRotorState {
    pub l1: usize,
    pub l2: usize,
    pub amps: Vec<C64>,
}

impl TwoRotorState {
    pub fn n1(&self) -> usize {
        2 * self.l1 + 1
    }

    pub fn n2(&self) -> usize {
        2 * self.l2 + 1
    }

    pub fn product(a: &RotorState, b: &RotorState) -> Result<Self> {
        if a.components != 1 || b.components != 1 {
            return Err(Error::usage("product states need scalar rotors"));
        }
        let mut amps = Vec::with_capacity(a.amps.len() * b.amps.len());
        for x in &a.amps {
            amps.extend(b.amps.iter().map(|y| x * y));
        }
        Ok(TwoRotorState {
            l1: a.l,
            l2: b.l,
            amps,
        })
    }

    pub fn from_inits(l1: usize, l2: usize, i1: &InitKind, i2: &InitKind) -> Result<Self> {
        Self::product(&init_state(l1, 1.0, i1)?, &init_state(l2, 1.0, i2)?)
    }

    pub fn amplitude(&self, m1: i64, m2: i64) -> Option<C64> {
        let i1 = usize::try_from(m1 + self.l1 as i64).ok().filter(|&i| i < self.n1())?;
        let i2 = usize::try_from(m2 + self.l2 as i64).ok().filter(|&i| i < self.n2())?;
        Some(self.amps[i1 * self.n2() + i2])
    }

    pub fn norm(&self) -> f64 {
        let mut acc = Neumaier::default();
        for a in &self.amps {
            acc.add(a.norm_sqr());
        }
        acc.value()
    }

    /// Occupation of the outermost rows and columns, per axis.
    pub fn edge_occupation(&self) -> (f64, f64) {
        let (n1, n2) = (self.n1(), self.n2());
        let row = |i: usize| self.amps[i * n2..(i + 1) * n2].iter().map(|z| z.norm_sqr()).sum::<f64>();
        let col = |j: usize| (0..n1).map(|i| self.amps[i * n2 + j].norm_sqr()).sum::<f64>();
        (row(0) + row(n1 - 1), col(0) + col(n2 - 1))
    }

    pub fn matrix(&self) -> Array2<C64> {
        Array2::from_shape_vec((self.n1(), self.n2()), self.amps.clone()).expect("shape matches")
    }
}

struct Axis {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Axis {
    fn new(planner: &mut FftPlanner<f64>, n: usize) -> Self {
        Axis {
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }
}

const ROW_BLOCK: usize = 32;

pub struct CoupledPropagator {
    spec: CoupledSpec,
    l1: usize,
    l2: usize,
    a1: Axis,
    a2: Axis,
    kick: Vec<C64>,
    free1: Vec<C64>,
    free2: Vec<C64>,
    buf: Vec<C64>,
    pub spill_threshold: f64,
}

fn transpose(src: &[C64], dst: &mut [C64], rows: usize, cols: usize) {
    dst.par_chunks_mut(rows).enumerate().for_each(|(j, out)| {
        for (i, o) in out.iter_mut().enumerate() {
            *o = src[i * cols + j];
        }
    });
}

fn rows_fft(data: &mut [C64], n: usize, fft: &Arc<dyn Fft<f64>>) {
    data.par_chunks_mut(n * ROW_BLOCK).for_each(|c| fft.process(c));
}

impl CoupledPropagator {
    pub fn new(spec: &CoupledSpec, l1: usize, l2: usize) -> Self {
        let (n1, n2) = (2 * l1 + 1, 2 * l2 + 1);
        let mut planner = FftPlanner::new();
        let (t1, t2) = (theta_grid(l1), theta_grid(l2));
        let scale = 1.0 / (n1 * n2) as f64;
        let mut kick = Vec::with_capacity(n1 * n2);
        for &a in &t1 {
            kick.extend(t2.iter().map(|&b| C64::from_polar(scale, -spec.potential(a, b))));
        }
        CoupledPropagator {
            spec: *spec,
            l1,
            l2,
            a1: Axis::new(&mut planner, n1),
            a2: Axis::new(&mut planner, n2),
            kick,
            free1: free_phases(l1, 1.0, 0.0),
            free2: free_phases(l2, 1.0, 0.0),
            buf: vec![C64::new(0.0, 0.0); n1 * n2],
            spill_threshold: DEFAULT_SPILL_THRESHOLD,
        }
    }

    pub fn spec(&self) -> &CoupledSpec {
        &self.spec
    }

    fn transform(&mut self, a: &mut [C64], inverse: bool) {
        let (n1, n2) = (2 * self.l1 + 1, 2 * self.l2 + 1);
        let (f1, f2) = if inverse {
            (&self.a1.inv, &self.a2.inv)
        } else {
            (&self.a1.fwd, &self.a2.fwd)
        };
        rows_fft(a, n2, f2);
        transpose(a, &mut self.buf, n1, n2);
        rows_fft(&mut self.buf, n1, f1);
        transpose(&self.buf, a, n2, n1);
    }

    pub fn step(&mut self, s: &mut TwoRotorState) -> Result<StepReport> {
        if s.l1 != self.l1 || s.l2 != self.l2 {
            return Err(Error::usage("state and propagator dimensions differ"));
        }
        let mut amps = std::mem::take(&mut s.amps);
        self.transform(&mut amps, true);
        amps.par_iter_mut().zip(self.kick.par_iter()).for_each(|(x, k)| *x *= k);
        self.transform(&mut amps, false);
        let n2 = self.free2.len();
        let (f1, f2) = (&self.free1, &self.free2);
        amps.par_chunks_mut(n2).enumerate().for_each(|(i, row)| {
            for (x, p) in row.iter_mut().zip(f2) {
                *x *= f1[i] * p;
            }
        });
        s.amps = amps;
        let (e1, e2) = s.edge_occupation();
        let edge = e1.max(e2) / s.norm().max(f64::MIN_POSITIVE);
        Ok(StepReport {
            spill: edge > self.spill_threshold,
            edge,
        })
    }
}

pub fn coupled_step(s: &TwoRotorState, spec: &CoupledSpec) -> Result<(TwoRotorState, StepReport)> {
    let mut p = CoupledPropagator::new(spec, s.l1, s.l2);
    let mut out = s.clone();
    let r = p.step(&mut out)?;
    Ok((out, r))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginals {
    pub e1: f64,
    pub e2: f64,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
}

pub fn marginal_observables(s: &TwoRotorState) -> Marginals {
    let (n1, n2) = (s.n1(), s.n2());
    let p1: Vec<f64> = s
        .amps
        .par_chunks(n2)
        .map(|row| {
            let mut acc = Neumaier::default();
            row.iter().for_each(|z| acc.add(z.norm_sqr()));
            acc.value()
        })
        .collect();
    let p2: Vec<f64> = (0..n2)
        .into_par_iter()
        .map(|j| {
            let mut acc = Neumaier::default();
            (0..n1).for_each(|i| acc.add(s.amps[i * n2 + j].norm_sqr()));
            acc.value()
        })
        .collect();
    let energy = |p: &[f64], l: usize| {
        let mut acc = Neumaier::default();
        for (i, w) in p.iter().enumerate() {
            let m = i as f64 - l as f64;
            acc.add(0.5 * w * m * m);
        }
        acc.value()
    };
    let norm: f64 = p1.iter().sum();
    Marginals {
        e1: energy(&p1, s.l1) / norm,
        e2: energy(&p2, s.l2) / norm,
        p1,
        p2,
    }
}

/// `rho_1 = Tr_2 |psi><psi|` for `keep = 1`, `rho_2` for `keep = 2`.
pub fn reduced_density_matrix(s: &TwoRotorState, keep: u8) -> Result<Array2<C64>> {
    let m = s.matrix();
    match keep {
        1 => Ok(linalg::gram(&m)),
        // rho_2[a, b] = sum_i psi[i, a] conj(psi[i, b])
        2 => Ok(linalg::gram(&m.t().to_owned())),
        _ => Err(Error::usage("keep must be 1 or 2")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entanglement {
    pub s_vn: f64,
    pub s_lin: f64,
    pub n_eff: f64,
    /// Total magnitude of negative eigenvalues set to zero.
    pub clip_mass: f64,
}

pub fn entanglement_from_spectrum(lambda: &[f64]) -> Result<Entanglement> {
    let trace: f64 = lambda.iter().sum();
    if (trace - 1.0).abs() > TRACE_TOLERANCE {
        return Err(Error::State(format!("reduced density matrix trace {trace}")));
    }
    let mut s_vn = Neumaier::default();
    let mut purity = Neumaier::default();
    let mut clip = 0.0;
    for &l in lambda {
        if l < 0.0 {
            clip += -l;
        }
        if l < EIGEN_FLOOR {
            continue;
        }
        s_vn.add(-l * l.ln());
        purity.add(l * l);
    }
    Ok(Entanglement {
        s_vn: s_vn.value(),
        s_lin: 1.0 - purity.value(),
        n_eff: 1.0 / purity.value(),
        clip_mass: clip,
    })
}

pub fn entanglement_measures(rho: &Array2<C64>) -> Result<Entanglement> {
    entanglement_from_spectrum(&linalg::eigvalsh(rho))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledRun {
    /// Columns `t, E1, E2, SvN, Slin, Neff`.
    pub series: TimeSeries,
    pub state: TwoRotorState,
    pub first_spill: Option<usize>,
    pub max_edge: f64,
}

/// Evolves and records energies and entanglement at the listed times.
pub fn coupled_run(spec: &CoupledSpec, initial: &TwoRotorState, record: &[usize]) -> Result<CoupledRun> {
    let steps = record.iter().copied().max().unwrap_or(0);
    let mut p = CoupledPropagator::new(spec, initial.l1, initial.l2);
    let mut s = initial.clone();
    let mut series = TimeSeries::new(&["t", "E1", "E2", "SvN", "Slin", "Neff"]);
    let mut first_spill = None;
    let mut max_edge: f64 = 0.0;
    let mut wanted: Vec<usize> = record.to_vec();
    wanted.sort_unstable();
    wanted.dedup();
    let mut next = wanted.iter().peekable();
    let push = |s: &TwoRotorState, t: usize, series: &mut TimeSeries| -> Result<()> {
        let m = marginal_observables(s);
        let e = entanglement_measures(&reduced_density_matrix(s, 1)?)?;
        series.push(vec![t as f64, m.e1, m.e2, e.s_vn, e.s_lin, e.n_eff]);
        Ok(())
    };
    if next.peek() == Some(&&0) {
        push(&s, 0, &mut series)?;
        next.next();
    }
    for t in 1..=steps {
        let r = p.step(&mut s)?;
        max_edge = max_edge.max(r.edge);
        if r.spill && first_spill.is_none() {
            first_spill = Some(t);
        }
        if next.peek() == Some(&&t) {
            push(&s, t, &mut series)?;
            next.next();
        }
    }
    Ok(CoupledRun {
        series,
        state: s,
        first_spill,
        max_edge,
    })
}

/// Every step up to `dense`, then `n_log` roughly log-spaced times up to `steps`.
pub fn record_times(steps: usize, dense: usize, n_log: usize) -> Vec<usize> {
    let mut t: Vec<usize> = (0..=dense.min(steps)).collect();
    if steps > dense && n_log > 0 {
        let (a, b) = ((dense.max(1) as f64).ln(), (steps as f64).ln());
        for i in 1..=n_log {
            t.push((a + (b - a) * i as f64 / n_log as f64).exp().round() as usize);
        }
    }
    t.sort_unstable();
    t.dedup();
    t
}

/// Early window for the `xi^2 t` regime of `S_lin`.
pub const EARLY_WINDOW: (f64, f64) = (5.0, 40.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntanglementLaws {
    /// `dS_lin/dt` over the early window.
    pub early_slin_slope: f64,
    /// `dS_vN / d ln t` over the late window.
    pub late_svn_log_slope: f64,
    /// Exponent of `1 - S_lin ~ t^p` over the late window.
    pub slin_deficit_exponent: f64,
    pub late_window: (f64, f64),
}

fn window_fit(x: &[f64], y: &[f64], t: &[f64], w: (f64, f64)) -> Result<crate::stats::LineFit> {
    let (a, b): (Vec<f64>, Vec<f64>) = t
        .iter()
        .zip(x.iter().zip(y))
        .filter(|(t, (_, v))| **t >= w.0 && **t <= w.1 && v.is_finite())
        .map(|(_, (a, b))| (*a, *b))
        .unzip();
    crate::stats::fit_line(&a, &b).filter(|f| f.n >= 3).ok_or(Error::Fit {
        msg: format!("fewer than three points in [{}, {}]", w.0, w.1),
        residual: f64::NAN,
    })
}

pub fn entanglement_laws(series: &TimeSeries, late: (f64, f64)) -> Result<EntanglementLaws> {
    let col = |c: &str| series.column(c).ok_or_else(|| Error::usage(format!("series lacks {c}")));
    let (t, svn, slin) = (col("t")?, col("SvN")?, col("Slin")?);
    let ln_t: Vec<f64> = t.iter().map(|x| x.ln()).collect();
    let deficit: Vec<f64> = slin.iter().map(|s| (1.0 - s).ln()).collect();
    Ok(EntanglementLaws {
        early_slin_slope: window_fit(&t, &slin, &t, EARLY_WINDOW)?.slope,
        late_svn_log_slope: window_fit(&ln_t, &svn, &t, late)?.slope,
        slin_deficit_exponent: window_fit(&ln_t, &deficit, &t, late)?.slope,
        late_window: late,
    })
}

/// `<A_s^sigma A_r^tau> - <A_s^sigma><A_r^tau>` for the Heisenberg operators
/// `A_r^tau = U^-r exp(i tau sign theta) U^r`, indexed `[s][r][sigma][tau]`.
fn covariances(k: f64, l: usize, init: &InitKind, steps: usize, sign: i64) -> Result<Vec<Vec<[[C64; 2]; 2]>>> {
    let spec = FloquetSpec::kicked_rotor(k, 1.0);
    let psi0 = init_state(l, 1.0, init)?;
    let mut prop = Propagator::new(&spec, l);
    let mut traj = vec![psi0.clone()];
    for t in 0..steps {
        let mut next = traj[t].clone();
        prop.step(&mut next, t)?;
        traj.push(next);
    }
    let shift = |s: &RotorState, by: i64| -> RotorState {
        let mut out = s.clone();
        let n = s.amps.len() as i64;
        for (i, o) in out.amps.iter_mut().enumerate() {
            let j = i as i64 - by;
            *o = if (0..n).contains(&j) { s.amps[j as usize] } else { C64::new(0.0, 0.0) };
        }
        out
    };
    let dot = |a: &RotorState, b: &RotorState| -> C64 { a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum() };
    let taus = [1i64, -1];
    // means <A_r^tau> = <psi(r)| e^{i tau theta} |psi(r)>
    let mean: Vec<[C64; 2]> = (0..steps)
        .map(|r| taus.map(|t| dot(&traj[r], &shift(&traj[r], sign * t))))
        .collect();
    // raw[s][r][sigma][tau] for s >= r: <psi(s)| e^{i sigma theta} U^{s-r} e^{i tau theta} |psi(r)>
    let mut raw = vec![vec![[[C64::new(0.0, 0.0); 2]; 2]; steps]; steps];
    for r in 0..steps {
        for (ti, &tau) in taus.iter().enumerate() {
            let mut w = shift(&traj[r], sign * tau);
            for s in r..steps {
                if s > r {
                    prop.step(&mut w, s - 1)?;
                }
                for (si, &sigma) in taus.iter().enumerate() {
                    raw[s][r][si][ti] = dot(&shift(&traj[s], -sign * sigma), &w);
                }
            }
        }
    }
    let mut cov = vec![vec![[[C64::new(0.0, 0.0); 2]; 2]; steps]; steps];
    for s in 0..steps {
        for r in 0..steps {
            for si in 0..2 {
                for ti in 0..2 {
                    let full = if s >= r {
                        raw[s][r][si][ti]
                    } else {
                        raw[r][s][1 - ti][1 - si].conj()
                    };
                    cov[s][r][si][ti] = full - mean[s][si] * mean[r][ti];
                }
            }
        }
    }
    Ok(cov)
}

/// Second-order linear entropy `2 xi^2 sum_{r,s<t} C(r,s)` from the connected
/// two-time correlator of `F(r) = cos(theta1(r) - theta2(r))` under the
/// uncoupled dynamics. Columns `t, Slin`.
pub fn perturbative_linear_entropy(spec: &CoupledSpec, l: usize, i1: &InitKind, i2: &InitKind, steps: usize) -> Result<TimeSeries> {
    let c1 = covariances(spec.k1, l, i1, steps, 1)?;
    let c2 = covariances(spec.k2, l, i2, steps, -1)?;
    let mut out = TimeSeries::new(&["t", "Slin"]);
    out.push(vec![0.0, 0.0]);
    let mut total = C64::new(0.0, 0.0);
    for t in 1..=steps {
        let n = t - 1;
        // add the new row and column of the t x t correlator block
        for r in 0..=n {
            let pairs: &[(usize, usize)] = if r == n { &[(n, n)] } else { &[(n, r), (r, n)] };
            for &(a, b) in pairs {
                let mut c = C64::new(0.0, 0.0);
                for si in 0..2 {
                    for ti in 0..2 {
                        c += c1[a][b][si][ti] * c2[a][b][si][ti];
                    }
                }
                total += c / 4.0;
            }
        }
        out.push(vec![t as f64, 2.0 * spec.xi * spec.xi * total.re]);
    }
    Ok(out)
}

/// Dense `N1 N2 x N1 N2` Floquet matrix from the Hermitian kick generator
/// on the periodic momentum lattice, exponentiated by diagonalization.
pub fn dense_coupled_matrix(spec: &CoupledSpec, l1: usize, l2: usize) -> Array2<C64> {
    let (n1, n2) = (2 * l1 + 1, 2 * l2 + 1);
    let dim = n1 * n2;
    let idx = |i: usize, j: usize| i * n2 + j;
    let mut h = Array2::<C64>::zeros((dim, dim));
    for i in 0..n1 {
        for j in 0..n2 {
            let a = idx(i, j);
            let up1 = idx((i + 1) % n1, j);
            let up2 = idx(i, (j + 1) % n2);
            let diag = idx((i + 1) % n1, (j + n2 - 1) % n2);
            for (b, w) in [(up1, spec.k1), (up2, spec.k2), (diag, spec.xi)] {
                h[[b, a]] += C64::new(w / 2.0, 0.0);
                h[[a, b]] += C64::new(w / 2.0, 0.0);
            }
        }
    }
    let (vals, vecs) = linalg::eigh(&h);
    let phase = ndarray::Array2::from_diag(&ndarray::Array1::from_iter(vals.iter().map(|&v| C64::from_polar(1.0, -v))));
    let kick = vecs.dot(&phase).dot(&vecs.t().mapv(|z| z.conj()));
    let (f1, f2) = (free_phases(l1, 1.0, 0.0), free_phases(l2, 1.0, 0.0));
    let mut u = kick;
    for i in 0..n1 {
        for j in 0..n2 {
            let f = f1[i] * f2[j];
            u.row_mut(idx(i, j)).mapv_inplace(|z| z * f);
        }
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::evolve;

    fn delta(l: usize) -> TwoRotorState {
        TwoRotorState::from_inits(l, l, &InitKind::Delta { m0: 0 }, &InitKind::Delta { m0: 0 }).unwrap()
    }

    #[test]
    fn uncoupled_is_tensor_product() {
        let spec = CoupledSpec::new(2.0, 3.0, 0.0).unwrap();
        let mut s = delta(32);
        let mut p = CoupledPropagator::new(&spec, 32, 32);
        for _ in 0..5 {
            p.step(&mut s).unwrap();
        }
        let d = init_state(32, 1.0, &InitKind::Delta { m0: 0 }).unwrap();
        let a = evolve(&d, &FloquetSpec::kicked_rotor(2.0, 1.0), 5, 5).unwrap().state;
        let b = evolve(&d, &FloquetSpec::kicked_rotor(3.0, 1.0), 5, 5).unwrap().state;
        let expect = TwoRotorState::product(&a, &b).unwrap();
        for (x, y) in s.amps.iter().zip(&expect.amps) {
            assert!((x - y).norm() < 1e-12);
        }
        let e = entanglement_measures(&reduced_density_matrix(&s, 1).unwrap()).unwrap();
        assert!(e.s_vn.abs() < 1e-12 && e.s_lin.abs() < 1e-12);
    }

    #[test]
    fn dense_oracle_at_small_grid() {
        let spec = CoupledSpec::new(1.3, 0.8, 0.6).unwrap();
        let u = dense_coupled_matrix(&spec, 8, 8);
        let mut r = crate::rng::stream(3, 0);
        let amps: Vec<C64> = (0..289)
            .map(|_| C64::new(crate::rng::normal(&mut r), crate::rng::normal(&mut r)))
            .collect();
        let mut s = TwoRotorState { l1: 8, l2: 8, amps: amps.clone() };
        CoupledPropagator::new(&spec, 8, 8).step(&mut s).unwrap();
        let expect = u.dot(&ndarray::Array1::from(amps));
        for (x, y) in s.amps.iter().zip(expect.iter()) {
            assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn norm_and_symmetry() {
        let spec = CoupledSpec::new(9.0, 10.0, 0.3).unwrap();
        let mut s = delta(48);
        let mut p = CoupledPropagator::new(&spec, 48, 48);
        for _ in 0..6 {
            let before = s.norm();
            p.step(&mut s).unwrap();
            assert!((s.norm() - before).abs() < 1e-12);
        }
        let e1 = entanglement_measures(&reduced_density_matrix(&s, 1).unwrap()).unwrap();
        let e2 = entanglement_measures(&reduced_density_matrix(&s, 2).unwrap()).unwrap();
        assert!((e1.s_vn - e2.s_vn).abs() < 1e-10);
        assert!(e1.s_vn > 0.0 && e1.s_lin < 1.0);
        assert!(e1.s_vn <= (97f64).ln());
    }

    #[test]
    fn bell_state_measures() {
        let mut s = TwoRotorState { l1: 1, l2: 1, amps: vec![C64::new(0.0, 0.0); 9] };
        let h = std::f64::consts::FRAC_1_SQRT_2;
        s.amps[4] = C64::new(h, 0.0);
        s.amps[8] = C64::new(h, 0.0);
        let rho = reduced_density_matrix(&s, 1).unwrap();
        let mut l = linalg::eigvalsh(&rho);
        l.sort_by(f64::total_cmp);
        assert!((l[2] - 0.5).abs() < 1e-15 && (l[1] - 0.5).abs() < 1e-15);
        let e = entanglement_measures(&rho).unwrap();
        assert!((e.s_vn - 2f64.ln()).abs() < 1e-14);
        assert!((e.s_lin - 0.5).abs() < 1e-14 && (e.n_eff - 2.0).abs() < 1e-13);
    }

    #[test]
    fn partial_traces_match_index_sums() {
        let mut r = crate::rng::stream(11, 0);
        let mut amps: Vec<C64> = (0..45)
            .map(|_| C64::new(crate::rng::normal(&mut r), crate::rng::normal(&mut r)))
            .collect();
        let n: f64 = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|z| *z /= n);
        let s = TwoRotorState { l1: 4, l2: 2, amps };
        let r1 = reduced_density_matrix(&s, 1).unwrap();
        let r2 = reduced_density_matrix(&s, 2).unwrap();
        for a in 0..9 {
            for b in 0..9 {
                let e: C64 = (0..5).map(|k| s.amps[a * 5 + k] * s.amps[b * 5 + k].conj()).sum();
                assert!((r1[[a, b]] - e).norm() < 1e-12);
            }
        }
        for a in 0..5 {
            for b in 0..5 {
                let e: C64 = (0..9).map(|k| s.amps[k * 5 + a] * s.amps[k * 5 + b].conj()).sum();
                assert!((r2[[a, b]] - e).norm() < 1e-12);
            }
        }
        assert!((r1.diag().iter().map(|z| z.re).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_trace() {
        assert!(matches!(entanglement_from_spectrum(&[0.5, 0.4]), Err(Error::State(_))));
        let e = entanglement_from_spectrum(&[1.0, 0.0]).unwrap();
        assert_eq!((e.s_vn, e.s_lin, e.n_eff), (0.0, 0.0, 1.0));
    }

    #[test]
    fn product_delta_has_zero_energy() {
        let m = marginal_observables(&delta(4));
        assert_eq!((m.e1, m.e2), (0.0, 0.0));
    }

    #[test]
    fn correlator_route_matches_weak_coupling() {
        let spec = CoupledSpec::new(2.5, 3.0, 0.01).unwrap();
        let d = InitKind::Delta { m0: 0 };
        let init = TwoRotorState::from_inits(40, 40, &d, &d).unwrap();
        let times: Vec<usize> = (0..=12).collect();
        let exact = coupled_run(&spec, &init, &times).unwrap().series.column("Slin").unwrap();
        let pert = perturbative_linear_entropy(&spec, 40, &d, &d, 12).unwrap().column("Slin").unwrap();
        for t in 1..=12 {
            assert!((pert[t] / exact[t] - 1.0).abs() < 0.02, "t={t}");
        }
    }
}
