//! Floquet bands of the on-resonance double-kicked rotor over the
//! (Bloch phase, synthetic phase) torus.

mod pump;
mod spin;

pub use pump::*;
pub use spin::*;

use crate::classical::KickPotential;
use crate::error::{Error, Result};
use crate::linalg;
use crate::pseudoclassical::gcd;
use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Largest neglected Fourier coefficient of a kick.
pub const TRUNCATION_TOL: f64 = 1e-14;
/// Chord distance `|e^{i w_n} - e^{i w_n'}|` below which bands count as touching.
pub const GAP_TOLERANCE: f64 = 1e-6;
pub const RESIDUAL_TOL: f64 = 1e-10;

/// `U(alpha) = F(T - T0) K F(T0) K(alpha)` with `T = 4 pi`, `T0 = 2 pi r / s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonantDkrSpec {
    pub r: i64,
    pub s: i64,
    pub k: f64,
    pub alpha: f64,
    pub phi: f64,
    pub spin: Option<[SpinKickParams; 2]>,
    /// Fourier cutoff of the kicks; chosen from [`TRUNCATION_TOL`] when absent.
    pub l_max: Option<usize>,
}

impl ResonantDkrSpec {
    pub fn new(r: i64, s: i64, k: f64) -> Result<Self> {
        if s < 1 || gcd(r, s) != 1 {
            return Err(Error::usage(format!("need coprime r, s >= 1, got {r}/{s}")));
        }
        Ok(ResonantDkrSpec {
            r,
            s,
            k,
            alpha: 0.0,
            phi: 0.0,
            spin: None,
            l_max: None,
        })
    }

    pub fn with_spin(mut self, kicks: [SpinKickParams; 2]) -> Self {
        self.spin = Some(kicks);
        self
    }

    pub fn at(mut self, phi: f64, alpha: f64) -> Self {
        self.phi = phi;
        self.alpha = alpha;
        self
    }

    pub fn t0(&self) -> f64 {
        TAU * self.r as f64 / self.s as f64
    }

    pub fn components(&self) -> usize {
        if self.spin.is_some() {
            2
        } else {
            1
        }
    }

    pub fn dim(&self) -> usize {
        self.s as usize * self.components()
    }

    /// `exp(-i scale H_j(theta))`, row-major `c x c`.
    fn kick(&self, which: usize, theta: f64, scale: f64) -> Vec<C64> {
        match &self.spin {
            None => vec![C64::from_polar(1.0, -scale * KickPotential::cosine(self.k).value(theta))],
            Some(p) => {
                let (v0, v) = p[which].fields(theta);
                let m = crate::quantum::spin_factor(scale * v0, v.map(|x| scale * x));
                vec![m[0][0], m[0][1], m[1][0], m[1][1]]
            }
        }
    }
}

/// Fourier coefficients `c_d` of a matrix-valued kick, `|d| <= d_max`.
#[derive(Debug, Clone)]
pub struct KickCoefficients {
    pub c: usize,
    pub d_max: usize,
    /// Largest coefficient magnitude beyond `d_max`.
    pub tail: f64,
    data: Vec<C64>,
}

impl KickCoefficients {
    pub fn get(&self, d: i64, a: usize, b: usize) -> C64 {
        let i = (d + self.d_max as i64) as usize;
        self.data[(i * self.c + a) * self.c + b]
    }

    pub fn compute(f: impl Fn(f64) -> Vec<C64>, c: usize, l_max: Option<usize>) -> Result<Self> {
        let mut n = 256usize;
        if let Some(l) = l_max {
            n = n.max((4 * l + 4).next_power_of_two());
        }
        loop {
            let mut planner = FftPlanner::new();
            let fft = planner.plan_fft_forward(n);
            let mut cols: Vec<Vec<C64>> = vec![Vec::with_capacity(n); c * c];
            for j in 0..n {
                let m = f(TAU * j as f64 / n as f64);
                for (col, v) in cols.iter_mut().zip(m) {
                    col.push(v / n as f64);
                }
            }
            for col in cols.iter_mut() {
                fft.process(col);
            }
            let at = |d: i64| -> f64 {
                let idx = d.rem_euclid(n as i64) as usize;
                cols.iter().map(|col| col[idx].norm()).fold(0.0, f64::max)
            };
            let half = (n / 2) as i64;
            // tail[d] = max over d < |d'| < n/2
            let mut tail = vec![0.0_f64; half as usize + 1];
            for d in (0..half).rev() {
                tail[d as usize] = tail[d as usize + 1].max(at(d + 1)).max(at(-(d + 1)));
            }
            let chosen = match l_max {
                Some(l) => {
                    if tail[l] > TRUNCATION_TOL {
                        return Err(Error::Truncation(format!(
                            "kick coefficients beyond |d| = {l} reach {:.2e}",
                            tail[l]
                        )));
                    }
                    Some(l)
                }
                None => (0..half as usize).find(|&d| tail[d] <= TRUNCATION_TOL).filter(|&d| 4 * d < n),
            };
            if let Some(d_max) = chosen {
                let mut data = Vec::with_capacity((2 * d_max + 1) * c * c);
                for d in -(d_max as i64)..=d_max as i64 {
                    let idx = d.rem_euclid(n as i64) as usize;
                    for col in &cols {
                        data.push(col[idx]);
                    }
                }
                return Ok(KickCoefficients {
                    c,
                    d_max,
                    tail: tail[d_max],
                    data,
                });
            }
            if n >= 1 << 16 {
                return Err(Error::Truncation("kick coefficients do not decay".into()));
            }
            n *= 2;
        }
    }
}

/// Which factor of a reduced product is differentiated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Deriv {
    None,
    Phi,
    Alpha,
}

/// `exp(-i pi r n^2 / s)`, reduced in integers.
fn free_phase(r: i64, s: i64, n: i64) -> C64 {
    let e = (r * n * n).rem_euclid(2 * s);
    C64::from_polar(1.0, -PI * e as f64 / s as f64)
}

/// Reduction `sum_{n = m' mod s} exp(i (n - m) phi / s) <m| O |n>` of a
/// translation-invariant operator with elements `g(m, n) c_{m-n}`.
fn reduce(
    spec: &ResonantDkrSpec,
    coeffs: &KickCoefficients,
    alpha: f64,
    sandwich: bool,
    deriv: Deriv,
) -> Array2<C64> {
    let s = spec.s;
    let c = coeffs.c;
    let dim = s as usize * c;
    let mut out = Array2::zeros((dim, dim));
    for m in 0..s {
        let fm = if sandwich { free_phase(spec.r, s, m).conj() } else { C64::new(1.0, 0.0) };
        for d in -(coeffs.d_max as i64)..=coeffs.d_max as i64 {
            let n = m - d;
            let mp = n.rem_euclid(s) as usize;
            let fnn = if sandwich { free_phase(spec.r, s, n) } else { C64::new(1.0, 0.0) };
            let phase = C64::from_polar(1.0, d as f64 * alpha - d as f64 * spec.phi / s as f64);
            let factor = match deriv {
                Deriv::None => C64::new(1.0, 0.0),
                Deriv::Phi => C64::new(0.0, -(d as f64) / s as f64),
                Deriv::Alpha => C64::new(0.0, d as f64),
            };
            let w = fm * fnn * phase * factor;
            for a in 0..c {
                for b in 0..c {
                    out[[m as usize * c + a, mp * c + b]] += w * coeffs.get(d, a, b);
                }
            }
        }
    }
    out
}

/// Prepared kick coefficients for repeated evaluation over a mesh.
#[derive(Debug, Clone)]
pub struct ReducedBuilder {
    pub spec: ResonantDkrSpec,
    k1: KickCoefficients,
    k2: KickCoefficients,
}

impl ReducedBuilder {
    pub fn new(spec: &ResonantDkrSpec) -> Result<Self> {
        let c = spec.components();
        Ok(ReducedBuilder {
            spec: *spec,
            k1: KickCoefficients::compute(|t| spec.kick(0, t, 1.0), c, spec.l_max)?,
            k2: KickCoefficients::compute(|t| spec.kick(1, t, 1.0), c, spec.l_max)?,
        })
    }

    pub fn truncation(&self) -> (usize, f64) {
        (
            self.k1.d_max.max(self.k2.d_max),
            self.k1.tail.max(self.k2.tail),
        )
    }

    fn at(&self, phi: f64) -> ResonantDkrSpec {
        let mut s = self.spec;
        s.phi = phi;
        s
    }

    pub fn matrix(&self, phi: f64, alpha: f64) -> Array2<C64> {
        let s = self.at(phi);
        let second = reduce(&s, &self.k2, 0.0, true, Deriv::None);
        let first = reduce(&s, &self.k1, alpha, false, Deriv::None);
        second.dot(&first)
    }

    /// `(U, dU/dphi, dU/dalpha)` from the analytic phase factors.
    pub fn with_derivatives(&self, phi: f64, alpha: f64) -> [Array2<C64>; 3] {
        let s = self.at(phi);
        let p = reduce(&s, &self.k2, 0.0, true, Deriv::None);
        let dp = reduce(&s, &self.k2, 0.0, true, Deriv::Phi);
        let k = reduce(&s, &self.k1, alpha, false, Deriv::None);
        let dk_phi = reduce(&s, &self.k1, alpha, false, Deriv::Phi);
        let dk_alpha = reduce(&s, &self.k1, alpha, false, Deriv::Alpha);
        let u = p.dot(&k);
        let du_phi = dp.dot(&k) + p.dot(&dk_phi);
        let du_alpha = p.dot(&dk_alpha);
        [u, du_phi, du_alpha]
    }
}

/// Reduced `s x s` (or `2s x 2s`) Floquet matrix at `spec.phi`, `spec.alpha`.
pub fn reduced_floquet_matrix(spec: &ResonantDkrSpec) -> Result<Array2<C64>> {
    let b = ReducedBuilder::new(spec)?;
    let u = b.matrix(spec.phi, spec.alpha);
    let dev = unitarity_defect(&u);
    if dev > RESIDUAL_TOL {
        return Err(Error::Truncation(format!("reduced matrix unitarity defect {dev:.2e}")));
    }
    Ok(u)
}

/// `max |U^dagger U - 1|` elementwise.
pub fn unitarity_defect(u: &Array2<C64>) -> f64 {
    let p = u.t().mapv(|z| z.conj()).dot(u);
    let mut dev: f64 = 0.0;
    for ((i, j), z) in p.indexed_iter() {
        let target = if i == j { 1.0 } else { 0.0 };
        dev = dev.max((z - target).norm());
    }
    dev
}

/// Gauge `u(phi + 2 pi) = D u(phi)`, `D = diag(exp(-i 2 pi m / s))`.
pub fn bloch_gauge(s: i64, components: usize) -> Vec<C64> {
    (0..s)
        .flat_map(|m| std::iter::repeat_n(C64::from_polar(1.0, -TAU * m as f64 / s as f64), components))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapClosureWarning {
    pub i: usize,
    pub j: usize,
    pub gap: f64,
}

/// Normalized eigenpairs sorted by quasienergy in `[0, 2 pi)`.
fn node_eigen(u: &Array2<C64>) -> (Vec<f64>, Vec<C64>, Array2<C64>, f64) {
    let (vals, mut vecs) = linalg::eig(u);
    let n = vals.len();
    for mut col in vecs.columns_mut() {
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        col.mapv_inplace(|z| z / norm);
    }
    let mut order: Vec<usize> = (0..n).collect();
    let omega: Vec<f64> = vals.iter().map(|z| z.arg().rem_euclid(TAU)).collect();
    order.sort_by(|&a, &b| omega[a].total_cmp(&omega[b]));
    let mut sorted = Array2::zeros((n, n));
    for (new, &old) in order.iter().enumerate() {
        sorted.column_mut(new).assign(&vecs.column(old));
    }
    let lam: Vec<C64> = order.iter().map(|&o| vals[o]).collect();
    let mut residual: f64 = 0.0;
    for (b, l) in lam.iter().enumerate() {
        let v = sorted.column(b);
        let uv = u.dot(&v);
        let r = uv
            .iter()
            .zip(v.iter())
            .map(|(x, y)| (x - l * y).norm_sqr())
            .sum::<f64>()
            .sqrt();
        residual = residual.max(r);
    }
    let om = order.iter().map(|&o| omega[o]).collect();
    (om, lam, sorted, residual)
}

fn min_chord(lam: &[C64]) -> f64 {
    let mut g = f64::INFINITY;
    for a in 0..lam.len() {
        for b in a + 1..lam.len() {
            g = g.min((lam[a] - lam[b]).norm());
        }
    }
    g
}

fn overlap(u: &Array2<C64>, a: usize, v: &Array2<C64>, b: usize) -> C64 {
    u.column(a).iter().zip(v.column(b).iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Band eigenvectors over a uniform mesh `phi_i = 2 pi i / n_phi`,
/// `alpha_j = 2 pi j / n_alpha`, labeled by overlap continuation.
#[derive(Debug, Clone)]
pub struct BandGrid {
    pub spec: ResonantDkrSpec,
    pub n_phi: usize,
    pub n_alpha: usize,
    /// `omega[node][band]`, node `i * n_alpha + j`.
    pub omega: Vec<Vec<f64>>,
    pub eigenvalues: Vec<Vec<C64>>,
    /// Columns are bands.
    pub vectors: Vec<Array2<C64>>,
    pub gaps: Vec<f64>,
    pub warnings: Vec<GapClosureWarning>,
    pub max_residual: f64,
    /// Labels agree across the `phi` and `alpha` seams.
    pub seams_consistent: bool,
}

impl BandGrid {
    pub fn node(&self, i: usize, j: usize) -> usize {
        i * self.n_alpha + j
    }

    pub fn bands(&self) -> usize {
        self.spec.dim()
    }

    pub fn phi(&self, i: usize) -> f64 {
        TAU * i as f64 / self.n_phi as f64
    }

    pub fn alpha(&self, j: usize) -> f64 {
        TAU * j as f64 / self.n_alpha as f64
    }

    pub fn min_gap(&self) -> f64 {
        self.gaps.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Band vector at possibly wrapped mesh indices, in the periodic gauge.
    pub fn vector(&self, i: usize, j: usize, band: usize) -> Vec<C64> {
        let v = self.vectors[self.node(i % self.n_phi, j % self.n_alpha)].column(band).to_vec();
        if i >= self.n_phi {
            let d = bloch_gauge(self.spec.s, self.spec.components());
            v.iter().zip(&d).map(|(x, g)| x * g).collect()
        } else {
            v
        }
    }

    /// Multiply every stored eigenvector by an arbitrary phase.
    pub fn regauge(&mut self, phase: impl Fn(usize, usize) -> f64) {
        for (node, vecs) in self.vectors.iter_mut().enumerate() {
            for (b, mut col) in vecs.columns_mut().into_iter().enumerate() {
                let z = C64::from_polar(1.0, phase(node, b));
                col.mapv_inplace(|x| x * z);
            }
        }
    }
}

/// Permutation `perm[a] = b` pairing reference band `a` with current band `b`.
fn match_bands(reference: &Array2<C64>, current: &Array2<C64>) -> Vec<usize> {
    let n = reference.ncols();
    let mut taken = vec![false; n];
    let mut perm = vec![0; n];
    for (a, p) in perm.iter_mut().enumerate() {
        let mut best = usize::MAX;
        let mut best_o = -1.0;
        for (b, &t) in taken.iter().enumerate() {
            if t {
                continue;
            }
            let o = overlap(reference, a, current, b).norm_sqr();
            if o > best_o {
                best_o = o;
                best = b;
            }
        }
        taken[best] = true;
        *p = best;
    }
    perm
}

pub fn band_spectrum(spec: &ResonantDkrSpec, n_phi: usize, n_alpha: usize) -> Result<BandGrid> {
    if n_phi < 2 || n_alpha < 1 {
        return Err(Error::usage("mesh needs n_phi >= 2 and n_alpha >= 1"));
    }
    let builder = ReducedBuilder::new(spec)?;
    let nodes: Vec<(Vec<f64>, Vec<C64>, Array2<C64>, f64)> = (0..n_phi * n_alpha)
        .into_par_iter()
        .map(|node| {
            let (i, j) = (node / n_alpha, node % n_alpha);
            let u = builder.matrix(TAU * i as f64 / n_phi as f64, TAU * j as f64 / n_alpha as f64);
            node_eigen(&u)
        })
        .collect();
    let mut omega = Vec::with_capacity(nodes.len());
    let mut eigenvalues = Vec::with_capacity(nodes.len());
    let mut vectors: Vec<Array2<C64>> = Vec::with_capacity(nodes.len());
    let mut gaps = Vec::with_capacity(nodes.len());
    let mut warnings = Vec::new();
    let mut max_residual: f64 = 0.0;
    for (node, (om, lam, vec, res)) in nodes.into_iter().enumerate() {
        let (i, j) = (node / n_alpha, node % n_alpha);
        max_residual = max_residual.max(res);
        let gap = min_chord(&lam);
        if gap < GAP_TOLERANCE {
            warnings.push(GapClosureWarning { i, j, gap });
        }
        gaps.push(gap);
        let perm = if node == 0 {
            (0..lam.len()).collect()
        } else {
            let reference = if i == 0 { node - 1 } else { node - n_alpha };
            match_bands(&vectors[reference], &vec)
        };
        omega.push(perm.iter().map(|&b| om[b]).collect());
        eigenvalues.push(perm.iter().map(|&b| lam[b]).collect());
        let mut v = Array2::zeros(vec.raw_dim());
        for (a, &b) in perm.iter().enumerate() {
            v.column_mut(a).assign(&vec.column(b));
        }
        vectors.push(v);
    }
    let mut grid = BandGrid {
        spec: *spec,
        n_phi,
        n_alpha,
        omega,
        eigenvalues,
        vectors,
        gaps,
        warnings,
        max_residual,
        seams_consistent: true,
    };
    let d = bloch_gauge(spec.s, spec.components());
    let identity: Vec<usize> = (0..grid.bands()).collect();
    for i in 0..n_phi {
        let last = &grid.vectors[grid.node(i, n_alpha - 1)];
        if match_bands(last, &grid.vectors[grid.node(i, 0)]) != identity {
            grid.seams_consistent = false;
        }
    }
    for j in 0..n_alpha {
        let last = &grid.vectors[grid.node(n_phi - 1, j)];
        let mut wrapped = grid.vectors[grid.node(0, j)].clone();
        for (mut row, g) in wrapped.rows_mut().into_iter().zip(&d) {
            row.mapv_inplace(|x| x * g);
        }
        if match_bands(last, &wrapped) != identity {
            grid.seams_consistent = false;
        }
    }
    Ok(grid)
}

/// Berry curvature per node and band; `None` where a gap closes.
#[derive(Debug, Clone)]
pub struct CurvatureField {
    pub n_phi: usize,
    pub n_alpha: usize,
    pub values: Vec<Option<Vec<f64>>>,
    /// Largest `|Im|` of the curvature before taking the real part.
    pub max_imag: f64,
}

/// `B_n = i (<d_phi n|d_alpha n> - c.c.)`, the curl of `A = i <n|dn>`, with
/// `<n'|dn> = <n'|dU|n> / (lambda_n - lambda_n')` for `n' != n`.
pub fn curvature_from_derivatives(
    lam: &[C64],
    vecs: &Array2<C64>,
    du_phi: &Array2<C64>,
    du_alpha: &Array2<C64>,
) -> Option<(Vec<f64>, f64)> {
    let n = lam.len();
    if min_chord(lam) < GAP_TOLERANCE {
        return None;
    }
    let vh = vecs.t().mapv(|z| z.conj());
    let xp = vh.dot(du_phi).dot(vecs);
    let xa = vh.dot(du_alpha).dot(vecs);
    let mut out = vec![0.0; n];
    let mut max_imag: f64 = 0.0;
    for (a, o) in out.iter_mut().enumerate() {
        let mut acc = C64::new(0.0, 0.0);
        for b in 0..n {
            if b == a {
                continue;
            }
            let dl = lam[a] - lam[b];
            let dphi = xp[[b, a]] / dl;
            let dalpha = xa[[b, a]] / dl;
            acc += dphi.conj() * dalpha;
        }
        let b = C64::new(0.0, 1.0) * (acc - acc.conj());
        max_imag = max_imag.max(b.im.abs());
        *o = b.re;
    }
    Some((out, max_imag))
}

/// Curvature at an arbitrary point of the band with the largest overlap
/// with `reference`.
pub fn curvature_at(builder: &ReducedBuilder, phi: f64, alpha: f64, reference: &[C64]) -> Option<f64> {
    let [u, dp, da] = builder.with_derivatives(phi, alpha);
    let (_, lam, vecs, _) = node_eigen(&u);
    let band = (0..lam.len())
        .map(|b| vecs.column(b).iter().zip(reference).map(|(x, y)| y.conj() * x).sum::<C64>().norm())
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))?
        .0;
    curvature_from_derivatives(&lam, &vecs, &dp, &da).map(|(v, _)| v[band])
}

pub fn berry_curvature(grid: &BandGrid) -> Result<CurvatureField> {
    let builder = ReducedBuilder::new(&grid.spec)?;
    let values: Vec<Option<(Vec<f64>, f64)>> = (0..grid.n_phi * grid.n_alpha)
        .into_par_iter()
        .map(|node| {
            let (i, j) = (node / grid.n_alpha, node % grid.n_alpha);
            let [_, dp, da] = builder.with_derivatives(grid.phi(i), grid.alpha(j));
            curvature_from_derivatives(&grid.eigenvalues[node], &grid.vectors[node], &dp, &da)
        })
        .collect();
    let max_imag = values.iter().flatten().map(|v| v.1).fold(0.0, f64::max);
    Ok(CurvatureField {
        n_phi: grid.n_phi,
        n_alpha: grid.n_alpha,
        values: values.into_iter().map(|v| v.map(|x| x.0)).collect(),
        max_imag,
    })
}

/// Gauge-invariant flux of a band through the plaquette with corner
/// `(i, j)`, in the sign convention of [`curvature_from_derivatives`]. With
/// `A = i <n|dn>` the loop runs `alpha` first.
pub fn plaquette_phase(grid: &BandGrid, i: usize, j: usize, band: usize) -> f64 {
    let link = |a: &[C64], b: &[C64]| -> C64 { a.iter().zip(b).map(|(x, y)| x.conj() * y).sum() };
    let v00 = grid.vector(i, j, band);
    let v10 = grid.vector(i + 1, j, band);
    let v11 = grid.vector(i + 1, j + 1, band);
    let v01 = grid.vector(i, j + 1, band);
    (link(&v00, &v01) * link(&v01, &v11) * link(&v11, &v10) * link(&v10, &v00)).arg()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChernNumbers {
    pub lattice: Vec<i64>,
    /// Unrounded plaquette sums divided by `2 pi`.
    pub lattice_raw: Vec<f64>,
    pub quadrature: Vec<f64>,
}

pub fn chern_numbers(grid: &BandGrid) -> Result<ChernNumbers> {
    if let Some(w) = grid
        .warnings
        .iter()
        .min_by(|a, b| a.gap.total_cmp(&b.gap))
    {
        return Err(Error::ChernUndefined {
            i: w.i,
            j: w.j,
            gap: w.gap,
        });
    }
    let nb = grid.bands();
    let mut raw = vec![0.0; nb];
    for (band, r) in raw.iter_mut().enumerate() {
        let mut acc = crate::stats::Neumaier::default();
        for i in 0..grid.n_phi {
            for j in 0..grid.n_alpha {
                acc.add(plaquette_phase(grid, i, j, band));
            }
        }
        *r = acc.value() / TAU;
    }
    let field = berry_curvature(grid)?;
    let cell = TAU * TAU / (grid.n_phi * grid.n_alpha) as f64;
    let mut quad = vec![0.0; nb];
    for v in field.values.iter().flatten() {
        for (q, b) in quad.iter_mut().zip(v) {
            *q += b * cell / TAU;
        }
    }
    Ok(ChernNumbers {
        lattice: raw.iter().map(|x| x.round() as i64).collect(),
        lattice_raw: raw,
        quadrature: quad,
    })
}

/// Rows `phi, alpha, band, B`.
pub fn curvature_table(grid: &BandGrid, field: &CurvatureField) -> crate::series::TimeSeries {
    let mut t = crate::series::TimeSeries::new(&["phi", "alpha", "band", "B"]);
    for i in 0..grid.n_phi {
        for j in 0..grid.n_alpha {
            if let Some(v) = &field.values[grid.node(i, j)] {
                for (b, x) in v.iter().enumerate() {
                    t.push(vec![grid.phi(i), grid.alpha(j), b as f64, *x]);
                }
            }
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{DoubleKickPropagator, DoubleKickSpec, RotorState};
    use crate::special::bessel_j;

    fn spec(k: f64) -> ResonantDkrSpec {
        ResonantDkrSpec::new(1, 3, k).unwrap()
    }

    #[test]
    fn rejects_common_factor() {
        assert!(matches!(ResonantDkrSpec::new(2, 4, 1.0), Err(Error::Usage(_))));
    }

    #[test]
    fn kick_coefficients_are_bessel() {
        let c = KickCoefficients::compute(|t| vec![C64::from_polar(1.0, -2.0 * t.cos())], 1, None).unwrap();
        for d in -10i64..=10 {
            let expected = C64::new(0.0, -1.0).powi(d as i32) * bessel_j(d, 2.0);
            assert!((c.get(d, 0, 0) - expected).norm() < 1e-13, "d={d}");
        }
        assert!(c.tail <= TRUNCATION_TOL);
    }

    #[test]
    fn requested_cutoff_too_small() {
        let mut s = spec(5.0);
        s.l_max = Some(3);
        assert!(matches!(reduced_floquet_matrix(&s), Err(Error::Truncation(_))));
    }

    #[test]
    fn free_rotor_is_diagonal() {
        let u = reduced_floquet_matrix(&spec(0.0).at(0.4, 1.1)).unwrap();
        for ((i, j), z) in u.indexed_iter() {
            if i == j {
                assert!((z.norm() - 1.0).abs() < 1e-14);
            } else {
                assert!(z.norm() < 1e-14);
            }
        }
    }

    #[test]
    fn unitary_and_phi_periodic_spectrum() {
        let u = reduced_floquet_matrix(&spec(1.0).at(0.3, 0.7)).unwrap();
        assert!(unitarity_defect(&u) < 1e-10);
        let b = ReducedBuilder::new(&spec(2.0)).unwrap();
        let mut a: Vec<f64> = linalg::eigvals(&b.matrix(0.3, 0.7)).iter().map(|z| z.arg()).collect();
        let mut c: Vec<f64> = linalg::eigvals(&b.matrix(0.3 + TAU, 0.7)).iter().map(|z| z.arg()).collect();
        a.sort_by(f64::total_cmp);
        c.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&c) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn matches_full_lattice_propagation() {
        let (phi, alpha, k) = (0.9, 1.3, 2.0);
        let sp = spec(k);
        let u = ReducedBuilder::new(&sp).unwrap().matrix(phi, alpha);
        let cell = [C64::new(0.3, 0.1), C64::new(-0.5, 0.2), C64::new(0.1, 0.7)];
        let l = 300usize;
        let mut st = RotorState {
            l,
            components: 1,
            amps: vec![C64::new(0.0, 0.0); 2 * l + 1],
            hbar_eff: 1.0,
        };
        for m in -(l as i64)..=l as i64 {
            let amp = C64::from_polar(1.0, m as f64 * phi / 3.0) * cell[m.rem_euclid(3) as usize];
            st.amps[(m + l as i64) as usize] = amp;
        }
        let mut p = DoubleKickPropagator::new(
            &DoubleKickSpec {
                potential: KickPotential::cosine(k),
                t0: sp.t0(),
                period: 2.0 * TAU,
            },
            l,
        );
        p.step(&mut st, alpha).unwrap();
        let image = u.dot(&ndarray::arr1(&cell));
        for m in -40i64..=40 {
            let expected = C64::from_polar(1.0, m as f64 * phi / 3.0) * image[m.rem_euclid(3) as usize];
            assert!((st.amps[(m + l as i64) as usize] - expected).norm() < 1e-9, "m={m}");
        }
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        let b = ReducedBuilder::new(&spec(2.0)).unwrap();
        let [_, dp, da] = b.with_derivatives(0.8, 0.4);
        let h = 1e-5;
        let fp = (b.matrix(0.8 + h, 0.4) - b.matrix(0.8 - h, 0.4)) / C64::new(2.0 * h, 0.0);
        let fa = (b.matrix(0.8, 0.4 + h) - b.matrix(0.8, 0.4 - h)) / C64::new(2.0 * h, 0.0);
        for (x, y) in dp.iter().zip(fp.iter()).chain(da.iter().zip(fa.iter())) {
            assert!((x - y).norm() < 1e-8);
        }
    }

    #[test]
    fn single_band_is_trivial() {
        let g = band_spectrum(&ResonantDkrSpec::new(1, 1, 1.0).unwrap(), 8, 8).unwrap();
        assert_eq!(g.bands(), 1);
        assert!(g.seams_consistent);
        let c = chern_numbers(&g).unwrap();
        assert_eq!(c.lattice, vec![0]);
    }

    #[test]
    fn free_rotor_curvature_vanishes() {
        let g = band_spectrum(&spec(0.0), 6, 6);
        // free bands are degenerate at some nodes; check open nodes only
        let g = g.unwrap();
        let f = berry_curvature(&g).unwrap();
        for v in f.values.iter().flatten() {
            assert!(v.iter().all(|b| b.abs() < 1e-12));
        }
    }

    #[test]
    fn curvature_sums_to_zero() {
        let g = band_spectrum(&spec(2.0), 12, 12).unwrap();
        let f = berry_curvature(&g).unwrap();
        for v in f.values.iter().flatten() {
            assert!(v.iter().sum::<f64>().abs() < 1e-9);
        }
        assert!(f.max_imag < 1e-9);
    }

    #[test]
    fn weak_kick_follows_harper_limit() {
        // to first order in k the bands are those of a Harper model at flux 1/3
        let g = band_spectrum(&spec(0.05), 24, 24).unwrap();
        assert!(g.max_residual < RESIDUAL_TOL);
        let mut c = chern_numbers(&g).unwrap().lattice;
        c.sort();
        assert_eq!(c, vec![-1, -1, 2]);
    }

    #[test]
    fn chern_is_gauge_invariant() {
        let mut g = band_spectrum(&spec(2.0), 16, 16).unwrap();
        let before = chern_numbers(&g).unwrap();
        g.regauge(|node, band| ((node * 7919 + band * 104729) % 1000) as f64 * 0.0137);
        let after = chern_numbers(&g).unwrap();
        assert_eq!(before.lattice, after.lattice);
        for (a, b) in before.lattice_raw.iter().zip(&after.lattice_raw) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn plaquette_flux_matches_curvature_integral() {
        let g = band_spectrum(&spec(2.0), 48, 48).unwrap();
        let b = ReducedBuilder::new(&g.spec).unwrap();
        let nodes = [(-(0.6f64).sqrt(), 5.0 / 9.0), (0.0, 8.0 / 9.0), ((0.6f64).sqrt(), 5.0 / 9.0)];
        let h = TAU / 48.0;
        for &(i, j) in &[(0usize, 0usize), (7, 30), (20, 11), (47, 47)] {
            for band in 0..3 {
                let reference = g.vector(i, j, band);
                let mut integral = 0.0;
                for &(x, wx) in &nodes {
                    for &(y, wy) in &nodes {
                        let phi = g.phi(i) + h * (1.0 + x) / 2.0;
                        let alpha = g.alpha(j) + h * (1.0 + y) / 2.0;
                        integral += wx * wy / 4.0 * h * h * curvature_at(&b, phi, alpha, &reference).unwrap();
                    }
                }
                let flux = plaquette_phase(&g, i, j, band);
                assert!((flux - integral).abs() < 1e-4, "({i},{j}) band {band}: {flux} vs {integral}");
            }
        }
    }

    #[test]
    fn chern_integers_sum_to_zero() {
        let g = band_spectrum(&spec(2.0), 24, 24).unwrap();
        let c = chern_numbers(&g).unwrap();
        assert_eq!(c.lattice.iter().sum::<i64>(), 0);
        for (x, r) in c.lattice.iter().zip(&c.lattice_raw) {
            assert!((*x as f64 - r).abs() < 1e-9);
        }
    }
}
