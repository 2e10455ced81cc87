//! PT-symmetric kicked rotor: `U = exp(-i T I^2 / 2) exp(-i K (cos theta + i gamma sin theta))`.
//!
//! Matrices live on the periodic momentum ring of the FFT propagator. For
//! `gamma = 0` that operator is exactly unitary, and for `gamma > 0` the
//! imaginary gauge field `eta = artanh gamma` cannot be removed around the
//! ring, which is what makes the reality threshold finite.

use crate::diagnostics::fit_localization_length;
use crate::error::{Error, Result};
use crate::linalg;
use crate::quantum::{init_state, FloquetSpec, InitKind, Propagator};
use crate::series::TimeSeries;
use crate::stats::{fit_line, Neumaier};
use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// `|ln|lambda||` below this counts as a real quasienergy.
pub const REALITY_TOLERANCE: f64 = 1e-8;
/// `max ln|lambda|` above this marks the broken phase.
pub const BROKEN_THRESHOLD: f64 = 1e-6;
pub const SENSITIVITY_TOLERANCE: f64 = 1e-6;
pub const SENSITIVITY_PADDING: usize = 64;
pub const MIN_RATCHET_R2: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NhSpectrum {
    pub k: f64,
    pub period: f64,
    pub gamma: f64,
    pub l: usize,
    /// Sorted by `arg lambda`, then `ln|lambda|`.
    pub eigenvalues: Vec<C64>,
    pub re_eps: Vec<f64>,
    pub log_abs: Vec<f64>,
}

impl NhSpectrum {
    fn from_eigenvalues(k: f64, period: f64, gamma: f64, l: usize, mut ev: Vec<C64>) -> Self {
        ev.sort_by(|a, b| a.arg().total_cmp(&b.arg()).then(a.norm().total_cmp(&b.norm())));
        NhSpectrum {
            k,
            period,
            gamma,
            l,
            re_eps: ev.iter().map(|z| z.arg()).collect(),
            log_abs: ev.iter().map(|z| z.norm().ln()).collect(),
            eigenvalues: ev,
        }
    }

    pub fn max_log_abs(&self) -> f64 {
        self.log_abs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs_log(&self) -> f64 {
        self.log_abs.iter().fold(0.0, |a, x| a.max(x.abs()))
    }

    /// Mean of `|ln|lambda||` over all states.
    pub fn mean_abs_log(&self) -> f64 {
        self.log_abs.iter().map(|x| x.abs()).sum::<f64>() / self.log_abs.len() as f64
    }

    /// Mean of `max(ln|lambda|, 0)` over all states.
    pub fn mean_gain(&self) -> f64 {
        self.log_abs.iter().map(|x| x.max(0.0)).sum::<f64>() / self.log_abs.len() as f64
    }

    pub fn is_real(&self) -> bool {
        self.max_abs_log() < REALITY_TOLERANCE
    }

    pub fn table(&self) -> TimeSeries {
        let mut t = TimeSeries::new(&["re_eps", "log_abs_lambda"]);
        for (a, b) in self.re_eps.iter().zip(&self.log_abs) {
            t.push(vec![*a, *b]);
        }
        t
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma.abs() < 1.0) {
        return Err(Error::domain("gamma", "need |gamma| < 1"));
    }
    Ok(())
}

pub fn nh_floquet_matrix(k: f64, period: f64, gamma: f64, l: usize) -> Result<Array2<C64>> {
    check_gamma(gamma)?;
    Propagator::new(&FloquetSpec::kicked_rotor(k, period).with_gamma(gamma), l).dense_matrix()
}

/// Eigenvalues without the truncation check.
pub fn nh_eigenvalues(k: f64, period: f64, gamma: f64, l: usize) -> Result<NhSpectrum> {
    let u = nh_floquet_matrix(k, period, gamma, l)?;
    Ok(NhSpectrum::from_eigenvalues(k, period, gamma, l, linalg::eigvals(&u)))
}

/// Full spectrum plus a stability test: every eigenvalue whose right
/// eigenvector sits away from the ring seam must reappear within
/// [`SENSITIVITY_TOLERANCE`] when `L` grows by [`SENSITIVITY_PADDING`].
/// Extended states are not tested.
pub fn nh_floquet_spectrum(k: f64, period: f64, gamma: f64, l: usize) -> Result<NhSpectrum> {
    let u = nh_floquet_matrix(k, period, gamma, l)?;
    let (vals, vecs) = linalg::eig(&u);
    let wide = nh_eigenvalues(k, period, gamma, l + SENSITIVITY_PADDING)?;
    let n = 2 * l + 1;
    let core = l / 2;
    for (a, lam) in vals.iter().enumerate() {
        let col = vecs.column(a);
        let total: f64 = col.iter().map(|z| z.norm_sqr()).sum();
        let inner: f64 = (l - core..=l + core).map(|i| col[i].norm_sqr()).sum();
        if n == 0 || inner < (1.0 - 1e-10) * total {
            continue;
        }
        let shift = wide.eigenvalues.iter().map(|w| (w - lam).norm()).fold(f64::INFINITY, f64::min);
        if shift > SENSITIVITY_TOLERANCE {
            return Err(Error::Truncation(format!(
                "eigenvalue {lam:.6} moved by {shift:.2e} when L grew to {}",
                l + SENSITIVITY_PADDING
            )));
        }
    }
    Ok(NhSpectrum::from_eigenvalues(k, period, gamma, l, vals))
}

/// Amplitude localization length of the `gamma = 0` Floquet eigenstates,
/// `|phi_m| ~ exp(-|m - m0| / xi_L)`, as the median of per-state fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenLocalization {
    pub xi: f64,
    pub fitted: usize,
    pub states: usize,
}

pub fn eigenstate_localization(k: f64, period: f64, l: usize) -> Result<EigenLocalization> {
    let u = nh_floquet_matrix(k, period, 0.0, l)?;
    let (_, vecs) = linalg::eig(&u);
    let n = 2 * l + 1;
    let mut xs: Vec<f64> = (0..n)
        .into_par_iter()
        .filter_map(|a| {
            let p: Vec<f64> = vecs.column(a).iter().map(|z| z.norm_sqr()).collect();
            let c = (0..n).max_by(|&i, &j| p[i].total_cmp(&p[j]))?;
            // cyclic offsets from the peak
            let m: Vec<f64> = (0..n)
                .map(|i| {
                    let d = (i as i64 - c as i64).rem_euclid(n as i64);
                    (if d > l as i64 { d - n as i64 } else { d }) as f64
                })
                .collect();
            // the fit uses the intensity convention, P ~ exp(-2|m|/ell)
            fit_localization_length(&m, &p, 0.0).ok().map(|f| f.ell)
        })
        .collect();
    if xs.is_empty() {
        return Err(Error::ExtendedState { r2: f64::NAN });
    }
    xs.sort_by(f64::total_cmp);
    Ok(EigenLocalization {
        xi: xs[xs.len() / 2],
        fitted: xs.len(),
        states: n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PtThreshold {
    /// Refined crossing; `None` when no grid value breaks the symmetry.
    pub gamma_pt: Option<f64>,
    /// Bracket `[unbroken, broken]`, or `[max grid, 1)` without a crossing.
    pub interval: (f64, f64),
    pub xi_l: Option<f64>,
    /// `tanh(1 / xi_L)`.
    pub theory: Option<f64>,
}

fn is_broken(k: f64, period: f64, gamma: f64, l: usize) -> Result<bool> {
    Ok(nh_eigenvalues(k, period, gamma, l)?.max_log_abs() > BROKEN_THRESHOLD)
}

/// Smallest grid `gamma` in the broken phase, refined by bisection to
/// relative width `1e-3`.
pub fn pt_threshold(k: f64, period: f64, l: usize, gamma_grid: &[f64]) -> Result<PtThreshold> {
    if gamma_grid.is_empty() {
        return Err(Error::usage("empty gamma grid"));
    }
    let mut grid = gamma_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    for &g in &grid {
        check_gamma(g)?;
    }
    let broken: Vec<bool> = grid
        .par_iter()
        .map(|&g| is_broken(k, period, g, l))
        .collect::<Result<_>>()?;
    let xi = eigenstate_localization(k, period, l).ok().map(|e| e.xi);
    let theory = xi.map(|x| (1.0 / x).tanh());
    let Some(first) = broken.iter().position(|&b| b) else {
        return Ok(PtThreshold {
            gamma_pt: None,
            interval: (*grid.last().unwrap(), 1.0),
            xi_l: xi,
            theory,
        });
    };
    if first == 0 {
        // broken already at the smallest tested value
        return Ok(PtThreshold {
            gamma_pt: Some(grid[0]),
            interval: (0.0, grid[0]),
            xi_l: xi,
            theory,
        });
    }
    let (mut lo, mut hi) = (grid[first - 1], grid[first]);
    while hi - lo > 1e-3 * hi {
        let mid = 0.5 * (lo + hi);
        if is_broken(k, period, mid, l)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(PtThreshold {
        gamma_pt: Some(hi),
        interval: (lo, hi),
        xi_l: xi,
        theory,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatchetFit {
    pub v: f64,
    pub r2: f64,
    /// Columns `t, meanI, lnNorm`.
    pub series: TimeSeries,
    pub window: (usize, usize),
}

/// Rescaling guard: the state norm is divided out when it exceeds this and
/// the logarithm carried in `lnNorm`. Normalized observables are unaffected.
const NORM_GUARD: f64 = 1e200;

/// Normalized `<I(t)>` from `|0>` without renormalizing the evolved state.
/// Columns `t, meanI, lnNorm`.
pub fn ratchet_series(k: f64, period: f64, gamma: f64, steps: usize, l: usize) -> Result<TimeSeries> {
    check_gamma(gamma)?;
    let spec = FloquetSpec::kicked_rotor(k, period).with_gamma(gamma);
    let mut p = Propagator::new(&spec, l);
    let mut s = init_state(l, period, &InitKind::Delta { m0: 0 })?;
    let mut series = TimeSeries::new(&["t", "meanI", "lnNorm"]);
    let mut log_scale = 0.0;
    let read = |s: &crate::quantum::RotorState, log_scale: f64| {
        let mut w = Neumaier::default();
        let mut m = Neumaier::default();
        for (i, a) in s.amps.iter().enumerate() {
            w.add(a.norm_sqr());
            m.add(a.norm_sqr() * (i as f64 - l as f64));
        }
        (m.value() / w.value(), w.value().ln() + log_scale)
    };
    let (m0, n0) = read(&s, log_scale);
    series.push(vec![0.0, m0, n0]);
    for t in 1..=steps {
        let r = p.step(&mut s, t - 1)?;
        if r.spill {
            return Err(Error::Truncation(format!("edge occupation {:.2e} at step {t}", r.edge)));
        }
        let norm = s.norm();
        if norm > NORM_GUARD {
            s.amps.iter_mut().for_each(|a| *a /= norm.sqrt());
            log_scale += norm.ln();
        }
        let (m, ln_norm) = read(&s, log_scale);
        series.push(vec![t as f64, m, ln_norm]);
    }
    Ok(series)
}

/// Linear fit of `meanI` over the last half of the series.
pub fn fit_ratchet(series: TimeSeries) -> Result<RatchetFit> {
    let t = series.column("t").ok_or_else(|| Error::usage("series lacks t"))?;
    let mi = series.column("meanI").ok_or_else(|| Error::usage("series lacks meanI"))?;
    let steps = t.len().saturating_sub(1);
    if steps < 4 {
        return Err(Error::usage("need at least four steps"));
    }
    let start = steps / 2;
    let f = fit_line(&t[start..], &mi[start..]).ok_or_else(|| Error::usage("degenerate fit window"))?;
    if !(f.r2 >= MIN_RATCHET_R2) {
        return Err(Error::NoRatchet {
            r2: f.r2,
            slope: f.slope,
        });
    }
    Ok(RatchetFit {
        v: f.slope,
        r2: f.r2,
        series,
        window: (start, steps),
    })
}

pub fn ratchet_velocity(k: f64, period: f64, gamma: f64, steps: usize, l: usize) -> Result<RatchetFit> {
    if steps < 4 {
        return Err(Error::usage("need at least four steps"));
    }
    fit_ratchet(ratchet_series(k, period, gamma, steps, l)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_3, PI};

    #[test]
    fn hermitian_limit_is_unitary() {
        let s = nh_floquet_spectrum(3.0, 1.4, 0.0, 96).unwrap();
        assert!(s.max_abs_log() < 1e-10);
        assert!(s.is_real());
    }

    #[test]
    fn rejects_large_gamma() {
        assert!(matches!(nh_eigenvalues(3.0, 1.0, 1.0, 8), Err(Error::Domain { .. })));
    }

    #[test]
    fn localized_regime_is_real_at_small_gamma() {
        let s = nh_floquet_spectrum(3.0, 1.4, 0.02, 160).unwrap();
        assert!(s.mean_abs_log() < 1e-8, "{}", s.mean_abs_log());
    }

    #[test]
    fn resonance_breaks_immediately() {
        let s = nh_floquet_spectrum(3.0, FRAC_PI_3, 1.0 / 30.0, 96).unwrap();
        assert!(s.mean_gain() > 1e-3);
        let r = pt_threshold(3.0, 4.0 * PI, 64, &[1e-4, 1e-3]).unwrap();
        assert_eq!(r.gamma_pt, Some(1e-4));
        assert_eq!(r.interval, (0.0, 1e-4));
    }

    #[test]
    fn below_threshold_grid_returns_open_interval() {
        let r = pt_threshold(3.0, 1.4, 128, &[0.005, 0.01]).unwrap();
        assert_eq!(r.gamma_pt, None);
        assert_eq!(r.interval, (0.01, 1.0));
    }

    #[test]
    fn similar_to_hermitian_rotor() {
        let (k, gamma) = (3.0, 0.05);
        let nh = nh_eigenvalues(k, 1.4, gamma, 160).unwrap();
        let k0 = k * (1.0 - gamma * gamma).sqrt();
        let h = nh_eigenvalues(k0, 1.4, 0.0, 160).unwrap();
        for z in &nh.eigenvalues {
            let d = h
                .re_eps
                .iter()
                .map(|&e| (C64::from_polar(1.0, e) - C64::from_polar(1.0, z.arg())).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(d < 1e-6, "{z}");
        }
    }

    #[test]
    fn kick_harmonics_are_asymmetric() {
        // at T = 4 pi the free factor is the identity, leaving the kick
        // exp(-i K0 cos(theta - i eta)), so U_{m+d,m} / U_{m-d,m} = e^{2 eta d}
        let gamma: f64 = 0.2;
        let eta = gamma.atanh();
        let u = nh_floquet_matrix(2.0, 4.0 * PI, gamma, 16).unwrap();
        let ratio = u[[17, 16]].norm() / u[[15, 16]].norm();
        assert!((ratio - (1.0 + gamma) / (1.0 - gamma)).abs() < 1e-10);
        for d in 1..4 {
            let r = u[[16 + d, 16]].norm() / u[[16 - d, 16]].norm();
            assert!((r / (2.0 * eta * d as f64).exp() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn broken_phase_norm_growth_follows_top_eigenvalue() {
        let (k, t, g, l) = (3.0, FRAC_PI_3, 1.0 / 30.0, 48);
        let top = nh_eigenvalues(k, t, g, l).unwrap().max_log_abs();
        let mut p = Propagator::new(&FloquetSpec::kicked_rotor(k, t).with_gamma(g), l);
        let mut s = init_state(l, t, &InitKind::Delta { m0: 0 }).unwrap();
        let mut rate = 0.0;
        for step in 0..600 {
            p.step(&mut s, step).unwrap();
            let n = s.norm();
            rate = n.ln();
            s.amps.iter_mut().for_each(|a| *a /= n.sqrt());
        }
        assert!((rate / (2.0 * top) - 1.0).abs() < 0.05, "{rate} {top}");
    }

    #[test]
    fn hermitian_resonance_has_no_drift() {
        let spec = FloquetSpec::kicked_rotor(3.0, FRAC_PI_3);
        let mut p = Propagator::new(&spec, 256);
        let mut s = init_state(256, FRAC_PI_3, &InitKind::Delta { m0: 0 }).unwrap();
        for t in 0..50 {
            p.step(&mut s, t).unwrap();
        }
        let m: f64 = s.amps.iter().enumerate().map(|(i, a)| a.norm_sqr() * (i as f64 - 256.0)).sum();
        assert!(m.abs() < 1e-9);
    }
}
