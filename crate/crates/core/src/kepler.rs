//! Kepler map for a Rydberg electron in a microwave field, in scaled units:
//! `N' = N + k sin phi`, `phi' = phi + pi / sqrt(2 omega) (-N')^(-3/2)`.

use crate::error::{Error, Result};
use crate::quantum::{evolve_with, init_state, FloquetSpec, InitKind, Propagator};
use crate::rng;
use crate::series::TimeSeries;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Ionization fraction that defines the threshold field.
pub const THRESHOLD_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeplerPoint {
    /// Energy over photon energy, negative while bound.
    pub n: f64,
    pub phi: f64,
    pub ionized: bool,
}

impl KeplerPoint {
    pub fn bound(n: f64, phi: f64) -> Self {
        KeplerPoint { n, phi, ionized: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicrowaveParams {
    pub epsilon: f64,
    pub omega: f64,
    pub n0: f64,
}

impl MicrowaveParams {
    /// From the field and frequency scaled to the initial orbit,
    /// `eps0 = eps n0^4`, `omega0 = omega n0^3`.
    pub fn from_scaled(eps0: f64, omega0: f64, n0: f64) -> Self {
        MicrowaveParams {
            epsilon: eps0 / n0.powi(4),
            omega: omega0 / n0.powi(3),
            n0,
        }
    }

    pub fn k(&self) -> f64 {
        2.6 * self.epsilon / self.omega.powf(5.0 / 3.0)
    }

    /// Linearized period of the equivalent standard map.
    pub fn t_lin(&self) -> f64 {
        6.0 * PI * self.omega.powi(2) * self.n0.powi(5)
    }

    /// Photons needed to reach the continuum.
    pub fn n_ionization(&self) -> f64 {
        1.0 / (2.0 * self.n0.powi(2) * self.omega)
    }

    /// Quantum localization length in photons.
    pub fn ell_phi(&self) -> f64 {
        3.3 * self.epsilon.powi(2) / self.omega.powf(10.0 / 3.0)
    }

    pub fn omega0(&self) -> f64 {
        self.omega * self.n0.powi(3)
    }

    pub fn eps0(&self) -> f64 {
        self.epsilon * self.n0.powi(4)
    }

    pub fn initial_n(&self) -> f64 {
        -self.n_ionization()
    }

    /// Phase advance per orbit at energy `n`.
    fn phase_advance(&self, n: f64) -> f64 {
        PI / (2.0 * self.omega).sqrt() * (-n).powf(-1.5)
    }
}

pub fn kepler_step(p: KeplerPoint, params: &MicrowaveParams) -> KeplerPoint {
    if p.ionized {
        return p;
    }
    let n = p.n + params.k() * p.phi.sin();
    if n >= 0.0 {
        return KeplerPoint { n, phi: p.phi, ionized: true };
    }
    KeplerPoint {
        n,
        phi: (p.phi + params.phase_advance(n)).rem_euclid(TAU),
        ionized: false,
    }
}

/// Ionized fraction after each kick for `N0 = -N_I` and uniform phases.
/// Columns `t, fraction`.
pub fn ionization_probability(params: &MicrowaveParams, n_traj: usize, steps: usize, seed: u64) -> Result<TimeSeries> {
    if n_traj == 0 {
        return Err(Error::usage("need at least one trajectory"));
    }
    // first ionization step of each trajectory, or steps + 1
    let first: Vec<usize> = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            let mut p = KeplerPoint::bound(params.initial_n(), TAU * rng::unit(&mut r));
            for t in 1..=steps {
                p = kepler_step(p, params);
                if p.ionized {
                    return t;
                }
            }
            steps + 1
        })
        .collect();
    let mut hist = vec![0usize; steps + 2];
    for &t in &first {
        hist[t] += 1;
    }
    let mut out = TimeSeries::new(&["t", "fraction"]);
    let mut acc = 0;
    for (t, h) in hist.iter().enumerate().take(steps + 1) {
        acc += h;
        out.push(vec![t as f64, acc as f64 / n_traj as f64]);
    }
    Ok(out)
}

/// Fraction ionized after `steps` kicks.
pub fn final_fraction(params: &MicrowaveParams, n_traj: usize, steps: usize, seed: u64) -> Result<f64> {
    let s = ionization_probability(params, n_traj, steps, seed)?;
    Ok(*s.column("fraction").unwrap().last().unwrap())
}

/// `eps0c = 1 / (49 omega0^(1/3))`, evaluated without a validity check.
pub fn classical_chaos_border(omega0: f64) -> f64 {
    1.0 / (49.0 * omega0.cbrt())
}

/// Field at which `ell_phi = N_I`; the coefficient is `1 / sqrt(6.6)`.
pub fn quantum_border(omega: f64, n0: f64) -> f64 {
    omega.powf(7.0 / 6.0) / (6.6f64.sqrt() * n0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Borders {
    /// Scaled classical chaos border.
    pub eps0_classical: f64,
    pub eps_quantum: f64,
    /// `ell_phi / N_I`; above 1 the quantum state delocalizes.
    pub ratio: f64,
    pub delocalized: bool,
}

pub fn borders(params: &MicrowaveParams) -> Result<Borders> {
    let w0 = params.omega0();
    if !(w0 > 1.0) {
        return Err(Error::domain("omega0", format!("{w0} <= 1 is outside the Kepler map regime")));
    }
    let ratio = params.ell_phi() / params.n_ionization();
    Ok(Borders {
        eps0_classical: classical_chaos_border(w0),
        eps_quantum: quantum_border(params.omega, params.n0),
        ratio,
        delocalized: ratio > 1.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdScan {
    pub omega0: f64,
    /// Smallest scanned `eps0` reaching [`THRESHOLD_FRACTION`].
    pub eps_threshold: Option<f64>,
    pub eps0c: f64,
    /// Scaled quantum border `eps_q n0^4`.
    pub eps_q: f64,
    /// Columns `eps0, fraction`.
    pub scan: TimeSeries,
}

/// `n` geometrically spaced values from `lo` to `hi`.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

/// Scans the scaled field over `eps0_grid` at fixed `omega0` and `n0`.
pub fn ionization_threshold(omega0: f64, n0: f64, eps0_grid: &[f64], n_traj: usize, steps: usize, seed: u64) -> Result<ThresholdScan> {
    if eps0_grid.is_empty() {
        return Err(Error::usage("empty field grid"));
    }
    let mut grid = eps0_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let b = borders(&MicrowaveParams::from_scaled(grid[0], omega0, n0))?;
    let fractions: Vec<f64> = grid
        .iter()
        .map(|&e| final_fraction(&MicrowaveParams::from_scaled(e, omega0, n0), n_traj, steps, seed))
        .collect::<Result<_>>()?;
    let mut scan = TimeSeries::new(&["eps0", "fraction"]);
    for (e, f) in grid.iter().zip(&fractions) {
        scan.push(vec![*e, *f]);
    }
    Ok(ThresholdScan {
        omega0,
        eps_threshold: grid.iter().zip(&fractions).find(|(_, f)| **f >= THRESHOLD_FRACTION).map(|(e, _)| *e),
        eps0c: b.eps0_classical,
        eps_q: b.eps_quantum * n0.powi(4),
        scan,
    })
}

/// Quantized Kepler map approximated by the kicked rotor of the linearized
/// standard map: kick `k`, period `T_lin`, momentum counted in photons.
pub fn linearized_quantum_spec(params: &MicrowaveParams) -> FloquetSpec {
    FloquetSpec::kicked_rotor(params.k(), params.t_lin())
}

/// Weight that has absorbed at least `N_I` photons after `steps` kicks of
/// the linearized quantum rotor started in `|0>`.
pub fn quantum_ionization_probability(params: &MicrowaveParams, steps: usize, l: usize) -> Result<f64> {
    let spec = linearized_quantum_spec(params);
    let mut p = Propagator::new(&spec, l);
    let s = init_state(l, spec.period, &InitKind::Delta { m0: 0 })?;
    let r = evolve_with(&mut p, &s, steps, steps.max(1))?;
    if r.first_spill.is_some() {
        return Err(Error::Truncation(format!("edge occupation {:.2e}", r.max_edge)));
    }
    let n_i = params.n_ionization().ceil() as i64;
    let st = &r.state;
    Ok(st
        .amps
        .iter()
        .enumerate()
        .filter(|(i, _)| *i as i64 - st.l as i64 >= n_i)
        .map(|(_, a)| a.norm_sqr())
        .sum::<f64>()
        / st.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{step_map, KickPotential, PhasePoint};

    fn unit_params(k: f64) -> MicrowaveParams {
        // omega = 1 makes k = 2.6 eps
        MicrowaveParams {
            epsilon: k / 2.6,
            omega: 1.0,
            n0: 1.0,
        }
    }

    #[test]
    fn direct_arithmetic_step() {
        let p = kepler_step(KeplerPoint::bound(-0.5, PI / 2.0), &unit_params(0.1));
        assert!((p.n + 0.4).abs() < 1e-15);
        let phi = (PI / 2.0 + PI / 2f64.sqrt() * 0.4f64.powf(-1.5)).rem_euclid(TAU);
        assert!((p.phi - phi).abs() < 1e-12);
        assert!(!p.ionized);
    }

    #[test]
    fn zero_field_advances_phase_only() {
        let params = unit_params(0.0);
        let mut p = KeplerPoint::bound(-0.7, 0.3);
        let adv = params.phase_advance(-0.7);
        for i in 1..10 {
            p = kepler_step(p, &params);
            assert_eq!(p.n, -0.7);
            assert!((p.phi - (0.3 + i as f64 * adv).rem_euclid(TAU)).abs() < 1e-9);
        }
        let f = ionization_probability(&params, 100, 50, 1).unwrap();
        assert!(f.column("fraction").unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn ionization_is_absorbing() {
        let params = unit_params(0.5);
        let p = kepler_step(KeplerPoint::bound(-0.2, PI / 2.0), &params);
        assert!(p.ionized);
        let q = kepler_step(p, &params);
        assert_eq!(p, q);
        let exact = kepler_step(KeplerPoint::bound(-0.5, PI / 2.0), &unit_params(0.5));
        assert!(exact.ionized);
    }

    #[test]
    fn fraction_is_monotone() {
        let params = MicrowaveParams::from_scaled(0.05, 2.0, 1.0);
        let f = ionization_probability(&params, 500, 300, 4).unwrap().column("fraction").unwrap();
        assert!(f.windows(2).all(|w| w[1] >= w[0]));
        assert!(*f.last().unwrap() > 0.0);
    }

    #[test]
    fn border_formulas() {
        assert!((classical_chaos_border(1.0) - 1.0 / 49.0).abs() < 1e-15);
        assert!((classical_chaos_border(8.0) - 1.0 / 98.0).abs() < 1e-15);
        assert!(matches!(borders(&MicrowaveParams::from_scaled(0.01, 1.0, 1.0)), Err(Error::Domain { .. })));
        let (omega, n0) = (0.02, 60.0);
        let at = MicrowaveParams {
            epsilon: quantum_border(omega, n0),
            omega,
            n0,
        };
        assert!((at.ell_phi() / at.n_ionization() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linearizes_to_standard_map() {
        let params = MicrowaveParams::from_scaled(0.03, 2.0, 1.0);
        let n0 = params.initial_n();
        let t = params.t_lin();
        let pot = KickPotential::cosine(params.k() * t);
        let c0 = params.phase_advance(n0);
        for (dn, phi) in [(1e-4, 0.4), (-2e-4, 2.0), (3e-4, 5.1)] {
            let dn = dn * n0.abs();
            let kp = kepler_step(KeplerPoint::bound(n0 + dn, phi), &params);
            let sp = step_map(PhasePoint::new(phi, t * dn), &pot, None).unwrap();
            assert!((t * (kp.n - n0) - sp.j).abs() < 1e-12);
            let dphi = (kp.phi - phi - c0).rem_euclid(TAU);
            let djump = sp.j.rem_euclid(TAU);
            let err = (dphi - djump).abs().min(TAU - (dphi - djump).abs());
            // second-order remainder relative to the linear term
            assert!(err <= 5.0 * (kp.n - n0).abs() / n0.abs() * sp.j.abs() + 1e-12, "{err}");
        }
    }

    #[test]
    fn strong_and_weak_fields() {
        let w0 = 2.0;
        let c = classical_chaos_border(w0);
        let strong = final_fraction(&MicrowaveParams::from_scaled(5.0 * c, w0, 1.0), 2000, 1000, 9).unwrap();
        let weak = final_fraction(&MicrowaveParams::from_scaled(c / 5.0, w0, 1.0), 2000, 1000, 9).unwrap();
        assert!(strong > 0.5, "{strong}");
        assert!(weak < 0.05, "{weak}");
    }

    #[test]
    fn quantum_proxy_is_bounded() {
        let params = MicrowaveParams::from_scaled(0.01, 2.0, 1.0);
        let p = quantum_ionization_probability(&params, 20, 256).unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
}
