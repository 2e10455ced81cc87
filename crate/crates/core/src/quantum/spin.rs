use super::engine::{init_spinor, observables, FloquetSpec, InitKind, Propagator};
use crate::classical::KickPotential;
use crate::error::{Error, Result};
use crate::series::TimeSeries;
use crate::stats::Neumaier;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Angle-dependent spin kick `exp(-i V0) exp(-i V . sigma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpinKick {
    Constant { v0: f64, v: [f64; 3] },
    /// Two-dimensional Chern-insulator texture with the second angle
    /// replaced by `theta2 + omega_tilde * t`. Fields are divided by `hbar`.
    Qhe {
        hbar: f64,
        theta2: f64,
        omega_tilde: f64,
        mass: f64,
        amplitude: f64,
    },
}

impl SpinKick {
    pub fn fields(&self, theta: f64, t: usize) -> (f64, [f64; 3]) {
        match *self {
            SpinKick::Constant { v0, v } => (v0, v),
            SpinKick::Qhe {
                hbar,
                theta2,
                omega_tilde,
                mass,
                amplitude,
            } => {
                let v = qhe_field(theta, theta2 + omega_tilde * t as f64, mass);
                let s = amplitude / hbar;
                (0.0, [s * v[0], s * v[1], s * v[2]])
            }
        }
    }
}

/// `V = 2 atan(2|d|) d / |d|` with `d = (sin t1, sin t2, m (1 - cos t1 - cos t2))`.
pub fn qhe_field(t1: f64, t2: f64, mass: f64) -> [f64; 3] {
    let d = [t1.sin(), t2.sin(), mass * (1.0 - t1.cos() - t2.cos())];
    let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if r == 0.0 {
        return [0.0; 3];
    }
    let f = 2.0 * (2.0 * r).atan() / r;
    [f * d[0], f * d[1], f * d[2]]
}

/// Closed form `exp(-i V0) (cos|V| - i sin|V| n . sigma)`.
pub fn spin_factor(v0: f64, v: [f64; 3]) -> [[C64; 2]; 2] {
    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let ph = C64::from_polar(1.0, -v0);
    let c = C64::new(r.cos(), 0.0);
    if r == 0.0 {
        return [[ph, C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), ph]];
    }
    let s = r.sin() / r;
    let mi = C64::new(0.0, -s);
    let nz = mi * v[2];
    let off_up = mi * C64::new(v[0], -v[1]);
    let off_dn = mi * C64::new(v[0], v[1]);
    [[ph * (c + nz), ph * off_up], [ph * off_dn, ph * (c - nz)]]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QheParams {
    pub l: usize,
    pub hbar_eff: f64,
    pub omega_tilde: f64,
    pub mass: f64,
    /// Scales the whole texture; 0 switches the kick off.
    pub amplitude: f64,
    pub theta2_samples: usize,
    pub steps: usize,
}

/// Kinetic energy `<m^2>/2` averaged over equally spaced initial `theta2`.
/// Each sample starts at `m = 0` with spin up. Columns `t, energy`.
pub fn spinor_qhe_run(p: &QheParams) -> Result<TimeSeries> {
    if p.theta2_samples < 8 {
        return Err(Error::usage("need at least 8 theta2 samples"));
    }
    let init = init_spinor(
        p.l,
        p.hbar_eff,
        &InitKind::Delta { m0: 0 },
        [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
    )?;
    let runs: Vec<Vec<f64>> = (0..p.theta2_samples)
        .into_par_iter()
        .map(|j| -> Result<Vec<f64>> {
            let theta2 = TAU * (j as f64 + 0.5) / p.theta2_samples as f64;
            let spec = FloquetSpec {
                period: p.hbar_eff,
                potential: KickPotential::cosine(0.0),
                gamma: 0.0,
                modulation: None,
                spin_kick: Some(SpinKick::Qhe {
                    hbar: p.hbar_eff,
                    theta2,
                    omega_tilde: p.omega_tilde,
                    mass: p.mass,
                    amplitude: p.amplitude,
                }),
                half_step_split: false,
                beta: 0.0,
            };
            let mut prop = Propagator::new(&spec, p.l);
            let mut s = init.clone();
            let mut e = Vec::with_capacity(p.steps + 1);
            e.push(observables(&s)?.energy);
            for t in 0..p.steps {
                prop.step(&mut s, t)?;
                e.push(observables(&s)?.energy);
            }
            Ok(e)
        })
        .collect::<Result<_>>()?;
    let mut out = TimeSeries::new(&["t", "energy"]);
    for t in 0..=p.steps {
        let mut acc = Neumaier::default();
        for r in &runs {
            acc.add(r[t]);
        }
        out.push(vec![t as f64, acc.value() / runs.len() as f64]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_is_unitary() {
        let u = spin_factor(0.3, [0.4, -1.2, 0.7]);
        for i in 0..2 {
            for j in 0..2 {
                let mut s = C64::new(0.0, 0.0);
                for k in 0..2 {
                    s += u[k][i].conj() * u[k][j];
                }
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((s - want).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn texture_magnitude_below_pi() {
        for i in 0..40 {
            let v = qhe_field(0.17 * i as f64, 0.31 * i as f64, 0.8);
            let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            assert!(r < std::f64::consts::PI);
        }
    }

    #[test]
    fn zero_texture_keeps_energy() {
        let p = QheParams {
            l: 16,
            hbar_eff: 1.0,
            omega_tilde: 2.0,
            mass: 0.8,
            amplitude: 0.0,
            theta2_samples: 8,
            steps: 20,
        };
        let s = spinor_qhe_run(&p).unwrap();
        assert!(s.column("energy").unwrap().iter().all(|e| e.abs() < 1e-20));
    }
}
