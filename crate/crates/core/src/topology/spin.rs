use super::{KickCoefficients, ResonantDkrSpec};
use crate::error::{Error, Result};
use crate::linalg;
use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

/// `H_j = K0 cos(nu0 theta + alpha0) + K cos(nu theta + alpha) n . sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinKickParams {
    pub k0: f64,
    pub nu0: i64,
    pub alpha0: f64,
    pub k: f64,
    pub nu: i64,
    pub alpha: f64,
    pub n: [f64; 3],
}

impl SpinKickParams {
    /// Scalar and vector parts `(V0, V)` at angle `theta`.
    pub fn fields(&self, theta: f64) -> (f64, [f64; 3]) {
        let v0 = self.k0 * (self.nu0 as f64 * theta + self.alpha0).cos();
        let a = self.k * (self.nu as f64 * theta + self.alpha).cos();
        let norm = (self.n[0].powi(2) + self.n[1].powi(2) + self.n[2].powi(2)).sqrt();
        let n = if norm > 0.0 { self.n.map(|x| x / norm) } else { [0.0; 3] };
        (v0, n.map(|x| a * x))
    }
}

/// Odd frequencies with lattice phases `alpha1^0 = 0`, `alpha1 = pi/2`,
/// `alpha2^0 = pi/2`, `alpha2 = 0`.
pub fn cii_parameters(k0: [f64; 2], k: [f64; 2], n: [[f64; 3]; 2]) -> [SpinKickParams; 2] {
    [
        SpinKickParams {
            k0: k0[0],
            nu0: 1,
            alpha0: 0.0,
            k: k[0],
            nu: 1,
            alpha: FRAC_PI_2,
            n: n[0],
        },
        SpinKickParams {
            k0: k0[1],
            nu0: 3,
            alpha0: FRAC_PI_2,
            k: k[1],
            nu: 1,
            alpha: 0.0,
            n: n[1],
        },
    ]
}

/// Spin variant at `T0 = pi`: `U = F^dagger exp(-i H2) F exp(-i H1)` with
/// `F = exp(-i pi I^2 / 2)`.
pub fn spin_dkr_spec(kicks: [SpinKickParams; 2]) -> ResonantDkrSpec {
    ResonantDkrSpec::new(1, 2, 0.0)
        .expect("1/2 is coprime")
        .with_spin(kicks)
}

/// Reduced Floquet matrix in the frame that splits the first kick,
/// `exp(-i H1 / 2) F^dagger exp(-i H2) F exp(-i H1 / 2)`. It has the same
/// spectrum as the standard frame; symmetry relations hold only here.
pub fn symmetric_frame_matrix(spec: &ResonantDkrSpec, phi: f64) -> Result<Array2<C64>> {
    if spec.spin.is_none() {
        return Err(Error::usage("symmetric frame is defined for the spin variant"));
    }
    let c = spec.components();
    let half = KickCoefficients::compute(|t| spec.kick(0, t, 0.5), c, spec.l_max)?;
    let second = KickCoefficients::compute(|t| spec.kick(1, t, 1.0), c, spec.l_max)?;
    let mut s = *spec;
    s.phi = phi;
    let a = super::reduce(&s, &half, spec.alpha, false, super::Deriv::None);
    let b = super::reduce(&s, &second, 0.0, true, super::Deriv::None);
    Ok(a.dot(&b).dot(&a))
}

/// Unitary `W` acting on the reduced basis, followed by complex conjugation
/// when `antiunitary`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryOp {
    pub w: Array2<C64>,
    pub antiunitary: bool,
}

impl SymmetryOp {
    fn conjugate(&self, u: &Array2<C64>) -> Array2<C64> {
        let inner = if self.antiunitary { u.mapv(|z| z.conj()) } else { u.clone() };
        let wh = self.w.t().mapv(|z| z.conj());
        self.w.dot(&inner).dot(&wh)
    }
}

fn kron_spin(s: usize, site: impl Fn(usize) -> C64, spin: [[C64; 2]; 2]) -> Array2<C64> {
    let mut w = Array2::zeros((2 * s, 2 * s));
    for m in 0..s {
        for a in 0..2 {
            for b in 0..2 {
                w[[2 * m + a, 2 * m + b]] = site(m) * spin[a][b];
            }
        }
    }
    w
}

/// `T = i sigma_y K`, `C = (-1)^m i sigma_y K`, `Gamma = (-1)^m`. The
/// parity `(-1)^m` is well defined on the reduced basis for even `s`.
pub fn cii_operators(s: usize) -> [SymmetryOp; 3] {
    let (o, one) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0));
    let isy = [[o, one], [-one, o]];
    let id = [[one, o], [o, one]];
    let parity = |m: usize| if m % 2 == 0 { one } else { -one };
    [
        SymmetryOp {
            w: kron_spin(s, |_| one, isy),
            antiunitary: true,
        },
        SymmetryOp {
            w: kron_spin(s, parity, isy),
            antiunitary: true,
        },
        SymmetryOp {
            w: kron_spin(s, parity, id),
            antiunitary: false,
        },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AzResiduals {
    /// `T U(phi) T^-1 = U^-1(-phi)`.
    pub time_reversal: f64,
    /// `C U(phi) C^-1 = U(-phi)`.
    pub particle_hole: f64,
    /// `Gamma U(phi) Gamma^-1 = U^-1(phi)`.
    pub chiral: f64,
}

fn op_norm(a: &Array2<C64>) -> f64 {
    linalg::singular_values(a).into_iter().fold(0.0, f64::max)
}

/// Largest spectral-norm residual of each relation over the `phi` samples.
pub fn az_symmetry_check(spec: &ResonantDkrSpec, ops: &[SymmetryOp; 3], phis: &[f64]) -> Result<AzResiduals> {
    let mut r = AzResiduals {
        time_reversal: 0.0,
        particle_hole: 0.0,
        chiral: 0.0,
    };
    for &phi in phis {
        let u = symmetric_frame_matrix(spec, phi)?;
        let um = symmetric_frame_matrix(spec, -phi)?;
        let dag = |x: &Array2<C64>| x.t().mapv(|z| z.conj());
        r.time_reversal = r.time_reversal.max(op_norm(&(ops[0].conjugate(&u) - dag(&um))));
        r.particle_hole = r.particle_hole.max(op_norm(&(ops[1].conjugate(&u) - &um)));
        r.chiral = r.chiral.max(op_norm(&(ops[2].conjugate(&u) - dag(&u))));
    }
    Ok(r)
}
