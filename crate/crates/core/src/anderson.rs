//! Tight-binding chain equivalent of the kicked-rotor Floquet eigenproblem.
//!
//! Site energies `W_n = tan((eps T - n^2 T / 2) / 2)` and hoppings
//! `t_l = -(1/2pi) int exp(i l theta) tan(V/2)` give
//! `W_n u_n + sum_{l != 0} t_l u_{n+l} = E u_n` with `E = -t_0`.

use crate::classical::KickPotential;
use crate::error::{Error, Result};
use crate::linalg;
use crate::stats::fit_line;
use ndarray::Array2;
use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

/// Minimum distance of a site-energy argument from a pole of tan.
pub const POLE_GUARD: f64 = 1e-8;

/// Amplitude-to-dynamical conversion: the dynamical fit already uses
/// `P ~ exp(-2|m|/ell)`, i.e. amplitude decay `exp(-|m|/ell)`, which is the
/// eigenvector convention. The two lengths are therefore compared directly.
pub const DYNAMICAL_PER_EIGENVECTOR_LENGTH: f64 = 1.0;

fn pole_distance(arg: f64) -> f64 {
    let r = (arg - FRAC_PI_2).rem_euclid(PI);
    r.min(PI - r)
}

/// `W_n` for `n in n_range`. The `n^2 T / 4` part of the argument is reduced
/// modulo `pi` through `frac(n^2 T / 4 pi)` before evaluation.
pub fn site_energies(period: f64, eps: f64, n_range: std::ops::RangeInclusive<i64>) -> Result<Vec<f64>> {
    let c = period / (4.0 * PI);
    n_range
        .map(|n| {
            let x = c * (n as f64) * (n as f64);
            let arg = 0.5 * eps * period - PI * (x - x.floor());
            let d = pole_distance(arg);
            if d < POLE_GUARD {
                return Err(Error::Pole { n, distance: d });
            }
            Ok(arg.tan())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hoppings {
    pub l_max: usize,
    /// `t_l` for `l = -l_max ..= l_max`.
    pub t: Vec<C64>,
    /// `sum_{|l| > l_max} |t_l|^2` by Parseval.
    pub truncated_weight: f64,
}

impl Hoppings {
    pub fn get(&self, l: i64) -> C64 {
        if l.unsigned_abs() as usize > self.l_max {
            C64::new(0.0, 0.0)
        } else {
            self.t[(l + self.l_max as i64) as usize]
        }
    }

    /// Keeps `|l| <= l_new`, moving the rest into the truncated weight.
    pub fn truncated(&self, l_new: usize) -> Hoppings {
        let l_new = l_new.min(self.l_max);
        let mut w = self.truncated_weight;
        for l in (l_new + 1)..=self.l_max {
            w += self.get(l as i64).norm_sqr() + self.get(-(l as i64)).norm_sqr();
        }
        Hoppings {
            l_max: l_new,
            t: (-(l_new as i64)..=l_new as i64).map(|l| self.get(l)).collect(),
            truncated_weight: w,
        }
    }
}

/// Default hopping range `max(4k, 16)`.
pub fn default_l_max(v: &KickPotential) -> usize {
    ((4.0 * v.strength().abs()).ceil() as usize).max(16)
}

/// Trapezoid Fourier coefficients of `-tan(V/2)` on `quadrature_points`
/// equally spaced angles.
pub fn hoppings(v: &KickPotential, l_max: usize, quadrature_points: usize) -> Result<Hoppings> {
    if quadrature_points < 8 * l_max.max(1) {
        return Err(Error::usage(format!(
            "{quadrature_points} quadrature points, need >= {}",
            8 * l_max.max(1)
        )));
    }
    let m = quadrature_points;
    let theta: Vec<f64> = (0..m).map(|j| 2.0 * PI * j as f64 / m as f64).collect();
    let vals: Vec<f64> = theta.iter().map(|&t| v.value(t)).collect();
    let vmax = vals.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if vmax >= PI {
        return Err(Error::SingularPotential { max_abs: vmax });
    }
    let mut buf: Vec<C64> = vals.iter().map(|x| C64::new(-(0.5 * x).tan(), 0.0)).collect();
    let total: f64 = buf.iter().map(|z| z.norm_sqr()).sum::<f64>() / m as f64;
    // inverse transform gives sum_j exp(+i l theta_j) f_j
    FftPlanner::new().plan_fft_inverse(m).process(&mut buf);
    let scale = 1.0 / m as f64;
    let t: Vec<C64> = (-(l_max as i64)..=l_max as i64)
        .map(|l| buf[l.rem_euclid(m as i64) as usize] * scale)
        .collect();
    let kept: f64 = t.iter().map(|z| z.norm_sqr()).sum();
    Ok(Hoppings {
        l_max,
        t,
        truncated_weight: (total - kept).max(0.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightBindingChain {
    pub n_start: i64,
    pub w: Vec<f64>,
    pub hoppings: Hoppings,
    /// `E = -t_0`.
    pub energy: f64,
    pub period: f64,
    pub eps: f64,
}

impl TightBindingChain {
    pub fn build(v: &KickPotential, period: f64, eps: f64, sites: usize, l_max: usize) -> Result<Self> {
        let half = (sites / 2) as i64;
        let n_start = -half;
        let w = site_energies(period, eps, n_start..=n_start + sites as i64 - 1)?;
        let hoppings = hoppings(v, l_max, (8 * l_max).max(4096))?;
        let energy = -hoppings.get(0).re;
        Ok(TightBindingChain {
            n_start,
            w,
            hoppings,
            energy,
            period,
            eps,
        })
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// `H[i, i] = W_i`, `H[i, i + l] = t_l` for `l != 0`.
    pub fn matrix(&self) -> Array2<C64> {
        let n = self.len();
        let lm = self.hoppings.l_max as i64;
        Array2::from_shape_fn((n, n), |(i, j)| {
            let l = j as i64 - i as i64;
            if l == 0 {
                C64::new(self.w[i], 0.0)
            } else if l.abs() <= lm {
                self.hoppings.get(l)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TbMethod {
    EigvecDecay,
    TransferMatrixNn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TbLocalization {
    /// Amplitude convention `u_n ~ exp(-|n - n0| / ell)`.
    pub ell: f64,
    pub r2: f64,
    pub method: TbMethod,
    /// Eigenvectors averaged, or sites propagated.
    pub samples: usize,
    /// Discarded hopping weight for the nearest-neighbour method.
    pub truncation_error: f64,
}

/// Number of eigenvectors nearest to the energy averaged by the decay fit.
const DECAY_VECTORS: usize = 20;
/// Amplitude floor that ends the decay fit.
const AMPLITUDE_FLOOR: f64 = 1e-11;

pub fn tb_localization_length(chain: &TightBindingChain, energy: f64, method: TbMethod) -> Result<TbLocalization> {
    if chain.len() < 20 {
        return Err(Error::usage("chain needs at least 20 sites"));
    }
    match method {
        TbMethod::EigvecDecay => eigvec_decay(chain, energy),
        TbMethod::TransferMatrixNn => transfer_nn(chain, energy),
    }
}

fn eigvec_decay(chain: &TightBindingChain, energy: f64) -> Result<TbLocalization> {
    let n = chain.len();
    let (vals, vecs) = linalg::eigh(&chain.matrix());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| (vals[a] - energy).abs().total_cmp(&(vals[b] - energy).abs()));
    let reach = n / 4;
    let mut sum = vec![0.0; reach];
    let mut cnt = vec![0usize; reach];
    let mut used = 0;
    for &k in &order {
        if used == DECAY_VECTORS {
            break;
        }
        let col = vecs.column(k);
        let peak = (0..n).max_by(|&a, &b| col[a].norm().total_cmp(&col[b].norm())).unwrap();
        if peak < reach || peak + reach >= n {
            continue;
        }
        used += 1;
        for d in 0..reach {
            for i in [peak - d, peak + d] {
                sum[d] += col[i].norm().max(1e-300).ln();
                cnt[d] += 1;
            }
        }
    }
    if used == 0 {
        return Err(Error::ExtendedState { r2: 0.0 });
    }
    let prof: Vec<f64> = sum.iter().zip(&cnt).map(|(s, c)| s / *c as f64).collect();
    let floor = AMPLITUDE_FLOOR.ln();
    let end = prof.iter().position(|&p| p < floor).unwrap_or(reach);
    let start = 4.min(end);
    let x: Vec<f64> = (start..end).map(|d| d as f64).collect();
    let y = &prof[start..end];
    let fit = if x.len() >= 5 { fit_line(&x, y) } else { None };
    match fit {
        Some(f) if f.r2 >= 0.5 && f.slope < 0.0 => Ok(TbLocalization {
            ell: 1.0 / f.slope.abs(),
            r2: f.r2,
            method: TbMethod::EigvecDecay,
            samples: used,
            truncation_error: chain.hoppings.truncated_weight,
        }),
        Some(f) => Err(Error::ExtendedState { r2: f.r2 }),
        None => Err(Error::ExtendedState { r2: 0.0 }),
    }
}

fn transfer_nn(chain: &TightBindingChain, energy: f64) -> Result<TbLocalization> {
    let nn = chain.hoppings.truncated(1);
    let tp = nn.get(1);
    let tm = nn.get(-1);
    if tp.norm() == 0.0 {
        return Err(Error::ExtendedState { r2: 0.0 });
    }
    // u_{n+1} = ((E - W_n) u_n - t_{-1} u_{n-1}) / t_1
    let mut a = C64::new(1.0, 0.0);
    let mut b = C64::new(0.0, 0.0);
    let mut log_growth = 0.0;
    for &w in &chain.w {
        let next = ((energy - w) * a - tm * b) / tp;
        b = a;
        a = next;
        let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
        log_growth += r.ln();
        a /= r;
        b /= r;
    }
    let gamma = log_growth / chain.len() as f64;
    // a decay length beyond the chain itself is indistinguishable from a Bloch wave
    if !(gamma * chain.len() as f64 > 1.0) {
        return Err(Error::ExtendedState { r2: 0.0 });
    }
    Ok(TbLocalization {
        ell: 1.0 / gamma,
        r2: f64::NAN,
        method: TbMethod::TransferMatrixNn,
        samples: chain.len(),
        truncation_error: nn.truncated_weight,
    })
}

/// Smallest period `p` with `W_{n+p} = W_n` to `tol` over the sequence.
pub fn detect_period(w: &[f64], max_period: usize, tol: f64) -> Option<usize> {
    (1..=max_period.min(w.len() / 2)).find(|&p| {
        (0..w.len() - p).all(|i| (w[i + p] - w[i]).abs() <= tol * (1.0 + w[i].abs()))
    })
}
