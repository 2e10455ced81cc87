//! Localization lengths, growth laws, time scales and scaling verdicts.

use crate::error::{Error, Result};
use crate::stats::{fit_line, LineFit};
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

/// Probability floor below which bins are ignored by profile fits.
pub const PROB_FLOOR: f64 = 1e-14;
/// Relative slope per 100 steps below which a series counts as stationary.
pub const SATURATION_SLOPE: f64 = 0.02;
/// Half-width of the band around zero treated as the critical point.
pub const CRITICAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationFit {
    /// Intensity convention: `P(m) ~ exp(-2|m - m0| / ell)`.
    pub ell: f64,
    pub err: f64,
    pub r2: f64,
    pub points: usize,
    pub ell_guess: f64,
}

/// Weighted quantile of positions `x` under weights `p`, by the first bin
/// at which the cumulative weight reaches `q`.
fn quantile(x: &[f64], p: &[f64], q: f64) -> f64 {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let total: f64 = p.iter().sum();
    let mut acc = 0.0;
    for &i in &idx {
        acc += p[i];
        if acc >= q * total {
            return x[i];
        }
    }
    x[*idx.last().unwrap()]
}

/// Fits `ln P` against `|m - center|` over the tail, skipping the core
/// `|m - center| < ell_guess / 4` where `ell_guess = IQR / ln 2`.
pub fn fit_localization_length(m: &[f64], prob: &[f64], center: f64) -> Result<LocalizationFit> {
    if m.len() != prob.len() {
        return Err(Error::usage("position and probability lengths differ"));
    }
    let iqr = quantile(m, prob, 0.75) - quantile(m, prob, 0.25);
    let ell_guess = iqr / LN_2;
    let cut = 0.25 * ell_guess;
    let (x, y): (Vec<f64>, Vec<f64>) = m
        .iter()
        .zip(prob)
        .filter(|(mi, p)| **p > PROB_FLOOR && (**mi - center).abs() >= cut)
        .map(|(mi, p)| ((mi - center).abs(), p.ln()))
        .unzip();
    if x.len() < 20 {
        return Err(Error::Profile {
            r2: f64::NAN,
            points: x.len(),
        });
    }
    let f = fit_line(&x, &y).ok_or(Error::Profile {
        r2: f64::NAN,
        points: x.len(),
    })?;
    if !(f.r2 >= 0.8) || f.slope >= 0.0 {
        return Err(Error::Profile {
            r2: f.r2,
            points: x.len(),
        });
    }
    let ell = 2.0 / f.slope.abs();
    Ok(LocalizationFit {
        ell,
        err: ell * f.slope_err / f.slope.abs(),
        r2: f.r2,
        points: x.len(),
        ell_guess,
    })
}

/// Relative slope of the last third of `y`, per 100 steps, divided by its mean.
pub fn relative_tail_slope(t: &[f64], y: &[f64]) -> Option<f64> {
    let n = t.len();
    if n < 6 {
        return None;
    }
    let a = n - n / 3;
    let f = fit_line(&t[a..], &y[a..])?;
    let mean = y[a..].iter().sum::<f64>() / (n - a) as f64;
    if mean == 0.0 {
        return Some(if f.slope == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Some(100.0 * f.slope / mean.abs())
}

/// Stationarity test on the samples with `t <= t_end`.
pub fn is_saturated(t: &[f64], y: &[f64], t_end: f64) -> bool {
    let k = t.iter().take_while(|&&x| x <= t_end).count();
    relative_tail_slope(&t[..k], &y[..k]).is_some_and(|s| s.abs() < SATURATION_SLOPE)
}

/// Earliest sample time at which the growth over `[0, t]` is stationary,
/// scanning the recorded times in order.
pub fn saturation_time(t: &[f64], y: &[f64]) -> Option<f64> {
    (30..=t.len()).find_map(|k| {
        relative_tail_slope(&t[..k], &y[..k])
            .filter(|s| s.abs() < SATURATION_SLOPE)
            .map(|_| t[k - 1])
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum GrowthLaw {
    Saturated { level: f64 },
    Linear { d: f64 },
    Quadratic { c: f64 },
    Power { mu: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub law: GrowthLaw,
    pub coefficient: f64,
    pub exponent: Option<f64>,
    pub window: (f64, f64),
    /// RMS of `ln y - ln model` over the window.
    pub residual: f64,
    /// Penalised score of each candidate, ordered as
    /// `[linear, quadratic, power]`; lower is better.
    pub scores: [f64; 3],
}

fn log_rms(x: &[f64], y: &[f64], model: impl Fn(f64) -> f64) -> f64 {
    let s: f64 = x
        .iter()
        .zip(y)
        .map(|(&t, &v)| {
            let m = model(t);
            if m > 0.0 {
                (v.ln() - m.ln()).powi(2)
            } else {
                f64::INFINITY
            }
        })
        .sum();
    (s / x.len() as f64).sqrt()
}

/// Selects among stationary, `t`, `t^2` and `t^mu` growth. Stationarity is
/// decided by [`SATURATION_SLOPE`]; the three growing laws compete by
/// `n ln(rms^2) + p ln n` with `p` the parameter count. Exact ties go to
/// the simpler law in the order linear, quadratic, power.
pub fn fit_growth_law(t: &[f64], y: &[f64], window: (f64, f64)) -> Result<GrowthFit> {
    let (x, v): (Vec<f64>, Vec<f64>) = t
        .iter()
        .zip(y)
        .filter(|(a, _)| **a >= window.0 && **a <= window.1)
        .map(|(a, b)| (*a, *b))
        .unzip();
    if x.len() < 30 {
        return Err(Error::Fit {
            msg: format!("{} samples in window, need >= 30", x.len()),
            residual: f64::NAN,
        });
    }
    if v.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
        return Err(Error::Fit {
            msg: "growth fits need positive finite values".into(),
            residual: f64::NAN,
        });
    }
    let n = x.len() as f64;
    if let Some(s) = relative_tail_slope(&x, &v) {
        if s.abs() < SATURATION_SLOPE {
            let level = v.iter().sum::<f64>() / n;
            let residual = log_rms(&x, &v, |_| level);
            return Ok(GrowthFit {
                law: GrowthLaw::Saturated { level },
                coefficient: level,
                exponent: Some(0.0),
                window,
                residual,
                scores: [f64::NAN; 3],
            });
        }
    }
    let lin = fit_line(&x, &v);
    let x2: Vec<f64> = x.iter().map(|a| a * a).collect();
    let quad = fit_line(&x2, &v);
    let lx: Vec<f64> = x.iter().map(|a| a.ln()).collect();
    let lv: Vec<f64> = v.iter().map(|a| a.ln()).collect();
    let pow = fit_line(&lx, &lv);
    let score = |rms: f64| n * rms.max(1e-12).powi(2).ln() + 2.0 * n.ln();
    let r_lin = lin.map_or(f64::INFINITY, |f| log_rms(&x, &v, |a| f.intercept + f.slope * a));
    let r_quad = quad.map_or(f64::INFINITY, |f| log_rms(&x, &v, |a| f.intercept + f.slope * a * a));
    let r_pow = pow.map_or(f64::INFINITY, |f| log_rms(&x, &v, |a| (f.intercept + f.slope * a.ln()).exp()));
    let scores = [score(r_lin), score(r_quad), score(r_pow)];
    let best = (0..3).fold(0, |b, i| if scores[i] < scores[b] { i } else { b });
    let residuals = [r_lin, r_quad, r_pow];
    if !residuals[best].is_finite() || residuals[best] > 1.0 {
        return Err(Error::Fit {
            msg: "no growth law fits".into(),
            residual: residuals[best],
        });
    }
    let unwrap = |f: Option<LineFit>| f.expect("finite residual implies a fit");
    let (law, coefficient, exponent) = match best {
        0 => {
            let d = unwrap(lin).slope;
            (GrowthLaw::Linear { d }, d, Some(1.0))
        }
        1 => {
            let c = unwrap(quad).slope;
            (GrowthLaw::Quadratic { c }, c, Some(2.0))
        }
        _ => {
            let f = unwrap(pow);
            (GrowthLaw::Power { mu: f.slope }, f.intercept.exp(), Some(f.slope))
        }
    };
    Ok(GrowthFit {
        law,
        coefficient,
        exponent,
        window,
        residual: residuals[best],
        scores,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timescales {
    pub t_ehrenfest: f64,
    pub t_star: f64,
    pub ell_pred: f64,
}

/// Ehrenfest time `|ln T| / ln(K/2)` and break time `k^2/2`.
pub fn timescales(k_classical: f64, k: f64, period: f64) -> Result<Timescales> {
    if !(k_classical > 2.0) {
        return Err(Error::domain("K", format!("{k_classical} <= 2 so ln(K/2) <= 0")));
    }
    let t_star = 0.5 * k * k;
    Ok(Timescales {
        t_ehrenfest: period.ln().abs() / (0.5 * k_classical).ln(),
        t_star,
        ell_pred: t_star,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Metal,
    Insulator,
    Critical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantumCorrection {
    /// `2/mu > 1`: grows with system size.
    Growing,
    /// `2/mu = 1`: logarithmic.
    Logarithmic,
    /// `2/mu < 1`: subleading.
    Subleading,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingVerdict {
    pub gamma_cl: f64,
    pub phase: Phase,
    pub beta_singular: Option<f64>,
    pub quantum_correction: QuantumCorrection,
}

fn phase_of(x: f64) -> Phase {
    if x.abs() <= CRITICAL_TOLERANCE {
        Phase::Critical
    } else if x > 0.0 {
        Phase::Metal
    } else {
        Phase::Insulator
    }
}

/// `gamma_cl = d/d_e - 2/mu`. With a singular exponent `alpha` the phase
/// follows `beta = -alpha / (1 - alpha)` instead.
pub fn scaling_verdict(d: f64, d_e: f64, mu: f64, alpha: Option<f64>) -> Result<ScalingVerdict> {
    if !(mu > 0.0) {
        return Err(Error::domain("mu", "must be positive"));
    }
    if !(d_e > 0.0 && d_e <= 1.0) {
        return Err(Error::domain("d_e", "must lie in (0, 1]"));
    }
    let gamma_cl = d / d_e - 2.0 / mu;
    let beta_singular = alpha.map(|a| if a == 0.0 { 0.0 } else { -a / (1.0 - a) });
    let phase = phase_of(beta_singular.unwrap_or(gamma_cl));
    let r = 2.0 / mu;
    let quantum_correction = if (r - 1.0).abs() <= CRITICAL_TOLERANCE {
        QuantumCorrection::Logarithmic
    } else if r > 1.0 {
        QuantumCorrection::Growing
    } else {
        QuantumCorrection::Subleading
    };
    Ok(ScalingVerdict {
        gamma_cl,
        phase,
        beta_singular,
        quantum_correction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(ell: f64, half: i64, scale: f64) -> (Vec<f64>, Vec<f64>) {
        let m: Vec<f64> = (-half..=half).map(|i| scale * i as f64).collect();
        let p: Vec<f64> = m.iter().map(|x| (-2.0 * x.abs() / ell).exp() / ell).collect();
        (m, p)
    }

    #[test]
    fn synthetic_profile() {
        let (m, p) = synthetic(200.0, 3000, 1.0);
        let f = fit_localization_length(&m, &p, 0.0).unwrap();
        assert!((f.ell / 200.0 - 1.0).abs() < 0.02, "{f:?}");
    }

    #[test]
    fn scale_equivariance() {
        let (m, p) = synthetic(60.0, 800, 1.0);
        let (m2, _) = synthetic(60.0, 800, 4.0);
        let a = fit_localization_length(&m, &p, 0.0).unwrap();
        let b = fit_localization_length(&m2, &p, 0.0).unwrap();
        assert_eq!(b.ell, 4.0 * a.ell);
    }

    #[test]
    fn flat_profile_rejected() {
        let m: Vec<f64> = (-100..=100).map(|i| i as f64).collect();
        let p: Vec<f64> = m.iter().map(|x| 1.0 + 0.5 * (x * 1.3).sin()).collect();
        assert!(matches!(fit_localization_length(&m, &p, 0.0), Err(Error::Profile { .. })));
    }

    #[test]
    fn growth_laws_on_exact_series() {
        let t: Vec<f64> = (1..=200).map(|i| i as f64).collect();
        let q: Vec<f64> = t.iter().map(|x| 0.25 * 9.0 * x * x).collect();
        let f = fit_growth_law(&t, &q, (1.0, 200.0)).unwrap();
        assert!(matches!(f.law, GrowthLaw::Quadratic { c } if (c - 2.25).abs() < 1e-9));
        let l: Vec<f64> = t.iter().map(|x| 3.0 * x).collect();
        assert!(matches!(fit_growth_law(&t, &l, (1.0, 200.0)).unwrap().law, GrowthLaw::Linear { .. }));
        let c: Vec<f64> = t.iter().map(|x| 0.7 * x.powf(3.0)).collect();
        match fit_growth_law(&t, &c, (1.0, 200.0)).unwrap().law {
            GrowthLaw::Power { mu } => assert!((mu - 3.0).abs() < 0.03),
            other => panic!("{other:?}"),
        }
        let s = vec![5.0; 200];
        assert!(matches!(fit_growth_law(&t, &s, (1.0, 200.0)).unwrap().law, GrowthLaw::Saturated { .. }));
    }

    #[test]
    fn short_window_is_error() {
        let t: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        assert!(fit_growth_law(&t, &t, (1.0, 20.0)).is_err());
    }

    #[test]
    fn timescale_values() {
        let s = timescales(5.0, 20.0, 0.25).unwrap();
        assert!((s.t_ehrenfest - 4f64.ln() / 2.5f64.ln()).abs() < 1e-15);
        assert!((s.t_ehrenfest - 1.51).abs() < 0.01);
        assert_eq!(timescales(5.0, 20.0, 0.25).unwrap().t_star, 200.0);
        assert_eq!(timescales(5.0, 5.0, 1.0).unwrap().t_ehrenfest, 0.0);
        assert!(timescales(2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn verdicts() {
        let v = scaling_verdict(1.0, 1.0, 1.0, None).unwrap();
        assert_eq!((v.gamma_cl, v.phase), (-1.0, Phase::Insulator));
        assert_eq!(v.quantum_correction, QuantumCorrection::Growing);
        let c = scaling_verdict(1.0, 1.0, 2.0, None).unwrap();
        assert_eq!(c.phase, Phase::Critical);
        assert_eq!(c.quantum_correction, QuantumCorrection::Logarithmic);
        let z = scaling_verdict(1.0, 1.0, 1.0, Some(0.0)).unwrap();
        assert_eq!((z.beta_singular, z.phase), (Some(0.0), Phase::Critical));
        assert_eq!(scaling_verdict(1.0, 1.0, 1.0, Some(0.5)).unwrap().phase, Phase::Insulator);
        assert_eq!(scaling_verdict(1.0, 1.0, 1.0, Some(-0.5)).unwrap().phase, Phase::Metal);
    }
}
