use super::{band_spectrum, chern_numbers, match_bands, node_eigen, overlap, BandGrid, ChernNumbers, ReducedBuilder, ResonantDkrSpec};
use crate::classical::KickPotential;
use crate::error::{Error, Result};
use crate::quantum::{DoubleKickPropagator, DoubleKickSpec, RotorState};
use crate::series::TimeSeries;
use crate::stats::Neumaier;
use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Band leakage above which the cycle is flagged as non-adiabatic.
pub const LEAKAGE_LIMIT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpParams {
    pub band: usize,
    /// Steps per cycle; period `d` uses `alpha_d = 2 pi d / d_f`.
    pub d_f: usize,
    /// Lattice half-width.
    pub l: usize,
    pub n_phi: usize,
    pub n_alpha: usize,
    /// Leakage is recorded this many times over the cycle.
    pub leakage_samples: usize,
}

#[derive(Debug, Clone)]
pub struct PumpResult {
    /// Columns `t, alpha, meanI, leakage`; leakage is NaN between samples.
    pub series: TimeSeries,
    pub delta_i: f64,
    /// `-s C_n`.
    pub predicted: f64,
    pub chern: ChernNumbers,
    pub max_leakage: f64,
    pub adiabaticity_warning: bool,
}

/// Band vectors along the `alpha = 0` column in a parallel-transport gauge
/// with the closure phase spread evenly.
fn smooth_column(grid: &BandGrid, band: usize) -> Vec<Vec<C64>> {
    let n = grid.n_phi;
    let mut us: Vec<Vec<C64>> = (0..n).map(|i| grid.vector(i, 0, band)).collect();
    let dot = |a: &[C64], b: &[C64]| -> C64 { a.iter().zip(b).map(|(x, y)| x.conj() * y).sum() };
    for i in 1..n {
        let ph = dot(&us[i - 1], &us[i]).arg();
        let z = C64::from_polar(1.0, -ph);
        us[i].iter_mut().for_each(|x| *x *= z);
    }
    let closing = dot(&us[n - 1], &grid.vector(n, 0, band)).arg();
    for (i, u) in us.iter_mut().enumerate() {
        let z = C64::from_polar(1.0, closing * i as f64 / n as f64);
        u.iter_mut().for_each(|x| *x *= z);
    }
    us
}

/// Equal-weight superposition of one band's Bloch states on the `phi` mesh,
/// `psi_j = sum_i exp(i j phi_i / s) u_n(phi_i)_{j mod s}`, over one spatial period.
pub fn wannier_state(grid: &BandGrid, band: usize, l: usize) -> Result<RotorState> {
    if grid.spec.spin.is_some() {
        return Err(Error::usage("pump is defined for the scalar rotor"));
    }
    let s = grid.spec.s;
    let period = (grid.n_phi as i64) * s;
    let reach = (period - 1) / 2;
    if reach as usize >= l {
        return Err(Error::domain("L", format!("lattice half-width must exceed {reach}")));
    }
    let us = smooth_column(grid, band);
    let mut st = RotorState {
        l,
        components: 1,
        amps: vec![C64::new(0.0, 0.0); 2 * l + 1],
        hbar_eff: 1.0,
    };
    for j in -reach..=reach {
        let mut acc = C64::new(0.0, 0.0);
        for (i, u) in us.iter().enumerate() {
            acc += C64::from_polar(1.0, j as f64 * grid.phi(i) / s as f64) * u[j.rem_euclid(s) as usize];
        }
        st.amps[(j + l as i64) as usize] = acc;
    }
    st.normalize()?;
    Ok(st)
}

pub fn mean_momentum(st: &RotorState) -> f64 {
    let mut acc = Neumaier::default();
    for (i, a) in st.amps.iter().enumerate() {
        acc.add(a.norm_sqr() * (i as f64 - st.l as f64));
    }
    acc.value() / st.norm()
}

/// Weight outside the band, from the Bloch decomposition on a `phi` grid
/// fine enough for exact Parseval sums of the lattice state.
pub fn band_leakage(st: &RotorState, builder: &ReducedBuilder, grid: &BandGrid, band: usize, alpha: f64) -> f64 {
    let s = grid.spec.s;
    let l = st.l as i64;
    let m_phi = ((2 * l) / s + 8).max(4 * grid.n_phi as i64) as usize;
    let j_ref = ((alpha.rem_euclid(TAU) / TAU * grid.n_alpha as f64).round() as usize) % grid.n_alpha;
    let mut reference = grid.vectors[grid.node(0, j_ref)].clone();
    let mut inside = Neumaier::default();
    let mut total = Neumaier::default();
    for q in 0..m_phi {
        let phi = TAU * q as f64 / m_phi as f64;
        let (_, _, vecs, _) = node_eigen(&builder.matrix(phi, alpha));
        let perm = match_bands(&reference, &vecs);
        let mut ordered = Array2::zeros(vecs.raw_dim());
        for (a, &b) in perm.iter().enumerate() {
            ordered.column_mut(a).assign(&vecs.column(b));
        }
        let mut comp = Array2::<C64>::zeros((s as usize, 1));
        for j in -l..=l {
            comp[[j.rem_euclid(s) as usize, 0]] += C64::from_polar(1.0, -(j as f64) * phi / s as f64) * st.amps[(j + l) as usize];
        }
        total.add(comp.iter().map(|z| z.norm_sqr()).sum());
        inside.add(overlap(&ordered, band, &comp, 0).norm_sqr());
        reference = ordered;
    }
    (1.0 - inside.value() / total.value()).max(0.0)
}

/// One adiabatic cycle of the synthetic phase on the full momentum lattice.
pub fn thouless_pump(spec: &ResonantDkrSpec, p: &PumpParams) -> Result<PumpResult> {
    if p.d_f == 0 {
        return Err(Error::usage("d_f must be positive"));
    }
    let grid = band_spectrum(spec, p.n_phi, p.n_alpha)?;
    if p.band >= grid.bands() {
        return Err(Error::usage(format!("band {} out of {}", p.band, grid.bands())));
    }
    let chern = chern_numbers(&grid)?;
    let builder = ReducedBuilder::new(spec)?;
    let mut st = wannier_state(&grid, p.band, p.l)?;
    let mut prop = DoubleKickPropagator::new(
        &DoubleKickSpec {
            potential: KickPotential::cosine(spec.k),
            t0: spec.t0(),
            period: 2.0 * TAU,
        },
        p.l,
    );
    let every = (p.d_f / p.leakage_samples.max(1)).max(1);
    let mut series = TimeSeries::new(&["t", "alpha", "meanI", "leakage"]);
    let i0 = mean_momentum(&st);
    let l0 = band_leakage(&st, &builder, &grid, p.band, 0.0);
    series.push(vec![0.0, 0.0, i0, l0]);
    let mut max_leakage = l0;
    for t in 1..=p.d_f {
        // alpha_d holds during the d-th period, so the cycle ends at 2 pi
        let alpha = TAU * t as f64 / p.d_f as f64;
        let r = prop.step(&mut st, alpha)?;
        if r.spill {
            return Err(Error::Truncation(format!("edge occupation {:.2e} at step {t}", r.edge)));
        }
        let leak = if t % every == 0 || t == p.d_f {
            let x = band_leakage(&st, &builder, &grid, p.band, alpha);
            max_leakage = max_leakage.max(x);
            x
        } else {
            f64::NAN
        };
        series.push(vec![t as f64, alpha, mean_momentum(&st), leak]);
    }
    let delta_i = mean_momentum(&st) - i0;
    Ok(PumpResult {
        series,
        delta_i,
        predicted: -(spec.s as f64) * chern.lattice[p.band] as f64,
        chern,
        max_leakage,
        adiabaticity_warning: max_leakage > LEAKAGE_LIMIT,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(band: usize, d_f: usize) -> PumpParams {
        PumpParams {
            band,
            d_f,
            l: d_f + 128,
            n_phi: 24,
            n_alpha: 24,
            leakage_samples: 2,
        }
    }

    #[test]
    fn wannier_state_is_in_band() {
        let spec = ResonantDkrSpec::new(1, 3, 2.0).unwrap();
        let grid = band_spectrum(&spec, 24, 24).unwrap();
        let st = wannier_state(&grid, 1, 100).unwrap();
        let b = ReducedBuilder::new(&spec).unwrap();
        assert!(band_leakage(&st, &b, &grid, 1, 0.0) < 1e-10);
    }

    #[test]
    fn trivial_band_does_not_pump() {
        let spec = ResonantDkrSpec::new(1, 1, 1.5).unwrap();
        let r = thouless_pump(&spec, &params(0, 200)).unwrap();
        assert_eq!(r.chern.lattice, vec![0]);
        assert!(r.delta_i.abs() < 0.05);
    }

    #[test]
    fn nontrivial_band_pumps_three_quanta() {
        let spec = ResonantDkrSpec::new(1, 3, 2.0).unwrap();
        let r = thouless_pump(&spec, &params(1, 250)).unwrap();
        assert_eq!(r.predicted, 3.0);
        assert!((r.delta_i - r.predicted).abs() < 0.05 * 3.0);
        assert!(!r.adiabaticity_warning);
    }
}
