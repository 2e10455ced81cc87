use super::engine::{free_phases, theta_grid, RotorState, StepReport, DEFAULT_SPILL_THRESHOLD};
use crate::classical::KickPotential;
use crate::error::{Error, Result};
use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Two kicks per period:
/// `exp(-i (T - T0) m^2 / 2) K exp(-i T0 m^2 / 2) K(alpha)`, where
/// `K(alpha) = exp(-i V(theta + alpha))` carries the synthetic phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleKickSpec {
    pub potential: KickPotential,
    pub t0: f64,
    pub period: f64,
}

pub struct DoubleKickPropagator {
    l: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<C64>,
    theta: Vec<f64>,
    potential: KickPotential,
    f1: Vec<C64>,
    f2: Vec<C64>,
    kick2: Vec<C64>,
    kick1: Vec<C64>,
    alpha: f64,
    pub spill_threshold: f64,
}

impl DoubleKickPropagator {
    pub fn new(spec: &DoubleKickSpec, l: usize) -> Self {
        let n = 2 * l + 1;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        let theta = theta_grid(l);
        let kick2 = Self::kick(&spec.potential, &theta, 0.0);
        DoubleKickPropagator {
            l,
            fwd,
            inv,
            scratch: vec![C64::new(0.0, 0.0); scratch_len],
            f1: free_phases(l, spec.t0, 0.0),
            f2: free_phases(l, spec.period - spec.t0, 0.0),
            kick1: kick2.clone(),
            kick2,
            theta,
            potential: spec.potential,
            alpha: 0.0,
            spill_threshold: DEFAULT_SPILL_THRESHOLD,
        }
    }

    fn kick(pot: &KickPotential, theta: &[f64], alpha: f64) -> Vec<C64> {
        let inv_n = 1.0 / theta.len() as f64;
        theta
            .iter()
            .map(|&t| C64::from_polar(inv_n, -pot.value(t + alpha)))
            .collect()
    }

    fn apply(&mut self, a: &mut [C64], first: bool) {
        self.inv.process_with_scratch(a, &mut self.scratch);
        let k = if first { &self.kick1 } else { &self.kick2 };
        for (x, f) in a.iter_mut().zip(k) {
            *x *= f;
        }
        self.fwd.process_with_scratch(a, &mut self.scratch);
        let f = if first { &self.f1 } else { &self.f2 };
        for (x, p) in a.iter_mut().zip(f) {
            *x *= p;
        }
    }

    pub fn step(&mut self, s: &mut RotorState, alpha: f64) -> Result<StepReport> {
        if s.l != self.l || s.components != 1 {
            return Err(Error::usage("double-kick propagation needs a scalar state of matching L"));
        }
        if alpha != self.alpha {
            self.kick1 = Self::kick(&self.potential, &self.theta, alpha);
            self.alpha = alpha;
        }
        self.apply(&mut s.amps, true);
        self.apply(&mut s.amps, false);
        let edge = s.edge_occupation() / s.norm().max(f64::MIN_POSITIVE);
        Ok(StepReport {
            spill: edge > self.spill_threshold,
            edge,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{evolve, init_state, FloquetSpec, InitKind};

    #[test]
    fn equal_halves_match_single_kick_twice() {
        let pot = KickPotential::cosine(1.7);
        let spec = DoubleKickSpec {
            potential: pot,
            t0: 0.9,
            period: 1.8,
        };
        let s0 = init_state(64, 1.0, &InitKind::Delta { m0: 0 }).unwrap();
        let mut s = s0.clone();
        let mut p = DoubleKickPropagator::new(&spec, 64);
        for _ in 0..5 {
            p.step(&mut s, 0.0).unwrap();
        }
        let r = evolve(&s0, &FloquetSpec::kicked_rotor(1.7, 0.9), 10, 10).unwrap();
        for (a, b) in s.amps.iter().zip(&r.state.amps) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
