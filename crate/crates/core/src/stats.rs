//! Compensated sums and least-squares helpers shared by the fitting code.

use rayon::prelude::*;

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &Neumaier) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn sum(xs: &[f64]) -> f64 {
    let mut acc = Neumaier::default();
    xs.iter().for_each(|&x| acc.add(x));
    acc.value()
}

pub fn mean(xs: &[f64]) -> f64 {
    sum(xs) / xs.len() as f64
}

/// Chunk size used by [`par_map_sum`]. Fixed so that reductions do not
/// depend on the size of the thread pool.
pub const REDUCE_CHUNK: usize = 1024;

/// Parallel sum of `f(i)` for `i < n` with a fixed chunking, so the
/// floating-point result is identical for any number of threads.
pub fn par_map_sum<F>(n: usize, cols: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    let chunks: Vec<Vec<Neumaier>> = (0..n.div_ceil(REDUCE_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![Neumaier::default(); cols];
            let mut buf = vec![0.0; cols];
            for i in c * REDUCE_CHUNK..((c + 1) * REDUCE_CHUNK).min(n) {
                f(i, &mut buf);
                for (a, &b) in acc.iter_mut().zip(&buf) {
                    a.add(b);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Neumaier::default(); cols];
    for chunk in &chunks {
        for (t, c) in total.iter_mut().zip(chunk) {
            t.merge(c);
        }
    }
    total.iter().map(Neumaier::value).collect()
}

/// Ordinary least squares fit `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Root mean square of residuals.
    pub rms: f64,
    /// Standard error of the slope from the residual variance.
    pub slope_err: f64,
    pub n: usize,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = mean(x);
    let my = mean(y);
    let mut sxx = Neumaier::default();
    let mut sxy = Neumaier::default();
    let mut syy = Neumaier::default();
    for (&a, &b) in x.iter().zip(y) {
        sxx.add((a - mx) * (a - mx));
        sxy.add((a - mx) * (b - my));
        syy.add((b - my) * (b - my));
    }
    let (sxx, sxy, syy) = (sxx.value(), sxy.value(), syy.value());
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss = Neumaier::default();
    for (&a, &b) in x.iter().zip(y) {
        let r = b - intercept - slope * a;
        ss.add(r * r);
    }
    let ss = ss.value();
    let r2 = if syy > 0.0 { 1.0 - ss / syy } else { 1.0 };
    let dof = (n as f64 - 2.0).max(1.0);
    Some(LineFit {
        slope,
        intercept,
        r2,
        rms: (ss / n as f64).sqrt(),
        slope_err: (ss / dof / sxx).sqrt(),
        n,
    })
}

/// Lag-1 autocorrelation of a residual sequence.
pub fn lag1_autocorrelation(r: &[f64]) -> f64 {
    if r.len() < 3 {
        return 0.0;
    }
    let m = mean(r);
    let mut num = Neumaier::default();
    let mut den = Neumaier::default();
    for w in r.windows(2) {
        num.add((w[0] - m) * (w[1] - m));
    }
    for &v in r {
        den.add((v - m) * (v - m));
    }
    if den.value() == 0.0 {
        0.0
    } else {
        num.value() / den.value()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neumaier_recovers_cancellation() {
        let mut acc = Neumaier::default();
        for x in [1.0, 1e100, 1.0, -1e100] {
            acc.add(x);
        }
        assert_eq!(acc.value(), 2.0);
    }

    #[test]
    fn exact_line() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14);
        assert!((f.intercept - 3.0).abs() < 1e-13);
        assert!((f.r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn par_sum_is_pool_independent() {
        let f = |i: usize, out: &mut [f64]| {
            out[0] = (i as f64).sin();
            out[1] = 1.0 / (1.0 + i as f64);
        };
        let a = par_map_sum(10_000, 2, f);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| par_map_sum(10_000, 2, f));
        assert_eq!(a[0].to_bits(), b[0].to_bits());
        assert_eq!(a[1].to_bits(), b[1].to_bits());
    }
}
