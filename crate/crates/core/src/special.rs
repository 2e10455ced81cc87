//! Bessel functions of the first kind for integer order.

/// `J_n(x)` for all `|n| <= n_max`, returned as a vector indexed by `n + n_max`.
///
/// Miller's backward recurrence normalised with
/// `J_0 + 2 sum J_{2j} = 1`; accurate to a few ulps for the orders and
/// arguments used by the kick matrices.
pub fn bessel_j_table(n_max: usize, x: f64) -> Vec<f64> {
    let len = 2 * n_max + 1;
    let mut out = vec![0.0; len];
    if x == 0.0 {
        out[n_max] = 1.0;
        return out;
    }
    let ax = x.abs();
    let start = {
        let m = (n_max as f64).max(ax) + 30.0 + 10.0 * ax.sqrt();
        let m = m.ceil() as usize;
        m + (m & 1)
    };
    let mut j = vec![0.0; start + 2];
    j[start + 1] = 0.0;
    j[start] = 1e-300;
    for k in (1..=start).rev() {
        j[k - 1] = 2.0 * k as f64 / ax * j[k] - j[k + 1];
        if j[k - 1].abs() > 1e250 {
            for v in j.iter_mut().skip(k - 1) {
                *v *= 1e-250;
            }
        }
    }
    let mut norm = j[0];
    for k in (2..=start).step_by(2) {
        norm += 2.0 * j[k];
    }
    for n in 0..=n_max {
        let mut v = j[n] / norm;
        // J_n(-x) = (-1)^n J_n(x)
        if x < 0.0 && n % 2 == 1 {
            v = -v;
        }
        out[n_max + n] = v;
        // J_{-n}(x) = (-1)^n J_n(x)
        out[n_max - n] = if n % 2 == 1 { -v } else { v };
    }
    out
}

pub fn bessel_j(n: i64, x: f64) -> f64 {
    let m = n.unsigned_abs() as usize;
    bessel_j_table(m, x)[if n >= 0 { 2 * m } else { 0 }]
}
