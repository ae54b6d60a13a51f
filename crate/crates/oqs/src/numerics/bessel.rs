use std::f64::consts::PI;

use crate::error::{OqsError, Result};

const MAX_ARG: f64 = 1e6;

fn j1_series(x: f64) -> f64 {
    let h = 0.5 * x;
    let h2 = h * h;
    let mut term = h;
    let mut sum = h;
    for m in 1..60 {
        term *= -h2 / (m as f64 * (m + 1) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Hankel asymptotic expansion, used for |x| > 25 where the terms decrease
/// far below double precision before diverging.
fn j1_asymptotic(x: f64) -> f64 {
    let mu = 4.0;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        if term.abs() > last {
            break;
        }
        last = term.abs();
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let (s, c) = x.sin_cos();
    // cos and sin of x - 3pi/4 without forming the shifted argument.
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let cos_chi = r * (s - c);
    let sin_chi = -r * (s + c);
    (2.0 / (PI * x)).sqrt() * (p * cos_chi - q * sin_chi)
}

/// Bessel function of the first kind of order one.
///
/// Power series for |x| <= 4, normalized Miller backward recurrence up to
/// |x| = 25 and the Hankel expansion beyond. Absolute error is below 1e-14
/// for |x| <= 1e4.
pub fn bessel_j1(x: f64) -> Result<f64> {
    if !x.is_finite() || x.abs() > MAX_ARG {
        return Err(OqsError::Domain(format!("bessel_j1 argument {x} outside |x| <= {MAX_ARG}")));
    }
    let ax = x.abs();
    if ax <= 4.0 {
        return Ok(j1_series(x));
    }
    let v = if ax <= 25.0 {
        bessel_j_sequence(1, ax)?[1]
    } else {
        j1_asymptotic(ax)
    };
    Ok(if x < 0.0 { -v } else { v })
}

/// `J_0(x), ..., J_nmax(x)` by Miller's backward recurrence normalized with
/// `J_0 + 2 sum J_2k = 1`.
pub fn bessel_j_sequence(nmax: usize, x: f64) -> Result<Vec<f64>> {
    if !x.is_finite() || x.abs() > MAX_ARG {
        return Err(OqsError::Domain(format!("bessel_j_sequence argument {x} outside |x| <= {MAX_ARG}")));
    }
    let mut out = vec![0.0; nmax + 1];
    let ax = x.abs();
    if ax == 0.0 {
        out[0] = 1.0;
        return Ok(out);
    }
    let mut start = (nmax as f64).max(ax) as usize + 30 + (12.0 * ax.cbrt()) as usize;
    if start % 2 == 1 {
        start += 1;
    }
    let mut j = vec![0.0; start + 2];
    j[start] = 1e-300;
    for k in (1..=start).rev() {
        let prev = (2.0 * k as f64 / ax) * j[k] - j[k + 1];
        j[k - 1] = prev;
        if prev.abs() > 1e200 {
            for v in j.iter_mut().skip(k - 1) {
                *v *= 1e-200;
            }
        }
    }
    let norm = j[0] + 2.0 * j.iter().skip(2).step_by(2).sum::<f64>();
    for (k, o) in out.iter_mut().enumerate() {
        let v = j[k] / norm;
        *o = if x < 0.0 && k % 2 == 1 { -v } else { v };
    }
    Ok(out)
}
