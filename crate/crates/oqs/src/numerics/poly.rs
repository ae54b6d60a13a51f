use super::{Complex64, Tolerance};
use crate::error::{OqsError, Result};

/// Horner evaluation of `p(z)` and `p'(z)`; coefficients in descending order.
pub fn poly_eval(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &a in coeffs {
        dp = dp * z + p;
        p = p * z + a;
    }
    (p, dp)
}

fn abs_poly_eval(coeffs: &[Complex64], r: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, a| acc * r + a.norm())
}

/// Positive root of the Cauchy polynomial |a_0| x^d - sum |a_k| x^(d-k):
/// an upper bound on the moduli of all roots.
fn cauchy_upper_bound(coeffs: &[Complex64]) -> f64 {
    let lead = coeffs[0].norm();
    let rest: Vec<f64> = coeffs[1..].iter().map(|a| a.norm() / lead).collect();
    let d = rest.len();
    let q = |x: f64| {
        let mut v = 1.0;
        for r in &rest {
            v = v * x - r;
        }
        v
    };
    let mut hi = 1.0 + rest.iter().cloned().fold(0.0, f64::max);
    let mut lo = 0.0;
    if q(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if q(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    if d == 0 {
        1.0
    } else {
        hi.max(f64::MIN_POSITIVE)
    }
}

/// All roots of the polynomial with coefficients in descending order
/// (`coeffs[0]` multiplies the highest power), by the Aberth-Ehrlich
/// iteration started from a deterministic ring on the Cauchy bound.
///
/// Leading zero coefficients are stripped; trailing zeros yield exact zero
/// roots. Each returned root satisfies
/// `|p(z)| <= abs_tol * max|coeffs| * max(1, |z|)^d`.
pub fn poly_roots(coeffs: &[Complex64], tol: &Tolerance) -> Result<Vec<Complex64>> {
    tol.validate()?;
    let scale = coeffs.iter().map(|a| a.norm()).fold(0.0, f64::max);
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(OqsError::ZeroPolynomial);
    }
    let first = coeffs.iter().position(|a| a.norm() > 0.0).unwrap();
    let mut p: Vec<Complex64> = coeffs[first..].to_vec();
    let mut roots = Vec::new();
    while p.len() > 1 && p[p.len() - 1].norm() == 0.0 {
        p.pop();
        roots.push(Complex64::new(0.0, 0.0));
    }
    let d = p.len() - 1;
    if d == 0 && roots.is_empty() {
        return Err(OqsError::Domain("polynomial degree must be at least 1".into()));
    }
    if d == 0 {
        return Ok(roots);
    }
    if d == 1 {
        roots.push(-p[1] / p[0]);
        return Ok(roots);
    }

    let radius = cauchy_upper_bound(&p);
    let mut z: Vec<Complex64> = (0..d)
        .map(|k| Complex64::from_polar(radius, 2.0 * std::f64::consts::PI * k as f64 / d as f64 + 0.4))
        .collect();
    let dp: Vec<Complex64> = p[..d].iter().enumerate().map(|(i, a)| a * (d - i) as f64).collect();

    let mut converged = vec![false; d];
    let mut iter = 0;
    while converged.iter().any(|c| !c) {
        if iter >= tol.max_iter {
            return Err(OqsError::NoConvergence { what: "Aberth-Ehrlich root finder", iterations: iter });
        }
        iter += 1;
        for i in 0..d {
            if converged[i] {
                continue;
            }
            let (pv, _) = poly_eval(&p, z[i]);
            let (dpv, _) = poly_eval(&dp, z[i]);
            let floor = 4.0 * f64::EPSILON * abs_poly_eval(&p, z[i].norm());
            if pv.norm() <= floor {
                converged[i] = true;
                continue;
            }
            let ratio = pv / dpv;
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..d {
                if j != i {
                    s += 1.0 / (z[i] - z[j]);
                }
            }
            let w = ratio / (1.0 - ratio * s);
            if !(w.re.is_finite() && w.im.is_finite()) {
                // Perturb off a critical point and retry next sweep.
                z[i] += Complex64::new(1e-3 * radius, 1e-3 * radius);
                continue;
            }
            z[i] -= w;
            if w.norm() <= 2.0 * f64::EPSILON * z[i].norm().max(f64::MIN_POSITIVE) {
                converged[i] = true;
            }
        }
    }

    for zi in &z {
        let (pv, _) = poly_eval(&p, *zi);
        let bound = tol.abs_tol * scale * zi.norm().max(1.0).powi(d as i32);
        if !(pv.norm() <= bound) {
            return Err(OqsError::NoConvergence { what: "Aberth-Ehrlich root finder", iterations: iter });
        }
    }
    roots.extend(z);
    Ok(roots)
}
