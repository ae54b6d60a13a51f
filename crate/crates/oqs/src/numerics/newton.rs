use super::Tolerance;
use crate::error::{OqsError, Result};

/// How the Jacobian of a two-dimensional system is obtained.
pub enum Jacobian<'a> {
    Analytic(&'a dyn Fn(f64, f64) -> [[f64; 2]; 2]),
    FiniteDifference,
}

fn fd_jacobian(f: &dyn Fn(f64, f64) -> (f64, f64), x: f64, y: f64) -> [[f64; 2]; 2] {
    let hx = 1e-7 * x.abs().max(1.0);
    let hy = 1e-7 * y.abs().max(1.0);
    let (a1, b1) = f(x + hx, y);
    let (a0, b0) = f(x - hx, y);
    let (c1, d1) = f(x, y + hy);
    let (c0, d0) = f(x, y - hy);
    [
        [(a1 - a0) / (2.0 * hx), (c1 - c0) / (2.0 * hy)],
        [(b1 - b0) / (2.0 * hx), (d1 - d0) / (2.0 * hy)],
    ]
}

fn norm_inf(r: (f64, f64)) -> f64 {
    let n = r.0.abs().max(r.1.abs());
    if n.is_nan() {
        f64::INFINITY
    } else {
        n
    }
}

/// Damped Newton-Raphson iteration for `f(x, y) = 0` in the plane.
///
/// Converged when the infinity norm of the residual is at most
/// `tol.abs_tol`. A backtracking line search halves the step while the
/// residual does not decrease.
pub fn newton2d(
    f: impl Fn(f64, f64) -> (f64, f64),
    jac: Jacobian<'_>,
    seed: (f64, f64),
    tol: &Tolerance,
) -> Result<(f64, f64)> {
    tol.validate()?;
    let (mut x, mut y) = seed;
    let mut r = f(x, y);
    let mut rn = norm_inf(r);
    for _ in 0..tol.max_iter {
        if rn <= tol.abs_tol {
            return Ok((x, y));
        }
        let j = match &jac {
            Jacobian::Analytic(g) => g(x, y),
            Jacobian::FiniteDifference => fd_jacobian(&f, x, y),
        };
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let jscale = j.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
        if !(det.abs() > 1e-14 * jscale * jscale) {
            return Err(OqsError::SingularJacobian { x, y });
        }
        let dx = (j[1][1] * r.0 - j[0][1] * r.1) / det;
        let dy = (-j[1][0] * r.0 + j[0][0] * r.1) / det;
        let mut alpha = 1.0;
        loop {
            let (xn, yn) = (x - alpha * dx, y - alpha * dy);
            let rnew = f(xn, yn);
            let nn = norm_inf(rnew);
            if nn < rn || alpha < 1.0 / 64.0 {
                if nn.is_finite() {
                    x = xn;
                    y = yn;
                    r = rnew;
                    rn = nn;
                }
                break;
            }
            alpha *= 0.5;
        }
        if (alpha * dx).abs() <= f64::EPSILON * x.abs() && (alpha * dy).abs() <= f64::EPSILON * y.abs() {
            break;
        }
    }
    if rn <= tol.abs_tol {
        Ok((x, y))
    } else {
        Err(OqsError::NoConvergence { what: "two-dimensional Newton iteration", iterations: tol.max_iter })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_line_intersection() {
        let f = |x: f64, y: f64| (x * x + y * y - 1.0, x - y);
        let (x, y) = newton2d(f, Jacobian::FiniteDifference, (0.6, 0.6), &Tolerance::default()).unwrap();
        let h = 0.5f64.sqrt();
        assert!((x - h).abs() < 1e-12 && (y - h).abs() < 1e-12);
    }

    #[test]
    fn analytic_jacobian() {
        let f = |x: f64, y: f64| (x * x + y * y - 1.0, x - y);
        let j = |x: f64, y: f64| [[2.0 * x, 2.0 * y], [1.0, -1.0]];
        let (x, _) = newton2d(f, Jacobian::Analytic(&j), (0.6, 0.6), &Tolerance::default()).unwrap();
        assert!((x - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn singular_jacobian() {
        let f = |x: f64, y: f64| (x + y - 1.0, 2.0 * x + 2.0 * y - 3.0);
        let e = newton2d(f, Jacobian::FiniteDifference, (0.3, 0.1), &Tolerance::default()).unwrap_err();
        assert!(matches!(e, OqsError::SingularJacobian { .. }));
    }
}
