use nalgebra::{DMatrix, DVector, Schur};

use super::{poly_roots, Complex64, Tolerance};
use crate::error::{OqsError, Result};

const MAX_DIM: usize = 4096;

/// An eigenvalue with its right eigenvector.
pub type EigenPair = (Complex64, DVector<Complex64>);

/// Eigenpairs of a dense complex matrix: complex Schur form followed by
/// back-substitution on the triangular factor. Vectors have unit 2-norm and
/// satisfy `|Mv - mu v| <= 1e-9 |M|_F`.
pub fn eig_dense(m: &DMatrix<Complex64>) -> Result<Vec<EigenPair>> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(OqsError::Domain(format!("matrix is {}x{}, not square", n, m.ncols())));
    }
    if n > MAX_DIM {
        return Err(OqsError::Domain(format!("dimension {n} exceeds {MAX_DIM}")));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(OqsError::Domain("matrix has non-finite entries".into()));
    }
    let mnorm = m.norm();
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 100 * n.max(10))
        .ok_or(OqsError::NoConvergence { what: "complex Schur decomposition", iterations: 100 * n.max(10) })?;
    let (q, t) = schur.unpack();
    let small = f64::EPSILON * t.norm().max(f64::MIN_POSITIVE);

    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mu = t[(k, k)];
        let mut y = DVector::<Complex64>::zeros(n);
        y[k] = Complex64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut s = Complex64::new(0.0, 0.0);
            for j in i + 1..=k {
                s += t[(i, j)] * y[j];
            }
            let mut d = t[(i, i)] - mu;
            if d.norm() < small {
                d = Complex64::new(small, 0.0);
            }
            y[i] = -s / d;
        }
        let mut v = &q * y;
        let nv = v.norm();
        v /= Complex64::new(nv, 0.0);
        let res = (m * &v - &v * mu).norm();
        if !(res <= 1e-9 * mnorm.max(f64::MIN_POSITIVE)) {
            return Err(OqsError::NoConvergence { what: "eigenvector back-substitution", iterations: k });
        }
        out.push((mu, v));
    }
    Ok(out)
}

/// Characteristic polynomial det(zI - M), descending coefficients, by the
/// Faddeev-LeVerrier recursion. Intended for small matrices only.
pub fn char_poly(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    let n = m.nrows();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n + 1];
    coeffs[0] = Complex64::new(1.0, 0.0);
    let mut mk = DMatrix::<Complex64>::zeros(n, n);
    let id = DMatrix::<Complex64>::identity(n, n);
    for k in 1..=n {
        mk = m * &mk + &id * coeffs[k - 1];
        let amk = m * &mk;
        coeffs[k] = -amk.trace() / k as f64;
    }
    coeffs
}

/// Which reduction [`generalized_eig`] used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PencilRoute {
    /// Standard problem for B^-1 A (B well conditioned).
    InverseBA,
    /// Roots of the characteristic polynomial of A^-1 B (small, B singular).
    CharPoly,
    /// Schur form of A^-1 B (large, B singular).
    InverseAB,
}

fn singular_values(m: &DMatrix<Complex64>) -> Vec<f64> {
    m.clone().svd(false, false).singular_values.iter().cloned().collect()
}

fn null_vector(m: &DMatrix<Complex64>) -> DVector<Complex64> {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^H");
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let row = v_t.row(imin);
    DVector::from_iterator(row.len(), row.iter().map(|z| z.conj()))
}

/// Finite eigenpairs of the pencil `A v = lambda B v`.
///
/// Forms B^-1 A when cond(B) < 1e12. Otherwise A must be invertible and the
/// reciprocal problem A^-1 B v = mu v is solved, discarding the
/// `n - rank(B)` eigenvalues mu = 0 that correspond to infinite lambda, and
/// any further mu below `1e-14 max |mu|`.
pub fn generalized_eig(
    a: &DMatrix<Complex64>,
    b: &DMatrix<Complex64>,
) -> Result<(Vec<EigenPair>, PencilRoute)> {
    let n = a.nrows();
    if a.shape() != b.shape() || n != a.ncols() {
        return Err(OqsError::Domain("pencil matrices must be square and of equal size".into()));
    }
    let sv = singular_values(b);
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if smax > 0.0 && smin > 0.0 && smax / smin < 1e12 {
        let x = b.clone().lu().solve(a).ok_or(OqsError::DegenerateCoupling("B is singular".into()))?;
        return Ok((eig_dense(&x)?, PencilRoute::InverseBA));
    }
    let x = a
        .clone()
        .lu()
        .solve(b)
        .ok_or(OqsError::Domain("both pencil matrices are singular".into()))?;
    let rank = sv.iter().filter(|&&s| s > 1e-12 * smax).count();
    let infinite = n - rank;

    let mut mus: Vec<(Complex64, Option<DVector<Complex64>>)> = if n <= 16 {
        let tol = Tolerance { abs_tol: 1e-8, rel_tol: 0.0, max_iter: 500 };
        poly_roots(&char_poly(&x), &tol)?.into_iter().map(|m| (m, None)).collect()
    } else {
        eig_dense(&x)?.into_iter().map(|(m, v)| (m, Some(v))).collect()
    };
    mus.sort_by(|p, q| p.0.norm().total_cmp(&q.0.norm()));
    let route = if n <= 16 { PencilRoute::CharPoly } else { PencilRoute::InverseAB };
    // A defective infinite eigenvalue can leave more zero mu than n - rank(B).
    let mu_max = mus.iter().map(|m| m.0.norm()).fold(0.0, f64::max);
    let out = mus
        .into_iter()
        .skip(infinite)
        .filter(|(mu, _)| mu.norm() > 1e-14 * mu_max)
        .map(|(mu, v)| {
            let lambda = 1.0 / mu;
            let v = v.unwrap_or_else(|| null_vector(&(a - b * lambda)));
            (lambda, v)
        })
        .collect();
    Ok((out, route))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sorted_re(v: &[(Complex64, DVector<Complex64>)]) -> Vec<f64> {
        let mut r: Vec<f64> = v.iter().map(|p| p.0.re).collect();
        r.sort_by(f64::total_cmp);
        r
    }

    #[test]
    fn identity() {
        let e = eig_dense(&DMatrix::identity(3, 3)).unwrap();
        assert!(e.iter().all(|(m, _)| (m - 1.0).norm() < 1e-14));
    }

    #[test]
    fn diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)]));
        let r = sorted_re(&eig_dense(&m).unwrap());
        assert!((r[0] - 1.0).abs() < 1e-14 && (r[1] - 2.0).abs() < 1e-14 && (r[2] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn open_chain_spectrum() {
        let n = 100;
        let m = DMatrix::from_fn(n, n, |i, j| if i.abs_diff(j) == 1 { c(-1.0, 0.0) } else { c(0.0, 0.0) });
        let e = eig_dense(&m).unwrap();
        assert!(e.iter().all(|(mu, _)| mu.im.abs() < 1e-10));
        let got = sorted_re(&e);
        let mut want: Vec<f64> =
            (1..=n).map(|k| -2.0 * (k as f64 * std::f64::consts::PI / (n + 1) as f64).cos()).collect();
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn char_poly_of_companion() {
        // Companion matrix of z^3 - 6z^2 + 11z - 6.
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[c(6.0, 0.0), c(-11.0, 0.0), c(6.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
        );
        let p = char_poly(&m);
        let want = [1.0, -6.0, 11.0, -6.0];
        for (a, b) in p.iter().zip(want) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn pencil_routes_agree() {
        // A v = lambda B v with B = diag(1, 0, 1): two finite eigenvalues.
        let a = DMatrix::from_row_slice(
            3,
            3,
            &[c(2.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(3.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(4.0, 0.0)],
        );
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]));
        let (pairs, route) = generalized_eig(&a, &b).unwrap();
        assert_eq!(route, PencilRoute::CharPoly);
        assert_eq!(pairs.len(), 2);
        for (l, v) in &pairs {
            let r = (&a * v - &b * v * *l).norm();
            assert!(r < 1e-9, "residual {r}");
        }
        let mut b2 = b.clone();
        b2[(1, 1)] = c(1.0, 0.0);
        let (pairs2, route2) = generalized_eig(&a, &b2).unwrap();
        assert_eq!(route2, PencilRoute::InverseBA);
        assert_eq!(pairs2.len(), 3);
    }
}
