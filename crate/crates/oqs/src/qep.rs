//! Quadratic eigenvalue problem `[Theta lambda^2 + H lambda + I] psi = 0`
//! for an open lattice, solved through the symmetric linearization
//!
//! `A = [[0, I], [I, H]]`, `B = [[I, 0], [0, -Theta]]`, `A Psi = lambda B Psi`
//!
//! with Psi = (psi, lambda psi). Both matrices are symmetric, so left
//! eigenvectors are plain transposes of right ones and the states are
//! normalized by `Psi^T B Psi = psi^T psi - lambda^2 psi^T Theta psi = 1`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::continuum::{ContinuumModel, Parity, PoleKind};
use crate::error::{OqsError, Result};
use crate::feshbach::{discretize_continuum, OpenLattice};
use crate::lattice::{classify_lattice, lattice_dispersion};
use crate::numerics::{eig_dense, generalized_eig, Complex64};

const THETA_COND_MAX: f64 = 1e10;
const GAP_MIN: f64 = 1e-8;
const RESIDUAL_MAX: f64 = 1e-9;

fn c0() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

#[derive(Debug, Clone)]
pub struct Pencil {
    pub a: DMatrix<Complex64>,
    pub b: DMatrix<Complex64>,
}

impl Pencil {
    pub fn new(model: &OpenLattice) -> Result<Pencil> {
        model.validate()?;
        let n = model.n_sites;
        let h = model.h_matrix();
        let th = model.theta();
        let mut a = DMatrix::from_element(2 * n, 2 * n, c0());
        let mut b = DMatrix::from_element(2 * n, 2 * n, c0());
        for i in 0..n {
            a[(i, n + i)] = Complex64::new(1.0, 0.0);
            a[(n + i, i)] = Complex64::new(1.0, 0.0);
            b[(i, i)] = Complex64::new(1.0, 0.0);
            b[(n + i, n + i)] = Complex64::new(-th[i], 0.0);
            for j in 0..n {
                a[(n + i, n + j)] = Complex64::new(h[(i, j)], 0.0);
            }
        }
        Ok(Pencil { a, b })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QepPair {
    pub lambda: Complex64,
    pub psi: Vec<Complex64>,
    pub k: Complex64,
    pub e: Complex64,
    pub kind: PoleKind,
    pub parity: Parity,
}

impl QepPair {
    pub fn psi_vec(&self) -> DVector<Complex64> {
        DVector::from_column_slice(&self.psi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QepSpectrum {
    pub model: OpenLattice,
    pub pairs: Vec<QepPair>,
}

impl QepSpectrum {
    /// Largest `|(Theta lambda^2 + H lambda + I) psi|` over the pairs.
    pub fn max_residual(&self) -> f64 {
        let h = self.model.h_matrix().map(|x| Complex64::new(x, 0.0));
        let th = self.model.theta();
        self.pairs.iter().map(|p| qep_residual(&h, &th, p.lambda, &p.psi_vec())).fold(0.0, f64::max)
    }
}

fn qep_residual(h: &DMatrix<Complex64>, th: &DVector<f64>, l: Complex64, psi: &DVector<Complex64>) -> f64 {
    let mut r = h * psi * l + psi;
    for i in 0..psi.len() {
        r[i] += th[i] * l * l * psi[i];
    }
    r.norm()
}

fn reflection_symmetric(model: &OpenLattice) -> bool {
    let n = model.n_sites;
    let th = model.theta();
    (0..n).all(|i| {
        (th[i] - th[n - 1 - i]).abs() < 1e-12
            && (0..n).all(|j| (model.h_sys[i][j] - model.h_sys[n - 1 - i][n - 1 - j]).abs() < 1e-12)
    })
}

fn detect_parity(psi: &DVector<Complex64>) -> Parity {
    let n = psi.len();
    let scale = psi.norm().max(f64::MIN_POSITIVE);
    let even = (0..n).map(|i| (psi[i] - psi[n - 1 - i]).norm()).fold(0.0, f64::max);
    let odd = (0..n).map(|i| (psi[i] + psi[n - 1 - i]).norm()).fold(0.0, f64::max);
    if even < 1e-8 * scale {
        Parity::Even
    } else if odd < 1e-8 * scale {
        Parity::Odd
    } else {
        Parity::None
    }
}

fn parity_rank(p: Parity) -> u8 {
    match p {
        Parity::Even => 0,
        Parity::Odd => 1,
        Parity::None => 2,
    }
}

/// Scale psi so that `psi^T psi - lambda^2 psi^T Theta psi = 1` and the
/// largest component has argument in (-pi/2, pi/2].
fn normalize(psi: &mut DVector<Complex64>, l: Complex64, th: &DVector<f64>) -> Result<()> {
    let mut nrm = c0();
    for i in 0..psi.len() {
        nrm += psi[i] * psi[i] * (1.0 - l * l * th[i]);
    }
    if nrm.norm() < 1e-12 * psi.norm_squared() {
        return Err(OqsError::DegenerateSpectrum(format!("{l}"), "its self-orthogonal partner".into()));
    }
    *psi /= nrm.sqrt();
    let mut big = 0;
    for i in 0..psi.len() {
        if psi[i].norm() > psi[big].norm() * (1.0 + 1e-12) {
            big = i;
        }
    }
    let arg = psi[big].arg();
    if arg <= -FRAC_PI_2 || arg > FRAC_PI_2 {
        *psi = -psi.clone();
    }
    Ok(())
}

/// All 2N eigenpairs, normalized and sorted by parity (even, odd, none),
/// then by decreasing Im lambda and Re lambda.
pub fn qep_solve(model: &OpenLattice) -> Result<QepSpectrum> {
    model.validate()?;
    let n = model.n_sites;
    let th = model.theta();
    let tmax = th.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let tmin = th.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    if !(tmin > 0.0) || tmax / tmin >= THETA_COND_MAX {
        return Err(OqsError::DegenerateCoupling(format!(
            "Theta is singular or ill conditioned (|theta| from {tmin:e} to {tmax:e})"
        )));
    }
    let h = model.h_matrix();
    // B^-1 A = [[0, I], [-Theta^-1, -Theta^-1 H]].
    let mut m = DMatrix::from_element(2 * n, 2 * n, c0());
    for i in 0..n {
        m[(i, n + i)] = Complex64::new(1.0, 0.0);
        m[(n + i, i)] = Complex64::new(-1.0 / th[i], 0.0);
        for j in 0..n {
            m[(n + i, n + j)] = Complex64::new(-h[(i, j)] / th[i], 0.0);
        }
    }
    let eig = eig_dense(&m)?;
    for i in 0..eig.len() {
        for j in i + 1..eig.len() {
            if (eig[i].0 - eig[j].0).norm() < GAP_MIN {
                return Err(OqsError::DegenerateSpectrum(format!("{}", eig[i].0), format!("{}", eig[j].0)));
            }
        }
    }
    let symmetric = reflection_symmetric(model);
    let hc = h.map(|x| Complex64::new(x, 0.0));
    let mut pairs = Vec::with_capacity(2 * n);
    for (l, v) in eig {
        let top = v.rows(0, n).into_owned();
        let bottom = v.rows(n, n).into_owned();
        // The upper half can be tiny when |lambda| is large; use the better one.
        let mut psi = if top.norm() >= bottom.norm() / l.norm().max(1.0) { top } else { bottom / l };
        normalize(&mut psi, l, &th)?;
        let res = qep_residual(&hc, &th, l, &psi);
        let scale = 1.0 + l.norm_sqr() * tmax + l.norm() * h.norm();
        if !(res <= RESIDUAL_MAX * scale) {
            return Err(OqsError::NoConvergence { what: "quadratic eigenpair residual", iterations: 0 });
        }
        let parity = if symmetric { detect_parity(&psi) } else { Parity::None };
        let (k, e) = lattice_dispersion(l, model.w, model.a)?;
        pairs.push(QepPair { lambda: l, psi: psi.iter().cloned().collect(), k, e, kind: classify_lattice(l), parity });
    }
    pairs.sort_by(|p, q| {
        parity_rank(p.parity)
            .cmp(&parity_rank(q.parity))
            .then(q.lambda.im.total_cmp(&p.lambda.im))
            .then(q.lambda.re.total_cmp(&p.lambda.re))
    });
    Ok(QepSpectrum { model: model.clone(), pairs })
}

/// Finite eigenvalues of the pencil when Theta may be singular (sites with
/// W1 = W).
///
/// At most 2N - (number of zero Theta entries) values are returned. When the
/// polynomial degree drops further (a reflectionless block such as a bare
/// chain), the excess infinite eigenvalues form a defective cluster that
/// rounding scatters to large finite |lambda|; candidates at which
/// `Theta lambda^2 + H lambda + I` is not numerically singular are discarded.
pub fn qep_finite_eigenvalues(model: &OpenLattice) -> Result<Vec<Complex64>> {
    let p = Pencil::new(model)?;
    let (pairs, _) = generalized_eig(&p.a, &p.b)?;
    let h = model.h_matrix().map(|x| Complex64::new(x, 0.0));
    let th = model.theta();
    let (hn, tn) = (h.norm(), th.norm());
    let n = model.n_sites;
    let keep = |l: Complex64| {
        let mut q = &h * l + DMatrix::identity(n, n);
        for i in 0..n {
            q[(i, i)] += th[i] * l * l;
        }
        let smin = q.singular_values().iter().cloned().fold(f64::INFINITY, f64::min);
        smin <= 1e-8 * (1.0 + l.norm() * hn + l.norm_sqr() * tn)
    };
    Ok(pairs.into_iter().map(|(l, _)| l).filter(|&l| l.re.is_finite() && l.im.is_finite() && keep(l)).collect())
}

/// `|sum_n psi_n psi_n^T - I|_F` (plain transpose).
pub fn completeness_check(spec: &QepSpectrum) -> f64 {
    let n = spec.model.n_sites;
    let mut s = DMatrix::<Complex64>::identity(n, n) * Complex64::new(-1.0, 0.0);
    for p in &spec.pairs {
        let v = p.psi_vec();
        s += &v * v.transpose();
    }
    s.norm()
}

/// Maximal deviations of `Psi_m^T A Psi_n` from `lambda_n delta_mn` and of
/// `Psi_m^T B Psi_n` from `delta_mn`. With `conjugate` the left vectors are
/// conjugated, which is not the correct pairing for this pencil.
pub(crate) fn bilinear_deviation(spec: &QepSpectrum, conjugate: bool) -> (f64, f64) {
    let h = spec.model.h_matrix().map(|x| Complex64::new(x, 0.0));
    let th = spec.model.theta();
    let left = |p: &QepPair| -> (DVector<Complex64>, Complex64) {
        if conjugate {
            (p.psi_vec().conjugate(), p.lambda.conj())
        } else {
            (p.psi_vec(), p.lambda)
        }
    };
    let (mut da, mut db) = (0.0f64, 0.0f64);
    for pm in &spec.pairs {
        let (um, lm) = left(pm);
        for pn in &spec.pairs {
            let vn = pn.psi_vec();
            let ln = pn.lambda;
            let uv = um.dot(&vn);
            let uthv: Complex64 = (0..vn.len()).map(|i| um[i] * th[i] * vn[i]).sum();
            let uhv = um.dot(&(&h * &vn));
            let bval = uv - lm * ln * uthv;
            let aval = (ln + lm) * uv + lm * ln * uhv;
            let same = std::ptr::eq(pm, pn);
            let (ea, eb) = if same { (aval - ln, bval - 1.0) } else { (aval, bval) };
            da = da.max(ea.norm());
            db = db.max(eb.norm());
        }
    }
    (da, db)
}

/// Largest deviation from biorthonormality, the maximum over the A and B
/// bilinear forms.
pub fn orthogonality_check(spec: &QepSpectrum) -> f64 {
    let (a, b) = bilinear_deviation(spec, false);
    a.max(b)
}

/// `(1/W) sum_n psi_n psi_n^T / (1/lambda_n - 1/lambda)`, which equals
/// `(E - H_eff)^-1` at E = -W (lambda + 1/lambda).
pub fn resolvent_expansion(spec: &QepSpectrum, lambda: Complex64) -> Result<DMatrix<Complex64>> {
    if lambda.norm() == 0.0 {
        return Err(OqsError::Domain("resolvent undefined at lambda = 0".into()));
    }
    let n = spec.model.n_sites;
    let mut g = DMatrix::from_element(n, n, c0());
    for p in &spec.pairs {
        if (p.lambda - lambda).norm() < 1e-10 {
            return Err(OqsError::PoleHit(format!("{lambda}")));
        }
        let v = p.psi_vec();
        g += &v * v.transpose() / (1.0 / p.lambda - 1.0 / lambda);
    }
    Ok(g / Complex64::new(spec.model.w, 0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitRow {
    pub a: f64,
    pub k: Complex64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuumLimit {
    pub target: Complex64,
    pub rows: Vec<LimitRow>,
    /// Least-squares slope of log(error) against log(a).
    pub order: f64,
}

/// Discretize `model` at each spacing and follow the lattice pole nearest
/// to the continuum pole `target`.
pub fn continuum_limit(model: &ContinuumModel, target: Complex64, spacings: &[f64]) -> Result<ContinuumLimit> {
    if spacings.len() < 2 {
        return Err(OqsError::InvalidInput("need at least two grid spacings".into()));
    }
    let mut rows = Vec::with_capacity(spacings.len());
    for &a in spacings {
        let lattice = discretize_continuum(model, a)?;
        let lambdas = qep_finite_eigenvalues(&lattice)?;
        let best = lambdas
            .iter()
            .filter(|l| l.norm() > 0.0)
            .map(|&l| lattice_dispersion(l, lattice.w, a).map(|(k, _)| k))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .min_by(|x, y| (x - target).norm().total_cmp(&(y - target).norm()))
            .ok_or(OqsError::EmptyBox)?;
        rows.push(LimitRow { a, k: best, error: (best - target).norm() });
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.a.ln(), r.error.max(f64::MIN_POSITIVE).ln())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(ContinuumLimit { target, rows, order: sxy / sxx })
}
