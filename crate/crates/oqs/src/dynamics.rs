//! Survival dynamics of a state prepared on the system sites.
//!
//! The amplitude `<psi0| e^{-iHt} |psi0>` splits into one term per QEP
//! eigenpair,
//!
//! `c_n(t) = w_n/(pi i) [ int_{-pi}^{pi} e^{2iWt cos u} sin u / (e^{-iu} - 1/lambda_n) du + b_n(t) ]`
//!
//! with the weight `w_n = (psi0^H psi_n)(psi_n^T psi0)` and the bound-state
//! residue `b_n = -i pi (lambda_n^2 - 1) e^{-i E_n t}` for |lambda_n| < 1.
//! hbar = 1; times are in units of 1/W when W = 1.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuum::{Pole, PoleKind};
use crate::error::{OqsError, Result};
use crate::feshbach::OpenLattice;
use crate::numerics::{bessel_j1, bessel_j_sequence, quad_adaptive_panels, Complex64, Tolerance};
use crate::qep::{QepPair, QepSpectrum};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Weights below this are treated as exact zeros (symmetry-forbidden).
const WEIGHT_FLOOR: f64 = 1e-14;

/// Largest |t| accepted by the pole expansions.
pub const T_MAX: f64 = 1e4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub vector: Vec<Complex64>,
}

impl InitialState {
    /// Normalizes `v`; fails for a zero or non-finite vector.
    pub fn new(v: Vec<Complex64>) -> Result<Self> {
        let n: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(OqsError::InvalidInput("initial state must be nonzero and finite".into()));
        }
        Ok(InitialState { vector: v.into_iter().map(|z| z / n).collect() })
    }

    pub fn real(v: &[f64]) -> Result<Self> {
        Self::new(v.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    fn as_vec(&self) -> DVector<Complex64> {
        DVector::from_column_slice(&self.vector)
    }
}

/// `(psi0^H psi_n)(psi_n^T psi0)`; equals `(psi0^T psi_n)^2` for real psi0.
pub fn pole_weight(pair: &QepPair, psi0: &InitialState) -> Result<Complex64> {
    if psi0.vector.len() != pair.psi.len() {
        return Err(OqsError::InvalidInput(format!(
            "initial state has {} components, system has {}",
            psi0.vector.len(),
            pair.psi.len()
        )));
    }
    let p = pair.psi_vec();
    let v = psi0.as_vec();
    Ok(v.dotc(&p) * p.dot(&v))
}

fn check_time(t: f64) -> Result<()> {
    if !t.is_finite() || t.abs() > T_MAX {
        return Err(OqsError::Domain(format!("|t| must not exceed {T_MAX}, got {t}")));
    }
    Ok(())
}

fn check_off_circle(pair: &QepPair) -> Result<()> {
    if (pair.lambda.norm() - 1.0).abs() < 1e-12 {
        return Err(OqsError::Domain(format!("lambda = {} lies on the unit circle", pair.lambda)));
    }
    Ok(())
}

/// k-integral representation of every c_n at time t, in the order of
/// `spec.pairs`. Poles whose weight vanishes contribute exactly zero.
pub fn survival_k_integral(spec: &QepSpectrum, psi0: &InitialState, t: f64, tol: &Tolerance) -> Result<Vec<Complex64>> {
    check_time(t)?;
    let w = spec.model.w;
    let panels = (2.0 * w * t.abs()).ceil().max(16.0) as usize;
    spec.pairs
        .iter()
        .map(|pair| {
            let wt = pole_weight(pair, psi0)?;
            if wt.norm() < WEIGHT_FLOOR {
                return Ok(Complex64::new(0.0, 0.0));
            }
            check_off_circle(pair)?;
            let inv = 1.0 / pair.lambda;
            let f = |u: f64| (I * 2.0 * w * t * u.cos()).exp() * u.sin() / ((-I * u).exp() - inv);
            let mut bracket = quad_adaptive_panels(f, -PI, PI, panels, tol)?;
            if pair.lambda.norm() < 1.0 {
                bracket += -I * PI * (pair.lambda * pair.lambda - 1.0) * (-I * pair.e * t).exp();
            }
            Ok(wt * bracket / (PI * I))
        })
        .collect()
}

/// Bessel-kernel representation
/// `c_n = w_n [ e^{-iE_n t} - i lambda_n int_0^t e^{-iE_n (t - s)} J_1(2Ws)/s ds ]`
/// (W = 1 scaling applied through Wt). Bound poles are rejected.
pub fn survival_bessel(spec: &QepSpectrum, psi0: &InitialState, t: f64, tol: &Tolerance) -> Result<Vec<Complex64>> {
    check_time(t)?;
    let w = spec.model.w;
    let tau = w * t;
    spec.pairs
        .iter()
        .map(|pair| {
            let wt = pole_weight(pair, psi0)?;
            if wt.norm() < WEIGHT_FLOOR {
                return Ok(Complex64::new(0.0, 0.0));
            }
            if pair.kind == PoleKind::Bound {
                return Err(OqsError::WrongKind { expected: "non-bound", found: pair.kind.to_string() });
            }
            check_off_circle(pair)?;
            let eps = pair.e / w;
            let free = (-I * eps * tau).exp();
            if tau == 0.0 {
                return Ok(wt * free);
            }
            let (lo, hi, sign) = if tau > 0.0 { (0.0, tau, 1.0) } else { (tau, 0.0, -1.0) };
            let f = |s: f64| (-I * eps * (tau - s)).exp() * (bessel_j1(2.0 * s).unwrap_or(f64::NAN) / s);
            let panels = (2.0 * tau.abs()).ceil().max(4.0) as usize;
            let integral = quad_adaptive_panels(f, lo, hi, panels, tol)? * sign;
            Ok(wt * (free - I * pair.lambda * integral))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Representation {
    KIntegral,
    Bessel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalSeries {
    pub times: Vec<f64>,
    pub lambdas: Vec<Complex64>,
    /// `c_n[pole][time]`.
    pub c_n: Vec<Vec<Complex64>>,
    pub total: Vec<Complex64>,
    pub p_surv: Vec<f64>,
    pub p_oracle: Option<Vec<f64>>,
}

/// Pole amplitudes on a time grid, evaluated in parallel.
pub fn survival_series(
    spec: &QepSpectrum,
    psi0: &InitialState,
    times: &[f64],
    rep: Representation,
    tol: &Tolerance,
) -> Result<SurvivalSeries> {
    let rows: Vec<Vec<Complex64>> = times
        .par_iter()
        .map(|&t| match rep {
            Representation::KIntegral => survival_k_integral(spec, psi0, t, tol),
            Representation::Bessel => survival_bessel(spec, psi0, t, tol),
        })
        .collect::<Result<_>>()?;
    let npoles = spec.pairs.len();
    let c_n: Vec<Vec<Complex64>> = (0..npoles).map(|n| rows.iter().map(|r| r[n]).collect()).collect();
    let total: Vec<Complex64> = rows.iter().map(|r| r.iter().sum()).collect();
    let p_surv = total.iter().map(|z| z.norm_sqr()).collect();
    Ok(SurvivalSeries {
        times: times.to_vec(),
        lambdas: spec.pairs.iter().map(|p| p.lambda).collect(),
        c_n,
        total,
        p_surv,
        p_oracle: None,
    })
}

/// Sparse real symmetric Hamiltonian of the system plus `m` sites per lead.
struct Chain {
    rows: Vec<Vec<(usize, f64)>>,
}

impl Chain {
    fn build(model: &OpenLattice, m: usize) -> Result<Chain> {
        model.validate()?;
        let n = model.n_sites;
        let size = n + m * model.leads.len();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); size];
        for (i, row) in rows.iter_mut().enumerate().take(n) {
            for j in 0..n {
                let v = model.w * model.h_sys[i][j];
                if v != 0.0 {
                    row.push((j, v));
                }
            }
        }
        for (k, lead) in model.leads.iter().enumerate() {
            let first = n + k * m;
            rows[lead.site].push((first, -lead.w1));
            rows[first].push((lead.site, -lead.w1));
            for s in first..first + m - 1 {
                rows[s].push((s + 1, -model.w));
                rows[s + 1].push((s, -model.w));
            }
        }
        Ok(Chain { rows })
    }

    fn len(&self) -> usize {
        self.rows.len()
    }

    fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        for (o, row) in out.iter_mut().zip(&self.rows) {
            *o = row.iter().map(|&(j, v)| x[j] * v).sum();
        }
    }

    fn gershgorin(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (i, row) in self.rows.iter().enumerate() {
            let d: f64 = row.iter().filter(|e| e.0 == i).map(|e| e.1).sum();
            let off: f64 = row.iter().filter(|e| e.0 != i).map(|e| e.1.abs()).sum();
            lo = lo.min(d - off);
            hi = hi.max(d + off);
        }
        (lo, hi)
    }

    fn dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut h = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                h[(i, j)] += v;
            }
        }
        h
    }
}

fn padded(psi0: &InitialState, size: usize, n: usize) -> Result<Vec<Complex64>> {
    if psi0.vector.len() != n {
        return Err(OqsError::InvalidInput(format!("initial state has {} components, system has {n}", psi0.vector.len())));
    }
    let mut v = vec![Complex64::new(0.0, 0.0); size];
    v[..n].copy_from_slice(&psi0.vector);
    Ok(v)
}

fn check_light_cone(model: &OpenLattice, times: &[f64], m: usize) -> Result<()> {
    let tmax = times.iter().fold(0.0f64, |a, t| a.max(t.abs()));
    if !tmax.is_finite() {
        return Err(OqsError::Domain("time grid is not finite".into()));
    }
    // Maximal group velocity is 2W lattice sites per unit time.
    let reach = 2.0 * model.w * tmax;
    if model.leads.is_empty() {
        return Ok(());
    }
    if reach >= m as f64 - 2.0 {
        return Err(OqsError::LightConeViolation { required: reach.ceil() as usize + 3, available: m });
    }
    Ok(())
}

fn dot_conj(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `|<psi0| e^{-iHt} |psi0>|^2` on the closed chain with `m` sites per lead,
/// by Chebyshev expansion of the propagator. Moments are computed once
/// and shared by all times.
pub fn oracle_survival(model: &OpenLattice, psi0: &InitialState, times: &[f64], m: usize) -> Result<Vec<f64>> {
    Ok(oracle_amplitude(model, psi0, times, m)?.into_iter().map(|z| z.norm_sqr()).collect())
}

/// Survival amplitudes behind [`oracle_survival`].
pub fn oracle_amplitude(model: &OpenLattice, psi0: &InitialState, times: &[f64], m: usize) -> Result<Vec<Complex64>> {
    check_light_cone(model, times, m)?;
    let chain = Chain::build(model, m)?;
    let size = chain.len();
    let (lo, hi) = chain.gershgorin();
    let center = 0.5 * (hi + lo);
    let radius = 0.5 * (hi - lo) * 1.01 + 1e-12;
    let tmax = times.iter().fold(0.0f64, |a, t| a.max(t.abs()));
    let x = radius * tmax;
    let order = (x + 20.0 * x.cbrt() + 40.0).ceil() as usize;

    // phi_k = T_k(Hs) psi0 with Hs = (H - center)/radius.
    let v0 = padded(psi0, size, model.n_sites)?;
    let scaled = |src: &[Complex64], out: &mut [Complex64]| {
        chain.apply(src, out);
        for (o, s) in out.iter_mut().zip(src) {
            *o = (*o - *s * center) / radius;
        }
    };
    let half = order / 2 + 1;
    let mut mu = vec![Complex64::new(0.0, 0.0); 2 * half + 2];
    let mut prev = v0.clone();
    let mut cur = vec![Complex64::new(0.0, 0.0); size];
    scaled(&prev, &mut cur);
    mu[0] = dot_conj(&v0, &v0);
    mu[1] = dot_conj(&v0, &cur);
    let mut next = vec![Complex64::new(0.0, 0.0); size];
    // prev = phi_{k-1}, cur = phi_k.
    for k in 1..=half {
        mu[2 * k] = dot_conj(&cur, &cur) * 2.0 - mu[0];
        scaled(&cur, &mut next);
        for (nx, p) in next.iter_mut().zip(&prev) {
            *nx = *nx * 2.0 - p;
        }
        mu[2 * k + 1] = dot_conj(&next, &cur) * 2.0 - mu[1];
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    let kmax = order.min(mu.len() - 1);
    times
        .par_iter()
        .map(|&t| {
            let j = bessel_j_sequence(kmax, radius * t)?;
            let mut s = Complex64::new(0.0, 0.0);
            let mut phase = Complex64::new(1.0, 0.0);
            for k in 0..=kmax {
                let f = if k == 0 { 1.0 } else { 2.0 };
                s += phase * mu[k] * (f * j[k]);
                phase *= -I;
            }
            Ok((-I * center * t).exp() * s)
        })
        .collect()
}

/// As [`oracle_survival`], by dense diagonalization. Intended for small
/// chains and for cross-checking the Chebyshev route.
pub fn oracle_survival_dense(model: &OpenLattice, psi0: &InitialState, times: &[f64], m: usize) -> Result<Vec<f64>> {
    check_light_cone(model, times, m)?;
    let chain = Chain::build(model, m)?;
    if chain.len() > 4096 {
        return Err(OqsError::InvalidInput(format!("dense oracle limited to 4096 sites, got {}", chain.len())));
    }
    let eig = SymmetricEigen::new(chain.dense());
    let v0 = padded(psi0, chain.len(), model.n_sites)?;
    let weights: Vec<f64> = (0..chain.len())
        .map(|k| {
            let col = eig.eigenvectors.column(k);
            v0.iter().zip(col.iter()).map(|(a, &b)| a.conj() * b).sum::<Complex64>().norm_sqr()
        })
        .collect();
    Ok(times
        .iter()
        .map(|&t| {
            let a: Complex64 =
                weights.iter().zip(eig.eigenvalues.iter()).map(|(&w, &e)| (-I * e * t).exp() * w).sum();
            a.norm_sqr()
        })
        .collect())
}

/// Energy variance of psi0 on the full chain, the coefficient gamma^2 in
/// `P(t) = 1 - gamma^2 t^2 + O(t^4)`.
pub fn short_time_expansion(model: &OpenLattice, psi0: &InitialState) -> Result<f64> {
    let chain = Chain::build(model, 3)?;
    let v = padded(psi0, chain.len(), model.n_sites)?;
    let mut hv = vec![Complex64::new(0.0, 0.0); chain.len()];
    chain.apply(&v, &mut hv);
    let mean = dot_conj(&v, &hv).re;
    let second = dot_conj(&hv, &hv).re;
    Ok(second - mean * mean)
}

/// `(2Ka - pi)/E` of a resonant pole; the bracket of the short-time
/// approximation has its dip at t = -Re of this value.
pub fn t_zero_estimate(pole: &Pole, a: f64) -> Result<Complex64> {
    if pole.kind != PoleKind::Resonant {
        return Err(OqsError::WrongKind { expected: "resonant", found: pole.kind.to_string() });
    }
    if pole.e.norm() == 0.0 {
        return Err(OqsError::Domain("pole energy vanishes".into()));
    }
    Ok((2.0 * pole.k * a - PI) / pole.e)
}

/// Short-time bracket `1 - (W lambda/E)(e^{iEt} - 1)`, obtained from the
/// Bessel form with J_1(2Wt)/t replaced by its t = 0 value W.
pub fn short_time_bracket(lambda: Complex64, e: Complex64, w: f64, t: f64) -> Complex64 {
    1.0 - w * lambda / e * ((I * e * t).exp() - 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub slope: f64,
    pub intercept: f64,
    /// Quadratic coefficient of log P against log t, times (half range)^2.
    pub curvature: f64,
    pub peaks: usize,
}

/// Power-law fit `P ~ t^slope` to the local maxima of `p` inside `window`.
pub fn long_time_tail(times: &[f64], p: &[f64], window: (f64, f64), min_peaks: usize) -> Result<TailFit> {
    if times.len() != p.len() {
        return Err(OqsError::InvalidInput("times and values differ in length".into()));
    }
    if !(window.0 > 0.0) || !(window.1 > window.0) {
        return Err(OqsError::InvalidInput(format!("bad window {window:?}")));
    }
    let mut pts = Vec::new();
    for i in 1..p.len().saturating_sub(1) {
        let t = times[i];
        if t >= window.0 && t <= window.1 && p[i] > p[i - 1] && p[i] >= p[i + 1] && p[i] > 0.0 {
            pts.push((t.ln(), p[i].ln()));
        }
    }
    let required = min_peaks.max(5);
    if pts.len() < required {
        return Err(OqsError::TooFewPeaks { found: pts.len(), required });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|q| q.0).sum::<f64>() / n;
    let my = pts.iter().map(|q| q.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|q| (q.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|q| (q.0 - mx) * (q.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;

    // Quadratic least squares in the centred variable.
    let x: Vec<f64> = pts.iter().map(|q| q.0 - mx).collect();
    let a = DMatrix::from_fn(pts.len(), 3, |i, j| x[i].powi(j as i32));
    let b = DVector::from_iterator(pts.len(), pts.iter().map(|q| q.1));
    let coef = (a.transpose() * &a)
        .lu()
        .solve(&(a.transpose() * b))
        .ok_or(OqsError::NotPowerLaw { curvature: f64::NAN })?;
    let half_range = 0.5 * (pts.last().unwrap().0 - pts[0].0);
    let curvature = coef[2] * half_range * half_range;
    if curvature.abs() > 0.05 {
        return Err(OqsError::NotPowerLaw { curvature });
    }
    Ok(TailFit { slope, intercept, curvature, peaks: pts.len() })
}

/// Ratio of the running maxima of |c1|^2 and |c2|^2 over windows of width
/// `width` centred on each sample, which removes the common oscillation
/// whose zeros would make a pointwise ratio meaningless.
pub fn envelope_ratio(times: &[f64], c1: &[Complex64], c2: &[Complex64], width: f64) -> Result<Vec<(f64, f64)>> {
    if times.len() != c1.len() || times.len() != c2.len() {
        return Err(OqsError::InvalidInput("series differ in length".into()));
    }
    if !(width > 0.0) {
        return Err(OqsError::InvalidInput("window width must be positive".into()));
    }
    let mut out = Vec::with_capacity(times.len());
    let mut lo = 0;
    let mut hi = 0;
    for (i, &t) in times.iter().enumerate() {
        while times[lo] < t - 0.5 * width {
            lo += 1;
        }
        while hi + 1 < times.len() && times[hi + 1] <= t + 0.5 * width {
            hi += 1;
        }
        let m1 = c1[lo..=hi.max(i)].iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
        let m2 = c2[lo..=hi.max(i)].iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
        out.push((t, m1 / m2));
    }
    Ok(out)
}

/// Memory kernel `int sin^2(ka) e^{-iE(k)t} dk = (pi/(W a)) J_1(2Wt)/t`.
pub fn memory_kernel(t: f64, w: f64, a: f64) -> Result<f64> {
    if t == 0.0 {
        return Err(OqsError::Domain("memory kernel at t = 0; use memory_kernel_at_zero".into()));
    }
    if !(w > 0.0) || !(a > 0.0) {
        return Err(OqsError::InvalidInput("W and a must be positive".into()));
    }
    Ok(PI / (w * a) * bessel_j1(2.0 * w * t)? / t)
}

/// Limit of [`memory_kernel`] as t -> 0.
pub fn memory_kernel_at_zero(a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(OqsError::InvalidInput("a must be positive".into()));
    }
    Ok(PI / a)
}

/// Probability of finding the initial state in each of `n` equally spaced
/// measurements over total time T: `(1 - gamma^2 T^2 / n^2)^n`.
pub fn zeno_product(gamma2: f64, t: f64, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(OqsError::Domain("at least one measurement is needed".into()));
    }
    let nf = n as f64;
    let base = 1.0 - gamma2 * t * t / (nf * nf);
    if !(base >= 0.0) {
        return Err(OqsError::Domain(format!("1 - gamma^2 T^2 / N^2 = {base} is negative")));
    }
    if base == 0.0 {
        return Ok(0.0);
    }
    Ok((nf * base.ln()).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::DimerModel;
    use crate::numerics::quad_adaptive;
    use crate::qep::qep_solve;

    fn table1() -> OpenLattice {
        OpenLattice::dimer(&DimerModel::new(0.0, 0.5).unwrap())
    }

    fn even_state() -> InitialState {
        InitialState::real(&[1.0, 1.0]).unwrap()
    }

    fn tol() -> Tolerance {
        Tolerance { abs_tol: 1e-12, rel_tol: 1e-12, max_iter: 20_000 }
    }

    #[test]
    fn only_even_poles_contribute() {
        let s = qep_solve(&table1()).unwrap();
        let c = survival_k_integral(&s, &even_state(), 1.3, &tol()).unwrap();
        assert_eq!(c[2], Complex64::new(0.0, 0.0));
        assert_eq!(c[3], Complex64::new(0.0, 0.0));
        assert!(c[0].norm() > 0.1 && c[1].norm() > 0.01);
    }

    #[test]
    fn completeness_at_time_zero() {
        let s = qep_solve(&table1()).unwrap();
        let c = survival_k_integral(&s, &even_state(), 0.0, &tol()).unwrap();
        let total: Complex64 = c.iter().sum();
        assert!((total.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn representations_agree() {
        let s = qep_solve(&table1()).unwrap();
        for t in [-7.5, -2.0, 0.0, 0.3, 4.0, 10.0] {
            let k = survival_k_integral(&s, &even_state(), t, &tol()).unwrap();
            let b = survival_bessel(&s, &even_state(), t, &tol()).unwrap();
            for (x, y) in k.iter().zip(&b) {
                assert!((x - y).norm() < 1e-9, "t = {t}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn bessel_rejects_bound_poles() {
        let s = qep_solve(&OpenLattice::dimer(&DimerModel::new(-3.0, 0.5).unwrap())).unwrap();
        let e = survival_bessel(&s, &even_state(), 1.0, &tol()).unwrap_err();
        assert!(matches!(e, OqsError::WrongKind { .. }));
    }

    #[test]
    fn chebyshev_matches_dense() {
        let model = table1();
        let times: Vec<f64> = (0..21).map(|i| -10.0 + i as f64).collect();
        let a = oracle_survival(&model, &even_state(), &times, 60).unwrap();
        let b = oracle_survival_dense(&model, &even_state(), &times, 60).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
        assert!((a[10] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn light_cone_enforced() {
        let e = oracle_survival(&table1(), &even_state(), &[30.0], 50).unwrap_err();
        assert!(matches!(e, OqsError::LightConeViolation { .. }));
    }

    #[test]
    fn pole_sum_matches_oracle() {
        let model = table1();
        let s = qep_solve(&model).unwrap();
        let times = [-6.0, -1.5, 0.7, 3.0, 8.0];
        let oracle = oracle_survival(&model, &even_state(), &times, 200).unwrap();
        for (&t, o) in times.iter().zip(&oracle) {
            let c = survival_k_integral(&s, &even_state(), t, &tol()).unwrap();
            let p = c.iter().sum::<Complex64>().norm_sqr();
            assert!((p - o).abs() < 1e-9, "t = {t}: {p} vs {o}");
        }
    }

    #[test]
    fn bound_state_residue_required() {
        let model = OpenLattice::dimer(&DimerModel::new(-3.0, 0.5).unwrap());
        let s = qep_solve(&model).unwrap();
        assert!(s.pairs.iter().any(|p| p.kind == PoleKind::Bound));
        let psi0 = even_state();
        let times = [0.5, 2.0, 6.0];
        let oracle = oracle_survival(&model, &psi0, &times, 200).unwrap();
        for (&t, o) in times.iter().zip(&oracle) {
            let c = survival_k_integral(&s, &psi0, t, &tol()).unwrap();
            let p = c.iter().sum::<Complex64>().norm_sqr();
            assert!((p - o).abs() < 1e-9, "t = {t}: {p} vs {o}");
            // Without the residue the sum is visibly wrong.
            let mut bare = Complex64::new(0.0, 0.0);
            for (pair, cn) in s.pairs.iter().zip(&c) {
                if pair.kind == PoleKind::Bound {
                    let wt = pole_weight(pair, &psi0).unwrap();
                    let b = -I * PI * (pair.lambda * pair.lambda - 1.0) * (-I * pair.e * t).exp();
                    bare += cn - wt * b / (PI * I);
                } else {
                    bare += cn;
                }
            }
            assert!((bare.norm_sqr() - o).abs() > 1e-3);
        }
    }

    #[test]
    fn transpose_pairing_needed_for_complex_states() {
        // Complex initial state: the conjugate-free square of psi0^H psi_n
        // is not the right weight.
        let model = table1();
        let s = qep_solve(&model).unwrap();
        let psi0 = InitialState::new(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)]).unwrap();
        let t = 1.7;
        let oracle = oracle_survival(&model, &psi0, &[t], 200).unwrap()[0];
        let c = survival_k_integral(&s, &psi0, t, &tol()).unwrap();
        assert!((c.iter().sum::<Complex64>().norm_sqr() - oracle).abs() < 1e-9);
        let v = psi0.as_vec();
        let mut wrong = Complex64::new(0.0, 0.0);
        for (pair, cn) in s.pairs.iter().zip(&c) {
            let good = pole_weight(pair, &psi0).unwrap();
            if good.norm() > 0.0 {
                let bad = v.dotc(&pair.psi_vec()).powi(2);
                wrong += cn / good * bad;
            }
        }
        assert!((wrong.norm_sqr() - oracle).abs() > 1e-2);
    }

    #[test]
    fn variance_of_dimer() {
        let g = short_time_expansion(&table1(), &even_state()).unwrap();
        assert!((g - 0.25).abs() < 1e-15);
        let shifted = OpenLattice::dimer(&DimerModel::new(1.3, 0.5).unwrap());
        let g2 = short_time_expansion(&shifted, &even_state()).unwrap();
        assert!((g2 - 0.25).abs() < 1e-14);
    }

    #[test]
    fn t_zero_and_bracket_dip() {
        let s = qep_solve(&table1()).unwrap();
        let p = &s.pairs[0];
        let pole = Pole { k: p.k, e: p.e, kind: p.kind, parity: p.parity, lambda: Some(p.lambda) };
        let v = t_zero_estimate(&pole, 1.0).unwrap();
        assert!((v - Complex64::new(1.01079, 0.0142551)).norm() < 1e-5);
        let (tmin, _) = (0..=4000)
            .map(|i| -3.0 + 6.0 * i as f64 / 4000.0)
            .map(|t| (t, short_time_bracket(p.lambda, p.e, 1.0, t).norm()))
            .fold((0.0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        assert!((tmin + v.re).abs() < 0.02 * v.re);
        let anti = Pole { kind: PoleKind::AntiResonant, ..pole };
        assert!(t_zero_estimate(&anti, 1.0).is_err());
    }

    #[test]
    fn kernel_closed_form() {
        for t in [0.5, 1.0, 5.0] {
            let f = |u: f64| (I * 2.0 * t * u.cos()).exp() * u.sin().powi(2);
            let q = quad_adaptive(f, -PI, PI, &Tolerance::quad()).unwrap();
            let k = memory_kernel(t, 1.0, 1.0).unwrap();
            assert!((q - k).norm() < 1e-10, "{q} vs {k}");
        }
        assert!(memory_kernel(0.0, 1.0, 1.0).is_err());
        assert!((memory_kernel(1e-7, 1.0, 1.0).unwrap() - memory_kernel_at_zero(1.0).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn zeno_limits() {
        assert_eq!(zeno_product(1.0, 1.0, 1).unwrap(), 0.0);
        assert!(zeno_product(4.0, 1.0, 1).is_err());
        assert!((zeno_product(0.5, 1.0, 1).unwrap() - 0.5).abs() < 1e-15);
        let p = zeno_product(1.0, 1.0, 1_000_000).unwrap();
        assert!((1.0 - p) < 1.01e-6);
        let mut last = 0.0;
        for n in 2..200 {
            let p = zeno_product(1.0, 1.0, n).unwrap();
            assert!(p > last);
            last = p;
        }
    }

    #[test]
    fn tail_rejects_exponential() {
        let times: Vec<f64> = (0..4000).map(|i| 40.0 + 0.05 * i as f64).collect();
        let p: Vec<f64> = times.iter().map(|t| (-0.05 * t).exp() * (1.0 + 0.5 * t.cos())).collect();
        let e = long_time_tail(&times, &p, (40.0, 200.0), 8).unwrap_err();
        assert!(matches!(e, OqsError::NotPowerLaw { .. }));
        let q: Vec<f64> = times.iter().map(|t| t.powi(-3) * (1.0 + 0.5 * t.cos())).collect();
        let fit = long_time_tail(&times, &q, (40.0, 200.0), 8).unwrap();
        assert!((fit.slope + 3.0).abs() < 0.05);
        assert!(matches!(long_time_tail(&times[..40], &q[..40], (40.0, 200.0), 8), Err(OqsError::TooFewPeaks { .. })));
    }
}
