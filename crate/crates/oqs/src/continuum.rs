//! Scattering and resonance poles of the triple-delta potential
//!
//! `V(x) = -2 alpha0 delta(x) + 2 alpha1 [delta(x + 1) + delta(x - 1)]`
//!
//! in units where hbar^2/(2m) = 1 and the half-width ell = 1, so that
//! E = K^2 and the dimensionless wave number is K ell = xi + i eta.
//! `alpha0 > 0` is attractive. Pole equations are written in `z = iK`.
//! There the even-parity condition reads
//!
//! `h(z) = e^{2z} + 1 - alpha0/alpha1 - z/alpha1 - alpha0 phi(z) = 0`
//!
//! and the odd-parity condition reads `phi(z) + 1/alpha1 = 0`. Here
//! `phi(z) = (e^{2z} - 1)/z`. Both are the raw determinants divided by z,
//! which removes the trivial root at K = 0.

use serde::{Deserialize, Serialize};

use crate::error::{OqsError, Result};
use crate::numerics::{newton2d, quad_adaptive, Complex64, Jacobian, Tolerance};

/// |Re K| below this counts as lying on the imaginary axis.
pub const REAL_AXIS_TOL: f64 = 1e-9;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuumModel {
    pub alpha0: f64,
    pub alpha1: f64,
    #[serde(default = "unit")]
    pub ell: f64,
}

fn unit() -> f64 {
    1.0
}

impl ContinuumModel {
    pub fn new(alpha0: f64, alpha1: f64) -> Result<Self> {
        let m = ContinuumModel { alpha0, alpha1, ell: 1.0 };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.alpha0.is_finite() {
            return Err(OqsError::InvalidInput("alpha0 must be finite".into()));
        }
        if !(self.alpha1 > 0.0) || !self.alpha1.is_finite() {
            return Err(OqsError::InvalidInput(format!("alpha1 must be positive, got {}", self.alpha1)));
        }
        // Lengths are measured in units of the half-width.
        if self.ell != 1.0 {
            return Err(OqsError::InvalidInput(format!(
                "ell = {} is not supported; express alpha0 and alpha1 in units of 1/ell and set ell = 1",
                self.ell
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PoleKind {
    Bound,
    AntiBound,
    Resonant,
    AntiResonant,
    ScatteringEdge,
}

impl std::fmt::Display for PoleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PoleKind::Bound => "bound",
            PoleKind::AntiBound => "anti-bound",
            PoleKind::Resonant => "resonant",
            PoleKind::AntiResonant => "anti-resonant",
            PoleKind::ScatteringEdge => "scattering-edge",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
    None,
}

impl std::fmt::Display for Parity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
            Parity::None => "none",
        })
    }
}

/// One discrete eigenstate. For lattice poles `lambda = e^{iKa}` is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pole {
    pub k: Complex64,
    pub e: Complex64,
    pub kind: PoleKind,
    pub parity: Parity,
    pub lambda: Option<Complex64>,
}

impl Pole {
    /// Continuum pole from its dimensionless wave number, with E = K^2.
    pub fn continuum(k: Complex64, parity: Parity) -> Pole {
        Pole { k, e: k * k, kind: classify_continuum(k), parity, lambda: None }
    }

    /// (xi, eta) = (Re K ell, Im K ell).
    pub fn xi_eta(&self) -> (f64, f64) {
        (self.k.re, self.k.im)
    }
}

/// Sheet classification in the complex K plane.
pub fn classify_continuum(k: Complex64) -> PoleKind {
    if k.re.abs() <= REAL_AXIS_TOL {
        if k.im > REAL_AXIS_TOL {
            PoleKind::Bound
        } else {
            PoleKind::AntiBound
        }
    } else if k.re > 0.0 {
        PoleKind::Resonant
    } else {
        PoleKind::AntiResonant
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    pub t11: Complex64,
    pub t12: Complex64,
    pub t21: Complex64,
    pub t22: Complex64,
}

impl TransferMatrix {
    pub fn det(&self) -> Complex64 {
        self.t11 * self.t22 - self.t12 * self.t21
    }

    fn mul(&self, o: &TransferMatrix) -> TransferMatrix {
        TransferMatrix {
            t11: self.t11 * o.t11 + self.t12 * o.t21,
            t12: self.t11 * o.t12 + self.t12 * o.t22,
            t21: self.t21 * o.t11 + self.t22 * o.t21,
            t22: self.t21 * o.t12 + self.t22 * o.t22,
        }
    }
}

/// Interface matrix of a single delta `2u delta(x - x0)`, mapping the
/// amplitudes (F, G) of `F e^{ikx} + G e^{-ikx}` on the right to (A, B) on
/// the left.
fn delta_interface(k: Complex64, x0: f64, u: f64) -> TransferMatrix {
    let g = I * u / k;
    let e = (2.0 * I * k * x0).exp();
    TransferMatrix { t11: 1.0 + g, t12: g / e, t21: -g * e, t22: 1.0 - g }
}

/// Transfer matrix (A, B) = T (F, G) across the three deltas, built as the
/// product of the three interface matrices.
pub fn transfer_matrix(model: &ContinuumModel, k: Complex64) -> Result<TransferMatrix> {
    model.validate()?;
    if k.norm() == 0.0 {
        return Err(OqsError::Domain("transfer matrix is singular at k = 0".into()));
    }
    let left = delta_interface(k, -1.0, model.alpha1);
    let mid = delta_interface(k, 0.0, -model.alpha0);
    let right = delta_interface(k, 1.0, model.alpha1);
    Ok(left.mul(&mid).mul(&right))
}

/// Closed form of T11 for the triple-delta potential, with v0 = alpha0 and
/// v1 = alpha1:
/// `(i/k^3)[(ik - v1)^2 (ik + v0) + 2 v0 v1 (ik - v1) e^{2ik} - v1^2 (ik - v0) e^{4ik}]`.
pub fn t11_closed_form(model: &ContinuumModel, k: Complex64) -> Result<Complex64> {
    model.validate()?;
    if k.norm() == 0.0 {
        return Err(OqsError::Domain("T11 is singular at k = 0".into()));
    }
    let (v0, v1) = (model.alpha0, model.alpha1);
    let ik = I * k;
    let e2 = (2.0 * ik).exp();
    let bracket = (ik - v1) * (ik - v1) * (ik + v0) + 2.0 * v0 * v1 * (ik - v1) * e2 - v1 * v1 * (ik - v0) * e2 * e2;
    Ok(I / (k * k * k) * bracket)
}

/// Transmission probability 1/|T11|^2 at real wave number k > 0.
pub fn transmission(model: &ContinuumModel, k: f64) -> Result<f64> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(OqsError::Domain(format!("transmission needs k > 0, got {k}")));
    }
    let t = transfer_matrix(model, Complex64::new(k, 0.0))?;
    Ok(1.0 / t.t11.norm_sqr())
}

/// The first `count` positive roots of `xi cot(2 xi) + alpha1 = 0`, where the
/// symmetric (alpha0 = 0) model is perfectly transmitting.
pub fn perfect_transmission_points(alpha1: f64, count: usize) -> Result<Vec<f64>> {
    if !(alpha1 > 0.0) {
        return Err(OqsError::InvalidInput("alpha1 must be positive".into()));
    }
    // Multiplying by sin(2 xi) keeps the function continuous; its zeros
    // coincide with the original ones because cos(2 xi) = +-1 where sin vanishes.
    let f = |x: f64| x * (2.0 * x).cos() + alpha1 * (2.0 * x).sin();
    let mut roots = Vec::with_capacity(count);
    let h = 1e-3;
    let mut x0 = h;
    let mut f0 = f(x0);
    while roots.len() < count {
        let x1 = x0 + h;
        let f1 = f(x1);
        if f0 == 0.0 {
            roots.push(x0);
        } else if f0 * f1 < 0.0 {
            let (mut a, mut b, mut fa) = (x0, x1, f0);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                let fm = f(m);
                if fm * fa <= 0.0 {
                    b = m;
                } else {
                    a = m;
                    fa = fm;
                }
                if b - a <= 4.0 * f64::EPSILON * b {
                    break;
                }
            }
            roots.push(0.5 * (a + b));
        }
        x0 = x1;
        f0 = f1;
    }
    Ok(roots)
}

/// phi(z) = (e^{2z} - 1)/z and its first five derivatives.
fn phi_derivs(z: Complex64) -> [Complex64; 6] {
    let mut d = [Complex64::new(0.0, 0.0); 6];
    if z.norm() < 1.0 {
        // phi^(n)(z) = sum_{k>=n} 2^{k+1} k! / ((k+1)! (k-n)!) z^{k-n}
        for (n, dn) in d.iter_mut().enumerate() {
            let mut zp = Complex64::new(1.0, 0.0);
            let mut coef = 2f64.powi(n as i32 + 1) / (n as f64 + 1.0);
            let mut sum = Complex64::new(0.0, 0.0);
            for k in n..n + 45 {
                sum += zp * coef;
                zp *= z;
                coef *= 2.0 * (k as f64 + 1.0) / ((k as f64 + 2.0) * (k - n + 1) as f64);
            }
            *dn = sum;
        }
    } else {
        let e = (2.0 * z).exp();
        d[0] = (e - 1.0) / z;
        let mut p2 = 1.0;
        for n in 1..6 {
            p2 *= 2.0;
            d[n] = (p2 * e - n as f64 * d[n - 1]) / z;
        }
    }
    d
}

/// Even-parity function h(z) and its derivatives h^(n), n = 0..5.
pub fn even_derivs(model: &ContinuumModel, z: Complex64) -> [Complex64; 6] {
    let (a0, a1) = (model.alpha0, model.alpha1);
    let phi = phi_derivs(z);
    let e = (2.0 * z).exp();
    let mut out = [Complex64::new(0.0, 0.0); 6];
    let mut p2 = 1.0;
    for n in 0..6 {
        out[n] = p2 * e - a0 * phi[n];
        p2 *= 2.0;
    }
    out[0] += 1.0 - a0 / a1 - z / a1;
    out[1] -= 1.0 / a1;
    out
}

/// Even-parity pole function h(z), with z = iK.
pub fn even_function(model: &ContinuumModel, z: Complex64) -> Complex64 {
    even_derivs(model, z)[0]
}

/// Odd-parity pole function phi(z) + 1/alpha1, with z = iK.
pub fn odd_function(model: &ContinuumModel, z: Complex64) -> Complex64 {
    phi_derivs(z)[0] + 1.0 / model.alpha1
}

fn odd_derivative(z: Complex64) -> Complex64 {
    phi_derivs(z)[1]
}

/// Seeding density log10|h(iK)| of the even-parity function; poles are its
/// minus-infinity spots.
pub fn density(model: &ContinuumModel, k: Complex64) -> f64 {
    even_function(model, I * k).norm().log10()
}

/// Rectangle of the K plane scanned for seeds: xi in (0, xi_max],
/// eta in [eta_min, eta_max], with `n_xi` x `n_eta` cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub xi_max: f64,
    pub eta_min: f64,
    pub eta_max: f64,
    pub n_xi: usize,
    pub n_eta: usize,
}

impl Default for SearchBox {
    fn default() -> Self {
        SearchBox { xi_max: 20.0, eta_min: -3.0, eta_max: 0.0, n_xi: 400, n_eta: 120 }
    }
}

impl SearchBox {
    fn validate(&self) -> Result<()> {
        if !(self.xi_max > 0.0) || !(self.eta_max > self.eta_min) || self.n_xi < 2 || self.n_eta < 2 {
            return Err(OqsError::InvalidInput(format!("bad search box {self:?}")));
        }
        Ok(())
    }
}

/// Outcome of a pole search; seeds whose Newton iteration failed are counted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleSearch {
    pub poles: Vec<Pole>,
    pub skipped_seeds: usize,
}

/// Pole condition as a function of K: value and dF/dK.
type PoleFn<'a> = &'a dyn Fn(Complex64) -> (Complex64, Complex64);

fn residual_scale(k: Complex64, model: &ContinuumModel) -> f64 {
    let z = I * k;
    let e = (2.0 * z).exp().norm();
    1.0 + e + z.norm() / model.alpha1 + model.alpha0.abs() * (1.0 + e) / z.norm().max(1.0)
}

fn refine(f: PoleFn<'_>, seed: Complex64, model: &ContinuumModel, tol: &Tolerance) -> Option<Complex64> {
    let scale = residual_scale(seed, model);
    let g = |x: f64, y: f64| {
        let v = f(Complex64::new(x, y)).0;
        (v.re, v.im)
    };
    let jac = |x: f64, y: f64| {
        let d = f(Complex64::new(x, y)).1;
        [[d.re, -d.im], [d.im, d.re]]
    };
    let t = Tolerance { abs_tol: tol.abs_tol.max(1e-13) * scale, ..*tol };
    newton2d(g, Jacobian::Analytic(&jac), (seed.re, seed.im), &t)
        .ok()
        .map(|(x, y)| Complex64::new(x, y))
}

fn push_unique(list: &mut Vec<Pole>, p: Pole) {
    if !list.iter().any(|q| q.parity == p.parity && (q.k - p.k).norm() < 1e-6) {
        list.push(p);
    }
}

/// Grid scan for local minima of |F| over the box, Newton refinement, and
/// mirroring through K -> -K*.
fn scan_plane(
    f: PoleFn<'_>,
    parity: Parity,
    model: &ContinuumModel,
    bx: &SearchBox,
    tol: &Tolerance,
    out: &mut Vec<Pole>,
) -> usize {
    let (nx, ny) = (bx.n_xi, bx.n_eta);
    let xi = |i: usize| bx.xi_max * i as f64 / nx as f64;
    let eta = |j: usize| bx.eta_min + (bx.eta_max - bx.eta_min) * j as f64 / ny as f64;
    let grid: Vec<Vec<f64>> = (1..=nx)
        .map(|i| (0..=ny).map(|j| f(Complex64::new(xi(i), eta(j))).0.norm()).collect())
        .collect();
    let mut skipped = 0;
    for i in 0..nx {
        for j in 0..=ny {
            let v = grid[i][j];
            let mut is_min = v.is_finite();
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if ii < 0 || jj < 0 || ii >= nx as i64 || jj > ny as i64 {
                        continue;
                    }
                    if grid[ii as usize][jj as usize] < v {
                        is_min = false;
                    }
                }
            }
            if !is_min {
                continue;
            }
            let seed = Complex64::new(xi(i + 1), eta(j));
            match refine(f, seed, model, tol) {
                Some(k) => {
                    let margin = 1e-6 + 2.0 * (bx.eta_max - bx.eta_min) / ny as f64;
                    let inside = k.re > REAL_AXIS_TOL
                        && k.re <= bx.xi_max + margin
                        && k.im >= bx.eta_min - margin
                        && k.im <= bx.eta_max + margin;
                    if inside {
                        push_unique(out, Pole::continuum(k, parity));
                        push_unique(out, Pole::continuum(-k.conj(), parity));
                    }
                }
                None => skipped += 1,
            }
        }
    }
    skipped
}

/// Sign-change scan of the real-valued pole function along K = i eta.
fn scan_axis(f: &dyn Fn(f64) -> f64, parity: Parity, lo: f64, hi: f64, out: &mut Vec<Pole>) {
    let n = 20_000;
    let h = (hi - lo) / n as f64;
    let mut e0 = lo;
    let mut f0 = f(e0);
    for s in 1..=n {
        let e1 = lo + h * s as f64;
        let f1 = f(e1);
        if f0 == 0.0 || f0 * f1 < 0.0 {
            let (mut a, mut b, mut fa) = (e0, e1, f0);
            if f0 != 0.0 {
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    let fm = f(m);
                    if fm * fa <= 0.0 {
                        b = m;
                    } else {
                        a = m;
                        fa = fm;
                    }
                    if (b - a).abs() <= 4.0 * f64::EPSILON * b.abs().max(1e-300) {
                        break;
                    }
                }
            } else {
                b = a;
            }
            push_unique(out, Pole::continuum(Complex64::new(0.0, 0.5 * (a + b)), parity));
        }
        e0 = e1;
        f0 = f1;
    }
}

fn sort_poles(p: &mut [Pole]) {
    p.sort_by(|a, b| a.k.re.total_cmp(&b.k.re).then(a.k.im.total_cmp(&b.k.im)));
}

/// Poles of the symmetric model (alpha0 = 0): intersections of
/// `e^{2z} = -+(1 - z/alpha1)`, the upper sign giving even parity.
/// Every returned pole satisfies `|e^{2z} +- (1 - z/alpha1)| < tol` up to the
/// natural scale of the terms.
pub fn poles_symmetric(model: &ContinuumModel, bx: &SearchBox, tol: &Tolerance) -> Result<PoleSearch> {
    model.validate()?;
    bx.validate()?;
    if model.alpha0 != 0.0 {
        return Err(OqsError::InvalidInput("poles_symmetric requires alpha0 = 0".into()));
    }
    let a1 = model.alpha1;
    let even = |k: Complex64| {
        let z = I * k;
        let e = (2.0 * z).exp();
        (e + 1.0 - z / a1, I * (2.0 * e - 1.0 / a1))
    };
    let odd = |k: Complex64| {
        let z = I * k;
        (odd_function(model, z), I * odd_derivative(z))
    };
    let mut poles = Vec::new();
    let mut skipped = scan_plane(&even, Parity::Even, model, bx, tol, &mut poles);
    skipped += scan_plane(&odd, Parity::Odd, model, bx, tol, &mut poles);
    let axis_hi = bx.eta_max;
    scan_axis(&|eta| (even(Complex64::new(0.0, eta)).0).re, Parity::Even, bx.eta_min, axis_hi, &mut poles);
    scan_axis(&|eta| odd_function(model, Complex64::new(-eta, 0.0)).re, Parity::Odd, bx.eta_min, axis_hi, &mut poles);
    if poles.is_empty() {
        return Err(OqsError::EmptyBox);
    }
    sort_poles(&mut poles);
    Ok(PoleSearch { poles, skipped_seeds: skipped })
}

/// Poles of the general model. Even-parity poles solve h(z) = 0, seeded
/// from local minima of |h| on the grid; odd-parity poles solve the
/// alpha0-independent odd condition. The imaginary axis is scanned
/// separately up to eta = |alpha0|, above which no bound state can exist.
pub fn poles_general(model: &ContinuumModel, bx: &SearchBox, tol: &Tolerance) -> Result<PoleSearch> {
    model.validate()?;
    bx.validate()?;
    let even = |k: Complex64| {
        let d = even_derivs(model, I * k);
        (d[0], I * d[1])
    };
    let odd = |k: Complex64| {
        let z = I * k;
        (odd_function(model, z), I * odd_derivative(z))
    };
    let mut poles = Vec::new();
    let mut skipped = scan_plane(&even, Parity::Even, model, bx, tol, &mut poles);
    skipped += scan_plane(&odd, Parity::Odd, model, bx, tol, &mut poles);
    let axis_hi = bx.eta_max.max(model.alpha0.abs() + 1.0);
    scan_axis(&|eta| even_function(model, Complex64::new(-eta, 0.0)).re, Parity::Even, bx.eta_min, axis_hi, &mut poles);
    scan_axis(&|eta| odd_function(model, Complex64::new(-eta, 0.0)).re, Parity::Odd, bx.eta_min, axis_hi, &mut poles);
    if poles.is_empty() {
        return Err(OqsError::EmptyBox);
    }
    sort_poles(&mut poles);
    Ok(PoleSearch { poles, skipped_seeds: skipped })
}

/// Collision of the even-parity resonant/anti-resonant pair on the
/// imaginary axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalPoint {
    pub alpha0: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub alpha0: f64,
    pub poles: [Pole; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpTrajectory {
    pub alpha1: f64,
    pub steps: Vec<TrajectoryStep>,
    pub collision: Option<ExceptionalPoint>,
}

/// Symmetric-function form of the pair condition. With z_A + z_B = s and
/// z_A z_B = p, returns the real parts of (h(A) + h(B))/2 and of the
/// divided difference (h(A) - h(B))/(A - B). Both stay smooth through the
/// collision, where a Taylor expansion in (A - B)^2 replaces the quotient.
fn pair_equations(model: &ContinuumModel, s: f64, p: f64) -> (f64, f64) {
    let m = Complex64::new(0.5 * s, 0.0);
    let d2 = s * s - 4.0 * p;
    if d2.abs() < 1e-3 {
        let h = even_derivs(model, m);
        let f1 = h[0] + h[2] * d2 / 8.0 + h[4] * d2 * d2 / 384.0;
        let f2 = h[1] + h[3] * d2 / 24.0 + h[5] * d2 * d2 / 1920.0;
        (f1.re, f2.re)
    } else {
        let r = Complex64::new(d2, 0.0).sqrt() * 0.5;
        let (a, b) = (m + r, m - r);
        let (ha, hb) = (even_function(model, a), even_function(model, b));
        (((ha + hb) * 0.5).re, ((ha - hb) / (a - b)).re)
    }
}

fn pair_poles(s: f64, p: f64) -> [Pole; 2] {
    let m = Complex64::new(0.5 * s, 0.0);
    let r = Complex64::new(s * s - 4.0 * p, 0.0).sqrt() * 0.5;
    let (za, zb) = (m + r, m - r);
    // K = -i z; order the resonant (or upper) member first.
    let (ka, kb) = (-I * za, -I * zb);
    let (first, second) = if (ka.re, ka.im) >= (kb.re, kb.im) { (ka, kb) } else { (kb, ka) };
    let snap = |k: Complex64| if k.re.abs() <= REAL_AXIS_TOL { Complex64::new(0.0, k.im) } else { k };
    [Pole::continuum(snap(first), Parity::Even), Pole::continuum(snap(second), Parity::Even)]
}

/// Solve {h = 0, dh/dz = 0} for real (alpha0, z): the second-order
/// exceptional point on the imaginary K axis, eta = -z.
pub fn exceptional_point(alpha1: f64, seed_alpha0: f64, seed_z: f64) -> Result<ExceptionalPoint> {
    let model_at = |a0: f64| ContinuumModel { alpha0: a0, alpha1, ell: 1.0 };
    model_at(seed_alpha0).validate()?;
    let f = |a0: f64, z: f64| {
        let h = even_derivs(&model_at(a0), Complex64::new(z, 0.0));
        (h[0].re, h[1].re)
    };
    let jac = |a0: f64, z: f64| {
        let zc = Complex64::new(z, 0.0);
        let h = even_derivs(&model_at(a0), zc);
        let phi = phi_derivs(zc);
        [[-1.0 / alpha1 - phi[0].re, h[1].re], [-phi[1].re, h[2].re]]
    };
    let tol = Tolerance { abs_tol: 1e-14, rel_tol: 0.0, max_iter: 100 };
    let (a0, z) = newton2d(f, Jacobian::Analytic(&jac), (seed_alpha0, seed_z), &tol)?;
    Ok(ExceptionalPoint { alpha0: a0, eta: -z })
}

/// Continuation of the even-parity pair nearest the imaginary axis from
/// `alpha0_range.0` to `alpha0_range.1` in `steps` equal steps. A failed step
/// is retried with half the increment, up to 12 times.
pub fn ep_trajectory(alpha1: f64, alpha0_range: (f64, f64), steps: usize) -> Result<EpTrajectory> {
    let (start, end) = alpha0_range;
    let model0 = ContinuumModel::new(start, alpha1)?;
    if steps < 1 || !(end > start) {
        return Err(OqsError::InvalidInput("alpha0 range must be increasing with at least one step".into()));
    }
    let search = poles_general(
        &model0,
        &SearchBox { xi_max: 6.0, eta_min: -3.0, eta_max: 0.0, n_xi: 240, n_eta: 120 },
        &Tolerance::default(),
    )?;
    // Start from the even pair closest to the imaginary axis (a conjugate
    // pair in z, or the two nearest axis poles when they already collided).
    let even: Vec<&Pole> = search.poles.iter().filter(|p| p.parity == Parity::Even && p.k.im < 0.0).collect();
    let first = even
        .iter()
        .filter(|p| p.k.re >= 0.0)
        .min_by(|a, b| a.k.re.abs().total_cmp(&b.k.re.abs()).then(b.k.im.total_cmp(&a.k.im)))
        .ok_or(OqsError::EmptyBox)?;
    let (mut s, mut p) = if first.k.re > REAL_AXIS_TOL {
        let z = I * first.k;
        (2.0 * z.re, z.norm_sqr())
    } else {
        let mut axis: Vec<f64> = even.iter().filter(|q| q.k.re.abs() <= REAL_AXIS_TOL).map(|q| -q.k.im).collect();
        axis.sort_by(f64::total_cmp);
        if axis.len() < 2 {
            return Err(OqsError::EmptyBox);
        }
        (axis[0] + axis[1], axis[0] * axis[1])
    };

    let h_nominal = (end - start) / steps as f64;
    let mut traj = vec![TrajectoryStep { alpha0: start, poles: pair_poles(s, p) }];
    let mut a0 = start;
    let mut prev: Option<(f64, f64, f64)> = None;
    let mut collision = None;
    let tol = Tolerance { abs_tol: 1e-13, rel_tol: 0.0, max_iter: 60 };
    let mut target_index = 1;
    while target_index <= steps {
        let target = start + h_nominal * target_index as f64;
        let mut h = target - a0;
        let mut halvings = 0;
        loop {
            let next = a0 + h;
            let model = ContinuumModel { alpha0: next, alpha1, ell: 1.0 };
            let (ps, pp) = match prev {
                Some((pa, ps0, pp0)) if (a0 - pa).abs() > 0.0 => {
                    let r = h / (a0 - pa);
                    (s + r * (s - ps0), p + r * (p - pp0))
                }
                _ => (s, p),
            };
            let solved = newton2d(|x, y| pair_equations(&model, x, y), Jacobian::FiniteDifference, (ps, pp), &tol);
            let ok = match solved {
                Ok((ns, np)) => {
                    let jump = (ns - s).abs() + (np - p).abs();
                    if jump < 0.25 + 10.0 * h.abs() {
                        Some((ns, np))
                    } else {
                        None
                    }
                }
                Err(_) => None,
            };
            match ok {
                Some((ns, np)) => {
                    let d_old = s * s - 4.0 * p;
                    let d_new = ns * ns - 4.0 * np;
                    if collision.is_none() && d_old < 0.0 && d_new >= 0.0 {
                        let t = d_old / (d_old - d_new);
                        let seed_a0 = a0 + t * h;
                        let seed_z = 0.5 * (s + t * (ns - s));
                        collision = Some(exceptional_point(alpha1, seed_a0, seed_z)?);
                    }
                    prev = Some((a0, s, p));
                    a0 = next;
                    s = ns;
                    p = np;
                    break;
                }
                None => {
                    halvings += 1;
                    if halvings > 12 {
                        return Err(OqsError::TrackingLost { alpha0: a0 });
                    }
                    h *= 0.5;
                }
            }
        }
        if (a0 - target).abs() <= 1e-14 * target.abs().max(1.0) {
            a0 = target;
            traj.push(TrajectoryStep { alpha0: a0, poles: pair_poles(s, p) });
            target_index += 1;
        }
    }
    Ok(EpTrajectory { alpha1, steps: traj, collision })
}

/// Unnormalized eigenfunction of an even or odd pole, continuous at the
/// barriers: inside `cos(Kx) - (alpha0/K) sin(K|x|)` (even) or `sin(Kx)`
/// (odd), outside `psi(+-1) e^{iK(|x| - 1)}`.
pub fn eigenfunction(pole: &Pole, model: &ContinuumModel, x: f64) -> Result<Complex64> {
    let k = pole.k;
    let inner = |y: f64| -> Result<Complex64> {
        match pole.parity {
            Parity::Even => Ok((k * y).cos() - model.alpha0 / k * (k * y.abs()).sin()),
            Parity::Odd => Ok((k * y).sin()),
            Parity::None => Err(OqsError::InvalidInput("eigenfunction needs a parity-tagged pole".into())),
        }
    };
    if x.abs() <= 1.0 {
        inner(x)
    } else {
        let edge = inner(x.signum())?;
        Ok(edge * (I * k * (x.abs() - 1.0)).exp())
    }
}

/// Probability `e^{2 Im(E) t} int_{-L}^{L} |psi|^2 dx` in a fixed window of
/// half-width `half_width`.
pub fn window_probability(pole: &Pole, model: &ContinuumModel, t: f64, half_width: f64, tol: &Tolerance) -> Result<f64> {
    if !(half_width > 0.0) {
        return Err(OqsError::Domain("window half-width must be positive".into()));
    }
    let dens = |x: f64| Complex64::new(eigenfunction(pole, model, x).map(|v| v.norm_sqr()).unwrap_or(f64::NAN), 0.0);
    let inner_hi = half_width.min(1.0);
    let mut total = quad_adaptive(dens, 0.0, inner_hi, tol)?.re;
    if half_width > 1.0 {
        total += quad_adaptive(dens, 1.0, half_width, tol)?.re;
    }
    if !total.is_finite() {
        return Err(OqsError::InvalidInput("eigenfunction needs a parity-tagged pole".into()));
    }
    Ok(2.0 * total * (2.0 * pole.e.im * t).exp())
}

/// Probability of a resonant state inside the window expanding with the
/// velocity 2 Re K, `L(t) = 2 Re(K) t + 1`. This is exactly conserved.
pub fn conserved_probability(pole: &Pole, model: &ContinuumModel, t: f64, tol: &Tolerance) -> Result<f64> {
    if pole.kind != PoleKind::Resonant {
        return Err(OqsError::WrongKind { expected: "resonant", found: pole.kind.to_string() });
    }
    if !(t >= 0.0) {
        return Err(OqsError::Domain(format!("time must be non-negative, got {t}")));
    }
    let l = 2.0 * pole.k.re * t + 1.0;
    window_probability(pole, model, t, l, tol)
}
