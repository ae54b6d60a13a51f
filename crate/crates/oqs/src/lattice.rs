//! Tight-binding dimer between two semi-infinite leads.
//!
//! Sites 0 and 1 carry the potential V0 and are linked to each other and to
//! the leads by the hopping W1. The leads have hopping W and lattice
//! constant a. With v0 = V0/W, w1 = W1/W and theta = 1 - w1^2, the poles in
//! lambda = e^{iKa} are the roots of
//!
//! `theta lambda^2 + (v0 - w1) lambda + 1 = 0` (even)
//! `theta lambda^2 + (v0 + w1) lambda + 1 = 0` (odd)
//!
//! and the dispersion is E = -W (lambda + 1/lambda).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::continuum::{Parity, Pole, PoleKind};
use crate::error::{OqsError, Result};
use crate::numerics::Complex64;

/// Below this |theta| the dimer coupling is treated as transparent.
pub const THETA_MIN: f64 = 1e-12;

/// Two lambda closer than this are reported as a collision in a sweep.
pub const COLLISION_TOL: f64 = 1e-6;

/// A pole with its lambda; `Pole::lambda` is always `Some` for these.
pub type LatticePole = Pole;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimerModel {
    pub v0: f64,
    pub w1: f64,
    #[serde(rename = "W")]
    pub w: f64,
    pub a: f64,
}

impl DimerModel {
    /// Dimer in units hbar = W = a = 1.
    pub fn new(v0: f64, w1: f64) -> Result<Self> {
        let m = DimerModel { v0, w1, w: 1.0, a: 1.0 };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.v0.is_finite() {
            return Err(OqsError::InvalidInput("v0 must be finite".into()));
        }
        for (name, v) in [("w1", self.w1), ("W", self.w), ("a", self.a)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(OqsError::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn theta(&self) -> f64 {
        1.0 - self.w1 * self.w1
    }
}

/// K = -(i/a) log(lambda) on the principal branch, so Re K lies in the first
/// Brillouin zone (-pi/a, pi/a], and E = -W (lambda + 1/lambda).
pub fn lattice_dispersion(lambda: Complex64, w: f64, a: f64) -> Result<(Complex64, Complex64)> {
    if lambda.norm() == 0.0 || !lambda.re.is_finite() || !lambda.im.is_finite() {
        return Err(OqsError::Domain("lambda must be finite and nonzero".into()));
    }
    let mut arg = lambda.arg();
    if arg <= -PI {
        arg += 2.0 * PI;
    }
    let k = Complex64::new(arg, -lambda.norm().ln()) / a;
    let e = -w * (lambda + 1.0 / lambda);
    Ok((k, e))
}

/// Sheet classification in the lambda plane: real lambda inside the unit
/// circle is bound, outside anti-bound; complex lambda outside the circle is
/// resonant in the upper half plane and anti-resonant in the lower.
pub fn classify_lattice(lambda: Complex64) -> PoleKind {
    let r = lambda.norm();
    if lambda.im.abs() <= 1e-12 * r.max(1.0) {
        if (r - 1.0).abs() <= 1e-12 {
            PoleKind::ScatteringEdge
        } else if r < 1.0 {
            PoleKind::Bound
        } else {
            PoleKind::AntiBound
        }
    } else if lambda.im > 0.0 {
        PoleKind::Resonant
    } else {
        PoleKind::AntiResonant
    }
}

/// Lattice pole from lambda and the lead parameters.
pub fn lattice_pole(lambda: Complex64, w: f64, a: f64, parity: Parity) -> Result<LatticePole> {
    let (k, e) = lattice_dispersion(lambda, w, a)?;
    Ok(Pole { k, e, kind: classify_lattice(lambda), parity, lambda: Some(lambda) })
}

/// T11 of the dimer,
/// `[theta l^2 + (v0 + w1) l + 1][theta l^2 + (v0 - w1) l + 1] / (w1^3 (l^2 - 1))`.
pub fn lattice_transfer_t11(model: &DimerModel, lambda: Complex64) -> Result<Complex64> {
    model.validate()?;
    let den = model.w1.powi(3) * (lambda * lambda - 1.0);
    if lambda.norm() == 0.0 || (lambda * lambda - 1.0).norm() < 1e-14 {
        return Err(OqsError::Domain(format!("T11 undefined at lambda = {lambda}")));
    }
    let th = model.theta();
    let odd = th * lambda * lambda + (model.v0 + model.w1) * lambda + 1.0;
    let even = th * lambda * lambda + (model.v0 - model.w1) * lambda + 1.0;
    Ok(odd * even / den)
}

/// Transmission 1/|T11|^2 at real lattice wave number k in (0, pi/a).
pub fn lattice_transmission(model: &DimerModel, k: f64) -> Result<f64> {
    let lambda = Complex64::from_polar(1.0, k * model.a);
    Ok(1.0 / lattice_transfer_t11(model, lambda)?.norm_sqr())
}

/// Both roots of `theta l^2 + b l + 1 = 0` without cancellation.
fn stable_quadratic(theta: f64, b: f64) -> [Complex64; 2] {
    let disc = Complex64::new(b * b - 4.0 * theta, 0.0).sqrt();
    let bc = Complex64::new(b, 0.0);
    let q = if (bc.conj() * disc).re >= 0.0 { -(bc + disc) * 0.5 } else { -(bc - disc) * 0.5 };
    [q / theta, 1.0 / q]
}

fn order_pair(mut r: [Complex64; 2]) -> [Complex64; 2] {
    // Upper half plane first, then larger real part.
    r.sort_by(|x, y| y.im.total_cmp(&x.im).then(y.re.total_cmp(&x.re)));
    r
}

/// The four dimer poles: even pair first, each pair with the upper-half-plane
/// (or larger) lambda first.
pub fn dimer_poles(model: &DimerModel) -> Result<Vec<LatticePole>> {
    model.validate()?;
    let th = model.theta();
    if th.abs() <= THETA_MIN {
        return Err(OqsError::DegenerateCoupling(
            "theta = 1 - w1^2 vanishes (transparent contact, only two poles)".into(),
        ));
    }
    let mut out = Vec::with_capacity(4);
    for (b, parity) in [(model.v0 - model.w1, Parity::Even), (model.v0 + model.w1, Parity::Odd)] {
        for l in order_pair(stable_quadratic(th, b)) {
            out.push(lattice_pole(l, model.w, model.a, parity)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub v0: f64,
    pub poles: Vec<LatticePole>,
    /// Index pairs (into `poles`) whose lambdas nearly coincide.
    pub collisions: Vec<(usize, usize)>,
}

/// Poles of the dimer for `steps` equally spaced v0 values, with each row's
/// poles permuted to continue the previous row's nearest lambdas.
pub fn pole_sweep(template: &DimerModel, v0_range: (f64, f64), steps: usize) -> Result<Vec<SweepRow>> {
    if steps < 2 {
        return Err(OqsError::InvalidInput("a sweep needs at least two steps".into()));
    }
    let (lo, hi) = v0_range;
    let mut rows: Vec<SweepRow> = Vec::with_capacity(steps);
    for i in 0..steps {
        let v0 = lo + (hi - lo) * i as f64 / (steps - 1) as f64;
        let model = DimerModel { v0, ..*template };
        let mut poles = dimer_poles(&model)?;
        if let Some(prev) = rows.last() {
            poles = match_to_previous(&prev.poles, poles);
        }
        let mut collisions = Vec::new();
        for a in 0..poles.len() {
            for b in a + 1..poles.len() {
                if (poles[a].lambda.unwrap() - poles[b].lambda.unwrap()).norm() < COLLISION_TOL {
                    collisions.push((a, b));
                }
            }
        }
        rows.push(SweepRow { v0, poles, collisions });
    }
    Ok(rows)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn match_to_previous(prev: &[LatticePole], next: Vec<LatticePole>) -> Vec<LatticePole> {
    let cost = |perm: &[usize]| -> f64 {
        perm.iter()
            .enumerate()
            .map(|(i, &j)| (prev[i].lambda.unwrap() - next[j].lambda.unwrap()).norm())
            .sum()
    };
    let best = permutations(next.len())
        .into_iter()
        .min_by(|a, b| cost(a).total_cmp(&cost(b)))
        .unwrap_or_default();
    best.into_iter().map(|j| next[j]).collect()
}
