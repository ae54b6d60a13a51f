//! Effective Hamiltonian of a finite system block coupled to semi-infinite
//! tight-binding leads.
//!
//! Eliminating a lead attached to site s with coupling W1 adds the
//! self-energy `-(W1^2 / W) lambda` to that site, where lambda = e^{iKa} and
//! E = -W (lambda + 1/lambda). Only W1^2 enters, so the sign of a stored
//! coupling is irrelevant here.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::continuum::ContinuumModel;
use crate::error::{OqsError, Result};
use crate::lattice::DimerModel;
use crate::numerics::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lead {
    pub site: usize,
    /// Coupling between the lead's first site and `site` (energy).
    pub w1: f64,
}

/// Finite block `h_sys` (in units of W) with leads of hopping W and lattice
/// constant a.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenLattice {
    pub n_sites: usize,
    pub h_sys: Vec<Vec<f64>>,
    pub leads: Vec<Lead>,
    #[serde(rename = "W")]
    pub w: f64,
    pub a: f64,
}

impl OpenLattice {
    pub fn validate(&self) -> Result<()> {
        let n = self.n_sites;
        if n == 0 {
            return Err(OqsError::InvalidInput("n_sites must be positive".into()));
        }
        if self.h_sys.len() != n || self.h_sys.iter().any(|r| r.len() != n) {
            return Err(OqsError::InvalidInput(format!("h_sys must be {n}x{n}")));
        }
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (self.h_sys[i][j], self.h_sys[j][i]);
                if !x.is_finite() {
                    return Err(OqsError::InvalidInput(format!("h_sys[{i}][{j}] is not finite")));
                }
                if (x - y).abs() > 1e-12 {
                    return Err(OqsError::InvalidInput(format!("h_sys is not symmetric at ({i}, {j})")));
                }
            }
        }
        let mut seen = vec![false; n];
        for l in &self.leads {
            if l.site >= n {
                return Err(OqsError::InvalidInput(format!("lead site {} outside [0, {n})", l.site)));
            }
            if seen[l.site] {
                return Err(OqsError::InvalidInput(format!("more than one lead on site {}", l.site)));
            }
            seen[l.site] = true;
            if !l.w1.is_finite() {
                return Err(OqsError::InvalidInput("lead coupling must be finite".into()));
            }
        }
        for (name, v) in [("W", self.w), ("a", self.a)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(OqsError::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// The dimer of the `lattice` module, with a lead on each site.
    pub fn dimer(m: &DimerModel) -> OpenLattice {
        OpenLattice {
            n_sites: 2,
            h_sys: vec![vec![m.v0, -m.w1], vec![-m.w1, m.v0]],
            leads: vec![Lead { site: 0, w1: m.w1 * m.w }, Lead { site: 1, w1: m.w1 * m.w }],
            w: m.w,
            a: m.a,
        }
    }

    /// Open chain of `n` sites with nearest-neighbour hopping -1 (units of W),
    /// the given on-site energies, and leads on both ends.
    pub fn chain(onsite: &[f64], w1: f64, w: f64, a: f64) -> Result<OpenLattice> {
        let n = onsite.len();
        let mut h = vec![vec![0.0; n]; n];
        for i in 0..n {
            h[i][i] = onsite[i];
            if i + 1 < n {
                h[i][i + 1] = -1.0;
                h[i + 1][i] = -1.0;
            }
        }
        let mut leads = vec![Lead { site: 0, w1 }];
        if n > 1 {
            leads.push(Lead { site: n - 1, w1 });
        }
        let m = OpenLattice { n_sites: n, h_sys: h, leads, w, a };
        m.validate()?;
        Ok(m)
    }

    pub fn h_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_sites, self.n_sites, |i, j| self.h_sys[i][j])
    }

    /// Diagonal of Theta = I - sum over leads of (W1/W)^2 e_s e_s^T.
    pub fn theta(&self) -> DVector<f64> {
        let mut d = DVector::from_element(self.n_sites, 1.0);
        for l in &self.leads {
            d[l.site] -= (l.w1 / self.w).powi(2);
        }
        d
    }

    /// Energy E = -W (lambda + 1/lambda).
    pub fn energy(&self, lambda: Complex64) -> Complex64 {
        -self.w * (lambda + 1.0 / lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// Self-energy proportional to e^{+iKa}.
    Retarded,
    /// Self-energy proportional to e^{-iKa}.
    Advanced,
}

/// Self-energy `-(w1^2 / W) lambda^{+-1}` of one lead.
pub fn self_energy(w1: f64, w: f64, lambda: Complex64, branch: Branch) -> Result<Complex64> {
    if lambda.norm() == 0.0 {
        return Err(OqsError::Domain("self-energy undefined at lambda = 0".into()));
    }
    let l = match branch {
        Branch::Retarded => lambda,
        Branch::Advanced => 1.0 / lambda,
    };
    Ok(-(w1 * w1 / w) * l)
}

/// `W h_sys + Sigma(lambda)` with Sigma diagonal on the lead sites.
pub fn effective_hamiltonian(model: &OpenLattice, lambda: Complex64, branch: Branch) -> Result<DMatrix<Complex64>> {
    model.validate()?;
    let mut h = model.h_matrix().map(|x| Complex64::new(model.w * x, 0.0));
    for l in &model.leads {
        h[(l.site, l.site)] += self_energy(l.w1, model.w, lambda, branch)?;
    }
    Ok(h)
}

/// `(E - H_eff(lambda))^-1` on the retarded branch, inverted directly.
pub fn direct_resolvent(model: &OpenLattice, lambda: Complex64) -> Result<DMatrix<Complex64>> {
    let h = effective_hamiltonian(model, lambda, Branch::Retarded)?;
    let n = model.n_sites;
    let m = DMatrix::identity(n, n) * model.energy(lambda) - h;
    m.try_inverse().ok_or_else(|| OqsError::PoleHit(format!("{lambda}")))
}

fn check_lead_energy(e: Complex64, w: f64) -> Result<()> {
    if !(w > 0.0) || !w.is_finite() {
        return Err(OqsError::InvalidInput(format!("W must be positive, got {w}")));
    }
    if !e.re.is_finite() || !e.im.is_finite() {
        return Err(OqsError::Domain("energy is not finite".into()));
    }
    if e.im == 0.0 && e.re.abs() <= 2.0 * w {
        return Err(OqsError::Domain(format!("E = {} lies on the band [-2W, 2W]", e.re)));
    }
    Ok(())
}

/// Surface Green's function of a lead truncated to `m` sites, from the
/// continued fraction `G_1 = 1/E`, `G_k = 1/(E - W^2 G_{k-1})`.
pub fn lead_green_truncated(e: Complex64, w: f64, m: usize) -> Result<Complex64> {
    check_lead_energy(e, w)?;
    if m < 2 {
        return Err(OqsError::InvalidInput(format!("truncation needs at least two sites, got {m}")));
    }
    let mut g = Complex64::new(0.0, 0.0);
    for k in 1..=m {
        let den = e - w * w * g;
        if den.norm() < 1e-300 {
            return Err(OqsError::SingularTruncation(k));
        }
        g = 1.0 / den;
    }
    Ok(g)
}

/// The root of `W^2 G^2 - E G + 1 = 0` with |W G| < 1, the limit of
/// [`lead_green_truncated`] for large truncation.
pub fn lead_green_closed(e: Complex64, w: f64) -> Result<Complex64> {
    check_lead_energy(e, w)?;
    let s = (e * e - 4.0 * w * w).sqrt();
    let g1 = (e - s) / (2.0 * w * w);
    let g2 = (e + s) / (2.0 * w * w);
    Ok(if g1.norm() <= g2.norm() { g1 } else { g2 })
}

/// Surface Green's function `-e^{+-iKa}/W` on a definite branch, together
/// with the wave number K = arccos(-E/2W)/a (principal branch, Re Ka in
/// [0, pi]). The retarded value is analytic in the upper half plane and is
/// continued through the band into the lower one.
pub fn lead_green_branch(e: Complex64, w: f64, a: f64, branch: Branch) -> Result<(Complex64, Complex64)> {
    check_lead_energy(e, w)?;
    if !(a > 0.0) {
        return Err(OqsError::InvalidInput(format!("a must be positive, got {a}")));
    }
    let ka = (-e / (2.0 * w)).acos();
    let i = Complex64::new(0.0, 1.0);
    let g = match branch {
        Branch::Retarded => -(i * ka).exp() / w,
        Branch::Advanced => -(-i * ka).exp() / w,
    };
    Ok((g, ka / a))
}

/// Finite-difference lattice of the triple-delta model with spacing `a`
/// (lengths in units of the half-width, hbar^2/2m = 1).
///
/// Sites sit at x = -1, -1 + a, ..., 1 and W = 1/a^2. Each delta of weight
/// 2u becomes the on-site energy 2u/a, i.e. `2 u a` in units of W. The two
/// outermost sites connect to leads with W1 = W, so the lead continues the
/// uniform grid. The kinetic on-site term 2W is left out of `h_sys`; lattice
/// energies are therefore shifted by -2W relative to E = K^2.
pub fn discretize_continuum(model: &ContinuumModel, a: f64) -> Result<OpenLattice> {
    model.validate()?;
    let ell = model.ell;
    let bad = OqsError::BadGrid { a, ell };
    if !(a > 0.0) || !a.is_finite() || a > ell / 4.0 {
        return Err(bad);
    }
    let half = ell / a;
    let steps = half.round();
    if (half - steps).abs() > 1e-9 * half {
        return Err(bad);
    }
    let half = steps as usize;
    let n = 2 * half + 1;
    let mut onsite = vec![0.0; n];
    onsite[0] = 2.0 * model.alpha1 * a;
    onsite[n - 1] = 2.0 * model.alpha1 * a;
    onsite[half] = -2.0 * model.alpha0 * a;
    let w = 1.0 / (a * a);
    OpenLattice::chain(&onsite, w, w, a)
}
