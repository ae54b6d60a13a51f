use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{Complex64, Tolerance};
use crate::error::{OqsError, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

struct Segment {
    a: f64,
    b: f64,
    value: Complex64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// 15-point Kronrod rule with the embedded 7-point Gauss rule and the
/// QUADPACK error scaling.
fn gk15(f: &dyn Fn(f64) -> Complex64, a: f64, b: f64) -> (Complex64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_g = fc * WG[3];
    let mut res_k = fc * WGK[7];
    let mut res_abs = fc.norm() * WGK[7];
    let mut fv1 = [Complex64::new(0.0, 0.0); 7];
    let mut fv2 = [Complex64::new(0.0, 0.0); 7];
    for j in 0..7 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += (f1 + f2) * WGK[j];
        res_abs += (f1.norm() + f2.norm()) * WGK[j];
        if j % 2 == 1 {
            res_g += (f1 + f2) * WG[j / 2];
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[7] * (fc - mean).norm();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).norm() + (fv2[j] - mean).norm());
    }
    let h = half.abs();
    let value = res_k * half;
    res_abs *= h;
    res_asc *= h;
    let mut err = ((res_k - res_g) * half).norm();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    if !value.re.is_finite() || !value.im.is_finite() {
        err = f64::INFINITY;
    }
    (value, err)
}

/// Globally adaptive Gauss-Kronrod quadrature of a complex integrand.
///
/// Succeeds when the summed error indicator is at most
/// `abs_tol + rel_tol * |result|`; `tol.max_iter` bounds the number of
/// subdivisions.
pub fn quad_adaptive(f: impl Fn(f64) -> Complex64, a: f64, b: f64, tol: &Tolerance) -> Result<Complex64> {
    quad_adaptive_panels(f, a, b, 1, tol)
}

/// As [`quad_adaptive`], starting from `panels` equal subintervals. Useful
/// for oscillatory integrands whose period is known in advance.
pub fn quad_adaptive_panels(
    f: impl Fn(f64) -> Complex64,
    a: f64,
    b: f64,
    panels: usize,
    tol: &Tolerance,
) -> Result<Complex64> {
    tol.validate()?;
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(OqsError::Domain(format!("quadrature interval [{a}, {b}] is empty or infinite")));
    }
    let panels = panels.max(1);
    let fref: &dyn Fn(f64) -> Complex64 = &f;
    let mut heap = BinaryHeap::with_capacity(panels + tol.max_iter);
    let width = (b - a) / panels as f64;
    for i in 0..panels {
        let lo = a + width * i as f64;
        let hi = if i + 1 == panels { b } else { a + width * (i + 1) as f64 };
        let (value, err) = gk15(fref, lo, hi);
        heap.push(Segment { a: lo, b: hi, value, err });
    }
    let mut frozen_value = Complex64::new(0.0, 0.0);
    let mut frozen_err = 0.0;
    let min_width = (b - a) * 1e-13;
    let mut splits = 0;
    loop {
        let (total, total_err) = heap
            .iter()
            .fold((frozen_value, frozen_err), |(v, e), s| (v + s.value, e + s.err));
        let target = tol.abs_tol + tol.rel_tol * total.norm();
        if total_err <= target {
            return Ok(total);
        }
        if splits >= tol.max_iter || heap.is_empty() {
            return Err(OqsError::NoConvergence { what: "adaptive quadrature", iterations: splits });
        }
        // Split a batch of the worst segments before re-summing.
        let batch = (heap.len() / 4).max(1);
        for _ in 0..batch {
            let Some(worst) = heap.pop() else { break };
            if worst.err <= 0.0 {
                heap.push(worst);
                break;
            }
            if worst.b - worst.a < min_width {
                frozen_value += worst.value;
                frozen_err += worst.err;
                continue;
            }
            let mid = 0.5 * (worst.a + worst.b);
            let (v1, e1) = gk15(fref, worst.a, mid);
            let (v2, e2) = gk15(fref, mid, worst.b);
            heap.push(Segment { a: worst.a, b: mid, value: v1, err: e1 });
            heap.push(Segment { a: mid, b: worst.b, value: v2, err: e2 });
            splits += 1;
        }
    }
}
