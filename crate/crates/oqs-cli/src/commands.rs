//! One function per subcommand: resolved parameters in, tables and summary
//! fields out.

use rayon::prelude::*;
use serde_json::{json, Value};

use oqs::continuum::{
    density, ep_trajectory, even_derivs, exceptional_point, poles_general, t11_closed_form, transmission as coeff,
    ContinuumModel, Pole, PoleKind, PoleSearch, SearchBox,
};
use oqs::dynamics::{oracle_survival, survival_k_integral, survival_bessel, survival_series, InitialState, Representation};
use oqs::feshbach::OpenLattice;
use oqs::lattice::{pole_sweep, DimerModel};
use oqs::numerics::Tolerance;
use oqs::qep::{self, completeness_check, orthogonality_check, qep_solve, QepSpectrum};
use oqs::{Complex64, OqsError};

use crate::output::{cjson, fmt, Table};
use crate::{ContinuumLimitArgs, EpArgs, LatticeArgs, PolesArgs, SurvivalArgs, SweepArgs, TransmissionArgs, ZenoArgs};
use crate::CliError;

pub struct Run {
    pub tables: Vec<Table>,
    pub outputs: Value,
    pub residuals: Value,
    pub tolerances: Value,
}

fn tol_json(t: &Tolerance) -> Value {
    json!({"abs_tol": t.abs_tol, "rel_tol": t.rel_tol, "max_iter": t.max_iter})
}

fn pole_json(p: &Pole) -> Value {
    json!({"k": cjson(p.k), "e": cjson(p.e), "kind": p.kind.to_string(), "parity": p.parity.to_string()})
}

/// Largest |T11| over continuum poles.
fn t11_residual(m: &ContinuumModel, poles: &[Pole]) -> Result<f64, CliError> {
    let mut worst = 0.0f64;
    for p in poles {
        worst = worst.max(t11_closed_form(m, p.k)?.norm());
    }
    Ok(worst)
}

fn pole_table(name: &str, search: &PoleSearch) -> Table {
    let mut t = Table::new(name, &["xi", "eta", "Re_E", "Im_E", "kind", "parity"]);
    for p in &search.poles {
        let (xi, eta) = p.xi_eta();
        t.push(vec![fmt(xi), fmt(eta), fmt(p.e.re), fmt(p.e.im), p.kind.to_string(), p.parity.to_string()]);
    }
    t
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

pub fn transmission(p: &TransmissionArgs) -> Result<Run, CliError> {
    let m = ContinuumModel::new(p.alpha0.unwrap_or_default(), p.alpha1.unwrap_or_default())?;
    let (k_min, k_max) = (p.k_min.unwrap_or(0.01), p.k_max.unwrap_or(10.0));
    if !(k_max > k_min) {
        return Err(CliError::validation("k_max must exceed k_min"));
    }
    let ks = grid(k_min, k_max, p.points.unwrap_or(1000));
    let ts: Vec<f64> = ks.par_iter().map(|&k| coeff(&m, k)).collect::<Result<_, OqsError>>()?;
    let mut table = Table::new("transmission", &["k", "T"]);
    for (k, t) in ks.iter().zip(&ts) {
        table.push(vec![fmt(*k), fmt(*t)]);
    }
    let tol = Tolerance::default();
    let bx = SearchBox { xi_max: k_max, eta_min: p.eta_min.unwrap_or(-3.0), ..Default::default() };
    let search = poles_general(&m, &bx, &tol)?;
    let residual = t11_residual(&m, &search.poles)?;
    Ok(Run {
        tables: vec![table, pole_table("transmission_poles", &search)],
        outputs: json!({
            "t_min": ts.iter().cloned().fold(f64::INFINITY, f64::min),
            "t_max": ts.iter().cloned().fold(0.0, f64::max),
            "poles": search.poles.len(),
            "skipped_seeds": search.skipped_seeds,
        }),
        residuals: json!({"max_abs_t11_at_poles": residual}),
        tolerances: tol_json(&tol),
    })
}

pub fn poles(p: &PolesArgs) -> Result<Run, CliError> {
    let m = ContinuumModel::new(p.alpha0.unwrap_or_default(), p.alpha1.unwrap_or_default())?;
    let d = SearchBox::default();
    let bx = SearchBox {
        xi_max: p.xi_max.unwrap_or(10.0),
        eta_min: p.eta_min.unwrap_or(d.eta_min),
        eta_max: p.eta_max.unwrap_or(d.eta_max),
        n_xi: p.n_xi.unwrap_or(d.n_xi),
        n_eta: p.n_eta.unwrap_or(d.n_eta),
    };
    let tol = Tolerance::default();
    let search = poles_general(&m, &bx, &tol)?;
    let mut tables = vec![pole_table("poles", &search)];
    let (nx, ny) = (p.density_xi.unwrap_or(200), p.density_eta.unwrap_or(60));
    if nx > 0 && ny > 0 {
        let xs = grid(bx.xi_max / nx as f64, bx.xi_max, nx);
        let ys = grid(bx.eta_min, bx.eta_max, ny);
        let rows: Vec<Vec<String>> = ys
            .par_iter()
            .flat_map_iter(|&y| {
                let m = &m;
                xs.iter().map(move |&x| vec![fmt(x), fmt(y), fmt(density(m, Complex64::new(x, y)))])
            })
            .collect();
        let mut t = Table::new("poles_density", &["xi", "eta", "log10_density"]);
        rows.into_iter().for_each(|r| t.push(r));
        tables.push(t);
    }
    let residual = t11_residual(&m, &search.poles)?;
    Ok(Run {
        tables,
        outputs: json!({
            "poles": search.poles.iter().map(pole_json).collect::<Vec<_>>(),
            "skipped_seeds": search.skipped_seeds,
        }),
        residuals: json!({"max_abs_t11_at_poles": residual}),
        tolerances: tol_json(&tol),
    })
}

pub fn sweep(p: &SweepArgs) -> Result<Run, CliError> {
    let w1 = p.w1.unwrap_or(0.5);
    let (lo, hi) = (p.v0_min.unwrap_or(-3.0), p.v0_max.unwrap_or(3.0));
    let template = DimerModel::new(lo, w1)?;
    let rows = pole_sweep(&template, (lo, hi), p.steps.unwrap_or(601))?;
    let mut header = vec!["v0".to_string()];
    for n in 1..=4 {
        for q in ["Re_K", "Im_K", "Re_E", "Im_E"] {
            header.push(format!("{q}{n}"));
        }
    }
    header.push("collisions".into());
    let mut table = Table::with_header("sweep", header);
    let theta = template.theta();
    let mut residual = 0.0f64;
    let mut collisions = Vec::new();
    for r in &rows {
        let mut row = vec![fmt(r.v0)];
        for pole in &r.poles {
            row.extend([fmt(pole.k.re), fmt(pole.k.im), fmt(pole.e.re), fmt(pole.e.im)]);
            let l = pole.lambda.unwrap_or_default();
            // Even poles solve theta l^2 + (v0 - w1) l + 1 = 0, odd ones v0 + w1.
            let s = if pole.parity == oqs::continuum::Parity::Odd { w1 } else { -w1 };
            residual = residual.max((theta * l * l + (r.v0 + s) * l + 1.0).norm());
        }
        row.push(r.collisions.len().to_string());
        if !r.collisions.is_empty() {
            collisions.push(r.v0);
        }
        table.push(row);
    }
    Ok(Run {
        tables: vec![table],
        outputs: json!({"rows": rows.len(), "collision_v0": collisions}),
        residuals: json!({"max_abs_quadratic": residual}),
        tolerances: json!({"collision_tol": oqs::lattice::COLLISION_TOL}),
    })
}

pub fn ep(p: &EpArgs) -> Result<Run, CliError> {
    let alpha1 = p.alpha1.unwrap_or(1.0);
    let range = (p.alpha0_min.unwrap_or(0.0), p.alpha0_max.unwrap_or(1.0));
    let traj = ep_trajectory(alpha1, range, p.steps.unwrap_or(50))?;
    let mut table = Table::new("ep", &["alpha0", "Re_K1", "Im_K1", "Re_K2", "Im_K2", "kind1", "kind2"]);
    for s in &traj.steps {
        let [a, b] = s.poles;
        table.push(vec![
            fmt(s.alpha0),
            fmt(a.k.re),
            fmt(a.k.im),
            fmt(b.k.re),
            fmt(b.k.im),
            a.kind.to_string(),
            b.kind.to_string(),
        ]);
    }
    let point = match (traj.collision, p.seed_alpha0, p.seed_eta) {
        (Some(c), _, _) => exceptional_point(alpha1, c.alpha0, -c.eta)?,
        (None, Some(a0), Some(eta)) => exceptional_point(alpha1, a0, -eta)?,
        _ => {
            return Err(CliError::numerical(
                "no collision in the alpha0 range; widen it or give --seed-alpha0 and --seed-eta",
            ))
        }
    };
    let h = even_derivs(&ContinuumModel::new(point.alpha0, alpha1)?, Complex64::new(-point.eta, 0.0));
    Ok(Run {
        tables: vec![table],
        outputs: json!({
            "alpha0": point.alpha0,
            "eta": point.eta,
            "trajectory_collision": traj.collision.map(|c| json!({"alpha0": c.alpha0, "eta": c.eta})),
        }),
        residuals: json!({"abs_h": h[0].norm(), "abs_dh": h[1].norm()}),
        tolerances: json!({"newton_abs_tol": 1e-14}),
    })
}

fn load_lattice(p: &LatticeArgs) -> Result<OpenLattice, CliError> {
    match (&p.lattice, p.w1) {
        (Some(path), None) if p.v0.is_none() => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let m: OpenLattice =
                serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
            m.validate()?;
            Ok(m)
        }
        (None, Some(w1)) => Ok(OpenLattice::dimer(&DimerModel::new(p.v0.unwrap_or(0.0), w1)?)),
        (Some(_), _) => Err(CliError::validation("give either lattice or v0/w1, not both")),
        (None, None) => Err(CliError::validation("a lattice file or the dimer coupling w1 is required")),
    }
}

fn spectrum_checks(spec: &QepSpectrum) -> Value {
    json!({
        "max_qep_residual": spec.max_residual(),
        "completeness": completeness_check(spec),
        "orthogonality": orthogonality_check(spec),
    })
}

pub fn qep(p: &LatticeArgs) -> Result<Run, CliError> {
    let model = load_lattice(p)?;
    let spec = qep_solve(&model)?;
    let mut table =
        Table::new("qep", &["n", "Re_lambda", "Im_lambda", "Re_K", "Im_K", "Re_E", "Im_E", "kind", "parity"]);
    let mut vectors = Table::new("qep_vectors", &["n", "site", "Re_psi", "Im_psi"]);
    for (n, q) in spec.pairs.iter().enumerate() {
        table.push(vec![
            (n + 1).to_string(),
            fmt(q.lambda.re),
            fmt(q.lambda.im),
            fmt(q.k.re),
            fmt(q.k.im),
            fmt(q.e.re),
            fmt(q.e.im),
            q.kind.to_string(),
            q.parity.to_string(),
        ]);
        for (s, z) in q.psi.iter().enumerate() {
            vectors.push(vec![(n + 1).to_string(), s.to_string(), fmt(z.re), fmt(z.im)]);
        }
    }
    let pairs: Vec<Value> = spec
        .pairs
        .iter()
        .map(|q| {
            json!({
                "lambda": cjson(q.lambda),
                "k": cjson(q.k),
                "e": cjson(q.e),
                "kind": q.kind.to_string(),
                "parity": q.parity.to_string(),
                "psi": q.psi.iter().map(|z| cjson(*z)).collect::<Vec<_>>(),
            })
        })
        .collect();
    Ok(Run {
        tables: vec![table, vectors],
        outputs: json!({"pairs": pairs}),
        residuals: spectrum_checks(&spec),
        tolerances: json!({"normalization": "psi^T psi - lambda^2 psi^T Theta psi = 1"}),
    })
}

pub fn survival(p: &SurvivalArgs) -> Result<Run, CliError> {
    let model = load_lattice(&p.lattice)?;
    let spec = qep_solve(&model)?;
    let psi0 = match &p.psi0 {
        Some(v) => InitialState::real(v)?,
        None => InitialState::real(&vec![1.0; model.n_sites])?,
    };
    let (tmin, tmax) = (p.tmin.unwrap_or(-20.0), p.tmax.unwrap_or(20.0));
    if !(tmax > tmin) {
        return Err(CliError::validation("tmax must exceed tmin"));
    }
    let times = grid(tmin, tmax, p.points.unwrap_or(81));
    let rep = match p.representation.as_deref() {
        Some("bessel") => Representation::Bessel,
        _ => Representation::KIntegral,
    };
    let tol = Tolerance {
        abs_tol: p.abs_tol.unwrap_or(1e-12),
        rel_tol: p.rel_tol.unwrap_or(1e-10),
        max_iter: Tolerance::quad().max_iter,
    };
    tol.validate()?;
    let mut series = survival_series(&spec, &psi0, &times, rep, &tol)?;
    let at_zero: Complex64 = match rep {
        Representation::KIntegral => survival_k_integral(&spec, &psi0, 0.0, &tol)?,
        Representation::Bessel => survival_bessel(&spec, &psi0, 0.0, &tol)?,
    }
    .iter()
    .sum();
    let mut residuals = spectrum_checks(&spec);
    residuals["amplitude_at_zero_minus_one"] = json!((at_zero - 1.0).norm());
    let mut tolerances = tol_json(&tol);
    if p.oracle.unwrap_or(false) {
        let reach = times.iter().fold(0.0f64, |a, t| a.max(t.abs())) * 2.0 * model.w;
        let m = p.oracle_sites.unwrap_or(reach.ceil() as usize + 64);
        let o = oracle_survival(&model, &psi0, &times, m)?;
        let diff = series.p_surv.iter().zip(&o).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        residuals["max_abs_p_surv_minus_oracle"] = json!(diff);
        tolerances["oracle_lead_sites"] = json!(m);
        series.p_oracle = Some(o);
    }
    let mut header = vec!["t".to_string()];
    for n in 1..=series.c_n.len() {
        header.push(format!("Re_c{n}"));
        header.push(format!("Im_c{n}"));
    }
    header.push("P_surv".into());
    if series.p_oracle.is_some() {
        header.push("P_oracle".into());
    }
    let mut table = Table::with_header("survival", header);
    for (i, t) in times.iter().enumerate() {
        let mut row = vec![fmt(*t)];
        for c in &series.c_n {
            row.push(fmt(c[i].re));
            row.push(fmt(c[i].im));
        }
        row.push(fmt(series.p_surv[i]));
        if let Some(o) = &series.p_oracle {
            row.push(fmt(o[i]));
        }
        table.push(row);
    }
    Ok(Run {
        tables: vec![table],
        outputs: json!({
            "lambdas": series.lambdas.iter().map(|z| cjson(*z)).collect::<Vec<_>>(),
            "p_surv_min": series.p_surv.iter().cloned().fold(f64::INFINITY, f64::min),
            "points": times.len(),
        }),
        residuals,
        tolerances,
    })
}

pub fn zeno(p: &ZenoArgs) -> Result<Run, CliError> {
    let (gamma, t) = (p.gamma.unwrap_or(1.0), p.t.unwrap_or(1.0));
    let g2t2 = gamma * gamma * t * t;
    // Below N = gamma T the product is not a probability.
    let first = (gamma * t).ceil() as u64;
    let n_min = p.n_min.unwrap_or(first).max(1);
    let n_max = p.n_max.unwrap_or(100);
    if n_max < n_min {
        return Err(CliError::validation("n_max must be at least n_min"));
    }
    let mut table = Table::new("zeno", &["N", "P_N", "one_minus_P_N", "bound"]);
    let mut prev: Option<f64> = None;
    let (mut worst, mut drops) = (f64::NEG_INFINITY, 0usize);
    for n in n_min..=n_max {
        let pn = oqs::dynamics::zeno_product(gamma * gamma, t, n)?;
        let bound = g2t2 / n as f64;
        if n >= 10 {
            worst = worst.max((1.0 - pn) - bound);
        }
        if prev.is_some_and(|q| pn < q) {
            drops += 1;
        }
        prev = Some(pn);
        table.push(vec![n.to_string(), fmt(pn), fmt(1.0 - pn), fmt(bound)]);
    }
    Ok(Run {
        tables: vec![table],
        outputs: json!({"n_min": n_min, "n_max": n_max, "p_at_n_max": prev}),
        residuals: json!({
            "max_excess_over_bound": if worst.is_finite() { json!(worst) } else { Value::Null },
            "monotonicity_violations": drops,
        }),
        tolerances: json!({}),
    })
}

pub fn continuum_limit(p: &ContinuumLimitArgs) -> Result<Run, CliError> {
    let m = ContinuumModel::new(p.alpha0.unwrap_or(0.0), p.alpha1.unwrap_or(1.0))?;
    let spacings = p.spacings.clone().unwrap_or_else(|| vec![0.125, 0.0625, 0.03125]);
    let tol = Tolerance::default();
    let found = poles_general(&m, &SearchBox { xi_max: 8.0, ..Default::default() }, &tol)?;
    let target = match (p.k_re, p.k_im) {
        (Some(re), Some(im)) => {
            let guess = Complex64::new(re, im);
            found.poles.iter().min_by(|a, b| (a.k - guess).norm().total_cmp(&(b.k - guess).norm()))
        }
        (None, None) => found
            .poles
            .iter()
            .filter(|q| q.kind == PoleKind::Resonant)
            .min_by(|a, b| a.k.re.total_cmp(&b.k.re)),
        _ => return Err(CliError::validation("give both k_re and k_im or neither")),
    }
    .ok_or(OqsError::EmptyBox)?;
    let lim = qep::continuum_limit(&m, target.k, &spacings)?;
    let mut table = Table::new("continuum-limit", &["a", "Re_K", "Im_K", "error"]);
    for r in &lim.rows {
        table.push(vec![fmt(r.a), fmt(r.k.re), fmt(r.k.im), fmt(r.error)]);
    }
    Ok(Run {
        tables: vec![table],
        outputs: json!({"target": cjson(lim.target), "order": lim.order}),
        residuals: json!({"t11_at_target": t11_closed_form(&m, target.k)?.norm()}),
        tolerances: tol_json(&tol),
    })
}
