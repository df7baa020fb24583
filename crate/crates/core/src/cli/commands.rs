//! The subcommands. Each one writes its outputs into a run directory and
//! reports whether its checks passed.

use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::config::{BcKind, RunConfig};
use crate::carleman::{lambda_scan, summarize_suite, Prepared, ScanCell, SuiteSummary, Variant};
use crate::error::{Error, Result};
use crate::grid::{build_grid, integrate_q, ComplexField, DomainSpec, Region, Shape, SpaceTimeField, SpaceTimeGrid, C64};
use crate::identity::{
    identity_residual_linear, identity_residual_nonlinear, sample_points, t_coefficient_positivity, AnalyticTestField,
    Corruption, IdentityReport, ResidualOptions, Setup, TCoefficientReport,
};
use crate::numerics::observed_order;
use crate::operator::derive_coeffs;

use crate::solver::{
    energy_balance, manufactured_source_fn, random_trig_initial, solve, write_trajectory, write_trajectory_csv, AnalyticField,
    Manufactured, SolveConfig,
};
use crate::stability::{perturbation_suite, spread, Observation, StabilityReport, SuiteConfig};
use crate::weights::{
    derivative_check, psi_sup, time_monotonicity, verify_psi_admissibility, weight_envelope, AdmissibilityReport,
    CarlemanParams, Family, MonotonicityReport, PsiKind,
};

/// Result of one command.
pub struct Outcome {
    pub pass: bool,
    pub dir: PathBuf,
    pub message: String,
}

fn run_dir(root: &Path, cfg: &RunConfig, command: &str) -> Result<PathBuf> {
    let dir = root.join(cfg.hash(command));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| Error::Output(e.to_string()))?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Output(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Output(e.to_string())
}

#[derive(Serialize)]
struct IdentityRow {
    field: String,
    b: f64,
    c: f64,
    lambda: f64,
    mu: f64,
    nonlinear: IdentityReport,
    linear: IdentityReport,
}

fn identity_fields(cfg: &RunConfig) -> Result<Vec<(String, AnalyticTestField)>> {
    let s = &cfg.identity;
    if s.zero_field_only {
        return Ok(vec![("zero".into(), AnalyticTestField::zero())]);
    }
    let mut out = Vec::new();
    if s.builtin_fields {
        out.push(("bubble".into(), AnalyticTestField::bubble(cfg.t_final)));
        out.push(("rotating_bump".into(), AnalyticTestField::rotating_bump()));
    }
    for i in 0..s.random_fields {
        let seed = cfg.seed.wrapping_mul(1000).wrapping_add(i as u64);
        out.push((format!("random_{i}"), AnalyticTestField::random_trig(seed, cfg.t_final)?));
    }
    Ok(out)
}

pub fn verify_identity(cfg: &RunConfig, root: &Path, corrupt_term: Option<&str>) -> Result<Outcome> {
    let s = &cfg.identity;
    let spec = cfg.domain.spec();
    let grid = build_grid(spec, s.n, s.n, s.nt, cfg.t_final)?;
    let fields = identity_fields(cfg)?;
    let opts = ResidualOptions {
        corruption: Corruption { flip_rhs_term: corrupt_term.map(str::to_string) },
        analytic_only: false,
    };
    let mut jobs = Vec::new();
    for (name, f) in &fields {
        for &[b, c] in &s.coeff_pairs {
            for &lambda in &s.lambdas {
                for &mu in &s.mus {
                    jobs.push((name.clone(), f, b, c, lambda, mu));
                }
            }
        }
    }
    let rows: Vec<IdentityRow> = jobs
        .par_iter()
        .map(|(name, f, b, c, lambda, mu)| {
            let coeffs = derive_coeffs(*b, *c);
            let params = CarlemanParams::new(*lambda, *mu, cfg.t_final, Family::J1Interior)?;
            let setup = Setup { spec: &spec, params: &params, coeffs: &coeffs, aux: s.aux.choice(), form: s.form };
            Ok(IdentityRow {
                field: name.clone(),
                b: *b,
                c: *c,
                lambda: *lambda,
                mu: *mu,
                nonlinear: identity_residual_nonlinear(&setup, f, &grid, &opts)?,
                linear: identity_residual_linear(&setup, f, &grid, &opts)?,
            })
        })
        .collect::<Result<_>>()?;
    let t_coef: Vec<(f64, f64, TCoefficientReport)> =
        s.coeff_pairs.iter().map(|&[b, c]| (b, c, t_coefficient_positivity(&derive_coeffs(b, c)))).collect();
    let pass = rows.iter().all(|r| r.nonlinear.pass && r.linear.pass);
    let worst = rows.iter().map(|r| r.nonlinear.max_rel.max(r.linear.max_rel)).fold(0.0, f64::max);
    let min_order = rows.iter().map(|r| r.nonlinear.fd_order.min(r.linear.fd_order)).fold(f64::INFINITY, f64::min);
    let degenerate = rows.iter().all(|r| r.nonlinear.max_rel == 0.0 && r.linear.max_rel == 0.0);
    let dir = run_dir(root, cfg, "verify-identity")?;
    let summary = json!({
        "command": "verify-identity",
        "config": cfg,
        "corrupt_term": corrupt_term,
        "sample_points": sample_points(&grid).len(),
        "threshold": crate::identity::IDENTITY_TOL,
        "min_fd_order": crate::identity::MIN_FD_ORDER,
        "worst_max_rel": worst,
        "worst_fd_order": if min_order.is_finite() { json!(min_order) } else { json!("exact") },
        "degenerate": degenerate,
        "t_coefficient": t_coef.iter().map(|(b, c, r)| json!({"b": b, "c": c, "report": r})).collect::<Vec<_>>(),
        "results": rows,
        "pass": pass,
    });
    write_json(&dir.join("report.json"), &summary)?;
    let note = if degenerate { " (degenerate: every residual is exactly zero)" } else { "" };
    Ok(Outcome {
        pass,
        dir,
        message: format!("{} identity checks, worst relative residual {worst:.3e}{note}", rows.len() * 2),
    })
}

fn sinsin(t_decay: f64) -> Arc<dyn Manufactured> {
    let s = |x: [f64; 2]| (PI * x[0]).sin() * (PI * x[1]).sin();
    let v = move |t: f64, x: [f64; 2]| C64::new(1.0, 0.5) * ((-t / t_decay).exp() * s(x));
    Arc::new(AnalyticField {
        value: v,
        dt: move |t: f64, x: [f64; 2]| v(t, x) * (-1.0 / t_decay),
        laplacian: move |t: f64, x: [f64; 2]| v(t, x) * (-2.0 * PI * PI),
    })
}

#[derive(Serialize)]
struct ConvergenceRow {
    n: usize,
    nt: usize,
    error: f64,
    order: Option<f64>,
}

fn manufactured_study(cfg: &RunConfig) -> Result<Vec<ConvergenceRow>> {
    let coeffs = cfg.coeffs();
    let exact = sinsin(cfg.t_final);
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for n in [cfg.n / 4, cfg.n / 2, cfg.n] {
        let grid = build_grid(DomainSpec::unit_square([0.5, 0.5], cfg.domain.omega_radius), n, n, n / 2, cfg.t_final)?;
        let sc = SolveConfig {
            coeffs,
            bc: BcKind::Dirichlet.condition(),
            scheme: cfg.solve.scheme,
            source: Some(manufactured_source_fn(exact.clone(), &coeffs)),
        };
        let y0 = ComplexField::from_fn(&grid, |x| exact.value(0.0, x));
        let y = solve(&y0, &sc, &grid)?.field;
        let g: Vec<_> = y
            .slices
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let t = grid.t(k);
                ndarray::Array2::from_shape_fn(grid.dims(), |(i, j)| (s.values[[i, j]] - exact.value(t, grid.x(i, j))).norm_sqr())
            })
            .collect();
        let error = integrate_q(&g, &grid, Region::Q)?.sqrt();
        let order = rows.last().map(|r| observed_order(r.error, error, 2.0));
        rows.push(ConvergenceRow { n, nt: n / 2, error, order });
    }
    Ok(rows)
}

pub fn solve_cmd(cfg: &RunConfig, root: &Path) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let bc = cfg.solve.bc.condition();
    let lbc = bc.laplacian_bc();
    let y0 = if cfg.solve.amplitude == 0.0 {
        ComplexField::zeros(&grid)
    } else {
        random_trig_initial(&grid, &bc, cfg.seed, cfg.solve.modes, cfg.solve.amplitude)?
    };
    let sc = SolveConfig { coeffs: cfg.coeffs(), bc, scheme: cfg.solve.scheme, source: None };
    let traj = solve(&y0, &sc, &grid)?;
    let dir = run_dir(root, cfg, "solve")?;
    write_trajectory(&traj.field, &grid, BufWriter::new(File::create(dir.join("trajectory.bin"))?))?;
    if cfg.solve.csv {
        write_trajectory_csv(&traj.field, &grid, BufWriter::new(File::create(dir.join("trajectory.csv"))?))?;
    }
    let residual = energy_balance(&traj.field, &grid, lbc)?;
    let mut w = csv_writer(&dir.join("energy.csv"))?;
    w.write_record(["step", "t", "l2_sq", "substeps", "energy_residual"]).map_err(csv_err)?;
    for (k, d) in traj.diagnostics.iter().enumerate() {
        let r = if k == 0 { String::new() } else { residual[k - 1].to_string() };
        w.write_record([k.to_string(), d.t.to_string(), d.l2_sq.to_string(), d.substeps.to_string(), r]).map_err(csv_err)?;
    }
    w.flush()?;
    let l2: Vec<f64> = traj.diagnostics.iter().map(|d| d.l2_sq.sqrt()).collect();
    let dissipative = l2.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-8));
    let max_residual = residual.iter().copied().fold(0.0, f64::max);
    let finite = traj.field.is_finite();
    let study = if cfg.solve.manufactured { Some(manufactured_study(cfg)?) } else { None };
    let study_ok = study.as_ref().is_none_or(|rows| rows.iter().filter_map(|r| r.order).all(|p| p >= 1.8));
    let pass = finite && dissipative && study_ok;
    write_json(
        &dir.join("summary.json"),
        &json!({
            "command": "solve",
            "config": cfg,
            "finite": finite,
            "dissipative": dissipative,
            "l2_initial": l2.first(),
            "l2_final": l2.last(),
            "max_energy_residual": max_residual,
            "manufactured": study,
            "pass": pass,
        }),
    )?;
    Ok(Outcome { pass, dir, message: format!("max energy residual {max_residual:.3e}, dissipative: {dissipative}") })
}

/// Scan trajectories of the suite, keyed by boundary condition.
fn scan_trajectories(cfg: &RunConfig, grid: &SpaceTimeGrid) -> Result<Vec<(BcKind, SpaceTimeField)>> {
    let coeffs = cfg.coeffs();
    cfg.scan
        .trajectories
        .par_iter()
        .map(|t| {
            let bc = t.bc.condition();
            let y0 = random_trig_initial(grid, &bc, cfg.seed.wrapping_add(t.seed_offset), cfg.scan.modes, cfg.scan.amplitude)?;
            let sc = SolveConfig { coeffs, bc, scheme: cfg.solve.scheme, source: None };
            Ok((t.bc, solve(&y0, &sc, grid)?.field))
        })
        .collect()
}

fn applies(v: Variant, bc: BcKind) -> bool {
    match v {
        Variant::Interior => true,
        Variant::Boundary | Variant::LinearDirichlet => bc == BcKind::Dirichlet,
        Variant::LinearNeumann => bc == BcKind::Neumann,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanOutput {
    pub summaries: Vec<SuiteSummary>,
    /// Least scanned μ from which every larger μ has a stabilization threshold.
    pub empirical_mu1: Vec<(Variant, Option<f64>)>,
    pub any_nonpositive: bool,
}

/// Runs the scan of `cfg` and returns per-trajectory cells and per-μ summaries.
pub fn carleman_suite(cfg: &RunConfig) -> Result<(Vec<(usize, Variant, Vec<ScanCell>)>, ScanOutput)> {
    let grid = cfg.grid()?;
    let coeffs = cfg.coeffs();
    let trajs = scan_trajectories(cfg, &grid)?;
    let mut cells = Vec::new();
    for (idx, (bc, y)) in trajs.iter().enumerate() {
        let prep = Prepared::new(y, &grid, &coeffs, bc.condition().laplacian_bc())?;
        for &v in &cfg.scan.variants {
            if applies(v, *bc) {
                cells.push((idx, v, lambda_scan(&prep, v, &cfg.scan.lambdas, &cfg.scan.mus)));
            }
        }
    }
    let mut summaries = Vec::new();
    let mut mu1 = Vec::new();
    for &v in &cfg.scan.variants {
        let scans: Vec<Vec<ScanCell>> = cells.iter().filter(|c| c.1 == v).map(|c| c.2.clone()).collect();
        if scans.is_empty() {
            continue;
        }
        let per_mu: Vec<SuiteSummary> = cfg.scan.mus.iter().map(|&mu| summarize_suite(v, mu, &cfg.scan.lambdas, &scans)).collect();
        let mut m = None;
        for s in per_mu.iter().rev() {
            if s.threshold.is_some() && s.all_ratios_positive {
                m = Some(s.mu);
            } else {
                break;
            }
        }
        mu1.push((v, m));
        summaries.extend(per_mu);
    }
    let any_nonpositive = cells.iter().flat_map(|c| &c.2).any(|cell| {
        cell.report.as_ref().and_then(|r| r.ratio).is_some_and(|r| !(r > 0.0 && r.is_finite()))
    });
    Ok((cells, ScanOutput { summaries, empirical_mu1: mu1, any_nonpositive }))
}

pub fn carleman_scan(cfg: &RunConfig, root: &Path) -> Result<Outcome> {
    let (cells, out) = carleman_suite(cfg)?;
    let dir = run_dir(root, cfg, "carleman-scan")?;
    let mut names: Vec<&str> = Vec::new();
    for v in &cfg.scan.variants {
        for n in v.lhs_names().iter().chain(v.rhs_names()) {
            if !names.contains(n) {
                names.push(n);
            }
        }
    }
    let mut w = csv_writer(&dir.join("scan.csv"))?;
    let mut header = vec!["trajectory", "lambda", "mu", "variant", "lhs_total", "rhs_total", "ratio", "log_scale", "note"];
    header.extend(&names);
    w.write_record(&header).map_err(csv_err)?;
    for (idx, v, scan) in &cells {
        for cell in scan {
            let mut row = vec![idx.to_string(), cell.lambda.to_string(), cell.mu.to_string(), v.name().to_string()];
            match &cell.report {
                Some(r) => {
                    row.push(r.lhs_total.to_string());
                    row.push(r.rhs_total.to_string());
                    row.push(r.ratio.map(|x| x.to_string()).unwrap_or_default());
                    row.push(r.log_scale.to_string());
                }
                None => row.extend(std::iter::repeat_n(String::new(), 4)),
            }
            row.push(cell.note.clone().unwrap_or_default());
            for n in &names {
                let val = cell.report.as_ref().and_then(|r| r.term(n));
                row.push(val.map(|x| x.to_string()).unwrap_or_default());
            }
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush()?;
    let pass = !out.any_nonpositive && out.summaries.iter().all(|s| s.all_ratios_positive);
    write_json(&dir.join("summary.json"), &json!({"command": "carleman-scan", "config": cfg, "scan": out, "pass": pass}))?;
    let msg = out
        .empirical_mu1
        .iter()
        .map(|(v, m)| format!("{}: mu1 = {}", v.name(), m.map(|m| m.to_string()).unwrap_or_else(|| "none".into())))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(Outcome { pass, dir, message: msg })
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityChecks {
    /// `(observation, ε, max/min c_emp over δ)`.
    pub spreads: Vec<(Observation, f64, Option<f64>)>,
    pub all_finite: bool,
    pub lhs_monotone_in_epsilon: bool,
    pub identical_pair_degenerate: bool,
    pub pass: bool,
}

pub fn stability_checks(reports: &[StabilityReport], obs: &[Observation], epsilons: &[f64], deltas: &[f64], t_final: f64, max_spread: f64) -> StabilityChecks {
    let mut spreads = Vec::new();
    let mut ok_spread = true;
    for &o in obs {
        for &e in epsilons {
            let eps = e * t_final;
            let vals: Vec<Option<f64>> = reports
                .iter()
                .filter(|r| r.variant == o && r.epsilon == eps && r.perturbation_scale > 0.0)
                .map(|r| r.c_emp)
                .collect();
            let sp = spread(&vals);
            ok_spread &= sp.is_some_and(|s| s <= max_spread);
            spreads.push((o, eps, sp));
        }
    }
    let all_finite = reports.iter().filter(|r| r.perturbation_scale > 0.0).all(|r| r.c_emp.is_some_and(f64::is_finite));
    let mut monotone = true;
    for &o in obs {
        for &d in deltas.iter().chain(&[0.0]) {
            let mut rows: Vec<&StabilityReport> = reports.iter().filter(|r| r.variant == o && r.perturbation_scale == d).collect();
            rows.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
            monotone &= rows.windows(2).all(|w| w[1].lhs <= w[0].lhs);
        }
    }
    let degenerate = reports.iter().filter(|r| r.perturbation_scale == 0.0).all(|r| r.degenerate);
    StabilityChecks {
        pass: ok_spread && all_finite && monotone && degenerate,
        spreads,
        all_finite,
        lhs_monotone_in_epsilon: monotone,
        identical_pair_degenerate: degenerate,
    }
}

pub fn stability_cmd(cfg: &RunConfig, root: &Path) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let s = &cfg.stability;
    let sc = SolveConfig { coeffs: cfg.coeffs(), bc: s.bc.condition(), scheme: cfg.solve.scheme, source: None };
    let suite = SuiteConfig {
        seed: cfg.seed,
        deltas: s.deltas.clone(),
        epsilons: s.epsilons.clone(),
        background_l6: s.background_l6,
        background_modes: s.background_modes,
        perturbation_modes: s.perturbation_modes,
    };
    let reports = perturbation_suite(&grid, &sc, &suite, &s.observations)?;
    let checks = stability_checks(&reports, &s.observations, &s.epsilons, &s.deltas, cfg.t_final, s.max_spread);
    let dir = run_dir(root, cfg, "stability")?;
    let mut w = csv_writer(&dir.join("stability.csv"))?;
    w.write_record(["delta", "epsilon", "lhs", "rhs_obs", "c_u2", "c_emp", "c_u1", "c_emp_u1", "variant", "degenerate"])
        .map_err(csv_err)?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in &reports {
        let variant = match r.variant {
            Observation::Interior => "interior",
            Observation::Boundary => "boundary",
        };
        w.write_record([
            r.perturbation_scale.to_string(),
            r.epsilon.to_string(),
            r.lhs.to_string(),
            r.rhs_obs.to_string(),
            r.c_u2.to_string(),
            opt(r.c_emp),
            r.c_u1.to_string(),
            opt(r.c_emp_u1),
            variant.to_string(),
            r.degenerate.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    write_json(&dir.join("summary.json"), &json!({"command": "stability", "config": cfg, "checks": checks, "reports": reports}))?;
    let worst = checks.spreads.iter().filter_map(|s| s.2).fold(0.0, f64::max);
    Ok(Outcome { pass: checks.pass, dir, message: format!("largest c_emp spread over delta: {worst:.3}") })
}

#[derive(Clone, Debug, Serialize)]
pub struct WeightChecks {
    pub admissibility: Vec<(String, AdmissibilityReport)>,
    pub derivative_error: Vec<(String, f64)>,
    pub monotonicity: Vec<(String, MonotonicityReport)>,
    pub pass: bool,
}

/// The three built-in constructions: `ψ₁` on the square and on the disk,
/// and `ψ₂` on the square.
pub fn weight_checks(cfg: &RunConfig) -> Result<WeightChecks> {
    let w = &cfg.weights;
    let r = cfg.domain.omega_radius;
    let cases = [
        ("square_psi1", DomainSpec::unit_square([0.5, 0.5], r), PsiKind::Psi1, Family::J1Interior),
        ("disk_psi1", DomainSpec::unit_disk([0.0, 0.0], r), PsiKind::Psi1, Family::J1Interior),
        ("square_psi2", DomainSpec::unit_square([0.5, 0.5], r), PsiKind::Psi2, Family::J2Boundary),
    ];
    let n = cfg.n.min(64);
    let mut out = WeightChecks { admissibility: vec![], derivative_error: vec![], monotonicity: vec![], pass: true };
    for (name, spec, which, family) in cases {
        let grid = build_grid(spec, n, n, cfg.nt, cfg.t_final)?;
        let params = CarlemanParams::new(w.lambda, w.mu, cfg.t_final, family)?;
        let adm = verify_psi_admissibility(&spec, which, &grid);
        let pts = sample_points(&grid);
        let err = derivative_check(&params, &spec, which, &pts)?;
        let mono = time_monotonicity(&params, &grid, which, w.epsilon * cfg.t_final)?;
        out.pass &= adm.pass && err <= 1e-6 && mono.pass;
        out.admissibility.push((name.into(), adm));
        out.derivative_error.push((name.into(), err));
        out.monotonicity.push((name.into(), mono));
    }
    Ok(out)
}

pub fn check_weights(cfg: &RunConfig, root: &Path) -> Result<Outcome> {
    let checks = weight_checks(cfg)?;
    let dir = run_dir(root, cfg, "check-weights")?;
    let grid = cfg.grid()?;
    if cfg.domain.shape == Shape::UnitSquare || cfg.domain.shape == Shape::UnitDisk {
        let params = CarlemanParams::new(cfg.weights.lambda, cfg.weights.mu, cfg.t_final, Family::J1Interior)?;
        let env = weight_envelope(&params, &grid, PsiKind::Psi1)?;
        env.write_csv(&grid, BufWriter::new(File::create(dir.join("envelope.csv"))?))?;
    }
    write_json(
        &dir.join("summary.json"),
        &json!({
            "command": "check-weights",
            "config": cfg,
            "psi_sup": {"square_psi1": psi_sup(Shape::UnitSquare, PsiKind::Psi1), "disk_psi1": psi_sup(Shape::UnitDisk, PsiKind::Psi1), "square_psi2": psi_sup(Shape::UnitSquare, PsiKind::Psi2)},
            "checks": checks,
        }),
    )?;
    let worst = checks.derivative_error.iter().map(|d| d.1).fold(0.0, f64::max);
    Ok(Outcome { pass: checks.pass, dir, message: format!("worst derivative disagreement {worst:.3e}") })
}
