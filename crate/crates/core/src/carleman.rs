//! Both sides of the interior and boundary Carleman inequalities (and their
//! cubic-free linear counterparts) evaluated on discrete trajectories.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    grad, integrate_q, integrate_sigma, laplacian, normal_derivative, time_derivative, ComplexField, Gamma0,
    LaplacianBc, NodeKind, Region, SpaceTimeField, SpaceTimeGrid,
};
use crate::numerics::exp_weighted;
use crate::operator::{apply_f_linear, apply_g, GLCoeffs};
use crate::weights::{boundary_weights, weight_envelope, CarlemanParams, Family};

/// Largest boundary trace accepted for the Dirichlet variants.
pub const DIRICHLET_TOL: f64 = 1e-10;
/// Relative change between successive λ below which a scan counts as settled.
pub const STABLE_CHANGE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Interior observation on `ω`, cubic operator.
    Interior,
    /// Boundary observation on `Σ`, cubic operator, Dirichlet data.
    Boundary,
    /// `∂t - (1+ib)Δ` with Neumann data, interior observation.
    LinearNeumann,
    /// `∂t - (1+ib)Δ` with Dirichlet data, boundary observation.
    LinearDirichlet,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Interior, Variant::Boundary, Variant::LinearNeumann, Variant::LinearDirichlet];

    pub fn family(self) -> Family {
        match self {
            Variant::Interior | Variant::LinearNeumann => Family::J1Interior,
            Variant::Boundary | Variant::LinearDirichlet => Family::J2Boundary,
        }
    }

    pub fn is_linear(self) -> bool {
        matches!(self, Variant::LinearNeumann | Variant::LinearDirichlet)
    }

    pub fn needs_dirichlet(self) -> bool {
        self.family() == Family::J2Boundary
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Interior => "interior",
            Variant::Boundary => "boundary",
            Variant::LinearNeumann => "linear_neumann",
            Variant::LinearDirichlet => "linear_dirichlet",
        }
    }

    pub fn lhs_names(self) -> &'static [&'static str] {
        if self.is_linear() {
            &["energy", "weighted_l2", "weighted_grad"]
        } else {
            &["energy", "sextic", "mixed", "weighted_l2", "weighted_grad", "weighted_quartic"]
        }
    }

    pub fn rhs_names(self) -> &'static [&'static str] {
        &["source", "observation"]
    }
}

/// Pointwise derivatives of a trajectory that do not depend on the weight.
pub struct Prepared<'g> {
    grid: &'g SpaceTimeGrid,
    y: SpaceTimeField,
    yt: SpaceTimeField,
    lap: SpaceTimeField,
    grad: Vec<[ComplexField; 2]>,
    source: SpaceTimeField,
    linear_source: SpaceTimeField,
    dn: Vec<Vec<f64>>,
    dirichlet_trace: f64,
}

impl<'g> Prepared<'g> {
    pub fn new(y: &SpaceTimeField, grid: &'g SpaceTimeGrid, coeffs: &GLCoeffs, bc: LaplacianBc) -> Result<Self> {
        y.check_grid(grid)?;
        if !y.is_finite() {
            return Err(Error::NonFinite { t: f64::NAN });
        }
        let yt = time_derivative(y, grid)?;
        let lap = SpaceTimeField {
            slices: y.slices.par_iter().map(|s| laplacian(s, grid, bc)).collect::<Result<_>>()?,
        };
        let grads = y.slices.par_iter().map(|s| grad(s, grid)).collect::<Result<Vec<_>>>()?;
        let source = apply_g(y, grid, coeffs, bc)?;
        let linear_source = apply_f_linear(y, grid, coeffs, bc)?;
        let dn = y
            .slices
            .iter()
            .map(|s| Ok(normal_derivative(s, grid)?.iter().map(|d| d.norm_sqr()).collect()))
            .collect::<Result<Vec<_>>>()?;
        let mut trace = 0.0f64;
        let bmask = grid.boundary_mask();
        for s in &y.slices {
            for (v, &b) in s.values.iter().zip(&bmask) {
                if b {
                    trace = trace.max(v.norm());
                }
            }
            trace = s.trace.iter().fold(trace, |m, v| m.max(v.norm()));
        }
        Ok(Self { grid, y: y.clone(), yt, lap, grad: grads, source, linear_source, dn, dirichlet_trace: trace })
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        self.grid
    }

    /// Largest `|y|` on the boundary over all time levels.
    pub fn dirichlet_trace(&self) -> f64 {
        self.dirichlet_trace
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CarlemanReport {
    pub variant: Variant,
    pub lambda: f64,
    pub mu: f64,
    /// Every total is stored divided by `exp(log_scale)`, the largest `θ²` on the grid.
    pub log_scale: f64,
    pub lhs_total: f64,
    pub rhs_total: f64,
    pub lhs_breakdown: Vec<(String, f64)>,
    pub rhs_breakdown: Vec<(String, f64)>,
    /// `rhs_total / lhs_total`; `None` when both sides vanish or are not finite.
    pub ratio: Option<f64>,
    /// Set when the signed boundary observation integrates to a negative value.
    pub observation_negative: bool,
}

impl CarlemanReport {
    /// `lhs / rhs`, the constant this configuration needs.
    pub fn constant(&self) -> Option<f64> {
        self.ratio.filter(|&r| r > 0.0).map(|r| 1.0 / r)
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.lhs_breakdown.iter().chain(&self.rhs_breakdown).find(|t| t.0 == name).map(|t| t.1)
    }
}

fn zero_slices(grid: &SpaceTimeGrid, n: usize) -> Vec<Vec<Array2<f64>>> {
    (0..n).map(|_| vec![Array2::zeros(grid.dims()); grid.nt + 1]).collect()
}

/// Both sides of the inequality for one `(λ, μ)`.
pub fn evaluate(prep: &Prepared, variant: Variant, lambda: f64, mu: f64) -> Result<CarlemanReport> {
    let grid = prep.grid;
    if variant.needs_dirichlet() && prep.dirichlet_trace > DIRICHLET_TOL {
        return Err(Error::InvalidArgument(format!(
            "{} variant needs zero Dirichlet data; boundary trace is {:.3e}",
            variant.name(),
            prep.dirichlet_trace
        )));
    }
    let params = CarlemanParams::new(lambda, mu, grid.t_final, variant.family())?;
    let which = variant.family().psi();
    let env = weight_envelope(&params, grid, which)?;
    let bw = if variant.needs_dirichlet() { Some(boundary_weights(&params, grid, which)?) } else { None };

    let usable = |i: usize, j: usize| grid.kind[[i, j]] != NodeKind::Exterior && !grid.corner_mask[[i, j]];
    let mut shift = f64::NEG_INFINITY;
    for s in &env.slices {
        for ((i, j), w) in s.indexed_iter() {
            if usable(i, j) {
                shift = shift.max(2.0 * w.log_theta);
            }
        }
    }
    if let Some(bw) = &bw {
        for s in bw {
            for (w, _) in s {
                shift = shift.max(2.0 * w.log_theta);
            }
        }
    }
    if !shift.is_finite() {
        return Err(Error::InvalidArgument("weight vanishes on the whole grid".into()));
    }

    let names = variant.lhs_names();
    let mut lhs = zero_slices(grid, names.len());
    let mut src = vec![Array2::zeros(grid.dims()); grid.nt + 1];
    let mut obs = vec![Array2::zeros(grid.dims()); grid.nt + 1];
    let (l, m) = (lambda, mu);
    let linear = variant.is_linear();
    let source = if linear { &prep.linear_source } else { &prep.source };
    for k in 1..grid.nt {
        for ((i, j), w) in env.slices[k].indexed_iter() {
            if !usable(i, j) {
                continue;
            }
            let lt = 2.0 * w.log_theta - shift;
            let phi = w.phi;
            let y2 = prep.y.slices[k].values[[i, j]].norm_sqr();
            let g2 = prep.grad[k][0].values[[i, j]].norm_sqr() + prep.grad[k][1].values[[i, j]].norm_sqr();
            let yt2 = prep.yt.slices[k].values[[i, j]].norm_sqr();
            let lap2 = prep.lap.slices[k].values[[i, j]].norm_sqr();
            let mut vals = vec![(yt2 + lap2) / (l * phi)];
            if !linear {
                vals.push(y2 * y2 * y2);
                vals.push(y2 * g2);
            }
            vals.push(l.powi(3) * m.powi(4) * phi.powi(3) * y2);
            vals.push(l * m * m * phi * g2);
            if !linear {
                vals.push(l * l * m * m * phi * phi * y2 * y2);
            }
            for (slot, v) in lhs.iter_mut().zip(vals) {
                slot[k][[i, j]] = exp_weighted(lt, v);
            }
            src[k][[i, j]] = exp_weighted(lt, source.slices[k].values[[i, j]].norm_sqr());
            if bw.is_none() {
                let q = if linear { 0.0 } else { y2 * y2 };
                obs[k][[i, j]] = exp_weighted(lt, l * l * m * m * phi * phi * (l * m * m * phi * y2 + q));
            }
        }
    }

    let mut lhs_breakdown = Vec::with_capacity(names.len());
    for (name, g) in names.iter().zip(&lhs) {
        lhs_breakdown.push((name.to_string(), integrate_q(g, grid, Region::Q)?));
    }
    let source_total = integrate_q(&src, grid, Region::Q)?;
    let obs_total = match &bw {
        None => integrate_q(&obs, grid, Region::QOmega)?,
        Some(bw) => {
            // Signed: ∂ν ψ₂ changes sign around the boundary.
            let mut pos = Vec::with_capacity(bw.len());
            let mut neg = Vec::with_capacity(bw.len());
            for (k, s) in bw.iter().enumerate() {
                let mut p = vec![0.0; s.len()];
                let mut n = vec![0.0; s.len()];
                for (b, ((w, psi), bp)) in s.iter().zip(&grid.boundary).enumerate() {
                    if bp.corner || k == 0 || k == grid.nt {
                        continue;
                    }
                    let dpsi = psi.grad_psi[0] * bp.normal[0] + psi.grad_psi[1] * bp.normal[1];
                    let v = exp_weighted(2.0 * w.log_theta - shift, l * m * w.phi * dpsi.abs() * prep.dn[k][b]);
                    if dpsi >= 0.0 {
                        p[b] = v;
                    } else {
                        n[b] = v;
                    }
                }
                pos.push(p);
                neg.push(n);
            }
            integrate_sigma(&pos, grid, Gamma0::FullBoundary)? - integrate_sigma(&neg, grid, Gamma0::FullBoundary)?
        }
    };
    let lhs_total: f64 = lhs_breakdown.iter().map(|t| t.1).sum();
    let rhs_total = source_total + obs_total;
    let ratio = (lhs_total > 0.0 && rhs_total.is_finite() && lhs_total.is_finite()).then(|| rhs_total / lhs_total);
    Ok(CarlemanReport {
        variant,
        lambda,
        mu,
        log_scale: shift,
        lhs_total,
        rhs_total,
        lhs_breakdown,
        rhs_breakdown: vec![("source".into(), source_total), ("observation".into(), obs_total)],
        ratio,
        observation_negative: obs_total < 0.0,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanCell {
    pub lambda: f64,
    pub mu: f64,
    /// `None` when the cell could not be evaluated (see `note`).
    pub report: Option<CarlemanReport>,
    pub note: Option<String>,
}

/// Evaluates every `(λ, μ)` pair; failures are recorded per cell.
pub fn lambda_scan(prep: &Prepared, variant: Variant, lambdas: &[f64], mus: &[f64]) -> Vec<ScanCell> {
    let cells: Vec<(f64, f64)> = mus.iter().flat_map(|&m| lambdas.iter().map(move |&l| (l, m))).collect();
    cells
        .par_iter()
        .map(|&(lambda, mu)| match evaluate(prep, variant, lambda, mu) {
            Ok(r) if r.ratio.is_some() => ScanCell { lambda, mu, report: Some(r), note: None },
            Ok(r) => ScanCell { lambda, mu, report: Some(r), note: Some("degenerate: both sides vanish".into()) },
            Err(e) => ScanCell { lambda, mu, report: None, note: Some(format!("skipped: {e}")) },
        })
        .collect()
}

/// Least `λ` from which every successive relative change of `values` stays
/// within [`STABLE_CHANGE`]. Needs at least two trailing values.
pub fn stabilization_threshold(lambdas: &[f64], values: &[Option<f64>]) -> Option<f64> {
    let n = lambdas.len().min(values.len());
    if n < 2 {
        return None;
    }
    let ok = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(a), Some(b)) if a.is_finite() && b.is_finite() && a > 0.0 => (b / a - 1.0).abs() <= STABLE_CHANGE,
        _ => false,
    };
    let mut start = None;
    for i in (0..n - 1).rev() {
        if ok(values[i], values[i + 1]) {
            start = Some(i);
        } else {
            break;
        }
    }
    start.map(|i| lambdas[i])
}

/// Per-μ summary over several trajectories: the worst constant `max lhs/rhs`
/// at each λ and the resulting threshold.
#[derive(Clone, Debug, Serialize)]
pub struct SuiteSummary {
    pub variant: Variant,
    pub mu: f64,
    pub lambdas: Vec<f64>,
    pub worst_constant: Vec<Option<f64>>,
    pub min_ratio: Vec<Option<f64>>,
    pub threshold: Option<f64>,
    /// Relative change of the worst constant across the last two λ.
    pub last_change: Option<f64>,
    pub all_ratios_positive: bool,
}

pub fn summarize_suite(variant: Variant, mu: f64, lambdas: &[f64], scans: &[Vec<ScanCell>]) -> SuiteSummary {
    let mut worst = Vec::with_capacity(lambdas.len());
    let mut min_ratio = Vec::with_capacity(lambdas.len());
    let mut positive = true;
    for &l in lambdas {
        let mut w: Option<f64> = Some(0.0);
        let mut r: Option<f64> = Some(f64::INFINITY);
        for scan in scans {
            let cell = scan.iter().find(|c| c.lambda == l && c.mu == mu);
            let rep = cell.and_then(|c| c.report.as_ref());
            match rep.and_then(|r| r.ratio) {
                Some(ratio) if ratio > 0.0 && ratio.is_finite() => {
                    w = w.map(|w| w.max(1.0 / ratio));
                    r = r.map(|r| r.min(ratio));
                }
                _ => {
                    positive = false;
                    w = None;
                    r = None;
                }
            }
        }
        worst.push(w);
        min_ratio.push(r);
    }
    let n = worst.len();
    let last_change = (n >= 2)
        .then(|| match (worst[n - 2], worst[n - 1]) {
            (Some(a), Some(b)) if a > 0.0 => Some((b / a - 1.0).abs()),
            _ => None,
        })
        .flatten();
    SuiteSummary {
        variant,
        mu,
        lambdas: lambdas.to_vec(),
        threshold: stabilization_threshold(lambdas, &worst),
        worst_constant: worst,
        min_ratio,
        last_change,
        all_ratios_positive: positive,
    }
}
