//! Pointwise weighted identities for `v = θ y`, evaluated on closed-form
//! test fields and checked at interior sample points.

mod field;
mod jet;
mod terms;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use field::{AnalyticTestField, Factor, FieldSample, Term, SELF_CHECK_TOL};
pub use jet::{Cx, Jet, Real};
pub use terms::{eval_point, AuxChoice, AuxValues, FluxForm, IdentityTerms, PointData, Sides, StepOne, ZeroPsi};

use crate::error::{Error, Result};
use crate::grid::{DomainSpec, SpaceTimeGrid};
use crate::operator::GLCoeffs;
use crate::weights::{eval_psi, eval_weight, psi_sup, CarlemanParams};
use terms::{linear_sides, nonlinear_sides, space_flux, time_flux, FluxIn};

pub const AUX_TOL: f64 = 1e-10;
pub const IDENTITY_TOL: f64 = 1e-6;
pub const MIN_FD_ORDER: f64 = 3.0;
/// Step multipliers of the finite-difference oracle; each halves the last.
pub const FD_LEVELS: [f64; 3] = [0.4, 0.2, 0.1];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxKind {
    #[default]
    StepOne,
    ZeroPsi,
}

impl AuxKind {
    pub fn choice(self) -> &'static dyn AuxChoice {
        match self {
            AuxKind::StepOne => &StepOne,
            AuxKind::ZeroPsi => &ZeroPsi,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Identity {
    Nonlinear,
    Linear,
}

/// Fixed data of an identity evaluation.
#[derive(Clone, Copy)]
pub struct Setup<'a> {
    pub spec: &'a DomainSpec,
    pub params: &'a CarlemanParams,
    pub coeffs: &'a GLCoeffs,
    pub aux: &'a dyn AuxChoice,
    pub form: FluxForm,
}

impl Setup<'_> {
    pub fn point(&self, field: &AnalyticTestField, t: f64, x: [f64; 2]) -> Result<PointData> {
        let which = self.params.family.psi();
        let psi = eval_psi(self.spec, which, x)?;
        let w = eval_weight(self.params, &psi, psi_sup(self.spec.shape, which), t)?;
        let aux = self.aux.eval(self.params, &w, &psi);
        let gap = (aux.psi + aux.phi + w.lap_ell).abs();
        let scale = aux.psi.abs().max(aux.phi.abs()).max(w.lap_ell.abs());
        if gap > AUX_TOL * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidArgument(format!(
                "auxiliary choice '{}' violates Psi + Phi = -lap(ell): gap {gap:.3e} at t={t}, x={x:?}",
                self.aux.name()
            )));
        }
        Ok(PointData { f: field.eval(t, x), w, psi, aux })
    }
}

/// All named expressions at `(t, x)`.
pub fn eval_terms(setup: &Setup, field: &AnalyticTestField, t: f64, x: [f64; 2]) -> Result<IdentityTerms> {
    let p = setup.point(field, t, x)?;
    Ok(eval_point(setup.coeffs, setup.params, &p, setup.form))
}

/// `(∂t time flux, ∇·space flux)` by forward-mode differentiation.
pub fn analytic_transport(setup: &Setup, p: &PointData, id: Identity) -> (f64, f64) {
    let nl = id == Identity::Nonlinear;
    let j = FluxIn::jets(p);
    let m = time_flux(setup.coeffs, &j, nl);
    let h = space_flux(setup.coeffs, &j, setup.form, nl);
    (m.d[0], h[0].d[1] + h[1].d[2])
}

fn fd4(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (f(-2.0 * h) - f(2.0 * h) + 8.0 * (f(h) - f(-h))) / (12.0 * h)
}

/// Same as [`analytic_transport`] but by fourth-order central differences of
/// the plain fluxes, with every input re-evaluated at the shifted points.
pub fn fd_transport(
    setup: &Setup,
    field: &AnalyticTestField,
    t: f64,
    x: [f64; 2],
    steps: (f64, f64),
    id: Identity,
) -> Result<(f64, f64)> {
    let nl = id == Identity::Nonlinear;
    let at = |t: f64, x: [f64; 2]| -> Result<FluxIn<f64>> { Ok(FluxIn::plain(&setup.point(field, t, x)?)) };
    // Evaluate lazily but surface the first error.
    let err = std::cell::RefCell::new(None);
    let grab = |r: Result<f64>| match r {
        Ok(v) => v,
        Err(e) => {
            err.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let dt = fd4(|d| grab(at(t + d, x).map(|p| time_flux(setup.coeffs, &p, nl))), steps.0);
    let d1 = fd4(|d| grab(at(t, [x[0] + d, x[1]]).map(|p| space_flux(setup.coeffs, &p, setup.form, nl)[0])), steps.1);
    let d2 = fd4(|d| grab(at(t, [x[0], x[1] + d]).map(|p| space_flux(setup.coeffs, &p, setup.form, nl)[1])), steps.1);
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    Ok((dt, d1 + d2))
}

/// Base finite-difference steps `(δt, δx)` at a point, sized from the
/// oscillation rates of the field and the weight.
pub fn fd_base_steps(setup: &Setup, field: &AnalyticTestField, p: &PointData, t: f64) -> (f64, f64) {
    let (rt, rx) = field.rates();
    let t_final = setup.params.t_final;
    let gl = p.w.grad_ell[0].hypot(p.w.grad_ell[1]);
    let gp = p.psi.grad_psi[0].hypot(p.psi.grad_psi[1]);
    let mu = setup.params.mu;
    let a_t = 1.0 + 4.0 * rt + 2.0 * p.w.ell_t.abs() + 4.0 / t.min(t_final - t);
    let a_x = 1.0 + 4.0 * rx + 2.0 * gl + 2.0 * mu * gp + 2.0 * mu;
    let cap = 0.02 / FD_LEVELS[0];
    ((1.0 / a_t).min(cap), (1.0 / a_x).min(cap))
}

/// Optional deliberate damage used to show that the check is sensitive.
#[derive(Clone, Debug, Default)]
pub struct Corruption {
    /// Right-hand side summand whose sign is flipped.
    pub flip_rhs_term: Option<String>,
}

fn sides(setup: &Setup, p: &PointData, id: Identity, transport: (f64, f64), corrupt: &Corruption) -> Result<Sides> {
    let t = eval_point(setup.coeffs, setup.params, p, setup.form);
    let mut s = match id {
        Identity::Nonlinear => nonlinear_sides(setup.coeffs, &t, p, transport.0, transport.1),
        Identity::Linear => linear_sides(setup.coeffs, &t, p, transport.0, transport.1),
    };
    if let Some(name) = &corrupt.flip_rhs_term {
        let term = s
            .rhs
            .iter_mut()
            .find(|t| t.0 == name.as_str())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown right-hand side term '{name}'")))?;
        term.1 = -term.1;
    }
    Ok(s)
}

/// Interior points `(t, x)`: grid times in `[0.2T, 0.8T]` and grid nodes at
/// distance at least 0.1 from the boundary, thinned to a bounded count.
pub fn sample_points(grid: &SpaceTimeGrid) -> Vec<(f64, [f64; 2])> {
    let t_final = grid.t_final;
    let times: Vec<f64> = grid.times().into_iter().filter(|&t| t >= 0.2 * t_final - 1e-12 && t <= 0.8 * t_final + 1e-12).collect();
    let stride = |n: usize, cap: usize| n.div_ceil(cap).max(1);
    let ts = stride(times.len(), 9);
    let (nx, ny) = grid.dims();
    let (sx, sy) = (stride(nx, 12), stride(ny, 12));
    let mut nodes = Vec::new();
    for i in (0..nx).step_by(sx) {
        for j in (0..ny).step_by(sy) {
            let x = grid.x(i, j);
            if grid.is_interior(i, j) && grid.spec.dist_to_boundary(x) >= 0.1 {
                nodes.push(x);
            }
        }
    }
    times.iter().step_by(ts).flat_map(|&t| nodes.iter().map(move |&x| (t, x))).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct TermMagnitude {
    pub name: String,
    pub max_abs: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityReport {
    pub identity: Identity,
    pub n_points: usize,
    pub max_rel: f64,
    pub l2_rel: f64,
    pub worst_point: (f64, [f64; 2]),
    /// Max relative residual with finite-difference transport, per step level.
    pub fd_max_rel: Vec<f64>,
    pub fd_levels: Vec<f64>,
    /// Observed convergence order of the finite-difference path.
    pub fd_order: f64,
    pub terms: Vec<TermMagnitude>,
    pub pass: bool,
}

#[derive(Clone, Debug, Default)]
pub struct ResidualOptions {
    pub corruption: Corruption,
    /// Skip the finite-difference oracle.
    pub analytic_only: bool,
}

struct PointResult {
    res: f64,
    scale: f64,
    fd_res: Vec<f64>,
    terms: Vec<(&'static str, f64)>,
}

fn eval_sample(
    setup: &Setup,
    field: &AnalyticTestField,
    id: Identity,
    opts: &ResidualOptions,
    t: f64,
    x: [f64; 2],
) -> Result<PointResult> {
    let p = setup.point(field, t, x)?;
    let s = sides(setup, &p, id, analytic_transport(setup, &p, id), &opts.corruption)?;
    if !s.is_finite() {
        return Err(Error::NonFinite { t });
    }
    let mut fd_res = Vec::new();
    if !opts.analytic_only {
        let (bt, bx) = fd_base_steps(setup, field, &p, t);
        for k in FD_LEVELS {
            let tr = fd_transport(setup, field, t, x, (k * bt, k * bx), id)?;
            fd_res.push(sides(setup, &p, id, tr, &opts.corruption)?.residual().abs());
        }
    }
    let terms = s.lhs.iter().map(|t| (t.0, t.1)).chain(s.rhs.iter().map(|t| (t.0, t.1))).collect();
    Ok(PointResult { res: s.residual().abs(), scale: s.scale(), fd_res, terms })
}

fn rel(r: f64, s: f64) -> f64 {
    if r == 0.0 {
        0.0
    } else {
        r / s
    }
}

fn run(
    setup: &Setup,
    field: &AnalyticTestField,
    grid: &SpaceTimeGrid,
    id: Identity,
    opts: &ResidualOptions,
) -> Result<IdentityReport> {
    if (grid.t_final - setup.params.t_final).abs() > 1e-12 * grid.t_final {
        return Err(Error::InvalidArgument("grid and weight use different final times".into()));
    }
    let pts = sample_points(grid);
    if pts.is_empty() {
        return Err(Error::InvalidArgument("no interior sample points".into()));
    }
    let results: Vec<PointResult> =
        pts.par_iter().map(|&(t, x)| eval_sample(setup, field, id, opts, t, x)).collect::<Result<_>>()?;

    let mut max_rel = 0.0f64;
    let mut worst = pts[0];
    let (mut num, mut den) = (0.0, 0.0);
    let nlev = if opts.analytic_only { 0 } else { FD_LEVELS.len() };
    let mut fd_max_rel = vec![0.0f64; nlev];
    let mut terms: Vec<TermMagnitude> = Vec::new();
    for (r, &pt) in results.iter().zip(&pts) {
        let e = rel(r.res, r.scale);
        if e > max_rel {
            max_rel = e;
            worst = pt;
        }
        num += r.res * r.res;
        den += r.scale * r.scale;
        for (m, &fr) in fd_max_rel.iter_mut().zip(&r.fd_res) {
            *m = m.max(rel(fr, r.scale));
        }
        for &(name, v) in &r.terms {
            match terms.iter_mut().find(|t| t.name == name) {
                Some(t) => t.max_abs = t.max_abs.max(v.abs()),
                None => terms.push(TermMagnitude { name: name.to_string(), max_abs: v.abs() }),
            }
        }
    }
    let l2_rel = if num == 0.0 { 0.0 } else { (num / den).sqrt() };
    let fd_order = fd_observed_order(&fd_max_rel);
    let pass = max_rel <= IDENTITY_TOL && (opts.analytic_only || fd_order >= MIN_FD_ORDER);
    Ok(IdentityReport {
        identity: id,
        n_points: pts.len(),
        max_rel,
        l2_rel,
        worst_point: worst,
        fd_max_rel,
        fd_levels: FD_LEVELS[..nlev].to_vec(),
        fd_order,
        terms,
        pass,
    })
}

/// Smallest observed order over consecutive step halvings. An exactly zero
/// error at every level counts as exact (infinite order).
pub fn fd_observed_order(errs: &[f64]) -> f64 {
    if errs.iter().all(|&e| e == 0.0) {
        return f64::INFINITY;
    }
    errs.windows(2).map(|w| crate::numerics::observed_order(w[0], w[1], 2.0)).fold(f64::INFINITY, f64::min)
}

pub fn identity_residual_nonlinear(
    setup: &Setup,
    field: &AnalyticTestField,
    grid: &SpaceTimeGrid,
    opts: &ResidualOptions,
) -> Result<IdentityReport> {
    run(setup, field, grid, Identity::Nonlinear, opts)
}

pub fn identity_residual_linear(
    setup: &Setup,
    field: &AnalyticTestField,
    grid: &SpaceTimeGrid,
    opts: &ResidualOptions,
) -> Result<IdentityReport> {
    run(setup, field, grid, Identity::Linear, opts)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TCoefficientReport {
    pub value: f64,
    pub bound: f64,
    pub margin: f64,
    pub holds: bool,
}

/// `𝒯` against its lower bound `(5/32) α2² (2 - |γ1|²)`.
pub fn t_coefficient_positivity(coeffs: &GLCoeffs) -> TCoefficientReport {
    let value = coeffs.t_positivity();
    let bound = coeffs.t_positivity_bound();
    TCoefficientReport { value, bound, margin: value - bound, holds: value >= bound && bound > 0.0 }
}
