//! Auxiliary functions `psi` and the exponential weight family
//! `phi = e^{mu psi} s(t)`, `rho = (e^{mu psi} - e^{2 mu |psi|}) s(t)`,
//! `ell = lambda rho`, `theta = e^ell` with `s(t) = 1 / (t (T - t))`.
//!
//! Every quantity is evaluated analytically. `theta` itself is never formed:
//! callers use `log_theta` and [`WeightSample::theta_sq_times`].

use std::io::Write;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Anchor, NodeKind, Shape, SpaceTimeGrid};
use crate::grid::DomainSpec;
use crate::numerics::exp_weighted;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiKind {
    /// Interior construction, critical point inside the observation ball.
    Psi1,
    /// Boundary construction `2 + x1`, observed boundary = whole boundary.
    Psi2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    J1Interior,
    J2Boundary,
}

impl Family {
    pub fn psi(self) -> PsiKind {
        match self {
            Family::J1Interior => PsiKind::Psi1,
            Family::J2Boundary => PsiKind::Psi2,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PsiSample {
    pub psi: f64,
    pub grad_psi: [f64; 2],
    pub hess_psi: [[f64; 2]; 2],
    pub lap_psi: f64,
}

/// Critical point of the interior construction.
pub fn psi1_critical_point(shape: Shape) -> [f64; 2] {
    match shape {
        Shape::UnitSquare => [0.5, 0.5],
        Shape::UnitDisk => [0.0, 0.0],
    }
}

/// Exact `sup |psi|` over the closed domain.
pub fn psi_sup(shape: Shape, which: PsiKind) -> f64 {
    match (which, shape) {
        (PsiKind::Psi1, Shape::UnitSquare) => 1.0 / 16.0,
        (PsiKind::Psi1, Shape::UnitDisk) => 1.0,
        (PsiKind::Psi2, _) => 3.0,
    }
}

fn psi_raw(shape: Shape, which: PsiKind, x: [f64; 2]) -> PsiSample {
    match (which, shape) {
        (PsiKind::Psi1, Shape::UnitSquare) => {
            let (p, q) = (x[0] * (1.0 - x[0]), x[1] * (1.0 - x[1]));
            let (dp, dq) = (1.0 - 2.0 * x[0], 1.0 - 2.0 * x[1]);
            let hess = [[-2.0 * q, dp * dq], [dp * dq, -2.0 * p]];
            PsiSample { psi: p * q, grad_psi: [dp * q, p * dq], hess_psi: hess, lap_psi: -2.0 * (p + q) }
        }
        (PsiKind::Psi1, Shape::UnitDisk) => PsiSample {
            psi: 1.0 - x[0] * x[0] - x[1] * x[1],
            grad_psi: [-2.0 * x[0], -2.0 * x[1]],
            hess_psi: [[-2.0, 0.0], [0.0, -2.0]],
            lap_psi: -4.0,
        },
        (PsiKind::Psi2, _) => PsiSample {
            psi: 2.0 + x[0],
            grad_psi: [1.0, 0.0],
            hess_psi: [[0.0; 2]; 2],
            lap_psi: 0.0,
        },
    }
}

/// Evaluates the built-in construction at `x`.
pub fn eval_psi(spec: &DomainSpec, which: PsiKind, x: [f64; 2]) -> Result<PsiSample> {
    if which == PsiKind::Psi1 && !spec.in_omega(psi1_critical_point(spec.shape)) {
        return Err(Error::InvalidDomain(format!(
            "the critical point {:?} of psi1 is not inside the observation ball",
            psi1_critical_point(spec.shape)
        )));
    }
    Ok(psi_raw(spec.shape, which, x))
}

#[derive(Clone, Debug, Serialize)]
pub struct AdmissibilityReport {
    pub which: PsiKind,
    pub min_psi_interior: f64,
    pub max_abs_psi_boundary: f64,
    pub min_grad_outside_omega: f64,
    pub critical_point_in_omega: bool,
    /// Clause name and verdict.
    pub clauses: Vec<(String, bool)>,
    pub pass: bool,
}

/// Scans grid nodes (and boundary samples) against the defining properties of
/// the construction. Square corners are skipped.
pub fn verify_psi_admissibility(spec: &DomainSpec, which: PsiKind, grid: &SpaceTimeGrid) -> AdmissibilityReport {
    let crit_in = spec.in_omega(psi1_critical_point(spec.shape));
    let mut min_int = f64::INFINITY;
    let mut min_grad = f64::INFINITY;
    let mut max_bnd: f64 = 0.0;
    let mut min_bnd = f64::INFINITY;
    for ((i, j), k) in grid.kind.indexed_iter() {
        if *k == NodeKind::Exterior || grid.corner_mask[[i, j]] {
            continue;
        }
        let x = grid.x(i, j);
        let p = psi_raw(spec.shape, which, x);
        let g = p.grad_psi[0].hypot(p.grad_psi[1]);
        if *k == NodeKind::Interior {
            min_int = min_int.min(p.psi);
        }
        if !spec.in_omega(x) {
            min_grad = min_grad.min(g);
        }
    }
    for b in &grid.boundary {
        if b.corner {
            continue;
        }
        let p = psi_raw(spec.shape, which, b.pos);
        max_bnd = max_bnd.max(p.psi.abs());
        min_bnd = min_bnd.min(p.psi);
        min_grad = min_grad.min(p.grad_psi[0].hypot(p.grad_psi[1]));
    }
    let clauses = match which {
        PsiKind::Psi1 => vec![
            ("psi > 0 in the domain".to_string(), min_int > 0.0),
            ("psi = 0 on the boundary".to_string(), max_bnd <= 1e-12),
            ("|grad psi| > 0 outside omega".to_string(), min_grad > 0.0),
            ("critical point inside omega".to_string(), crit_in),
        ],
        // The unobserved boundary part is empty, so its clauses hold vacuously.
        PsiKind::Psi2 => vec![
            ("psi > 0 on the closed domain".to_string(), min_int > 0.0 && min_bnd > 0.0),
            ("|grad psi| > 0 on the closed domain".to_string(), min_grad > 0.0),
            ("boundary clauses on the unobserved part (vacuous)".to_string(), true),
        ],
    };
    let pass = clauses.iter().all(|c| c.1);
    AdmissibilityReport {
        which,
        min_psi_interior: min_int,
        max_abs_psi_boundary: max_bnd,
        min_grad_outside_omega: min_grad,
        critical_point_in_omega: crit_in,
        clauses,
        pass,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarlemanParams {
    pub lambda: f64,
    pub mu: f64,
    pub t_final: f64,
    pub family: Family,
}

impl CarlemanParams {
    pub fn new(lambda: f64, mu: f64, t_final: f64, family: Family) -> Result<Self> {
        let p = Self { lambda, mu, t_final, family };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 1.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must exceed 1, got {}", self.lambda)));
        }
        if !(self.mu > 1.0) || !self.mu.is_finite() {
            return Err(Error::InvalidArgument(format!("mu must exceed 1, got {}", self.mu)));
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(Error::InvalidArgument(format!("T must be positive, got {}", self.t_final)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightSample {
    pub phi: f64,
    pub rho: f64,
    pub ell: f64,
    pub log_theta: f64,
    pub ell_t: f64,
    pub ell_tt: f64,
    pub grad_ell: [f64; 2],
    pub hess_ell: [[f64; 2]; 2],
    pub lap_ell: f64,
    pub grad_ell_t: [f64; 2],
    pub grad_phi: [f64; 2],
    pub phi_t: f64,
}

impl WeightSample {
    /// Sentinel for `t in {0, T}` where `theta = 0`.
    pub fn endpoint() -> Self {
        Self { log_theta: f64::NEG_INFINITY, ell: f64::NEG_INFINITY, rho: f64::NEG_INFINITY, ..Self::default() }
    }

    /// `theta^2 g`, flushed to zero far below the double range.
    pub fn theta_sq_times(&self, g: f64) -> f64 {
        exp_weighted(2.0 * self.log_theta, g)
    }
}

/// `s(t) = 1/(t(T-t))` and its first two derivatives.
pub fn time_factor(t: f64, t_final: f64) -> (f64, f64, f64) {
    let s = 1.0 / (t * (t_final - t));
    let a = 2.0 * t - t_final;
    (s, a * s * s, 2.0 * s * s + 2.0 * a * a * s * s * s)
}

/// Weight and derivatives at one point. `psi_norm` is the exact sup of `|psi|`.
pub fn eval_weight(params: &CarlemanParams, psi: &PsiSample, psi_norm: f64, t: f64) -> Result<WeightSample> {
    if !(t > 0.0 && t < params.t_final) {
        return Err(Error::InvalidArgument(format!("t = {t} is outside (0, {})", params.t_final)));
    }
    let (lam, mu) = (params.lambda, params.mu);
    let (s, s1, s2) = time_factor(t, params.t_final);
    let e = (mu * psi.psi).exp();
    let big = (2.0 * mu * psi_norm).exp();
    // e - big without cancellation: big * (e^{mu psi - 2 mu |psi|} - 1).
    let diff = big * (mu * (psi.psi - 2.0 * psi_norm)).exp_m1();
    let phi = e * s;
    let rho = diff * s;
    let ell = lam * rho;
    let g = psi.grad_psi;
    let h = psi.hess_psi;
    let grad_ell = [lam * mu * phi * g[0], lam * mu * phi * g[1]];
    let mut hess_ell = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            hess_ell[a][b] = lam * mu * mu * phi * g[a] * g[b] + lam * mu * phi * h[a][b];
        }
    }
    let g2 = g[0] * g[0] + g[1] * g[1];
    Ok(WeightSample {
        phi,
        rho,
        ell,
        log_theta: ell,
        ell_t: lam * diff * s1,
        ell_tt: lam * diff * s2,
        grad_ell,
        hess_ell,
        lap_ell: lam * mu * mu * phi * g2 + lam * mu * phi * psi.lap_psi,
        grad_ell_t: [lam * mu * e * s1 * g[0], lam * mu * e * s1 * g[1]],
        grad_phi: [mu * phi * g[0], mu * phi * g[1]],
        phi_t: e * s1,
    })
}

/// Weight samples at every domain node and time level.
#[derive(Clone, Debug)]
pub struct WeightEnvelope {
    pub params: CarlemanParams,
    pub slices: Vec<Array2<WeightSample>>,
}

impl WeightEnvelope {
    pub fn log_theta(&self, k: usize, i: usize, j: usize) -> f64 {
        self.slices[k][[i, j]].log_theta
    }

    /// CSV with columns `t,x1,x2,log_theta,phi` over domain nodes.
    pub fn write_csv<W: Write>(&self, grid: &SpaceTimeGrid, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x1", "x2", "log_theta", "phi"]).map_err(csv_err)?;
        for (k, s) in self.slices.iter().enumerate() {
            for ((i, j), ws) in s.indexed_iter() {
                if grid.kind[[i, j]] == NodeKind::Exterior {
                    continue;
                }
                let x = grid.x(i, j);
                w.write_record(&[
                    format!("{}", grid.t(k)),
                    format!("{}", x[0]),
                    format!("{}", x[1]),
                    format!("{}", ws.log_theta),
                    format!("{}", ws.phi),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Output(e.to_string())
}

/// Evaluates the weight over the grid. Endpoint slices and exterior nodes get
/// the [`WeightSample::endpoint`] sentinel.
pub fn weight_envelope(params: &CarlemanParams, grid: &SpaceTimeGrid, which: PsiKind) -> Result<WeightEnvelope> {
    params.validate()?;
    let spec = grid.spec;
    let psi: Array2<Option<PsiSample>> = Array2::from_shape_fn(grid.dims(), |(i, j)| {
        (grid.kind[[i, j]] != NodeKind::Exterior).then(|| psi_raw(spec.shape, which, grid.x(i, j)))
    });
    // Validate the construction once (critical point check).
    eval_psi(&spec, which, spec.omega_center)?;
    let norm = psi_sup(spec.shape, which);
    let slices = (0..=grid.nt)
        .into_par_iter()
        .map(|k| {
            let t = grid.t(k);
            if k == 0 || k == grid.nt {
                return Ok(Array2::from_elem(grid.dims(), WeightSample::endpoint()));
            }
            let mut out = Array2::from_elem(grid.dims(), WeightSample::endpoint());
            for ((i, j), p) in psi.indexed_iter() {
                if let Some(p) = p {
                    out[[i, j]] = eval_weight(params, p, norm, t)?;
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WeightEnvelope { params: *params, slices })
}

/// Weight samples at the boundary quadrature points of `grid`, per time level.
pub fn boundary_weights(params: &CarlemanParams, grid: &SpaceTimeGrid, which: PsiKind) -> Result<Vec<Vec<(WeightSample, PsiSample)>>> {
    params.validate()?;
    let spec = grid.spec;
    eval_psi(&spec, which, spec.omega_center)?;
    let norm = psi_sup(spec.shape, which);
    let psi: Vec<PsiSample> = grid
        .boundary
        .iter()
        .map(|b| {
            let x = match b.anchor {
                Anchor::Node { i, j, .. } => grid.x(i, j),
                Anchor::Cut(_) => b.pos,
            };
            psi_raw(spec.shape, which, x)
        })
        .collect();
    (0..=grid.nt)
        .map(|k| {
            if k == 0 || k == grid.nt {
                return Ok(psi.iter().map(|p| (WeightSample::endpoint(), *p)).collect());
            }
            psi.iter().map(|p| Ok((eval_weight(params, p, norm, grid.t(k))?, *p))).collect()
        })
        .collect()
}

fn d1(f: &dyn Fn(f64) -> f64, h: f64) -> f64 {
    (f(-2.0 * h) - f(2.0 * h) + 8.0 * (f(h) - f(-h))) / (12.0 * h)
}

fn d2(f: &dyn Fn(f64) -> f64, h: f64) -> f64 {
    (-f(2.0 * h) + 16.0 * f(h) - 30.0 * f(0.0) + 16.0 * f(-h) - f(-2.0 * h)) / (12.0 * h * h)
}

/// Largest relative disagreement between the analytic derivatives of `ℓ` and
/// fourth-order finite differences of `ℓ` itself, over `points`. Each error is
/// measured against the larger of the derivative and `|ℓ|` divided by the
/// matching power of the local length scale, so zeros of a derivative (like
/// `ℓ_t` at `T/2`) do not blow the ratio up.
pub fn derivative_check(params: &CarlemanParams, spec: &DomainSpec, which: PsiKind, points: &[(f64, [f64; 2])]) -> Result<f64> {
    let norm = psi_sup(spec.shape, which);
    let ell = |t: f64, x: [f64; 2]| -> f64 {
        eval_weight(params, &psi_raw(spec.shape, which, x), norm, t).map(|w| w.ell).unwrap_or(f64::NAN)
    };
    let mut worst: f64 = 0.0;
    for &(t, x) in points {
        let w = eval_weight(params, &eval_psi(spec, which, x)?, norm, t)?;
        let tau = t.min(params.t_final - t);
        let ht = 2e-3 * tau;
        let hx = 2e-3 / params.mu;
        let lx = 1.0 / params.mu;
        let lt = tau;
        let at_t = |d: f64| ell(t + d, x);
        let along = |axis: usize, t: f64| {
            move |d: f64| {
                let mut y = x;
                y[axis] += d;
                ell(t, y)
            }
        };
        let mut rel = |an: f64, fd: f64, scale: f64| {
            worst = worst.max((an - fd).abs() / an.abs().max(scale));
        };
        let e = w.ell.abs();
        rel(w.ell_t, d1(&at_t, ht), e / lt);
        rel(w.ell_tt, d2(&at_t, ht), e / (lt * lt));
        let mut lap = 0.0;
        for a in 0..2 {
            rel(w.grad_ell[a], d1(&along(a, t), hx), e / lx);
            lap += d2(&along(a, t), hx);
            let gx_t = |d: f64| d1(&along(a, t + d), hx);
            rel(w.grad_ell_t[a], d1(&gx_t, ht), e / (lx * lt));
        }
        rel(w.lap_ell, lap, e / (lx * lx));
    }
    if !worst.is_finite() {
        return Err(Error::NonFinite { t: f64::NAN });
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize)]
pub struct MonotonicityReport {
    pub epsilon: f64,
    pub nodes_checked: usize,
    pub violations: usize,
    pub pass: bool,
}

/// `θ(ε, x) <= θ(t, x) <= θ(T/2, x)` for every grid time `t` in `[ε, T-ε]`
/// and every domain node `x`, compared in log form.
pub fn time_monotonicity(params: &CarlemanParams, grid: &SpaceTimeGrid, which: PsiKind, eps: f64) -> Result<MonotonicityReport> {
    let t_final = params.t_final;
    if !(eps > 0.0 && eps < t_final / 2.0) {
        return Err(Error::InvalidArgument(format!("epsilon = {eps} is outside (0, T/2)")));
    }
    let norm = psi_sup(grid.spec.shape, which);
    let times: Vec<f64> = grid.times().into_iter().filter(|&t| t >= eps && t <= t_final - eps).collect();
    let mut checked = 0;
    let mut bad = 0;
    for ((i, j), k) in grid.kind.indexed_iter() {
        if *k == NodeKind::Exterior {
            continue;
        }
        let p = psi_raw(grid.spec.shape, which, grid.x(i, j));
        let lo = eval_weight(params, &p, norm, eps)?.log_theta;
        let hi = eval_weight(params, &p, norm, t_final / 2.0)?.log_theta;
        for &t in &times {
            let v = eval_weight(params, &p, norm, t)?.log_theta;
            checked += 1;
            // Relative slack only absorbs round-off in ℓ itself.
            let tol = 1e-13 * v.abs();
            if v < lo - tol || v > hi + tol {
                bad += 1;
            }
        }
    }
    Ok(MonotonicityReport { epsilon: eps, nodes_checked: checked, violations: bad, pass: bad == 0 && checked > 0 })
}
