//! Conditional-stability experiments: two forward solves from nearby
//! initial data and the observed ratio between interior energy of the
//! difference and its observation on `ω` or on the boundary.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    grad, integrate_q, integrate_sigma, integrate_space, normal_derivative, ComplexField, Gamma0, Region,
    SpaceTimeField, SpaceTimeGrid,
};
use crate::solver::{random_trig_initial, solve, SolveConfig};

pub const TRACE_TOL: f64 = 1e-10;

/// `max_t (∫_Ω |u|⁶)^{1/6}`.
pub fn linf_l6_norm(u: &SpaceTimeField, grid: &SpaceTimeGrid) -> Result<f64> {
    u.check_grid(grid)?;
    let mut m = 0.0f64;
    for s in &u.slices {
        let g = s.values.mapv(|v| v.norm_sqr().powi(3));
        let v = integrate_space(&g, &grid.quad_weights_space);
        if !v.is_finite() {
            return Err(Error::NonFinite { t: f64::NAN });
        }
        m = m.max(v.powf(1.0 / 6.0));
    }
    Ok(m)
}

pub struct Pair {
    pub u1: SpaceTimeField,
    pub u2: SpaceTimeField,
    pub z: SpaceTimeField,
}

/// Solves from `y0_a` (giving `u1`) and `y0_b` (giving `u2`) with identical
/// data and returns `z = u1 - u2`.
pub fn run_pair(y0_a: &ComplexField, y0_b: &ComplexField, cfg: &SolveConfig, grid: &SpaceTimeGrid) -> Result<Pair> {
    let u1 = solve(y0_a, cfg, grid)?.field;
    let u2 = solve(y0_b, cfg, grid)?.field;
    let z = u1.zip_with(&u2, |a, b| a - b);
    Ok(Pair { u1, u2, z })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observation {
    Interior,
    Boundary,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub variant: Observation,
    pub epsilon: f64,
    pub perturbation_scale: f64,
    /// `∫_{Q_ε} |z|² + |∇z|²`.
    pub lhs: f64,
    /// `∫_{Q_ω} |z|² + |z|⁴`, or `∫_Σ |∂ν z|²`.
    pub rhs_obs: f64,
    /// `‖u₂‖⁸` in `L∞(0,T; L⁶)`; 1 for the boundary variant.
    pub c_u2: f64,
    /// Same with `u₁`.
    pub c_u1: f64,
    pub c_emp: Option<f64>,
    pub c_emp_u1: Option<f64>,
    /// Both sides vanish.
    pub degenerate: bool,
}

fn energy_density(z: &SpaceTimeField, grid: &SpaceTimeGrid) -> Result<Vec<Array2<f64>>> {
    z.slices
        .iter()
        .map(|s| {
            let [gx, gy] = grad(s, grid)?;
            let mut out = s.values.mapv(|v| v.norm_sqr());
            out.zip_mut_with(&gx.values, |o, g| *o += g.norm_sqr());
            out.zip_mut_with(&gy.values, |o, g| *o += g.norm_sqr());
            Ok(out)
        })
        .collect()
}

fn check_eps(eps: f64, grid: &SpaceTimeGrid) -> Result<()> {
    if !(eps > 0.0 && eps < grid.t_final / 2.0) {
        return Err(Error::InvalidArgument(format!("epsilon = {eps} is outside (0, T/2)")));
    }
    Ok(())
}

fn finish(
    variant: Observation,
    epsilon: f64,
    perturbation_scale: f64,
    lhs: f64,
    rhs_obs: f64,
    c_u2: f64,
    c_u1: f64,
) -> StabilityReport {
    let c = |norm: f64| (rhs_obs > 0.0 && norm > 0.0).then(|| lhs / (norm * rhs_obs)).filter(|c| c.is_finite());
    StabilityReport {
        variant,
        epsilon,
        perturbation_scale,
        lhs,
        rhs_obs,
        c_u2,
        c_u1,
        c_emp: c(c_u2),
        c_emp_u1: c(c_u1),
        degenerate: lhs == 0.0 && rhs_obs == 0.0,
    }
}

pub fn stability_interior(
    pair: &Pair,
    grid: &SpaceTimeGrid,
    eps: f64,
    perturbation_scale: f64,
) -> Result<StabilityReport> {
    check_eps(eps, grid)?;
    let z = &pair.z;
    z.check_grid(grid)?;
    let lhs = integrate_q(&energy_density(z, grid)?, grid, Region::QEps(eps))?;
    let obs: Vec<Array2<f64>> = z
        .slices
        .iter()
        .map(|s| {
            s.values.mapv(|v| {
                let a = v.norm_sqr();
                a + a * a
            })
        })
        .collect();
    let rhs = integrate_q(&obs, grid, Region::QOmega)?;
    let c_u2 = linf_l6_norm(&pair.u2, grid)?.powi(8);
    let c_u1 = linf_l6_norm(&pair.u1, grid)?.powi(8);
    Ok(finish(Observation::Interior, eps, perturbation_scale, lhs, rhs, c_u2, c_u1))
}

pub fn stability_boundary(z: &SpaceTimeField, grid: &SpaceTimeGrid, eps: f64, perturbation_scale: f64) -> Result<StabilityReport> {
    check_eps(eps, grid)?;
    z.check_grid(grid)?;
    let bmask = grid.boundary_mask();
    let mut trace = 0.0f64;
    for s in &z.slices {
        for (v, &b) in s.values.iter().zip(&bmask) {
            if b {
                trace = trace.max(v.norm());
            }
        }
        trace = s.trace.iter().fold(trace, |m, v| m.max(v.norm()));
    }
    if trace > TRACE_TOL {
        return Err(Error::InvalidArgument(format!(
            "difference has boundary trace {trace:.3e}; the pair does not share Dirichlet data"
        )));
    }
    let lhs = integrate_q(&energy_density(z, grid)?, grid, Region::QEps(eps))?;
    let dn = z
        .slices
        .iter()
        .map(|s| Ok(normal_derivative(s, grid)?.iter().map(|d| d.norm_sqr()).collect()))
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let rhs = integrate_sigma(&dn, grid, Gamma0::FullBoundary)?;
    Ok(finish(Observation::Boundary, eps, perturbation_scale, lhs, rhs, 1.0, 1.0))
}

/// Rescales `y` so that `(∫_Ω |y|⁶)^{1/6} = target`.
pub fn scale_to_l6(y: &ComplexField, grid: &SpaceTimeGrid, target: f64) -> Result<ComplexField> {
    let g = y.values.mapv(|v| v.norm_sqr().powi(3));
    let n = integrate_space(&g, &grid.quad_weights_space).powf(1.0 / 6.0);
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::InvalidArgument("cannot rescale a zero field".into()));
    }
    Ok(y.map(|v| v * (target / n)))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seed: u64,
    pub deltas: Vec<f64>,
    /// Fractions of `T`.
    pub epsilons: Vec<f64>,
    /// `‖u₂(0)‖_{L⁶}` of the background.
    pub background_l6: f64,
    pub background_modes: usize,
    pub perturbation_modes: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            deltas: vec![1e-3, 1e-2, 1e-1],
            epsilons: vec![0.05, 0.1, 0.2],
            background_l6: 1.0,
            background_modes: 4,
            perturbation_modes: 3,
        }
    }
}

/// Background `u₂` from seeded data, `u₁` from the background plus `δ w`
/// with a seeded unit-amplitude `w`, for every δ and ε. Rows with
/// `perturbation_scale = 0` are the identical-data pair.
pub fn perturbation_suite(
    grid: &SpaceTimeGrid,
    cfg: &SolveConfig,
    suite: &SuiteConfig,
    observations: &[Observation],
) -> Result<Vec<StabilityReport>> {
    use rayon::prelude::*;
    let y0 = random_trig_initial(grid, &cfg.bc, suite.seed, suite.background_modes, 1.0)?;
    let y0 = scale_to_l6(&y0, grid, suite.background_l6)?;
    let w = random_trig_initial(grid, &cfg.bc, suite.seed.wrapping_add(1), suite.perturbation_modes, 1.0)?;
    let background = solve(&y0, cfg, grid)?.field;
    let mut deltas = vec![0.0];
    deltas.extend(&suite.deltas);
    let pairs: Vec<(f64, Pair)> = deltas
        .par_iter()
        .map(|&d| {
            let ya = y0.zip_with(&w, |a, b| a + b * d);
            let u1 = if d == 0.0 { background.clone() } else { solve(&ya, cfg, grid)?.field };
            let z = u1.zip_with(&background, |a, b| a - b);
            Ok((d, Pair { u1, u2: background.clone(), z }))
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for &obs in observations {
        for (d, p) in &pairs {
            for &e in &suite.epsilons {
                let eps = e * grid.t_final;
                out.push(match obs {
                    Observation::Interior => stability_interior(p, grid, eps, *d)?,
                    Observation::Boundary => stability_boundary(&p.z, grid, eps, *d)?,
                });
            }
        }
    }
    Ok(out)
}

/// `max/min` of the finite positive constants, `None` if any is missing.
pub fn spread(values: &[Option<f64>]) -> Option<f64> {
    let v: Option<Vec<f64>> = values.iter().copied().collect();
    let v = v?;
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(0.0, f64::max);
    (lo > 0.0 && !v.is_empty()).then(|| hi / lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, DomainSpec, C64};
    use crate::operator::derive_coeffs;
    use crate::solver::{BoundaryCondition, Scheme};
    use std::f64::consts::PI;

    fn grid() -> SpaceTimeGrid {
        build_grid(DomainSpec::unit_square([0.5, 0.5], 0.25), 32, 32, 32, 1.0).unwrap()
    }

    #[test]
    fn l6_norm_examples() {
        let g = grid();
        let one = SpaceTimeField::from_fn(&g, |_, _| C64::new(1.0, 0.0));
        assert!((linf_l6_norm(&one, &g).unwrap() - 1.0).abs() < 1e-13);
        let two = SpaceTimeField::from_fn(&g, |_, _| C64::new(0.0, 2.0));
        assert!((linf_l6_norm(&two, &g).unwrap() - 2.0).abs() < 1e-13);
        // ∫₀¹ sin⁶(πs) ds = 5/16, so the norm is (25/256)^{1/6}.
        let s = SpaceTimeField::from_fn(&g, |_, x| C64::new((PI * x[0]).sin() * (PI * x[1]).sin(), 0.0));
        let expect = (25.0f64 / 256.0).powf(1.0 / 6.0);
        assert!((linf_l6_norm(&s, &g).unwrap() - expect).abs() < 1e-12);
    }

    fn cfg() -> SolveConfig {
        SolveConfig { coeffs: derive_coeffs(0.3, 0.4), bc: BoundaryCondition::Dirichlet0, scheme: Scheme::ImexCn, source: None }
    }

    #[test]
    fn identical_data_is_degenerate() {
        let g = grid();
        let y0 = random_trig_initial(&g, &BoundaryCondition::Dirichlet0, 3, 3, 1.0).unwrap();
        let p = run_pair(&y0, &y0, &cfg(), &g).unwrap();
        let r = stability_interior(&p, &g, 0.1, 0.0).unwrap();
        assert!(r.degenerate && r.c_emp.is_none());
        let r = stability_boundary(&p.z, &g, 0.1, 0.0).unwrap();
        assert!(r.degenerate);
    }

    #[test]
    fn lhs_shrinks_with_epsilon_and_scales_quadratically() {
        let g = grid();
        let y0 = random_trig_initial(&g, &BoundaryCondition::Dirichlet0, 3, 3, 1.0).unwrap();
        let w = random_trig_initial(&g, &BoundaryCondition::Dirichlet0, 9, 2, 1.0).unwrap();
        let yb = ComplexField { values: &y0.values + &(w.values.mapv(|v| v * 0.01)), trace: y0.trace.clone() };
        let p = run_pair(&yb, &y0, &cfg(), &g).unwrap();
        let lhs: Vec<f64> = [0.05, 0.1, 0.2, 0.4].iter().map(|&e| stability_interior(&p, &g, e, 0.01).unwrap().lhs).collect();
        assert!(lhs.windows(2).all(|w| w[1] <= w[0]), "{lhs:?}");
        let s = 3.0;
        let scaled = Pair { u1: p.u1.clone(), u2: p.u2.clone(), z: p.z.map_slices(|f| f.map(|v| v * s)) };
        let a = stability_interior(&p, &g, 0.1, 0.01).unwrap();
        let b = stability_interior(&scaled, &g, 0.1, 0.01).unwrap();
        assert!((b.lhs / a.lhs - s * s).abs() < 1e-12 * s * s);
        assert!(b.rhs_obs > s * s * a.rhs_obs && b.rhs_obs < s.powi(4) * a.rhs_obs);
        assert!(stability_interior(&p, &g, 0.5, 0.01).is_err());
    }

    #[test]
    fn boundary_variant_rejects_nonzero_trace() {
        let g = grid();
        let z = SpaceTimeField::from_fn(&g, |_, _| C64::new(1e-6, 0.0));
        assert!(stability_boundary(&z, &g, 0.1, 1.0).is_err());
    }
}
