//! Space-time quadrature.

use ndarray::Array2;
use rayon::prelude::*;

use super::{Gamma0, SpaceTimeGrid};
use crate::error::{Error, Result};
use crate::numerics::{compensated_sum, sorted_sum};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Region {
    Q,
    QOmega,
    /// `(eps, T - eps) x Omega`.
    QEps(f64),
}

/// Time weights of the trapezoid rule, or for `QEps` the exact integral over
/// `[eps, T - eps]` of the piecewise-linear interpolant.
pub fn time_weights(grid: &SpaceTimeGrid, region: Region) -> Result<Vec<f64>> {
    let times = grid.times();
    let (a, b) = match region {
        Region::Q | Region::QOmega => (0.0, grid.t_final),
        Region::QEps(eps) => {
            if !(eps > 0.0 && eps < 0.5 * grid.t_final) {
                return Err(Error::InvalidArgument(format!(
                    "eps must lie in (0, T/2), got {eps} with T = {}",
                    grid.t_final
                )));
            }
            (eps, grid.t_final - eps)
        }
    };
    let mut w = vec![0.0; times.len()];
    for k in 0..times.len() - 1 {
        let (t0, t1) = (times[k], times[k + 1]);
        let (lo, hi) = (t0.max(a), t1.min(b));
        if hi <= lo {
            continue;
        }
        // Integrate the two hat pieces over [lo, hi].
        let len = t1 - t0;
        let m = 0.5 * (lo + hi);
        w[k] += (hi - lo) * (t1 - m) / len;
        w[k + 1] += (hi - lo) * (m - t0) / len;
    }
    Ok(w)
}

/// `sum_ij g_ij w_ij`, skipping zero weights.
pub fn integrate_space(g: &Array2<f64>, weights: &Array2<f64>) -> f64 {
    let terms: Vec<f64> = g
        .iter()
        .zip(weights.iter())
        .filter(|(_, &w)| w != 0.0)
        .map(|(&v, &w)| v * w)
        .collect();
    sorted_sum(terms)
}

/// Tensor-product quadrature of real space-time samples over `region`.
pub fn integrate_q(g: &[Array2<f64>], grid: &SpaceTimeGrid, region: Region) -> Result<f64> {
    if g.len() != grid.nt + 1 {
        return Err(Error::ShapeMismatch(format!("{} slices for nt = {}", g.len(), grid.nt)));
    }
    let tw = time_weights(grid, region)?;
    let space = match region {
        Region::QOmega => {
            let mut w = grid.quad_weights_space.clone();
            w.zip_mut_with(&grid.omega_mask, |w, &m| {
                if !m {
                    *w = 0.0
                }
            });
            w
        }
        _ => grid.quad_weights_space.clone(),
    };
    let per_slice: Vec<Result<f64>> = g
        .par_iter()
        .zip(tw.par_iter())
        .enumerate()
        .map(|(k, (s, &w))| {
            if s.dim() != grid.dims() {
                return Err(Error::ShapeMismatch(format!("slice {k} has shape {:?}", s.dim())));
            }
            if w == 0.0 {
                return Ok(0.0);
            }
            let v = integrate_space(s, &space);
            if !v.is_finite() {
                return Err(Error::NonFinite { t: grid.t(k) });
            }
            Ok(w * v)
        })
        .collect();
    let vals = per_slice.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(compensated_sum(vals))
}

/// Arc-length weighted boundary quadrature times the trapezoid rule in time.
/// `g[k]` holds one value per entry of `grid.boundary`.
pub fn integrate_sigma(g: &[Vec<f64>], grid: &SpaceTimeGrid, gamma0: Gamma0) -> Result<f64> {
    if gamma0 == Gamma0::None {
        return Err(Error::Unsupported("boundary integral with an empty observed boundary".into()));
    }
    if g.len() != grid.nt + 1 {
        return Err(Error::ShapeMismatch(format!("{} slices for nt = {}", g.len(), grid.nt)));
    }
    let tw = time_weights(grid, Region::Q)?;
    let mut acc = Vec::with_capacity(g.len());
    for (k, (s, w)) in g.iter().zip(&tw).enumerate() {
        if s.len() != grid.boundary.len() {
            return Err(Error::ShapeMismatch(format!(
                "slice {k} has {} boundary values, grid has {}",
                s.len(),
                grid.boundary.len()
            )));
        }
        let terms: Vec<f64> = s.iter().zip(&grid.boundary).map(|(v, b)| v * b.arc_weight).collect();
        let v = sorted_sum(terms);
        if !v.is_finite() {
            return Err(Error::NonFinite { t: grid.t(k) });
        }
        acc.push(w * v);
    }
    Ok(compensated_sum(acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, DomainSpec};

    fn sq() -> SpaceTimeGrid {
        build_grid(DomainSpec::unit_square([0.5, 0.5], 0.2), 32, 32, 32, 1.0).unwrap()
    }

    fn fill(g: &SpaceTimeGrid, f: impl Fn(f64, [f64; 2]) -> f64) -> Vec<Array2<f64>> {
        g.times()
            .into_iter()
            .map(|t| Array2::from_shape_fn(g.dims(), |(i, j)| f(t, g.x(i, j))))
            .collect()
    }

    #[test]
    fn examples() {
        let g = sq();
        let one = fill(&g, |_, _| 1.0);
        assert!((integrate_q(&one, &g, Region::Q).unwrap() - 1.0).abs() < 1e-14);
        let e = integrate_q(&one, &g, Region::QEps(0.25)).unwrap();
        assert!((e - 0.5).abs() <= g.dt);
        let tx = fill(&g, |t, x| t * x[0]);
        assert!((integrate_q(&tx, &g, Region::Q).unwrap() - 0.25).abs() < 1e-14);
        assert!(integrate_q(&one, &g, Region::QEps(0.5)).is_err());
        assert!(integrate_q(&one, &g, Region::QEps(0.0)).is_err());

        let ones: Vec<Vec<f64>> = (0..=g.nt).map(|_| vec![1.0; g.boundary.len()]).collect();
        assert!((integrate_sigma(&ones, &g, Gamma0::FullBoundary).unwrap() - 4.0).abs() < 1e-13);
        let x1: Vec<Vec<f64>> = (0..=g.nt).map(|_| g.boundary.iter().map(|b| b.pos[0]).collect()).collect();
        assert!((integrate_sigma(&x1, &g, Gamma0::FullBoundary).unwrap() - 2.0).abs() < 1e-13);
        assert!(integrate_sigma(&ones, &g, Gamma0::None).is_err());
    }

    #[test]
    fn omega_region_measures_ball() {
        let g = build_grid(DomainSpec::unit_square([0.5, 0.5], 0.25), 128, 128, 16, 1.0).unwrap();
        let one = fill(&g, |_, _| 1.0);
        let a = integrate_q(&one, &g, Region::QOmega).unwrap();
        let exact = std::f64::consts::PI * 0.0625;
        assert!((a - exact).abs() < 0.03 * exact, "{a}");
    }

    #[test]
    fn disk_perimeter() {
        let g = build_grid(DomainSpec::unit_disk([0.0, 0.0], 0.3), 64, 64, 16, 1.0).unwrap();
        let ones: Vec<Vec<f64>> = (0..=g.nt).map(|_| vec![1.0; g.boundary.len()]).collect();
        let p = integrate_sigma(&ones, &g, Gamma0::FullBoundary).unwrap();
        assert!((p - 2.0 * std::f64::consts::PI).abs() < 0.02 * 2.0 * std::f64::consts::PI);
    }
}
