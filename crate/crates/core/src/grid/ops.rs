//! Finite-difference operators on [`ComplexField`]s.
//!
//! Derived fields carry a zero trace: only the node values are meaningful.

use serde::{Deserialize, Serialize};

use super::{Anchor, ComplexField, Nbr, NodeKind, Shape, SpaceTimeField, SpaceTimeGrid, C64, DIRS};
use crate::error::{Error, Result};

/// Ghost-value rule for the Laplacian at and next to the boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplacianBc {
    /// Boundary values are read as zero; the result vanishes on boundary nodes.
    Dirichlet0,
    /// Mirror ghost nodes (square only).
    Neumann0,
    /// Use the field's own boundary values; one-sided stencils on boundary nodes.
    GhostFromField,
}

/// First derivative at 0 from samples at `+hp` and `-hm`.
#[inline]
pub(crate) fn d1_nonuniform(f0: C64, fp: C64, hp: f64, fm: C64, hm: f64) -> C64 {
    (fp * (hm * hm) - fm * (hp * hp) + f0 * (hp * hp - hm * hm)) / (hp * hm * (hp + hm))
}

/// Second derivative at 0 from samples at `+hp` and `-hm`.
#[inline]
pub(crate) fn d2_nonuniform(f0: C64, fp: C64, hp: f64, fm: C64, hm: f64) -> C64 {
    (fp * hm + fm * hp - f0 * (hp + hm)) * (2.0 / (hp * hm * (hp + hm)))
}

/// Weights of the derivative at `at` of the quadratic interpolant through `us`.
pub(crate) fn lagrange_d1(us: [f64; 3], at: f64) -> [f64; 3] {
    let mut w = [0.0; 3];
    for k in 0..3 {
        let (a, b) = ((k + 1) % 3, (k + 2) % 3);
        w[k] = ((at - us[a]) + (at - us[b])) / ((us[k] - us[a]) * (us[k] - us[b]));
    }
    w
}

fn same_grid(f: &ComplexField, grid: &SpaceTimeGrid) -> Result<()> {
    f.check_grid(grid)
}

/// Value and distance of the neighbour of an interior node.
#[inline]
fn nbr_value(f: &ComplexField, grid: &SpaceTimeGrid, i: usize, j: usize, dir: usize, zero_bnd: bool) -> (C64, f64) {
    let h = grid.spacing(DIRS[dir].0);
    match grid.nbr(i, j, dir) {
        Nbr::Node(a, b) => {
            let v = if zero_bnd && grid.kind[[a, b]] == NodeKind::Boundary { C64::new(0.0, 0.0) } else { f.values[[a, b]] };
            (v, h)
        }
        Nbr::Cut(k, frac) => (if zero_bnd { C64::new(0.0, 0.0) } else { f.trace[k] }, frac * h),
    }
}

/// Discrete gradient `(d/dx1, d/dx2)`.
pub fn grad(f: &ComplexField, grid: &SpaceTimeGrid) -> Result<[ComplexField; 2]> {
    same_grid(f, grid)?;
    let mut out = [ComplexField::zeros(grid), ComplexField::zeros(grid)];
    let n = [grid.nx, grid.ny];
    for ((i, j), kind) in grid.kind.indexed_iter() {
        match kind {
            NodeKind::Exterior => {}
            NodeKind::Interior => {
                for axis in 0..2 {
                    let (fp, hp) = nbr_value(f, grid, i, j, 2 * axis, false);
                    let (fm, hm) = nbr_value(f, grid, i, j, 2 * axis + 1, false);
                    out[axis].values[[i, j]] = d1_nonuniform(f.values[[i, j]], fp, hp, fm, hm);
                }
            }
            NodeKind::Boundary => {
                let idx = [i, j];
                for axis in 0..2 {
                    let h = grid.spacing(axis);
                    let at = |k: usize| {
                        let mut p = idx;
                        p[axis] = k;
                        f.values[[p[0], p[1]]]
                    };
                    let k = idx[axis];
                    out[axis].values[[i, j]] = if k == 0 {
                        (at(0) * -3.0 + at(1) * 4.0 - at(2)) / (2.0 * h)
                    } else if k == n[axis] {
                        (at(k) * 3.0 - at(k - 1) * 4.0 + at(k - 2)) / (2.0 * h)
                    } else {
                        (at(k + 1) - at(k - 1)) / (2.0 * h)
                    };
                }
            }
        }
    }
    Ok(out)
}

/// Five-point Laplacian (Shortley-Weller next to the disk boundary).
pub fn laplacian(f: &ComplexField, grid: &SpaceTimeGrid, bc: LaplacianBc) -> Result<ComplexField> {
    same_grid(f, grid)?;
    if grid.spec.shape == Shape::UnitDisk && bc == LaplacianBc::Neumann0 {
        return Err(Error::Unsupported("neumann0 Laplacian on the unit disk".into()));
    }
    let zero_bnd = bc == LaplacianBc::Dirichlet0;
    let mut out = ComplexField::zeros(grid);
    let n = [grid.nx, grid.ny];
    for ((i, j), kind) in grid.kind.indexed_iter() {
        let v = match kind {
            NodeKind::Exterior => continue,
            NodeKind::Interior => {
                let mut acc = C64::new(0.0, 0.0);
                for axis in 0..2 {
                    let (fp, hp) = nbr_value(f, grid, i, j, 2 * axis, zero_bnd);
                    let (fm, hm) = nbr_value(f, grid, i, j, 2 * axis + 1, zero_bnd);
                    acc += d2_nonuniform(f.values[[i, j]], fp, hp, fm, hm);
                }
                acc
            }
            NodeKind::Boundary if zero_bnd => continue,
            NodeKind::Boundary => {
                let idx = [i, j];
                let mut acc = C64::new(0.0, 0.0);
                for axis in 0..2 {
                    let h2 = grid.spacing(axis).powi(2);
                    let at = |k: usize| {
                        let mut p = idx;
                        p[axis] = k;
                        f.values[[p[0], p[1]]]
                    };
                    let k = idx[axis];
                    let edge = if k == 0 {
                        Some([at(0), at(1), at(2), at(3)])
                    } else if k == n[axis] {
                        Some([at(k), at(k - 1), at(k - 2), at(k - 3)])
                    } else {
                        None
                    };
                    acc += match (edge, bc) {
                        (None, _) => (at(k + 1) + at(k - 1) - at(k) * 2.0) / h2,
                        (Some(e), LaplacianBc::Neumann0) => (e[1] - e[0]) * (2.0 / h2),
                        (Some(e), _) => (e[0] * 2.0 - e[1] * 5.0 + e[2] * 4.0 - e[3]) / h2,
                    };
                }
                acc
            }
        };
        out.values[[i, j]] = v;
    }
    Ok(out)
}

/// Outward normal derivative at each boundary sample of `grid.boundary`.
pub fn normal_derivative(f: &ComplexField, grid: &SpaceTimeGrid) -> Result<Vec<C64>> {
    same_grid(f, grid)?;
    let nb = grid.boundary.len();
    let mut out = Vec::with_capacity(nb);
    for (k, bp) in grid.boundary.iter().enumerate() {
        let d = match bp.anchor {
            Anchor::Node { i, j, inward } => {
                let axis = if inward[0] != 0 { 0 } else { 1 };
                let h = grid.spacing(axis);
                let p1 = ((i as isize + inward[0]) as usize, (j as isize + inward[1]) as usize);
                let p2 = ((i as isize + 2 * inward[0]) as usize, (j as isize + 2 * inward[1]) as usize);
                (f.values[[i, j]] * 3.0 - f.values[p1] * 4.0 + f.values[p2]) / (2.0 * h)
            }
            Anchor::Cut(c) => {
                let cut = &grid.cuts[c];
                let (axis, sign) = DIRS[cut.dir];
                let h = grid.spacing(axis);
                let (i, j) = cut.node;
                // Coordinates along the outward grid direction, cut at 0.
                let u1 = -cut.frac * h;
                let f0 = f.trace[c];
                let f1 = f.values[[i, j]];
                let back = if sign > 0.0 { 2 * axis + 1 } else { 2 * axis };
                let along = match grid.nbr(i, j, back) {
                    Nbr::Node(a, b) => {
                        let w = lagrange_d1([0.0, u1, u1 - h], 0.0);
                        f0 * w[0] + f1 * w[1] + f.values[[a, b]] * w[2]
                    }
                    Nbr::Cut(k2, frac2) => {
                        let w = lagrange_d1([0.0, u1, u1 - frac2 * h], 0.0);
                        f0 * w[0] + f1 * w[1] + f.trace[k2] * w[2]
                    }
                };
                // Derivative along +x_axis.
                let fa = along * sign;
                // Tangential derivative from angular neighbours on the circle.
                let prev = &grid.boundary[(k + nb - 1) % nb];
                let next = &grid.boundary[(k + 1) % nb];
                let theta = bp.pos[1].atan2(bp.pos[0]);
                let tp = (next.pos[1].atan2(next.pos[0]) - theta).rem_euclid(std::f64::consts::TAU);
                let tm = (theta - prev.pos[1].atan2(prev.pos[0])).rem_euclid(std::f64::consts::TAU);
                let val = |b: &super::BoundaryPoint| match b.anchor {
                    Anchor::Cut(q) => f.trace[q],
                    Anchor::Node { i, j, .. } => f.values[[i, j]],
                };
                let ft = d1_nonuniform(f0, val(next), tp, val(prev), tm);
                let nu = bp.normal;
                let tau = [-nu[1], nu[0]];
                (fa - ft * tau[axis]) / nu[axis]
            }
        };
        out.push(d);
    }
    Ok(out)
}

/// Time derivative by second-order central differences (one-sided at the ends).
pub fn time_derivative(f: &SpaceTimeField, grid: &SpaceTimeGrid) -> Result<SpaceTimeField> {
    f.check_grid(grid)?;
    let nt = grid.nt;
    let dt = grid.dt;
    let s = &f.slices;
    let slices = (0..=nt)
        .map(|k| {
            if k == 0 {
                s[0].scale(C64::new(-3.0, 0.0))
                    .zip_with(&s[1], |a, b| a + b * 4.0)
                    .zip_with(&s[2], |a, b| (a - b) / (2.0 * dt))
            } else if k == nt {
                s[nt].scale(C64::new(3.0, 0.0))
                    .zip_with(&s[nt - 1], |a, b| a - b * 4.0)
                    .zip_with(&s[nt - 2], |a, b| (a + b) / (2.0 * dt))
            } else {
                s[k + 1].zip_with(&s[k - 1], |a, b| (a - b) / (2.0 * dt))
            }
        })
        .collect();
    Ok(SpaceTimeField { slices })
}
