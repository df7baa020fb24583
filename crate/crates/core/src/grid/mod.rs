//! Spatial domain, space-time grid, region masks and quadrature.
//!
//! The unit square uses a node-centred Cartesian grid whose outer nodes lie on
//! the boundary. The unit disk is embedded in the Cartesian grid of
//! `[-1, 1]^2`: nodes with `|x| < 1` are unknowns and the circle enters the
//! stencils through cut points, the intersections of grid lines with the
//! boundary (Shortley-Weller treatment). Field values at cut points are kept in
//! [`ComplexField::trace`].

mod ops;
mod quadrature;

pub use ops::{grad, laplacian, normal_derivative, time_derivative, LaplacianBc};
pub use quadrature::{integrate_q, integrate_sigma, integrate_space, time_weights, Region};

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    UnitSquare,
    UnitDisk,
}

/// Observed boundary portion. Only the whole boundary is supported.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gamma0 {
    FullBoundary,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub shape: Shape,
    pub omega_center: [f64; 2],
    pub omega_radius: f64,
    pub gamma0: Gamma0,
}

impl DomainSpec {
    pub fn unit_square(omega_center: [f64; 2], omega_radius: f64) -> Self {
        Self { shape: Shape::UnitSquare, omega_center, omega_radius, gamma0: Gamma0::FullBoundary }
    }

    pub fn unit_disk(omega_center: [f64; 2], omega_radius: f64) -> Self {
        Self { shape: Shape::UnitDisk, omega_center, omega_radius, gamma0: Gamma0::FullBoundary }
    }

    /// Distance from `x` to the boundary, negative outside.
    pub fn dist_to_boundary(&self, x: [f64; 2]) -> f64 {
        match self.shape {
            Shape::UnitSquare => x[0].min(1.0 - x[0]).min(x[1]).min(1.0 - x[1]),
            Shape::UnitDisk => 1.0 - x[0].hypot(x[1]),
        }
    }

    pub fn in_omega(&self, x: [f64; 2]) -> bool {
        let d = [x[0] - self.omega_center[0], x[1] - self.omega_center[1]];
        d[0].hypot(d[1]) < self.omega_radius
    }

    pub fn area(&self) -> f64 {
        match self.shape {
            Shape::UnitSquare => 1.0,
            Shape::UnitDisk => std::f64::consts::PI,
        }
    }

    pub fn perimeter(&self) -> f64 {
        match self.shape {
            Shape::UnitSquare => 4.0,
            Shape::UnitDisk => 2.0 * std::f64::consts::PI,
        }
    }

    /// Checks that the closed observation ball lies inside the domain with at
    /// least `margin` to spare.
    pub fn validate(&self, margin: f64) -> Result<()> {
        if !(self.omega_radius > 0.0) || !self.omega_radius.is_finite() {
            return Err(Error::InvalidDomain(format!(
                "omega_radius must be positive, got {}",
                self.omega_radius
            )));
        }
        let room = self.dist_to_boundary(self.omega_center) - self.omega_radius;
        if !(room >= margin) || room <= 0.0 {
            return Err(Error::InvalidDomain(format!(
                "observation ball B({:?}, {}) is not strictly interior (clearance {room:.3e}, need {margin:.3e})",
                self.omega_center, self.omega_radius
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    Boundary,
    Exterior,
}

/// Stencil directions: +x1, -x1, +x2, -x2.
pub(crate) const DIRS: [(usize, f64); 4] = [(0, 1.0), (0, -1.0), (1, 1.0), (1, -1.0)];

/// Neighbour of an interior node in one stencil direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Nbr {
    Node(usize, usize),
    /// Cut point index and its distance as a fraction of the grid spacing.
    Cut(usize, f64),
}

/// Intersection of a grid line with the disk boundary.
#[derive(Clone, Copy, Debug)]
pub struct Cut {
    pub pos: [f64; 2],
    /// Interior node the cut belongs to.
    pub node: (usize, usize),
    /// Index into the stencil direction table (+x1, -x1, +x2, -x2).
    pub dir: usize,
    /// Distance from the node, in units of the grid spacing, in (0, 1].
    pub frac: f64,
}

#[derive(Clone, Copy, Debug)]
pub enum Anchor {
    /// Square boundary node and the unit inward step.
    Node { i: usize, j: usize, inward: [isize; 2] },
    Cut(usize),
}

/// Boundary quadrature sample.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryPoint {
    pub pos: [f64; 2],
    pub normal: [f64; 2],
    pub arc_weight: f64,
    pub corner: bool,
    pub anchor: Anchor,
}

/// Discretisation of `(0, T) x Omega`.
#[derive(Clone, Debug)]
pub struct SpaceTimeGrid {
    pub spec: DomainSpec,
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    pub t_final: f64,
    pub hx: f64,
    pub hy: f64,
    pub dt: f64,
    pub origin: [f64; 2],
    pub kind: Array2<NodeKind>,
    pub omega_mask: Array2<bool>,
    pub corner_mask: Array2<bool>,
    pub quad_weights_space: Array2<f64>,
    pub boundary: Vec<BoundaryPoint>,
    pub cuts: Vec<Cut>,
    pub(crate) nbrs: Array2<[Nbr; 4]>,
}

impl SpaceTimeGrid {
    pub fn x(&self, i: usize, j: usize) -> [f64; 2] {
        [self.origin[0] + i as f64 * self.hx, self.origin[1] + j as f64 * self.hy]
    }

    pub fn t(&self, k: usize) -> f64 {
        if k == self.nt {
            self.t_final
        } else {
            k as f64 * self.dt
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.nt).map(|k| self.t(k)).collect()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx + 1, self.ny + 1)
    }

    pub fn h(&self) -> f64 {
        self.hx.max(self.hy)
    }

    pub(crate) fn spacing(&self, axis: usize) -> f64 {
        if axis == 0 {
            self.hx
        } else {
            self.hy
        }
    }

    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        self.kind[[i, j]] == NodeKind::Interior
    }

    pub fn interior_mask(&self) -> Array2<bool> {
        self.kind.mapv(|k| k == NodeKind::Interior)
    }

    pub fn boundary_mask(&self) -> Array2<bool> {
        self.kind.mapv(|k| k == NodeKind::Boundary)
    }

    /// Nodes of the closed domain that carry field values (interior plus, for
    /// the square, boundary nodes).
    pub fn domain_mask(&self) -> Array2<bool> {
        self.kind.mapv(|k| k != NodeKind::Exterior)
    }

    pub fn quad_weights_boundary(&self) -> Vec<f64> {
        self.boundary.iter().map(|b| b.arc_weight).collect()
    }

    /// Spatial weights with corner nodes removed, used by every weighted
    /// (Carleman) integral.
    pub fn weighted_quad_space(&self) -> Array2<f64> {
        let mut w = self.quad_weights_space.clone();
        w.zip_mut_with(&self.corner_mask, |w, &c| {
            if c {
                *w = 0.0
            }
        });
        w
    }

    pub(crate) fn nbr(&self, i: usize, j: usize, dir: usize) -> Nbr {
        self.nbrs[[i, j]][dir]
    }
}

/// Builds the space-time grid and its masks and quadrature weights.
pub fn build_grid(spec: DomainSpec, nx: usize, ny: usize, nt: usize, t_final: f64) -> Result<SpaceTimeGrid> {
    if nx < 16 || ny < 16 || nt < 16 {
        return Err(Error::InvalidArgument(format!(
            "grid sizes must be at least 16 (nx = {nx}, ny = {ny}, nt = {nt})"
        )));
    }
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(Error::InvalidArgument(format!("T must be positive, got {t_final}")));
    }
    let (origin, hx, hy) = match spec.shape {
        Shape::UnitSquare => ([0.0, 0.0], 1.0 / nx as f64, 1.0 / ny as f64),
        Shape::UnitDisk => {
            if nx != ny {
                return Err(Error::InvalidArgument("the unit disk requires nx == ny".into()));
            }
            ([-1.0, -1.0], 2.0 / nx as f64, 2.0 / ny as f64)
        }
    };
    spec.validate(hx.max(hy))?;

    let dims = (nx + 1, ny + 1);
    let pos = |i: usize, j: usize| [origin[0] + i as f64 * hx, origin[1] + j as f64 * hy];
    let mut kind = Array2::from_elem(dims, NodeKind::Exterior);
    let mut corner_mask = Array2::from_elem(dims, false);
    match spec.shape {
        Shape::UnitSquare => {
            for ((i, j), k) in kind.indexed_iter_mut() {
                let on_x = i == 0 || i == nx;
                let on_y = j == 0 || j == ny;
                *k = if on_x || on_y { NodeKind::Boundary } else { NodeKind::Interior };
                corner_mask[[i, j]] = on_x && on_y;
            }
        }
        Shape::UnitDisk => {
            let tol = 1e-12;
            for ((i, j), k) in kind.indexed_iter_mut() {
                let x = pos(i, j);
                if x[0] * x[0] + x[1] * x[1] < 1.0 - tol {
                    *k = NodeKind::Interior;
                }
            }
        }
    }

    let mut omega_mask = Array2::from_elem(dims, false);
    for ((i, j), m) in omega_mask.indexed_iter_mut() {
        *m = kind[[i, j]] == NodeKind::Interior && spec.in_omega(pos(i, j));
    }

    // Neighbour table and cut points.
    let mut cuts = Vec::new();
    let mut nbrs = Array2::from_elem(dims, [Nbr::Node(0, 0); 4]);
    for i in 0..=nx {
        for j in 0..=ny {
            if kind[[i, j]] != NodeKind::Interior {
                continue;
            }
            let mut row = [Nbr::Node(0, 0); 4];
            for (d, &(axis, sign)) in DIRS.iter().enumerate() {
                let (ni, nj) = step(i, j, axis, sign);
                if kind[[ni, nj]] != NodeKind::Exterior {
                    row[d] = Nbr::Node(ni, nj);
                    continue;
                }
                // Only the disk has exterior nodes.
                let x = pos(i, j);
                let h = if axis == 0 { hx } else { hy };
                let other = x[1 - axis];
                let half_chord = (1.0 - other * other).max(0.0).sqrt();
                let dist = sign * half_chord - x[axis];
                let frac = (dist / (sign * h)).clamp(1e-12, 1.0);
                let mut cp = x;
                cp[axis] += sign * frac * h;
                row[d] = Nbr::Cut(cuts.len(), frac);
                cuts.push(Cut { pos: cp, node: (i, j), dir: d, frac });
            }
            nbrs[[i, j]] = row;
        }
    }

    let boundary = match spec.shape {
        Shape::UnitSquare => square_boundary(nx, ny, hx, hy),
        Shape::UnitDisk => disk_boundary(&cuts),
    };

    let quad_weights_space = match spec.shape {
        Shape::UnitSquare => {
            let mut w = Array2::zeros(dims);
            for ((i, j), q) in w.indexed_iter_mut() {
                let wx = if i == 0 || i == nx { 0.5 } else { 1.0 };
                let wy = if j == 0 || j == ny { 0.5 } else { 1.0 };
                *q = wx * wy * hx * hy;
            }
            w
        }
        Shape::UnitDisk => disk_weights(&kind, origin, hx, hy),
    };

    Ok(SpaceTimeGrid {
        spec,
        nx,
        ny,
        nt,
        t_final,
        hx,
        hy,
        dt: t_final / nt as f64,
        origin,
        kind,
        omega_mask,
        corner_mask,
        quad_weights_space,
        boundary,
        cuts,
        nbrs,
    })
}

pub(crate) fn step(i: usize, j: usize, axis: usize, sign: f64) -> (usize, usize) {
    let d = if sign > 0.0 { 1isize } else { -1 };
    if axis == 0 {
        ((i as isize + d) as usize, j)
    } else {
        (i, (j as isize + d) as usize)
    }
}

fn square_boundary(nx: usize, ny: usize, hx: f64, hy: f64) -> Vec<BoundaryPoint> {
    let mut out = Vec::with_capacity(2 * (nx + ny + 2));
    // Each side carries its own trapezoid rule; corners appear once per side.
    let sides: [([f64; 2], [isize; 2], bool); 4] = [
        ([-1.0, 0.0], [1, 0], true),  // x1 = 0
        ([1.0, 0.0], [-1, 0], true),  // x1 = 1
        ([0.0, -1.0], [0, 1], false), // x2 = 0
        ([0.0, 1.0], [0, -1], false), // x2 = 1
    ];
    for (normal, inward, vertical) in sides {
        let n = if vertical { ny } else { nx };
        let h = if vertical { hy } else { hx };
        for k in 0..=n {
            let (i, j) = if vertical {
                (if normal[0] < 0.0 { 0 } else { nx }, k)
            } else {
                (k, if normal[1] < 0.0 { 0 } else { ny })
            };
            let w = if k == 0 || k == n { 0.5 * h } else { h };
            out.push(BoundaryPoint {
                pos: [i as f64 * hx, j as f64 * hy],
                normal,
                arc_weight: w,
                corner: k == 0 || k == n,
                anchor: Anchor::Node { i, j, inward },
            });
        }
    }
    out
}

/// Boundary samples for the disk: cuts on x1-lines where |nu_1| >= 1/sqrt 2 and
/// cuts on x2-lines where |nu_2| > 1/sqrt 2, so each arc is covered once and
/// the normal derivative can be recovered from the grid line through the cut.
fn disk_boundary(cuts: &[Cut]) -> Vec<BoundaryPoint> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut pts: Vec<(f64, usize)> = cuts
        .iter()
        .enumerate()
        .filter(|(_, c)| {
            let axis = DIRS[c.dir].0;
            let nu = c.pos[axis].abs();
            if axis == 0 {
                nu >= s
            } else {
                nu > s
            }
        })
        .map(|(k, c)| (c.pos[1].atan2(c.pos[0]), k))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pts.len();
    let two_pi = 2.0 * std::f64::consts::PI;
    (0..n)
        .map(|k| {
            let prev = pts[(k + n - 1) % n].0;
            let next = pts[(k + 1) % n].0;
            let theta = pts[k].0;
            let gap_prev = (theta - prev).rem_euclid(two_pi);
            let gap_next = (next - theta).rem_euclid(two_pi);
            let c = &cuts[pts[k].1];
            BoundaryPoint {
                pos: c.pos,
                normal: [theta.cos(), theta.sin()],
                arc_weight: 0.5 * (gap_prev + gap_next),
                corner: false,
                anchor: Anchor::Cut(pts[k].1),
            }
        })
        .collect()
}

/// Area of the rectangle `[x0, x1] x [y0, y1]` inside the unit disk.
fn rect_disk_area(x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    const SUB: usize = 64;
    let dx = (x1 - x0) / SUB as f64;
    let mut acc = 0.0;
    for k in 0..SUB {
        let x = x0 + (k as f64 + 0.5) * dx;
        let s = (1.0 - x * x).max(0.0).sqrt();
        acc += (y1.min(s) - y0.max(-s)).max(0.0);
    }
    acc * dx
}

/// Cut-cell weights: each node owns the part of its dual cell inside the disk;
/// the inside part of an exterior node's cell goes to the nearest interior node.
fn disk_weights(kind: &Array2<NodeKind>, origin: [f64; 2], hx: f64, hy: f64) -> Array2<f64> {
    let (mx, my) = kind.dim();
    let mut w = Array2::zeros((mx, my));
    for i in 0..mx {
        for j in 0..my {
            let x = origin[0] + i as f64 * hx;
            let y = origin[1] + j as f64 * hy;
            let a = rect_disk_area(x - 0.5 * hx, x + 0.5 * hx, y - 0.5 * hy, y + 0.5 * hy);
            if a <= 0.0 {
                continue;
            }
            if kind[[i, j]] == NodeKind::Interior {
                w[[i, j]] += a;
                continue;
            }
            let mut best: Option<((usize, usize), f64)> = None;
            for di in -1isize..=1 {
                for dj in -1isize..=1 {
                    let (ni, nj) = (i as isize + di, j as isize + dj);
                    if ni < 0 || nj < 0 || ni >= mx as isize || nj >= my as isize {
                        continue;
                    }
                    let (ni, nj) = (ni as usize, nj as usize);
                    if kind[[ni, nj]] != NodeKind::Interior {
                        continue;
                    }
                    let d = ((di as f64) * hx).hypot((dj as f64) * hy);
                    if best.is_none_or(|(_, bd)| d < bd) {
                        best = Some(((ni, nj), d));
                    }
                }
            }
            if let Some(((ni, nj), _)) = best {
                w[[ni, nj]] += a;
            }
        }
    }
    w
}

/// Complex samples on the spatial grid at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    pub values: Array2<C64>,
    /// Values at the disk cut points; empty on the square.
    pub trace: Vec<C64>,
}

impl ComplexField {
    pub fn zeros(grid: &SpaceTimeGrid) -> Self {
        Self { values: Array2::zeros(grid.dims()), trace: vec![C64::new(0.0, 0.0); grid.cuts.len()] }
    }

    /// Samples `f` at every node and cut point.
    pub fn from_fn(grid: &SpaceTimeGrid, f: impl Fn([f64; 2]) -> C64) -> Self {
        let values = Array2::from_shape_fn(grid.dims(), |(i, j)| f(grid.x(i, j)));
        let trace = grid.cuts.iter().map(|c| f(c.pos)).collect();
        Self { values, trace }
    }

    pub fn check_grid(&self, grid: &SpaceTimeGrid) -> Result<()> {
        if self.values.dim() != grid.dims() || self.trace.len() != grid.cuts.len() {
            return Err(Error::ShapeMismatch(format!(
                "field {:?} (+{} trace) vs grid {:?} (+{} cuts)",
                self.values.dim(),
                self.trace.len(),
                grid.dims(),
                grid.cuts.len()
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().chain(self.trace.iter()).all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self { values: self.values.mapv(&f), trace: self.trace.iter().map(|&z| f(z)).collect() }
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map(|z| z * s)
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Self {
        let mut values = self.values.clone();
        values.zip_mut_with(&other.values, |a, &b| *a = f(*a, b));
        let trace = self.trace.iter().zip(&other.trace).map(|(&a, &b)| f(a, b)).collect();
        Self { values, trace }
    }

    /// Pointwise real map over domain nodes; exterior nodes get 0.
    pub fn real_map(&self, grid: &SpaceTimeGrid, f: impl Fn(C64) -> f64) -> Array2<f64> {
        Array2::from_shape_fn(grid.dims(), |(i, j)| {
            if grid.kind[[i, j]] == NodeKind::Exterior {
                0.0
            } else {
                f(self.values[[i, j]])
            }
        })
    }

    /// Discrete L2 norm squared over the domain.
    pub fn l2_sq(&self, grid: &SpaceTimeGrid) -> f64 {
        integrate_space(&self.real_map(grid, |z| z.norm_sqr()), &grid.quad_weights_space)
    }

    pub fn max_abs(&self, grid: &SpaceTimeGrid) -> f64 {
        self.real_map(grid, |z| z.norm()).iter().fold(0.0, |m, &v| m.max(v))
    }
}

/// Complex samples on the grid at every time level `t_0 .. t_nt`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeField {
    pub slices: Vec<ComplexField>,
}

impl SpaceTimeField {
    pub fn zeros(grid: &SpaceTimeGrid) -> Self {
        Self { slices: vec![ComplexField::zeros(grid); grid.nt + 1] }
    }

    pub fn from_fn(grid: &SpaceTimeGrid, f: impl Fn(f64, [f64; 2]) -> C64) -> Self {
        Self { slices: grid.times().into_iter().map(|t| ComplexField::from_fn(grid, |x| f(t, x))).collect() }
    }

    pub fn check_grid(&self, grid: &SpaceTimeGrid) -> Result<()> {
        if self.slices.len() != grid.nt + 1 {
            return Err(Error::ShapeMismatch(format!(
                "{} time slices for nt = {}",
                self.slices.len(),
                grid.nt
            )));
        }
        self.slices.iter().try_for_each(|s| s.check_grid(grid))
    }

    pub fn is_finite(&self) -> bool {
        self.slices.iter().all(ComplexField::is_finite)
    }

    pub fn map_slices(&self, f: impl Fn(&ComplexField) -> ComplexField) -> Self {
        Self { slices: self.slices.iter().map(f).collect() }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64 + Copy) -> Self {
        Self { slices: self.slices.iter().zip(&other.slices).map(|(a, b)| a.zip_with(b, f)).collect() }
    }

    pub fn real_map(&self, grid: &SpaceTimeGrid, f: impl Fn(C64) -> f64 + Copy) -> Vec<Array2<f64>> {
        self.slices.iter().map(|s| s.real_map(grid, f)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> DomainSpec {
        DomainSpec::unit_square([0.5, 0.5], 0.15)
    }

    #[test]
    fn square_weights_sum_to_one() {
        let g = build_grid(square(), 32, 32, 32, 1.0).unwrap();
        assert_eq!(g.quad_weights_space.sum(), 1.0);
        assert!((g.quad_weights_boundary().iter().sum::<f64>() - 4.0).abs() < 1e-14);
        assert_eq!(g.dt, 1.0 / 32.0);
    }

    #[test]
    fn disk_weights_approximate_area() {
        let g = build_grid(DomainSpec::unit_disk([0.0, 0.0], 0.3), 128, 128, 16, 1.0).unwrap();
        let pi = std::f64::consts::PI;
        let area = g.quad_weights_space.sum();
        assert!(area >= 0.98 * pi && area <= 1.02 * pi, "area {area}");
        let per: f64 = g.quad_weights_boundary().iter().sum();
        assert!((per - 2.0 * pi).abs() < 1e-12);
        // Weights live on interior nodes only.
        for ((i, j), &w) in g.quad_weights_space.indexed_iter() {
            if w > 0.0 {
                assert!(g.is_interior(i, j));
            }
        }
    }

    #[test]
    fn masks_partition() {
        for spec in [square(), DomainSpec::unit_disk([0.1, -0.2], 0.3)] {
            let g = build_grid(spec, 32, 32, 16, 1.0).unwrap();
            let int = g.interior_mask();
            let bnd = g.boundary_mask();
            for ((i, j), &o) in g.omega_mask.indexed_iter() {
                assert!(!(int[[i, j]] && bnd[[i, j]]));
                if o {
                    assert!(int[[i, j]]);
                }
            }
            assert!(g.omega_mask.iter().any(|&o| o));
        }
    }

    #[test]
    fn rejects_touching_ball_and_small_grids() {
        let touching = DomainSpec::unit_square([0.5, 0.5], 0.5);
        assert!(matches!(build_grid(touching, 32, 32, 32, 1.0), Err(Error::InvalidDomain(_))));
        // Strictly inside, but closer than one cell.
        let tight = DomainSpec::unit_square([0.5, 0.5], 0.49);
        assert!(build_grid(tight, 32, 32, 32, 1.0).is_err());
        assert!(build_grid(square(), 8, 32, 32, 1.0).is_err());
        assert!(build_grid(square(), 32, 32, 32, 0.0).is_err());
        assert!(build_grid(DomainSpec::unit_disk([0.0, 0.0], 0.2), 32, 48, 32, 1.0).is_err());
    }

    #[test]
    fn disk_cuts_lie_on_circle() {
        let g = build_grid(DomainSpec::unit_disk([0.0, 0.0], 0.3), 40, 40, 16, 1.0).unwrap();
        assert!(!g.cuts.is_empty());
        for c in &g.cuts {
            assert!((c.pos[0].hypot(c.pos[1]) - 1.0).abs() < 1e-12);
            assert!(c.frac > 0.0 && c.frac <= 1.0);
        }
    }
}
