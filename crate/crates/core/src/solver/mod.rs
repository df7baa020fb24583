//! IMEX time stepping for `y_t - (1+ib) Δy + (1+ic)|y|^2 y = f`.
//!
//! The linear part is implicit (backward Euler or Crank-Nicolson) with a
//! banded LU factorisation cached per step size. The cubic term is explicit
//! for backward Euler. For Crank-Nicolson it is Strang split around the linear
//! step and advanced by its exact pointwise flow
//! `y (1 + 2|y|^2 τ)^{-(1+ic)/2}`.

mod io;

pub use io::{read_trajectory, write_trajectory, write_trajectory_csv, TrajectoryHeader};

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::banded::{BandLu, BandMatrix};
use crate::error::{Error, Result};
use crate::grid::{
    integrate_space, laplacian, ComplexField, LaplacianBc, NodeKind, Shape, SpaceTimeField, SpaceTimeGrid, C64,
    Nbr,
};
use crate::operator::GLCoeffs;

/// `(t, x) -> value`.
pub type DataFn = Arc<dyn Fn(f64, [f64; 2]) -> C64 + Send + Sync>;
/// `(t, x, outward normal) -> ∂y/∂ν`.
pub type FluxFn = Arc<dyn Fn(f64, [f64; 2], [f64; 2]) -> C64 + Send + Sync>;

#[derive(Clone)]
pub enum BoundaryCondition {
    Dirichlet0,
    Neumann0,
    DirichletData(DataFn),
    NeumannData(FluxFn),
}

impl BoundaryCondition {
    fn is_dirichlet(&self) -> bool {
        matches!(self, Self::Dirichlet0 | Self::DirichletData(_))
    }

    /// Laplacian ghost rule matching the homogeneous version of this condition.
    pub fn laplacian_bc(&self) -> LaplacianBc {
        if self.is_dirichlet() {
            LaplacianBc::Dirichlet0
        } else {
            LaplacianBc::Neumann0
        }
    }
}

impl fmt::Debug for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Dirichlet0 => "Dirichlet0",
            Self::Neumann0 => "Neumann0",
            Self::DirichletData(_) => "DirichletData(..)",
            Self::NeumannData(_) => "NeumannData(..)",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ImexBe,
    ImexCn,
}

#[derive(Clone)]
pub struct SolveConfig {
    pub coeffs: GLCoeffs,
    pub bc: BoundaryCondition,
    pub scheme: Scheme,
    pub source: Option<DataFn>,
}

impl fmt::Debug for SolveConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SolveConfig")
            .field("coeffs", &self.coeffs)
            .field("bc", &self.bc)
            .field("scheme", &self.scheme)
            .field("source", &self.source.as_ref().map(|_| ".."))
            .finish()
    }
}

/// Largest admissible `dt max|y|^2`.
pub const STIFFNESS_BOUND: f64 = 0.5;
const MAX_LEVEL: u32 = 30;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepDiagnostic {
    pub t: f64,
    pub l2_sq: f64,
    /// Number of sub-steps used for this output interval.
    pub substeps: u32,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub field: SpaceTimeField,
    pub diagnostics: Vec<StepDiagnostic>,
}

#[derive(Clone, Copy, Debug)]
enum BSource {
    Node(usize, usize),
    Cut(usize),
    Ghost { pos: [f64; 2], normal: [f64; 2] },
}

#[derive(Clone, Copy, Debug)]
struct BTerm {
    coef: f64,
    src: BSource,
}

/// Discrete Laplacian split into unknown-unknown couplings and boundary data.
struct Stencil {
    nodes: Vec<(usize, usize)>,
    rows: Vec<Vec<(usize, f64)>>,
    bterms: Vec<Vec<BTerm>>,
}

impl Stencil {
    fn build(grid: &SpaceTimeGrid, dirichlet: bool) -> Result<Self> {
        if grid.spec.shape == Shape::UnitDisk && !dirichlet {
            return Err(Error::Unsupported("Neumann conditions on the unit disk".into()));
        }
        let unknown = |k: NodeKind| k == NodeKind::Interior || (!dirichlet && k == NodeKind::Boundary);
        let mut index = ndarray::Array2::from_elem(grid.dims(), None);
        let mut nodes = Vec::new();
        for ((i, j), &k) in grid.kind.indexed_iter() {
            if unknown(k) {
                index[[i, j]] = Some(nodes.len());
                nodes.push((i, j));
            }
        }
        let n = [grid.nx, grid.ny];
        let mut rows = Vec::with_capacity(nodes.len());
        let mut bterms = Vec::with_capacity(nodes.len());
        for &(i, j) in &nodes {
            let mut row = Vec::with_capacity(5);
            let mut bt = Vec::new();
            let mut diag = 0.0;
            if grid.kind[[i, j]] == NodeKind::Interior {
                for axis in 0..2 {
                    let h = grid.spacing(axis);
                    let side = |dir: usize| match grid.nbr(i, j, dir) {
                        Nbr::Node(a, b) => (h, Some((a, b)), None),
                        Nbr::Cut(c, frac) => (frac * h, None, Some(c)),
                    };
                    let (hp, np, cp) = side(2 * axis);
                    let (hm, nm, cm) = side(2 * axis + 1);
                    let s = hp + hm;
                    diag -= 2.0 / (hp * hm);
                    for (w, node, cut) in [(2.0 / (hp * s), np, cp), (2.0 / (hm * s), nm, cm)] {
                        match (node, cut) {
                            (Some((a, b)), _) => match index[[a, b]] {
                                Some(col) => row.push((col, w)),
                                None => bt.push(BTerm { coef: w, src: BSource::Node(a, b) }),
                            },
                            (None, Some(c)) => bt.push(BTerm { coef: w, src: BSource::Cut(c) }),
                            _ => unreachable!(),
                        }
                    }
                }
            } else {
                // Square boundary node under a Neumann condition: mirror ghosts.
                let idx = [i, j];
                for axis in 0..2 {
                    let h = grid.spacing(axis);
                    let h2 = h * h;
                    let at = |k: usize| {
                        let mut p = idx;
                        p[axis] = k;
                        index[[p[0], p[1]]].expect("square nodes are unknowns")
                    };
                    let k = idx[axis];
                    diag -= 2.0 / h2;
                    if k == 0 || k == n[axis] {
                        let inner = if k == 0 { 1 } else { k - 1 };
                        row.push((at(inner), 2.0 / h2));
                        let mut normal = [0.0; 2];
                        normal[axis] = if k == 0 { -1.0 } else { 1.0 };
                        bt.push(BTerm { coef: 2.0 / h, src: BSource::Ghost { pos: grid.x(i, j), normal } });
                    } else {
                        row.push((at(k + 1), 1.0 / h2));
                        row.push((at(k - 1), 1.0 / h2));
                    }
                }
            }
            row.push((index[[i, j]].unwrap(), diag));
            rows.push(row);
            bterms.push(bt);
        }
        Ok(Self { nodes, rows, bterms })
    }

    fn apply(&self, y: &[C64]) -> Vec<C64> {
        self.rows.iter().map(|r| r.iter().fold(C64::new(0.0, 0.0), |acc, &(c, w)| acc + y[c] * w)).collect()
    }

    /// Boundary-data contribution to `L y` at time `t`.
    fn boundary_vec(&self, grid: &SpaceTimeGrid, bc: &BoundaryCondition, t: f64) -> Option<Vec<C64>> {
        let zero = C64::new(0.0, 0.0);
        match bc {
            BoundaryCondition::Dirichlet0 | BoundaryCondition::Neumann0 => None,
            BoundaryCondition::DirichletData(g) => Some(
                self.bterms
                    .iter()
                    .map(|bt| {
                        bt.iter().fold(zero, |acc, b| {
                            acc + b.coef
                                * match b.src {
                                    BSource::Node(a, c) => g(t, grid.x(a, c)),
                                    BSource::Cut(k) => g(t, grid.cuts[k].pos),
                                    BSource::Ghost { .. } => zero,
                                }
                        })
                    })
                    .collect(),
            ),
            BoundaryCondition::NeumannData(h) => Some(
                self.bterms
                    .iter()
                    .map(|bt| {
                        bt.iter().fold(zero, |acc, b| match b.src {
                            BSource::Ghost { pos, normal } => acc + b.coef * h(t, pos, normal),
                            _ => acc,
                        })
                    })
                    .collect(),
            ),
        }
    }

    fn system(&self, a: C64) -> Result<BandLu> {
        let rows: Vec<Vec<(usize, C64)>> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut out: Vec<(usize, C64)> = r.iter().map(|&(c, w)| (c, -a * w)).collect();
                out.push((i, C64::new(1.0, 0.0)));
                out
            })
            .collect();
        BandLu::factor(BandMatrix::from_rows(&rows))
    }
}

/// Exact flow of `y' = -(1+ic)|y|^2 y` over time `tau`.
pub fn cubic_flow(y: C64, c: f64, tau: f64) -> C64 {
    let a = y.norm_sqr();
    if a == 0.0 {
        return y;
    }
    let l = (2.0 * a * tau).ln_1p();
    y * (C64::new(-0.5, -0.5 * c) * l).exp()
}

struct Stepper<'a> {
    grid: &'a SpaceTimeGrid,
    cfg: &'a SolveConfig,
    st: Stencil,
    cache: HashMap<u32, BandLu>,
    kappa: C64,
}

impl<'a> Stepper<'a> {
    fn new(grid: &'a SpaceTimeGrid, cfg: &'a SolveConfig) -> Result<Self> {
        let st = Stencil::build(grid, cfg.bc.is_dirichlet())?;
        Ok(Self { grid, cfg, st, cache: HashMap::new(), kappa: C64::new(1.0, cfg.coeffs.b) })
    }

    fn implicit_factor(&self, h: f64) -> f64 {
        match self.cfg.scheme {
            Scheme::ImexBe => h,
            Scheme::ImexCn => 0.5 * h,
        }
    }

    fn lu(&mut self, level: u32, h: f64) -> Result<&BandLu> {
        if !self.cache.contains_key(&level) {
            let a = self.kappa * self.implicit_factor(h);
            let lu = self.st.system(a)?;
            self.cache.insert(level, lu);
        }
        Ok(&self.cache[&level])
    }

    fn source(&self, t: f64) -> Option<Vec<C64>> {
        self.cfg.source.as_ref().map(|f| self.st.nodes.iter().map(|&(i, j)| f(t, self.grid.x(i, j))).collect())
    }

    fn substep(&mut self, y: &[C64], t0: f64, h: f64, level: u32) -> Result<Vec<C64>> {
        let t1 = t0 + h;
        let c = self.cfg.coeffs.c;
        let nl = C64::new(1.0, c);
        let kappa = self.kappa;
        let b1 = self.st.boundary_vec(self.grid, &self.cfg.bc, t1);
        let f1 = self.source(t1);
        let mut rhs: Vec<C64>;
        match self.cfg.scheme {
            Scheme::ImexBe => {
                rhs = y.iter().map(|&v| v - nl * (h * v.norm_sqr()) * v).collect();
                if let Some(b) = &b1 {
                    rhs.iter_mut().zip(b).for_each(|(r, b)| *r += kappa * h * b);
                }
                if let Some(f) = &f1 {
                    rhs.iter_mut().zip(f).for_each(|(r, f)| *r += h * f);
                }
            }
            Scheme::ImexCn => {
                let ys: Vec<C64> = y.iter().map(|&v| cubic_flow(v, c, 0.5 * h)).collect();
                let ly = self.st.apply(&ys);
                rhs = ys.iter().zip(&ly).map(|(&v, &l)| v + kappa * (0.5 * h) * l).collect();
                if let Some(b1) = &b1 {
                    let b0 = self.st.boundary_vec(self.grid, &self.cfg.bc, t0).unwrap();
                    rhs.iter_mut().zip(b0.iter().zip(b1)).for_each(|(r, (a, b))| *r += kappa * (0.5 * h) * (a + b));
                }
                if let Some(f1) = &f1 {
                    let f0 = self.source(t0).unwrap();
                    rhs.iter_mut().zip(f0.iter().zip(f1)).for_each(|(r, (a, b))| *r += (0.5 * h) * (a + b));
                }
            }
        }
        let mut out = self.lu(level, h)?.solve(&rhs)?;
        if self.cfg.scheme == Scheme::ImexCn {
            out.iter_mut().for_each(|v| *v = cubic_flow(*v, c, 0.5 * h));
        }
        Ok(out)
    }

    fn to_field(&self, y: &[C64], t: f64) -> ComplexField {
        let mut f = ComplexField::zeros(self.grid);
        for (&(i, j), &v) in self.st.nodes.iter().zip(y) {
            f.values[[i, j]] = v;
        }
        if let BoundaryCondition::DirichletData(g) = &self.cfg.bc {
            for ((i, j), k) in self.grid.kind.indexed_iter() {
                if *k == NodeKind::Boundary {
                    f.values[[i, j]] = g(t, self.grid.x(i, j));
                }
            }
            for (tr, cut) in f.trace.iter_mut().zip(&self.grid.cuts) {
                *tr = g(t, cut.pos);
            }
        }
        f
    }
}

fn max_sq(y: &[C64]) -> f64 {
    y.iter().fold(0.0, |m, v| m.max(v.norm_sqr()))
}

/// One output step from `t` to `t + grid.dt`, with adaptive sub-stepping.
pub fn step(state: &ComplexField, t: f64, cfg: &SolveConfig, grid: &SpaceTimeGrid) -> Result<ComplexField> {
    let mut s = Stepper::new(grid, cfg)?;
    let y: Vec<C64> = s.st.nodes.iter().map(|&(i, j)| state.values[[i, j]]).collect();
    let (y1, _) = advance(&mut s, &y, t, t + grid.dt)?;
    Ok(s.to_field(&y1, t + grid.dt))
}

fn advance(s: &mut Stepper, y: &[C64], t0: f64, t1: f64) -> Result<(Vec<C64>, u32)> {
    let mut level = 0;
    'outer: loop {
        if level > MAX_LEVEL {
            return Err(Error::StepUnderflow { t: t0, dt: (t1 - t0) / f64::powi(2.0, level as i32) });
        }
        let m = 1u64 << level;
        let h = (t1 - t0) / m as f64;
        let mut cur = y.to_vec();
        for k in 0..m {
            if h * max_sq(&cur) > STIFFNESS_BOUND {
                level += 1;
                continue 'outer;
            }
            cur = s.substep(&cur, t0 + k as f64 * h, h, level)?;
            if cur.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::NonFinite { t: t0 + (k + 1) as f64 * h });
            }
        }
        return Ok((cur, m as u32));
    }
}

/// Solves on `[0, T]` and returns all `nt + 1` slices.
pub fn solve(y0: &ComplexField, cfg: &SolveConfig, grid: &SpaceTimeGrid) -> Result<Trajectory> {
    y0.check_grid(grid)?;
    if !y0.is_finite() {
        return Err(Error::NonFinite { t: 0.0 });
    }
    let mut s = Stepper::new(grid, cfg)?;
    let mut y: Vec<C64> = s.st.nodes.iter().map(|&(i, j)| y0.values[[i, j]]).collect();
    let mut slices = Vec::with_capacity(grid.nt + 1);
    slices.push(y0.clone());
    let mut diagnostics = vec![StepDiagnostic { t: 0.0, l2_sq: y0.l2_sq(grid), substeps: 0 }];
    for k in 0..grid.nt {
        let (t0, t1) = (grid.t(k), grid.t(k + 1));
        let (next, m) = advance(&mut s, &y, t0, t1)?;
        y = next;
        let f = s.to_field(&y, t1);
        diagnostics.push(StepDiagnostic { t: t1, l2_sq: f.l2_sq(grid), substeps: m });
        slices.push(f);
    }
    Ok(Trajectory { field: SpaceTimeField { slices }, diagnostics })
}

/// Normalised discrete energy-balance residual per step for homogeneous data:
/// `|½(‖y_{k+1}‖² - ‖y_k‖²)/dt + D(m) + ‖m‖⁴_{L⁴}|` with `m` the midpoint
/// state and `D(m) = -Re<L_h m, m>` the discrete Dirichlet form.
pub fn energy_balance(y: &SpaceTimeField, grid: &SpaceTimeGrid, bc: LaplacianBc) -> Result<Vec<f64>> {
    y.check_grid(grid)?;
    let w = &grid.quad_weights_space;
    let mut out = Vec::with_capacity(grid.nt);
    for k in 0..grid.nt {
        let (a, b) = (&y.slices[k], &y.slices[k + 1]);
        let dt = grid.t(k + 1) - grid.t(k);
        let m = a.zip_with(b, |p, q| (p + q) * 0.5);
        let lm = laplacian(&m, grid, bc)?;
        let dirichlet = -integrate_space(
            &ndarray::Array2::from_shape_fn(grid.dims(), |ij| (lm.values[ij] * m.values[ij].conj()).re),
            w,
        );
        let quartic = integrate_space(&m.real_map(grid, |z| z.norm_sqr().powi(2)), w);
        let rate = 0.5 * (b.l2_sq(grid) - a.l2_sq(grid)) / dt;
        let scale = rate.abs().max(dirichlet.abs()).max(quartic.abs());
        let r = (rate + dirichlet + quartic).abs();
        out.push(if scale > 0.0 { r / scale } else { 0.0 });
    }
    Ok(out)
}

/// Analytic field with the derivatives needed for a manufactured source.
pub trait Manufactured: Send + Sync {
    fn value(&self, t: f64, x: [f64; 2]) -> C64;
    fn dt(&self, t: f64, x: [f64; 2]) -> C64;
    fn laplacian(&self, t: f64, x: [f64; 2]) -> C64;
}

/// Closure-backed [`Manufactured`] field.
pub struct AnalyticField<F, G, H> {
    pub value: F,
    pub dt: G,
    pub laplacian: H,
}

impl<F, G, H> Manufactured for AnalyticField<F, G, H>
where
    F: Fn(f64, [f64; 2]) -> C64 + Send + Sync,
    G: Fn(f64, [f64; 2]) -> C64 + Send + Sync,
    H: Fn(f64, [f64; 2]) -> C64 + Send + Sync,
{
    fn value(&self, t: f64, x: [f64; 2]) -> C64 {
        (self.value)(t, x)
    }
    fn dt(&self, t: f64, x: [f64; 2]) -> C64 {
        (self.dt)(t, x)
    }
    fn laplacian(&self, t: f64, x: [f64; 2]) -> C64 {
        (self.laplacian)(t, x)
    }
}

/// `f = y*_t - (1+ib) Δy* + (1+ic)|y*|^2 y*` as a source closure.
pub fn manufactured_source_fn(y_star: Arc<dyn Manufactured>, coeffs: &GLCoeffs) -> DataFn {
    let (kb, kc) = (C64::new(1.0, coeffs.b), C64::new(1.0, coeffs.c));
    Arc::new(move |t, x| {
        let v = y_star.value(t, x);
        y_star.dt(t, x) - kb * y_star.laplacian(t, x) + kc * v.norm_sqr() * v
    })
}

/// The manufactured source sampled on the grid.
pub fn manufactured_source(y_star: Arc<dyn Manufactured>, grid: &SpaceTimeGrid, coeffs: &GLCoeffs) -> SpaceTimeField {
    let f = manufactured_source_fn(y_star, coeffs);
    SpaceTimeField::from_fn(grid, |t, x| f(t, x))
}

/// Seeded random trigonometric initial data with `modes` terms, compatible
/// with the homogeneous version of `bc`, scaled so that `max|y0| = amplitude`.
pub fn random_trig_initial(grid: &SpaceTimeGrid, bc: &BoundaryCondition, seed: u64, modes: usize, amplitude: f64) -> Result<ComplexField> {
    if modes == 0 || modes > 8 {
        return Err(Error::InvalidArgument(format!("modes must lie in 1..=8, got {modes}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirichlet = bc.is_dirichlet();
    let terms: Vec<(C64, f64, f64, f64)> = (0..modes)
        .map(|_| {
            let a = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let lo = if dirichlet { 1 } else { 0 };
            let p = rng.gen_range(lo..=3) as f64;
            let q = rng.gen_range(lo..=3) as f64;
            (a, p, q, rng.gen_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    let pi = std::f64::consts::PI;
    let shape = grid.spec.shape;
    let eval = |x: [f64; 2]| -> C64 {
        terms.iter().fold(C64::new(0.0, 0.0), |acc, &(a, p, q, ph)| {
            let v = match (shape, dirichlet) {
                (Shape::UnitSquare, true) => (p * pi * x[0]).sin() * (q * pi * x[1]).sin(),
                (Shape::UnitSquare, false) => (p * pi * x[0]).cos() * (q * pi * x[1]).cos(),
                (Shape::UnitDisk, _) => (1.0 - x[0] * x[0] - x[1] * x[1]) * (p * x[0] + q * x[1] + ph).cos(),
            };
            acc + a * v
        })
    };
    let mut f = ComplexField::from_fn(grid, eval);
    if shape == Shape::UnitDisk {
        f.trace.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
    }
    let m = f.max_abs(grid);
    if m == 0.0 {
        return Ok(f);
    }
    Ok(f.scale(C64::new(amplitude / m, 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, DomainSpec};
    use crate::operator::derive_coeffs;

    fn sq(n: usize, nt: usize, t: f64) -> SpaceTimeGrid {
        build_grid(DomainSpec::unit_square([0.5, 0.5], 0.2), n, n, nt, t).unwrap()
    }

    fn cfg(b: f64, c: f64, bc: BoundaryCondition, scheme: Scheme) -> SolveConfig {
        SolveConfig { coeffs: derive_coeffs(b, c), bc, scheme, source: None }
    }

    #[test]
    fn zero_stays_zero() {
        let g = sq(16, 16, 1.0);
        for scheme in [Scheme::ImexBe, Scheme::ImexCn] {
            let tr = solve(&ComplexField::zeros(&g), &cfg(0.3, 0.4, BoundaryCondition::Neumann0, scheme), &g).unwrap();
            assert!(tr.field.slices.iter().all(|s| s.values.iter().all(|z| z.norm() == 0.0)));
            let one = step(&ComplexField::zeros(&g), 0.0, &cfg(0.3, 0.4, BoundaryCondition::Dirichlet0, scheme), &g).unwrap();
            assert!(one.values.iter().all(|z| z.norm() == 0.0));
        }
    }

    #[test]
    fn cubic_flow_matches_closed_form() {
        let a = 0.8;
        let y = cubic_flow(C64::new(a, 0.0), 0.0, 0.7);
        assert!((y.re - a / (1.0 + 2.0 * a * a * 0.7).sqrt()).abs() < 1e-15);
        // Modulus is independent of c.
        let z = cubic_flow(C64::new(0.3, 0.5), 2.0, 0.4);
        let w = cubic_flow(C64::new(0.3, 0.5), -1.0, 0.4);
        assert!((z.norm() - w.norm()).abs() < 1e-15);
    }

    #[test]
    fn dissipation_dirichlet() {
        let g = sq(32, 32, 0.5);
        let bc = BoundaryCondition::Dirichlet0;
        let y0 = random_trig_initial(&g, &bc, 7, 6, 2.0).unwrap();
        for scheme in [Scheme::ImexBe, Scheme::ImexCn] {
            let tr = solve(&y0, &cfg(0.0, 0.0, bc.clone(), scheme), &g).unwrap();
            for w in tr.diagnostics.windows(2) {
                assert!(w[1].l2_sq < w[0].l2_sq, "{scheme:?} {w:?}");
            }
        }
    }

    #[test]
    fn stress_run_halves_step() {
        let g = sq(16, 16, 0.5);
        let bc = BoundaryCondition::Neumann0;
        let y0 = random_trig_initial(&g, &bc, 3, 4, 30.0).unwrap();
        let tr = solve(&y0, &cfg(0.3, 0.4, bc, Scheme::ImexBe), &g).unwrap();
        assert!(tr.field.is_finite());
        assert!(tr.diagnostics.iter().any(|d| d.substeps > 1));
    }

    #[test]
    fn disk_neumann_is_unsupported() {
        let g = build_grid(DomainSpec::unit_disk([0.0, 0.0], 0.3), 16, 16, 16, 1.0).unwrap();
        let r = solve(&ComplexField::zeros(&g), &cfg(0.0, 0.0, BoundaryCondition::Neumann0, Scheme::ImexCn), &g);
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }

    #[test]
    fn manufactured_examples() {
        let g = sq(16, 16, 1.0);
        let k = derive_coeffs(0.0, 0.0);
        let pi = std::f64::consts::PI;
        let ys = Arc::new(AnalyticField {
            value: move |_t: f64, x: [f64; 2]| C64::new((pi * x[0]).sin() * (pi * x[1]).sin(), 0.0),
            dt: |_t: f64, _x: [f64; 2]| C64::new(0.0, 0.0),
            laplacian: move |_t: f64, x: [f64; 2]| C64::new(-2.0 * pi * pi * (pi * x[0]).sin() * (pi * x[1]).sin(), 0.0),
        });
        let f = manufactured_source(ys, &g, &k);
        let x = g.x(5, 9);
        let y = (pi * x[0]).sin() * (pi * x[1]).sin();
        assert!((f.slices[3].values[[5, 9]].re - (2.0 * pi * pi * y + y * y * y)).abs() < 1e-12);
        let a = C64::new(0.4, 0.3);
        let k = derive_coeffs(0.2, 0.7);
        let ys = Arc::new(AnalyticField {
            value: move |t: f64, _x: [f64; 2]| a * C64::new(0.0, t).exp(),
            dt: move |t: f64, _x: [f64; 2]| C64::new(0.0, 1.0) * a * C64::new(0.0, t).exp(),
            laplacian: |_t: f64, _x: [f64; 2]| C64::new(0.0, 0.0),
        });
        let f = manufactured_source(ys, &g, &k);
        let t = g.t(4);
        let e = (C64::new(0.0, 1.0) * a + C64::new(1.0, 0.7) * a.norm_sqr() * a) * C64::new(0.0, t).exp();
        assert!((f.slices[4].values[[2, 2]] - e).norm() < 1e-14);
        let zero = Arc::new(AnalyticField {
            value: |_t: f64, _x: [f64; 2]| C64::new(0.0, 0.0),
            dt: |_t: f64, _x: [f64; 2]| C64::new(0.0, 0.0),
            laplacian: |_t: f64, _x: [f64; 2]| C64::new(0.0, 0.0),
        });
        let f = manufactured_source(zero, &g, &k);
        assert!(f.slices.iter().all(|s| s.values.iter().all(|z| z.norm() == 0.0)));
    }

    #[test]
    fn energy_balance_zero_trajectory() {
        let g = sq(16, 16, 1.0);
        let r = energy_balance(&SpaceTimeField::zeros(&g), &g, LaplacianBc::Dirichlet0).unwrap();
        assert!(r.iter().all(|&v| v == 0.0));
    }
}
