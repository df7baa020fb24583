//! Coefficient algebra of the Ginzburg-Landau operator and its discrete
//! application.
//!
//! `F y = y_t - (1+ib) Δy + (1+ic)|y|^2 y`, `P y = (α1 + iβ1) y_t + Δy`,
//! `G y = P y - (α2 + iβ2)|y|^2 y`, and `F = -(1+ib) G`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{laplacian, time_derivative, ComplexField, LaplacianBc, SpaceTimeField, SpaceTimeGrid, C64};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GLCoeffs {
    pub b: f64,
    pub c: f64,
    pub alpha1: f64,
    pub beta1: f64,
    pub alpha2: f64,
    pub beta2: f64,
    pub gamma1: C64,
    pub gamma2: C64,
}

pub fn derive_coeffs(b: f64, c: f64) -> GLCoeffs {
    let d = 1.0 + b * b;
    let (alpha1, beta1) = (-1.0 / d, b / d);
    let (alpha2, beta2) = ((1.0 + b * c) / d, (c - b) / d);
    // 1/(α1 + iβ1) = -(1 + ib).
    GLCoeffs {
        b,
        c,
        alpha1,
        beta1,
        alpha2,
        beta2,
        gamma1: C64::new(-1.0, -b),
        gamma2: C64::new(alpha2, beta2),
    }
}

impl GLCoeffs {
    pub fn gamma1_sq(&self) -> f64 {
        self.gamma1.norm_sqr()
    }

    /// `(5/16 - β1²|γ1|²/2) α2² + β1 α2 α1 β2 |γ1|² / 2`.
    pub fn t_positivity(&self) -> f64 {
        let g = self.gamma1_sq();
        (5.0 / 16.0 - 0.5 * self.beta1 * self.beta1 * g) * self.alpha2 * self.alpha2
            + 0.5 * self.beta1 * self.alpha2 * self.alpha1 * self.beta2 * g
    }

    /// Lower bound `(5/32) α2² (2 - |γ1|²)`.
    pub fn t_positivity_bound(&self) -> f64 {
        5.0 / 32.0 * self.alpha2 * self.alpha2 * (2.0 - self.gamma1_sq())
    }

    /// Least `δ0` with `|β2| <= δ0 α2`, if `α2 > 0`.
    pub fn least_delta0(&self) -> Option<f64> {
        (self.alpha2 > 0.0).then(|| self.beta2.abs() / self.alpha2)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Clause {
    pub name: &'static str,
    pub holds: bool,
    /// Slack of the inequality; non-negative when it holds.
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    pub pass: bool,
    pub clauses: Vec<Clause>,
}

/// Does the witness pair `(r0, delta0)` certify `|b| <= r0 < 1`, `α2 > 0`,
/// `|β2| <= δ0 α2`?
pub fn check_condition1(coeffs: &GLCoeffs, r0: f64, delta0: f64) -> Result<ConditionReport> {
    if !(r0 > 0.0 && r0 < 1.0) {
        return Err(Error::InvalidArgument(format!("r0 must lie in (0, 1), got {r0}")));
    }
    if !(delta0 > 0.0 && delta0 < 0.125) {
        return Err(Error::InvalidArgument(format!("delta0 must lie in (0, 1/8), got {delta0}")));
    }
    let m1 = r0 - coeffs.b.abs();
    let m2 = coeffs.alpha2;
    let m3 = delta0 * coeffs.alpha2 - coeffs.beta2.abs();
    let clauses = vec![
        Clause { name: "|b| <= r0", holds: m1 >= 0.0, margin: m1 },
        Clause { name: "alpha2 > 0", holds: m2 > 0.0, margin: m2 },
        Clause { name: "|beta2| <= delta0 * alpha2", holds: m3 >= 0.0, margin: m3 },
    ];
    Ok(ConditionReport { pass: clauses.iter().all(|c| c.holds), clauses })
}

fn check_slices(y: &SpaceTimeField, grid: &SpaceTimeGrid) -> Result<()> {
    y.check_grid(grid)?;
    if y.slices.len() < 3 {
        return Err(Error::ShapeMismatch("at least 3 time slices are required".into()));
    }
    Ok(())
}

/// Pointwise combination `a y_t + l Δy + n |y|^2 y` per slice.
fn combine(y: &SpaceTimeField, grid: &SpaceTimeGrid, bc: LaplacianBc, a: C64, l: C64, n: C64) -> Result<SpaceTimeField> {
    check_slices(y, grid)?;
    let yt = time_derivative(y, grid)?;
    let slices = y
        .slices
        .par_iter()
        .zip(yt.slices.par_iter())
        .map(|(s, st)| {
            let lap = laplacian(s, grid, bc)?;
            let mut out = ComplexField::zeros(grid);
            for ((idx, o), v) in out.values.indexed_iter_mut().zip(s.values.iter()) {
                if grid.kind[idx] == crate::grid::NodeKind::Exterior {
                    continue;
                }
                *o = a * st.values[idx] + l * lap.values[idx] + n * v.norm_sqr() * v;
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpaceTimeField { slices })
}

/// `F y = y_t - (1+ib) Δy + (1+ic)|y|^2 y`.
pub fn apply_f(y: &SpaceTimeField, grid: &SpaceTimeGrid, coeffs: &GLCoeffs, bc: LaplacianBc) -> Result<SpaceTimeField> {
    combine(y, grid, bc, C64::new(1.0, 0.0), -C64::new(1.0, coeffs.b), C64::new(1.0, coeffs.c))
}

/// Linear part `y_t - (1+ib) Δy`.
pub fn apply_f_linear(y: &SpaceTimeField, grid: &SpaceTimeGrid, coeffs: &GLCoeffs, bc: LaplacianBc) -> Result<SpaceTimeField> {
    combine(y, grid, bc, C64::new(1.0, 0.0), -C64::new(1.0, coeffs.b), C64::new(0.0, 0.0))
}

/// `P y = (α1 + iβ1) y_t + Δy`.
pub fn apply_p(y: &SpaceTimeField, grid: &SpaceTimeGrid, coeffs: &GLCoeffs, bc: LaplacianBc) -> Result<SpaceTimeField> {
    combine(y, grid, bc, C64::new(coeffs.alpha1, coeffs.beta1), C64::new(1.0, 0.0), C64::new(0.0, 0.0))
}

/// `G y = P y - (α2 + iβ2)|y|^2 y`.
pub fn apply_g(y: &SpaceTimeField, grid: &SpaceTimeGrid, coeffs: &GLCoeffs, bc: LaplacianBc) -> Result<SpaceTimeField> {
    combine(y, grid, bc, C64::new(coeffs.alpha1, coeffs.beta1), C64::new(1.0, 0.0), -coeffs.gamma2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, DomainSpec};
    use proptest::prelude::*;

    fn grid() -> SpaceTimeGrid {
        build_grid(DomainSpec::unit_square([0.5, 0.5], 0.2), 16, 16, 16, 1.0).unwrap()
    }

    #[test]
    fn coefficient_examples() {
        let k = derive_coeffs(0.0, 0.0);
        assert_eq!((k.alpha1, k.beta1, k.alpha2, k.beta2), (-1.0, 0.0, 1.0, 0.0));
        let k = derive_coeffs(0.5, 0.6);
        assert!((k.alpha2 - 1.04).abs() < 1e-15 && (k.beta2 - 0.08).abs() < 1e-15);
        let k = derive_coeffs(1.0, 1.0);
        assert_eq!((k.alpha2, k.beta2), (1.0, 0.0));
    }

    #[test]
    fn condition_examples() {
        let k = derive_coeffs(0.5, 0.6);
        assert!(check_condition1(&k, 0.6, 0.1).unwrap().pass);
        let r = check_condition1(&k, 0.6, 0.05).unwrap();
        assert!(!r.pass && !r.clauses[2].holds && r.clauses[0].holds);
        assert!(!check_condition1(&derive_coeffs(0.0, -2.0), 0.5, 0.1).unwrap().pass);
        assert!(check_condition1(&k, 1.0, 0.1).is_err());
        assert!(check_condition1(&k, 0.5, 0.125).is_err());
        assert!((k.least_delta0().unwrap() - 0.08 / 1.04).abs() < 1e-15);
    }

    #[test]
    fn operator_examples() {
        let g = grid();
        let k = derive_coeffs(0.0, 0.0);
        let zero = SpaceTimeField::zeros(&g);
        let f = apply_f(&zero, &g, &k, LaplacianBc::Neumann0).unwrap();
        assert!(f.slices.iter().all(|s| s.values.iter().all(|z| z.norm() == 0.0)));
        let a = C64::new(0.7, -0.2);
        let y = SpaceTimeField::from_fn(&g, |_, _| a);
        let f = apply_f(&y, &g, &k, LaplacianBc::Neumann0).unwrap();
        let e = a.norm_sqr() * a;
        assert!(f.slices.iter().all(|s| s.values.iter().all(|z| (z - e).norm() < 1e-14)));
        let y = SpaceTimeField::from_fn(&g, |t, _| C64::new(t, 0.0));
        let gy = apply_g(&y, &g, &k, LaplacianBc::Neumann0).unwrap();
        for (kk, s) in gy.slices.iter().enumerate() {
            let t = g.t(kk);
            assert!((s.values[[5, 5]] - C64::new(-(1.0 + t * t * t), 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn f_is_minus_one_plus_ib_times_g() {
        let g = grid();
        let k = derive_coeffs(0.3, -0.4);
        let y = SpaceTimeField::from_fn(&g, |t, x| C64::new((x[0] * 3.0 + t).sin(), x[1] * t + x[0] * x[0]));
        let f = apply_f(&y, &g, &k, LaplacianBc::GhostFromField).unwrap();
        let gg = apply_g(&y, &g, &k, LaplacianBc::GhostFromField).unwrap();
        let fmax = f.slices.iter().flat_map(|s| s.values.iter()).fold(0.0f64, |m, z| m.max(z.norm()));
        for (a, b) in f.slices.iter().zip(&gg.slices) {
            for (x, z) in a.values.iter().zip(b.values.iter()) {
                assert!((x + C64::new(1.0, k.b) * z).norm() <= 1e-12 * fmax);
            }
        }
        // Conjugation flips the signs of b and c.
        let kc = derive_coeffs(-0.3, 0.4);
        let yc = y.map_slices(|s| s.conj());
        let fc = apply_f(&yc, &g, &kc, LaplacianBc::GhostFromField).unwrap();
        for (a, b) in f.slices.iter().zip(&fc.slices) {
            for (x, z) in a.values.iter().zip(b.values.iter()) {
                assert!((x.conj() - z).norm() <= 1e-12 * fmax);
            }
        }
    }

    proptest! {
        #[test]
        fn coefficient_identities(b in -0.99f64..0.99, c in -5.0f64..5.0) {
            let k = derive_coeffs(b, c);
            let g1 = C64::new(1.0, 0.0) / C64::new(k.alpha1, k.beta1);
            prop_assert!((g1 - k.gamma1).norm() < 1e-14);
            let g = k.gamma1_sq();
            prop_assert!((g - (1.0 + b * b)).abs() < 1e-14);
            prop_assert!(((k.alpha1 * k.alpha1 + k.beta1 * k.beta1) * (1.0 + b * b) - 1.0).abs() < 1e-14);
            prop_assert!((1.0 - k.beta1 * k.beta1 * g + k.alpha1).abs() < 1e-14);
            prop_assert!((1.0 - k.alpha1 * k.alpha1 * g + k.alpha1 * b * b).abs() < 1e-14);
            prop_assert!((1.0 - k.beta1 * k.beta1 * g + k.beta1 * k.alpha1 * g - (1.0 - b) / (1.0 + b * b)).abs() < 1e-14);
            let im = (k.gamma1 * k.gamma2).im;
            prop_assert!((im - (k.alpha1 * k.beta2 - k.alpha2 * k.beta1) * g).abs() < 1e-13 * (1.0 + c.abs()));
            prop_assert!(k.alpha1 > -1.0 && k.alpha1 < 0.0 && k.beta1.abs() <= 0.5);
        }
    }
}
