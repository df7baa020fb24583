//! Analytic complex test fields: sums of separable terms
//! `c F_t(t) F_1(x1) F_2(x2)` whose derivatives are exact.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::C64;

/// One-dimensional factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    /// `e^{r s}` with complex rate `r = (re, im)`.
    Exp([f64; 2]),
    /// `sin(k s + phase)`.
    Sin { k: f64, phase: f64 },
    /// Polynomial with coefficients in increasing degree.
    Poly(Vec<f64>),
}

impl Factor {
    pub fn one() -> Self {
        Factor::Poly(vec![1.0])
    }

    /// Value, first and second derivative.
    pub fn eval(&self, s: f64) -> [C64; 3] {
        match self {
            Factor::Exp(r) => {
                let r = C64::new(r[0], r[1]);
                let e = (r * s).exp();
                [e, r * e, r * r * e]
            }
            Factor::Sin { k, phase } => {
                let a = k * s + phase;
                [C64::new(a.sin(), 0.0), C64::new(k * a.cos(), 0.0), C64::new(-k * k * a.sin(), 0.0)]
            }
            Factor::Poly(c) => {
                let (mut p, mut d1, mut d2) = (0.0, 0.0, 0.0);
                for (n, &a) in c.iter().enumerate().rev() {
                    let nf = n as f64;
                    p = p * s + a;
                    if n >= 1 {
                        d1 = d1 * s + nf * a;
                    }
                    if n >= 2 {
                        d2 = d2 * s + nf * (nf - 1.0) * a;
                    }
                }
                [C64::new(p, 0.0), C64::new(d1, 0.0), C64::new(d2, 0.0)]
            }
        }
    }

    /// Exponential rate used to size finite-difference steps.
    pub fn rate(&self) -> f64 {
        match self {
            Factor::Exp(r) => r[0].hypot(r[1]),
            Factor::Sin { k, .. } => k.abs(),
            Factor::Poly(c) => c.len().saturating_sub(1) as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coef: [f64; 2],
    pub t: Factor,
    pub x1: Factor,
    pub x2: Factor,
}

/// `v` and the derivatives the identity needs at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FieldSample {
    pub v: C64,
    pub vt: C64,
    pub vtt: C64,
    pub grad: [C64; 2],
    pub grad_t: [C64; 2],
    pub hess: [[C64; 2]; 2],
}

impl FieldSample {
    pub fn lap(&self) -> C64 {
        self.hess[0][0] + self.hess[1][1]
    }

    pub fn scaled(&self, s: f64) -> Self {
        let m = |z: C64| z * s;
        Self {
            v: m(self.v),
            vt: m(self.vt),
            vtt: m(self.vtt),
            grad: self.grad.map(m),
            grad_t: self.grad_t.map(m),
            hess: self.hess.map(|r| r.map(m)),
        }
    }
}

/// Sum of separable terms with closed-form derivatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticTestField {
    pub terms: Vec<Term>,
}

/// Tolerance of the construction-time derivative self-check.
pub const SELF_CHECK_TOL: f64 = 1e-6;

impl AnalyticTestField {
    /// Builds the field and checks its derivatives against finite differences.
    pub fn new(terms: Vec<Term>) -> Result<Self> {
        let f = Self { terms };
        let err = f.self_check(0x5eed)?;
        if err > SELF_CHECK_TOL {
            return Err(Error::InvalidArgument(format!("field derivatives disagree with finite differences ({err:e})")));
        }
        Ok(f)
    }

    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    /// `(1+i) t (T-t) sin(pi x1) sin(pi x2)`.
    pub fn bubble(t_final: f64) -> Self {
        let pi = std::f64::consts::PI;
        Self {
            terms: vec![Term {
                coef: [1.0, 1.0],
                t: Factor::Poly(vec![0.0, t_final, -1.0]),
                x1: Factor::Sin { k: pi, phase: 0.0 },
                x2: Factor::Sin { k: pi, phase: 0.0 },
            }],
        }
    }

    /// `e^{it} x1 (1-x1) x2 (1-x2)`.
    pub fn rotating_bump() -> Self {
        let q = Factor::Poly(vec![0.0, 1.0, -1.0]);
        Self { terms: vec![Term { coef: [1.0, 0.0], t: Factor::Exp([0.0, 1.0]), x1: q.clone(), x2: q }] }
    }

    /// Seeded sum of 2 to 4 trigonometric terms.
    pub fn random_trig(seed: u64, t_final: f64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..=4);
        let tau = std::f64::consts::TAU;
        let terms = (0..n)
            .map(|_| {
                let coef = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let t = if rng.gen_bool(0.5) {
                    Factor::Exp([rng.gen_range(-1.0..1.0) / t_final, rng.gen_range(-3.0..3.0) / t_final])
                } else {
                    Factor::Sin { k: rng.gen_range(0.5..3.0) / t_final, phase: rng.gen_range(0.0..tau) }
                };
                let mut sx = || Factor::Sin { k: rng.gen_range(0.5..4.0), phase: rng.gen_range(0.0..tau) };
                Term { coef, t, x1: sx(), x2: sx() }
            })
            .collect();
        Self::new(terms)
    }

    pub fn eval(&self, t: f64, x: [f64; 2]) -> FieldSample {
        let mut s = FieldSample::default();
        for term in &self.terms {
            let c = C64::new(term.coef[0], term.coef[1]);
            let [ft, ft1, ft2] = term.t.eval(t);
            let [f1, f11, f12] = term.x1.eval(x[0]);
            let [f2, f21, f22] = term.x2.eval(x[1]);
            s.v += c * ft * f1 * f2;
            s.vt += c * ft1 * f1 * f2;
            s.vtt += c * ft2 * f1 * f2;
            s.grad[0] += c * ft * f11 * f2;
            s.grad[1] += c * ft * f1 * f21;
            s.grad_t[0] += c * ft1 * f11 * f2;
            s.grad_t[1] += c * ft1 * f1 * f21;
            s.hess[0][0] += c * ft * f12 * f2;
            s.hess[0][1] += c * ft * f11 * f21;
            s.hess[1][1] += c * ft * f1 * f22;
        }
        s.hess[1][0] = s.hess[0][1];
        s
    }

    /// `(time rate, space rate)` bounds used to size finite-difference steps.
    pub fn rates(&self) -> (f64, f64) {
        self.terms.iter().fold((0.0f64, 0.0f64), |(a, b), t| (a.max(t.t.rate()), b.max(t.x1.rate().max(t.x2.rate()))))
    }

    /// Largest relative disagreement between the supplied derivatives and
    /// fourth-order central differences at seeded points in `[0.2, 0.8]^3`.
    pub fn self_check(&self, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (rt, rx) = self.rates();
        let mut worst: f64 = 0.0;
        for _ in 0..8 {
            let t = rng.gen_range(0.2..0.8);
            let x = [rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8)];
            let s = self.eval(t, x);
            let scale = s.v.norm() + s.vt.norm() + s.grad[0].norm() + s.grad[1].norm() + s.lap().norm() + s.vtt.norm();
            if scale == 0.0 {
                continue;
            }
            let ht = 1e-3 / (1.0 + rt);
            let hx = 1e-3 / (1.0 + rx);
            let d = |f: &dyn Fn(f64) -> FieldSample, h: f64, get: &dyn Fn(&FieldSample) -> C64| {
                (get(&f(-2.0 * h)) - get(&f(2.0 * h)) + (get(&f(h)) - get(&f(-h))) * 8.0) / (12.0 * h)
            };
            let in_t = |dt: f64| self.eval(t + dt, x);
            let in_x1 = |dx: f64| self.eval(t, [x[0] + dx, x[1]]);
            let in_x2 = |dx: f64| self.eval(t, [x[0], x[1] + dx]);
            let checks = [
                (d(&in_t, ht, &|s| s.v), s.vt),
                (d(&in_t, ht, &|s| s.vt), s.vtt),
                (d(&in_x1, hx, &|s| s.v), s.grad[0]),
                (d(&in_x2, hx, &|s| s.v), s.grad[1]),
                (d(&in_t, ht, &|s| s.grad[0]), s.grad_t[0]),
                (d(&in_t, ht, &|s| s.grad[1]), s.grad_t[1]),
                (d(&in_x1, hx, &|s| s.grad[0]), s.hess[0][0]),
                (d(&in_x2, hx, &|s| s.grad[0]), s.hess[0][1]),
                (d(&in_x1, hx, &|s| s.grad[1]), s.hess[1][0]),
                (d(&in_x2, hx, &|s| s.grad[1]), s.hess[1][1]),
            ];
            for (fd, an) in checks {
                worst = worst.max((fd - an).norm() / scale);
            }
        }
        if !worst.is_finite() {
            return Err(Error::InvalidArgument("field is not finite on the check points".into()));
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poly_factor_derivatives() {
        let p = Factor::Poly(vec![1.0, -2.0, 3.0, 0.5]);
        let [v, d1, d2] = p.eval(2.0);
        assert_eq!(v.re, 1.0 - 4.0 + 12.0 + 4.0);
        assert_eq!(d1.re, -2.0 + 12.0 + 6.0);
        assert_eq!(d2.re, 6.0 + 6.0);
    }

    #[test]
    fn built_in_fields_pass_self_check() {
        assert!(AnalyticTestField::bubble(1.0).self_check(1).unwrap() < SELF_CHECK_TOL);
        assert!(AnalyticTestField::rotating_bump().self_check(1).unwrap() < SELF_CHECK_TOL);
        for seed in 0..10 {
            let f = AnalyticTestField::random_trig(seed, 1.0).unwrap();
            assert!((2..=4).contains(&f.terms.len()));
        }
        assert_eq!(AnalyticTestField::zero().self_check(1).unwrap(), 0.0);
    }
}
