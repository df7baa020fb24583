//! First-order forward-mode dual numbers over `(t, x1, x2)` and a small
//! complex type generic over the real scalar, so that flux formulas can be
//! written once and evaluated either plainly or with derivatives.

use std::ops::{Add, Mul, Neg, Sub};

pub trait Real: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> {
    fn cst(v: f64) -> Self;
    fn exp(self) -> Self;
    fn scale(self, k: f64) -> Self;
    fn value(self) -> f64;
}

impl Real for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn scale(self, k: f64) -> Self {
        self * k
    }
    fn value(self) -> f64 {
        self
    }
}

/// Value and partial derivatives `(d/dt, d/dx1, d/dx2)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d: [f64; 3],
}

impl Jet {
    pub fn new(v: f64, d: [f64; 3]) -> Self {
        Self { v, d }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet::new(self.v + o.v, [self.d[0] + o.d[0], self.d[1] + o.d[1], self.d[2] + o.d[2]])
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet::new(self.v - o.v, [self.d[0] - o.d[0], self.d[1] - o.d[1], self.d[2] - o.d[2]])
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut d = [0.0; 3];
        for k in 0..3 {
            d[k] = self.d[k] * o.v + self.v * o.d[k];
        }
        Jet::new(self.v * o.v, d)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet::new(-self.v, [-self.d[0], -self.d[1], -self.d[2]])
    }
}

impl Real for Jet {
    fn cst(v: f64) -> Self {
        Jet::new(v, [0.0; 3])
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        Jet::new(e, [e * self.d[0], e * self.d[1], e * self.d[2]])
    }
    fn scale(self, k: f64) -> Self {
        Jet::new(self.v * k, [self.d[0] * k, self.d[1] * k, self.d[2] * k])
    }
    fn value(self) -> f64 {
        self.v
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Cx<S> {
    pub re: S,
    pub im: S,
}

impl<S: Real> Cx<S> {
    pub fn new(re: S, im: S) -> Self {
        Self { re, im }
    }
    pub fn conj(self) -> Self {
        Self::new(self.re, -self.im)
    }
    pub fn norm_sqr(self) -> S {
        self.re * self.re + self.im * self.im
    }
    pub fn scale(self, k: S) -> Self {
        Self::new(self.re * k, self.im * k)
    }
}

impl<S: Real> Add for Cx<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.im + o.im)
    }
}

impl<S: Real> Sub for Cx<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.im - o.im)
    }
}

impl<S: Real> Mul for Cx<S> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_exp_rules() {
        let a = Jet::new(2.0, [1.0, 0.0, 3.0]);
        let b = Jet::new(-1.5, [0.5, 2.0, 0.0]);
        let p = a * b;
        assert_eq!(p.v, -3.0);
        assert_eq!(p.d, [1.0 * -1.5 + 2.0 * 0.5, 4.0, -4.5]);
        let e = a.exp();
        assert!((e.d[2] - 3.0 * 2f64.exp()).abs() < 1e-14);
        let z = Cx::new(a, b);
        let n = z.norm_sqr();
        assert_eq!(n.v, 4.0 + 2.25);
        assert_eq!(n.d[1], 2.0 * -1.5 * 2.0);
    }
}
