//! Second-order forward-mode automatic differentiation.
//!
//! A [`Jet`] carries a value together with its gradient and Hessian with
//! respect to `N` seed variables. Arithmetic propagates all three exactly,
//! so any formula written against [`Scalar`] yields analytic first and
//! second derivatives when evaluated on jets.

use std::ops::{Add, Mul, Neg, Sub};

/// Numeric type the problem formulas are written against.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    fn constant(v: f64) -> Self;
    fn value(&self) -> f64;
    fn sin_cos(self) -> (Self, Self);
    fn ln(self) -> Self;
}

impl Scalar for f64 {
    fn constant(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn sin_cos(self) -> (Self, Self) {
        f64::sin_cos(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<const N: usize> {
    pub v: f64,
    pub g: [f64; N],
    pub h: [[f64; N]; N],
}

impl<const N: usize> Jet<N> {
    pub fn constant(v: f64) -> Self {
        Self {
            v,
            g: [0.0; N],
            h: [[0.0; N]; N],
        }
    }

    /// Independent variable number `i`.
    pub fn variable(v: f64, i: usize) -> Self {
        let mut j = Self::constant(v);
        j.g[i] = 1.0;
        j
    }

    /// Quantity that depends on variable `i` to first order only, with slope
    /// `slope`. Used for time-dependent data whose second time derivative
    /// is never requested.
    pub fn linear(v: f64, i: usize, slope: f64) -> Self {
        let mut j = Self::constant(v);
        j.g[i] = slope;
        j
    }

    /// Applies a scalar function given its value and first two derivatives
    /// at `self.v`.
    fn compose(self, f: f64, df: f64, d2f: f64) -> Self {
        let mut out = Self::constant(f);
        for i in 0..N {
            out.g[i] = df * self.g[i];
            for k in 0..N {
                out.h[i][k] = df * self.h[i][k] + d2f * self.g[i] * self.g[k];
            }
        }
        out
    }
}

impl<const N: usize> Add for Jet<N> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self.v += rhs.v;
        for i in 0..N {
            self.g[i] += rhs.g[i];
            for k in 0..N {
                self.h[i][k] += rhs.h[i][k];
            }
        }
        self
    }
}

impl<const N: usize> Sub for Jet<N> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<const N: usize> Neg for Jet<N> {
    type Output = Self;
    fn neg(self) -> Self {
        self * -1.0
    }
}

impl<const N: usize> Mul for Jet<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::constant(self.v * rhs.v);
        for i in 0..N {
            out.g[i] = self.g[i] * rhs.v + self.v * rhs.g[i];
            for k in 0..N {
                out.h[i][k] = self.h[i][k] * rhs.v
                    + self.v * rhs.h[i][k]
                    + self.g[i] * rhs.g[k]
                    + rhs.g[i] * self.g[k];
            }
        }
        out
    }
}

impl<const N: usize> Add<f64> for Jet<N> {
    type Output = Self;
    fn add(mut self, rhs: f64) -> Self {
        self.v += rhs;
        self
    }
}

impl<const N: usize> Mul<f64> for Jet<N> {
    type Output = Self;
    fn mul(mut self, rhs: f64) -> Self {
        self.v *= rhs;
        for i in 0..N {
            self.g[i] *= rhs;
            for k in 0..N {
                self.h[i][k] *= rhs;
            }
        }
        self
    }
}

impl<const N: usize> Scalar for Jet<N> {
    fn constant(v: f64) -> Self {
        Jet::constant(v)
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn sin_cos(self) -> (Self, Self) {
        let (s, c) = self.v.sin_cos();
        (self.compose(s, c, -s), self.compose(c, -s, -c))
    }
    fn ln(self) -> Self {
        let x = self.v;
        self.compose(x.ln(), 1.0 / x, -1.0 / (x * x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn f<S: Scalar>(x: S, y: S) -> S {
        let (s, c) = (x * y).sin_cos();
        s * x + c * c * 3.0 + (x * x + 2.0).ln() * y
    }

    #[test]
    fn matches_finite_differences() {
        let (x0, y0) = (0.7, -1.3);
        let j = f(Jet::<2>::variable(x0, 0), Jet::<2>::variable(y0, 1));
        assert_relative_eq!(j.v, f(x0, y0), epsilon = 1e-15);

        let h = 1e-5;
        let fx = |x: f64, y: f64| f(x, y);
        let gx = (fx(x0 + h, y0) - fx(x0 - h, y0)) / (2.0 * h);
        let gy = (fx(x0, y0 + h) - fx(x0, y0 - h)) / (2.0 * h);
        assert_relative_eq!(j.g[0], gx, max_relative = 1e-8);
        assert_relative_eq!(j.g[1], gy, max_relative = 1e-8);

        let h = 1e-4;
        let hxx = (fx(x0 + h, y0) - 2.0 * fx(x0, y0) + fx(x0 - h, y0)) / (h * h);
        let hxy = (fx(x0 + h, y0 + h) - fx(x0 + h, y0 - h) - fx(x0 - h, y0 + h)
            + fx(x0 - h, y0 - h))
            / (4.0 * h * h);
        assert_relative_eq!(j.h[0][0], hxx, max_relative = 1e-6);
        assert_relative_eq!(j.h[0][1], hxy, max_relative = 1e-6);
        assert_eq!(j.h[0][1], j.h[1][0]);
    }

    #[test]
    fn linear_seed_has_no_curvature() {
        let t = Jet::<1>::linear(2.0, 0, 3.0);
        let sq = t * t;
        assert_eq!(sq.v, 4.0);
        assert_eq!(sq.g[0], 12.0);
        assert_eq!(sq.h[0][0], 18.0);
    }
}
