//! Truncated univariate Taylor polynomials ("jets") and the scalar trait that
//! lets a vector field be evaluated either on plain `f64` or on jets.
//!
//! A jet of degree `d` stores the coefficients `a_0..=a_d` of
//! `a(t) = sum_k a_k t^k`; every operation is truncated at degree `d`.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar arithmetic shared by `f64` and [`Jet`].
///
/// Vector fields written against this trait can be differentiated to any
/// order along the flow by [`crate::taylor::time_derivatives`].
pub trait Real:
    Clone
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// A constant with the same shape as `self`.
    fn lift(&self, c: f64) -> Self;
    /// Constant term.
    fn value(&self) -> f64;
    fn powi(&self, n: i32) -> Self;
    fn sqrt(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;

    fn recip(&self) -> Self {
        self.lift(1.0) / self.clone()
    }
}

impl Real for f64 {
    fn lift(&self, c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    coeffs: Vec<f64>,
}

impl Jet {
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "a jet needs at least the constant term");
        Self { coeffs }
    }

    pub fn constant(c: f64, degree: usize) -> Self {
        let mut coeffs = vec![0.0; degree + 1];
        coeffs[0] = c;
        Self { coeffs }
    }

    /// `x0 + t`, the independent variable expanded around `x0`.
    pub fn variable(x0: f64, degree: usize) -> Self {
        let mut j = Self::constant(x0, degree);
        if degree > 0 {
            j.coeffs[1] = 1.0;
        }
        j
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    fn zip_with(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        let len = self.coeffs.len().max(other.coeffs.len());
        Jet {
            coeffs: (0..len).map(|k| f(self.coeff(k), other.coeff(k))).collect(),
        }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Jet {
        Jet {
            coeffs: self.coeffs.iter().map(|&a| f(a)).collect(),
        }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        self.zip_with(&rhs, |a, b| a + b)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self.zip_with(&rhs, |a, b| a - b)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        let mut out = vec![0.0; len];
        for (k, o) in out.iter_mut().enumerate() {
            *o = (0..=k).map(|j| self.coeff(j) * rhs.coeff(k - j)).sum();
        }
        Jet { coeffs: out }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        let b0 = rhs.coeff(0);
        let mut q = vec![0.0; len];
        for k in 0..len {
            let acc: f64 = (0..k).map(|j| q[j] * rhs.coeff(k - j)).sum();
            q[k] = (self.coeff(k) - acc) / b0;
        }
        Jet { coeffs: q }
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.map(|a| -a)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.coeffs[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.coeffs[0] -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.map(|a| a * rhs)
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self.map(|a| a / rhs)
    }
}

impl Real for Jet {
    fn lift(&self, c: f64) -> Self {
        Jet::constant(c, self.degree())
    }

    fn value(&self) -> f64 {
        self.coeffs[0]
    }

    fn powi(&self, n: i32) -> Self {
        if n < 0 {
            return self.powi(-n).recip();
        }
        let mut acc = self.lift(1.0);
        let mut base = self.clone();
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base.clone();
            }
            base = base.clone() * base;
            e >>= 1;
        }
        acc
    }

    fn sqrt(&self) -> Self {
        let a = &self.coeffs;
        let mut s = vec![0.0; a.len()];
        s[0] = a[0].sqrt();
        for k in 1..a.len() {
            let acc: f64 = (1..k).map(|j| s[j] * s[k - j]).sum();
            s[k] = (a[k] - acc) / (2.0 * s[0]);
        }
        Jet { coeffs: s }
    }

    fn exp(&self) -> Self {
        let a = &self.coeffs;
        let mut e = vec![0.0; a.len()];
        e[0] = a[0].exp();
        for k in 1..a.len() {
            let acc: f64 = (1..=k).map(|j| j as f64 * a[j] * e[k - j]).sum();
            e[k] = acc / k as f64;
        }
        Jet { coeffs: e }
    }

    fn ln(&self) -> Self {
        let a = &self.coeffs;
        let mut l = vec![0.0; a.len()];
        l[0] = a[0].ln();
        for k in 1..a.len() {
            let acc: f64 = (1..k).map(|j| j as f64 * l[j] * a[k - j]).sum();
            l[k] = (a[k] - acc / k as f64) / a[0];
        }
        Jet { coeffs: l }
    }
}
