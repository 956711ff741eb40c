//! Closed-form scalar expressions used for material fields, boundary
//! profiles and boundary data.
//!
//! Expressions are parsed by `meval` and support `+ - * / ^`, the usual
//! elementary functions (`sin`, `cos`, `exp`, `sqrt`, ...) and the constants
//! `pi` and `e`. Plane fields use the variables `x1`, `x2`; profiles use `x`.

use std::fmt;
use std::rc::Rc;

use crate::error::{Error, Result};

pub type Fn1 = Rc<dyn Fn(f64) -> f64>;
pub type Fn2 = Rc<dyn Fn([f64; 2]) -> f64>;

/// A scalar function of one variable with an optional source expression.
#[derive(Clone)]
pub struct Func1 {
    f: Fn1,
    source: Option<String>,
}

impl Func1 {
    pub fn parse(expr: &str) -> Result<Self> {
        let parsed: meval::Expr = expr.parse().map_err(|e: meval::Error| Error::Expression {
            expr: expr.to_string(),
            message: e.to_string(),
        })?;
        let bound = parsed.bind("x").map_err(|e| Error::Expression {
            expr: expr.to_string(),
            message: e.to_string(),
        })?;
        Ok(Self {
            f: Rc::new(bound),
            source: Some(expr.to_string()),
        })
    }

    pub fn new(f: impl Fn(f64) -> f64 + 'static) -> Self {
        Self {
            f: Rc::new(f),
            source: None,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self {
            f: Rc::new(move |_| c),
            source: Some(format!("{c}")),
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn source(&self) -> Option<&str> {
        self.source.as_deref()
    }
}

impl fmt::Debug for Func1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Func1({})", self.source.as_deref().unwrap_or("<closure>"))
    }
}

/// A scalar function on the plane.
#[derive(Clone)]
pub struct Func2 {
    f: Fn2,
    source: Option<String>,
}

impl Func2 {
    pub fn parse(expr: &str) -> Result<Self> {
        let parsed: meval::Expr = expr.parse().map_err(|e: meval::Error| Error::Expression {
            expr: expr.to_string(),
            message: e.to_string(),
        })?;
        let bound = parsed.bind2("x1", "x2").map_err(|e| Error::Expression {
            expr: expr.to_string(),
            message: e.to_string(),
        })?;
        Ok(Self {
            f: Rc::new(move |p: [f64; 2]| bound(p[0], p[1])),
            source: Some(expr.to_string()),
        })
    }

    pub fn new(f: impl Fn([f64; 2]) -> f64 + 'static) -> Self {
        Self {
            f: Rc::new(f),
            source: None,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self {
            f: Rc::new(move |_| c),
            source: Some(format!("{c}")),
        }
    }

    #[inline]
    pub fn eval(&self, p: [f64; 2]) -> f64 {
        (self.f)(p)
    }

    pub fn source(&self) -> Option<&str> {
        self.source.as_deref()
    }

    /// Gradient by fourth-order central differences with step `h`.
    pub fn gradient(&self, p: [f64; 2], h: f64) -> [f64; 2] {
        gradient(|q| self.eval(q), p, h)
    }

    /// Hessian `[f11, f12, f22]` by fourth-order central differences.
    pub fn hessian(&self, p: [f64; 2], h: f64) -> [f64; 3] {
        hessian(|q| self.eval(q), p, h)
    }
}

/// Gradient of a plane function by fourth-order central differences.
pub fn gradient(f: impl Fn([f64; 2]) -> f64, p: [f64; 2], h: f64) -> [f64; 2] {
    let d = |e: [f64; 2]| {
        let at = |s: f64| f([p[0] + s * e[0], p[1] + s * e[1]]);
        (at(-2.0 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2.0 * h)) / (12.0 * h)
    };
    [d([1.0, 0.0]), d([0.0, 1.0])]
}

/// Hessian `[f11, f12, f22]` of a plane function by fourth-order central
/// differences.
pub fn hessian(f: impl Fn([f64; 2]) -> f64, p: [f64; 2], h: f64) -> [f64; 3] {
    let at = |a: f64, b: f64| f([p[0] + a, p[1] + b]);
    let c = at(0.0, 0.0);
    let d2 = |ex: f64, ey: f64| {
        (-at(-2.0 * h * ex, -2.0 * h * ey) + 16.0 * at(-h * ex, -h * ey) - 30.0 * c
            + 16.0 * at(h * ex, h * ey)
            - at(2.0 * h * ex, 2.0 * h * ey))
            / (12.0 * h * h)
    };
    let f11 = d2(1.0, 0.0);
    let f22 = d2(0.0, 1.0);
    let cross = |s: f64| {
        (at(s * h, s * h) - at(s * h, -s * h) - at(-s * h, s * h) + at(-s * h, -s * h)) / (4.0 * s * s * h * h)
    };
    // Richardson on the cross stencil removes the h^2 term.
    let f12 = (4.0 * cross(1.0) - cross(2.0)) / 3.0;
    [f11, f12, f22]
}

impl fmt::Debug for Func2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Func2({})", self.source.as_deref().unwrap_or("<closure>"))
    }
}

/// Derivatives of a one-variable function by central differences.
pub fn derivative1(f: &Func1, x: f64, order: usize, h: f64) -> f64 {
    let at = |k: f64| f.eval(x + k * h);
    match order {
        0 => at(0.0),
        1 => (at(-2.0) - 8.0 * at(-1.0) + 8.0 * at(1.0) - at(2.0)) / (12.0 * h),
        2 => (-at(-2.0) + 16.0 * at(-1.0) - 30.0 * at(0.0) + 16.0 * at(1.0) - at(2.0)) / (12.0 * h * h),
        3 => {
            (at(-3.0) - 8.0 * at(-2.0) + 13.0 * at(-1.0) - 13.0 * at(1.0) + 8.0 * at(2.0) - at(3.0))
                / (8.0 * h.powi(3))
        }
        4 => {
            (-at(-3.0) + 12.0 * at(-2.0) - 39.0 * at(-1.0) + 56.0 * at(0.0) - 39.0 * at(1.0)
                + 12.0 * at(2.0)
                - at(3.0))
                / (6.0 * h.powi(4))
        }
        _ => panic!("derivative order {order} not supported"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_plane_expression() {
        let f = Func2::parse("sin(pi*x1)*x2^2 + exp(0)").unwrap();
        let v = f.eval([0.5, 3.0]);
        assert!((v - 10.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_unknown_variable() {
        assert!(Func2::parse("x1 + z").is_err());
        assert!(Func1::parse("x +").is_err());
    }

    #[test]
    fn finite_difference_derivatives_of_polynomials() {
        let f = Func1::parse("x^4 - 2*x^3 + x").unwrap();
        let x = 0.3;
        assert!((derivative1(&f, x, 1, 1e-3) - (4.0 * x * x * x - 6.0 * x * x + 1.0)).abs() < 1e-9);
        assert!((derivative1(&f, x, 2, 1e-3) - (12.0 * x * x - 12.0 * x)).abs() < 1e-6);
        assert!((derivative1(&f, x, 3, 1e-2) - (24.0 * x - 12.0)).abs() < 1e-6);
        assert!((derivative1(&f, x, 4, 1e-2) - 24.0).abs() < 1e-5);

        let g = Func2::parse("x1^3*x2 + x2^2").unwrap();
        let p = [0.4, -0.7];
        let grad = g.gradient(p, 1e-3);
        assert!((grad[0] - 3.0 * 0.16 * -0.7).abs() < 1e-9);
        assert!((grad[1] - (0.064 - 1.4)).abs() < 1e-9);
        let h = g.hessian(p, 1e-3);
        assert!((h[0] - 6.0 * 0.4 * -0.7).abs() < 1e-6);
        assert!((h[1] - 3.0 * 0.16).abs() < 1e-6);
        assert!((h[2] - 2.0).abs() < 1e-6);
    }
}
