//! Truncated bivariate Taylor jets.
//!
//! A [`Jet`] of order `n` at `(x0, y0)` stores the normalized coefficients
//! `c[i][j] = d^{i+j} f / dx^i dy^j (x0, y0) / (i! j!)` for `i + j <= n`,
//! so products are plain truncated convolutions. Orders 1 through 4 are
//! supported, which is enough for fourth derivatives of web functions.

use core::fmt;

use crate::Point;

/// Highest supported truncation order.
pub const MAX_ORDER: usize = 4;

const MAX_COEFFS: usize = (MAX_ORDER + 1) * (MAX_ORDER + 2) / 2;

const FACTORIAL: [f64; MAX_ORDER + 1] = [1.0, 1.0, 2.0, 6.0, 24.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
}

/// Arithmetic operation on two jets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Univariate function composed with a jet.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Elementary {
    Sqrt,
    Exp,
    Ln,
    Sin,
    Cos,
    Tan,
    /// `a^p` for a constant exponent `p`.
    Pow(f64),
}

impl Elementary {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Sqrt => "sqrt",
            Self::Exp => "exp",
            Self::Ln => "ln",
            Self::Sin => "sin",
            Self::Cos => "cos",
            Self::Tan => "tan",
            Self::Pow(_) => "pow",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum JetError {
    OrderOutOfRange {
        order: usize,
    },
    /// Operands were taken at different points or truncated at different orders.
    Mismatch,
    /// Division by a jet whose constant term is zero.
    DivisionByZero,
    Domain {
        function: &'static str,
        value: f64,
    },
    NonFinite,
    DerivativeOrder {
        i: usize,
        j: usize,
        order: usize,
    },
}

impl fmt::Display for JetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::OrderOutOfRange { order } => {
                write!(f, "jet order {order} out of range 1..={MAX_ORDER}")
            }
            Self::Mismatch => f.write_str("jets have different base points or orders"),
            Self::DivisionByZero => f.write_str("division by a jet with zero constant term"),
            Self::Domain { function, value } => {
                write!(f, "{function} is not smooth at {value}")
            }
            Self::NonFinite => f.write_str("non-finite jet coefficient"),
            Self::DerivativeOrder { i, j, order } => {
                write!(f, "derivative ({i}, {j}) exceeds jet order {order}")
            }
        }
    }
}

impl core::error::Error for JetError {}

#[inline]
fn index(i: usize, j: usize) -> usize {
    let n = i + j;
    n * (n + 1) / 2 + j
}

/// Number of coefficients of a jet of the given order.
pub const fn coefficient_count(order: usize) -> usize {
    (order + 1) * (order + 2) / 2
}

/// Truncated Taylor expansion of a scalar field of `(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    base: Point,
    order: usize,
    coeffs: [f64; MAX_COEFFS],
}

impl Jet {
    fn check_order(order: usize) -> Result<(), JetError> {
        if (1..=MAX_ORDER).contains(&order) {
            Ok(())
        } else {
            Err(JetError::OrderOutOfRange { order })
        }
    }

    fn zeroed(base: Point, order: usize) -> Self {
        Self {
            base,
            order,
            coeffs: [0.0; MAX_COEFFS],
        }
    }

    fn finish(self) -> Result<Self, JetError> {
        if self.coefficients().iter().all(|c| c.is_finite()) {
            Ok(self)
        } else {
            Err(JetError::NonFinite)
        }
    }

    pub fn constant(base: Point, order: usize, value: f64) -> Result<Self, JetError> {
        Self::check_order(order)?;
        let mut jet = Self::zeroed(base, order);
        jet.coeffs[0] = value;
        jet.finish()
    }

    /// Jet of the coordinate function along `axis`.
    pub fn variable(base: Point, axis: Axis, order: usize) -> Result<Self, JetError> {
        Self::check_order(order)?;
        let mut jet = Self::zeroed(base, order);
        match axis {
            Axis::X => {
                jet.coeffs[0] = base.x;
                jet.coeffs[index(1, 0)] = 1.0;
            }
            Axis::Y => {
                jet.coeffs[0] = base.y;
                jet.coeffs[index(0, 1)] = 1.0;
            }
        }
        jet.finish()
    }

    /// Builds a jet from raw normalized coefficients laid out by total degree.
    pub fn from_coefficients(base: Point, order: usize, coeffs: &[f64]) -> Result<Self, JetError> {
        Self::check_order(order)?;
        if coeffs.len() != coefficient_count(order) {
            return Err(JetError::Mismatch);
        }
        let mut jet = Self::zeroed(base, order);
        jet.coeffs[..coeffs.len()].copy_from_slice(coeffs);
        jet.finish()
    }

    pub fn base(&self) -> Point {
        self.base
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Constant term, i.e. the value at the base point.
    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Normalized coefficients ordered by total degree, then by the power of `y`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs[..coefficient_count(self.order)]
    }

    /// Normalized coefficient `c[i][j]`, if within the truncation order.
    pub fn coeff(&self, i: usize, j: usize) -> Option<f64> {
        (i + j <= self.order).then(|| self.coeffs[index(i, j)])
    }

    /// `d^{i+j} f / dx^i dy^j` at the base point.
    pub fn partial(&self, i: usize, j: usize) -> Result<f64, JetError> {
        if i + j > self.order {
            return Err(JetError::DerivativeOrder {
                i,
                j,
                order: self.order,
            });
        }
        Ok(self.coeffs[index(i, j)] * FACTORIAL[i] * FACTORIAL[j])
    }

    /// Jet of the partial derivative along `axis`, one order lower.
    pub fn derivative(&self, axis: Axis) -> Result<Self, JetError> {
        if self.order < 2 {
            return Err(JetError::OrderOutOfRange {
                order: self.order.saturating_sub(1),
            });
        }
        let order = self.order - 1;
        let mut out = Self::zeroed(self.base, order);
        for n in 0..=order {
            for j in 0..=n {
                let i = n - j;
                out.coeffs[index(i, j)] = match axis {
                    Axis::X => (i + 1) as f64 * self.coeffs[index(i + 1, j)],
                    Axis::Y => (j + 1) as f64 * self.coeffs[index(i, j + 1)],
                };
            }
        }
        out.finish()
    }

    /// Drops all terms above `order`.
    pub fn truncate(&self, order: usize) -> Result<Self, JetError> {
        Self::check_order(order)?;
        if order > self.order {
            return Err(JetError::OrderOutOfRange { order });
        }
        let mut out = Self::zeroed(self.base, order);
        let n = coefficient_count(order);
        out.coeffs[..n].copy_from_slice(&self.coeffs[..n]);
        Ok(out)
    }

    fn compatible(&self, other: &Self) -> Result<(), JetError> {
        if self.order == other.order && self.base == other.base {
            Ok(())
        } else {
            Err(JetError::Mismatch)
        }
    }

    pub fn arith(op: ArithOp, a: &Self, b: &Self) -> Result<Self, JetError> {
        match op {
            ArithOp::Add => a.try_add(b),
            ArithOp::Sub => a.try_sub(b),
            ArithOp::Mul => a.try_mul(b),
            ArithOp::Div => a.try_div(b),
        }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, JetError> {
        self.compatible(other)?;
        let mut out = *self;
        for (o, b) in out.coeffs.iter_mut().zip(other.coeffs.iter()) {
            *o += b;
        }
        out.finish()
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, JetError> {
        self.compatible(other)?;
        let mut out = *self;
        for (o, b) in out.coeffs.iter_mut().zip(other.coeffs.iter()) {
            *o -= b;
        }
        out.finish()
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self, JetError> {
        self.compatible(other)?;
        self.mul_unchecked(other).finish()
    }

    fn mul_unchecked(&self, other: &Self) -> Self {
        let mut out = Self::zeroed(self.base, self.order);
        for n in 0..=self.order {
            for j in 0..=n {
                let i = n - j;
                let mut acc = 0.0;
                for k in 0..=i {
                    for l in 0..=j {
                        acc += self.coeffs[index(k, l)] * other.coeffs[index(i - k, j - l)];
                    }
                }
                out.coeffs[index(i, j)] = acc;
            }
        }
        out
    }

    /// Quotient by solving `q * b = a` degree by degree.
    pub fn try_div(&self, other: &Self) -> Result<Self, JetError> {
        self.compatible(other)?;
        let b0 = other.coeffs[0];
        if b0 == 0.0 {
            return Err(JetError::DivisionByZero);
        }
        let mut q = Self::zeroed(self.base, self.order);
        for n in 0..=self.order {
            for j in 0..=n {
                let i = n - j;
                let mut acc = self.coeffs[index(i, j)];
                for k in 0..=i {
                    for l in 0..=j {
                        if k == i && l == j {
                            continue;
                        }
                        acc -= q.coeffs[index(k, l)] * other.coeffs[index(i - k, j - l)];
                    }
                }
                q.coeffs[index(i, j)] = acc / b0;
            }
        }
        q.finish()
    }

    pub fn neg(&self) -> Self {
        let mut out = *self;
        for c in out.coeffs.iter_mut() {
            *c = -*c;
        }
        out
    }

    pub fn scale(&self, k: f64) -> Result<Self, JetError> {
        let mut out = *self;
        for c in out.coeffs.iter_mut() {
            *c *= k;
        }
        out.finish()
    }

    pub fn add_scalar(&self, k: f64) -> Result<Self, JetError> {
        let mut out = *self;
        out.coeffs[0] += k;
        out.finish()
    }

    /// Composes a univariate function with this jet.
    ///
    /// The outer function is expanded at the constant term `a0`, and the
    /// series in `h = a - a0` is summed by Horner's rule with truncated
    /// products. `h` has no constant term, so `order` products suffice.
    pub fn elementary(&self, func: Elementary) -> Result<Self, JetError> {
        let a0 = self.coeffs[0];
        let mut g = [0.0; MAX_ORDER + 1];
        univariate_coefficients(func, a0, self.order, &mut g)?;
        let mut h = *self;
        h.coeffs[0] = 0.0;
        let mut acc = Self::zeroed(self.base, self.order);
        acc.coeffs[0] = g[self.order];
        for k in (0..self.order).rev() {
            acc = acc.mul_unchecked(&h);
            acc.coeffs[0] += g[k];
        }
        acc.finish()
    }

    pub fn sqrt(&self) -> Result<Self, JetError> {
        self.elementary(Elementary::Sqrt)
    }

    pub fn exp(&self) -> Result<Self, JetError> {
        self.elementary(Elementary::Exp)
    }

    pub fn ln(&self) -> Result<Self, JetError> {
        self.elementary(Elementary::Ln)
    }

    pub fn sin(&self) -> Result<Self, JetError> {
        self.elementary(Elementary::Sin)
    }

    pub fn cos(&self) -> Result<Self, JetError> {
        self.elementary(Elementary::Cos)
    }

    pub fn tan(&self) -> Result<Self, JetError> {
        self.elementary(Elementary::Tan)
    }

    pub fn powf(&self, p: f64) -> Result<Self, JetError> {
        self.elementary(Elementary::Pow(p))
    }
}

/// `a^p` with the conventions shared by real and jet evaluation.
///
/// Returns `None` outside the real domain.
pub fn pow_real(a: f64, p: f64) -> Option<f64> {
    let integral = libm::trunc(p) == p;
    if a < 0.0 && !integral {
        return None;
    }
    if a == 0.0 && p < 0.0 {
        return None;
    }
    Some(libm::pow(a, p))
}

/// Generalized binomial coefficient `C(p, k)`.
fn binomial(p: f64, k: usize) -> f64 {
    let mut c = 1.0;
    for m in 0..k {
        c *= (p - m as f64) / (m + 1) as f64;
    }
    c
}

/// Fills `g[k] = g^{(k)}(a) / k!` for `k <= order`.
fn univariate_coefficients(
    func: Elementary,
    a: f64,
    order: usize,
    g: &mut [f64; MAX_ORDER + 1],
) -> Result<(), JetError> {
    let domain = |ok: bool| {
        if ok {
            Ok(())
        } else {
            Err(JetError::Domain {
                function: func.name(),
                value: a,
            })
        }
    };
    match func {
        Elementary::Exp => {
            let e = libm::exp(a);
            for k in 0..=order {
                g[k] = e / FACTORIAL[k];
            }
        }
        Elementary::Ln => {
            domain(a > 0.0)?;
            g[0] = libm::log(a);
            let mut ak = 1.0;
            for k in 1..=order {
                ak *= a;
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                g[k] = sign / (k as f64 * ak);
            }
        }
        Elementary::Sin | Elementary::Cos => {
            let (s, c) = (libm::sin(a), libm::cos(a));
            // Derivative cycle of sin: sin, cos, -sin, -cos.
            let cycle = [s, c, -s, -c];
            let shift = if matches!(func, Elementary::Cos) {
                1
            } else {
                0
            };
            for k in 0..=order {
                g[k] = cycle[(k + shift) % 4] / FACTORIAL[k];
            }
        }
        Elementary::Tan => {
            let c = libm::cos(a);
            domain(c != 0.0)?;
            let t = libm::tan(a);
            let s = 1.0 + t * t;
            let derivs = [
                t,
                s,
                2.0 * t * s,
                2.0 * s * (1.0 + 3.0 * t * t),
                8.0 * t * s * (2.0 + 3.0 * t * t),
            ];
            for k in 0..=order {
                g[k] = derivs[k] / FACTORIAL[k];
            }
        }
        Elementary::Sqrt => {
            domain(a > 0.0)?;
            let r = libm::sqrt(a);
            g[0] = r;
            let mut ak = 1.0;
            for k in 1..=order {
                ak *= a;
                g[k] = binomial(0.5, k) * r / ak;
            }
        }
        Elementary::Pow(p) => {
            let integral = libm::trunc(p) == p;
            if integral && p >= 0.0 {
                // Polynomial: finite at any base, including zero.
                for k in 0..=order {
                    g[k] = if (k as f64) > p {
                        0.0
                    } else {
                        binomial(p, k) * libm::pow(a, p - k as f64)
                    };
                }
            } else {
                domain(if integral { a != 0.0 } else { a > 0.0 })?;
                g[0] = libm::pow(a, p);
                for k in 1..=order {
                    g[k] = binomial(p, k) * libm::pow(a, p - k as f64);
                }
            }
        }
    }
    Ok(())
}
