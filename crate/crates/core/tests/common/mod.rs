//! Independent oracles shared by the integration tests: a random expression
//! corpus that carries its own symbolic derivatives, Richardson-extrapolated
//! finite differences, and a Levi-Civita connection computed from a metric.
#![allow(dead_code)]

use std::fmt;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use webgeo_core::{parse, Expr, Point};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Expression tree with a fully parenthesized text form and exact
/// derivatives, built without touching the library's differentiation.
#[derive(Clone, Debug)]
pub enum Term {
    X,
    Y,
    C(f64),
    Add(Box<Term>, Box<Term>),
    Sub(Box<Term>, Box<Term>),
    Mul(Box<Term>, Box<Term>),
    Div(Box<Term>, Box<Term>),
    Pow(Box<Term>, i32),
    Call(&'static str, Box<Term>),
}

pub use Term::*;

fn b(t: Term) -> Box<Term> {
    Box::new(t)
}

pub fn add(a: Term, c: Term) -> Term {
    Add(b(a), b(c))
}
pub fn sub(a: Term, c: Term) -> Term {
    Sub(b(a), b(c))
}
pub fn mul(a: Term, c: Term) -> Term {
    Mul(b(a), b(c))
}
pub fn div(a: Term, c: Term) -> Term {
    Div(b(a), b(c))
}
pub fn pow(a: Term, k: i32) -> Term {
    Pow(b(a), k)
}
pub fn call(name: &'static str, a: Term) -> Term {
    Call(name, b(a))
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            X => f.write_str("x"),
            Y => f.write_str("y"),
            C(c) if *c < 0.0 => write!(f, "({c})"),
            C(c) => write!(f, "{c}"),
            Add(a, c) => write!(f, "({a} + {c})"),
            Sub(a, c) => write!(f, "({a} - {c})"),
            Mul(a, c) => write!(f, "({a} * {c})"),
            Div(a, c) => write!(f, "({a} / {c})"),
            Pow(a, k) => write!(f, "({a})^{k}"),
            Call(name, a) => write!(f, "{name}({a})"),
        }
    }
}

impl Term {
    pub fn expr(&self) -> Expr {
        parse(&self.to_string()).expect("corpus terms always parse")
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            X => x,
            Y => y,
            C(c) => *c,
            Add(a, c) => a.eval(x, y) + c.eval(x, y),
            Sub(a, c) => a.eval(x, y) - c.eval(x, y),
            Mul(a, c) => a.eval(x, y) * c.eval(x, y),
            Div(a, c) => a.eval(x, y) / c.eval(x, y),
            Pow(a, k) => a.eval(x, y).powi(*k),
            Call(name, a) => {
                let v = a.eval(x, y);
                match *name {
                    "sin" => v.sin(),
                    "cos" => v.cos(),
                    "tan" => v.tan(),
                    "exp" => v.exp(),
                    "ln" => v.ln(),
                    "sqrt" => v.sqrt(),
                    _ => unreachable!(),
                }
            }
        }
    }

    /// Exact partial derivative; `wrt_x` selects the variable.
    pub fn d(&self, wrt_x: bool) -> Term {
        match self {
            X => C(if wrt_x { 1.0 } else { 0.0 }),
            Y => C(if wrt_x { 0.0 } else { 1.0 }),
            C(_) => C(0.0),
            Add(a, c) => add(a.d(wrt_x), c.d(wrt_x)),
            Sub(a, c) => sub(a.d(wrt_x), c.d(wrt_x)),
            Mul(a, c) => add(
                mul(a.d(wrt_x), (**c).clone()),
                mul((**a).clone(), c.d(wrt_x)),
            ),
            Div(a, c) => div(
                sub(
                    mul(a.d(wrt_x), (**c).clone()),
                    mul((**a).clone(), c.d(wrt_x)),
                ),
                pow((**c).clone(), 2),
            ),
            Pow(a, k) => {
                let inner = if *k == 2 {
                    (**a).clone()
                } else {
                    pow((**a).clone(), k - 1)
                };
                mul(mul(C(*k as f64), inner), a.d(wrt_x))
            }
            Call(name, a) => {
                let a0 = (**a).clone();
                let da = a.d(wrt_x);
                match *name {
                    "sin" => mul(call("cos", a0), da),
                    "cos" => mul(C(-1.0), mul(call("sin", a0), da)),
                    "tan" => mul(add(C(1.0), pow(call("tan", a0), 2)), da),
                    "exp" => mul(call("exp", a0), da),
                    "ln" => div(da, a0),
                    "sqrt" => div(da, mul(C(2.0), call("sqrt", a0))),
                    _ => unreachable!(),
                }
            }
        }
    }
}

fn constant<R: Rng>(rng: &mut R) -> Term {
    C((rng.gen_range(0.5..2.0f64) * 100.0).round() / 100.0)
}

/// Random term whose every subexpression stays inside its domain for all
/// real `x`, `y`.
pub fn random_term<R: Rng>(rng: &mut R, depth: u32) -> Term {
    if depth == 0 || rng.gen_bool(0.2) {
        return match rng.gen_range(0..5) {
            0 | 1 => X,
            2 | 3 => Y,
            _ => constant(rng),
        };
    }
    let mut next = || random_term(rng, depth - 1);
    let (a, c) = (next(), next());
    match rng.gen_range(0..11) {
        0 => add(a, c),
        1 => sub(a, c),
        2 => mul(a, c),
        3 => div(a, add(C(2.0), call("sin", c))),
        4 => pow(a, if rng.gen_bool(0.5) { 2 } else { 3 }),
        5 => call("sin", a),
        6 => call("cos", a),
        7 => call("exp", mul(C(0.5), call("sin", a))),
        8 => call("ln", add(C(1.5), pow(a, 2))),
        9 => call("sqrt", add(C(1.0), pow(a, 2))),
        _ => call("tan", mul(C(0.4), call("sin", a))),
    }
}

/// A term that is not constant, so its gradient is generically nonzero.
pub fn random_function<R: Rng>(rng: &mut R, depth: u32) -> Term {
    loop {
        let t = random_term(rng, depth);
        let s = t.to_string();
        if s.contains('x') || s.contains('y') {
            return t;
        }
    }
}

pub fn random_point<R: Rng>(rng: &mut R) -> Point {
    Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// `cos θ x + sin θ y + ε g` with slopes spread over the projective line, so
/// that four of them form a well-conditioned web near the origin.
pub fn random_web<R: Rng>(rng: &mut R, size: usize) -> Vec<Term> {
    (0..size)
        .map(|i| {
            let theta = i as f64 * std::f64::consts::PI / size as f64 + rng.gen_range(-0.2..0.2);
            let g = random_function(rng, 2);
            add(
                add(mul(C(theta.cos()), X), mul(C(theta.sin()), Y)),
                mul(C(rng.gen_range(0.1..0.4)), g),
            )
        })
        .collect()
}

fn stencil(order: usize) -> &'static [(i32, f64)] {
    match order {
        0 => &[(0, 1.0)],
        1 => &[(-1, -0.5), (1, 0.5)],
        2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        3 => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
        4 => &[(-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)],
        _ => panic!("stencil order {order} not tabulated"),
    }
}

fn central<F: Fn(f64, f64) -> f64>(f: &F, p: Point, i: usize, j: usize, h: f64) -> f64 {
    let mut sum = 0.0;
    for &(a, wa) in stencil(i) {
        for &(c, wc) in stencil(j) {
            sum += wa * wc * f(p.x + a as f64 * h, p.y + c as f64 * h);
        }
    }
    sum / h.powi((i + j) as i32)
}

/// `∂^{i+j} f / ∂x^i ∂y^j` by central differences at `h`, `h/2`, `h/4`
/// with two rounds of Richardson extrapolation (error O(h⁶)).
pub fn richardson<F: Fn(f64, f64) -> f64>(f: &F, p: Point, i: usize, j: usize, h: f64) -> f64 {
    let d: Vec<f64> = (0..3)
        .map(|k| central(f, p, i, j, h / f64::from(1 << k)))
        .collect();
    let r1 = [(4.0 * d[1] - d[0]) / 3.0, (4.0 * d[2] - d[1]) / 3.0];
    (16.0 * r1[1] - r1[0]) / 15.0
}

/// `∂^{i+j} f / ∂x^i ∂y^j` by [`richardson`] over a ladder of base steps,
/// keeping the estimate whose neighbours agree best. Truncation error shrinks
/// down the ladder while cancellation grows, so the flattest stretch is the
/// most trustworthy one.
pub fn fd_partial<F: Fn(f64, f64) -> f64>(f: &F, p: Point, i: usize, j: usize) -> f64 {
    let lowest = [0.0, 1e-3, 2e-3, 4e-3, 6e-3][i + j];
    let estimates: Vec<f64> = (0..8)
        .map(|k| richardson(f, p, i, j, lowest * 1.5f64.powi(k)))
        .collect();
    let (best, _) = estimates
        .windows(3)
        .enumerate()
        .map(|(k, w)| (k + 1, (w[0] - w[1]).abs().max((w[2] - w[1]).abs())))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    estimates[best]
}

/// Levi-Civita symbols `[Γ¹₁₁, Γ¹₁₂, Γ¹₂₂, Γ²₁₁, Γ²₁₂, Γ²₂₂]` of the metric
/// `[E, F, G]`, differentiated numerically.
pub fn levi_civita<M: Fn(f64, f64) -> [f64; 3]>(metric: &M, p: Point) -> [f64; 6] {
    let m = metric(p.x, p.y);
    let det = m[0] * m[2] - m[1] * m[1];
    let inv = [[m[2] / det, -m[1] / det], [-m[1] / det, m[0] / det]];
    // dg[l][i][j] = ∂_l g_ij
    let mut dg = [[[0.0; 2]; 2]; 2];
    for (l, (di, dj)) in [(1, 0), (0, 1)].into_iter().enumerate() {
        for c in 0..3 {
            let v = richardson(&|x, y| metric(x, y)[c], p, di, dj, 1e-2);
            let (i, j) = [(0, 0), (0, 1), (1, 1)][c];
            dg[l][i][j] = v;
            dg[l][j][i] = v;
        }
    }
    let gamma = |k: usize, i: usize, j: usize| {
        (0..2)
            .map(|l| 0.5 * inv[k][l] * (dg[i][j][l] + dg[j][i][l] - dg[l][i][j]))
            .sum::<f64>()
    };
    [
        gamma(0, 0, 0),
        gamma(0, 0, 1),
        gamma(0, 1, 1),
        gamma(1, 0, 0),
        gamma(1, 0, 1),
        gamma(1, 1, 1),
    ]
}

/// `|a - b|` relative to `max(|b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / b.abs().max(floor)
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
