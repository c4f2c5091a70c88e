//! Euler equation residuals and linear webs built by the method of
//! characteristics.
//!
//! A solution `w` of `w_x - w w_y = 0` with Cauchy data `w(0, y) = w0(y)` is
//! constant along the lines `y = λ - w0(λ) x`. Each such line is a leaf of
//! the foliation `w = const`, so every Cauchy datum yields a linear foliation.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::expr::{EvalError, Expr};
use crate::geometry::ThomasParameters;
use crate::{Point, Rect};

/// Bracket width at which bisection stops.
pub const BRACKET_WIDTH: f64 = 1e-14;

/// Roots with `|g(λ)|` above this, relative to the magnitude of the terms of
/// `g`, are rejected.
pub const ROOT_TOLERANCE: f64 = 1e-12;

/// Samples used to locate the λ-range whose leaves meet the domain.
const RANGE_SCAN: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub enum EulerError {
    Eval(EvalError),
    /// The Cauchy datum cannot be evaluated at this parameter.
    Datum {
        lambda: f64,
        error: EvalError,
    },
    ScanCount {
        count: usize,
    },
    InvalidInterval {
        lo: f64,
        hi: f64,
    },
    InvalidDomain,
    NoData,
    DuplicateData {
        first: usize,
        second: usize,
    },
    LeafCount,
}

impl fmt::Display for EulerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Eval(e) => e.fmt(f),
            Self::Datum { lambda, error } => {
                write!(f, "Cauchy datum fails at lambda = {lambda}: {error}")
            }
            Self::ScanCount { count } => write!(f, "scan count must be at least 2, got {count}"),
            Self::InvalidInterval { lo, hi } => write!(f, "invalid lambda interval [{lo}, {hi}]"),
            Self::InvalidDomain => f.write_str("domain rectangle is empty or not finite"),
            Self::NoData => f.write_str("no Cauchy data given"),
            Self::DuplicateData { first, second } => {
                write!(f, "Cauchy data {first} and {second} coincide")
            }
            Self::LeafCount => f.write_str("leaves per foliation must be at least 1"),
        }
    }
}

impl core::error::Error for EulerError {}

impl From<EvalError> for EulerError {
    fn from(e: EvalError) -> Self {
        Self::Eval(e)
    }
}

fn first_partials(w: &Expr, p: Point) -> Result<(f64, f64, f64), EvalError> {
    let j = w.jet(p, 1)?;
    let d = |i, k| j.partial(i, k).unwrap_or(0.0);
    Ok((j.value(), d(1, 0), d(0, 1)))
}

/// `w_x - w w_y`, for the invariant `w = f_x / f_y` of a flat foliation.
pub fn euler_residual(w: &Expr, p: Point) -> Result<f64, EvalError> {
    let (v, wx, wy) = first_partials(w, p)?;
    Ok(wx - v * wy)
}

/// `w_y - w w_x - (Π²₁₁w³ - 3Π²₁₂w² - 3Π¹₁₂w + Π¹₂₂)`, for `w = f_y / f_x`.
pub fn connection_euler_residual(
    w: &Expr,
    pi: &ThomasParameters,
    p: Point,
) -> Result<f64, EvalError> {
    let (v, wx, wy) = first_partials(w, p)?;
    Ok(wy - v * wx - pi.euler_cubic(v))
}

/// Cauchy data `w0` on the line `x = 0`, written in `y` and evaluated at
/// `y = λ`, together with the λ-interval on which it is used.
#[derive(Clone, Debug, PartialEq)]
pub struct CauchyDatum {
    pub w0: Expr,
    pub interval: (f64, f64),
}

impl CauchyDatum {
    pub fn new(w0: Expr, interval: (f64, f64)) -> Result<Self, EulerError> {
        let (lo, hi) = interval;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(EulerError::InvalidInterval { lo, hi });
        }
        Ok(Self { w0, interval })
    }

    pub fn eval(&self, lambda: f64) -> Result<f64, EulerError> {
        self.w0
            .eval(Point::new(0.0, lambda))
            .map_err(|error| EulerError::Datum { lambda, error })
    }

    /// `w0(λ)` and `w0'(λ)`.
    fn eval_with_slope(&self, lambda: f64) -> Result<(f64, f64), EulerError> {
        let (v, _, dv) = first_partials(&self.w0, Point::new(0.0, lambda))
            .map_err(|error| EulerError::Datum { lambda, error })?;
        Ok((v, dv))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Multiplicity {
    Simple,
    /// `g'(λ)` almost vanishes: the point is close to a caustic.
    NearDouble,
}

impl Multiplicity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Simple => "simple",
            Self::NearDouble => "near_double",
        }
    }
}

/// A characteristic through a point, and the value of `w` it carries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CharacteristicRoot {
    pub lambda: f64,
    pub w: f64,
    pub multiplicity: Multiplicity,
}

struct Characteristic<'a> {
    datum: &'a CauchyDatum,
    p: Point,
}

impl Characteristic<'_> {
    /// `g(λ) = y + w0(λ) x - λ` and the magnitude of its terms.
    fn g(&self, lambda: f64) -> Result<(f64, f64), EulerError> {
        let w = self.datum.eval(lambda)?;
        let g = self.p.y + w * self.p.x - lambda;
        let scale = 1f64
            .max(self.p.y.abs())
            .max((w * self.p.x).abs())
            .max(lambda.abs());
        Ok((g, scale))
    }

    /// Bisects a sign change in `[a, b]`, then takes one Newton step if it
    /// improves the residual without leaving the bracket.
    fn refine(&self, mut a: f64, mut b: f64, mut ga: f64) -> Result<f64, EulerError> {
        while b - a > BRACKET_WIDTH {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let (gm, _) = self.g(m)?;
            if gm == 0.0 {
                return Ok(m);
            }
            if (gm < 0.0) == (ga < 0.0) {
                a = m;
                ga = gm;
            } else {
                b = m;
            }
        }
        let m = 0.5 * (a + b);
        let (gm, _) = self.g(m)?;
        let (_, slope) = self.datum.eval_with_slope(m)?;
        let dg = slope * self.p.x - 1.0;
        if dg != 0.0 {
            let n = m - gm / dg;
            if (a..=b).contains(&n) {
                if let Ok((gn, _)) = self.g(n) {
                    if gn.abs() < gm.abs() {
                        return Ok(n);
                    }
                }
            }
        }
        Ok(m)
    }

    fn root(&self, lambda: f64) -> Result<Option<CharacteristicRoot>, EulerError> {
        let (g, scale) = self.g(lambda)?;
        if !(g.abs() <= ROOT_TOLERANCE * scale) {
            return Ok(None);
        }
        let (w, slope) = self.datum.eval_with_slope(lambda)?;
        let dg = slope * self.p.x - 1.0;
        let multiplicity = if dg.abs() <= 1e-6 * (1.0 + (slope * self.p.x).abs()) {
            Multiplicity::NearDouble
        } else {
            Multiplicity::Simple
        };
        Ok(Some(CharacteristicRoot {
            lambda,
            w,
            multiplicity,
        }))
    }
}

/// All characteristics through `p` with parameter in `interval`.
///
/// The interval is split into `scan_count` equal cells; each sign change of
/// `g(λ) = y + w0(λ) x - λ` is refined to a root. Roots inside a cell with no
/// sign change, such as tangential double roots, are not found.
pub fn characteristic_roots(
    datum: &CauchyDatum,
    p: Point,
    interval: (f64, f64),
    scan_count: usize,
) -> Result<Vec<CharacteristicRoot>, EulerError> {
    if scan_count < 2 {
        return Err(EulerError::ScanCount { count: scan_count });
    }
    let (lo, hi) = interval;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(EulerError::InvalidInterval { lo, hi });
    }
    let c = Characteristic { datum, p };
    let node = |i: usize| {
        if i == scan_count {
            hi
        } else {
            lo + (hi - lo) * i as f64 / scan_count as f64
        }
    };
    let mut roots: Vec<CharacteristicRoot> = Vec::new();
    let mut push = |r: Option<CharacteristicRoot>| {
        if let Some(r) = r {
            if roots.last().is_none_or(|last| last.lambda != r.lambda) {
                roots.push(r);
            }
        }
    };
    let (mut ga, _) = c.g(lo)?;
    for i in 0..scan_count {
        let (a, b) = (node(i), node(i + 1));
        let (gb, _) = c.g(b)?;
        if ga == 0.0 {
            push(c.root(a)?);
        } else if gb != 0.0 && (ga < 0.0) != (gb < 0.0) {
            push(c.root(c.refine(a, b, ga)?)?);
        }
        ga = gb;
    }
    if ga == 0.0 {
        push(c.root(hi)?);
    }
    Ok(roots)
}

/// One leaf `y = λ - w0(λ) x`, clipped to the domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Leaf {
    pub lambda: f64,
    pub w0: f64,
    pub start: Point,
    pub end: Point,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearFoliation {
    pub datum: CauchyDatum,
    /// Parameters whose leaves meet the domain; `None` if there are none.
    pub lambda_range: Option<(f64, f64)>,
    pub leaves: Vec<Leaf>,
    /// Common point of all leaves when `w0` is affine with nonzero slope.
    pub pencil_center: Option<Point>,
    /// All leaves are parallel (constant `w0`).
    pub parallel: bool,
    /// Leaf parameters whose lines miss the domain. The parameters whose
    /// lines meet it need not form a single interval.
    pub missed_leaves: usize,
    /// Problems with this datum; the other foliations are unaffected.
    pub issues: Vec<String>,
}

impl LinearFoliation {
    /// Values of `w` at `p`, one per characteristic through it.
    pub fn w_at(&self, p: Point, scan_count: usize) -> Result<Vec<CharacteristicRoot>, EulerError> {
        characteristic_roots(&self.datum, p, self.datum.interval, scan_count)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearWeb {
    pub domain: Rect,
    pub foliations: Vec<LinearFoliation>,
}

fn leaf(domain: &Rect, lambda: f64, w0: f64) -> Option<Leaf> {
    let a = Point::new(domain.xmin, lambda - w0 * domain.xmin);
    let b = Point::new(domain.xmax, lambda - w0 * domain.xmax);
    domain.clip_segment(a, b).map(|(start, end)| Leaf {
        lambda,
        w0,
        start,
        end,
    })
}

fn meets(datum: &CauchyDatum, domain: &Rect, lambda: f64) -> bool {
    datum
        .eval(lambda)
        .ok()
        .and_then(|w| leaf(domain, lambda, w))
        .is_some()
}

/// Shrinks `[out, inside]` onto the boundary of the set of meeting parameters.
fn boundary(datum: &CauchyDatum, domain: &Rect, mut inside: f64, mut out: f64) -> f64 {
    for _ in 0..60 {
        let m = 0.5 * (inside + out);
        if meets(datum, domain, m) {
            inside = m;
        } else {
            out = m;
        }
    }
    inside
}

fn lambda_range(datum: &CauchyDatum, domain: &Rect) -> Option<(f64, f64)> {
    let (lo, hi) = datum.interval;
    let at = |i: usize| lo + (hi - lo) * i as f64 / RANGE_SCAN as f64;
    let hits: Vec<usize> = (0..=RANGE_SCAN)
        .filter(|&i| meets(datum, domain, at(i)))
        .collect();
    let (&first, &last) = (hits.first()?, hits.last()?);
    let a = if first == 0 {
        lo
    } else {
        boundary(datum, domain, at(first), at(first - 1))
    };
    let b = if last == RANGE_SCAN {
        hi
    } else {
        boundary(datum, domain, at(last), at(last + 1))
    };
    Some((a, b))
}

/// Fits `w0(λ) = aλ + c` through the samples; returns `(a, c)` if every
/// sample lies on the line.
fn affine_fit(samples: &[(f64, f64)]) -> Option<(f64, f64)> {
    let (&(l0, w0), &(l1, w1)) = (samples.first()?, samples.last()?);
    if l1 == l0 {
        return None;
    }
    let a = (w1 - w0) / (l1 - l0);
    let c = w0 - a * l0;
    samples
        .iter()
        .all(|&(l, w)| (a * l + c - w).abs() <= 1e-9 * (1.0 + w.abs()))
        .then_some((a, c))
}

fn foliation(datum: &CauchyDatum, domain: &Rect, count: usize) -> LinearFoliation {
    let mut out = LinearFoliation {
        datum: datum.clone(),
        lambda_range: None,
        leaves: Vec::new(),
        pencil_center: None,
        parallel: false,
        missed_leaves: 0,
        issues: Vec::new(),
    };
    let Some((lo, hi)) = lambda_range(datum, domain) else {
        out.issues
            .push(String::from("no leaf of this datum meets the domain"));
        return out;
    };
    out.lambda_range = Some((lo, hi));
    let mut samples = Vec::with_capacity(count);
    for k in 0..count {
        let lambda = lo + (hi - lo) * (k as f64 + 0.5) / count as f64;
        match datum.eval(lambda) {
            Ok(w) => {
                samples.push((lambda, w));
                match leaf(domain, lambda, w) {
                    Some(l) => out.leaves.push(l),
                    None => out.missed_leaves += 1,
                }
            }
            Err(e) => out.issues.push(alloc::format!("{e}")),
        }
    }
    if samples.len() >= 2 {
        if let Some((a, c)) = affine_fit(&samples) {
            if a.abs() <= 1e-12 {
                out.parallel = true;
            } else {
                out.pencil_center = Some(Point::new(1.0 / a, -c / a));
            }
        }
    }
    out
}

/// Leaves of the linear foliations generated by each datum inside `domain`.
///
/// Leaf parameters are the midpoints of `leaves_per_foliation` equal cells
/// of the λ-range whose lines meet the domain.
pub fn generate_linear_web(
    data: &[CauchyDatum],
    domain: Rect,
    leaves_per_foliation: usize,
) -> Result<LinearWeb, EulerError> {
    if data.is_empty() {
        return Err(EulerError::NoData);
    }
    if leaves_per_foliation == 0 {
        return Err(EulerError::LeafCount);
    }
    if !domain.is_valid() {
        return Err(EulerError::InvalidDomain);
    }
    for i in 0..data.len() {
        for k in (i + 1)..data.len() {
            if data[i] == data[k] {
                return Err(EulerError::DuplicateData {
                    first: i + 1,
                    second: k + 1,
                });
            }
        }
    }
    Ok(LinearWeb {
        domain,
        foliations: data
            .iter()
            .map(|d| foliation(d, &domain, leaves_per_foliation))
            .collect(),
    })
}
