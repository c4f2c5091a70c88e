//! Projective structure of a 4-web, symmetry conditions and the finite-type
//! system for symmetric connections.
//!
//! A non-degenerate 4-web carries exactly one projective structure whose
//! geodesics contain all four foliations. Its Thomas parameters are the
//! coefficients of the binary cubic that takes the value `Flex f_i` at each
//! gradient `∇f_i`.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::expr::{EvalError, Expr};
use crate::geodesy::{projective_flex_residual, ResidualSample, SecondOrder};
use crate::geometry::{curvature_components, CurvatureInputs, CurvatureMatrix, ThomasParameters};
use crate::linalg::solve4;
use crate::taylor::{Axis, Jet, JetError};
use crate::Point;

/// `|J(f_i, f_j)| < JACOBIAN_THRESHOLD · |∇f_i| |∇f_j|` marks a degenerate pair.
pub const JACOBIAN_THRESHOLD: f64 = 1e-8;

/// Largest 1-norm condition number accepted by [`fit_by_linear_solve`].
pub const MAX_CONDITION: f64 = 1e12;

/// Partials smaller than this times the gradient norm count as zero.
const PARTIAL_THRESHOLD: f64 = 1e-10;

/// Tolerance of the initial trace constraint and of the symmetry warnings.
pub const CONSTRAINT_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub enum ProjectiveError {
    Eval(EvalError),
    Jet(JetError),
    /// The web has the wrong number of functions for the operation.
    WebSize {
        required: &'static str,
        found: usize,
    },
    /// Two web functions are not transversal. Indices are 1-based.
    DegenerateWeb {
        first: usize,
        second: usize,
        jacobian: f64,
    },
    IllConditioned {
        condition: f64,
    },
    VanishingDenominator {
        factor: &'static str,
    },
    /// The operation needs order-2 jets of `α`, `β`.
    MissingJets,
    NonPositiveStep {
        step: f64,
    },
    EmptyPath,
    /// `α_x - β_y + 3(σ_x - τ_y)` is not zero at the start of a path.
    ConstraintViolated {
        residual: f64,
    },
}

impl fmt::Display for ProjectiveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Eval(e) => e.fmt(f),
            Self::Jet(e) => e.fmt(f),
            Self::WebSize { required, found } => {
                write!(f, "web needs {required} functions, got {found}")
            }
            Self::DegenerateWeb {
                first,
                second,
                jacobian,
            } => write!(
                f,
                "degenerate web: J(f{first}, f{second}) = {jacobian} is below threshold"
            ),
            Self::IllConditioned { condition } => {
                write!(
                    f,
                    "linear system is singular or ill-conditioned (condition {condition:e})"
                )
            }
            Self::VanishingDenominator { factor } => {
                write!(f, "denominator factor {factor} vanishes")
            }
            Self::MissingJets => f.write_str("alpha and beta were evaluated without jets"),
            Self::NonPositiveStep { step } => write!(f, "step must be positive, got {step}"),
            Self::EmptyPath => f.write_str("path needs at least one point"),
            Self::ConstraintViolated { residual } => write!(
                f,
                "initial state violates the trace constraint (residual {residual:e})"
            ),
        }
    }
}

impl core::error::Error for ProjectiveError {}

impl From<EvalError> for ProjectiveError {
    fn from(e: EvalError) -> Self {
        Self::Eval(e)
    }
}

impl From<JetError> for ProjectiveError {
    fn from(e: JetError) -> Self {
        Self::Jet(e)
    }
}

/// Ordered web functions `f_1, ..., f_d` with `d ≥ 3`.
#[derive(Clone, Debug, PartialEq)]
pub struct WebPresentation {
    functions: Vec<Expr>,
}

impl WebPresentation {
    pub fn new(functions: Vec<Expr>) -> Result<Self, ProjectiveError> {
        if functions.len() < 3 {
            return Err(ProjectiveError::WebSize {
                required: "at least 3",
                found: functions.len(),
            });
        }
        Ok(Self { functions })
    }

    pub fn functions(&self) -> &[Expr] {
        &self.functions
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    /// Whether `f_1 = x` and `f_2 = y` exactly.
    pub fn is_normalized(&self) -> bool {
        self.functions[0].is_variable(Axis::X) && self.functions[1].is_variable(Axis::Y)
    }
}

fn jacobian(a: &SecondOrder, b: &SecondOrder) -> f64 {
    a.fx * b.fy - a.fy * b.fx
}

fn second_orders(functions: &[Expr], p: Point) -> Result<Vec<SecondOrder>, ProjectiveError> {
    functions
        .iter()
        .map(|f| SecondOrder::of(f, p).map_err(ProjectiveError::from))
        .collect()
}

fn check_transversal(d: &[SecondOrder]) -> Result<(), ProjectiveError> {
    for i in 0..d.len() {
        for k in (i + 1)..d.len() {
            let j = jacobian(&d[i], &d[k]);
            if j.abs() <= JACOBIAN_THRESHOLD * d[i].gradient_norm() * d[k].gradient_norm() {
                return Err(ProjectiveError::DegenerateWeb {
                    first: i + 1,
                    second: k + 1,
                    jacobian: j,
                });
            }
        }
    }
    Ok(())
}

fn require_four(web: &WebPresentation) -> Result<&[Expr], ProjectiveError> {
    if web.len() != 4 {
        return Err(ProjectiveError::WebSize {
            required: "exactly 4",
            found: web.len(),
        });
    }
    Ok(web.functions())
}

/// Lagrange interpolation of the cubic form through the four gradients.
fn fit_closed_form(d: &[SecondOrder]) -> Result<ThomasParameters, ProjectiveError> {
    check_transversal(d)?;
    let mut acc = [0.0; 4];
    for i in 0..4 {
        let others: Vec<usize> = (0..4).filter(|&k| k != i).collect();
        let weight = d[i].flex()
            / others
                .iter()
                .map(|&k| jacobian(&d[i], &d[k]))
                .product::<f64>();
        let prod1: f64 = others.iter().map(|&k| d[k].fx).product();
        let prod2: f64 = others.iter().map(|&k| d[k].fy).product();
        // Mixed coefficients: one factor from one gradient component, two from the other.
        let mut mixed_1 = 0.0;
        let mut mixed_2 = 0.0;
        for &k in &others {
            let rest = others.iter().filter(|&&l| l != k);
            mixed_1 += d[k].fx * rest.clone().map(|&l| d[l].fy).product::<f64>();
            mixed_2 += d[k].fy * rest.map(|&l| d[l].fx).product::<f64>();
        }
        acc[0] += prod2 * weight;
        acc[1] += mixed_1 * weight;
        acc[2] += mixed_2 * weight;
        acc[3] += prod1 * weight;
    }
    let pi = ThomasParameters {
        p1_22: acc[0],
        p1_12: acc[1] / 3.0,
        p2_12: -acc[2] / 3.0,
        p2_11: -acc[3],
    };
    if pi.is_finite() {
        Ok(pi)
    } else {
        Err(ProjectiveError::Jet(JetError::NonFinite))
    }
}

/// Thomas parameters of the projective structure in which all four
/// foliations of `web` are geodesic.
pub fn fit_projective_structure(
    web: &WebPresentation,
    p: Point,
) -> Result<ThomasParameters, ProjectiveError> {
    let d = second_orders(require_four(web)?, p)?;
    fit_closed_form(&d)
}

/// Same result as [`fit_projective_structure`], obtained by solving the 4x4
/// system `cubic_form(∇f_i) = Flex f_i` directly.
pub fn fit_by_linear_solve(
    web: &WebPresentation,
    p: Point,
) -> Result<ThomasParameters, ProjectiveError> {
    let d = second_orders(require_four(web)?, p)?;
    let mut a = [[0.0; 4]; 4];
    let mut b = [0.0; 4];
    for (i, s) in d.iter().enumerate() {
        let (f1, f2) = (s.fx, s.fy);
        a[i] = [
            f1 * f1 * f1,
            -3.0 * f1 * f1 * f2,
            -3.0 * f1 * f2 * f2,
            f2 * f2 * f2,
        ];
        b[i] = s.flex();
    }
    let solution = solve4(a, b);
    if !(solution.condition < MAX_CONDITION) {
        return Err(ProjectiveError::IllConditioned {
            condition: solution.condition,
        });
    }
    Ok(ThomasParameters::from_array(solution.x))
}

/// Residuals of `f_5, ..., f_d` against the structure fitted from `f_1..f_4`.
pub fn dweb_geodesic_residuals(
    web: &WebPresentation,
    p: Point,
) -> Result<Vec<ResidualSample>, ProjectiveError> {
    if web.len() < 5 {
        return Err(ProjectiveError::WebSize {
            required: "at least 5",
            found: web.len(),
        });
    }
    let (lead, rest) = web.functions().split_at(4);
    let pi = fit_closed_form(&second_orders(lead, p)?)?;
    rest.iter()
        .map(|f| projective_flex_residual(f, &pi, p).map_err(ProjectiveError::from))
        .collect()
}

/// `α = -3Π¹₁₂` and `β = -3Π²₁₂` of the normalized web `{x, y, f₃, f₄}`,
/// optionally with their order-2 jets.
#[derive(Clone, Debug, PartialEq)]
pub struct AlphaBeta {
    pub alpha: f64,
    pub beta: f64,
    pub jets: Option<(Jet, Jet)>,
}

/// Values and partials of `α` and `β` up to second order.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct AlphaBetaDerivatives {
    pub alpha: f64,
    pub beta: f64,
    pub alpha_x: f64,
    pub alpha_y: f64,
    pub beta_x: f64,
    pub beta_y: f64,
    pub alpha_xx: f64,
    pub alpha_xy: f64,
    pub alpha_yy: f64,
    pub beta_xx: f64,
    pub beta_xy: f64,
    pub beta_yy: f64,
}

impl AlphaBeta {
    pub fn derivatives(&self) -> Result<AlphaBetaDerivatives, ProjectiveError> {
        let (a, b) = self.jets.as_ref().ok_or(ProjectiveError::MissingJets)?;
        let d = |j: &Jet, i, k| j.partial(i, k);
        Ok(AlphaBetaDerivatives {
            alpha: self.alpha,
            beta: self.beta,
            alpha_x: d(a, 1, 0)?,
            alpha_y: d(a, 0, 1)?,
            beta_x: d(b, 1, 0)?,
            beta_y: d(b, 0, 1)?,
            alpha_xx: d(a, 2, 0)?,
            alpha_xy: d(a, 1, 1)?,
            alpha_yy: d(a, 0, 2)?,
            beta_xx: d(b, 2, 0)?,
            beta_xy: d(b, 1, 1)?,
            beta_yy: d(b, 0, 2)?,
        })
    }
}

fn check_denominators(f3: &SecondOrder, f4: &SecondOrder) -> Result<(), ProjectiveError> {
    let n3 = f3.gradient_norm();
    let n4 = f4.gradient_norm();
    let checks = [
        ("f3_x", f3.fx, n3),
        ("f3_y", f3.fy, n3),
        ("f4_x", f4.fx, n4),
        ("f4_y", f4.fy, n4),
    ];
    for (factor, v, n) in checks {
        if v.abs() <= PARTIAL_THRESHOLD * n {
            return Err(ProjectiveError::VanishingDenominator { factor });
        }
    }
    if jacobian(f3, f4).abs() <= JACOBIAN_THRESHOLD * n3 * n4 {
        return Err(ProjectiveError::VanishingDenominator { factor: "delta" });
    }
    Ok(())
}

/// Minimal ring interface shared by plain values and jets.
trait Field: Sized + Clone {
    fn add(&self, o: &Self) -> Result<Self, JetError>;
    fn sub(&self, o: &Self) -> Result<Self, JetError>;
    fn mul(&self, o: &Self) -> Result<Self, JetError>;
    fn div(&self, o: &Self) -> Result<Self, JetError>;
}

impl Field for f64 {
    fn add(&self, o: &Self) -> Result<Self, JetError> {
        Ok(self + o)
    }
    fn sub(&self, o: &Self) -> Result<Self, JetError> {
        Ok(self - o)
    }
    fn mul(&self, o: &Self) -> Result<Self, JetError> {
        Ok(self * o)
    }
    fn div(&self, o: &Self) -> Result<Self, JetError> {
        Ok(self / o)
    }
}

impl Field for Jet {
    fn add(&self, o: &Self) -> Result<Self, JetError> {
        self.try_add(o)
    }
    fn sub(&self, o: &Self) -> Result<Self, JetError> {
        self.try_sub(o)
    }
    fn mul(&self, o: &Self) -> Result<Self, JetError> {
        self.try_mul(o)
    }
    fn div(&self, o: &Self) -> Result<Self, JetError> {
        self.try_div(o)
    }
}

/// `[f_x, f_y, f_xx, f_xy, f_yy]` of one web function.
struct Partials<T> {
    d: [T; 5],
}

impl<T: Field> Partials<T> {
    fn flex(&self) -> Result<T, JetError> {
        let [fx, fy, fxx, fxy, fyy] = &self.d;
        let a = fy.mul(fy)?.mul(fxx)?;
        let b = fx.mul(fy)?.mul(fxy)?;
        let c = fx.mul(fx)?.mul(fyy)?;
        a.sub(&b)?.sub(&b)?.add(&c)
    }
}

/// Returns `(α, β)`.
fn alpha_beta_generic<T: Field>(f3: &Partials<T>, f4: &Partials<T>) -> Result<(T, T), JetError> {
    let [f3x, f3y, ..] = &f3.d;
    let [f4x, f4y, ..] = &f4.d;
    let delta = f3x.mul(f4y)?.sub(&f3y.mul(f4x)?)?;
    let g3 = f3.flex()?.div(&f3x.mul(f3y)?.mul(&delta)?)?;
    let g4 = f4.flex()?.div(&f4x.mul(f4y)?.mul(&delta)?)?;
    let alpha = f4y.mul(&g3)?.sub(&f3y.mul(&g4)?)?;
    let beta = f3x.mul(&g4)?.sub(&f4x.mul(&g3)?)?;
    Ok((alpha, beta))
}

fn jet_partials(f: &Expr, p: Point) -> Result<Partials<Jet>, ProjectiveError> {
    let j = f.jet(p, 4)?;
    let fx = j.derivative(Axis::X)?;
    let fy = j.derivative(Axis::Y)?;
    Ok(Partials {
        d: [
            fx.truncate(2)?,
            fy.truncate(2)?,
            fx.derivative(Axis::X)?,
            fx.derivative(Axis::Y)?,
            fy.derivative(Axis::Y)?,
        ],
    })
}

/// `α` and `β` for the web `{x, y, f₃, f₄}`. With `jet_order = 2` the result
/// also carries their order-2 jets; any other order is treated as 0.
pub fn alpha_beta(
    f3: &Expr,
    f4: &Expr,
    p: Point,
    jet_order: usize,
) -> Result<AlphaBeta, ProjectiveError> {
    let s3 = SecondOrder::of(f3, p)?;
    let s4 = SecondOrder::of(f4, p)?;
    check_denominators(&s3, &s4)?;
    if jet_order == 2 {
        let (a, b) = alpha_beta_generic(&jet_partials(f3, p)?, &jet_partials(f4, p)?)?;
        Ok(AlphaBeta {
            alpha: a.value(),
            beta: b.value(),
            jets: Some((a, b)),
        })
    } else {
        let partials = |s: &SecondOrder| Partials {
            d: [s.fx, s.fy, s.fxx, s.fxy, s.fyy],
        };
        let (alpha, beta) = alpha_beta_generic(&partials(&s3), &partials(&s4))?;
        if !(alpha.is_finite() && beta.is_finite()) {
            return Err(ProjectiveError::Jet(JetError::NonFinite));
        }
        Ok(AlphaBeta {
            alpha,
            beta,
            jets: None,
        })
    }
}

/// Residuals of the two conditions on `α`, `β` under which the projective
/// structure of `{x, y, f₃, f₄}` is symmetric:
/// `α_xx + 2β_xy - βα_x - 2ββ_y` and `2α_xy + β_yy - 2αα_x - αβ_y`.
pub fn symmetric_conditions_residual(
    f3: &Expr,
    f4: &Expr,
    p: Point,
) -> Result<[f64; 2], ProjectiveError> {
    let d = alpha_beta(f3, f4, p, 2)?.derivatives()?;
    Ok(symmetric_conditions(&d))
}

fn symmetric_conditions(d: &AlphaBetaDerivatives) -> [f64; 2] {
    [
        d.alpha_xx + 2.0 * d.beta_xy - d.beta * d.alpha_x - 2.0 * d.beta * d.beta_y,
        2.0 * d.alpha_xy + d.beta_yy - 2.0 * d.alpha * d.alpha_x - d.alpha * d.beta_y,
    ]
}

/// `σ = Γ¹₁₂`, `τ = Γ²₁₂` of the normalized connection and their first partials.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct FiniteTypeState {
    pub sigma: f64,
    pub tau: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub tau_x: f64,
    pub tau_y: f64,
}

impl FiniteTypeState {
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.sigma,
            self.tau,
            self.sigma_x,
            self.sigma_y,
            self.tau_x,
            self.tau_y,
        ]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            sigma: a[0],
            tau: a[1],
            sigma_x: a[2],
            sigma_y: a[3],
            tau_x: a[4],
            tau_y: a[5],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }

    /// `α_x - β_y + 3(σ_x - τ_y)`, the trace of the curvature matrix.
    pub fn constraint_residual(&self, ab: &AlphaBetaDerivatives) -> f64 {
        ab.alpha_x - ab.beta_y + 3.0 * (self.sigma_x - self.tau_y)
    }

    /// Largest componentwise difference.
    pub fn max_difference(&self, other: &Self) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Second partials of `σ` and `τ`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct FiniteTypeRhs {
    pub sigma_xx: f64,
    pub sigma_xy: f64,
    pub sigma_yy: f64,
    pub tau_xx: f64,
    pub tau_xy: f64,
    pub tau_yy: f64,
}

/// Second partials of `σ`, `τ` for a connection with covariantly constant
/// curvature, in terms of the state and of `α`, `β`.
pub fn finite_type_rhs(s: &FiniteTypeState, ab: &AlphaBetaDerivatives) -> FiniteTypeRhs {
    let (sg, t) = (s.sigma, s.tau);
    let (a, b) = (ab.alpha, ab.beta);
    FiniteTypeRhs {
        sigma_xx: 2.0 * sg * s.tau_x
            + (4.0 * t + b) * s.sigma_x
            + (t - b) * ab.beta_y
            + 2.0 * t * ab.alpha_x
            + ab.beta_xy
            - 2.0 * sg * t * (2.0 * t + b),
        sigma_xy: (3.0 * sg + a) * s.sigma_x
            + 2.0 * sg * ab.alpha_x
            + sg * s.tau_y
            + 2.0 * t * s.sigma_y
            + sg * ab.beta_y
            - 2.0 * sg * t * (2.0 * sg + a),
        sigma_yy: 3.0 * (2.0 * sg + a) * s.sigma_y + sg * ab.alpha_y
            - 2.0 * sg * (a * a + 2.0 * sg * sg + 3.0 * sg * a),
        tau_xx: 3.0 * (2.0 * t + b) * s.tau_x + t * ab.beta_x
            - 2.0 * t * (b * b + 2.0 * t * t + 3.0 * t * b),
        tau_xy: t * s.sigma_x
            + t * ab.alpha_x
            + (3.0 * t + b) * s.tau_y
            + 2.0 * (t * ab.beta_y + sg * s.tau_x)
            - 2.0 * sg * t * (2.0 * t + b),
        tau_yy: (sg - a) * ab.alpha_x
            + (4.0 * sg + a) * s.tau_y
            + 2.0 * (t * s.sigma_y + sg * ab.beta_y)
            + ab.alpha_xy
            - 2.0 * sg * t * (2.0 * sg + a),
    }
}

/// Curvature matrix of the normalized connection described by `state`.
pub fn curvature_along(s: &FiniteTypeState, ab: &AlphaBetaDerivatives) -> CurvatureMatrix {
    curvature_components(&CurvatureInputs {
        sigma: s.sigma,
        tau: s.tau,
        alpha: ab.alpha,
        beta: ab.beta,
        sigma_x: s.sigma_x,
        sigma_y: s.sigma_y,
        tau_x: s.tau_x,
        tau_y: s.tau_y,
        alpha_x: ab.alpha_x,
        beta_y: ab.beta_y,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Integration {
    pub state: FiniteTypeState,
    /// Trace constraint at the end point.
    pub constraint_residual: f64,
    pub steps: usize,
    pub warnings: Vec<String>,
}

struct Transport<'a> {
    f3: &'a Expr,
    f4: &'a Expr,
}

impl Transport<'_> {
    fn derivatives(&self, p: Point) -> Result<AlphaBetaDerivatives, ProjectiveError> {
        alpha_beta(self.f3, self.f4, p, 2)?.derivatives()
    }

    /// Directional derivative of the state along `(dx, dy)` at `p`.
    fn field(&self, p: Point, s: [f64; 6], dx: f64, dy: f64) -> Result<[f64; 6], ProjectiveError> {
        let st = FiniteTypeState::from_array(s);
        let r = finite_type_rhs(&st, &self.derivatives(p)?);
        let along_x = [
            st.sigma_x, st.tau_x, r.sigma_xx, r.sigma_xy, r.tau_xx, r.tau_xy,
        ];
        let along_y = [
            st.sigma_y, st.tau_y, r.sigma_xy, r.sigma_yy, r.tau_xy, r.tau_yy,
        ];
        let mut out = [0.0; 6];
        for i in 0..6 {
            out[i] = dx * along_x[i] + dy * along_y[i];
        }
        Ok(out)
    }
}

fn axpy(s: &[f64; 6], h: f64, k: &[f64; 6]) -> [f64; 6] {
    let mut out = *s;
    for i in 0..6 {
        out[i] += h * k[i];
    }
    out
}

/// Transports `initial` along the polyline `path` with fixed-step classical
/// Runge–Kutta, at most `step` long per step.
///
/// Points where the symmetry conditions fail beyond [`CONSTRAINT_TOLERANCE`]
/// produce warnings; the transport still runs.
pub fn integrate_symmetric_connection(
    f3: &Expr,
    f4: &Expr,
    initial: FiniteTypeState,
    path: &[Point],
    step: f64,
) -> Result<Integration, ProjectiveError> {
    if !(step > 0.0) {
        return Err(ProjectiveError::NonPositiveStep { step });
    }
    let (&start, _) = path.split_first().ok_or(ProjectiveError::EmptyPath)?;
    let t = Transport { f3, f4 };
    let residual = initial.constraint_residual(&t.derivatives(start)?);
    if !(residual.abs() <= CONSTRAINT_TOLERANCE) {
        return Err(ProjectiveError::ConstraintViolated { residual });
    }
    let mut warnings = Vec::new();
    let check = |p: Point, warnings: &mut Vec<String>| -> Result<(), ProjectiveError> {
        let r = symmetric_conditions(&t.derivatives(p)?);
        if r[0].abs().max(r[1].abs()) > CONSTRAINT_TOLERANCE {
            warnings.push(alloc::format!(
                "symmetry conditions fail at {p}: residuals {:e}, {:e}",
                r[0],
                r[1]
            ));
        }
        Ok(())
    };
    check(start, &mut warnings)?;
    let mut s = initial.as_array();
    let mut steps = 0;
    for pair in path.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let len = libm::hypot(dx, dy);
        if len == 0.0 {
            continue;
        }
        let n = libm::ceil(len / step).max(1.0) as usize;
        let h = 1.0 / n as f64;
        let at = |u: f64| Point::new(a.x + u * dx, a.y + u * dy);
        for i in 0..n {
            let u = i as f64 * h;
            let k1 = t.field(at(u), s, dx, dy)?;
            let k2 = t.field(at(u + 0.5 * h), axpy(&s, 0.5 * h, &k1), dx, dy)?;
            let k3 = t.field(at(u + 0.5 * h), axpy(&s, 0.5 * h, &k2), dx, dy)?;
            let k4 = t.field(at(u + h), axpy(&s, h, &k3), dx, dy)?;
            for c in 0..6 {
                s[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            }
            steps += 1;
        }
        check(b, &mut warnings)?;
    }
    let state = FiniteTypeState::from_array(s);
    let end = *path.last().unwrap_or(&start);
    let constraint_residual = state.constraint_residual(&t.derivatives(end)?);
    Ok(Integration {
        state,
        constraint_residual,
        steps,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse;
    use alloc::vec;

    fn web(s: &str) -> WebPresentation {
        WebPresentation::new(crate::parse_list(s).unwrap()).unwrap()
    }

    fn e(s: &str) -> Expr {
        parse(s).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn presentation() {
        assert!(WebPresentation::new(vec![e("x"), e("y")]).is_err());
        assert!(web("x; y; x+y").is_normalized());
        assert!(!web("y; x; x+y").is_normalized());
    }

    #[test]
    fn linear_web_has_zero_structure() {
        let w = web("x; y; x+y; x-y");
        for p in [Point::new(0.3, -2.0), Point::new(5.0, 1.0)] {
            assert_eq!(
                fit_projective_structure(&w, p).unwrap(),
                ThomasParameters::ZERO
            );
            assert_eq!(fit_by_linear_solve(&w, p).unwrap(), ThomasParameters::ZERO);
        }
    }

    #[test]
    fn fit_example() {
        let w = web("x; y; x+y; x*y");
        let p = Point::new(2.0, 1.0);
        let pi = fit_projective_structure(&w, p).unwrap();
        let expected = [0.0, -2.0 / 3.0, 2.0 / 3.0, 0.0];
        for (a, b) in pi.as_array().iter().zip(expected) {
            assert!(close(*a, b, 1e-15), "{pi:?}");
        }
        let lin = fit_by_linear_solve(&w, p).unwrap();
        for (a, b) in lin.as_array().iter().zip(expected) {
            assert!(close(*a, b, 1e-12), "{lin:?}");
        }
        let err = fit_projective_structure(&w, Point::new(1.0, 1.0)).unwrap_err();
        assert!(matches!(
            err,
            ProjectiveError::DegenerateWeb {
                first: 3,
                second: 4,
                ..
            }
        ));
    }

    #[test]
    fn repeated_function_is_singular() {
        let w = web("x; y; x*y; x*y");
        assert!(matches!(
            fit_by_linear_solve(&w, Point::new(2.0, 1.0)),
            Err(ProjectiveError::IllConditioned { .. })
        ));
        assert!(fit_projective_structure(&w, Point::new(2.0, 1.0)).is_err());
    }

    #[test]
    fn wrong_sizes() {
        let p = Point::new(2.0, 1.0);
        assert!(matches!(
            fit_projective_structure(&web("x; y; x+y"), p),
            Err(ProjectiveError::WebSize { .. })
        ));
        assert!(matches!(
            dweb_geodesic_residuals(&web("x; y; x+y; x*y"), p),
            Err(ProjectiveError::WebSize { .. })
        ));
    }

    #[test]
    fn dweb_residual_of_non_geodesic_fifth() {
        let r = dweb_geodesic_residuals(&web("x; y; x+y; x-y; x*y"), Point::new(1.0, 1.0)).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].raw, 2.0);
    }

    #[test]
    fn alpha_beta_example() {
        let p = Point::new(2.0, 1.0);
        let ab = alpha_beta(&e("x+y"), &e("x*y"), p, 2).unwrap();
        let d = ab.derivatives().unwrap();
        let got = [
            d.alpha, d.beta, d.alpha_x, d.alpha_y, d.beta_x, d.beta_y, d.alpha_xy, d.beta_xy,
        ];
        let want = [2.0, -2.0, -2.0, 2.0, 2.0, -2.0, -4.0, 4.0];
        for (g, w) in got.iter().zip(want) {
            assert!(close(*g, w, 1e-13), "{got:?}");
        }
        let plain = alpha_beta(&e("x+y"), &e("x*y"), p, 0).unwrap();
        assert_eq!((plain.alpha, plain.beta), (2.0, -2.0));
        assert_eq!(plain.derivatives(), Err(ProjectiveError::MissingJets));
        assert_eq!(
            alpha_beta(&e("x+y"), &e("x*y"), Point::new(1.0, 1.0), 0),
            Err(ProjectiveError::VanishingDenominator { factor: "delta" })
        );
        assert_eq!(
            alpha_beta(&e("x"), &e("x*y"), p, 0),
            Err(ProjectiveError::VanishingDenominator { factor: "f3_y" })
        );
    }

    #[test]
    fn symmetric_conditions_examples() {
        let p = Point::new(2.0, 1.0);
        let r = symmetric_conditions_residual(&e("x+y"), &e("x-y"), p).unwrap();
        assert_eq!(r, [0.0, 0.0]);
        let r = symmetric_conditions_residual(&e("x+y"), &e("x*y"), p).unwrap();
        assert!(r[0].abs() < 1e-12 && r[1].abs() < 1e-12, "{r:?}");
        let r = symmetric_conditions_residual(&e("x+y"), &e("x*y + x^3"), p).unwrap();
        assert!(r[0].abs().max(r[1].abs()) > 1e-3, "{r:?}");
    }

    #[test]
    fn rhs_examples() {
        let zero = FiniteTypeRhs::default();
        assert_eq!(
            finite_type_rhs(
                &FiniteTypeState::default(),
                &AlphaBetaDerivatives::default()
            ),
            zero
        );
        let d = alpha_beta(&e("x+y"), &e("x*y"), Point::new(2.0, 1.0), 2)
            .unwrap()
            .derivatives()
            .unwrap();
        let r = finite_type_rhs(&FiniteTypeState::default(), &d);
        for v in [
            r.sigma_xx, r.sigma_xy, r.sigma_yy, r.tau_xx, r.tau_xy, r.tau_yy,
        ] {
            assert!(v.abs() < 1e-12, "{r:?}");
        }
    }

    #[test]
    fn curvature_trace_is_constraint() {
        let s = FiniteTypeState::from_array([0.3, -0.7, 1.1, 0.4, -0.2, 0.9]);
        let d = AlphaBetaDerivatives {
            alpha: 0.5,
            beta: -1.5,
            alpha_x: 0.25,
            beta_y: 2.0,
            ..Default::default()
        };
        let c = curvature_along(&s, &d);
        assert!((c.trace() - s.constraint_residual(&d)).abs() < 1e-15);
        assert_eq!(
            curvature_along(
                &FiniteTypeState::default(),
                &AlphaBetaDerivatives::default()
            ),
            CurvatureMatrix::default()
        );
    }

    #[test]
    fn integration_guards() {
        let (f3, f4) = (e("x+y"), e("x-y"));
        let path = [Point::new(0.0, 0.0), Point::new(1.0, 2.0)];
        let s = FiniteTypeState::default();
        let r = integrate_symmetric_connection(&f3, &f4, s, &path, 0.1).unwrap();
        assert_eq!(r.state, s);
        assert!(r.warnings.is_empty());
        assert!(integrate_symmetric_connection(&f3, &f4, s, &path, 0.0).is_err());
        assert!(integrate_symmetric_connection(&f3, &f4, s, &[], 0.1).is_err());
        let bad = FiniteTypeState {
            sigma_x: 1.0,
            ..Default::default()
        };
        assert!(matches!(
            integrate_symmetric_connection(&f3, &f4, bad, &path, 0.1),
            Err(ProjectiveError::ConstraintViolated { .. })
        ));
    }
}
