//! Flex operator and geodesicity residuals of foliations.
//!
//! Every residual is reported raw and normalized by `|∇f|³`. Both sides of
//! the geodesic condition are cubic in the gradient, so the normalized value
//! does not change when `f` is rescaled.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::expr::{EvalError, Expr};
use crate::geometry::{ChristoffelField, ThomasParameters};
use crate::projective::{fit_projective_structure, ProjectiveError, WebPresentation};
use crate::{Grid, Point};

/// Default verdict tolerance on normalized residuals.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

/// Relative gradient size below which a sample is degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-10;

/// First and second partials of a function at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SecondOrder {
    pub value: f64,
    pub fx: f64,
    pub fy: f64,
    pub fxx: f64,
    pub fxy: f64,
    pub fyy: f64,
}

impl SecondOrder {
    pub fn of(f: &Expr, p: Point) -> Result<Self, EvalError> {
        let j = f.jet(p, 2)?;
        let d = |i, k| j.partial(i, k).unwrap_or(0.0);
        Ok(Self {
            value: j.value(),
            fx: d(1, 0),
            fy: d(0, 1),
            fxx: d(2, 0),
            fxy: d(1, 1),
            fyy: d(0, 2),
        })
    }

    /// `f_y² f_xx - 2 f_x f_y f_xy + f_x² f_yy`.
    pub fn flex(&self) -> f64 {
        self.fy * self.fy * self.fxx - 2.0 * self.fx * self.fy * self.fxy
            + self.fx * self.fx * self.fyy
    }

    pub fn gradient_norm(&self) -> f64 {
        libm::hypot(self.fx, self.fy)
    }

    /// Quadratic form `f_y² a_xx - 2 f_x f_y a_xy + f_x² a_yy` for a symmetric
    /// matrix `(a_xx, a_xy, a_yy)`.
    fn transverse(&self, axx: f64, axy: f64, ayy: f64) -> f64 {
        self.fy * self.fy * axx - 2.0 * self.fx * self.fy * axy + self.fx * self.fx * ayy
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualSample {
    pub point: Point,
    pub raw: f64,
    /// `raw / |∇f|³`; NaN when the sample is degenerate.
    pub normalized: f64,
    pub gradient_norm: f64,
    pub degenerate: bool,
}

impl ResidualSample {
    pub fn new(point: Point, raw: f64, gradient_norm: f64) -> Self {
        let degenerate =
            gradient_norm < DEGENERACY_THRESHOLD * (1.0 + point.x.abs() + point.y.abs());
        let normalized = if degenerate {
            f64::NAN
        } else {
            raw / (gradient_norm * gradient_norm * gradient_norm)
        };
        Self {
            point,
            raw,
            normalized,
            gradient_norm,
            degenerate,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GeodesyError {
    Eval(EvalError),
    /// `1 + κ(x² + y²)` is not positive.
    MetricSingular {
        point: Point,
        denominator: f64,
    },
    Projective(ProjectiveError),
    EmptyWeb,
    EmptyGrid,
    StructureMismatch(String),
    AllDegenerate {
        foliation: usize,
    },
}

impl fmt::Display for GeodesyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Eval(e) => e.fmt(f),
            Self::MetricSingular { point, denominator } => write!(
                f,
                "metric is singular at {point}: 1 + k(x^2 + y^2) = {denominator}"
            ),
            Self::Projective(e) => e.fmt(f),
            Self::EmptyWeb => f.write_str("web has no foliations"),
            Self::EmptyGrid => f.write_str("grid has no points"),
            Self::StructureMismatch(m) => write!(f, "structure does not fit the web: {m}"),
            Self::AllDegenerate { foliation } => {
                write!(f, "foliation {foliation} has no usable grid point")
            }
        }
    }
}

impl core::error::Error for GeodesyError {}

impl From<EvalError> for GeodesyError {
    fn from(e: EvalError) -> Self {
        Self::Eval(e)
    }
}

impl From<ProjectiveError> for GeodesyError {
    fn from(e: ProjectiveError) -> Self {
        Self::Projective(e)
    }
}

pub fn flex(f: &Expr, p: Point) -> Result<f64, EvalError> {
    Ok(SecondOrder::of(f, p)?.flex())
}

/// Residual of the flat condition `Flex f = 0`.
pub fn flat_residual(f: &Expr, p: Point) -> Result<ResidualSample, EvalError> {
    let d = SecondOrder::of(f, p)?;
    Ok(ResidualSample::new(p, d.flex(), d.gradient_norm()))
}

/// `f₂²(f₁₁ - Γᵏ₁₁fₖ) - 2f₁f₂(f₁₂ - Γᵏ₁₂fₖ) + f₁²(f₂₂ - Γᵏ₂₂fₖ)`, which
/// vanishes exactly when the leaf through `p` is a geodesic of the connection.
pub fn flex_residual(
    f: &Expr,
    field: &ChristoffelField,
    p: Point,
) -> Result<ResidualSample, EvalError> {
    let d = SecondOrder::of(f, p)?;
    let g = field.at(p)?;
    let cov = |k1: f64, k2: f64| k1 * d.fx + k2 * d.fy;
    let raw = d.fy * d.fy * (d.fxx - cov(g.c1_11, g.c2_11))
        - 2.0 * d.fx * d.fy * (d.fxy - cov(g.c1_12, g.c2_12))
        + d.fx * d.fx * (d.fyy - cov(g.c1_22, g.c2_22));
    Ok(ResidualSample::new(p, raw, d.gradient_norm()))
}

/// Cubic form of the Thomas parameters minus `Flex f`.
pub fn projective_flex_residual(
    f: &Expr,
    pi: &ThomasParameters,
    p: Point,
) -> Result<ResidualSample, EvalError> {
    let d = SecondOrder::of(f, p)?;
    let raw = pi.cubic_form(d.fx, d.fy) - d.flex();
    Ok(ResidualSample::new(p, raw, d.gradient_norm()))
}

/// `Flex f - 2κ(x f_x + y f_y)(f_x² + f_y²) / (1 + κ(x² + y²))`.
pub fn constant_curvature_residual(
    f: &Expr,
    kappa: f64,
    p: Point,
) -> Result<ResidualSample, GeodesyError> {
    let denominator = 1.0 + kappa * (p.x * p.x + p.y * p.y);
    if denominator <= 0.0 {
        return Err(GeodesyError::MetricSingular {
            point: p,
            denominator,
        });
    }
    let d = SecondOrder::of(f, p)?;
    let rhs = 2.0 * kappa * (p.x * d.fx + p.y * d.fy) * (d.fx * d.fx + d.fy * d.fy) / denominator;
    Ok(ResidualSample::new(p, d.flex() - rhs, d.gradient_norm()))
}

/// `Flex f - (z_x f_x + z_y f_y)(f_y² z_xx - 2 f_x f_y z_xy + f_x² z_yy) / (1 + z_x² + z_y²)`.
pub fn graph_surface_residual(f: &Expr, z: &Expr, p: Point) -> Result<ResidualSample, EvalError> {
    let d = SecondOrder::of(f, p)?;
    let s = SecondOrder::of(z, p)?;
    let rhs = (s.fx * d.fx + s.fy * d.fy) * d.transverse(s.fxx, s.fxy, s.fyy)
        / (1.0 + s.fx * s.fx + s.fy * s.fy);
    Ok(ResidualSample::new(p, d.flex() - rhs, d.gradient_norm()))
}

/// Where the Thomas parameters of a projective structure come from.
#[derive(Clone, Debug, PartialEq)]
pub enum ThomasSource {
    Constant(ThomasParameters),
    /// Fitted pointwise from a 4-web.
    FourWeb(WebPresentation),
}

/// Geometry against which a web is tested.
#[derive(Clone, Debug, PartialEq)]
pub enum Structure {
    Connection(ChristoffelField),
    Projective(ThomasSource),
    ConstantCurvature(f64),
    GraphSurface(Expr),
}

impl Structure {
    pub fn residual(&self, f: &Expr, p: Point) -> Result<ResidualSample, GeodesyError> {
        match self {
            Structure::Connection(field) => Ok(flex_residual(f, field, p)?),
            Structure::Projective(ThomasSource::Constant(pi)) => {
                Ok(projective_flex_residual(f, pi, p)?)
            }
            Structure::Projective(ThomasSource::FourWeb(web)) => {
                let pi = fit_projective_structure(web, p)?;
                Ok(projective_flex_residual(f, &pi, p)?)
            }
            Structure::ConstantCurvature(kappa) => constant_curvature_residual(f, *kappa, p),
            Structure::GraphSurface(z) => Ok(graph_surface_residual(f, z, p)?),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Geodesic,
    NonGeodesic,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Geodesic => "geodesic",
            Self::NonGeodesic => "non-geodesic",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SkippedPoint {
    pub point: Point,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FoliationSummary {
    pub max_normalized: f64,
    pub mean_normalized: f64,
    /// Non-degenerate samples that entered the statistics.
    pub evaluated: usize,
    pub degenerate_points: Vec<Point>,
    pub skipped: Vec<SkippedPoint>,
    pub samples: Vec<ResidualSample>,
}

impl FoliationSummary {
    /// Collects residual samples; `max`/`mean` are over `|normalized|` of
    /// non-degenerate samples.
    pub fn from_samples(samples: Vec<ResidualSample>, skipped: Vec<SkippedPoint>) -> Self {
        let mut max: f64 = 0.0;
        let mut sum = 0.0;
        let mut evaluated = 0;
        let mut degenerate_points = Vec::new();
        for s in &samples {
            if s.degenerate {
                degenerate_points.push(s.point);
            } else {
                let a = s.normalized.abs();
                max = max.max(a);
                sum += a;
                evaluated += 1;
            }
        }
        Self {
            max_normalized: max,
            mean_normalized: if evaluated > 0 {
                sum / evaluated as f64
            } else {
                f64::NAN
            },
            evaluated,
            degenerate_points,
            skipped,
            samples,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WebReport {
    pub tolerance: f64,
    pub per_foliation: Vec<FoliationSummary>,
    pub verdict: Verdict,
}

/// Evaluates every foliation of `web` against `structure` on `grid`.
///
/// Points where a formula leaves its domain, the metric is singular, or the
/// fitted structure is degenerate are skipped and listed. Degenerate samples
/// are counted but excluded from the verdict.
pub fn geodesic_web_report(
    web: &[Expr],
    structure: &Structure,
    grid: &Grid,
    tolerance: f64,
) -> Result<WebReport, GeodesyError> {
    if web.is_empty() {
        return Err(GeodesyError::EmptyWeb);
    }
    if grid.is_empty() {
        return Err(GeodesyError::EmptyGrid);
    }
    if let Structure::Projective(ThomasSource::FourWeb(w)) = structure {
        if w.len() != 4 {
            return Err(GeodesyError::StructureMismatch(alloc::format!(
                "projective structure needs a 4-web, got {} functions",
                w.len()
            )));
        }
    }
    let mut per_foliation = Vec::with_capacity(web.len());
    for (index, f) in web.iter().enumerate() {
        let mut samples = Vec::new();
        let mut skipped = Vec::new();
        for p in grid.points() {
            match structure.residual(f, p) {
                Ok(s) => samples.push(s),
                Err(e) => skipped.push(SkippedPoint {
                    point: p,
                    reason: e.to_string(),
                }),
            }
        }
        let summary = FoliationSummary::from_samples(samples, skipped);
        if summary.evaluated == 0 {
            return Err(GeodesyError::AllDegenerate { foliation: index });
        }
        per_foliation.push(summary);
    }
    let geodesic = per_foliation.iter().all(|s| s.max_normalized <= tolerance);
    Ok(WebReport {
        tolerance,
        per_foliation,
        verdict: if geodesic {
            Verdict::Geodesic
        } else {
            Verdict::NonGeodesic
        },
    })
}
