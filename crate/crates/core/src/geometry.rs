//! Torsion-free planar connections, Thomas parameters and curvature.

use core::fmt;

use crate::expr::{EvalError, Expr};
use crate::Point;

/// Christoffel symbols `Γ^k_ij` of a torsion-free connection at a point.
///
/// Only the six independent components are stored; `Γ^k_21 = Γ^k_12`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Christoffels {
    pub c1_11: f64,
    pub c1_12: f64,
    pub c1_22: f64,
    pub c2_11: f64,
    pub c2_12: f64,
    pub c2_22: f64,
}

impl Christoffels {
    /// `Γ^k_ij` with 1-based indices; lower indices may come in either order.
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        match (k, i, j) {
            (1, 1, 1) => self.c1_11,
            (1, 1, 2) => self.c1_12,
            (1, 2, 2) => self.c1_22,
            (2, 1, 1) => self.c2_11,
            (2, 1, 2) => self.c2_12,
            (2, 2, 2) => self.c2_22,
            _ => panic!("Christoffel index ({k}, {i}, {j}) out of range"),
        }
    }

    pub fn thomas(&self) -> ThomasParameters {
        ThomasParameters {
            p1_22: self.c1_22,
            p1_12: -(self.c2_22 - 2.0 * self.c1_12) / 3.0,
            p2_12: -(self.c1_11 - 2.0 * self.c2_12) / 3.0,
            p2_11: self.c2_11,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Source {
    /// Order: Γ¹₁₁, Γ¹₁₂, Γ¹₂₂, Γ²₁₁, Γ²₁₂, Γ²₂₂.
    Explicit([Expr; 6]),
    GraphSurface(Expr),
}

/// A field of Christoffel symbols over the plane.
///
/// Explicit fields hold one formula per component. The Levi-Civita
/// connection of a graph surface `z = z(x, y)` is kept as `z` itself and
/// its symbols are produced from second-order jets of `z`, since the
/// formula language has no symbolic differentiation.
#[derive(Clone, Debug, PartialEq)]
pub struct ChristoffelField {
    source: Source,
}

impl ChristoffelField {
    /// Components in the order Γ¹₁₁, Γ¹₁₂, Γ¹₂₂, Γ²₁₁, Γ²₁₂, Γ²₂₂.
    pub fn explicit(components: [Expr; 6]) -> Self {
        Self {
            source: Source::Explicit(components),
        }
    }

    pub fn flat() -> Self {
        Self::explicit(core::array::from_fn(|_| Expr::Const(0.0)))
    }

    /// Levi-Civita connection of `(dx² + dy²) / (1 + κ(x² + y²))²`.
    ///
    /// With `b = 1/(1 + κ(x² + y²))`:
    /// `Γ¹₁₂ = Γ²₂₂ = -Γ²₁₁ = -2κyb` and `Γ¹₁₁ = Γ²₁₂ = -Γ¹₂₂ = -2κxb`.
    pub fn constant_curvature(kappa: f64) -> Self {
        let b = || {
            Expr::Const(1.0)
                / (Expr::Const(1.0) + Expr::Const(kappa) * (Expr::X.powf(2.0) + Expr::Y.powf(2.0)))
        };
        let along_x = || Expr::Const(-2.0 * kappa) * Expr::X * b();
        let along_y = || Expr::Const(-2.0 * kappa) * Expr::Y * b();
        Self::explicit([
            along_x(),
            along_y(),
            -along_x(),
            -along_y(),
            along_x(),
            along_y(),
        ])
    }

    /// Levi-Civita connection of the metric induced on the graph `z = z(x, y)`:
    /// `Γ^k_ij = z_k z_ij / (1 + z_x² + z_y²)`.
    pub fn graph_surface(z: Expr) -> Self {
        Self {
            source: Source::GraphSurface(z),
        }
    }

    /// Component formulas, when the field is given explicitly.
    pub fn components(&self) -> Option<&[Expr; 6]> {
        match &self.source {
            Source::Explicit(c) => Some(c),
            Source::GraphSurface(_) => None,
        }
    }

    pub fn is_graph_surface(&self) -> bool {
        matches!(self.source, Source::GraphSurface(_))
    }

    pub fn at(&self, p: Point) -> Result<Christoffels, EvalError> {
        match &self.source {
            Source::Explicit(c) => Ok(Christoffels {
                c1_11: c[0].eval(p)?,
                c1_12: c[1].eval(p)?,
                c1_22: c[2].eval(p)?,
                c2_11: c[3].eval(p)?,
                c2_12: c[4].eval(p)?,
                c2_22: c[5].eval(p)?,
            }),
            Source::GraphSurface(z) => {
                let j = z.jet(p, 2)?;
                let zx = j.partial(1, 0).unwrap_or(0.0);
                let zy = j.partial(0, 1).unwrap_or(0.0);
                let zxx = j.partial(2, 0).unwrap_or(0.0);
                let zxy = j.partial(1, 1).unwrap_or(0.0);
                let zyy = j.partial(0, 2).unwrap_or(0.0);
                let d = 1.0 + zx * zx + zy * zy;
                Ok(Christoffels {
                    c1_11: zx * zxx / d,
                    c1_12: zx * zxy / d,
                    c1_22: zx * zyy / d,
                    c2_11: zy * zxx / d,
                    c2_12: zy * zxy / d,
                    c2_22: zy * zyy / d,
                })
            }
        }
    }
}

/// Thomas parameters of a planar projective structure at a point.
///
/// The remaining components follow from `Π²₂₂ = -Π¹₁₂` and `Π¹₁₁ = -Π²₁₂`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ThomasParameters {
    pub p1_22: f64,
    pub p1_12: f64,
    pub p2_12: f64,
    pub p2_11: f64,
}

impl ThomasParameters {
    pub const ZERO: Self = Self {
        p1_22: 0.0,
        p1_12: 0.0,
        p2_12: 0.0,
        p2_11: 0.0,
    };

    pub fn p2_22(&self) -> f64 {
        -self.p1_12
    }

    pub fn p1_11(&self) -> f64 {
        -self.p2_12
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }

    /// `[Π¹₂₂, Π¹₁₂, Π²₁₂, Π²₁₁]`.
    pub fn as_array(&self) -> [f64; 4] {
        [self.p1_22, self.p1_12, self.p2_12, self.p2_11]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self {
            p1_22: a[0],
            p1_12: a[1],
            p2_12: a[2],
            p2_11: a[3],
        }
    }

    /// `Π¹₂₂ f₁³ - 3Π¹₁₂ f₁² f₂ - 3Π²₁₂ f₁ f₂² + Π²₁₁ f₂³` for a gradient `(f₁, f₂)`.
    pub fn cubic_form(&self, f1: f64, f2: f64) -> f64 {
        self.p1_22 * f1 * f1 * f1
            - 3.0 * self.p1_12 * f1 * f1 * f2
            - 3.0 * self.p2_12 * f1 * f2 * f2
            + self.p2_11 * f2 * f2 * f2
    }

    /// `Π²₁₁ w³ - 3Π²₁₂ w² - 3Π¹₁₂ w + Π¹₂₂`, the right side of the Euler
    /// equation associated with the connection.
    pub fn euler_cubic(&self, w: f64) -> f64 {
        ((self.p2_11 * w - 3.0 * self.p2_12) * w - 3.0 * self.p1_12) * w + self.p1_22
    }
}

pub fn thomas_from_christoffels(
    field: &ChristoffelField,
    p: Point,
) -> Result<ThomasParameters, EvalError> {
    Ok(field.at(p)?.thomas())
}

/// Curvature components `R¹₁₁₂, R¹₂₁₂, R²₁₁₂, R²₂₁₂`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct CurvatureMatrix {
    pub r1_112: f64,
    pub r1_212: f64,
    pub r2_112: f64,
    pub r2_212: f64,
}

impl CurvatureMatrix {
    pub fn trace(&self) -> f64 {
        self.r1_112 + self.r2_212
    }

    pub fn determinant(&self) -> f64 {
        self.r1_112 * self.r2_212 - self.r1_212 * self.r2_112
    }
}

/// Inputs of [`curvature_components`] for a connection normalized so that
/// `Γ²₁₁ = Γ¹₂₂ = 0`, with `σ = Γ¹₁₂`, `τ = Γ²₁₂`,
/// `α = Γ²₂₂ - 2Γ¹₁₂` and `β = Γ¹₁₁ - 2Γ²₁₂`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct CurvatureInputs {
    pub sigma: f64,
    pub tau: f64,
    pub alpha: f64,
    pub beta: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub tau_x: f64,
    pub tau_y: f64,
    pub alpha_x: f64,
    pub beta_y: f64,
}

pub fn curvature_components(c: &CurvatureInputs) -> CurvatureMatrix {
    CurvatureMatrix {
        r1_112: c.sigma_x - 2.0 * c.tau_y - c.beta_y + c.sigma * c.tau,
        r1_212: -c.sigma_y + c.sigma * c.sigma + c.sigma * c.alpha,
        r2_112: c.tau_x - c.tau * c.tau - c.tau * c.beta,
        r2_212: 2.0 * c.sigma_x - c.tau_y + c.alpha_x - c.sigma * c.tau,
    }
}

/// Metric `E dx² + 2F dx dy + G dy²`.
#[derive(Clone, Debug, PartialEq)]
pub struct Metric {
    pub e: Expr,
    pub f: Expr,
    pub g: Expr,
}

impl Metric {
    pub fn euclidean() -> Self {
        Self {
            e: Expr::Const(1.0),
            f: Expr::Const(0.0),
            g: Expr::Const(1.0),
        }
    }

    /// `(dx² + dy²) / (1 + κ(x² + y²))²`.
    pub fn constant_curvature(kappa: f64) -> Self {
        let conformal = || {
            (Expr::Const(1.0) + Expr::Const(kappa) * (Expr::X.powf(2.0) + Expr::Y.powf(2.0)))
                .powf(-2.0)
        };
        Self {
            e: conformal(),
            f: Expr::Const(0.0),
            g: conformal(),
        }
    }

    /// Metric induced on the graph of `z` from jets of the first partials,
    /// as formulas in `z`'s derivatives are not available symbolically.
    pub fn graph_surface_values(z: &Expr, p: Point) -> Result<[f64; 3], EvalError> {
        let j = z.jet(p, 1)?;
        let zx = j.partial(1, 0).unwrap_or(0.0);
        let zy = j.partial(0, 1).unwrap_or(0.0);
        Ok([1.0 + zx * zx, zx * zy, 1.0 + zy * zy])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GeometryError {
    Eval(EvalError),
    /// `EG - F²` is not positive.
    DegenerateMetric {
        determinant: f64,
    },
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Eval(e) => e.fmt(f),
            Self::DegenerateMetric { determinant } => {
                write!(f, "degenerate metric: EG - F^2 = {determinant}")
            }
        }
    }
}

impl core::error::Error for GeometryError {}

impl From<EvalError> for GeometryError {
    fn from(e: EvalError) -> Self {
        Self::Eval(e)
    }
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Gaussian curvature of a metric by the Brioschi formula.
pub fn gaussian_curvature(metric: &Metric, p: Point) -> Result<f64, GeometryError> {
    let je = metric.e.jet(p, 2)?;
    let jf = metric.f.jet(p, 2)?;
    let jg = metric.g.jet(p, 2)?;
    let d = |j: &crate::Jet, a: usize, b: usize| j.partial(a, b).unwrap_or(0.0);
    let (e, f, g) = (je.value(), jf.value(), jg.value());
    let det = e * g - f * f;
    if det <= 0.0 || !det.is_finite() {
        return Err(GeometryError::DegenerateMetric { determinant: det });
    }
    let (e_u, e_v, e_vv) = (d(&je, 1, 0), d(&je, 0, 1), d(&je, 0, 2));
    let (f_u, f_v, f_uv) = (d(&jf, 1, 0), d(&jf, 0, 1), d(&jf, 1, 1));
    let (g_u, g_v, g_uu) = (d(&jg, 1, 0), d(&jg, 0, 1), d(&jg, 2, 0));
    let a = [
        [-0.5 * e_vv + f_uv - 0.5 * g_uu, 0.5 * e_u, f_u - 0.5 * e_v],
        [f_v - 0.5 * g_u, e, f],
        [0.5 * g_v, f, g],
    ];
    let b = [
        [0.0, 0.5 * e_v, 0.5 * g_u],
        [0.5 * e_v, e, f],
        [0.5 * g_u, f, g],
    ];
    Ok((det3(a) - det3(b)) / (det * det))
}
