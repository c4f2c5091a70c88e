//! Level-curve tracing, SVG drawing and CSV residual grids.

use std::fmt::Write as _;

use thiserror::Error;
use webgeo_core::expr::{EvalError, Expr};
use webgeo_core::geodesy::ResidualSample;
use webgeo_core::{Point, Rect};

use crate::report::float_text;

#[derive(Debug, Error, PartialEq)]
pub enum RenderError {
    #[error("gradient vanishes at the seed {0}")]
    DegenerateSeed(Point),
    #[error("seed {0} lies outside the domain")]
    SeedOutside(Point),
    #[error("step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("cannot evaluate at the seed: {0}")]
    Eval(#[from] EvalError),
    #[error("nothing to draw")]
    Empty,
    #[error("domain rectangle is empty or not finite")]
    InvalidDomain,
}

/// A traced leaf, ordered along the curve.
#[derive(Clone, Debug, PartialEq)]
pub struct LeafPolyline {
    pub foliation_index: usize,
    pub level: f64,
    pub points: Vec<Point>,
    /// The trace came back to its seed; the last point repeats the first.
    pub closed: bool,
    /// Distance from the seed to the last traced segment of a closed trace.
    pub closure_gap: Option<f64>,
}

impl LeafPolyline {
    pub fn segment(foliation_index: usize, level: f64, a: Point, b: Point) -> Self {
        Self {
            foliation_index,
            level,
            points: vec![a, b],
            closed: false,
            closure_gap: None,
        }
    }
}

/// Relative gradient size below which tracing stops.
const DEGENERATE_GRADIENT: f64 = 1e-10;

struct Tracer<'a> {
    f: &'a Expr,
    level: f64,
    domain: Rect,
    step: f64,
}

impl Tracer<'_> {
    /// Unit tangent `(f_y, -f_x) / |∇f|` times `sign`.
    fn tangent(&self, p: Point, sign: f64) -> Option<(f64, f64)> {
        let j = self.f.jet(p, 1).ok()?;
        let fx = j.partial(1, 0).ok()?;
        let fy = j.partial(0, 1).ok()?;
        let n = fx.hypot(fy);
        if !(n > DEGENERATE_GRADIENT * (1.0 + p.x.abs() + p.y.abs())) {
            return None;
        }
        Some((sign * fy / n, -sign * fx / n))
    }

    /// Newton step back onto the level set along the gradient.
    fn project(&self, p: Point) -> Option<Point> {
        let j = self.f.jet(p, 1).ok()?;
        let fx = j.partial(1, 0).ok()?;
        let fy = j.partial(0, 1).ok()?;
        let g2 = fx * fx + fy * fy;
        if g2 == 0.0 {
            return None;
        }
        let k = (j.value() - self.level) / g2;
        Some(Point::new(p.x - k * fx, p.y - k * fy))
    }

    fn rk4(&self, p: Point, sign: f64) -> Option<Point> {
        let h = self.step;
        let at = |q: Point, k: (f64, f64), s: f64| Point::new(q.x + s * k.0, q.y + s * k.1);
        let k1 = self.tangent(p, sign)?;
        let k2 = self.tangent(at(p, k1, 0.5 * h), sign)?;
        let k3 = self.tangent(at(p, k2, 0.5 * h), sign)?;
        let k4 = self.tangent(at(p, k3, h), sign)?;
        let q = Point::new(
            p.x + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
            p.y + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        );
        self.project(q)
    }

    /// Follows the curve from `seed` until it leaves the domain, closes up or
    /// `budget` points were added. Returns the points after the seed and the
    /// closure gap if the curve closed.
    fn run(&self, seed: Point, sign: f64, budget: usize) -> (Vec<Point>, Option<f64>) {
        let mut out = Vec::new();
        let mut p = seed;
        let mut far = false;
        while out.len() < budget {
            let Some(q) = self.rk4(p, sign) else { break };
            if !self.domain.contains(q) {
                if let Some((_, end)) = self.domain.clip_segment(p, q) {
                    if end != p {
                        out.push(end);
                    }
                }
                break;
            }
            if q.distance(&seed) > 4.0 * self.step {
                far = true;
            } else if far {
                if let Some(gap) = passes_by(seed, p, q) {
                    out.push(seed);
                    return (out, Some(gap));
                }
            }
            out.push(q);
            p = q;
        }
        (out, None)
    }
}

/// Distance from `s` to the segment `p -> q` if its foot lies on the segment.
fn passes_by(s: Point, p: Point, q: Point) -> Option<f64> {
    let (dx, dy) = (q.x - p.x, q.y - p.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return None;
    }
    let t = ((s.x - p.x) * dx + (s.y - p.y) * dy) / len2;
    (0.0..=1.0)
        .contains(&t)
        .then(|| ((s.x - p.x) * dy - (s.y - p.y) * dx).abs() / len2.sqrt())
}

/// Traces the level curve of `f` through `seed` inside `domain` with
/// classical Runge–Kutta steps of length `step` along the unit tangent, in
/// both directions. Each step is followed by one Newton correction back onto
/// the level.
pub fn trace_level_curve(
    f: &Expr,
    seed: Point,
    domain: Rect,
    step: f64,
    max_points: usize,
) -> Result<LeafPolyline, RenderError> {
    if !(step > 0.0) {
        return Err(RenderError::NonPositiveStep(step));
    }
    if !domain.is_valid() {
        return Err(RenderError::InvalidDomain);
    }
    if !domain.contains(seed) {
        return Err(RenderError::SeedOutside(seed));
    }
    let level = f.eval(seed)?;
    let tracer = Tracer {
        f,
        level,
        domain,
        step,
    };
    if tracer.tangent(seed, 1.0).is_none() {
        return Err(RenderError::DegenerateSeed(seed));
    }
    let budget = max_points.saturating_sub(1);
    let (forward, gap) = tracer.run(seed, 1.0, budget);
    let mut points = Vec::with_capacity(budget + 1);
    if gap.is_none() {
        let (mut backward, _) = tracer.run(seed, -1.0, budget.saturating_sub(forward.len()));
        backward.reverse();
        points.extend(backward);
    }
    points.push(seed);
    points.extend(forward);
    Ok(LeafPolyline {
        foliation_index: 0,
        level,
        points,
        closed: gap.is_some(),
        closure_gap: gap,
    })
}

/// Resolution of the sampling used to pick levels and seeds.
const SEED_LINES: usize = 64;
const SEED_SAMPLES: usize = 256;

/// `count` levels evenly spread over the range of `f` on the domain, each
/// with a seed on the first transversal line that crosses it. Horizontal
/// lines are tried from the middle outward, then vertical ones.
pub fn level_seeds(f: &Expr, domain: Rect, count: usize) -> Vec<(f64, Point)> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for j in 0..=SEED_LINES {
        for i in 0..=SEED_LINES {
            let p = Point::new(
                lerp(domain.xmin, domain.xmax, i, SEED_LINES),
                lerp(domain.ymin, domain.ymax, j, SEED_LINES),
            );
            if let Ok(v) = f.eval(p) {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    if !(lo < hi) {
        return Vec::new();
    }
    (0..count)
        .filter_map(|k| {
            let level = lo + (hi - lo) * (k as f64 + 0.5) / count as f64;
            find_seed(f, &domain, level).map(|p| (level, p))
        })
        .collect()
}

fn lerp(a: f64, b: f64, i: usize, n: usize) -> f64 {
    a + (b - a) * i as f64 / n as f64
}

fn middle_out(n: usize) -> impl Iterator<Item = usize> {
    let mid = n / 2;
    (0..=n)
        .map(move |k| {
            if k % 2 == 0 {
                mid + k / 2
            } else {
                mid - k.div_ceil(2)
            }
        })
        .filter(move |&i| i <= n)
}

fn find_seed(f: &Expr, domain: &Rect, level: f64) -> Option<Point> {
    let rows = middle_out(SEED_LINES).map(|j| {
        let y = lerp(domain.ymin, domain.ymax, j, SEED_LINES);
        (Point::new(domain.xmin, y), Point::new(domain.xmax, y))
    });
    let cols = middle_out(SEED_LINES).map(|i| {
        let x = lerp(domain.xmin, domain.xmax, i, SEED_LINES);
        (Point::new(x, domain.ymin), Point::new(x, domain.ymax))
    });
    rows.chain(cols).find_map(|(a, b)| crossing(f, level, a, b))
}

/// First point of the segment `a -> b` where `f` crosses `level`.
fn crossing(f: &Expr, level: f64, a: Point, b: Point) -> Option<Point> {
    let at = |t: f64| Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
    let g = |t: f64| f.eval(at(t)).ok().map(|v| v - level);
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..=SEED_SAMPLES {
        let t = i as f64 / SEED_SAMPLES as f64;
        let Some(v) = g(t) else {
            prev = None;
            continue;
        };
        if v == 0.0 {
            return Some(at(t));
        }
        if let Some((t0, v0)) = prev {
            if (v0 < 0.0) != (v < 0.0) {
                let (mut l, mut r, mut vl) = (t0, t, v0);
                for _ in 0..80 {
                    let m = 0.5 * (l + r);
                    let vm = g(m)?;
                    if (vm < 0.0) == (vl < 0.0) {
                        l = m;
                        vl = vm;
                    } else {
                        r = m;
                    }
                }
                return Some(at(0.5 * (l + r)));
            }
        }
        prev = Some((t, v));
    }
    None
}

/// Per-foliation stroke colors and widths; indices wrap around.
#[derive(Clone, Debug, PartialEq)]
pub struct SvgStyle {
    pub width: f64,
    pub colors: Vec<String>,
    pub stroke_widths: Vec<f64>,
}

impl Default for SvgStyle {
    fn default() -> Self {
        Self {
            width: 800.0,
            colors: [
                "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
            ]
            .map(String::from)
            .to_vec(),
            stroke_widths: vec![1.5],
        }
    }
}

impl SvgStyle {
    fn color(&self, i: usize) -> &str {
        self.colors
            .get(i % self.colors.len().max(1))
            .map_or("#000000", String::as_str)
    }

    fn stroke_width(&self, i: usize) -> f64 {
        self.stroke_widths
            .get(i % self.stroke_widths.len().max(1))
            .copied()
            .unwrap_or(1.0)
    }
}

/// Affine map from the domain to SVG user units, `y` pointing up.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Viewport {
    pub domain: Rect,
    pub width: f64,
    pub height: f64,
}

impl Viewport {
    pub fn new(domain: Rect, width: f64) -> Self {
        Self {
            domain,
            width,
            height: width * domain.height() / domain.width(),
        }
    }

    pub fn to_svg(&self, p: Point) -> (f64, f64) {
        (
            (p.x - self.domain.xmin) / self.domain.width() * self.width,
            (self.domain.ymax - p.y) / self.domain.height() * self.height,
        )
    }

    pub fn from_svg(&self, u: f64, v: f64) -> Point {
        Point::new(
            self.domain.xmin + u / self.width * self.domain.width(),
            self.domain.ymax - v / self.height * self.domain.height(),
        )
    }
}

/// Standalone SVG 1.1 document with one `path` per leaf.
pub fn render_svg(
    leaves: &[LeafPolyline],
    domain: Rect,
    style: &SvgStyle,
) -> Result<String, RenderError> {
    if leaves.is_empty() {
        return Err(RenderError::Empty);
    }
    if !domain.is_valid() {
        return Err(RenderError::InvalidDomain);
    }
    let vp = Viewport::new(domain, style.width);
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">",
        w = vp.width,
        h = vp.height
    );
    let _ = writeln!(
        out,
        "<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"white\"/>",
        vp.width, vp.height
    );
    for leaf in leaves {
        let mut d = String::new();
        for (k, p) in leaf.points.iter().enumerate() {
            let (u, v) = vp.to_svg(*p);
            let _ = write!(d, "{}{} {}", if k == 0 { "M" } else { " L" }, u, v);
        }
        if leaf.closed {
            d.push_str(" Z");
        }
        let _ = writeln!(
            out,
            "<path data-foliation=\"{}\" data-level=\"{}\" d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"/>",
            leaf.foliation_index,
            float_text(leaf.level),
            d,
            style.color(leaf.foliation_index),
            style.stroke_width(leaf.foliation_index)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Residual grid as CSV with header `x,y,raw,normalized,degenerate`.
pub fn residual_csv(samples: &[ResidualSample]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let _ = w.write_record(["x", "y", "raw", "normalized", "degenerate"]);
    for s in samples {
        let _ = w.write_record([
            float_text(s.point.x),
            float_text(s.point.y),
            float_text(s.raw),
            float_text(s.normalized),
            s.degenerate.to_string(),
        ]);
    }
    let bytes = w.into_inner().unwrap_or_default();
    String::from_utf8(bytes).unwrap_or_default()
}
