//! Numerical analysis of planar webs.
//!
//! A planar web is a family of foliations given by level sets of functions
//! `f_1, ..., f_d`. This crate decides whether such a web is geodesic for an
//! affine connection, fits the projective structure carried by a 4-web, tests
//! that structure for symmetry, and builds linear webs from Cauchy data of the
//! Euler equation.
//!
//! All derivatives come from truncated bivariate Taylor jets ([`taylor`]),
//! evaluated over user formulas parsed by [`expr`].
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]
#![forbid(unsafe_code)]
// Negated float comparisons reject NaN; index loops mirror the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod eulerweb;
pub mod expr;
pub mod geodesy;
pub mod geometry;
mod linalg;
pub mod projective;
pub mod taylor;

pub use expr::{parse, parse_list, EvalError, Expr, Func, ParseError};
pub use geometry::{ChristoffelField, Christoffels, CurvatureMatrix, ThomasParameters};
pub use taylor::{Axis, Jet, JetError};

/// A point of the plane.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Self { x, y }
    }
}

impl core::fmt::Display for Point {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Axis-aligned rectangle `[xmin, xmax] x [ymin, ymax]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Rect {
    pub const fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Self {
        Self {
            xmin,
            xmax,
            ymin,
            ymax,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.xmin.is_finite()
            && self.xmax.is_finite()
            && self.ymin.is_finite()
            && self.ymax.is_finite()
            && self.xmin < self.xmax
            && self.ymin < self.ymax
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    /// Clips the segment `a -> b` to the rectangle (Liang-Barsky).
    pub fn clip_segment(&self, a: Point, b: Point) -> Option<(Point, Point)> {
        let dx = b.x - a.x;
        let dy = b.y - a.y;
        let mut t0 = 0.0_f64;
        let mut t1 = 1.0_f64;
        let edges = [
            (-dx, a.x - self.xmin),
            (dx, self.xmax - a.x),
            (-dy, a.y - self.ymin),
            (dy, self.ymax - a.y),
        ];
        for (p, q) in edges {
            if p == 0.0 {
                if q < 0.0 {
                    return None;
                }
            } else {
                let r = q / p;
                if p < 0.0 {
                    t0 = t0.max(r);
                } else {
                    t1 = t1.min(r);
                }
                if t0 > t1 {
                    return None;
                }
            }
        }
        let at = |t: f64| Point::new(a.x + t * dx, a.y + t * dy);
        Some((at(t0), at(t1)))
    }
}

/// Rectangular lattice of `nx * ny` points, both ends included on each axis.
///
/// Points are enumerated row by row: `y` outer, `x` inner.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub const fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64, nx: usize, ny: usize) -> Self {
        Self {
            xmin,
            xmax,
            ymin,
            ymax,
            nx,
            ny,
        }
    }

    /// A one-point grid.
    pub const fn single(p: Point) -> Self {
        Self::new(p.x, p.x, p.y, p.y, 1, 1)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        let axis = |lo: f64, hi: f64, n: usize, k: usize| {
            if n <= 1 {
                lo
            } else {
                lo + (hi - lo) * (k as f64) / ((n - 1) as f64)
            }
        };
        (0..self.ny).flat_map(move |j| {
            (0..self.nx).map(move |i| {
                Point::new(
                    axis(self.xmin, self.xmax, self.nx, i),
                    axis(self.ymin, self.ymax, self.ny, j),
                )
            })
        })
    }
}
