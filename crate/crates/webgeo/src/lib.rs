//! Command-line front end and file formats for planar web analysis.
//!
//! The numerical work lives in `webgeo-core`; this crate adds level-curve
//! tracing and SVG output ([`render`]), JSON reports ([`report`]) and the
//! `webgeo` command line ([`cli`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod render;
pub mod report;

pub use cli::run;
