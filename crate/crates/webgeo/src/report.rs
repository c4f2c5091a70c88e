//! JSON reports.
//!
//! Every report has the top-level keys `command`, `inputs`, `grid`,
//! `results`, `warnings` and `notes`. Keys are sorted, floats use the
//! shortest representation that round-trips, and non-finite values are
//! written as the strings `"nan"`, `"inf"` and `"-inf"`.

use serde_json::{json, Map, Value};
use webgeo_core::geodesy::{FoliationSummary, ResidualSample, WebReport};
use webgeo_core::{Grid, Point, Rect, ThomasParameters};

/// Text form of a float shared by JSON strings, CSV cells and SVG attributes.
pub fn float_text(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        // Display of f64 is the shortest decimal that round-trips; adding
        // zero folds -0.0 into 0.0.
        format!("{}", v + 0.0)
    }
}

pub fn num(v: f64) -> Value {
    if v.is_finite() {
        Value::from(v + 0.0)
    } else {
        Value::from(float_text(v))
    }
}

pub fn point(p: Point) -> Value {
    json!([num(p.x), num(p.y)])
}

pub fn grid(g: &Grid) -> Value {
    json!({
        "xmin": num(g.xmin),
        "xmax": num(g.xmax),
        "ymin": num(g.ymin),
        "ymax": num(g.ymax),
        "nx": g.nx,
        "ny": g.ny,
    })
}

pub fn rect(r: &Rect) -> Value {
    json!({
        "xmin": num(r.xmin),
        "xmax": num(r.xmax),
        "ymin": num(r.ymin),
        "ymax": num(r.ymax),
    })
}

pub fn thomas(pi: &ThomasParameters) -> Value {
    json!({
        "p1_22": num(pi.p1_22),
        "p1_12": num(pi.p1_12),
        "p2_12": num(pi.p2_12),
        "p2_11": num(pi.p2_11),
    })
}

pub fn sample(s: &ResidualSample) -> Value {
    json!({
        "x": num(s.point.x),
        "y": num(s.point.y),
        "raw": num(s.raw),
        "normalized": num(s.normalized),
        "degenerate": s.degenerate,
    })
}

pub fn foliation_summary(s: &FoliationSummary) -> Value {
    json!({
        "max_normalized": num(s.max_normalized),
        "mean_normalized": num(s.mean_normalized),
        "evaluated": s.evaluated,
        "degenerate_points": s.degenerate_points.iter().copied().map(point).collect::<Vec<_>>(),
        "skipped": s.skipped.iter().map(|k| json!({
            "x": num(k.point.x),
            "y": num(k.point.y),
            "reason": k.reason,
        })).collect::<Vec<_>>(),
    })
}

pub fn web_report(r: &WebReport) -> Value {
    let max = r
        .per_foliation
        .iter()
        .map(|s| s.max_normalized)
        .fold(0.0, f64::max);
    json!({
        "tolerance": num(r.tolerance),
        "per_foliation": r.per_foliation.iter().map(foliation_summary).collect::<Vec<_>>(),
        "max_normalized_residual": num(max),
        "verdict": r.verdict.as_str(),
    })
}

/// An analysis record ready for serialization.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub command: String,
    pub inputs: Map<String, Value>,
    pub grid: Value,
    pub results: Value,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.into(),
            inputs: Map::new(),
            grid: Value::Null,
            results: Value::Null,
            warnings: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn input(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.inputs.insert(key.into(), value.into());
        self
    }

    pub fn to_value(&self) -> Value {
        json!({
            "command": self.command,
            "inputs": self.inputs,
            "grid": self.grid,
            "results": self.results,
            "warnings": self.warnings,
            "notes": self.notes,
        })
    }
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_report(report: &Report) -> String {
    let mut text = serde_json::to_string_pretty(&report.to_value()).unwrap_or_default();
    text.push('\n');
    text
}
