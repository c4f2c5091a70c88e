//! The `webgeo` command line.
//!
//! Exit codes: 0 when the verdict is the expected one (by default the
//! favourable one), 1 when it is not or the analysis fails, 2 on usage and
//! parse errors. Every expression is parsed before any numeric work.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use webgeo_core::eulerweb::{
    connection_euler_residual, euler_residual, generate_linear_web, CauchyDatum,
};
use webgeo_core::geodesy::{
    geodesic_web_report, projective_flex_residual, FoliationSummary, ResidualSample, SecondOrder,
    SkippedPoint, Structure, ThomasSource, Verdict, DEFAULT_TOLERANCE,
};
use webgeo_core::projective::{
    alpha_beta, curvature_along, dweb_geodesic_residuals, fit_by_linear_solve,
    fit_projective_structure, integrate_symmetric_connection, symmetric_conditions_residual,
    FiniteTypeState, WebPresentation,
};
use webgeo_core::{parse, parse_list, ChristoffelField, Expr, Grid, Point, Rect, ThomasParameters};

use crate::render::{self, LeafPolyline, SvgStyle};
use crate::report::{self, float_text, num, write_report, Report};

#[derive(Parser, Debug)]
#[command(name = "webgeo", version, about = "Geodesic analysis of planar webs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Flatness of foliations: Flex f = 0.
    Flex {
        #[command(flatten)]
        functions: Functions,
        #[command(flatten)]
        sampling: Sampling,
        #[command(flatten)]
        common: Common,
    },
    /// Geodesicity of foliations for a connection.
    Geodesic {
        #[command(flatten)]
        functions: Functions,
        /// flat | constcurv:K | graph:Z | thomas:P1_22,P1_12,P2_12,P2_11 |
        /// custom:G1_11;G1_12;G1_22;G2_11;G2_12;G2_22
        #[arg(long, allow_hyphen_values = true)]
        christoffel: String,
        #[command(flatten)]
        sampling: Sampling,
        #[command(flatten)]
        common: Common,
    },
    /// Thomas parameters of the projective structure of a 4-web.
    Fit {
        /// Web functions separated by ";".
        #[arg(long, allow_hyphen_values = true)]
        web: String,
        #[command(flatten)]
        sampling: Sampling,
        #[command(flatten)]
        common: Common,
    },
    /// Geodesicity of f5..fd for the structure of f1..f4.
    Dweb {
        /// Web functions separated by ";".
        #[arg(long, allow_hyphen_values = true)]
        web: String,
        /// Foliation written to CSV output, counted from 5.
        #[arg(long, default_value_t = 5)]
        foliation: usize,
        #[command(flatten)]
        sampling: Sampling,
        #[command(flatten)]
        common: Common,
    },
    /// Symmetry conditions for the web {x, y, f3, f4}.
    Symcheck {
        #[arg(long, allow_hyphen_values = true)]
        f3: String,
        #[arg(long, allow_hyphen_values = true)]
        f4: String,
        #[command(flatten)]
        sampling: Sampling,
        #[command(flatten)]
        common: Common,
    },
    /// Transport of a symmetric connection along a polyline.
    Symintegrate {
        #[arg(long, allow_hyphen_values = true)]
        f3: String,
        #[arg(long, allow_hyphen_values = true)]
        f4: String,
        /// Points "x,y; x,y; ...".
        #[arg(long, allow_hyphen_values = true)]
        path: String,
        /// sigma,tau,sigma_x,sigma_y,tau_x,tau_y
        #[arg(long, allow_hyphen_values = true)]
        initial: String,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        /// Replace sigma_x so that the initial state satisfies the trace constraint.
        #[arg(long)]
        solve_constraint: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Euler equation residuals of w.
    Euler {
        #[arg(long, allow_hyphen_values = true)]
        w: String,
        /// Thomas parameters P1_22,P1_12,P2_12,P2_11; selects the connection form.
        #[arg(long, allow_hyphen_values = true)]
        pi: Option<String>,
        #[command(flatten)]
        sampling: Sampling,
        #[command(flatten)]
        common: Common,
    },
    /// Linear web from Cauchy data on x = 0.
    Lingen {
        /// Data "w0; w0; ..." written in y.
        #[arg(long, allow_hyphen_values = true)]
        data: String,
        /// "lo:hi" for all data, or one interval per datum separated by ";".
        #[arg(long, allow_hyphen_values = true, default_value = "-10:10")]
        interval: String,
        /// "xmin:xmax:ymin:ymax".
        #[arg(long, allow_hyphen_values = true)]
        domain: String,
        /// Leaves per foliation.
        #[arg(long, default_value_t = 8)]
        leaves: usize,
        /// Also write the SVG drawing here.
        #[arg(long)]
        svg: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Draw a web by tracing level curves.
    Render {
        #[command(flatten)]
        functions: Functions,
        /// "xmin:xmax:ymin:ymax".
        #[arg(long, allow_hyphen_values = true)]
        domain: String,
        /// Level curves per foliation.
        #[arg(long, default_value_t = 8)]
        leaves: usize,
        /// Arc length of one tracing step.
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        /// Points per leaf before tracing gives up.
        #[arg(long, default_value_t = 100_000)]
        max_points: usize,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug)]
struct Functions {
    /// A web function; may be repeated.
    #[arg(long = "f", allow_hyphen_values = true)]
    f: Vec<String>,
    /// Web functions separated by ";".
    #[arg(long, allow_hyphen_values = true)]
    web: Option<String>,
    /// Foliation written to CSV output, counted from 1.
    #[arg(long, default_value_t = 1)]
    foliation: usize,
}

#[derive(Args, Debug)]
struct Sampling {
    /// "xmin:xmax:ymin:ymax:nx:ny".
    #[arg(long, allow_hyphen_values = true, conflicts_with = "point")]
    grid: Option<String>,
    /// "x,y".
    #[arg(long, allow_hyphen_values = true)]
    point: Option<String>,
}

#[derive(Args, Debug)]
struct Common {
    /// Output file; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    tol: Option<f64>,
    /// Verdict that makes the command succeed.
    #[arg(long)]
    expect: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Svg,
}

enum Failure {
    /// Exit code 2.
    Usage(String),
    /// Exit code 1.
    Analysis(String),
}

type Outcome<T> = Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> Outcome<T> {
    Err(Failure::Usage(msg.into()))
}

fn analysis(e: impl std::fmt::Display) -> Failure {
    Failure::Analysis(e.to_string())
}

/// What a command produced.
struct Output {
    report: Report,
    csv: Option<String>,
    svg: Option<String>,
    verdict: &'static str,
}

struct Spec {
    verdicts: [&'static str; 2],
    formats: &'static [Format],
    default_format: Format,
}

const TABLE: Spec = Spec {
    verdicts: ["geodesic", "non-geodesic"],
    formats: &[Format::Json, Format::Csv],
    default_format: Format::Json,
};

fn spec(c: &Command) -> Spec {
    match c {
        Command::Flex { .. } | Command::Geodesic { .. } | Command::Dweb { .. } => TABLE,
        Command::Symcheck { .. } => Spec {
            verdicts: ["symmetric", "non-symmetric"],
            formats: &[Format::Json],
            default_format: Format::Json,
        },
        Command::Euler { .. } => Spec {
            verdicts: ["pass", "fail"],
            formats: &[Format::Json, Format::Csv],
            default_format: Format::Json,
        },
        Command::Fit { .. } | Command::Symintegrate { .. } => Spec {
            verdicts: ["pass", "fail"],
            formats: &[Format::Json],
            default_format: Format::Json,
        },
        Command::Lingen { .. } => Spec {
            verdicts: ["pass", "fail"],
            formats: &[Format::Json, Format::Svg],
            default_format: Format::Json,
        },
        Command::Render { .. } => Spec {
            verdicts: ["pass", "fail"],
            formats: &[Format::Json, Format::Svg],
            default_format: Format::Svg,
        },
    }
}

fn common(c: &Command) -> &Common {
    match c {
        Command::Flex { common, .. }
        | Command::Geodesic { common, .. }
        | Command::Fit { common, .. }
        | Command::Dweb { common, .. }
        | Command::Symcheck { common, .. }
        | Command::Symintegrate { common, .. }
        | Command::Euler { common, .. }
        | Command::Lingen { common, .. }
        | Command::Render { common, .. } => common,
    }
}

/// Runs the command line `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("webgeo: {msg}");
            2
        }
        Err(Failure::Analysis(msg)) => {
            eprintln!("webgeo: {msg}");
            1
        }
    }
}

fn execute(command: &Command) -> Outcome<i32> {
    let spec = spec(command);
    let common = common(command);
    let format = common.format.unwrap_or(spec.default_format);
    if !spec.formats.contains(&format) {
        return usage(
            format!("format {format:?} is not available for this command").to_lowercase(),
        );
    }
    if let Some(e) = &common.expect {
        if !spec.verdicts.contains(&e.as_str()) {
            return usage(format!(
                "--expect must be one of {} or {}, got {e}",
                spec.verdicts[0], spec.verdicts[1]
            ));
        }
    }
    let tol = common.tol.unwrap_or(DEFAULT_TOLERANCE);
    if !(tol >= 0.0) {
        return usage(format!("--tol must be non-negative, got {tol}"));
    }
    let out = match command {
        Command::Flex {
            functions,
            sampling,
            ..
        } => cmd_web("flex", functions, None, sampling, tol)?,
        Command::Geodesic {
            functions,
            christoffel,
            sampling,
            ..
        } => cmd_web("geodesic", functions, Some(christoffel), sampling, tol)?,
        Command::Fit { web, sampling, .. } => cmd_fit(web, sampling, tol)?,
        Command::Dweb {
            web,
            foliation,
            sampling,
            ..
        } => cmd_dweb(web, *foliation, sampling, tol)?,
        Command::Symcheck {
            f3, f4, sampling, ..
        } => cmd_symcheck(f3, f4, sampling, tol)?,
        Command::Symintegrate {
            f3,
            f4,
            path,
            initial,
            step,
            solve_constraint,
            ..
        } => cmd_symintegrate(f3, f4, path, initial, *step, *solve_constraint, tol)?,
        Command::Euler {
            w, pi, sampling, ..
        } => cmd_euler(w, pi.as_deref(), sampling, tol)?,
        Command::Lingen {
            data,
            interval,
            domain,
            leaves,
            svg,
            ..
        } => cmd_lingen(data, interval, domain, *leaves, svg.as_ref())?,
        Command::Render {
            functions,
            domain,
            leaves,
            step,
            max_points,
            ..
        } => cmd_render(functions, domain, *leaves, *step, *max_points)?,
    };
    let mut report = out.report;
    report.input("tol", num(tol));
    let text = match format {
        Format::Json => write_report(&report),
        Format::Csv => out
            .csv
            .ok_or_else(|| Failure::Usage("no CSV output for this command".into()))?,
        Format::Svg => out
            .svg
            .ok_or_else(|| Failure::Analysis("nothing to draw".into()))?,
    };
    emit(common.out.as_ref(), &text)?;
    let wanted = common.expect.as_deref().unwrap_or(spec.verdicts[0]);
    Ok(if out.verdict == wanted { 0 } else { 1 })
}

fn emit(path: Option<&PathBuf>, text: &str) -> Outcome<()> {
    match path {
        Some(p) => fs::write(p, text)
            .map_err(|e| Failure::Analysis(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure::Analysis(format!("cannot write output: {e}")))
        }
    }
}

fn parse_one(flag: &str, text: &str) -> Outcome<Expr> {
    parse(text).map_err(|e| Failure::Usage(format!("{flag}: {e}")))
}

fn parse_many(flag: &str, text: &str) -> Outcome<Vec<Expr>> {
    parse_list(text).map_err(|e| Failure::Usage(format!("{flag}: {e}")))
}

fn reals(flag: &str, text: &str, sep: char, count: usize) -> Outcome<Vec<f64>> {
    let parts: Vec<&str> = text.split(sep).map(str::trim).collect();
    if parts.len() != count {
        return usage(format!(
            "{flag}: expected {count} numbers separated by '{sep}', got \"{text}\""
        ));
    }
    parts
        .iter()
        .map(|p| match p.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => usage(format!("{flag}: \"{p}\" is not a finite number")),
        })
        .collect()
}

pub(crate) fn parse_point(flag: &str, text: &str) -> Result<Point, String> {
    match reals(flag, text, ',', 2) {
        Ok(v) => Ok(Point::new(v[0], v[1])),
        Err(Failure::Usage(m) | Failure::Analysis(m)) => Err(m),
    }
}

fn point_arg(flag: &str, text: &str) -> Outcome<Point> {
    parse_point(flag, text).map_err(Failure::Usage)
}

fn rect_arg(flag: &str, text: &str) -> Outcome<Rect> {
    let v = reals(flag, text, ':', 4)?;
    let r = Rect::new(v[0], v[1], v[2], v[3]);
    if !r.is_valid() {
        return usage(format!("{flag}: need xmin < xmax and ymin < ymax"));
    }
    Ok(r)
}

pub(crate) fn parse_grid(text: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    if parts.len() != 6 {
        return Err(format!(
            "--grid: expected xmin:xmax:ymin:ymax:nx:ny, got \"{text}\""
        ));
    }
    let mut b = [0.0; 4];
    for (slot, p) in b.iter_mut().zip(&parts[..4]) {
        *slot = match p.parse::<f64>() {
            Ok(v) if v.is_finite() => v,
            _ => return Err(format!("--grid: \"{p}\" is not a finite number")),
        };
    }
    let count = |p: &str| match p.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(format!("--grid: \"{p}\" is not a positive count")),
    };
    let (nx, ny) = (count(parts[4])?, count(parts[5])?);
    if b[0] > b[1] || b[2] > b[3] {
        return Err("--grid: need xmin <= xmax and ymin <= ymax".into());
    }
    Ok(Grid::new(b[0], b[1], b[2], b[3], nx, ny))
}

/// Grid or single point, with its verbatim spec.
fn sampling_arg(s: &Sampling) -> Outcome<(Grid, String)> {
    match (&s.grid, &s.point) {
        (Some(g), None) => Ok((parse_grid(g).map_err(Failure::Usage)?, g.clone())),
        (None, Some(p)) => Ok((Grid::single(point_arg("--point", p)?), p.clone())),
        _ => usage("give exactly one of --grid or --point"),
    }
}

fn sampling_input(report: &mut Report, s: &Sampling, grid: &Grid) {
    match (&s.grid, &s.point) {
        (Some(g), _) => report.input("grid", g.as_str()),
        (_, Some(p)) => report.input("point", p.as_str()),
        _ => report,
    };
    report.grid = report::grid(grid);
}

fn function_list(f: &Functions) -> Outcome<(Vec<Expr>, Vec<String>)> {
    let mut exprs = Vec::new();
    let mut texts = Vec::new();
    for t in &f.f {
        exprs.push(parse_one("--f", t)?);
        texts.push(t.trim().to_string());
    }
    if let Some(w) = &f.web {
        exprs.extend(parse_many("--web", w)?);
        texts.extend(verbatim(w));
    }
    if exprs.is_empty() {
        return usage("give at least one function with --f or --web");
    }
    Ok((exprs, texts))
}

fn structure_arg(text: &str) -> Outcome<Structure> {
    let (kind, rest) = text.split_once(':').unwrap_or((text, ""));
    match kind.trim() {
        "flat" => Ok(Structure::Connection(ChristoffelField::flat())),
        "constcurv" => {
            let k = reals("--christoffel constcurv", rest, ',', 1)?[0];
            Ok(Structure::ConstantCurvature(k))
        }
        "graph" => Ok(Structure::GraphSurface(parse_one(
            "--christoffel graph",
            rest,
        )?)),
        "thomas" => {
            let v = reals("--christoffel thomas", rest, ',', 4)?;
            Ok(Structure::Projective(ThomasSource::Constant(
                ThomasParameters::from_array([v[0], v[1], v[2], v[3]]),
            )))
        }
        "custom" => custom_field(rest),
        _ => custom_field(text),
    }
}

fn custom_field(text: &str) -> Outcome<Structure> {
    let c = parse_many("--christoffel", text)?;
    let Ok(components) = <[Expr; 6]>::try_from(c) else {
        return usage(
            "--christoffel: expected flat, constcurv:K, graph:Z, thomas:... or six expressions",
        );
    };
    Ok(Structure::Connection(ChristoffelField::explicit(
        components,
    )))
}

fn csv_for(summaries: &[FoliationSummary], index: usize, first: usize) -> Option<String> {
    index
        .checked_sub(first)
        .and_then(|i| summaries.get(i))
        .map(|s| render::residual_csv(&s.samples))
}

fn cmd_web(
    command: &str,
    functions: &Functions,
    christoffel: Option<&String>,
    sampling: &Sampling,
    tol: f64,
) -> Outcome<Output> {
    let (web, texts) = function_list(functions)?;
    let structure = match christoffel {
        Some(c) => structure_arg(c)?,
        None => Structure::Connection(ChristoffelField::flat()),
    };
    let (grid, _) = sampling_arg(sampling)?;
    let mut report = Report::new(command);
    report.input("functions", texts);
    if let Some(c) = christoffel {
        report.input("christoffel", c.as_str());
    }
    sampling_input(&mut report, sampling, &grid);
    let r = geodesic_web_report(&web, &structure, &grid, tol).map_err(analysis)?;
    for (i, s) in r.per_foliation.iter().enumerate() {
        if !s.skipped.is_empty() {
            report.warnings.push(format!(
                "f{}: {} grid points skipped",
                i + 1,
                s.skipped.len()
            ));
        }
        if !s.degenerate_points.is_empty() {
            report.warnings.push(format!(
                "f{}: {} degenerate grid points excluded",
                i + 1,
                s.degenerate_points.len()
            ));
        }
    }
    report.results = report::web_report(&r);
    Ok(Output {
        csv: csv_for(&r.per_foliation, functions.foliation, 1),
        report,
        svg: None,
        verdict: r.verdict.as_str(),
    })
}

fn verbatim(list: &str) -> Vec<String> {
    list.split(';').map(|s| s.trim().to_string()).collect()
}

fn relative_difference(a: &ThomasParameters, b: &ThomasParameters) -> f64 {
    let scale = a
        .as_array()
        .iter()
        .chain(b.as_array().iter())
        .fold(1.0_f64, |m, v| m.max(v.abs()));
    a.as_array()
        .iter()
        .zip(b.as_array())
        .map(|(x, y)| (x - y).abs() / scale)
        .fold(0.0, f64::max)
}

fn web_arg(text: &str) -> Outcome<WebPresentation> {
    WebPresentation::new(parse_many("--web", text)?)
        .map_err(|e| Failure::Usage(format!("--web: {e}")))
}

fn cmd_fit(web_text: &str, sampling: &Sampling, tol: f64) -> Outcome<Output> {
    let web = web_arg(web_text)?;
    if web.len() != 4 {
        return usage(format!("--web: fit needs 4 functions, got {}", web.len()));
    }
    let (grid, _) = sampling_arg(sampling)?;
    let mut report = Report::new("fit");
    report.input("web", verbatim(web_text));
    sampling_input(&mut report, sampling, &grid);
    let mut points = Vec::new();
    let mut errors = Vec::new();
    let mut worst_back: f64 = 0.0;
    let mut worst_oracle: f64 = 0.0;
    let mut last = None;
    for p in grid.points() {
        let pi = match fit_projective_structure(&web, p) {
            Ok(pi) => pi,
            Err(e) => {
                errors.push(format!("{p}: {e}"));
                points.push(json!({ "x": num(p.x), "y": num(p.y), "error": e.to_string() }));
                continue;
            }
        };
        let back = web
            .functions()
            .iter()
            .map(|f| match projective_flex_residual(f, &pi, p) {
                Ok(s) if !s.degenerate => s.normalized.abs(),
                _ => 0.0,
            })
            .fold(0.0, f64::max);
        worst_back = worst_back.max(back);
        match fit_by_linear_solve(&web, p) {
            Ok(q) => worst_oracle = worst_oracle.max(relative_difference(&pi, &q)),
            Err(e) => report.warnings.push(format!("{p}: linear solve: {e}")),
        }
        points.push(json!({
            "x": num(p.x),
            "y": num(p.y),
            "pi": report::thomas(&pi),
            "back_substitution": num(back),
        }));
        last = Some(pi);
    }
    let evaluated = grid.len() - errors.len();
    if evaluated == 0 {
        return Err(Failure::Analysis(errors.join("; ")));
    }
    if !errors.is_empty() {
        report
            .warnings
            .push(format!("{} grid points skipped", errors.len()));
    }
    let verdict = if worst_back <= tol { "pass" } else { "fail" };
    let mut results = json!({
        "evaluated": evaluated,
        "max_back_substitution": num(worst_back),
        "max_linear_solve_difference": num(worst_oracle),
        "verdict": verdict,
    });
    match (grid.len(), last) {
        (1, Some(pi)) => results["pi"] = report::thomas(&pi),
        _ => results["points"] = Value::Array(points),
    }
    report.results = results;
    Ok(Output {
        report,
        csv: None,
        svg: None,
        verdict,
    })
}

/// Describes `f` when its Euler invariant `f_x / f_y` is affine in `y` on
/// the line `x = 0`, which makes its leaves a pencil of lines.
fn linear_datum_note(index: usize, f: &Expr) -> Option<String> {
    let w0 = |y: f64| {
        let d = SecondOrder::of(f, Point::new(0.0, y)).ok()?;
        let flat = d.flex().abs() <= 1e-10 * d.gradient_norm().powi(3);
        (d.fy != 0.0 && flat).then(|| d.fx / d.fy)
    };
    let (w_0, w_1, w_2) = (w0(0.0)?, w0(1.0)?, w0(2.0)?);
    let (a, c) = (w_1 - w_0, w_0);
    if (2.0 * a + c - w_2).abs() > 1e-9 * (1.0 + w_2.abs()) {
        return None;
    }
    let datum = format!("w0(y) = {}*y + {}", float_text(a), float_text(c));
    Some(if a == 0.0 {
        format!("f{index}: Cauchy datum {datum} on x = 0; its leaves are parallel lines")
    } else {
        format!(
            "f{index}: Cauchy datum {datum} on x = 0; its leaves are the pencil through ({}, {})",
            float_text(1.0 / a),
            float_text(-c / a)
        )
    })
}

fn cmd_dweb(web_text: &str, foliation: usize, sampling: &Sampling, tol: f64) -> Outcome<Output> {
    let web = web_arg(web_text)?;
    if web.len() < 5 {
        return usage(format!(
            "--web: dweb needs at least 5 functions, got {}",
            web.len()
        ));
    }
    let (grid, _) = sampling_arg(sampling)?;
    let mut report = Report::new("dweb");
    report.input("web", verbatim(web_text));
    sampling_input(&mut report, sampling, &grid);
    let extra = web.len() - 4;
    let mut samples: Vec<Vec<ResidualSample>> = vec![Vec::new(); extra];
    let mut skipped: Vec<Vec<SkippedPoint>> = vec![Vec::new(); extra];
    for p in grid.points() {
        match dweb_geodesic_residuals(&web, p) {
            Ok(v) => {
                for (k, s) in v.into_iter().enumerate() {
                    samples[k].push(s);
                }
            }
            Err(e) => {
                for s in skipped.iter_mut() {
                    s.push(SkippedPoint {
                        point: p,
                        reason: e.to_string(),
                    });
                }
            }
        }
    }
    let summaries: Vec<FoliationSummary> = samples
        .into_iter()
        .zip(skipped)
        .map(|(s, k)| FoliationSummary::from_samples(s, k))
        .collect();
    if summaries.iter().any(|s| s.evaluated == 0) {
        return Err(Failure::Analysis(
            "no grid point where the leading 4-web is non-degenerate".into(),
        ));
    }
    let skipped_count = summaries[0].skipped.len();
    if skipped_count > 0 {
        report
            .warnings
            .push(format!("{skipped_count} grid points skipped"));
    }
    for (i, f) in web.functions().iter().enumerate() {
        report.notes.extend(linear_datum_note(i + 1, f));
    }
    let geodesic = summaries.iter().all(|s| s.max_normalized <= tol);
    let verdict = if geodesic {
        Verdict::Geodesic
    } else {
        Verdict::NonGeodesic
    };
    let max = summaries
        .iter()
        .map(|s| s.max_normalized)
        .fold(0.0, f64::max);
    let per_foliation: Vec<Value> = summaries
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let mut v = report::foliation_summary(s);
            v["function"] = json!(k + 5);
            v
        })
        .collect();
    report.results = json!({
        "per_foliation": per_foliation,
        "max_normalized_residual": num(max),
        "tolerance": num(tol),
        "verdict": verdict.as_str(),
    });
    Ok(Output {
        csv: csv_for(&summaries, foliation, 5),
        report,
        svg: None,
        verdict: verdict.as_str(),
    })
}

fn abs_stats(values: &[f64]) -> Value {
    let max = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mean = values.iter().map(|v| v.abs()).sum::<f64>() / values.len().max(1) as f64;
    json!({ "max_abs": num(max), "mean_abs": num(mean) })
}

fn cmd_symcheck(f3: &str, f4: &str, sampling: &Sampling, tol: f64) -> Outcome<Output> {
    let (e3, e4) = (parse_one("--f3", f3)?, parse_one("--f4", f4)?);
    let (grid, _) = sampling_arg(sampling)?;
    let mut report = Report::new("symcheck");
    report.input("f3", f3.trim()).input("f4", f4.trim());
    sampling_input(&mut report, sampling, &grid);
    let (mut r1, mut r2) = (Vec::new(), Vec::new());
    let mut skipped = Vec::new();
    for p in grid.points() {
        match symmetric_conditions_residual(&e3, &e4, p) {
            Ok([a, b]) => {
                r1.push(a);
                r2.push(b);
            }
            Err(e) => {
                skipped.push(json!({ "x": num(p.x), "y": num(p.y), "reason": e.to_string() }))
            }
        }
    }
    if r1.is_empty() {
        return Err(Failure::Analysis(
            "symmetry conditions could not be evaluated at any grid point".into(),
        ));
    }
    if !skipped.is_empty() {
        report
            .warnings
            .push(format!("{} grid points skipped", skipped.len()));
    }
    let worst = r1.iter().chain(&r2).map(|v| v.abs()).fold(0.0, f64::max);
    let verdict = if worst <= tol {
        "symmetric"
    } else {
        "non-symmetric"
    };
    let mut results = json!({
        "r1": abs_stats(&r1),
        "r2": abs_stats(&r2),
        "evaluated": r1.len(),
        "skipped": skipped,
        "verdict": verdict,
    });
    if grid.len() == 1 {
        results["residuals"] = json!([num(r1[0]), num(r2[0])]);
    }
    report.results = results;
    Ok(Output {
        report,
        csv: None,
        svg: None,
        verdict,
    })
}

fn state_json(s: &FiniteTypeState) -> Value {
    json!({
        "sigma": num(s.sigma),
        "tau": num(s.tau),
        "sigma_x": num(s.sigma_x),
        "sigma_y": num(s.sigma_y),
        "tau_x": num(s.tau_x),
        "tau_y": num(s.tau_y),
    })
}

fn cmd_symintegrate(
    f3: &str,
    f4: &str,
    path: &str,
    initial: &str,
    step: f64,
    solve_constraint: bool,
    tol: f64,
) -> Outcome<Output> {
    let (e3, e4) = (parse_one("--f3", f3)?, parse_one("--f4", f4)?);
    let points = path
        .split(';')
        .map(|p| point_arg("--path", p))
        .collect::<Outcome<Vec<Point>>>()?;
    let v = reals("--initial", initial, ',', 6)?;
    if !(step > 0.0) {
        return usage(format!("--step must be positive, got {step}"));
    }
    let mut report = Report::new("symintegrate");
    report
        .input("f3", f3.trim())
        .input("f4", f4.trim())
        .input("path", path.trim())
        .input("initial", initial.trim())
        .input("step", num(step))
        .input("solve_constraint", solve_constraint);
    let mut state = FiniteTypeState::from_array([v[0], v[1], v[2], v[3], v[4], v[5]]);
    let start = points[0];
    let end = points[points.len() - 1];
    if solve_constraint {
        let d = alpha_beta(&e3, &e4, start, 2)
            .and_then(|a| a.derivatives())
            .map_err(analysis)?;
        state.sigma_x = state.tau_y - (d.alpha_x - d.beta_y) / 3.0;
        report.notes.push(format!(
            "sigma_x set to {} to satisfy the trace constraint",
            float_text(state.sigma_x)
        ));
    }
    let r = integrate_symmetric_connection(&e3, &e4, state, &points, step).map_err(analysis)?;
    let d_end = alpha_beta(&e3, &e4, end, 2)
        .and_then(|a| a.derivatives())
        .map_err(analysis)?;
    let c = curvature_along(&r.state, &d_end);
    report.warnings.extend(r.warnings.iter().cloned());
    let verdict = if r.constraint_residual.abs() <= tol && r.warnings.is_empty() {
        "pass"
    } else {
        "fail"
    };
    let mut results = json!({
        "initial": state_json(&state),
        "final": state_json(&r.state),
        "steps": r.steps,
        "constraint_residual": num(r.constraint_residual),
        "curvature": {
            "r1_112": num(c.r1_112),
            "r1_212": num(c.r1_212),
            "r2_112": num(c.r2_112),
            "r2_212": num(c.r2_212),
            "trace": num(c.trace()),
            "determinant": num(c.determinant()),
        },
        "verdict": verdict,
    });
    if points.len() > 1 && start == end {
        results["loop_defect"] = num(r.state.max_difference(&state));
    }
    report.results = results;
    Ok(Output {
        report,
        csv: None,
        svg: None,
        verdict,
    })
}

fn thomas_arg(flag: &str, text: &str) -> Outcome<ThomasParameters> {
    let v = reals(flag, text, ',', 4)?;
    Ok(ThomasParameters::from_array([v[0], v[1], v[2], v[3]]))
}

fn cmd_euler(w: &str, pi: Option<&str>, sampling: &Sampling, tol: f64) -> Outcome<Output> {
    let e = parse_one("--w", w)?;
    let pi = pi.map(|t| thomas_arg("--pi", t)).transpose()?;
    let (grid, _) = sampling_arg(sampling)?;
    let mut report = Report::new("euler");
    report.input("w", w.trim());
    if let Some(p) = &pi {
        report.input("pi", report::thomas(p));
    }
    sampling_input(&mut report, sampling, &grid);
    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    for p in grid.points() {
        let r = match &pi {
            Some(pi) => connection_euler_residual(&e, pi, p),
            None => euler_residual(&e, p),
        };
        match r {
            Ok(v) => samples.push(ResidualSample {
                point: p,
                raw: v,
                normalized: v,
                gradient_norm: f64::NAN,
                degenerate: false,
            }),
            Err(err) => {
                skipped.push(json!({ "x": num(p.x), "y": num(p.y), "reason": err.to_string() }))
            }
        }
    }
    if samples.is_empty() {
        return Err(Failure::Analysis(
            "w could not be evaluated at any grid point".into(),
        ));
    }
    if !skipped.is_empty() {
        report
            .warnings
            .push(format!("{} grid points skipped", skipped.len()));
    }
    let values: Vec<f64> = samples.iter().map(|s| s.raw).collect();
    let worst = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let verdict = if worst <= tol { "pass" } else { "fail" };
    let mut results = json!({
        "form": if pi.is_some() { "connection" } else { "flat" },
        "residual": abs_stats(&values),
        "evaluated": samples.len(),
        "skipped": skipped,
        "verdict": verdict,
    });
    if grid.len() == 1 {
        results["value"] = num(values[0]);
    }
    report.results = results;
    Ok(Output {
        report,
        csv: Some(render::residual_csv(&samples)),
        svg: None,
        verdict,
    })
}

fn cmd_lingen(
    data: &str,
    interval: &str,
    domain: &str,
    leaves: usize,
    svg_path: Option<&PathBuf>,
) -> Outcome<Output> {
    let w0s = parse_many("--data", data)?;
    let texts = verbatim(data);
    let intervals = interval
        .split(';')
        .map(|t| reals("--interval", t, ':', 2).map(|v| (v[0], v[1])))
        .collect::<Outcome<Vec<(f64, f64)>>>()?;
    let intervals = match intervals.len() {
        1 => vec![intervals[0]; w0s.len()],
        n if n == w0s.len() => intervals,
        n => {
            return usage(format!(
                "--interval: got {n} intervals for {} data",
                w0s.len()
            ))
        }
    };
    let rect = rect_arg("--domain", domain)?;
    if leaves == 0 {
        return usage("--leaves must be at least 1");
    }
    let data = w0s
        .into_iter()
        .zip(&intervals)
        .map(|(w, &i)| {
            CauchyDatum::new(w, i).map_err(|e| Failure::Usage(format!("--interval: {e}")))
        })
        .collect::<Outcome<Vec<_>>>()?;
    let mut report = Report::new("lingen");
    report
        .input("data", texts.clone())
        .input("interval", interval.trim())
        .input("domain", domain.trim())
        .input("leaves", leaves);
    report.grid = report::rect(&rect);
    let web = generate_linear_web(&data, rect, leaves).map_err(analysis)?;
    let mut polylines = Vec::new();
    let mut foliations = Vec::new();
    let mut ok = true;
    for (i, f) in web.foliations.iter().enumerate() {
        let name = texts.get(i).cloned().unwrap_or_default();
        for leaf in &f.leaves {
            polylines.push(LeafPolyline::segment(i, leaf.w0, leaf.start, leaf.end));
        }
        for issue in &f.issues {
            report.warnings.push(format!("datum {name}: {issue}"));
        }
        if f.missed_leaves > 0 {
            report.warnings.push(format!(
                "datum {name}: {} of {leaves} leaf parameters give lines that miss the domain",
                f.missed_leaves
            ));
        }
        ok &= !f.leaves.is_empty() && f.issues.is_empty();
        if let Some(c) = f.pencil_center {
            report.notes.push(format!(
                "datum {name}: leaves are the pencil through ({}, {})",
                float_text(c.x),
                float_text(c.y)
            ));
        } else if f.parallel {
            report
                .notes
                .push(format!("datum {name}: leaves are parallel lines"));
        }
        foliations.push(json!({
            "datum": name,
            "interval": [num(f.datum.interval.0), num(f.datum.interval.1)],
            "lambda_range": f.lambda_range.map(|(a, b)| json!([num(a), num(b)])),
            "leaves": f.leaves.len(),
            "pencil_center": f.pencil_center.map(report::point),
            "parallel": f.parallel,
            "missed_leaves": f.missed_leaves,
            "lines": f.leaves.iter().map(|l| json!({
                "lambda": num(l.lambda),
                "w": num(l.w0),
                "start": report::point(l.start),
                "end": report::point(l.end),
            })).collect::<Vec<_>>(),
        }));
    }
    let svg = render::render_svg(&polylines, rect, &SvgStyle::default()).ok();
    if let Some(path) = svg_path {
        match &svg {
            Some(text) => emit(Some(path), text)?,
            None => report.warnings.push("no leaves to draw".into()),
        }
    }
    let verdict = if ok { "pass" } else { "fail" };
    report.results = json!({
        "leaves": polylines.len(),
        "svg_path": svg_path.map(|p| p.display().to_string()),
        "foliations": foliations,
        "verdict": verdict,
    });
    Ok(Output {
        report,
        csv: None,
        svg,
        verdict,
    })
}

fn cmd_render(
    functions: &Functions,
    domain: &str,
    leaves: usize,
    step: f64,
    max_points: usize,
) -> Outcome<Output> {
    let (web, texts) = function_list(functions)?;
    let rect = rect_arg("--domain", domain)?;
    if leaves == 0 {
        return usage("--leaves must be at least 1");
    }
    if !(step > 0.0) {
        return usage(format!("--step must be positive, got {step}"));
    }
    let mut report = Report::new("render");
    report
        .input("functions", texts)
        .input("domain", domain.trim())
        .input("leaves", leaves)
        .input("step", num(step))
        .input("max_points", max_points);
    report.grid = report::rect(&rect);
    let mut polylines = Vec::new();
    let mut per_foliation = Vec::new();
    let mut ok = true;
    for (i, f) in web.iter().enumerate() {
        let seeds = render::level_seeds(f, rect, leaves);
        let mut traced = 0;
        let mut closed = 0;
        let mut drift: f64 = 0.0;
        for (_, seed) in seeds {
            match render::trace_level_curve(f, seed, rect, step, max_points) {
                Ok(mut leaf) => {
                    leaf.foliation_index = i;
                    for p in &leaf.points {
                        if let Ok(v) = f.eval(*p) {
                            drift = drift.max((v - leaf.level).abs());
                        }
                    }
                    traced += 1;
                    closed += usize::from(leaf.closed);
                    polylines.push(leaf);
                }
                Err(e) => report.warnings.push(format!("f{}: {e}", i + 1)),
            }
        }
        if traced == 0 {
            report
                .warnings
                .push(format!("f{}: no level curve found in the domain", i + 1));
        }
        ok &= traced == leaves;
        per_foliation.push(json!({
            "leaves": traced,
            "closed": closed,
            "max_drift": num(drift),
        }));
    }
    if polylines.is_empty() {
        return Err(Failure::Analysis("nothing to draw".into()));
    }
    let svg = render::render_svg(&polylines, rect, &SvgStyle::default()).map_err(analysis)?;
    let verdict = if ok { "pass" } else { "fail" };
    report.results = json!({
        "leaves": polylines.len(),
        "per_foliation": per_foliation,
        "verdict": verdict,
    });
    Ok(Output {
        report,
        csv: None,
        svg: Some(svg),
        verdict,
    })
}
