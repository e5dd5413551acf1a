use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use heat_series::experiments::{self, StudyKind, StudyReport};
use heat_series::kernels::{forward_line, forward_polar};
use heat_series::profile::{AnalyticProfile, Field, Sampled1D};
use heat_series::quad::QuadSpec;
use heat_series::series::{auto_beta, ConstantsMode, Geometry, SeriesOptions, SeriesSolver, Variant, DEFAULT_ORDER};
use heat_series::series_cartesian::ci_classical;
use heat_series::specfun::KernelParams;

mod config;
mod io;

use io::{Cell, Format, Metadata, Output, Table};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
    #[error("audit failed: {0}")]
    Audit(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Audit(_) => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

/// Library errors: bad parameters are configuration problems, the rest are numerical.
fn lib_err(context: &str, e: heat_series::Error) -> CliError {
    match e {
        heat_series::Error::InvalidParameter(_) | heat_series::Error::Unsupported(_) => CliError::Config(format!("{context}: {e}")),
        _ => CliError::Numerical(format!("{context}: {e}")),
    }
}

#[derive(Parser)]
#[command(name = "heatseries", version, about = "Series solutions of the direct and inverse heat equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve initial data forward with a direct series or the kernel oracle.
    Forward(SolveArgs),
    /// Reconstruct initial data from an observed field.
    Inverse(InverseArgs),
    /// Certify every series variant against the kernel oracle.
    Validate(ValidateArgs),
    /// Run a study described by a config file.
    Study(StudyArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// `line` or `polar`; defaults to the geometry of the variant.
    #[arg(long)]
    geometry: Option<String>,
    /// Series variant name, or `oracle` for kernel quadrature (forward only).
    #[arg(long)]
    variant: String,
    #[arg(long, allow_negative_numbers = true)]
    tau: f64,
    /// Shift parameter, or `auto` for the width rule.
    #[arg(long, default_value = "auto", allow_hyphen_values = true)]
    beta: String,
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    order: usize,
    /// Analytic data, e.g. `gaussian:a=1`.
    #[arg(long, conflicts_with = "input")]
    profile: Option<String>,
    /// Sampled data: `x,value` lines on a uniform grid.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Evaluation points `a:b:n`.
    #[arg(long, allow_hyphen_values = true)]
    eval_grid: String,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long, default_value = "oracle_validated")]
    constants_mode: String,
}

#[derive(Args)]
struct InverseArgs {
    #[command(flatten)]
    solve: SolveArgs,
    /// Standard deviation of Gaussian noise added to `--input` samples.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    noise: f64,
    #[arg(long, default_value_t = 20240607)]
    seed: u64,
    /// Reference initial profile for error reporting.
    #[arg(long)]
    truth: Option<String>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, default_value = "oracle_validated")]
    constants_mode: String,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct StudyArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

fn parse_with<T: std::str::FromStr<Err = heat_series::Error>>(what: &str, s: &str) -> Result<T, CliError> {
    s.parse::<T>().map_err(|e| CliError::Config(format!("--{what}: {e}")))
}

fn parse_eval_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Config(format!("--eval-grid: expected a:b:n, got `{s}`"));
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, n] = parts.as_slice() else { return Err(bad()) };
    let (a, b): (f64, f64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if n == 0 || !a.is_finite() || !b.is_finite() || b < a {
        return Err(CliError::Config(format!("--eval-grid: need n >= 1 and a <= b, got `{s}`")));
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    let h = (b - a) / (n - 1) as f64;
    Ok((0..n).map(|i| if i == n - 1 { b } else { a + i as f64 * h }).collect())
}

/// The data source of a solve.
enum Data {
    Profile(AnalyticProfile),
    Samples(PathBuf, Sampled1D),
}

impl Data {
    fn load(args: &SolveArgs) -> Result<Self, CliError> {
        match (&args.profile, &args.input) {
            (Some(p), None) => Ok(Data::Profile(parse_with("profile", p)?)),
            (None, Some(path)) => Ok(Data::Samples(path.clone(), io::read_samples(path)?)),
            _ => Err(CliError::Config("give exactly one of --profile or --input".into())),
        }
    }

    fn field(&self) -> Field {
        match self {
            Data::Profile(p) => p.clone().into(),
            Data::Samples(_, s) => s.clone().into(),
        }
    }

    fn describe(&self, meta: &mut Metadata) {
        match self {
            Data::Profile(p) => meta.push("profile", p),
            Data::Samples(path, s) => {
                meta.push("input", path.display());
                meta.push("input_grid", format!("{}:{}:{}", s.a, s.b, s.n_nodes()));
            }
        }
    }
}

/// Settings shared by forward and inverse solves, checked for consistency.
struct Resolved {
    geometry: Geometry,
    variant: Option<Variant>,
    mode: ConstantsMode,
    points: Vec<f64>,
}

fn resolve(args: &SolveArgs, inverse: bool) -> Result<Resolved, CliError> {
    let mode: ConstantsMode = parse_with("constants-mode", &args.constants_mode)?;
    let variant = if !inverse && args.variant.eq_ignore_ascii_case("oracle") {
        None
    } else {
        let v: Variant = args
            .variant
            .parse()
            .map_err(|_| CliError::Config(format!("unknown variant `{}` (valid: {}{})", args.variant, Variant::valid_names(), if inverse { "" } else { ", oracle" })))?;
        if v.is_inverse() != inverse {
            let kind = if inverse { "inverse" } else { "forward" };
            return Err(CliError::Config(format!("variant {v} cannot be used with `{kind}`")));
        }
        Some(v)
    };
    let geometry = match (&args.geometry, variant) {
        (Some(g), v) => {
            let g: Geometry = parse_with("geometry", g)?;
            if let Some(v) = v.filter(|v| v.geometry() != g) {
                return Err(CliError::Config(format!("variant {v} does not belong to {g} geometry")));
            }
            g
        }
        (None, Some(v)) => v.geometry(),
        (None, None) => Geometry::Line,
    };
    if !(args.tau > 0.0) || !args.tau.is_finite() {
        return Err(CliError::Config(format!("--tau must be > 0, got {}", args.tau)));
    }
    let points = parse_eval_grid(&args.eval_grid)?;
    if geometry == Geometry::Polar && points[0] < 0.0 {
        return Err(CliError::Config("polar evaluation points must be non-negative".into()));
    }
    Ok(Resolved { geometry, variant, mode, points })
}

fn resolve_beta(args: &SolveArgs, variant: Variant, data: &Field, spec: &QuadSpec) -> Result<(f64, bool), CliError> {
    if args.beta == "auto" {
        let b = auto_beta(variant, data, args.tau, spec).map_err(|e| lib_err("beta_rule", e))?;
        Ok((b, true))
    } else {
        let b: f64 = args.beta.parse().map_err(|_| CliError::Config(format!("--beta: expected a number or `auto`, got `{}`", args.beta)))?;
        if !(b > 0.0) || !b.is_finite() {
            return Err(CliError::Config(format!("--beta must be > 0, got {b}")));
        }
        Ok((b, false))
    }
}

fn common_metadata(command: &str, args: &SolveArgs, r: &Resolved) -> Metadata {
    let mut m = Metadata::default();
    m.push("tool", format!("heatseries {}", env!("CARGO_PKG_VERSION")));
    m.push("command", command);
    m.push("geometry", r.geometry);
    m.push("variant", r.variant.map_or("oracle".to_string(), |v| v.to_string()));
    m.push("tau", args.tau);
    m.push("eval_grid", &args.eval_grid);
    m.push("constants_mode", r.mode);
    m.push("format", format!("{:?}", args.format).to_lowercase());
    m
}

fn point_column(g: Geometry) -> &'static str {
    match g {
        Geometry::Line => "x",
        Geometry::Polar => "r",
    }
}

/// Re-run line: the full argument list minus the output path.
fn rerun_line(command: &str, args: &SolveArgs, extra: &[(&str, String)], data: &Data, beta: Option<&str>) -> String {
    let mut s = format!("heatseries {command} --variant {} --tau {} --eval-grid {} --format {} --constants-mode {}", args.variant, args.tau, args.eval_grid, format!("{:?}", args.format).to_lowercase(), args.constants_mode);
    if let Some(g) = &args.geometry {
        s += &format!(" --geometry {g}");
    }
    if let Some(b) = beta {
        s += &format!(" --beta {b} --order {}", args.order);
    }
    match data {
        Data::Profile(p) => s += &format!(" --profile '{p}'"),
        Data::Samples(path, _) => s += &format!(" --input {}", path.display()),
    }
    for (k, v) in extra {
        s += &format!(" --{k} {v}");
    }
    s
}

fn cmd_forward(args: &SolveArgs) -> Result<String, CliError> {
    let r = resolve(args, false)?;
    let data = Data::load(args)?;
    let field = data.field();
    let spec = QuadSpec::default();
    let mut meta = common_metadata("forward", args, &r);
    data.describe(&mut meta);
    let mut rows = Vec::with_capacity(r.points.len());
    let mut flagged = 0usize;
    match r.variant {
        None => {
            meta.push("rerun", rerun_line("forward", args, &[], &data, None));
            for (i, &x) in r.points.iter().enumerate() {
                let v = match r.geometry {
                    Geometry::Line => forward_line(&field, args.tau, x, &spec),
                    Geometry::Polar => forward_polar(&field, args.tau, x, &spec),
                }
                .map_err(|e| lib_err(&format!("oracle at row {} ({} = {x})", i + 1, point_column(r.geometry)), e))?;
                rows.push(vec![Cell::Num(x), Cell::Num(v), Cell::Bool(false)]);
            }
        }
        Some(variant) => {
            let (beta, auto) = resolve_beta(args, variant, &field, &spec)?;
            meta.push("beta", format!("{beta}{}", if auto { " (auto)" } else { "" }));
            meta.push("order", args.order);
            meta.push("rerun", rerun_line("forward", args, &[], &data, Some(&args.beta)));
            let params = KernelParams::new(args.tau, beta).map_err(|e| lib_err("parameters", e))?;
            let solver = SeriesSolver::new(variant, field, params, args.order, spec, SeriesOptions::with_mode(r.mode)).map_err(|e| lib_err(&format!("{variant} coefficients"), e))?;
            for (i, &x) in r.points.iter().enumerate() {
                let (v, d) = solver.eval(x).map_err(|e| lib_err(&format!("{variant} at row {} ({} = {x})", i + 1, point_column(r.geometry)), e))?;
                flagged += d.flagged as usize;
                rows.push(vec![Cell::Num(x), Cell::Num(v), Cell::Bool(d.flagged)]);
            }
        }
    }
    if flagged > 0 {
        meta.push("warning", format!("divergence flagged at {flagged} of {} points", rows.len()));
    }
    let out = Output { metadata: meta, table: Table { columns: vec![point_column(r.geometry), "value", "diverged"], rows }, summary: Metadata::default() };
    Ok(out.render(args.format))
}

fn cmd_inverse(args: &InverseArgs) -> Result<String, CliError> {
    let s = &args.solve;
    let r = resolve(s, true)?;
    let variant = r.variant.expect("inverse solves always name a variant");
    if !(args.noise >= 0.0) || !args.noise.is_finite() {
        return Err(CliError::Config(format!("--noise must be finite and >= 0, got {}", args.noise)));
    }
    let mut data = Data::load(s)?;
    if args.noise > 0.0 {
        let Data::Samples(_, samples) = &mut data else {
            return Err(CliError::Config("--noise applies to sampled --input data".into()));
        };
        let draws = experiments::noise_draws(args.seed, samples.n_nodes());
        for (v, z) in samples.values.iter_mut().zip(draws) {
            *v += args.noise * z;
        }
    }
    let truth: Option<AnalyticProfile> = args.truth.as_deref().map(|t| parse_with("truth", t)).transpose()?;
    let field = data.field();
    let spec = QuadSpec::default();
    let opts = SeriesOptions::with_mode(r.mode);
    let mut meta = common_metadata("inverse", s, &r);
    data.describe(&mut meta);
    meta.push("noise", args.noise);
    meta.push("seed", args.seed);
    meta.push("prng", experiments::PRNG_NAME);
    if let Some(t) = &truth {
        meta.push("truth", t);
    }
    let mut extra = vec![("noise", args.noise.to_string()), ("seed", args.seed.to_string())];
    if let Some(t) = &truth {
        extra.push(("truth", format!("'{t}'")));
    }
    let mut values = Vec::with_capacity(r.points.len());
    let mut flags = Vec::with_capacity(r.points.len());
    let row_ctx = |i: usize, x: f64| format!("{variant} at row {} ({} = {x})", i + 1, point_column(r.geometry));
    if variant == Variant::CiClassical {
        meta.push("order", s.order);
        meta.push("rerun", rerun_line("inverse", s, &extra, &data, Some("auto")));
        for (i, &x) in r.points.iter().enumerate() {
            let (v, d) = ci_classical(&field, s.tau, s.order, x, &opts).map_err(|e| lib_err(&row_ctx(i, x), e))?;
            values.push(v);
            flags.push(d.flagged);
        }
    } else {
        let (beta, auto) = resolve_beta(s, variant, &field, &spec)?;
        meta.push("beta", format!("{beta}{}", if auto { " (auto)" } else { "" }));
        meta.push("order", s.order);
        meta.push("rerun", rerun_line("inverse", s, &extra, &data, Some(&s.beta)));
        let params = KernelParams::new(s.tau, beta).map_err(|e| lib_err("parameters", e))?;
        let solver = SeriesSolver::new(variant, field, params, s.order, spec, opts).map_err(|e| lib_err(&format!("{variant} coefficients"), e))?;
        for (i, &x) in r.points.iter().enumerate() {
            let (v, d) = solver.eval(x).map_err(|e| lib_err(&row_ctx(i, x), e))?;
            values.push(v);
            flags.push(d.flagged);
        }
    }
    let flagged = flags.iter().filter(|f| **f).count();
    if flagged > 0 {
        meta.push("warning", format!("divergence flagged at {flagged} of {} points", values.len()));
    }
    let mut columns = vec![point_column(r.geometry), "value", "diverged"];
    let mut summary = Metadata::default();
    let truth_vals: Option<Vec<f64>> = truth.as_ref().map(|t| r.points.iter().map(|&x| t.value(x)).collect());
    if let Some(tv) = &truth_vals {
        columns.push("truth");
        let (mut se, mut st, mut me, mut mt) = (0.0, 0.0, 0.0f64, 0.0f64);
        for (v, t) in values.iter().zip(tv) {
            se += (v - t) * (v - t);
            st += t * t;
            me = me.max((v - t).abs());
            mt = mt.max(t.abs());
        }
        summary.push("error_l2_rel", format!("{:.16e}", (se / st).sqrt()));
        summary.push("error_max_rel", format!("{:.16e}", me / mt));
    }
    summary.push("diverged_points", flagged);
    let rows = r
        .points
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let mut row = vec![Cell::Num(x), Cell::Num(values[i]), Cell::Bool(flags[i])];
            if let Some(tv) = &truth_vals {
                row.push(Cell::Num(tv[i]));
            }
            row
        })
        .collect();
    let out = Output { metadata: meta, table: Table { columns, rows }, summary };
    Ok(out.render(s.format))
}

fn opt_num(v: Option<f64>) -> Cell {
    v.map_or(Cell::Missing, Cell::Num)
}

fn report_output(report: &StudyReport, command: &str, source: Option<&Path>) -> Output {
    let mut meta = Metadata::default();
    meta.push("tool", format!("heatseries {}", env!("CARGO_PKG_VERSION")));
    meta.push("command", command);
    if let Some(p) = source {
        meta.push("config", p.display());
    }
    let c = &report.metadata.config;
    meta.push("study_kind", report.metadata.study_kind);
    meta.push("geometry", c.geometry);
    meta.push("profile", &c.profile);
    meta.push("variants", c.variants.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", "));
    meta.push("tau", c.tau);
    meta.push("n_range", c.n_range.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(", "));
    meta.push("delta_range", c.delta_range.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", "));
    meta.push("beta_range", if c.beta_range.is_empty() { "auto".to_string() } else { c.beta_range.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(", ") });
    meta.push("grid", format!("{}:{}:{}", c.grid.a, c.grid.b, c.grid.n_nodes));
    meta.push("seed", c.seed);
    meta.push("constants_mode", report.metadata.constants_mode);
    meta.push("library_version", &report.metadata.library_version);
    meta.push("prng", &report.metadata.prng);
    let columns = vec![
        "variant", "n", "beta", "delta", "constants_mode", "error_l2", "error_max", "diverged", "runtime_ms", "passed", "expected_pass", "measured_ratio", "documented_ratio", "failure",
    ];
    let rows = report
        .rows
        .iter()
        .map(|r| {
            vec![
                Cell::Text(r.variant.to_string()),
                Cell::Int(r.n),
                opt_num(r.beta),
                Cell::Num(r.delta),
                Cell::Text(r.constants_mode.to_string()),
                Cell::Num(r.error_l2),
                Cell::Num(r.error_max),
                Cell::Bool(r.diverged),
                opt_num(r.runtime_ms),
                r.passed.map_or(Cell::Missing, Cell::Bool),
                r.expected_pass.map_or(Cell::Missing, Cell::Bool),
                opt_num(r.measured_ratio),
                opt_num(r.documented_ratio),
                r.failure.clone().map_or(Cell::Missing, Cell::Text),
            ]
        })
        .collect();
    let mut summary = Metadata::default();
    for s in &report.summaries {
        let key = format!("{} beta={} delta={}", s.variant, s.beta.map_or("none".to_string(), |b| b.to_string()), s.delta);
        summary.push(&key, format!("n_star={} min_error_l2={:.6e} u_shape={}", s.n_star.map_or("none".to_string(), |n| n.to_string()), s.min_error_l2, s.u_shape));
    }
    Output { metadata: meta, table: Table { columns, rows }, summary }
}

fn cmd_validate(args: &ValidateArgs) -> Result<(String, bool), CliError> {
    let mode: ConstantsMode = parse_with("constants-mode", &args.constants_mode)?;
    let mut cfg = experiments::StudyConfig::new(StudyKind::Audit, Geometry::Line);
    cfg.variants = Vec::new();
    cfg.constants_mode = mode;
    let report = experiments::run_audit(&cfg).map_err(|e| lib_err("audit", e))?;
    let mut table = format!("{:<8} {:>2} {:>11} {:>11} {:<6} {:<8}\n", "variant", "N", "beta", "error_max", "pass", "expected");
    for r in &report.rows {
        let mark = if r.as_expected() { "" } else { "  <-- unexpected" };
        table += &format!(
            "{:<8} {:>2} {:>11} {:>11.3e} {:<6} {:<8}{mark}\n",
            r.variant.to_string(),
            r.n,
            r.beta.map_or("-".into(), |b| format!("{b}")),
            r.error_max,
            r.passed.map_or("-".into(), |p| p.to_string()),
            r.expected_pass.map_or("-".into(), |p| p.to_string())
        );
        if let Some(f) = &r.failure {
            table += &format!("         {f}\n");
        }
    }
    let text = match args.output {
        Some(_) => report_output(&report, "validate", None).render(args.format),
        None => table,
    };
    Ok((text, report.audit_ok()))
}

fn cmd_study(args: &StudyArgs) -> Result<String, CliError> {
    let cfg = config::read_study_config(&args.config)?;
    let report = experiments::run_study(&cfg).map_err(|e| lib_err("study", e))?;
    Ok(report_output(&report, "study", Some(&args.config)).render(args.format))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Forward(a) => io::write_atomic(a.output.as_deref(), &cmd_forward(&a)?),
        Command::Inverse(a) => io::write_atomic(a.solve.output.as_deref(), &cmd_inverse(&a)?),
        Command::Validate(a) => {
            let (text, ok) = cmd_validate(&a)?;
            io::write_atomic(a.output.as_deref(), &text)?;
            if ok {
                Ok(())
            } else {
                Err(CliError::Audit("at least one variant disagrees with its expected outcome".into()))
            }
        }
        Command::Study(a) => io::write_atomic(a.output.as_deref(), &cmd_study(&a)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("heatseries: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_grid_parsing() {
        assert_eq!(parse_eval_grid("0:0:1").unwrap(), vec![0.0]);
        assert_eq!(parse_eval_grid("-1:1:3").unwrap(), vec![-1.0, 0.0, 1.0]);
        assert!(parse_eval_grid("1:0:3").is_err());
        assert!(parse_eval_grid("0:1").is_err());
        assert!(parse_eval_grid("0:1:0").is_err());
    }
}
