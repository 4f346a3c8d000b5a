use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use warpspace::audit::{run_audit, AuditConfig};
use warpspace::complexes::{build_multiwarp_space, GraphOfSpacesSpec};
use warpspace::groups::{realize_graph_of_groups, serre_presentation, GraphOfGroupsSpec};
use warpspace::quotient::{fit_epsilon, Glued};
use warpspace::{distance, Error, PointCoord, SolverConfig, SpaceDescriptor};

#[derive(Parser)]
#[command(name = "warpspace", version, about = "Build and measure warped graph-of-spaces models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the space of a graph of groups or graph of spaces.
    Build(BuildArgs),
    /// Distance between two points.
    Distance(QueryArgs),
    /// Distance and waypoints of a shortest path.
    Geodesic(QueryArgs),
    /// CAT(0) comparison and structure audit.
    Audit(AuditArgs),
    /// Presentation of a graph of groups.
    Presentation(PresentationArgs),
}

#[derive(Args)]
struct Common {
    /// Input JSON file.
    #[arg(long)]
    input: PathBuf,
    /// Also write the JSON result here; audit writes its CSV alongside.
    #[arg(long)]
    output: Option<PathBuf>,
    /// JSON solver configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for restarts and sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Length tolerance; for audit, the slack tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Sampling window "lo,hi" for unbounded axes.
    #[arg(long)]
    window: Option<String>,
    /// Net spacing for glued spaces; chosen to fit the node budget if unset.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Waypoints of the finest solver level.
    #[arg(long)]
    waypoints: Option<usize>,
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct QueryArgs {
    #[command(flatten)]
    common: Common,
    /// Point as JSON: structured, or a flat coordinate array.
    #[arg(long, allow_hyphen_values = true)]
    from: String,
    #[arg(long, allow_hyphen_values = true)]
    to: String,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    common: Common,
    /// Number of triangles.
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Ball radius for triangle vertices, capped by the local systole.
    #[arg(long)]
    radius: Option<f64>,
    /// Spread vertices across the whole window instead of a small ball.
    #[arg(long)]
    large_triangles: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args)]
struct PresentationArgs {
    /// Graph-of-groups JSON file.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidSpec { .. } | Error::ShapeMismatch { .. } | Error::InvalidDescriptor(_) => 2,
            Error::CertificationFailed(_) | Error::LambdaMismatch(_) => 3,
            Error::Disconnected => 4,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn schema(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn io(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 1,
        message: format!("{}: {e}", path.display()),
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn read_json(path: &Path) -> CliResult<Value> {
    let text = fs::read_to_string(path).map_err(|e| io(path, e))?;
    serde_json::from_str(&text).map_err(|e| schema(format!("{}: {e}", path.display())))
}

fn parse<T: serde::de::DeserializeOwned>(v: Value, what: &str) -> CliResult<T> {
    serde_json::from_value(v).map_err(|e| schema(format!("{what}: {e}")))
}

fn parse_window(s: &str) -> CliResult<[f64; 2]> {
    let parts: Vec<&str> = s.split(',').collect();
    let [lo, hi] = parts.as_slice() else {
        return Err(schema("--window expects lo,hi"));
    };
    let num = |x: &str| x.trim().parse::<f64>().map_err(|_| schema(format!("--window: bad number `{x}`")));
    Ok([num(lo)?, num(hi)?])
}

fn positive(name: &str, v: Option<f64>) -> CliResult<Option<f64>> {
    match v {
        Some(x) if !(x.is_finite() && x > 0.0) => Err(schema(format!("--{name} must be positive"))),
        other => Ok(other),
    }
}

fn solver_config(c: &Common) -> CliResult<SolverConfig> {
    let mut cfg: SolverConfig = match &c.config {
        Some(p) => parse(read_json(p)?, "config")?,
        None => SolverConfig::default(),
    };
    if let Some(t) = positive("tol", c.tol)? {
        cfg.length_tol = t;
    }
    if let Some(s) = c.seed {
        cfg.rng_seed = s;
    }
    if let Some(w) = &c.window {
        cfg.net.window = parse_window(w)?;
    }
    if let Some(e) = positive("epsilon", c.epsilon)? {
        cfg.net.epsilon = e;
    }
    if let Some(n) = c.waypoints {
        cfg.n_waypoints = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Grid nodes allowed when ε is left to the CLI; about two seconds of net
/// construction on the four-dimensional pieces of BS(1,2).
const NET_BUDGET: usize = 1000;

/// Without an explicit --epsilon or config, coarsen ε until the net of a
/// quotient fits the budget.
fn fit_net(space: &SpaceDescriptor, c: &Common, cfg: &mut SolverConfig) -> CliResult<()> {
    if c.epsilon.is_some() || c.config.is_some() {
        return Ok(());
    }
    if let Some(q) = space.as_quotient()? {
        let eps = fit_epsilon(&q, cfg, NET_BUDGET)?;
        if eps != cfg.net.epsilon {
            eprintln!("note: net epsilon coarsened to {eps} to fit {NET_BUDGET} nodes");
            cfg.net.epsilon = eps;
        }
    }
    Ok(())
}

/// A space file holds a descriptor, or a build output with a `space` field.
fn load_space(path: &Path) -> CliResult<SpaceDescriptor> {
    let v = read_json(path)?;
    let v = match v {
        Value::Object(ref m)
            if m.contains_key("space")
                && m.get("kind").and_then(Value::as_str).is_none_or(|k| k.starts_with("graph_of_")) =>
        {
            m["space"].clone()
        }
        other => other,
    };
    let space: SpaceDescriptor = parse(v, "space")?;
    space.validate()?;
    Ok(space)
}

fn parse_point(space: &SpaceDescriptor, text: &str) -> CliResult<PointCoord> {
    let v: Value = serde_json::from_str(text).map_err(|e| schema(format!("point `{text}`: {e}")))?;
    let flat: Option<Vec<f64>> = match &v {
        Value::Number(n) => n.as_f64().map(|x| vec![x]),
        Value::Array(items) => items.iter().map(Value::as_f64).collect(),
        _ => None,
    };
    let Some(flat) = flat else {
        return parse(v, "point");
    };
    match space.as_quotient()? {
        // Flat form for glued spaces: [piece, coordinates...].
        Some(q) => {
            let glued = Glued::new(q)?;
            let (&piece, coords) = flat.split_first().ok_or_else(|| schema("empty point"))?;
            if piece < 0.0 || piece.fract() != 0.0 || piece as usize >= glued.n_pieces() {
                return Err(schema(format!("point `{text}`: bad piece index {piece}")));
            }
            Ok(glued.unflatten_point(piece as usize, coords)?)
        }
        None => Ok(space.unflatten(&flat)?),
    }
}

fn emit(output: Option<&Path>, v: &Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(v).expect("json values serialize");
    if let Some(p) = output {
        fs::write(p, format!("{text}\n")).map_err(|e| io(p, e))?;
    }
    println!("{text}");
    Ok(())
}

fn cmd_build(args: &BuildArgs) -> CliResult<u8> {
    let v = read_json(&args.common.input)?;
    let is_spaces = v
        .get("vertices")
        .and_then(Value::as_array)
        .is_some_and(|vs| vs.iter().any(|x| x.get("space").is_some()));
    let out = if is_spaces {
        let spec: GraphOfSpacesSpec = parse(v, "graph of spaces")?;
        let y = build_multiwarp_space(&spec)?;
        json!({ "kind": "graph_of_spaces", "space": y.space, "warp": y.warp })
    } else {
        let spec: GraphOfGroupsSpec = parse(v, "graph of groups")?;
        let r = realize_graph_of_groups(&spec)?;
        json!({
            "kind": "graph_of_groups",
            "space": r.multiwarp.space,
            "warp": r.multiwarp.warp,
            "presentation": r.presentation,
            "presentation_text": r.presentation.to_string(),
        })
    };
    emit(args.common.output.as_deref(), &out)?;
    Ok(0)
}

fn cmd_query(args: &QueryArgs, with_path: bool) -> CliResult<u8> {
    let space = load_space(&args.common.input)?;
    let mut cfg = solver_config(&args.common)?;
    fit_net(&space, &args.common, &mut cfg)?;
    let p = parse_point(&space, &args.from)?;
    let q = parse_point(&space, &args.to)?;
    let r = distance(&space, &p, &q, &cfg)?;
    let mut out = json!({
        "length": r.length,
        "converged": r.converged,
        "restarts_used": r.restarts_used,
        "net_epsilon": r.net_epsilon,
    });
    if with_path {
        out["path"] = serde_json::to_value(&r.path).expect("paths serialize");
    }
    emit(args.common.output.as_deref(), &out)?;
    Ok(0)
}

fn cmd_audit(args: &AuditArgs) -> CliResult<u8> {
    let space = load_space(&args.common.input)?;
    let mut cfg = AuditConfig {
        solver: SolverConfig {
            restarts: 0,
            ..solver_config(&args.common)?
        },
        large_triangles: args.large_triangles,
        ..AuditConfig::default()
    };
    if args.common.waypoints.is_none() && args.common.config.is_none() {
        cfg.solver.n_waypoints = AuditConfig::default().solver.n_waypoints;
    }
    fit_net(&space, &args.common, &mut cfg.solver)?;
    if let Some(t) = positive("tol", args.common.tol)? {
        cfg.tol = t;
    }
    if let Some(r) = positive("radius", args.radius)? {
        cfg.radius = r;
    }
    let seed = args.common.seed.unwrap_or(0);
    let report = run_audit(&space, args.samples, seed, &cfg)?;
    if let Some(p) = &args.common.output {
        let csv_path = p.with_extension("csv");
        fs::write(&csv_path, report.to_csv()?).map_err(|e| io(&csv_path, e))?;
    }
    let passed = report.passed();
    let mut out = report.to_json();
    out["passed"] = json!(passed);
    emit(args.common.output.as_deref(), &out)?;
    if !passed {
        eprintln!(
            "audit found violations: max slack {:.3e}, {} above tol",
            report.max_cat0_violation, report.n_violations
        );
    }
    Ok(if passed { 0 } else { 5 })
}

fn cmd_presentation(args: &PresentationArgs) -> CliResult<u8> {
    let spec: GraphOfGroupsSpec = parse(read_json(&args.input)?, "graph of groups")?;
    let p = serre_presentation(&spec)?;
    match args.format {
        Format::Json => emit(
            args.output.as_deref(),
            &json!({ "presentation": p, "text": p.to_string() }),
        )?,
        Format::Text => {
            if let Some(o) = &args.output {
                fs::write(o, format!("{p}\n")).map_err(|e| io(o, e))?;
            }
            println!("{p}");
        }
    }
    Ok(0)
}

fn configure_threads() {
    if let Some(n) = std::env::var("WARPSPACE_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let result = match &cli.command {
        Command::Build(a) => cmd_build(a),
        Command::Distance(a) => cmd_query(a, false),
        Command::Geodesic(a) => cmd_query(a, true),
        Command::Audit(a) => cmd_audit(a),
        Command::Presentation(a) => cmd_presentation(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
