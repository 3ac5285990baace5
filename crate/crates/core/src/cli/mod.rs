//! Command-line front end: steady-state reports, parameter sweeps, figure
//! grids, Monte-Carlo validation and stability queries.

pub mod csv;
pub mod figures;
pub mod report;
pub mod sweep;

use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::langevin::{Scheme, SimulationConfig};
use crate::model::{ModelKind, SystemParams};
use csv::{Cell, Table};
use sweep::{Quantity, Spacing, SweepRange, SweepSpec, SweptParameter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "cvsteer", version, about = "Steady-state steering and entanglement of damped three-mode systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Model family: full_rwa, reduced_a or reduced_b.
    #[arg(long, global = true)]
    pub model: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub kappa: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub gamma_m: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub gamma_a: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub g_m: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub g_a: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub n: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub n0: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub omega_m: Option<f64>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// JSON configuration document; flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Scale applied to rate-valued outputs.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub gamma_ref: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Steady-state covariance and criterion reports for every mode pair.
    SteadyState,
    /// One-parameter sweep written as a table.
    Sweep(SweepArgs),
    /// Data behind one of the reproduced figures.
    Figure {
        /// One of 2a_a, 2a_b, 2_a, 2_b, 3_a, 3_b, 4, 5, 6.
        id: String,
    },
    /// Monte-Carlo trajectories compared against the Lyapunov covariance.
    Validate(SimulationArgs),
    /// Drift-matrix stability.
    Stability,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Parameter to sweep: a model parameter name or C_a, G, G_a.
    #[arg(long)]
    pub sweep: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub start: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub stop: Option<f64>,
    #[arg(long)]
    pub count: Option<usize>,
    /// Logarithmic grid spacing.
    #[arg(long)]
    pub log: bool,
    /// Comma-separated quantities, or `all`.
    #[arg(long)]
    pub outputs: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulationArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub burn_in: Option<f64>,
    #[arg(long)]
    pub sample_duration: Option<f64>,
    #[arg(long)]
    pub trajectories: Option<usize>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Auto,
    Exact,
    EulerMaruyama,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Auto => Scheme::Auto,
            SchemeArg::Exact => Scheme::Exact,
            SchemeArg::EulerMaruyama => Scheme::EulerMaruyama,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: Option<String>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub count: Option<usize>,
    pub spacing: Option<Spacing>,
}

/// Configuration document accepted by `--config`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub model: Option<ModelKind>,
    pub params: SystemParams,
    pub sweep: SweepConfig,
    pub outputs: Option<Vec<String>>,
    pub simulation: SimulationConfig,
    pub gamma_ref: Option<f64>,
    pub format: Option<Format>,
}

impl ConfigFile {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Flags merged over the configuration document.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub model: ModelKind,
    pub params: SystemParams,
    pub gamma_ref: f64,
    pub format: Option<Format>,
}

fn resolve(common: &CommonArgs, config: &ConfigFile) -> Result<Resolved> {
    let model = match &common.model {
        Some(m) => m.parse()?,
        None => config.model.unwrap_or(ModelKind::ReducedA),
    };
    let mut p = config.params;
    let overrides = [
        (&mut p.kappa, common.kappa),
        (&mut p.gamma_m, common.gamma_m),
        (&mut p.gamma_a, common.gamma_a),
        (&mut p.g_m, common.g_m),
        (&mut p.g_a, common.g_a),
        (&mut p.n, common.n),
        (&mut p.n0, common.n0),
    ];
    for (field, flag) in overrides {
        if let Some(v) = flag {
            *field = v;
        }
    }
    if common.omega_m.is_some() {
        p.omega_m = common.omega_m;
    }
    p.validate()?;
    let gamma_ref = common.gamma_ref.or(config.gamma_ref).unwrap_or(1.0);
    if !(gamma_ref.is_finite() && gamma_ref > 0.0) {
        return Err(Error::validation("gamma_ref", format!("must be finite and > 0, got {gamma_ref}")));
    }
    Ok(Resolved { model, params: p, gamma_ref, format: common.format.or(config.format) })
}

fn sweep_spec(args: &SweepArgs, config: &ConfigFile, r: &Resolved) -> Result<SweepSpec> {
    let c = &config.sweep;
    let name = args
        .sweep
        .clone()
        .or_else(|| c.parameter.clone())
        .ok_or_else(|| Error::validation("sweep", "a swept parameter is required"))?;
    let swept_parameter: SweptParameter = name.parse()?;
    let need = |field: &'static str, flag: Option<f64>, doc: Option<f64>| {
        flag.or(doc).ok_or_else(|| Error::validation(field, "required for a sweep"))
    };
    let spacing = if args.log { Spacing::Log } else { c.spacing.unwrap_or_default() };
    let range = SweepRange {
        start: need("start", args.start, c.start)?,
        stop: need("stop", args.stop, c.stop)?,
        count: args.count.or(c.count).unwrap_or(figures::GRID_POINTS),
        spacing,
    };
    let outputs = match (&args.outputs, &config.outputs) {
        (Some(list), _) => Quantity::parse_list(list)?,
        (None, Some(list)) => Quantity::parse_list(&list.join(","))?,
        (None, None) => Quantity::ALL.to_vec(),
    };
    let spec = SweepSpec { model_kind: r.model, swept_parameter, range, fixed: r.params, outputs };
    spec.range.validate()?;
    Ok(spec)
}

fn simulation_config(args: &SimulationArgs, config: &ConfigFile) -> SimulationConfig {
    let mut s = config.simulation;
    s.seed = args.seed.unwrap_or(s.seed);
    s.dt = args.dt.unwrap_or(s.dt);
    s.burn_in = args.burn_in.unwrap_or(s.burn_in);
    s.sample_duration = args.sample_duration.unwrap_or(s.sample_duration);
    s.n_trajectories = args.trajectories.unwrap_or(s.n_trajectories);
    if let Some(scheme) = args.scheme {
        s.scheme = scheme.into();
    }
    s
}

fn sweep_metadata(spec: &SweepSpec, gamma_ref: f64) -> Result<Vec<String>> {
    Ok(vec![
        format!("cvsteer {}", env!("CARGO_PKG_VERSION")),
        format!("model {}", spec.model_kind.name()),
        format!(
            "sweep {} {} from {} to {} with {} points",
            spec.swept_parameter.name(),
            serde_json::to_value(spec.range.spacing)?.as_str().unwrap_or_default(),
            spec.range.start,
            spec.range.stop,
            spec.range.count
        ),
        format!("rates in units of the common damping, gamma_ref = {gamma_ref}"),
        format!("params {}", serde_json::to_string(&spec.fixed)?),
    ])
}

fn table_to_json(t: &Table) -> serde_json::Value {
    let rows: Vec<serde_json::Value> = t
        .rows
        .iter()
        .map(|r| {
            let obj: serde_json::Map<String, serde_json::Value> = t
                .header
                .iter()
                .zip(r)
                .map(|(h, c)| {
                    let v = match c {
                        Cell::Num(x) => json!(x),
                        Cell::Text(s) if s == "true" || s == "false" => json!(s == "true"),
                        Cell::Text(s) => json!(s),
                        Cell::Empty => serde_json::Value::Null,
                    };
                    (h.clone(), v)
                })
                .collect();
            serde_json::Value::Object(obj)
        })
        .collect();
    json!({ "metadata": t.metadata, "rows": rows })
}

fn render_table(t: &Table, format: Format) -> Result<String> {
    match format {
        Format::Csv => Ok(t.to_csv()),
        Format::Json => Ok(serde_json::to_string_pretty(&table_to_json(t))? + "\n"),
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn covariance_table(r: &report::SteadyStateReport) -> Table {
    let header: Vec<String> = r.covariance.labels.iter().flat_map(|m| [format!("X{m}"), format!("P{m}")]).collect();
    let v = &r.covariance.values;
    let rows = (0..v.nrows()).map(|i| (0..v.ncols()).map(|j| Cell::Num(v[(i, j)])).collect()).collect();
    Table {
        metadata: vec![
            format!("cvsteer {}", env!("CARGO_PKG_VERSION")),
            format!("model {}", r.model_kind.name()),
            format!("params {}", serde_json::to_string(&r.params).unwrap_or_default()),
        ],
        header,
        rows,
    }
}

/// Runs a parsed command and returns the text to emit.
pub fn run(cli: &Cli) -> Result<String> {
    let config = match &cli.common.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let r = resolve(&cli.common, &config)?;
    match &cli.command {
        Command::SteadyState => {
            let rep = report::steady_state_report(r.model, &r.params, r.gamma_ref)?;
            rep.warnings.iter().for_each(|w| log::warn!("{w}"));
            match r.format.unwrap_or(Format::Json) {
                Format::Json => to_json(&rep),
                Format::Csv => Ok(covariance_table(&rep).to_csv()),
            }
        }
        Command::Stability => {
            let rep = report::stability_report(r.model, &r.params, r.gamma_ref)?;
            match r.format.unwrap_or(Format::Json) {
                Format::Json => to_json(&rep),
                Format::Csv => Ok(Table {
                    metadata: vec![format!("cvsteer {}", env!("CARGO_PKG_VERSION"))],
                    header: ["model", "stable", "max_real_eigenvalue", "stability_margin"].map(String::from).to_vec(),
                    rows: vec![vec![
                        Cell::Text(r.model.name().into()),
                        Cell::Text(rep.stable.to_string()),
                        Cell::Num(rep.max_real_eigenvalue),
                        Cell::Num(rep.stability_margin),
                    ]],
                }
                .to_csv()),
            }
        }
        Command::Sweep(args) => {
            let spec = sweep_spec(args, &config, &r)?;
            let mut table = sweep::run_sweep_scaled(&spec, r.gamma_ref)?;
            table.metadata = sweep_metadata(&spec, r.gamma_ref)?;
            if let Some(w) = sweep::adiabatic_warning(&spec) {
                log::warn!("{w}");
                table.metadata.push(format!("warning {w}"));
            }
            render_table(&table, r.format.unwrap_or(Format::Csv))
        }
        Command::Figure { id } => {
            let table = figures::reproduce_figure(id.parse()?, r.gamma_ref)?;
            render_table(&table, r.format.unwrap_or(Format::Csv))
        }
        Command::Validate(args) => {
            if r.format == Some(Format::Csv) {
                return Err(Error::validation("format", "validate only writes JSON"));
            }
            let sim = simulation_config(args, &config);
            let rep = report::validate_report(r.model, &r.params, &sim)?;
            rep.result.estimate.warnings.iter().for_each(|w| log::warn!("{w}"));
            to_json(&rep)
        }
    }
}

/// Structured description of an error for standard error.
pub fn error_json(e: &Error) -> serde_json::Value {
    let kind = match e {
        Error::Validation { .. } => "validation",
        Error::Config(_) => "config",
        Error::UnsupportedInput(_) => "unsupported_input",
        Error::UnsupportedParameters(_) => "unsupported_parameters",
        Error::Unstable { .. } => "unstable",
        Error::Numerical(_) => "numerical",
        Error::DimensionMismatch { .. } => "dimension_mismatch",
        Error::DegenerateInput(_) => "degenerate_input",
        Error::InvalidModel(_) => "invalid_model",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    };
    let mut body = json!({ "kind": kind, "message": e.to_string(), "exit_code": e.exit_code() });
    match e {
        Error::Validation { field, .. } => body["field"] = json!(field),
        Error::Unstable { max_real_eigenvalue } => body["max_real_eigenvalue"] = json!(max_real_eigenvalue),
        _ => {}
    }
    json!({ "error": body })
}

/// Entry point of the binary; returns the process exit code.
pub fn main_entry() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = run(&cli).and_then(|text| match &cli.common.out {
        Some(path) => Ok(std::fs::write(path, text)?),
        None => Ok(std::io::stdout().write_all(text.as_bytes())?),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            e.exit_code()
        }
    }
}
