mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kagome_core::verify::Mutations;
use kagome_core::Error;
use serde_json::json;

use config::{Format, MethodName, RunConfig, OUTPUT_DIR_ENV};
use output::{Report, Sink};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Precondition(String),
    Resource(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Precondition(_) | CliError::Resource(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Precondition(_) => "precondition",
            CliError::Resource(_) => "resource",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Precondition(m) | CliError::Resource(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. }
            | Error::BetaNormalization { .. }
            | Error::Parse(_)
            | Error::DegenerateSize { .. }
            | Error::InvalidHexagon { .. }
            | Error::InvalidSite { .. } => CliError::Config(e.to_string()),
            Error::SizeLimit { .. } => CliError::Resource(e.to_string()),
            _ => CliError::Precondition(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "kagome", version, about = "Kagome Euler flat-band model: bands, geometry, states, entanglement")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// JSON run configuration; its fields override flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long = "L1", global = true)]
    l1: Option<usize>,
    #[arg(long = "L2", global = true)]
    l2: Option<usize>,
    /// torus or cylinder-open-a1
    #[arg(long, global = true)]
    boundary: Option<String>,
    /// Entanglement cut in cell columns.
    #[arg(long, global = true)]
    cut: Option<usize>,

    #[arg(long, global = true, allow_hyphen_values = true)]
    mu: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Twelve comma-separated numbers: re,im for each hexagon position.
    #[arg(long, global = true, allow_hyphen_values = true)]
    beta: Option<String>,

    #[arg(long, global = true)]
    grid: Option<usize>,
    #[arg(long, global = true)]
    fd_step: Option<f64>,
    #[arg(long, global = true, value_enum)]
    method: Option<MethodName>,
    /// d2xd1 or d1xd2
    #[arg(long, global = true)]
    orientation: Option<String>,
    #[arg(long, global = true)]
    eps_max: Option<f64>,

    #[arg(long, global = true)]
    tol_flat: Option<f64>,
    #[arg(long, global = true)]
    tol_gap: Option<f64>,
    #[arg(long, global = true)]
    tol_chi: Option<f64>,
    #[arg(long, global = true)]
    tol_volume: Option<f64>,
    #[arg(long, global = true)]
    tol_ideal: Option<f64>,
    #[arg(long, global = true)]
    tol_fidelity: Option<f64>,
    #[arg(long, global = true)]
    tol_residual: Option<f64>,
    #[arg(long, global = true)]
    tol_spectrum: Option<f64>,
    #[arg(long, global = true)]
    tol_metric: Option<f64>,

    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Print the configuration JSON schema and exit.
    #[arg(long)]
    print_schema: bool,

    /// Flip one map-tensor sign (mutation control).
    #[arg(long, global = true)]
    mutate_map_sign: bool,
    /// Flip the first gate sign of the circuit layout (mutation control).
    #[arg(long, global = true)]
    mutate_sigma: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Bloch bands, flatness and gap; cylinder spectrum with --boundary cylinder-open-a1
    Bands,
    /// Euler class, quantum metric and quantum volume
    Topology,
    /// Hexagon-product state against the PEPS evaluation
    State,
    /// Correlation-matrix and Schmidt entanglement spectra
    Entanglement,
    /// Spectrum of the circuit-transformed Hamiltonian
    Circuit,
    /// Many-body quantum metric on a twisted torus
    Metric,
    /// Every check in one verdict
    VerifyAll,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Bands => "bands",
            Command::Topology => "topology",
            Command::State => "state",
            Command::Entanglement => "entanglement",
            Command::Circuit => "circuit",
            Command::Metric => "metric",
            Command::VerifyAll => "verify-all",
        }
    }
}

fn from_str_value<T: serde::de::DeserializeOwned>(field: &str, s: &str) -> Result<T, CliError> {
    serde_json::from_value(json!(s)).map_err(|e| CliError::Config(format!("--{field}: {e}")))
}

fn parse_beta(s: &str) -> Result<[[f64; 2]; 6], CliError> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Config(format!("--beta: {e}")))?;
    if v.len() != 12 {
        return Err(CliError::Config(format!("--beta: expected 12 numbers, got {}", v.len())));
    }
    Ok(std::array::from_fn(|p| [v[2 * p], v[2 * p + 1]]))
}

fn flag_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut c = RunConfig::default();
    c.command = cli.command.map(|c| c.name().to_string());
    c.lattice.l1 = cli.l1;
    c.lattice.l2 = cli.l2;
    c.lattice.boundary = cli.boundary.as_deref().map(|s| from_str_value("boundary", s)).transpose()?;
    c.lattice.cut = cli.cut;
    c.model.mu = cli.mu;
    c.model.alpha = cli.alpha;
    c.model.beta = cli.beta.as_deref().map(parse_beta).transpose()?;
    c.numerics.grid = cli.grid;
    c.numerics.fd_step = cli.fd_step;
    c.numerics.method = cli.method;
    c.numerics.orientation = cli.orientation.as_deref().map(|s| from_str_value("orientation", s)).transpose()?;
    c.numerics.eps_max = cli.eps_max;
    let t = &mut c.numerics.tolerances;
    t.flat = cli.tol_flat;
    t.gap = cli.tol_gap;
    t.chi = cli.tol_chi;
    t.volume = cli.tol_volume;
    t.ideal = cli.tol_ideal;
    t.fidelity = cli.tol_fidelity;
    t.residual = cli.tol_residual;
    t.spectrum = cli.tol_spectrum;
    t.metric = cli.tol_metric;
    c.output.directory = cli.output_dir.clone();
    c.output.format = cli.format;
    c.validate().map_err(CliError::Config)?;
    Ok(c)
}

/// defaults < environment (output directory) < flags < config file
fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
        cfg.output.directory = Some(PathBuf::from(dir));
    }
    cfg = cfg.merged(flag_config(cli)?);
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let file = RunConfig::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let (Some(sub), Some(conf)) = (cli.command, &file.command) {
            if sub.name() != conf {
                return Err(CliError::Config(format!(
                    "subcommand {} conflicts with command {conf:?} in {}",
                    sub.name(),
                    path.display()
                )));
            }
        }
        cfg = cfg.merged(file);
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<Report, CliError> {
    let cfg = resolve(cli)?;
    let command = cfg
        .command
        .clone()
        .ok_or_else(|| CliError::Config("no command given (use a subcommand or the config's \"command\")".into()))?;
    let mutations = Mutations { map_sign_flip: cli.mutate_map_sign, sigma_flip: cli.mutate_sigma };
    let dir = cfg.output.directory.clone().unwrap_or_else(|| PathBuf::from("kagome-output"));
    let mut sink = Sink::new(&dir, cfg.format())?;
    let outcome = commands::run(&command, &cfg, &mutations, &mut sink)?;
    let mut report = Report::new(&command, outcome.invariants, outcome.data);
    report.files = sink.files().to_vec();
    report.files.push("summary.json".into());
    sink.json("summary.json", &report)?;
    Ok(report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.print_schema {
        print!("{}", config::SCHEMA);
        return ExitCode::SUCCESS;
    }
    match execute(&cli) {
        Ok(report) => {
            print!("{}", output::pretty(&report));
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            let doc = json!({
                "status": "error",
                "kind": e.kind(),
                "message": e.message(),
                "failed": [{ "invariant": e.kind(), "margin": "-inf" }],
            });
            print!("{}", output::pretty(&doc));
            eprintln!("kagome: {} error: {}", e.kind(), e.message());
            ExitCode::from(e.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_overrides_flags() {
        let dir = std::env::temp_dir().join(format!("kagome-cli-unit-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.json");
        std::fs::write(&path, r#"{"model": {"mu": -1}}"#).unwrap();
        let cli = Cli::parse_from(["kagome", "bands", "--mu", "0.5", "--alpha", "2", "--config", path.to_str().unwrap()]);
        let cfg = resolve(&cli).unwrap();
        assert_eq!(cfg.model.mu, Some(-1.0));
        assert_eq!(cfg.model.alpha, Some(2.0));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn beta_flag() {
        assert!(parse_beta("1,0,0,0").is_err());
        let b = parse_beta("1,0,0,0,0,0,0,0,0,0,0,-1").unwrap();
        assert_eq!(b[5], [0.0, -1.0]);
    }

    #[test]
    fn string_enums() {
        let cli = Cli::parse_from(["kagome", "entanglement", "--boundary", "cylinder-open-a1", "--orientation", "d1xd2"]);
        let c = flag_config(&cli).unwrap();
        assert_eq!(c.lattice.boundary, Some(kagome_core::Boundary::Cylinder));
        let bad = Cli::parse_from(["kagome", "bands", "--boundary", "sphere"]);
        assert!(matches!(flag_config(&bad), Err(CliError::Config(_))));
    }

    #[test]
    fn error_classes() {
        assert_eq!(CliError::from(Error::DegenerateSize { l1: 1, l2: 2 }).code(), 2);
        assert_eq!(CliError::from(Error::RequiresTorus).code(), 3);
        assert_eq!(CliError::from(Error::SizeLimit { what: "x", size: 2, limit: 1 }).code(), 3);
    }
}
