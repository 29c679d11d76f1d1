//! `collapse-lab`: command-line driver. Exit codes: 0 success, 1 runtime
//! failure, 2 config error. Failures print a JSON error object on stderr.

mod commands;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use collapse_core::profiles::Fidelity;

#[derive(Parser)]
#[command(name = "collapse-lab", version, about = "Radial damped NLS collapse laboratory")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Model and profile options shared by the stationary commands. Values given
/// here override the config file.
#[derive(Args, Debug, Clone)]
pub struct ModelOpts {
    /// JSON experiment config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub sigma1: Option<f64>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, value_parser = parse_fidelity)]
    pub fidelity: Option<Fidelity>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_fidelity(s: &str) -> Result<Fidelity, String> {
    match s {
        "zeroth-order" | "zeroth" | "0" => Ok(Fidelity::ZerothOrder),
        "first-order" | "first" | "1" => Ok(Fidelity::FirstOrder),
        _ => Err(format!("unknown fidelity {s:?} (zeroth-order | first-order)")),
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Ground state Q on the profile grid.
    Groundstate(ModelOpts),
    /// Collapse core Q_b, its localization error and Pohozaev check.
    Profile {
        #[command(flatten)]
        model: ModelOpts,
        #[arg(long)]
        b: Option<f64>,
    },
    /// Outgoing radiation ζ_b and the flux constant Γ_b.
    Radiation {
        #[command(flatten)]
        model: ModelOpts,
        #[arg(long)]
        b: Option<f64>,
    },
    /// (b, Γ_b) table with the fitted slope of ln Γ_b against 1/b.
    RadiationTable {
        #[command(flatten)]
        model: ModelOpts,
        /// Comma-separated b values.
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.3,0.35,0.4")]
        bs: Vec<f64>,
    },
    /// Time evolution with tracking, fits and audit.
    Evolve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Modulation decomposition of a stored field.
    Decompose {
        #[arg(long)]
        config: PathBuf,
        /// Field file (.csv or .bin).
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        b: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        gamma: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parameter sweep from the config's sweep block.
    Scan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Recompute fits from a finished run directory.
    Fit {
        #[arg(long)]
        run: PathBuf,
    },
    /// Documented defaults of every config field.
    ConfigSchema {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Groundstate(m) => commands::groundstate(&m),
        Cmd::Profile { model, b } => commands::profile(&model, b),
        Cmd::Radiation { model, b } => commands::radiation(&model, b),
        Cmd::RadiationTable { model, bs } => commands::radiation_table(&model, &bs),
        Cmd::Evolve { config, out } => commands::evolve(&config, out),
        Cmd::Decompose { config, field, b, lambda, gamma, out } => commands::decompose(&config, &field, b, lambda, gamma, out),
        Cmd::Scan { config, out, workers } => commands::scan(&config, out, workers),
        Cmd::Fit { run } => commands::fit(&run),
        Cmd::ConfigSchema { out } => commands::config_schema(out),
    };
    match res {
        Ok(v) => {
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "{}", serde_json::to_string_pretty(&v).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let (code, obj) = commands::error_report(&e);
            eprintln!("{obj}");
            ExitCode::from(code)
        }
    }
}
