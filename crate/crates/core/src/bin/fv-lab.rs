use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fvlab::cli::{dispatch, parse_config, RawConfig, EXIT_ERROR};

/// Monte Carlo laboratory for Fleming-Viot particle systems.
#[derive(Parser)]
#[command(name = "fv-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cone angles and Lipschitz thresholds as a `p,d,theta,threshold` table.
    ConeMath(Flags),
    /// Time-averaged empirical measure against the Dirichlet ground state.
    Qsd(Flags),
    /// Hitting probability against mean exit time.
    Harnack(Flags),
    /// Survival tail of exit times from a cone vertex.
    Excursion(Flags),
    /// Moments and jump chains of the finite-extinction counterexample.
    Extinction(Flags),
    /// Two-particle runs in a polygon.
    Polyhedral(Flags),
}

#[derive(Args)]
struct Flags {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for summary.json and CSV tables.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Domain literal as JSON, e.g. '{"type":"interval","a":0,"b":1}'.
    #[arg(long)]
    domain: Option<String>,
    /// Target set literal as JSON (harnack).
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    burn_in: Option<f64>,
    /// Number of particles (qsd).
    #[arg(long)]
    n: Option<usize>,
    /// Smaller population for the convergence-in-N comparison (qsd).
    #[arg(long)]
    n_small: Option<usize>,
    #[arg(long)]
    pairs: Option<usize>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    n_paths: Option<usize>,
    #[arg(long)]
    n_reps: Option<usize>,
    #[arg(long)]
    n_chains: Option<usize>,
    #[arg(long)]
    chain_length: Option<usize>,
    /// Start offset from the cone vertex (excursion).
    #[arg(long)]
    epsilon: Option<f64>,
    /// `strict` or `sequential` handling of coincident boundary hits.
    #[arg(long)]
    resolution: Option<String>,
    /// Homogeneity indices (cone-math), comma separated.
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    /// Dimensions (cone-math), comma separated.
    #[arg(long, value_delimiter = ',')]
    d: Option<Vec<usize>>,
    /// Populations whose Lipschitz threshold to tabulate (cone-math).
    #[arg(long, value_delimiter = ',')]
    n_values: Option<Vec<usize>>,
}

fn json_arg(field: &str, v: Option<String>) -> Result<Option<serde_json::Value>, String> {
    v.map(|s| serde_json::from_str(&s).map_err(|e| format!("config: {field}: {e}"))).transpose()
}

fn raw(experiment: &str, f: Flags) -> Result<(Option<PathBuf>, RawConfig), String> {
    let cfg = RawConfig {
        experiment: Some(experiment.to_string()),
        domain: json_arg("domain", f.domain)?,
        target: json_arg("target", f.target)?,
        n: f.n,
        dt: f.dt,
        horizon: f.horizon,
        burn_in: f.burn_in,
        n_paths: f.n_paths,
        n_reps: f.n_reps,
        seed: f.seed,
        out: f.out,
        threads: f.threads,
        bins: f.bins,
        n_small: f.n_small,
        pairs: f.pairs,
        epsilon: f.epsilon,
        n_chains: f.n_chains,
        chain_length: f.chain_length,
        resolution: f.resolution,
        p: f.p,
        d: f.d,
        n_values: f.n_values,
        ..Default::default()
    };
    Ok((f.config, cfg))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, flags) = match cli.command {
        Command::ConeMath(f) => ("cone-math", f),
        Command::Qsd(f) => ("qsd", f),
        Command::Harnack(f) => ("harnack", f),
        Command::Excursion(f) => ("excursion", f),
        Command::Extinction(f) => ("extinction", f),
        Command::Polyhedral(f) => ("polyhedral", f),
    };
    let print_table = name == "cone-math";
    let config = raw(name, flags).and_then(|(file, raw)| parse_config(file.as_deref(), raw).map_err(|e| e.to_string()));
    let cfg = match config {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ERROR as u8);
        }
    };
    let code = dispatch(&cfg);
    if print_table && code != EXIT_ERROR {
        if let Ok(table) = std::fs::read_to_string(cfg.out.join("cone_math.csv")) {
            print!("{table}");
        }
    }
    ExitCode::from(code as u8)
}
