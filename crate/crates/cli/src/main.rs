use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stochpred::bounds::BoundFamily;
use stochpred::data::{load_csv, read_header, Schema};
use stochpred::experiment::{emit_reports, run, ExperimentConfig};
use stochpred::predictor::ExcitationCheck;
use stochpred::synth::{stream_rng, uniform_inputs, TruthSystem};
use stochpred::verify::{dataset_from_env, run_all, Status};
use stochpred::{Error, Result};

#[derive(Parser)]
#[command(
    name = "stochpred",
    version,
    about = "Data-driven stochastic output prediction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rolling-horizon prediction experiment on a CSV dataset.
    Run(Box<RunArgs>),
    /// Simulate a dataset from a truth-system JSON file.
    Synth(SynthArgs),
    /// Run the acceptance property suite.
    Check(CheckArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    data: PathBuf,
    /// JSON experiment config; inline flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "T")]
    data_len: Option<usize>,
    #[arg(long = "N")]
    horizon: Option<usize>,
    #[arg(long)]
    lag: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Comma-separated subset of cheb2, cheb4, gauss.
    #[arg(long, value_delimiter = ',')]
    bounds: Option<Vec<BoundFamily>>,
    /// Structured-disturbance columns to keep; `none` drops all of them.
    #[arg(long, value_delimiter = ',')]
    ws_channels: Option<Vec<String>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_excitation)]
    excitation: Option<ExcitationCheck>,
    #[arg(long)]
    max_scenarios: Option<usize>,
    /// Run scenarios one after another.
    #[arg(long)]
    serial: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Input columns (default: header names starting with `u`).
    #[arg(long, value_delimiter = ',')]
    u_cols: Option<Vec<String>>,
    /// Structured-disturbance columns (default: names starting with `ws`).
    #[arg(long, value_delimiter = ',')]
    ws_cols: Option<Vec<String>>,
    /// Output columns (default: names starting with `y`).
    #[arg(long, value_delimiter = ',')]
    y_cols: Option<Vec<String>>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    system: PathBuf,
    #[arg(long)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 900.0)]
    period: f64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    /// Dataset for criterion 9 (overrides the environment variable).
    #[arg(long)]
    dataset: Option<PathBuf>,
}

fn parse_excitation(s: &str) -> std::result::Result<ExcitationCheck, String> {
    match s {
        "strict" => Ok(ExcitationCheck::Strict),
        "stack" => Ok(ExcitationCheck::Stack),
        other => Err(format!(
            "unknown excitation check `{other}` (strict or stack)"
        )),
    }
}

fn experiment_config(a: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = a.data_len {
        cfg.data_len = v;
    }
    if let Some(v) = a.horizon {
        cfg.horizon = v;
    }
    if let Some(v) = a.lag {
        cfg.lag = v;
    }
    if let Some(v) = a.stride {
        cfg.stride = v;
    }
    if let Some(v) = a.gamma {
        cfg.gamma = v;
    }
    if let Some(v) = &a.bounds {
        cfg.bounds = v.clone();
    }
    if let Some(v) = &a.ws_channels {
        let names: Vec<String> = v
            .iter()
            .filter(|s| !s.is_empty() && s.as_str() != "none")
            .cloned()
            .collect();
        cfg.ws_channels = Some(names);
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.excitation {
        cfg.excitation = v;
    }
    if a.max_scenarios.is_some() {
        cfg.max_scenarios = a.max_scenarios;
    }
    if a.serial {
        cfg.parallel = false;
    }
    if a.out.is_some() {
        cfg.out = a.out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_run(a: RunArgs) -> Result<ExitCode> {
    let cfg = experiment_config(&a)?;
    let header = read_header(&a.data)?;
    let inferred = Schema::infer(&header);
    let schema = Schema {
        u: a.u_cols.clone().unwrap_or(inferred.u),
        w_s: a.ws_cols.clone().unwrap_or(inferred.w_s),
        y: a.y_cols.clone().unwrap_or(inferred.y),
    };
    let ds = load_csv(&a.data, &schema)?;
    let out = run(&cfg, &ds)?;
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    emit_reports(&out, &dir)?;
    println!("{}", serde_json::to_string_pretty(&out.summary)?);
    Ok(ExitCode::SUCCESS)
}

fn cmd_synth(a: SynthArgs) -> Result<ExitCode> {
    if a.steps == 0 {
        return Err(Error::Validation("--steps must be at least 1".into()));
    }
    let sys = TruthSystem::load(&a.system)?;
    let mut rng = stream_rng(a.seed, "inputs");
    let inputs = uniform_inputs(a.steps, sys.n_u() + sys.n_ws(), &mut rng);
    let sim = sys.simulate(&inputs, a.seed, a.period)?;
    sim.dataset.write_csv(&a.out)?;
    println!(
        "{}",
        serde_json::json!({ "out": a.out, "steps": a.steps, "n_u": sys.n_u(), "n_ws": sys.n_ws(), "n_y": sys.n_y() })
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_check(a: CheckArgs) -> Result<ExitCode> {
    let outcomes = run_all(a.dataset.or_else(dataset_from_env).as_deref());
    for o in &outcomes {
        println!("{o}");
    }
    let failed = outcomes.iter().any(|o| o.status == Status::Fail);
    Ok(if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run(a) => cmd_run(*a),
        Command::Synth(a) => cmd_synth(a),
        Command::Check(a) => cmd_check(a),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({ "error": e.kind(), "message": e.to_string() })
            );
            ExitCode::from(2)
        }
    }
}
