use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use revuz_core::estimators::{self, McConfig};
use revuz_core::harness::literal::{parse_functional, parse_measure, parse_weighting};
use revuz_core::harness::{self, HarnessConfig};
use revuz_core::simulate::{self, SimConfig};
use revuz_core::{kernels, Error, ProcessModel};

/// Exit code when an experiment verdict is fail or inconclusive.
const EXIT_VERDICT: u8 = 1;
/// Exit code for bad arguments, literals or configuration.
const EXIT_USAGE: u8 = 2;
/// Exit code for numerical or I/O failures.
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "revuz-lab",
    version,
    about = "Energy metric and PCAF convergence experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scripted experiment (or `all`) and write <out>/<experiment>.{csv,json}.
    Run(RunArgs),
    /// Print ρ(μ, ν) for two measure literals.
    Rho(RhoArgs),
    /// Monte Carlo estimate of a path functional under a weighting.
    Estimate(EstimateArgs),
    /// Dump one simulated path as CSV (t, x, alive).
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// ex1 … ex6, roundtrip, or all
    experiment: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<String>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    /// `key = value` file; its settings override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Args)]
struct RhoArgs {
    #[arg(long, default_value = "free_bm")]
    model: String,
    #[arg(long)]
    mu: String,
    #[arg(long, default_value = "zero")]
    nu: String,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    model: String,
    /// e.g. `m[-8,9]`, `kappa[0.2,0.9]`, `nu0`, `point(0.5)` or JSON
    #[arg(long)]
    weighting: String,
    /// e.g. `discounted_sq:indicator(0,1)`, `hitting(1)` or JSON
    #[arg(long)]
    functional: String,
    #[arg(long, default_value = "100000")]
    paths: String,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    out: Format,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    model: String,
    #[arg(long)]
    x0: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Path index within the seed's stream family.
    #[arg(long, default_value_t = 0)]
    index: u64,
    #[arg(long)]
    no_bridge: bool,
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse(_) | Error::Domain(_) | Error::Unsupported(_) | Error::Json(_) => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

fn run(args: RunArgs) -> Result<bool, Error> {
    let mut cfg = HarnessConfig::default();
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(p) = &args.paths {
        cfg.set("paths", p)?;
    }
    if let Some(dt) = args.dt {
        cfg.dt = dt;
    }
    if args.workers.is_some() {
        cfg.workers = args.workers;
    }
    if let Some(path) = &args.config {
        cfg.apply_text(&std::fs::read_to_string(path)?)?;
    }
    cfg.validate()?;
    let names: Vec<&str> = if args.experiment == "all" {
        harness::EXPERIMENTS.to_vec()
    } else {
        vec![args.experiment.as_str()]
    };
    let mut all_ok = true;
    for name in names {
        let report = harness::run(name, &cfg)?;
        let (csv, json) = report.save(&args.out)?;
        print!("{}", report.summary());
        println!("  wrote {} and {}", csv.display(), json.display());
        all_ok &= report.ok();
    }
    Ok(all_ok)
}

fn rho(args: RhoArgs) -> Result<(), Error> {
    let model: ProcessModel = args.model.parse()?;
    let mu = parse_measure(&args.mu)?;
    let nu = parse_measure(&args.nu)?;
    println!("{}", kernels::rho(model, &mu, &nu, args.tol)?);
    Ok(())
}

fn estimate(args: EstimateArgs) -> Result<(), Error> {
    let model: ProcessModel = args.model.parse()?;
    let w = parse_weighting(&args.weighting)?;
    let f = parse_functional(&args.functional, args.dt.sqrt())?;
    let cfg = McConfig {
        dt: args.dt,
        horizon: args.horizon,
        alpha: args.alpha,
        seed: args.seed,
        paths: revuz_core::harness::config::parse_count(&args.paths)?,
        workers: args.workers,
        ..McConfig::default()
    };
    let e = estimators::expect(model, &w, &f, &cfg)?;
    let name = format!("{}|{}", args.weighting, args.functional);
    match args.out {
        Format::Json => {
            let row = serde_json::json!({
                "name": name,
                "mean": e.mean,
                "std_error": e.std_error,
                "n": e.n,
                "tail_bound": e.tail_bound,
                "seed": e.seed,
            });
            println!("{}", serde_json::to_string_pretty(&row)?);
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            let rec = |w: &mut csv::Writer<_>, r: [String; 6]| {
                w.write_record(r).map_err(|e| Error::Io(std::io::Error::other(e)))
            };
            rec(
                &mut w,
                ["name", "mean", "std_error", "n", "tail_bound", "seed"].map(String::from),
            )?;
            rec(
                &mut w,
                [
                    name,
                    e.mean.to_string(),
                    e.std_error.to_string(),
                    e.n.to_string(),
                    e.tail_bound.to_string(),
                    e.seed.to_string(),
                ],
            )?;
            w.flush()?;
        }
    }
    Ok(())
}

fn simulate_cmd(args: SimulateArgs) -> Result<(), Error> {
    let model: ProcessModel = args.model.parse()?;
    let cfg = SimConfig {
        dt: args.dt,
        horizon: args.horizon,
        bridge_correction: !args.no_bridge,
        seed: args.seed,
        path_index: args.index,
    };
    let mut rng = simulate::rng_for(args.seed, args.index);
    let path = simulate::simulate_path(model, args.x0, &cfg, &mut rng)?;
    let text = path.to_csv();
    match args.out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a).map(|ok| if ok { 0 } else { EXIT_VERDICT }),
        Command::Rho(a) => rho(a).map(|_| 0),
        Command::Estimate(a) => estimate(a).map(|_| 0),
        Command::Simulate(a) => simulate_cmd(a).map(|_| 0),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("revuz-lab: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
