use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nsbandit::confidence::{default_lambda, default_lookback, tune_gamma, tune_window_restart, Setting};
use nsbandit::glm::{link_constants, Link};
use nsbandit::harness::{bench, run_to_files, verify, ExperimentConfig};
use nsbandit::Error;

#[derive(Parser)]
#[command(name = "nsbandit", version, about = "Non-stationary parametric bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        /// Base seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        /// Write elapsed_ns = 0 so the CSV is byte-reproducible.
        #[arg(long)]
        no_timing: bool,
    },
    /// Print the tuned discount factor, regularizer, window and restart period.
    Tune {
        setting: Setting,
        #[arg(long = "T")]
        horizon: usize,
        #[arg(long = "d")]
        dim: usize,
        #[arg(long, default_value_t = 0.0)]
        path_length: f64,
        /// Number of change points (piecewise setting).
        #[arg(long, default_value_t = 0)]
        changes: usize,
        #[arg(long = "S", default_value_t = 1.0)]
        s: f64,
        #[arg(long = "L", default_value_t = 1.0)]
        l: f64,
    },
    /// Run the built-in invariant checks.
    Verify {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Compare per-round wall time of the linear policies.
    Bench {
        #[arg(long = "T", default_value_t = 6000)]
        horizon: usize,
        #[arg(long = "d", default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 50)]
        arms: usize,
        #[arg(long, default_value_t = 3)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn exit_code(e: &Error) -> ExitCode {
    match e {
        Error::NonConvergence { .. } | Error::NotPositiveDefinite => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn tune(setting: Setting, horizon: usize, dim: usize, path_length: f64, changes: usize, s: f64, l: f64) -> nsbandit::Result<()> {
    let link = if setting == Setting::Lb { Link::IDENTITY } else { Link::LOGISTIC };
    let c = link_constants(link, s, l, 0.5, 1.0)?;
    let measure = if setting == Setting::ScbPw { changes as f64 } else { path_length };
    let gamma = tune_gamma(setting, horizon, dim, measure, c.k_mu, c.c_mu)?;
    println!("setting   {setting}");
    println!("k_mu      {}", c.k_mu);
    println!("c_mu      {}", c.c_mu);
    println!("gamma     {gamma}");
    println!("lambda    {}", default_lambda(setting, dim, horizon, c.c_mu));
    println!("w = H     {}", tune_window_restart(dim, horizon, path_length));
    if setting == Setting::ScbPw {
        println!("D         {}", default_lookback(horizon, gamma));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, trials, seed, no_timing } => (|| {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(dir) = out {
                cfg.output.dir = dir;
            }
            if let Some(n) = trials {
                cfg.n_trials = n;
            }
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            if no_timing {
                cfg.record_timing = false;
            }
            cfg.validate()?;
            let summary = run_to_files(&cfg)?;
            for p in &summary.policies {
                println!(
                    "{:<20} regret {:>12.3} ± {:<10.3} time/run {:.3}s",
                    p.policy, p.mean_final_regret, p.std_final_regret, p.mean_wall_time_s
                );
            }
            println!("wrote {} and {}", cfg.output.csv_path().display(), cfg.output.summary_path().display());
            Ok(())
        })(),
        Command::Tune { setting, horizon, dim, path_length, changes, s, l } => {
            tune(setting, horizon, dim, path_length, changes, s, l)
        }
        Command::Verify { seed } => {
            let checks = verify::run_checks(seed);
            let mut failed = false;
            for c in &checks {
                println!("[{}] {} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed |= !c.passed;
            }
            if failed {
                return ExitCode::from(3);
            }
            Ok(())
        }
        Command::Bench { horizon, dim, arms, trials, seed } => {
            let cfg = bench::bench_config(horizon, dim, arms, trials, seed);
            bench::run_bench(&cfg).map(|report| println!("{report}"))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
