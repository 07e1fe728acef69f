use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ionmod::experiments::{
    run_analytic, run_bound, run_fig3, run_fig4, run_fig5, run_pbs, run_transfer_table,
    ExperimentConfig, ExperimentError, ExperimentResult,
};

/// Ion-channel modulator experiments. Every run writes CSV files into the
/// output directory.
#[derive(Parser, Debug)]
#[command(name = "ionmod", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set transmitter.N=500`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "out", global = true)]
    out: PathBuf,
    /// Base seed of the particle simulator.
    #[arg(long, env = "IONMOD_SEED", global = true)]
    seed: Option<u64>,
    /// Scale trials and grids down about tenfold.
    #[arg(long, global = true)]
    quick: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Channel opening probability under on-off keying voltages.
    Gating {
        /// Explicit waveform segment `<ms>:<mV>`; repeat for more segments.
        #[arg(long = "segment", value_name = "MS:MV")]
        segments: Vec<String>,
    },
    /// Average release rate and cumulative release.
    Analytic,
    /// Upper-bound series for the cumulative release.
    Bound {
        #[arg(long)]
        n_terms: Option<usize>,
        #[arg(long)]
        tail_tol: Option<f64>,
    },
    /// Particle-based Monte Carlo estimate of the release rate.
    Pbs {
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Number of histogram bins over the on interval.
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Analytic, particle and bound results side by side.
    Compare,
    /// Transfer-function values on the real axis and a vertical line.
    #[command(hide = true)]
    TransferTable,
}

fn segment_override(segments: &[String]) -> ExperimentResult<String> {
    let mut pairs = Vec::with_capacity(segments.len());
    for s in segments {
        let parsed = s.split_once(':').and_then(|(a, b)| {
            Some((a.trim().parse::<f64>().ok()?, b.trim().parse::<f64>().ok()?))
        });
        let (ms, mv) = parsed
            .ok_or_else(|| ExperimentError::Config(format!("segment `{s}` is not <ms>:<mV>")))?;
        pairs.push(format!("[{ms:?}, {mv:?}]"));
    }
    Ok(format!("modulation.segments=[{}]", pairs.join(", ")))
}

fn run(cli: Cli) -> ExperimentResult<Vec<PathBuf>> {
    let mut overrides = cli.common.overrides.clone();
    if cli.common.quick {
        overrides.push("quick=true".into());
    }
    match &cli.command {
        Command::Gating { segments } if !segments.is_empty() => {
            overrides.push(segment_override(segments)?)
        }
        Command::Bound { n_terms, tail_tol } => {
            if let Some(n) = n_terms {
                overrides.push(format!("numerics.n_terms={n}"));
            }
            if let Some(t) = tail_tol {
                overrides.push(format!("numerics.tail_tol={t:?}"));
            }
        }
        Command::Pbs { dt, trials, bins } => {
            if let Some(dt) = dt {
                overrides.push(format!("pbs.dt={dt:?}"));
            }
            if let Some(n) = trials {
                overrides.push(format!("pbs.trials={n}"));
            }
            if let Some(b) = bins {
                overrides.push(format!("pbs.bins={b}"));
            }
        }
        _ => {}
    }
    let mut cfg = ExperimentConfig::load(cli.common.config.as_deref(), &overrides)?;
    // Seeds span the full u64 range, wider than a TOML integer.
    if let Some(seed) = cli.common.seed {
        cfg.pbs.seed = seed;
    }
    let out = &cli.common.out;
    match cli.command {
        Command::Gating { .. } => run_fig3(&cfg, out),
        Command::Analytic => run_analytic(&cfg, out),
        Command::Bound { .. } => run_bound(&cfg, out),
        Command::Pbs { .. } => run_pbs(&cfg, out),
        Command::Compare => {
            let mut files = run_fig4(&cfg, out)?;
            files.extend(run_fig5(&cfg, out)?);
            Ok(files)
        }
        Command::TransferTable => run_transfer_table(&cfg, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("ionmod: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
