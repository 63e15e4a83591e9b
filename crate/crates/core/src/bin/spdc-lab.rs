use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spdc_lab::lab::{
    exit_code, run_scenario, sweep, Config, Product, Report, RunOptions, Scenario,
};
use spdc_lab::{Error, Result};

/// Photon-statistics lab for heralded SPDC sources.
#[derive(Parser)]
#[command(name = "spdc-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form curves of the source model.
    Analytic(Common),
    /// Smeared curves and plateau predictions.
    Smear(Common),
    /// Smeared triple-coincidence surface.
    Surface(Common),
    /// Simulate a run and write `events.evt`.
    Simulate(Common),
    /// Count coincidences in an event file and form the estimators.
    Count {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        events: PathBuf,
    },
    /// Thermal against Poisson source on the conditioned coherence.
    Compare(Common),
    /// Repeat products while one key takes each listed value.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        key: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// Products to run; defaults to `run.outputs`.
        #[arg(long, value_delimiter = ',')]
        product: Vec<String>,
    },
    /// Every product listed in `run.outputs`.
    Run(Common),
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("SPDC_LAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Error::Config(format!(
            "SPDC_LAB_THREADS must be a positive integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

fn scenario(common: &Common, outputs: Option<Vec<Product>>) -> Result<Scenario> {
    let mut s = Scenario::from_config(&Config::load(&common.config)?)?;
    if let Some(outputs) = outputs {
        s.outputs = outputs;
    }
    Ok(s)
}

fn single(common: &Common, product: Product, events: Option<PathBuf>) -> Result<Vec<Report>> {
    let s = scenario(common, Some(vec![product]))?;
    let opts = RunOptions {
        out_dir: common.out.clone(),
        events,
    };
    Ok(vec![run_scenario(&s, &opts)?])
}

fn execute(cli: Cli) -> Result<Vec<Report>> {
    configure_threads()?;
    match cli.command {
        Command::Analytic(c) => single(&c, Product::Analytic, None),
        Command::Smear(c) => single(&c, Product::Smear, None),
        Command::Surface(c) => single(&c, Product::Surface, None),
        Command::Simulate(c) => single(&c, Product::Simulate, None),
        Command::Count { common, events } => single(&common, Product::Count, Some(events)),
        Command::Compare(c) => single(&c, Product::Compare, None),
        Command::Sweep {
            common,
            key,
            values,
            product,
        } => {
            let outputs = if product.is_empty() {
                None
            } else {
                Some(
                    product
                        .iter()
                        .map(|p| p.parse())
                        .collect::<Result<Vec<Product>>>()?,
                )
            };
            let s = scenario(&common, outputs)?;
            sweep(
                &s,
                &key,
                &values,
                &RunOptions {
                    out_dir: common.out,
                    events: None,
                },
            )
        }
        Command::Run(c) => {
            let s = scenario(&c, None)?;
            Ok(vec![run_scenario(
                &s,
                &RunOptions {
                    out_dir: c.out,
                    events: None,
                },
            )?])
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(reports) => {
            for report in reports {
                for line in &report.summary {
                    println!("{line}");
                }
                for path in &report.written {
                    println!("wrote {}", path.display());
                }
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
