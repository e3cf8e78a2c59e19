use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use harq_thz::cli::{self, Metric};
use harq_thz::config::ExperimentConfig;
use harq_thz::optimizer::RateConstraints;
use harq_thz::par::{self, Execution};
use harq_thz::Error;

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "harq-thz", version, about = "Secure HARQ-IR over THz links: outage, throughput and rate design")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one metric over the SNR sweep and write CSV plus gnuplot script.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        metric: MetricArg,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Run the oracle cross-checks and write a pass/fail JSON report.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Optimize (R0, Rs) at every SNR point for every M.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        eps_c: f64,
        #[arg(long)]
        eps_e: f64,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Pco,
    Pso,
    Ltat,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Pco => Metric::Pco,
            MetricArg::Pso => Metric::Pso,
            MetricArg::Ltat => Metric::Ltat,
        }
    }
}

fn load(path: &Path, output_dir: Option<PathBuf>) -> Result<ExperimentConfig, ExitCode> {
    let mut cfg = ExperimentConfig::load(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    let workers = cfg.effective_workers().map_err(|e| usage(e.to_string()))?;
    par::init_workers(workers);
    Ok(cfg)
}

fn usage(msg: String) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_USAGE)
}

fn failure(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_FAIL)
}

fn report_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> Result<(), ExitCode> {
    let exec = Execution::default();
    match cli.command {
        Command::Sweep { config, metric, output_dir } => {
            let cfg = load(&config, output_dir)?;
            report_written(&cli::cmd_sweep(&cfg, metric.into(), exec).map_err(failure)?);
        }
        Command::Validate { config, output_dir } => {
            let cfg = load(&config, output_dir)?;
            let report = cli::cmd_validate(&cfg, exec).map_err(failure)?;
            let path = cli::write_validation(&cfg, &report).map_err(failure)?;
            for c in &report.checks {
                println!("{} {} {:.3e} {} {:.0e}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.measured, c.comparison, c.threshold);
            }
            println!("wrote {}", path.display());
            if !report.passed {
                return Err(ExitCode::from(EXIT_FAIL));
            }
        }
        Command::Optimize { config, eps_c, eps_e, output_dir } => {
            let constraints = RateConstraints { eps_c, eps_e };
            constraints.validate().map_err(|e| usage(e.to_string()))?;
            let cfg = load(&config, output_dir)?;
            report_written(&cli::cmd_optimize(&cfg, &constraints, exec).map_err(failure)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}
