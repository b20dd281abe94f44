use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use pslab_core::harness::{criterion, find, invariant_suite, run_experiment, ExperimentConfig, OutputDir, ResultRecord, CRITERIA, EXPERIMENTS};

#[derive(Parser)]
#[command(name = "pslab", version, about = "Phase-space propagator experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and append its record to the output directory.
    Run {
        experiment: String,
        /// JSON config; the registered default is used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// List registered experiments.
    List,
    /// Print the default config of an experiment.
    Config { experiment: String },
    /// Run a verification suite.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Invariants,
    Acceptance,
}

fn threads(k: Option<usize>) -> Result<()> {
    if let Some(k) = k {
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global().context("configuring the thread pool")?;
    }
    Ok(())
}

fn line(rec: &ResultRecord) -> String {
    format!("{:<18} {} ({:.2}s) digest {}", rec.experiment, if rec.pass { "PASS" } else { "FAIL" }, rec.wall_clock_s, &rec.digest[..12])
}

fn write_all(out: Option<PathBuf>, records: &[ResultRecord]) -> Result<()> {
    if let Some(dir) = out {
        let out = OutputDir::create(&dir).with_context(|| format!("creating {}", dir.display()))?;
        for rec in records {
            out.append(rec)?;
        }
        info!("wrote {} record(s) to {}", records.len(), dir.display());
    }
    Ok(())
}

fn run() -> Result<bool> {
    match Cli::parse().command {
        Command::List => {
            for e in EXPERIMENTS {
                println!("{:<18} {}", e.name, e.summary);
            }
            Ok(true)
        }
        Command::Config { experiment } => {
            let info = find(&experiment).with_context(|| format!("unknown experiment {experiment:?}"))?;
            println!("{}", (info.default_config)().to_json());
            Ok(true)
        }
        Command::Run { experiment, config, out, seed, threads: k } => {
            threads(k)?;
            let cfg = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    ExperimentConfig::from_json(&text)?
                }
                None => (find(&experiment).with_context(|| format!("unknown experiment {experiment:?}"))?.default_config)(),
            };
            if cfg.experiment != experiment {
                bail!("config is for {:?}, not {experiment:?}", cfg.experiment);
            }
            let out = out.or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("results"));
            let rec = run_experiment(&cfg, seed)?;
            println!("{}", line(&rec));
            for c in rec.failures() {
                println!("  {} = {:e} fails {} {:?}", c.name, c.value, c.relation, c.bound);
            }
            write_all(Some(out), std::slice::from_ref(&rec))?;
            Ok(rec.pass)
        }
        Command::Verify { suite, out, threads: k } => {
            threads(k)?;
            match suite {
                Suite::Invariants => {
                    let records = invariant_suite()?;
                    records.iter().for_each(|r| println!("{}", line(r)));
                    write_all(out, &records)?;
                    Ok(records.iter().all(|r| r.pass))
                }
                Suite::Acceptance => {
                    let mut all = true;
                    let mut records = Vec::new();
                    for spec in CRITERIA {
                        let outcome = criterion(spec.id)?;
                        println!("{outcome}");
                        all &= outcome.pass;
                        records.extend(outcome.records);
                    }
                    write_all(out, &records)?;
                    Ok(all)
                }
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
