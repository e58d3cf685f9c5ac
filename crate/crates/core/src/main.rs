use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use ratiotrace::experiment::{run_experiment, write_outputs, ExperimentConfig};
use ratiotrace::finder::{AnswerTuple, SearchDiagnostics, TupleAccount};
use ratiotrace::ledger::logfile;
use ratiotrace::oracle::{self, DEFAULT_LIMIT};
use ratiotrace::snapshot::replay_records;
use ratiotrace::{
    find_accounts, Amount, ExchangeRates, FinderParams, Portfolio, SimConfig, Snapshot,
};

#[derive(Parser)]
#[command(
    name = "ratiotrace",
    version,
    about = "Ledger simulation and portfolio-ratio account matching"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a multi-currency world and write its transaction log.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        ground_truth: Option<PathBuf>,
    },
    /// Replay a log up to a turn and write the balance snapshot.
    Snapshot {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        time: u32,
        #[arg(long)]
        rates: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Search a snapshot for the accounts matching a portfolio.
    Find {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        portfolio: PathBuf,
        #[arg(long)]
        threshold: Amount,
        #[arg(long)]
        top: Option<usize>,
        /// Write the result here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustively score every account tuple.
    Oracle {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        portfolio: PathBuf,
        #[arg(long, default_value_t = DEFAULT_LIMIT)]
        limit: u128,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a portfolio-size sweep and write CSV/JSON tables.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Serialize)]
struct ScoredTuple<'a> {
    accounts: &'a [TupleAccount],
    score: Amount,
    normalized_score: Amount,
}

impl<'a> From<&'a AnswerTuple> for ScoredTuple<'a> {
    fn from(a: &'a AnswerTuple) -> Self {
        ScoredTuple {
            accounts: &a.accounts,
            score: a.score,
            normalized_score: a.normalized_score(),
        }
    }
}

#[derive(Serialize)]
struct FindReport<'a> {
    best: Option<ScoredTuple<'a>>,
    retained: Vec<ScoredTuple<'a>>,
    diagnostics: &'a SearchDiagnostics,
}

#[derive(Serialize)]
struct OracleReport<'a> {
    best: Option<ScoredTuple<'a>>,
    tuples_examined: u128,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            fs::write(p, format!("{text}\n")).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate {
            config,
            out,
            ground_truth,
        } => {
            let config = SimConfig::from_json(&read(&config)?)?;
            let mut writer = BufWriter::new(File::create(&out)?);
            let users = ratiotrace::ledger::simulate_into(&config, |r| {
                logfile::write_record(&mut writer, r)
            })?;
            writer.flush()?;
            if let Some(path) = ground_truth {
                fs::write(&path, logfile::ground_truth_to_json(&users)? + "\n")?;
            }
        }
        Command::Snapshot {
            log,
            time,
            rates,
            out,
        } => {
            let records = logfile::read_log(BufReader::new(File::open(&log)?))?;
            let rates = match rates {
                Some(p) => ExchangeRates::from_json(&read(&p)?)?,
                None => ExchangeRates::unit(records.iter().map(|r| r.currency)),
            };
            let snap = replay_records(&records, time, &rates)?;
            fs::write(&out, snap.to_json()? + "\n")?;
        }
        Command::Find {
            snapshot,
            portfolio,
            threshold,
            top,
            out,
        } => {
            let snap = Snapshot::from_json(&read(&snapshot)?)?;
            let portfolio = Portfolio::from_json(&read(&portfolio)?)?;
            let mut params = FinderParams::with_threshold(threshold);
            params.max_answers = top;
            let outcome = find_accounts(&snap, &portfolio, &params)?;
            let report = FindReport {
                best: outcome.best.as_ref().map(Into::into),
                retained: outcome.retained.iter().map(Into::into).collect(),
                diagnostics: &outcome.diagnostics,
            };
            emit(out.as_deref(), &serde_json::to_string_pretty(&report)?)?;
        }
        Command::Oracle {
            snapshot,
            portfolio,
            limit,
            out,
        } => {
            let snap = Snapshot::from_json(&read(&snapshot)?)?;
            let portfolio = Portfolio::from_json(&read(&portfolio)?)?;
            let result = oracle::exhaustive_best(&snap, &portfolio, limit)?;
            let report = OracleReport {
                best: result.best.as_ref().map(Into::into),
                tuples_examined: result.tuples_examined,
            };
            emit(out.as_deref(), &serde_json::to_string_pretty(&report)?)?;
        }
        Command::Experiment { config, out_dir } => {
            let config = ExperimentConfig::from_json(&read(&config)?)?;
            let result = run_experiment(&config)?;
            write_outputs(&result, &out_dir)?;
            for a in &result.aggregates {
                let mean = a
                    .mean_normalized_score
                    .map_or_else(|| "-".to_string(), |s| s.to_string());
                eprintln!(
                    "m={} queries={} misses={} missing_rate={} mean_normalized_score={mean}",
                    a.m, a.queries, a.misses, a.missing_rate
                );
            }
        }
    }
    Ok(())
}
