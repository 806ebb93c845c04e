//! Batch runner: `infolock <subcommand> --config <path> [--seed <u64>]
//! [--out <path>] [--threads <n>]`.
//!
//! Exit status is 0 when every verdict passes, 1 when some verdict fails and
//! 2 for configuration errors.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use serde::Serialize;
use serde_json::Value;

use crate::experiments::{Aggregate, Experiment, Outcome, Record, Verdict, SUBCOMMANDS};
use crate::haar::RngSpec;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAILED_VERDICT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "infolock",
    version,
    about = "Seeded locking and decoding experiments"
)]
pub struct Args {
    #[arg(value_parser = SUBCOMMANDS)]
    pub subcommand: String,
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `master_seed` from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report path; a `.csv` sidecar is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub master_seed: u64,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("config error: {0}")]
pub struct ConfigError(pub String);

impl ExperimentConfig {
    /// Top-level keys: `master_seed` (unless `seed` is given), optional
    /// `subcommand` and `output`, and the `[params]` table.
    pub fn parse(subcommand: &str, text: &str, seed: Option<u64>) -> Result<Self, ConfigError> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| ConfigError(e.message().to_string()))?;
        if let Some(v) = table.remove("subcommand") {
            match v.as_str() {
                Some(s) if s == subcommand => {}
                _ => {
                    return Err(ConfigError(format!(
                        "key `subcommand` = {v} does not match `{subcommand}`"
                    )))
                }
            }
        }
        let file_seed = match table.remove("master_seed") {
            Some(toml::Value::Integer(i)) if i >= 0 => Some(i as u64),
            Some(v) => {
                return Err(ConfigError(format!(
                    "key `master_seed` must be a nonnegative integer, got {v}"
                )))
            }
            None => None,
        };
        let master_seed = seed
            .or(file_seed)
            .ok_or_else(|| ConfigError("missing required key `master_seed`".into()))?;
        let output = match table.remove("output") {
            Some(toml::Value::String(s)) => Some(PathBuf::from(s)),
            Some(v) => {
                return Err(ConfigError(format!(
                    "key `output` must be a string, got {v}"
                )))
            }
            None => None,
        };
        let params = match table.remove("params") {
            Some(toml::Value::Table(t)) => t,
            Some(_) => return Err(ConfigError("key `params` must be a table".into())),
            None => return Err(ConfigError("missing required key `params`".into())),
        };
        if let Some(k) = table.keys().next() {
            return Err(ConfigError(format!("unknown key `{k}`")));
        }
        let experiment = Experiment::from_params(subcommand, params).map_err(ConfigError)?;
        experiment
            .validate()
            .map_err(|e| ConfigError(e.to_string()))?;
        Ok(ExperimentConfig {
            experiment,
            master_seed,
            output,
        })
    }
}

/// Deterministic part of a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportBody {
    pub subcommand: String,
    pub master_seed: u64,
    pub config: Value,
    pub records: Vec<Record>,
    pub aggregates: BTreeMap<String, Aggregate>,
    pub bounds: BTreeMap<String, f64>,
    pub verdicts: Vec<Verdict>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub body: ReportBody,
    pub wall_clock_seconds: f64,
}

impl ExperimentReport {
    pub fn exit_code(&self) -> i32 {
        if self.body.passed {
            EXIT_PASS
        } else {
            EXIT_FAILED_VERDICT
        }
    }
}

pub fn execute(
    cfg: &ExperimentConfig,
    threads: Option<usize>,
) -> Result<ExperimentReport, ConfigError> {
    let start = Instant::now();
    let rng = RngSpec::new(cfg.master_seed, 0);
    let run = || cfg.experiment.run(&rng);
    let outcome: Outcome = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| ConfigError(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }
    .map_err(|e| ConfigError(e.to_string()))?;
    let passed = outcome.passed();
    let body = ReportBody {
        subcommand: cfg.experiment.name().to_string(),
        master_seed: cfg.master_seed,
        config: serde_json::to_value(&cfg.experiment).expect("params serialize"),
        records: outcome.records,
        aggregates: outcome.aggregates,
        bounds: outcome.bounds,
        verdicts: outcome.verdicts,
        passed,
    };
    Ok(ExperimentReport {
        body,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}

/// `%.12g`-style formatting.
pub fn format_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    let trim = |s: String| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if (-5..12).contains(&exp) {
        trim(format!("{:.*}", (11 - exp).max(0) as usize, v))
    } else {
        let s = format!("{v:.11e}");
        let (mantissa, e) = s.split_once('e').expect("scientific");
        format!("{}e{e}", trim(mantissa.to_string()))
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Number(n) if n.is_f64() => format_sig(n.as_f64().unwrap_or(f64::NAN)),
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

pub fn write_csv(records: &[Record], path: &Path) -> std::io::Result<()> {
    let columns: BTreeSet<&String> = records.iter().flat_map(|r| r.keys()).collect();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(columns.iter().map(|c| c.as_str()))?;
    for r in records {
        w.write_record(
            columns
                .iter()
                .map(|c| r.get(*c).map(csv_cell).unwrap_or_default()),
        )?;
    }
    w.flush()
}

fn load(args: &Args) -> Result<ExperimentConfig, ConfigError> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", args.config.display())))?;
    ExperimentConfig::parse(&args.subcommand, &text, args.seed)
}

/// Runs the parsed command line and returns the exit status.
pub fn run(args: Args) -> i32 {
    let cfg = match load(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CONFIG;
        }
    };
    let report = match execute(&cfg, args.threads) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CONFIG;
        }
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    match args.out.or(cfg.output) {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                if let Err(e) = fs::create_dir_all(dir) {
                    eprintln!("cannot create {}: {e}", dir.display());
                    return EXIT_CONFIG;
                }
            }
            let written = fs::write(&path, json + "\n")
                .and_then(|_| write_csv(&report.body.records, &path.with_extension("csv")));
            if let Err(e) = written {
                eprintln!("cannot write {}: {e}", path.display());
                return EXIT_CONFIG;
            }
        }
        None => println!("{json}"),
    }
    for v in &report.body.verdicts {
        eprintln!(
            "{} {} observed={} threshold={} ({})",
            if v.passed { "PASS" } else { "FAIL" },
            v.id,
            format_sig(v.observed),
            format_sig(v.threshold),
            v.detail
        );
    }
    report.exit_code()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_sig_examples() {
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(19.0), "19");
        assert_eq!(format_sig(0.5), "0.5");
        assert_eq!(format_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_sig(-2.0 / 3.0 * 1e-7), "-6.66666666667e-8");
        assert_eq!(format_sig(123456789012345.0), "1.23456789012e14");
        assert_eq!(format_sig(2f64.sqrt()), "1.41421356237");
    }

    const THRESHOLDS: &str =
        "master_seed = 3\n[params]\neps = [0.25]\nc_plus_e = [16.0]\nk = 20.0\np_fail = 0.01\n";

    #[test]
    fn config_parsing() {
        let c = ExperimentConfig::parse("thresholds", THRESHOLDS, None).unwrap();
        assert_eq!(c.master_seed, 3);
        assert_eq!(
            ExperimentConfig::parse("thresholds", THRESHOLDS, Some(9))
                .unwrap()
                .master_seed,
            9
        );
        let e =
            ExperimentConfig::parse("thresholds", "[params]\neps = [0.25]\n", Some(1)).unwrap_err();
        assert!(e.0.contains("c_plus_e"), "{e}");
        let e = ExperimentConfig::parse("thresholds", "[params]\n", None).unwrap_err();
        assert!(e.0.contains("master_seed"), "{e}");
        let e = ExperimentConfig::parse("thresholds", "master_seed = 1\n", None).unwrap_err();
        assert!(e.0.contains("params"), "{e}");
        let bad = format!("subcommand = \"qkd-demo\"\n{THRESHOLDS}");
        assert!(ExperimentConfig::parse("thresholds", &bad, None).is_err());
        let bad = format!("colour = 1\n{THRESHOLDS}");
        assert!(ExperimentConfig::parse("thresholds", &bad, None).is_err());
    }

    #[test]
    fn thresholds_report_body() {
        let c = ExperimentConfig::parse("thresholds", THRESHOLDS, None).unwrap();
        let r = execute(&c, Some(1)).unwrap();
        assert_eq!(r.exit_code(), EXIT_PASS);
        let row = r
            .body
            .records
            .iter()
            .find(|r| r["kind"] == "cor_unihigh_povm")
            .unwrap();
        assert_eq!(row["value"].as_f64(), Some(19.0));
        assert!(r.body.verdicts.iter().all(|v| !v.id.is_empty()));
    }
}
