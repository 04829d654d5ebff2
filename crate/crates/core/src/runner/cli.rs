//! Command-line front end: parses the experiment config, sweeps seeds in
//! a worker pool, and writes datasets, reports, ledgers, and manifests.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid config or usage.

use crate::error::{Error, Result};
use crate::io::{self, MetricsRow};
use crate::runner::aggregate::{aggregate_reports, summary_to_csv};
use crate::runner::config::{ExperimentConfig, RunKind};
use crate::runner::manifest::RunManifest;
use crate::scenarios::{self, World};
use crate::synthdata;
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser, Debug)]
#[command(
    name = "perfloop",
    version,
    about = "Feedback-loop bias simulator for fraud-detection models"
)]
struct Cli {
    /// Experiment config (TOML). Every key is optional; omitted keys take
    /// the desk-scale defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Added to every seed in the config.
    #[arg(long, global = true, default_value_t = 0)]
    seed_offset: u64,

    /// Trial-count override.
    #[arg(long, global = true)]
    trials: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate biased synthetic datasets, one CSV per seed.
    Gen,
    /// Generate datasets and statistically verify the injected biases.
    VerifyBias,
    /// Run the adaptive-evasion experiment over all seeds.
    Scenario1,
    /// Run the selective-label feedback experiment over all seeds.
    Scenario2,
    /// Aggregate per-seed metrics CSVs into a median/min/max summary.
    Report,
}

/// Entry point behind `main`; returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            // clap routes help to stdout and errors to stderr.
            let _ = e.print();
            return code;
        }
    };

    init_worker_pool();

    let cfg = match load_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("perfloop: invalid config: {e}");
            return 2;
        }
    };
    let out_dir = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.run.out_dir));

    let result = match cli.command {
        Command::Gen => run_gen(&cfg, &out_dir),
        Command::VerifyBias => run_verify(&cfg, &out_dir),
        Command::Scenario1 => run_scenario1(&cfg, &out_dir),
        Command::Scenario2 => run_scenario2(&cfg, &out_dir),
        Command::Report => run_report(&out_dir),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("perfloop: {e}");
            1
        }
    }
}

fn init_worker_pool() {
    if let Ok(workers) = std::env::var("PERFLOOP_WORKERS") {
        if let Ok(n) = workers.parse::<usize>() {
            if n > 0 {
                // Ignore the error if a pool already exists (tests).
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {path:?}: {e}")))?;
            ExperimentConfig::from_toml(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(trials) = cli.trials {
        if trials == 0 {
            return Err(Error::Config("--trials must be at least 1".to_string()));
        }
        cfg.run.trials = trials;
    }
    if cli.seed_offset != 0 {
        for s in &mut cfg.run.seeds {
            *s += cli.seed_offset;
        }
    }
    if let Some(out) = &cli.out {
        cfg.run.out_dir = out.to_string_lossy().to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn build_dataset(cfg: &ExperimentConfig, kind: RunKind, seed: u64) -> Result<synthdata::Dataset> {
    let base = synthdata::gen_base(
        cfg.data.n,
        cfg.data.prevalence,
        cfg.data.d,
        cfg.data.months,
        seed,
    )?;
    synthdata::apply_bias_spec(&base, &cfg.bias_spec(kind)?, seed)
}

fn run_gen(cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    for &seed in &cfg.run.seeds {
        let ds = build_dataset(cfg, RunKind::Gen, seed)?;
        let path = out_dir.join(format!("dataset_seed{seed}.csv"));
        io::write_atomic(&path, io::dataset_to_csv(&ds).as_bytes())?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run_verify(cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    for &seed in &cfg.run.seeds {
        let ds = build_dataset(cfg, RunKind::VerifyBias, seed)?;
        let report = synthdata::verify_bias_conditions(&ds, cfg.run.alpha)?;
        let mut text = String::from("condition,statistic,p_value,pass,detail\n");
        for e in &report.entries {
            let p = e
                .p_value
                .map(|p| format!("{p}"))
                .unwrap_or_else(|| "NA".to_string());
            text.push_str(&format!(
                "{},{},{},{},\"{}\"\n",
                e.condition, e.statistic, p, e.pass, e.detail
            ));
        }
        let path = out_dir.join(format!("bias_report_seed{seed}.csv"));
        io::write_atomic(&path, text.as_bytes())?;
        let passed = report.entries.iter().filter(|e| e.pass).count();
        println!(
            "seed {seed}: {passed}/{} conditions verified, report at {}",
            report.entries.len(),
            path.display()
        );
    }
    Ok(())
}

fn scenario1_rows(report: &scenarios::Scenario1Report, seed: u64) -> Vec<MetricsRow> {
    let mut rows = Vec::new();
    for world in [World::PerformanceIdeal, World::Adaptation, World::UnbiasedBaseline] {
        let w = report.world(world);
        for &config_id in &w.top5 {
            let outcome = w
                .outcomes
                .iter()
                .find(|o| o.config_id == config_id)
                .expect("top5 ids come from outcomes");
            rows.extend(MetricsRow::from_report(
                "scenario1",
                &world.to_string(),
                seed,
                "global",
                &outcome.metrics,
            ));
        }
    }
    rows
}

fn run_scenario1(cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    let setup = cfg.scenario1_setup()?;
    let mut manifest = RunManifest::new("scenario1", cfg.hash(), cfg.algorithm()?);
    let total = Instant::now();

    let runs: Vec<(u64, scenarios::Scenario1Report, f64)> = cfg
        .run
        .seeds
        .par_iter()
        .map(|&seed| -> Result<_> {
            let start = Instant::now();
            let report = scenarios::run_scenario1(&setup, seed)?;
            Ok((seed, report, start.elapsed().as_secs_f64()))
        })
        .collect::<Result<Vec<_>>>()?;

    for (seed, report, secs) in &runs {
        let json = serde_json::to_string_pretty(report)
            .map_err(|e| Error::InvalidParameter(format!("report serialization: {e}")))?;
        let report_path = out_dir.join(format!("s1_report_seed{seed}.json"));
        io::write_atomic(&report_path, json.as_bytes())?;
        manifest.add_file(out_dir, &report_path, json.as_bytes());

        let csv = io::rows_to_csv(&scenario1_rows(report, *seed));
        let csv_path = out_dir.join(format!("s1_metrics_seed{seed}.csv"));
        io::write_atomic(&csv_path, csv.as_bytes())?;
        manifest.add_file(out_dir, &csv_path, csv.as_bytes());

        manifest.record_time(&format!("seed_{seed}"), *secs);
        let median_tpr = |world: World| {
            let w = report.world(world);
            let mut tprs: Vec<f64> = w
                .top5
                .iter()
                .map(|&id| w.outcomes[id].tpr)
                .collect();
            tprs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            tprs[tprs.len() / 2]
        };
        println!(
            "seed {seed}: top-5 median TPR ideal {:.3}, adaptation {:.3}, baseline {:.3}",
            median_tpr(World::PerformanceIdeal),
            median_tpr(World::Adaptation),
            median_tpr(World::UnbiasedBaseline),
        );
    }
    manifest.record_time("total", total.elapsed().as_secs_f64());
    let path = out_dir.join("s1_manifest.toml");
    io::write_atomic(&path, manifest.to_toml().as_bytes())?;
    manifest.check_files_exist(out_dir)?;
    Ok(())
}

fn run_scenario2(cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    let setup = cfg.scenario2_setup()?;
    let policy_tag = cfg.run.policy.clone();
    let mut manifest = RunManifest::new("scenario2", cfg.hash(), cfg.algorithm()?);
    let total = Instant::now();

    let runs: Vec<(u64, scenarios::Scenario2Report, scenarios::FeedbackLedger, f64)> = cfg
        .run
        .seeds
        .par_iter()
        .map(|&seed| -> Result<_> {
            let start = Instant::now();
            let (report, ledger) = scenarios::run_scenario2(&setup, seed)?;
            Ok((seed, report, ledger, start.elapsed().as_secs_f64()))
        })
        .collect::<Result<Vec<_>>>()?;

    for (seed, report, ledger, secs) in &runs {
        let json = serde_json::to_string_pretty(report)
            .map_err(|e| Error::InvalidParameter(format!("report serialization: {e}")))?;
        let report_path = out_dir.join(format!("s2_report_seed{seed}.json"));
        io::write_atomic(&report_path, json.as_bytes())?;
        manifest.add_file(out_dir, &report_path, json.as_bytes());

        let mut rows = Vec::new();
        for iter in &report.iterations {
            let tag = iter.iteration.to_string();
            rows.extend(MetricsRow::from_report(
                "scenario2",
                &tag,
                *seed,
                &policy_tag,
                &iter.perceived,
            ));
            rows.extend(MetricsRow::from_report(
                "scenario2",
                &tag,
                *seed,
                &policy_tag,
                &iter.real,
            ));
        }
        let csv = io::rows_to_csv(&rows);
        let csv_path = out_dir.join(format!("s2_metrics_seed{seed}.csv"));
        io::write_atomic(&csv_path, csv.as_bytes())?;
        manifest.add_file(out_dir, &csv_path, csv.as_bytes());

        let ledger_csv = io::ledger_to_csv(ledger);
        let ledger_path = out_dir.join(format!("s2_ledger_seed{seed}.csv"));
        io::write_atomic(&ledger_path, ledger_csv.as_bytes())?;
        manifest.add_file(out_dir, &ledger_path, ledger_csv.as_bytes());

        manifest.record_time(&format!("seed_{seed}"), *secs);
        for iter in &report.iterations {
            println!(
                "seed {seed} iter {}: perceived FPR {} vs real FPR {}",
                iter.iteration,
                iter.perceived
                    .global_fpr
                    .map(|f| format!("{f:.4}"))
                    .unwrap_or_else(|| "NA".into()),
                iter.real
                    .global_fpr
                    .map(|f| format!("{f:.4}"))
                    .unwrap_or_else(|| "NA".into()),
            );
        }
    }
    manifest.record_time("total", total.elapsed().as_secs_f64());
    let path = out_dir.join("s2_manifest.toml");
    io::write_atomic(&path, manifest.to_toml().as_bytes())?;
    manifest.check_files_exist(out_dir)?;
    Ok(())
}

fn run_report(out_dir: &Path) -> Result<()> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(out_dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .map(|n| n.contains("_metrics_seed") && n.ends_with(".csv"))
                .unwrap_or(false)
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::SchemaMismatch(format!(
            "no *_metrics_seed*.csv files under {}",
            out_dir.display()
        )));
    }
    let mut rows = Vec::new();
    for path in &paths {
        let text = std::fs::read_to_string(path)?;
        rows.extend(io::rows_from_csv(&text)?);
    }
    let summary = aggregate_reports(&rows)?;
    let csv = summary_to_csv(&summary);
    let path = out_dir.join("summary.csv");
    io::write_atomic(&path, csv.as_bytes())?;
    println!(
        "aggregated {} rows from {} files into {}",
        rows.len(),
        paths.len(),
        path.display()
    );
    Ok(())
}
