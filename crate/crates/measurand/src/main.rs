//! Thin command-line front end over the library pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use measurand::analysis::{run_analysis, write_reports};
use measurand::data::{load_measurement_sets, load_theory_curves, ExperimentConfig};
use measurand::synth::{coverage_study, SyntheticScenario};

#[derive(Parser)]
#[command(name = "measurand", version, about = "Error budgets and confidence bands for precision measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest data, build the error budget, compare against theory curves,
    /// and write report files. Exits 2 when any model is excluded.
    Analyze {
        /// Experiment configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Measurement CSV files (header: set,z_nm,value).
        #[arg(long, required = true, num_args = 1..)]
        data: Vec<PathBuf>,
        /// Theory CSV files (header: z_nm,value); model name from the file
        /// stem unless --name is given.
        #[arg(long, num_args = 0..)]
        theory: Vec<PathBuf>,
        /// Model names overriding the theory file stems, in --theory order.
        #[arg(long, num_args = 0..)]
        name: Vec<String>,
        /// Confidence probability, overriding the config value.
        #[arg(long)]
        beta: Option<f64>,
        /// Output directory for the report files.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads (default: all cores). Outputs do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Monte Carlo coverage study from a scenario file.
    Mc {
        /// Scenario description (JSON).
        #[arg(long)]
        scenario: PathBuf,
        /// Number of trials.
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        /// Output directory for coverage.json.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads (default: all cores). Outputs do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let threads = match &cli.command {
        Command::Analyze { threads, .. } | Command::Mc { threads, .. } => threads.unwrap_or(0),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("build thread pool")?;
    pool.install(|| dispatch(cli))
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Analyze {
            config,
            data,
            theory,
            name,
            beta,
            out,
            ..
        } => {
            let mut cfg = ExperimentConfig::load(&config).context("load_config")?;
            if let Some(beta) = beta {
                cfg.confidence_beta = beta;
            }
            let coll =
                load_measurement_sets(&data, &cfg.measurement).context("load_measurement_sets")?;
            let specs: Vec<(PathBuf, Option<String>)> = theory
                .iter()
                .enumerate()
                .map(|(i, p)| (p.clone(), name.get(i).cloned()))
                .collect();
            let curves = load_theory_curves(&specs).context("load_theory_curves")?;
            let analysis = run_analysis(&cfg, &coll, &curves).context("run_pipeline")?;
            let paths = write_reports(&analysis, &out).context("write_reports")?;
            for p in &paths {
                println!("wrote {}", p.display());
            }
            for v in &analysis.verdicts {
                for r in v.excluded_ranges() {
                    println!(
                        "model '{}' excluded at beta = {} over {} nm to {} nm",
                        v.model_name, v.beta, r.from_nm, r.to_nm
                    );
                }
                if !v.is_excluded() {
                    println!(
                        "model '{}' consistent at beta = {} over the full range",
                        v.model_name, v.beta
                    );
                }
            }
            Ok(if analysis.any_model_excluded() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Mc {
            scenario,
            trials,
            out,
            ..
        } => {
            let sc = SyntheticScenario::load(&scenario).context("load_scenario")?;
            let report = coverage_study(&sc, trials, sc.beta).context("coverage_study")?;
            std::fs::create_dir_all(&out)
                .with_context(|| format!("create {}", out.display()))?;
            let path = out.join("coverage.json");
            let json = serde_json::to_string_pretty(&report).context("serialize coverage")? + "\n";
            std::fs::write(&path, json).with_context(|| format!("write {}", path.display()))?;
            println!("wrote {}", path.display());
            println!(
                "pooled coverage: {:.4} over {} intervals (beta = {})",
                report.pooled_fraction, report.pooled_total, report.beta
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}
