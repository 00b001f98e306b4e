use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use icubench::eval::TestKind;
use icubench::experiment::{self, EvalReport, ExperimentConfig, Prepared};
use icubench::synth::{self, SynthConfig};
use icubench::{Error, Result};

/// ICU benchmark runner: synthetic data, cohort audits, cross-validated
/// experiments and significance comparisons.
#[derive(Parser)]
#[command(name = "icubench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic eICU-shaped dataset.
    Synth {
        #[arg(long, default_value_t = 1000)]
        patients: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Planted outcome signal in scale units; 0 gives outcome-independent vitals.
        #[arg(long)]
        signal: Option<f64>,
        /// Uniform per-variable missingness for every generated channel.
        #[arg(long)]
        missingness: Option<f64>,
    },
    /// Ingest a data directory and write ingestion and cohort audits.
    Cohort {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        phenotype_map: Option<PathBuf>,
    },
    /// Run one cross-validated experiment.
    Run(RunArgs),
    /// t-test every metric of two reports evaluated on the same folds.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        paired: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    encoding: Option<String>,
    #[arg(long)]
    variables: Option<String>,
    #[arg(long)]
    data_dir: Option<String>,
    #[arg(long)]
    folds: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// Any other config key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn run_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if let Some(p) = &args.config {
        let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
        cfg.apply_text(&text)?;
    }
    let flags = [
        ("task", &args.task),
        ("model", &args.model),
        ("encoding", &args.encoding),
        ("variables", &args.variables),
        ("data_dir", &args.data_dir),
        ("folds", &args.folds),
        ("seed", &args.seed),
        ("out_dir", &args.out),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, v)?;
        }
    }
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main_inner(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            patients,
            seed,
            out,
            signal,
            missingness,
        } => {
            let mut cfg = SynthConfig {
                n_patients: patients,
                seed,
                ..SynthConfig::default()
            };
            if let Some(s) = signal {
                cfg.signal_strength = s;
            }
            if let Some(p) = missingness {
                cfg = cfg.with_uniform_missingness(p);
            }
            cfg.validate()?;
            let output = synth::generate(&cfg)?;
            output.write_to_dir(&out)?;
            let s = &output.summary;
            println!(
                "wrote {} patients / {} stays ({} hospital deaths, {} unit deaths) to {}",
                s.n_patients,
                s.n_stays,
                s.n_expired,
                s.n_unit_deaths,
                out.display()
            );
        }
        Command::Cohort {
            data_dir,
            out,
            phenotype_map,
        } => {
            let mut cfg = ExperimentConfig {
                data_dir,
                phenotype_map,
                ..ExperimentConfig::default()
            };
            cfg.task = experiment::ExperimentTask::Phenotyping;
            if !cfg.phenotype_map_path().exists() {
                cfg.task = experiment::ExperimentTask::Mortality24;
            }
            let prepared = Prepared::load(&cfg)?;
            let (ingestion, cohort) = experiment::audit_texts(&cfg, &prepared);
            print!("{ingestion}\n{cohort}");
            if let Some(dir) = out {
                experiment::write_audits(&dir, &cfg, &prepared)?;
            }
        }
        Command::Run(args) => {
            let cfg = run_config(&args)?;
            let outcome = experiment::execute(&cfg)?;
            print!("{}", outcome.report.to_text(Some((outcome.wall_clock_secs, &outcome.fold_secs))));
            println!("reports written to {}", cfg.out_dir.display());
        }
        Command::Compare { a, b, paired } => {
            let kind = if paired { TestKind::Paired } else { TestKind::Welch };
            let ra = EvalReport::load(&a)?;
            let rb = EvalReport::load(&b)?;
            print!("{}", experiment::compare(&ra, &rb, kind)?.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
