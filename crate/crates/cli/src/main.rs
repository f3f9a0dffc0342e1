use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use tsympnet::experiment::{
    run_experiment_with, run_rate_study, write_artifacts, write_rate_study, ExperimentConfig,
    ExperimentId,
};
use tsympnet::plot::PhasePortrait;
use tsympnet::training::evaluate;
use tsympnet::training::io::{read_jsonl, write_jsonl, write_loss_csv, write_trajectory_csv};
use tsympnet::verify::{run_suite, Suite};
use tsympnet::{
    init_model, load_checkpoint, sample_dataset, save_checkpoint, train, Arch, DatasetSpec,
    Forcing, Kind, SystemId, TestSpec, TrainConfig,
};

#[derive(Parser)]
#[command(name = "tsympnet", version, about = "Symplectic network experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a training set and write it as JSON lines.
    GenData {
        /// Dataset spec (JSON). Defaults to the protocol of `--system`.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, required_unless_present = "config")]
        system: Option<SystemId>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one network from a job file.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides both the model and the shuffling seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Roll out a checkpoint against a system's reference flow.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Evaluation spec (JSON). Defaults to the test protocol of `--system`.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, required_unless_present = "config")]
        system: Option<SystemId>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run verification suites; exits nonzero if any check fails.
    Verify {
        #[arg(default_value = "all")]
        suite: Suite,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for `report.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproduce one experiment: data, every table row, plots and metrics.
    Experiment {
        id: ExperimentId,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides both the data and the model seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Divide the epoch budget by 50.
        #[arg(long)]
        ci: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Lie–Trotter convergence study on the pendulum.
    RateStudy {
        #[arg(long)]
        out: PathBuf,
    },
}

/// A `train` job. `data` is resolved relative to the job file.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TrainJob {
    data: PathBuf,
    kind: Kind,
    arch: Arch,
    #[serde(default)]
    model_seed: u64,
    #[serde(flatten)]
    train: TrainConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EvalJob {
    system: SystemId,
    #[serde(default)]
    forcing: Forcing,
    #[serde(default)]
    test: Option<TestSpec>,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

fn default_test(system: SystemId) -> TestSpec {
    if system == SystemId::ForcedHo {
        TestSpec::forced()
    } else {
        TestSpec::autonomous()
    }
}

fn gen_data(
    config: Option<&Path>,
    system: Option<SystemId>,
    seed: Option<u64>,
    out: &Path,
) -> Result<()> {
    let mut spec = match (config, system) {
        (Some(path), _) => read_json::<DatasetSpec>(path)?,
        (None, Some(sys)) => DatasetSpec::default_for(sys, 0),
        (None, None) => bail!("either --config or --system is required"),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let data = sample_dataset(&spec)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    write_jsonl(out, &data)?;
    eprintln!("wrote {} samples to {}", data.len(), out.display());
    Ok(())
}

fn train_cmd(config: &Path, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut job: TrainJob = read_json(config)?;
    if let Some(s) = seed {
        job.model_seed = s;
        job.train.seed = s;
    }
    let data_path = config.parent().unwrap_or(Path::new(".")).join(&job.data);
    let data =
        read_jsonl(&data_path).with_context(|| format!("loading {}", data_path.display()))?;
    let d = data
        .first()
        .map(|s| s.x.dim())
        .context("dataset is empty")?;
    let model = init_model(job.kind, d, job.arch, job.model_seed)?;
    let outcome = train(model, &data, &job.train)?;
    fs::create_dir_all(out)?;
    save_checkpoint(&outcome.model, &out.join("checkpoint.json"))?;
    write_loss_csv(&out.join("loss.csv"), &outcome.history)?;
    write_json(
        &out.join("metrics.json"),
        &serde_json::json!({
            "kind": job.kind,
            "arch": job.arch,
            "param_count": outcome.model.param_count(),
            "epochs": outcome.history.len(),
            "final_train_mse": outcome.final_loss,
        }),
    )?;
    eprintln!("final training MSE {:e}", outcome.final_loss);
    Ok(())
}

fn eval_cmd(
    checkpoint: &Path,
    config: Option<&Path>,
    system: Option<SystemId>,
    out: &Path,
) -> Result<()> {
    let job = match (config, system) {
        (Some(path), _) => read_json::<EvalJob>(path)?,
        (None, Some(sys)) => EvalJob {
            system: sys,
            forcing: Forcing::default(),
            test: None,
        },
        (None, None) => bail!("either --config or --system is required"),
    };
    let model = load_checkpoint(checkpoint)
        .with_context(|| format!("loading checkpoint {}", checkpoint.display()))?;
    let sys = job.system.build(job.forcing)?;
    let test = job.test.unwrap_or_else(|| default_test(job.system));
    let metrics = evaluate(&model, sys.as_ref(), &test)?;
    fs::create_dir_all(out)?;
    write_trajectory_csv(
        &out.join("trajectory.csv"),
        test.t0,
        test.h,
        &metrics.predicted,
        &metrics.reference,
    )?;
    write_json(&out.join("metrics.json"), &metrics)?;
    let svg = PhasePortrait::new(format!("{} on {}", model.kind(), job.system.as_str()))
        .curve(&metrics.reference, "#ff9f1c", false)
        .curve(&metrics.predicted, "#d62728", true)
        .to_svg();
    fs::write(out.join("phase_portrait.svg"), svg)?;
    println!("max error {:.6e}", metrics.max_error);
    Ok(())
}

fn verify_cmd(suite: Suite, seed: u64, out: Option<&Path>) -> Result<bool> {
    let reports = run_suite(suite, seed)?;
    for r in &reports {
        let values: Vec<String> = r
            .measurements
            .iter()
            .map(|m| format!("{}={:.3e}", m.name, m.value))
            .collect();
        println!(
            "{} {}: {}",
            if r.pass { "PASS" } else { "FAIL" },
            r.check,
            values.join(" ")
        );
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        write_json(&dir.join("report.json"), &reports)?;
    }
    Ok(reports.iter().all(|r| r.pass))
}

fn experiment_cmd(
    id: ExperimentId,
    config: Option<&Path>,
    seed: Option<u64>,
    ci: bool,
    out: &Path,
) -> Result<()> {
    if id == ExperimentId::RateStudy {
        return rate_study_cmd(out);
    }
    let mut cfg = match config {
        Some(path) => read_json::<ExperimentConfig>(path)?,
        None => ExperimentConfig::new(id),
    };
    if cfg.id != id {
        bail!("config is for experiment `{}`, not `{id}`", cfg.id);
    }
    if let Some(s) = seed {
        cfg.data_seed = s;
        cfg.model_seed = s;
    }
    cfg.ci |= ci;
    eprintln!("{id}: {} epochs per model", cfg.epochs());
    let run = run_experiment_with(&cfg, |_, r| {
        eprintln!(
            "  {}: train MSE {:.3e}, test max error {:.4}",
            r.spec.kind, r.outcome.final_loss, r.metrics.max_error
        );
    })?;
    write_artifacts(&run, out)?;
    Ok(())
}

fn rate_study_cmd(out: &Path) -> Result<()> {
    let study = run_rate_study()?;
    write_rate_study(&study, out)?;
    println!("slope {:.4}", study.slope);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenData {
            config,
            system,
            seed,
            out,
        } => gen_data(config.as_deref(), *system, *seed, out),
        Command::Train { config, seed, out } => train_cmd(config, *seed, out),
        Command::Eval {
            checkpoint,
            config,
            system,
            out,
        } => eval_cmd(checkpoint, config.as_deref(), *system, out),
        Command::Verify { suite, seed, out } => match verify_cmd(*suite, *seed, out.as_deref()) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::FAILURE,
            Err(e) => Err(e),
        },
        Command::Experiment {
            id,
            config,
            seed,
            ci,
            out,
        } => experiment_cmd(*id, config.as_deref(), *seed, *ci, out),
        Command::RateStudy { out } => rate_study_cmd(out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
