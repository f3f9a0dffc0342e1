//! End-to-end reproduction of the benchmark experiments: data, training of
//! every architecture row, test rollouts and the written artifacts.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::{pendulum, Forcing, HamiltonianSystem, SystemId};
use crate::plot::PhasePortrait;
use crate::sympnet::{init_model, save_checkpoint, Arch, Kind};
use crate::training::io::{write_jsonl, write_loss_csv, write_trajectory_csv};
use crate::training::{
    evaluate, sample_dataset, train, AdamConfig, DatasetSpec, RolloutMetrics, TestSpec,
    TrainConfig, TrainOutcome, TrainingSample,
};
use crate::verify::{composition_rate_study, default_m_list, BoxGrid, RateStudy};

/// Full-fidelity epoch counts are divided by this in CI mode.
pub const CI_EPOCH_DIVISOR: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    Pendulum,
    Linear,
    ForcedHo,
    RateStudy,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 4] = [
        ExperimentId::Pendulum,
        ExperimentId::Linear,
        ExperimentId::ForcedHo,
        ExperimentId::RateStudy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::Pendulum => "pendulum",
            ExperimentId::Linear => "linear",
            ExperimentId::ForcedHo => "forced_ho",
            ExperimentId::RateStudy => "rate_study",
        }
    }

    /// The system whose flow is learned; `None` for the rate study.
    pub fn system(self) -> Option<SystemId> {
        match self {
            ExperimentId::Pendulum => Some(SystemId::Pendulum),
            ExperimentId::Linear => Some(SystemId::Linear),
            ExperimentId::ForcedHo => Some(SystemId::ForcedHo),
            ExperimentId::RateStudy => None,
        }
    }

    /// Training epochs of the published protocol.
    pub fn full_epochs(self) -> usize {
        match self {
            ExperimentId::Pendulum | ExperimentId::Linear => 50_000,
            ExperimentId::ForcedHo => 150_000,
            ExperimentId::RateStudy => 0,
        }
    }

    pub fn test_spec(self) -> TestSpec {
        match self {
            ExperimentId::ForcedHo => TestSpec::forced(),
            _ => TestSpec::autonomous(),
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::UnknownExperiment(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: Kind,
    pub arch: Arch,
}

impl ModelSpec {
    pub fn new(kind: Kind, arch: Arch) -> Self {
        Self { kind, arch }
    }
}

/// Architecture rows used for each experiment.
pub fn table_rows(id: ExperimentId) -> Vec<ModelSpec> {
    use Kind::*;
    match id {
        ExperimentId::Pendulum => vec![
            ModelSpec::new(Tg, Arch::gradient(5, 30)),
            ModelSpec::new(Otla, Arch::linear(5, 4)),
            ModelSpec::new(Tla, Arch::linear(5, 4)),
        ],
        ExperimentId::Linear => vec![
            ModelSpec::new(Tg, Arch::gradient(5, 30)),
            ModelSpec::new(Otla, Arch::linear(8, 4)),
            ModelSpec::new(Tla, Arch::linear(8, 4)),
        ],
        ExperimentId::ForcedHo => vec![
            ModelSpec::new(Tg, Arch::gradient(6, 20)),
            ModelSpec::new(Tla, Arch::linear(240, 2)),
            ModelSpec::new(Natg, Arch::gradient(6, 20)),
            ModelSpec::new(Natla, Arch::linear(240, 2)),
        ],
        ExperimentId::RateStudy => Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub id: ExperimentId,
    /// Overrides the table rows.
    pub models: Option<Vec<ModelSpec>>,
    pub data_seed: u64,
    pub model_seed: u64,
    /// Overrides the protocol's epoch count (before any CI scaling).
    pub epochs: Option<usize>,
    pub learning_rate: f64,
    pub ci: bool,
    pub forcing: Forcing,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::new(ExperimentId::Pendulum)
    }
}

impl ExperimentConfig {
    pub fn new(id: ExperimentId) -> Self {
        Self {
            id,
            models: None,
            data_seed: 0,
            model_seed: 0,
            epochs: None,
            learning_rate: 1e-3,
            ci: false,
            forcing: Forcing::default(),
        }
    }

    pub fn epochs(&self) -> usize {
        let base = self.epochs.unwrap_or_else(|| self.id.full_epochs());
        if self.ci {
            (base / CI_EPOCH_DIVISOR).max(1)
        } else {
            base
        }
    }

    pub fn models(&self) -> Vec<ModelSpec> {
        self.models.clone().unwrap_or_else(|| table_rows(self.id))
    }

    pub fn validate(&self) -> Result<()> {
        let Some(system) = self.id.system() else {
            return Ok(());
        };
        for m in self.models() {
            m.arch.validate(m.kind)?;
            if m.kind.is_non_autonomous() && system != SystemId::ForcedHo {
                return Err(Error::InvalidConfig(format!(
                    "{} needs a time-dependent system, experiment `{}` is autonomous",
                    m.kind, self.id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ModelRun {
    pub spec: ModelSpec,
    pub outcome: TrainOutcome,
    pub metrics: RolloutMetrics,
}

/// Scalar summary of one model run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub kind: Kind,
    pub arch: Arch,
    pub param_count: usize,
    pub epochs: usize,
    pub final_train_mse: f64,
    pub test_max_error: f64,
    pub energy_drift: Option<f64>,
}

impl ModelRun {
    pub fn summary(&self) -> RunMetrics {
        RunMetrics {
            kind: self.spec.kind,
            arch: self.spec.arch,
            param_count: self.outcome.model.param_count(),
            epochs: self.outcome.history.len(),
            final_train_mse: self.outcome.final_loss,
            test_max_error: self.metrics.max_error,
            energy_drift: self.metrics.energy_drift,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub config: ExperimentConfig,
    pub data: Vec<TrainingSample>,
    pub test: TestSpec,
    pub runs: Vec<ModelRun>,
}

impl ExperimentRun {
    pub fn run_of(&self, kind: Kind) -> Option<&ModelRun> {
        self.runs.iter().find(|r| r.spec.kind == kind)
    }
}

/// Autonomous networks take no clock, so they see the data without `t`.
fn data_for(kind: Kind, data: &[TrainingSample]) -> Vec<TrainingSample> {
    let mut out = data.to_vec();
    if !kind.is_non_autonomous() {
        out.iter_mut().for_each(|s| s.t = None);
    }
    out
}

/// Trains and evaluates one architecture on `data`.
pub fn run_model(
    spec: ModelSpec,
    sys: &dyn HamiltonianSystem,
    data: &[TrainingSample],
    test: &TestSpec,
    train_cfg: &TrainConfig,
    model_seed: u64,
) -> Result<ModelRun> {
    let model = init_model(spec.kind, sys.dim(), spec.arch, model_seed)?;
    let outcome = train(model, &data_for(spec.kind, data), train_cfg)?;
    let metrics = evaluate(&outcome.model, sys, test)?;
    Ok(ModelRun {
        spec,
        outcome,
        metrics,
    })
}

/// Generates the data and trains every configured architecture. The rate
/// study has its own entry point, [`run_rate_study`].
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentRun> {
    run_experiment_with(cfg, |_, _| {})
}

/// Like [`run_experiment`], calling `progress` after each model.
pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    mut progress: impl FnMut(usize, &ModelRun),
) -> Result<ExperimentRun> {
    cfg.validate()?;
    let system = cfg.id.system().ok_or_else(|| {
        Error::InvalidConfig("the rate study trains no networks; use run_rate_study".into())
    })?;
    let sys = system.build(cfg.forcing)?;
    let data = sample_dataset(&DatasetSpec {
        forcing: cfg.forcing,
        ..DatasetSpec::default_for(system, cfg.data_seed)
    })?;
    let test = cfg.id.test_spec();
    let train_cfg = TrainConfig {
        epochs: cfg.epochs(),
        adam: AdamConfig {
            learning_rate: cfg.learning_rate,
            ..AdamConfig::default()
        },
        ..TrainConfig::default()
    };
    let mut runs = Vec::new();
    for (i, spec) in cfg.models().into_iter().enumerate() {
        let run = run_model(spec, sys.as_ref(), &data, &test, &train_cfg, cfg.model_seed)?;
        progress(i, &run);
        runs.push(run);
    }
    Ok(ExperimentRun {
        config: cfg.clone(),
        data,
        test,
        runs,
    })
}

#[derive(Debug, Clone, Serialize)]
struct MetricsFile<'a> {
    experiment: ExperimentId,
    data_seed: u64,
    model_seed: u64,
    epochs: usize,
    runs: Vec<RunMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rate_study: Option<&'a RateStudy>,
}

/// Writes `data.jsonl`, `metrics.json` and, per model, a directory named
/// after the kind holding `trajectory.csv`, `loss.csv`, `checkpoint.json`
/// and `phase_portrait.svg`.
pub fn write_artifacts(run: &ExperimentRun, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    write_jsonl(&out.join("data.jsonl"), &run.data)?;
    for r in &run.runs {
        let dir = out.join(r.spec.kind.as_str());
        fs::create_dir_all(&dir)?;
        write_trajectory_csv(
            &dir.join("trajectory.csv"),
            run.test.t0,
            run.test.h,
            &r.metrics.predicted,
            &r.metrics.reference,
        )?;
        write_loss_csv(&dir.join("loss.csv"), &r.outcome.history)?;
        save_checkpoint(&r.outcome.model, &dir.join("checkpoint.json"))?;
        let svg = PhasePortrait::new(format!("{} ({})", r.spec.kind, run.config.id))
            .training_pairs(run.data.iter().map(|s| (&s.x, &s.y)))
            .curve(&r.metrics.reference, "#ff9f1c", false)
            .curve(&r.metrics.predicted, "#d62728", true)
            .to_svg();
        fs::write(dir.join("phase_portrait.svg"), svg)?;
    }
    let metrics = MetricsFile {
        experiment: run.config.id,
        data_seed: run.config.data_seed,
        model_seed: run.config.model_seed,
        epochs: run.config.epochs(),
        runs: run.runs.iter().map(ModelRun::summary).collect(),
        rate_study: None,
    };
    fs::write(
        out.join("metrics.json"),
        serde_json::to_string_pretty(&metrics)?,
    )?;
    Ok(())
}

/// Pendulum Lie–Trotter study: `h = 0.5`, a 21×21 grid on `[−1, 1]²`,
/// `m ∈ {4, …, 512}`.
pub fn run_rate_study() -> Result<RateStudy> {
    composition_rate_study(
        &pendulum(),
        &BoxGrid {
            lo: -1.0,
            hi: 1.0,
            n: 21,
        },
        0.5,
        &default_m_list(),
    )
}

/// Writes `rate_study.csv` (`m,error`) and `metrics.json`.
pub fn write_rate_study(study: &RateStudy, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let mut csv = String::from("m,error\n");
    for (m, e) in study.ms.iter().zip(&study.errors) {
        csv.push_str(&format!("{m},{e:e}\n"));
    }
    fs::write(out.join("rate_study.csv"), csv)?;
    let metrics = MetricsFile {
        experiment: ExperimentId::RateStudy,
        data_seed: 0,
        model_seed: 0,
        epochs: 0,
        runs: Vec::new(),
        rate_study: Some(study),
    };
    fs::write(
        out.join("metrics.json"),
        serde_json::to_string_pretty(&metrics)?,
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_rows_match_counts() {
        let count = |id| -> Vec<usize> {
            table_rows(id)
                .iter()
                .map(|m| m.arch.param_count(m.kind, 1).unwrap())
                .collect()
        };
        assert_eq!(count(ExperimentId::Pendulum), vec![450, 34, 30]);
        assert_eq!(count(ExperimentId::Linear), vec![450, 55, 48]);
        assert_eq!(count(ExperimentId::ForcedHo), vec![360, 960, 480, 1200]);
    }

    #[test]
    fn ci_scales_epochs() {
        let mut cfg = ExperimentConfig::new(ExperimentId::ForcedHo);
        assert_eq!(cfg.epochs(), 150_000);
        cfg.ci = true;
        assert_eq!(cfg.epochs(), 3_000);
        cfg.epochs = Some(10);
        assert_eq!(cfg.epochs(), 1);
    }

    #[test]
    fn clocked_kinds_need_the_forced_system() {
        let mut cfg = ExperimentConfig::new(ExperimentId::Pendulum);
        cfg.models = Some(vec![ModelSpec::new(Kind::Natg, Arch::gradient(2, 4))]);
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        cfg.id = ExperimentId::ForcedHo;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn ids_parse() {
        for id in ExperimentId::ALL {
            assert_eq!(id.as_str().parse::<ExperimentId>().unwrap(), id);
        }
        assert!(matches!(
            "kepler".parse::<ExperimentId>(),
            Err(Error::UnknownExperiment(_))
        ));
    }

    #[test]
    fn config_json_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"id":"linear","ci":true}"#).unwrap();
        assert_eq!(cfg.id, ExperimentId::Linear);
        assert_eq!(cfg.learning_rate, 1e-3);
        assert_eq!(cfg.epochs(), 1_000);
    }

    #[test]
    fn tiny_experiment_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            epochs: Some(3),
            ..ExperimentConfig::new(ExperimentId::ForcedHo)
        };
        let cfg = ExperimentConfig {
            models: Some(vec![
                ModelSpec::new(Kind::Tg, Arch::gradient(1, 2)),
                ModelSpec::new(Kind::Natla, Arch::linear(2, 1)),
            ]),
            ..cfg
        };
        let run = run_experiment(&cfg).unwrap();
        assert_eq!(run.data.len(), 1600);
        write_artifacts(&run, dir.path()).unwrap();
        for f in [
            "data.jsonl",
            "metrics.json",
            "TG/trajectory.csv",
            "NATLA/phase_portrait.svg",
            "NATLA/checkpoint.json",
            "TG/loss.csv",
        ] {
            assert!(dir.path().join(f).is_file(), "{f}");
        }
        let m: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("metrics.json")).unwrap())
                .unwrap();
        assert_eq!(m["runs"].as_array().unwrap().len(), 2);
        assert!(m["runs"][0]["energy_drift"].is_null());
    }
}
