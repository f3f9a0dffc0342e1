//! Datasets, the Adam optimiser and the training loop.

mod adam;
mod dataset;
pub mod io;

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use dataset::{label, sample_dataset, DatasetSpec, LabelOracle, TrainingSample};

use crate::autodiff::{validate_batch, GradientEngine};
use crate::error::{Error, Result};
use crate::hamiltonians::HamiltonianSystem;
use crate::phase::{max_trajectory_error, PhasePoint};
use crate::sympnet::{save_checkpoint, SympNetModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    #[serde(flatten)]
    pub adam: AdamConfig,
    /// Seeds minibatch shuffling; unused for full-batch training.
    pub seed: u64,
    /// `None` trains on the whole dataset every epoch.
    pub batch_size: Option<usize>,
    /// Write a checkpoint every this many epochs (requires `checkpoint_dir`).
    pub checkpoint_every: Option<usize>,
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50_000,
            adam: AdamConfig::default(),
            seed: 0,
            batch_size: None,
            checkpoint_every: None,
            checkpoint_dir: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: SympNetModel,
    /// Loss of each epoch, measured before that epoch's update(s).
    pub history: Vec<f64>,
    /// Full-batch loss after the last update.
    pub final_loss: f64,
}

fn non_finite(epoch: usize, params: &[f64]) -> Error {
    let (param_index, max_abs_param) =
        params
            .iter()
            .enumerate()
            .fold((0, 0.0_f64), |(bi, bv), (i, v)| {
                if !(v.abs() <= bv) {
                    (i, v.abs())
                } else {
                    (bi, bv)
                }
            });
    Error::NonFiniteLoss {
        epoch,
        max_abs_param,
        param_index,
    }
}

/// Minimises the mean squared one-step error with Adam.
pub fn train(
    mut model: SympNetModel,
    data: &[TrainingSample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    validate_batch(&model, data)?;
    if cfg.epochs == 0 {
        return Err(Error::InvalidConfig("epochs must be at least 1".into()));
    }
    if !(cfg.adam.learning_rate >= 0.0 && cfg.adam.learning_rate.is_finite()) {
        return Err(Error::InvalidConfig(
            "learning_rate must be finite and >= 0".into(),
        ));
    }
    if cfg.batch_size == Some(0) {
        return Err(Error::InvalidConfig("batch_size must be positive".into()));
    }
    let ck_every = match (cfg.checkpoint_every, &cfg.checkpoint_dir) {
        (Some(0), _) => {
            return Err(Error::InvalidConfig(
                "checkpoint_every must be positive".into(),
            ))
        }
        (Some(k), Some(dir)) => {
            std::fs::create_dir_all(dir)?;
            Some((k, dir))
        }
        (Some(_), None) => {
            return Err(Error::InvalidConfig(
                "checkpoint_every needs checkpoint_dir".into(),
            ))
        }
        (None, _) => None,
    };

    let offsets = model.param_offsets();
    let mut params = model.all_params();
    let mut grad = vec![0.0; params.len()];
    let mut state = AdamState::new(params.len());
    let mut engine = GradientEngine::new();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut batch = Vec::new();

    for epoch in 0..cfg.epochs {
        let loss = match cfg.batch_size {
            Some(bs) if bs < data.len() => {
                order.shuffle(&mut rng);
                let mut total = 0.0;
                for chunk in order.chunks(bs) {
                    batch.clear();
                    batch.extend(chunk.iter().map(|&i| data[i].clone()));
                    grad.fill(0.0);
                    let l = engine.accumulate_mse(&model, &batch, &mut grad, &offsets);
                    if !l.is_finite() {
                        return Err(non_finite(epoch, &params));
                    }
                    total += l * chunk.len() as f64;
                    adam_step(&mut params, &grad, &mut state, &cfg.adam);
                    model.set_params(&params)?;
                }
                total / data.len() as f64
            }
            _ => {
                grad.fill(0.0);
                let l = engine.accumulate_mse(&model, data, &mut grad, &offsets);
                if !l.is_finite() {
                    return Err(non_finite(epoch, &params));
                }
                adam_step(&mut params, &grad, &mut state, &cfg.adam);
                model.set_params(&params)?;
                l
            }
        };
        history.push(loss);
        if let Some((k, dir)) = ck_every {
            if (epoch + 1) % k == 0 {
                save_checkpoint(&model, &dir.join(format!("epoch_{:07}.json", epoch + 1)))?;
            }
        }
    }
    let final_loss = engine.mse(&model, data);
    if !final_loss.is_finite() {
        return Err(non_finite(cfg.epochs, &params));
    }
    Ok(TrainOutcome {
        model,
        history,
        final_loss,
    })
}

/// Mean of consecutive non-overlapping windows of `history`; a trailing
/// partial window is dropped.
pub fn smoothed(history: &[f64], window: usize) -> Vec<f64> {
    if window == 0 {
        return Vec::new();
    }
    history
        .chunks_exact(window)
        .map(|w| w.iter().sum::<f64>() / window as f64)
        .collect()
}

/// `k` network steps from `x0`, returning `k + 1` states. Non-autonomous
/// kinds thread the clock `t0, t0 + h, …`; `t0` is ignored otherwise.
pub fn rollout(
    model: &SympNetModel,
    x0: &PhasePoint,
    h: f64,
    k: usize,
    t0: f64,
) -> Result<Vec<PhasePoint>> {
    let mut out = Vec::with_capacity(k + 1);
    out.push(x0.clone());
    let mut t = model.clock_arg(t0);
    for _ in 0..k {
        let (y, t_next) = model.forward_with_clock(h, t, out.last().unwrap())?;
        out.push(y);
        t = t_next;
    }
    Ok(out)
}

/// `k` steps of the system's reference flow from `x0` starting at `t0`.
pub fn reference_trajectory(
    sys: &dyn HamiltonianSystem,
    x0: &PhasePoint,
    h: f64,
    k: usize,
    t0: f64,
) -> Result<Vec<PhasePoint>> {
    let mut out = Vec::with_capacity(k + 1);
    out.push(x0.clone());
    for i in 0..k {
        let t = t0 + i as f64 * h;
        let y = sys
            .exact_flow(t, h, out.last().unwrap())
            .ok_or_else(|| Error::NoExactFlow(sys.name().to_string()))?;
        out.push(y);
    }
    Ok(out)
}

/// Initial state, step and horizon of a test trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSpec {
    pub x0: PhasePoint,
    pub h: f64,
    pub steps: usize,
    #[serde(default)]
    pub t0: f64,
}

impl TestSpec {
    /// `x0 = (1, 0)`, `h = 0.1`, 100 steps.
    pub fn autonomous() -> Self {
        Self {
            x0: PhasePoint::from_pq(1.0, 0.0),
            h: 0.1,
            steps: 100,
            t0: 0.0,
        }
    }

    /// `x0 = (−0.2, −0.5)`, `h = 0.2`, 80 steps from `t = 0`.
    pub fn forced() -> Self {
        Self {
            x0: PhasePoint::from_pq(-0.2, -0.5),
            h: 0.2,
            steps: 80,
            t0: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutMetrics {
    pub max_error: f64,
    /// `max |H(x_k) − H(x_0)|` along the prediction; only for autonomous
    /// systems.
    pub energy_drift: Option<f64>,
    #[serde(skip)]
    pub predicted: Vec<PhasePoint>,
    #[serde(skip)]
    pub reference: Vec<PhasePoint>,
}

/// Rolls the model out along `test` and compares with the reference flow.
pub fn evaluate(
    model: &SympNetModel,
    sys: &dyn HamiltonianSystem,
    test: &TestSpec,
) -> Result<RolloutMetrics> {
    let predicted = rollout(model, &test.x0, test.h, test.steps, test.t0)?;
    let reference = reference_trajectory(sys, &test.x0, test.h, test.steps, test.t0)?;
    let max_error = max_trajectory_error(&predicted, &reference);
    let energy_drift = (!sys.is_time_dependent()).then(|| {
        let h0 = sys.hamiltonian(test.x0.as_slice(), test.t0);
        predicted
            .iter()
            .map(|x| (sys.hamiltonian(x.as_slice(), test.t0) - h0).abs())
            .fold(0.0, f64::max)
    });
    Ok(RolloutMetrics {
        max_error,
        energy_drift,
        predicted,
        reference,
    })
}
