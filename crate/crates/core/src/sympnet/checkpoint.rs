//! Versioned JSON checkpoints.
//!
//! Parameters are written as flat per-module arrays next to the shape
//! metadata needed to rebuild the module. `serde_json` emits the shortest
//! decimal that round-trips and is built with `float_roundtrip`, so a
//! save/load cycle reproduces every `f64` bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::modules::sym_len;
use super::{
    Activation, ActivationModule, Arch, ConjugatedBlock, Direction, GradientModule, Kind,
    LinearModule, Module, SympNetModel,
};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub kind: Kind,
    pub d: usize,
    pub activation: Activation,
    pub arch: Arch,
    pub seed: Option<u64>,
    pub modules: Vec<ModuleRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModuleRecord {
    Gradient {
        direction: Direction,
        width: usize,
        time_coeff: bool,
        /// `K` (row-major `width×d`), `a`, `b`, then `c` when present.
        params: Vec<f64>,
    },
    Linear {
        start: Direction,
        sublayers: usize,
        bias: bool,
        /// Upper triangles of each `S_i`, then the bias when present.
        params: Vec<f64>,
    },
    Activation {
        direction: Direction,
        shift: bool,
        time_coeff: bool,
        /// `a`, then `b` and `c` when present.
        params: Vec<f64>,
    },
    Conjugated {
        start: Direction,
        sublayers: usize,
        direction: Direction,
        time_coeff: bool,
        /// Linear part, then `a`, `b` and `c` when present.
        params: Vec<f64>,
    },
}

fn params_of(m: &Module) -> Vec<f64> {
    let mut v = Vec::with_capacity(m.param_count());
    m.write_params(&mut v);
    v
}

impl Checkpoint {
    pub fn from_model(model: &SympNetModel) -> Self {
        let modules = model
            .modules()
            .iter()
            .map(|m| {
                let params = params_of(m);
                match m {
                    Module::Gradient(g) => ModuleRecord::Gradient {
                        direction: g.direction,
                        width: g.width(),
                        time_coeff: g.c.is_some(),
                        params,
                    },
                    Module::Linear(l) => ModuleRecord::Linear {
                        start: l.start,
                        sublayers: l.sublayers(),
                        bias: l.bias.is_some(),
                        params,
                    },
                    Module::Activation(a) => ModuleRecord::Activation {
                        direction: a.direction,
                        shift: a.b.is_some(),
                        time_coeff: a.c.is_some(),
                        params,
                    },
                    Module::Conjugated(c) => ModuleRecord::Conjugated {
                        start: c.linear.start,
                        sublayers: c.linear.sublayers(),
                        direction: c.activation.direction,
                        time_coeff: c.activation.c.is_some(),
                        params,
                    },
                }
            })
            .collect();
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            kind: model.kind(),
            d: model.dim(),
            activation: model.activation(),
            arch: model.arch(),
            seed: model.seed(),
            modules,
        }
    }

    pub fn into_model(self) -> Result<SympNetModel> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::CheckpointVersion(self.format_version));
        }
        let d = self.d;
        if d == 0 {
            return Err(Error::Checkpoint("d must be positive".into()));
        }
        let mut modules = Vec::with_capacity(self.modules.len());
        for (i, rec) in self.modules.into_iter().enumerate() {
            let mut module = match &rec {
                ModuleRecord::Gradient {
                    direction,
                    width,
                    time_coeff,
                    ..
                } => {
                    let n = *width;
                    Module::Gradient(GradientModule {
                        k: vec![0.0; n * d],
                        a: vec![0.0; n],
                        b: vec![0.0; n],
                        c: time_coeff.then(|| vec![0.0; n]),
                        direction: *direction,
                    })
                }
                ModuleRecord::Linear {
                    start,
                    sublayers,
                    bias,
                    ..
                } => Module::Linear(LinearModule {
                    d,
                    s: vec![vec![0.0; sym_len(d)]; *sublayers],
                    start: *start,
                    bias: bias.then(|| vec![0.0; 2 * d]),
                }),
                ModuleRecord::Activation {
                    direction,
                    shift,
                    time_coeff,
                    ..
                } => Module::Activation(ActivationModule {
                    a: vec![0.0; d],
                    b: shift.then(|| vec![0.0; d]),
                    c: time_coeff.then(|| vec![0.0; d]),
                    direction: *direction,
                }),
                ModuleRecord::Conjugated {
                    start,
                    sublayers,
                    direction,
                    time_coeff,
                    ..
                } => Module::Conjugated(ConjugatedBlock {
                    linear: LinearModule {
                        d,
                        s: vec![vec![0.0; sym_len(d)]; *sublayers],
                        start: *start,
                        bias: None,
                    },
                    activation: ActivationModule {
                        a: vec![0.0; d],
                        b: Some(vec![0.0; d]),
                        c: time_coeff.then(|| vec![0.0; d]),
                        direction: *direction,
                    },
                }),
            };
            let params = match &rec {
                ModuleRecord::Gradient { params, .. }
                | ModuleRecord::Linear { params, .. }
                | ModuleRecord::Activation { params, .. }
                | ModuleRecord::Conjugated { params, .. } => params,
            };
            if params.len() != module.param_count() {
                return Err(Error::Checkpoint(format!(
                    "module {i}: expected {} parameters, found {}",
                    module.param_count(),
                    params.len()
                )));
            }
            module.read_params(params);
            modules.push(module);
        }
        let mut model =
            SympNetModel::from_modules(self.kind, d, self.activation, self.arch, modules)?;
        model.seed = self.seed;
        Ok(model)
    }
}

pub fn save_checkpoint(model: &SympNetModel, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(&Checkpoint::from_model(model))?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<SympNetModel> {
    let text = std::fs::read_to_string(path)?;
    let ck: Checkpoint = serde_json::from_str(&text)?;
    ck.into_model()
}
