//! Reverse-mode gradients of losses over network evaluations.
//!
//! The engine is closed-world: it differentiates exactly the module types in
//! [`crate::sympnet`]. A forward pass records the input of every module; the
//! backward pass walks the modules in descending index order, each applying
//! its own adjoint rule. Samples are reduced sequentially in batch order, so
//! results are bitwise reproducible.

use crate::error::{Error, Result};
use crate::phase::PhasePoint;
use crate::sympnet::{Scratch, SympNetModel};
use crate::training::TrainingSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Loss {
    /// `(1/N) Σ ‖ψ(hᵢ, tᵢ, xᵢ) − yᵢ‖²`.
    #[default]
    Mse,
}

/// Gradients congruent with the model's modules: entry `i` has the same
/// length and ordering as module `i`'s flattened parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradients {
    pub per_module: Vec<Vec<f64>>,
}

impl ParamGradients {
    fn from_flat(model: &SympNetModel, flat: &[f64]) -> Self {
        let offs = model.param_offsets();
        let per_module = offs.windows(2).map(|w| flat[w[0]..w[1]].to_vec()).collect();
        Self { per_module }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.per_module.iter().flatten().copied().collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.per_module
            .iter()
            .flatten()
            .fold(0.0, |m, g| m.max(g.abs()))
    }
}

/// Adjoints of one network evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Pullback {
    pub x: Vec<f64>,
    pub params: ParamGradients,
    pub h: f64,
    pub t: f64,
}

/// Reusable buffers for repeated gradient evaluation.
#[derive(Debug, Default, Clone)]
pub struct GradientEngine {
    ws: Scratch,
    tape: Vec<f64>,
    xbar: Vec<f64>,
}

impl GradientEngine {
    pub fn new() -> Self {
        Self::default()
    }

    /// Back-propagates `ybar` through the evaluation recorded in `self.tape`,
    /// adding parameter adjoints to `grad`. On return `self.xbar` holds the
    /// input adjoint. Returns `(hbar, tbar)`.
    fn backprop(
        &mut self,
        model: &SympNetModel,
        h: f64,
        t: f64,
        ybar: &[f64],
        grad: &mut [f64],
        offsets: &[usize],
    ) -> (f64, f64) {
        let dd = ybar.len();
        self.xbar.clear();
        self.xbar.extend_from_slice(ybar);
        let (mut hbar, mut tbar) = (0.0, 0.0);
        for (i, m) in model.modules().iter().enumerate().rev() {
            let input = &self.tape[i * dd..(i + 1) * dd];
            let ti = model.clock(t, h, i);
            let (hb, tb) = m.vjp(
                model.activation(),
                h,
                ti,
                input,
                &mut self.xbar,
                &mut grad[offsets[i]..offsets[i + 1]],
                &mut self.ws,
            );
            hbar += hb + tb * model.clock_rate(i);
            tbar += tb;
        }
        (hbar, tbar)
    }

    /// Adds the MSE gradient of `batch` to `grad` and returns the loss.
    /// Inputs are assumed validated.
    pub fn accumulate_mse(
        &mut self,
        model: &SympNetModel,
        batch: &[TrainingSample],
        grad: &mut [f64],
        offsets: &[usize],
    ) -> f64 {
        let n = batch.len() as f64;
        let dd = 2 * model.dim();
        let mut ybar = vec![0.0; dd];
        let mut loss = 0.0;
        for s in batch {
            let t = s.t.unwrap_or(0.0);
            model.forward_taped(s.h, t, s.x.as_slice(), &mut self.tape, &mut self.ws);
            let out = &self.tape[self.tape.len() - dd..];
            let mut sq = 0.0;
            for (j, (o, y)) in out.iter().zip(s.y.as_slice()).enumerate() {
                let r = o - y;
                sq += r * r;
                ybar[j] = 2.0 * r / n;
            }
            loss += sq;
            self.backprop(model, s.h, t, &ybar, grad, offsets);
        }
        loss / n
    }

    /// MSE loss alone.
    pub fn mse(&mut self, model: &SympNetModel, batch: &[TrainingSample]) -> f64 {
        let dd = 2 * model.dim();
        let mut buf = vec![0.0; dd];
        let total: f64 = batch
            .iter()
            .map(|s| {
                buf.copy_from_slice(s.x.as_slice());
                model.forward_slice(s.h, s.t.unwrap_or(0.0), &mut buf, &mut self.ws);
                buf.iter()
                    .zip(s.y.as_slice())
                    .map(|(o, y)| (o - y) * (o - y))
                    .sum::<f64>()
            })
            .sum();
        total / batch.len() as f64
    }
}

pub(crate) fn validate_batch(model: &SympNetModel, batch: &[TrainingSample]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let nonauto = model.kind().is_non_autonomous();
    for s in batch {
        for p in [&s.x, &s.y] {
            if p.dim() != model.dim() {
                return Err(Error::DimensionMismatch {
                    expected: model.dim(),
                    got: p.dim(),
                });
            }
        }
        if s.t.is_some() != nonauto {
            return Err(Error::ClockMismatch {
                kind: model.kind(),
                needs_clock: nonauto,
            });
        }
    }
    Ok(())
}

/// Loss over `batch` and its exact gradient with respect to every network
/// parameter.
pub fn loss_and_gradients(
    model: &SympNetModel,
    batch: &[TrainingSample],
    loss: Loss,
) -> Result<(f64, ParamGradients)> {
    validate_batch(model, batch)?;
    let offsets = model.param_offsets();
    let mut grad = vec![0.0; model.param_count()];
    let value = match loss {
        Loss::Mse => GradientEngine::new().accumulate_mse(model, batch, &mut grad, &offsets),
    };
    Ok((value, ParamGradients::from_flat(model, &grad)))
}

/// Vector-Jacobian product of one evaluation `ψ(h, t, x)` with `ybar`:
/// adjoints with respect to `x`, the parameters, `h` and `t`.
pub fn pullback(
    model: &SympNetModel,
    h: f64,
    t: Option<f64>,
    x: &PhasePoint,
    ybar: &[f64],
) -> Result<Pullback> {
    // Reuse the clock/dimension checks of the forward pass.
    model.forward(h, t, x)?;
    if ybar.len() != x.as_slice().len() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: ybar.len() / 2,
        });
    }
    let offsets = model.param_offsets();
    let mut grad = vec![0.0; model.param_count()];
    let mut engine = GradientEngine::new();
    let t = t.unwrap_or(0.0);
    model.forward_taped(h, t, x.as_slice(), &mut engine.tape, &mut engine.ws);
    let (hbar, tbar) = engine.backprop(model, h, t, ybar, &mut grad, &offsets);
    Ok(Pullback {
        x: engine.xbar.clone(),
        params: ParamGradients::from_flat(model, &grad),
        h: hbar,
        t: tbar,
    })
}
