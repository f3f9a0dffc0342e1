use std::f64::consts::{FRAC_PI_2, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::{FlowAccuracy, Forcing, HamiltonianSystem, SystemId};
use crate::integrators::composition6_step;
use crate::phase::PhasePoint;

/// One supervised example `([x, t, h], y)` with `y = Φ(t; h, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub x: PhasePoint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    pub h: f64,
    pub y: PhasePoint,
}

/// How labels are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum LabelOracle {
    /// The system's closed-form flow.
    Analytic,
    /// `substeps` steps of the 6th-order composition with size `h/substeps`.
    Composition6 { substeps: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub system: SystemId,
    #[serde(default)]
    pub forcing: Forcing,
    pub n: usize,
    /// Sampling interval per coordinate, `p` coordinates first.
    pub x_box: Vec<[f64; 2]>,
    pub h_range: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_range: Option<[f64; 2]>,
    pub label_oracle: LabelOracle,
    pub seed: u64,
}

impl DatasetSpec {
    /// 40 points in `[−√2, √2] × [−π/2, π/2]`, `h ∈ [0.2, 0.5]`, labels from
    /// ten composition substeps.
    pub fn pendulum(seed: u64) -> Self {
        Self {
            system: SystemId::Pendulum,
            forcing: Forcing::default(),
            n: 40,
            x_box: vec![[-SQRT_2, SQRT_2], [-FRAC_PI_2, FRAC_PI_2]],
            h_range: [0.2, 0.5],
            t_range: None,
            label_oracle: LabelOracle::Composition6 { substeps: 10 },
            seed,
        }
    }

    /// Same sampling as the pendulum, labelled by the closed-form flow.
    pub fn linear(seed: u64) -> Self {
        Self {
            system: SystemId::Linear,
            label_oracle: LabelOracle::Analytic,
            ..Self::pendulum(seed)
        }
    }

    /// 1600 points in `[−3.5, 2] × [−4, 4]`, `t ∈ [0, 16]`, `h ∈ [0, 0.3]`.
    pub fn forced_ho(seed: u64) -> Self {
        Self {
            system: SystemId::ForcedHo,
            forcing: Forcing::default(),
            n: 1600,
            x_box: vec![[-3.5, 2.0], [-4.0, 4.0]],
            h_range: [0.0, 0.3],
            t_range: Some([0.0, 16.0]),
            label_oracle: LabelOracle::Analytic,
            seed,
        }
    }

    pub fn default_for(system: SystemId, seed: u64) -> Self {
        match system {
            SystemId::Pendulum => Self::pendulum(seed),
            SystemId::Linear => Self::linear(seed),
            SystemId::ForcedHo => Self::forced_ho(seed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n == 0 {
            return bad("dataset needs n >= 1".into());
        }
        let ok = |r: &[f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1];
        if self.x_box.is_empty() || self.x_box.len() % 2 != 0 || !self.x_box.iter().all(ok) {
            return bad("x_box needs 2d nonempty finite ranges".into());
        }
        if !ok(&self.h_range) || self.h_range[0] < 0.0 {
            return bad("h_range must be a nonempty range of nonnegative steps".into());
        }
        if let Some(t) = &self.t_range {
            if !ok(t) {
                return bad("t_range must be a nonempty finite range".into());
            }
        }
        if let LabelOracle::Composition6 { substeps: 0 } = self.label_oracle {
            return bad("composition oracle needs at least one substep".into());
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..=r[1])
    }
}

/// Labels `x` by the chosen oracle.
pub fn label(
    sys: &dyn HamiltonianSystem,
    oracle: LabelOracle,
    t: f64,
    h: f64,
    x: &PhasePoint,
) -> Result<PhasePoint> {
    match oracle {
        LabelOracle::Analytic => {
            if sys.flow_accuracy() != Some(FlowAccuracy::Analytic) {
                return Err(Error::NoExactFlow(sys.name().to_string()));
            }
            sys.exact_flow(t, h, x)
                .ok_or_else(|| Error::NoExactFlow(sys.name().to_string()))
        }
        LabelOracle::Composition6 { substeps } => {
            let sep = sys
                .as_separable()
                .ok_or_else(|| Error::NotSeparable(sys.name().to_string()))?;
            let sub = h / substeps as f64;
            let mut y = x.clone();
            for i in 0..substeps {
                y = composition6_step(sep, sub, t + i as f64 * sub, &y);
            }
            Ok(y)
        }
    }
}

/// Draws `spec.n` samples. Per sample the draws are: the `2d` coordinates,
/// then `t` (if sampled), then `h`.
pub fn sample_dataset(spec: &DatasetSpec) -> Result<Vec<TrainingSample>> {
    spec.validate()?;
    let sys = spec.system.build(spec.forcing)?;
    if spec.x_box.len() != 2 * sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            got: spec.x_box.len() / 2,
        });
    }
    if sys.is_time_dependent() != spec.t_range.is_some() {
        return Err(Error::InvalidConfig(format!(
            "system `{}` {} a t_range",
            spec.system,
            if sys.is_time_dependent() {
                "needs"
            } else {
                "takes no"
            }
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let coords: Vec<f64> = spec.x_box.iter().map(|r| uniform(&mut rng, *r)).collect();
        let x = PhasePoint::from_vec(coords)?;
        let t = spec.t_range.map(|r| uniform(&mut rng, r));
        let h = uniform(&mut rng, spec.h_range);
        let y = label(sys.as_ref(), spec.label_oracle, t.unwrap_or(0.0), h, &x)?;
        out.push(TrainingSample { x, t, h, y });
    }
    Ok(out)
}
