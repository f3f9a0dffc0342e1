//! Benchmark Hamiltonian systems and their reference flows.
//!
//! Phase-space vectors are laid out as `[p, q]`. Every system exposes its
//! energy and full gradient; separable systems additionally expose the split
//! gradients `∇K(p, t)` and `∇V(q, t)` that the splitting integrators use.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrators;
use crate::phase::PhasePoint;

/// How trustworthy a system's `exact_flow` is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowAccuracy {
    /// Closed-form solution.
    Analytic,
    /// High-order numerical integration.
    ReferenceNumeric,
}

pub trait HamiltonianSystem: Send + Sync {
    fn name(&self) -> &str;

    /// Number of degrees of freedom `d`.
    fn dim(&self) -> usize;

    fn is_time_dependent(&self) -> bool {
        false
    }

    /// `H(p, q, t)`; `t` is ignored by autonomous systems.
    fn hamiltonian(&self, x: &[f64], t: f64) -> f64;

    /// Writes `(∂H/∂p, ∂H/∂q)` into `out`.
    fn gradient(&self, x: &[f64], t: f64, out: &mut [f64]);

    fn as_separable(&self) -> Option<&dyn Separable> {
        None
    }

    fn flow_accuracy(&self) -> Option<FlowAccuracy> {
        None
    }

    /// Flow over `h` starting at clock time `t0`.
    fn exact_flow(&self, _t0: f64, _h: f64, _x: &PhasePoint) -> Option<PhasePoint> {
        None
    }

    /// Hamiltonian vector field `ẋ = (−∂H/∂q, ∂H/∂p)`.
    fn vector_field(&self, x: &[f64], t: f64, out: &mut [f64]) {
        let d = self.dim();
        let mut grad = vec![0.0; 2 * d];
        self.gradient(x, t, &mut grad);
        for i in 0..d {
            out[i] = -grad[d + i];
            out[d + i] = grad[i];
        }
    }
}

/// `H(p, q, t) = K(p, t) + V(q, t)`.
pub trait Separable: HamiltonianSystem {
    fn grad_k(&self, p: &[f64], t: f64, out: &mut [f64]);
    fn grad_v(&self, q: &[f64], t: f64, out: &mut [f64]);
}

/// Number of composition substeps used to label one pendulum step.
pub const PENDULUM_LABEL_SUBSTEPS: usize = 10;

/// `H(p, q) = ½p² − cos q`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Pendulum;

pub fn pendulum() -> Pendulum {
    Pendulum
}

impl HamiltonianSystem for Pendulum {
    fn name(&self) -> &str {
        "pendulum"
    }

    fn dim(&self) -> usize {
        1
    }

    fn hamiltonian(&self, x: &[f64], _t: f64) -> f64 {
        0.5 * x[0] * x[0] - x[1].cos()
    }

    fn gradient(&self, x: &[f64], _t: f64, out: &mut [f64]) {
        out[0] = x[0];
        out[1] = x[1].sin();
    }

    fn as_separable(&self) -> Option<&dyn Separable> {
        Some(self)
    }

    fn flow_accuracy(&self) -> Option<FlowAccuracy> {
        Some(FlowAccuracy::ReferenceNumeric)
    }

    fn exact_flow(&self, t0: f64, h: f64, x: &PhasePoint) -> Option<PhasePoint> {
        let sub = h / PENDULUM_LABEL_SUBSTEPS as f64;
        let mut y = x.clone();
        for i in 0..PENDULUM_LABEL_SUBSTEPS {
            y = integrators::composition6_step(self, sub, t0 + i as f64 * sub, &y);
        }
        Some(y)
    }
}

impl Separable for Pendulum {
    fn grad_k(&self, p: &[f64], _t: f64, out: &mut [f64]) {
        out[0] = p[0];
    }

    fn grad_v(&self, q: &[f64], _t: f64, out: &mut [f64]) {
        out[0] = q[0].sin();
    }
}

/// `H(p, q) = ½p² + 0.4pq + ½q²`, a linear system that is not separable.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearNonseparable;

pub fn linear_nonseparable() -> LinearNonseparable {
    LinearNonseparable
}

impl LinearNonseparable {
    pub const COUPLING: f64 = 0.4;

    /// Generator `A` of `ẋ = A x` in `[p, q]` order.
    pub fn generator(&self) -> [[f64; 2]; 2] {
        let c = Self::COUPLING;
        [[-c, -1.0], [1.0, c]]
    }

    /// Closed-form `exp(hA)`. Since `A² = (c² − 1) I`, the exponential is
    /// `cos(ωh) I + sin(ωh)/ω A` with `ω = √(1 − c²)`.
    pub fn propagator(&self, h: f64) -> [[f64; 2]; 2] {
        let c = Self::COUPLING;
        let w = (1.0 - c * c).sqrt();
        let (s, co) = (w * h).sin_cos();
        let k = s / w;
        let a = self.generator();
        [
            [co + k * a[0][0], k * a[0][1]],
            [k * a[1][0], co + k * a[1][1]],
        ]
    }
}

impl HamiltonianSystem for LinearNonseparable {
    fn name(&self) -> &str {
        "linear"
    }

    fn dim(&self) -> usize {
        1
    }

    fn hamiltonian(&self, x: &[f64], _t: f64) -> f64 {
        let (p, q) = (x[0], x[1]);
        0.5 * p * p + Self::COUPLING * p * q + 0.5 * q * q
    }

    fn gradient(&self, x: &[f64], _t: f64, out: &mut [f64]) {
        let (p, q) = (x[0], x[1]);
        out[0] = p + Self::COUPLING * q;
        out[1] = Self::COUPLING * p + q;
    }

    fn flow_accuracy(&self) -> Option<FlowAccuracy> {
        Some(FlowAccuracy::Analytic)
    }

    fn exact_flow(&self, _t0: f64, h: f64, x: &PhasePoint) -> Option<PhasePoint> {
        if h == 0.0 {
            return Some(x.clone());
        }
        let m = self.propagator(h);
        let (p, q) = (x.p()[0], x.q()[0]);
        Some(PhasePoint::from_pq(
            m[0][0] * p + m[0][1] * q,
            m[1][0] * p + m[1][1] * q,
        ))
    }
}

/// Driving parameters of the forced oscillator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Forcing {
    pub omega0: f64,
    pub omega: f64,
    pub f0: f64,
}

impl Default for Forcing {
    fn default() -> Self {
        Self {
            omega0: 1.0,
            omega: 2.0,
            f0: 1.0,
        }
    }
}

/// `H(p, q, t) = ½p² + ½ω₀²q² − F₀ sin(ωt) q`.
#[derive(Debug, Clone, Copy)]
pub struct ForcedHarmonicOscillator {
    forcing: Forcing,
}

pub fn forced_harmonic_oscillator(
    omega0: f64,
    omega: f64,
    f0: f64,
) -> Result<ForcedHarmonicOscillator> {
    ForcedHarmonicOscillator::new(Forcing { omega0, omega, f0 })
}

impl ForcedHarmonicOscillator {
    pub fn new(forcing: Forcing) -> Result<Self> {
        let Forcing { omega0, omega, f0 } = forcing;
        if !(omega0.is_finite() && omega.is_finite() && f0.is_finite()) {
            return Err(Error::InvalidConfig(
                "forcing parameters must be finite".into(),
            ));
        }
        if omega0 <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "omega0 must be positive, got {omega0}"
            )));
        }
        if omega0 * omega0 == omega * omega {
            return Err(Error::Resonant(omega));
        }
        Ok(Self { forcing })
    }

    pub fn forcing(&self) -> Forcing {
        self.forcing
    }

    /// Particular solution `(p_p(t), q_p(t))`.
    fn particular(&self, t: f64) -> (f64, f64) {
        let Forcing { omega0, omega, f0 } = self.forcing;
        let amp = f0 / (omega0 * omega0 - omega * omega);
        let (s, c) = (omega * t).sin_cos();
        (omega * amp * c, amp * s)
    }
}

impl HamiltonianSystem for ForcedHarmonicOscillator {
    fn name(&self) -> &str {
        "forced_ho"
    }

    fn dim(&self) -> usize {
        1
    }

    fn is_time_dependent(&self) -> bool {
        true
    }

    fn hamiltonian(&self, x: &[f64], t: f64) -> f64 {
        let Forcing { omega0, omega, f0 } = self.forcing;
        let (p, q) = (x[0], x[1]);
        0.5 * p * p + 0.5 * omega0 * omega0 * q * q - f0 * (omega * t).sin() * q
    }

    fn gradient(&self, x: &[f64], t: f64, out: &mut [f64]) {
        out[0] = x[0];
        self.grad_v(&x[1..], t, &mut out[1..]);
    }

    fn as_separable(&self) -> Option<&dyn Separable> {
        Some(self)
    }

    fn flow_accuracy(&self) -> Option<FlowAccuracy> {
        Some(FlowAccuracy::Analytic)
    }

    /// General solution = particular + homogeneous, with the two homogeneous
    /// constants `q_h(t) = A cos ω₀t + B sin ω₀t` fitted to the state at `t0`.
    fn exact_flow(&self, t0: f64, h: f64, x: &PhasePoint) -> Option<PhasePoint> {
        if h == 0.0 {
            return Some(x.clone());
        }
        let omega0 = self.forcing.omega0;
        let (pp0, qp0) = self.particular(t0);
        let (ph0, qh0) = (x.p()[0] - pp0, x.q()[0] - qp0);
        // [cos −sin; sin cos] is orthogonal, so the 2×2 fit is a transpose.
        let (s0, c0) = (omega0 * t0).sin_cos();
        let a = c0 * qh0 - s0 * ph0 / omega0;
        let b = s0 * qh0 + c0 * ph0 / omega0;

        let t1 = t0 + h;
        let (s1, c1) = (omega0 * t1).sin_cos();
        let (pp1, qp1) = self.particular(t1);
        let q = a * c1 + b * s1 + qp1;
        let p = omega0 * (b * c1 - a * s1) + pp1;
        Some(PhasePoint::from_pq(p, q))
    }
}

impl Separable for ForcedHarmonicOscillator {
    fn grad_k(&self, p: &[f64], _t: f64, out: &mut [f64]) {
        out[0] = p[0];
    }

    fn grad_v(&self, q: &[f64], t: f64, out: &mut [f64]) {
        let Forcing { omega0, omega, f0 } = self.forcing;
        out[0] = omega0 * omega0 * q[0] - f0 * (omega * t).sin();
    }
}

/// Identifier of a benchmark system in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemId {
    Pendulum,
    Linear,
    ForcedHo,
}

impl SystemId {
    pub fn as_str(self) -> &'static str {
        match self {
            SystemId::Pendulum => "pendulum",
            SystemId::Linear => "linear",
            SystemId::ForcedHo => "forced_ho",
        }
    }

    pub fn build(self, forcing: Forcing) -> Result<Box<dyn HamiltonianSystem>> {
        Ok(match self {
            SystemId::Pendulum => Box::new(Pendulum),
            SystemId::Linear => Box::new(LinearNonseparable),
            SystemId::ForcedHo => Box::new(ForcedHarmonicOscillator::new(forcing)?),
        })
    }
}

impl std::str::FromStr for SystemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pendulum" => Ok(SystemId::Pendulum),
            "linear" | "linear_nonseparable" => Ok(SystemId::Linear),
            "forced_ho" | "forced_harmonic_oscillator" => Ok(SystemId::ForcedHo),
            other => Err(Error::UnknownSystem(other.to_string())),
        }
    }
}

impl std::fmt::Display for SystemId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
