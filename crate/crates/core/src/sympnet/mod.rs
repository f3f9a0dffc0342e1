//! Time-adaptive symplectic networks.
//!
//! Five architecture families are supported, all built from shears whose
//! amount is proportional to the step `h`, so `ψ(0, x) = x`:
//!
//! | kind  | elements                                                        |
//! |-------|-----------------------------------------------------------------|
//! | TG    | gradient modules `Kᵀdiag(a)σ(Kx + b)`, alternating up/low       |
//! | OTLA  | `h`-scaled linear modules with bias, interleaved with `diag(a)σ` |
//! | TLA   | blocks `v⁻¹ ∘ w(h) ∘ v`, `v` an `h`-free linear module          |
//! | NATG  | TG with a clock term `ct` inside σ                              |
//! | NATLA | TLA with a clock term `ct` inside σ                             |
//!
//! The non-autonomous kinds thread a clock: element `i` of `m` sees
//! `t + i·h/m`, so a full pass advances the clock by `h`.
//!
//! The approximation results for these networks assume an activation whose
//! `r`-th derivative has a finite, nonzero integral; `tanh` satisfies this
//! for `r ≥ 1`. It is not checked at runtime.

mod checkpoint;
mod modules;

use std::fmt;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::PhasePoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_FORMAT_VERSION};
pub use modules::{
    sym_len, ActivationModule, ConjugatedBlock, Direction, GradientModule, LinearModule, Module,
    Scratch,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kind {
    #[serde(rename = "TG")]
    Tg,
    #[serde(rename = "OTLA")]
    Otla,
    #[serde(rename = "TLA")]
    Tla,
    #[serde(rename = "NATG")]
    Natg,
    #[serde(rename = "NATLA")]
    Natla,
}

impl Kind {
    pub const ALL: [Kind; 5] = [Kind::Tg, Kind::Otla, Kind::Tla, Kind::Natg, Kind::Natla];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Tg => "TG",
            Kind::Otla => "OTLA",
            Kind::Tla => "TLA",
            Kind::Natg => "NATG",
            Kind::Natla => "NATLA",
        }
    }

    pub fn is_non_autonomous(self) -> bool {
        matches!(self, Kind::Natg | Kind::Natla)
    }

    pub fn uses_gradient_modules(self) -> bool {
        matches!(self, Kind::Tg | Kind::Natg)
    }

    /// Kinds whose `h`-derivative at zero is provably a separable vector
    /// field.
    pub fn is_provably_separable(self) -> bool {
        matches!(self, Kind::Tg | Kind::Otla | Kind::Natg)
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Kind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArch(format!("unknown network kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn value(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// `(σ(z), σ′(z))` sharing one transcendental evaluation.
    #[inline]
    pub fn value_and_derivative(self, z: f64) -> (f64, f64) {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                (t, 1.0 - t * t)
            }
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + (-z).exp());
                (s, s * (1.0 - s))
            }
        }
    }

    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 - s)
            }
        }
    }
}

/// Size of a network.
///
/// `layers` counts gradient modules for TG/NATG, conjugated blocks for
/// TLA/NATLA, and linear modules for OTLA (which then has `layers − 1`
/// activation modules between them).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Arch {
    pub layers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sublayers: Option<usize>,
}

impl Arch {
    pub fn gradient(layers: usize, width: usize) -> Self {
        Self {
            layers,
            width: Some(width),
            sublayers: None,
        }
    }

    pub fn linear(layers: usize, sublayers: usize) -> Self {
        Self {
            layers,
            width: None,
            sublayers: Some(sublayers),
        }
    }

    pub fn validate(&self, kind: Kind) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::InvalidArch("layers must be positive".into()));
        }
        if kind.uses_gradient_modules() {
            match self.width {
                Some(w) if w > 0 => Ok(()),
                _ => Err(Error::InvalidArch(format!("{kind} needs a positive width"))),
            }
        } else {
            match self.sublayers {
                Some(s) if s > 0 => Ok(()),
                _ => Err(Error::InvalidArch(format!(
                    "{kind} needs a positive sublayer count"
                ))),
            }
        }
    }

    /// Closed-form number of trainable scalars for a `d`-dimensional net.
    pub fn param_count(&self, kind: Kind, d: usize) -> Result<usize> {
        self.validate(kind)?;
        let l = self.layers;
        let linear = |s: usize| s * sym_len(d);
        Ok(match kind {
            Kind::Tg => l * self.width.unwrap_or(0) * (d + 2),
            Kind::Natg => l * self.width.unwrap_or(0) * (d + 3),
            Kind::Otla => l * (linear(self.sublayers.unwrap_or(0)) + 2 * d) + (l - 1) * d,
            Kind::Tla => l * (linear(self.sublayers.unwrap_or(0)) + 2 * d),
            Kind::Natla => l * (linear(self.sublayers.unwrap_or(0)) + 3 * d),
        })
    }
}

/// Initialization scales. Every parameter is drawn from a centered normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitConfig {
    /// Standard deviation of `K` entries; `None` means `1/√width`.
    pub k_scale: Option<f64>,
    /// Standard deviation of every other parameter (`a`, `b`, `c`, `S`, bias).
    pub small_scale: f64,
    /// Direction of the first module; later ones alternate.
    pub start_direction: Direction,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            k_scale: None,
            small_scale: 0.01,
            start_direction: Direction::Up,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SympNetModel {
    kind: Kind,
    d: usize,
    activation: Activation,
    arch: Arch,
    seed: Option<u64>,
    modules: Vec<Module>,
}

pub fn init_model(kind: Kind, d: usize, arch: Arch, seed: u64) -> Result<SympNetModel> {
    init_model_with(kind, d, arch, seed, &InitConfig::default())
}

pub fn init_model_with(
    kind: Kind,
    d: usize,
    arch: Arch,
    seed: u64,
    cfg: &InitConfig,
) -> Result<SympNetModel> {
    if d == 0 {
        return Err(Error::InvalidArch("dimension must be positive".into()));
    }
    arch.validate(kind)?;
    if !(cfg.small_scale.is_finite() && cfg.small_scale >= 0.0) {
        return Err(Error::InvalidConfig(
            "small_scale must be finite and >= 0".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let small = Normal::new(0.0, cfg.small_scale).expect("checked scale");
    let mut draw = |n: usize, dist: &Normal<f64>| -> Vec<f64> {
        (0..n).map(|_| dist.sample(&mut rng)).collect()
    };
    let nonauto = kind.is_non_autonomous();
    let dir_at = |i: usize| {
        if i % 2 == 0 {
            cfg.start_direction
        } else {
            cfg.start_direction.flip()
        }
    };

    let mut modules = Vec::new();
    match kind {
        Kind::Tg | Kind::Natg => {
            let n = arch.width.expect("validated");
            let k_std = cfg.k_scale.unwrap_or(1.0 / (n as f64).sqrt());
            let k_dist = Normal::new(0.0, k_std)
                .map_err(|e| Error::InvalidConfig(format!("k_scale: {e}")))?;
            for i in 0..arch.layers {
                let k = draw(n * d, &k_dist);
                let a = draw(n, &small);
                let b = draw(n, &small);
                let c = nonauto.then(|| draw(n, &small));
                modules.push(Module::Gradient(GradientModule {
                    k,
                    a,
                    b,
                    c,
                    direction: dir_at(i),
                }));
            }
        }
        Kind::Otla => {
            let subs = arch.sublayers.expect("validated");
            for i in 0..arch.layers {
                let s = (0..subs).map(|_| draw(sym_len(d), &small)).collect();
                let bias = Some(draw(2 * d, &small));
                modules.push(Module::Linear(LinearModule {
                    d,
                    s,
                    start: cfg.start_direction,
                    bias,
                }));
                if i + 1 < arch.layers {
                    let a = draw(d, &small);
                    modules.push(Module::Activation(ActivationModule {
                        a,
                        b: None,
                        c: None,
                        direction: dir_at(i),
                    }));
                }
            }
        }
        Kind::Tla | Kind::Natla => {
            let subs = arch.sublayers.expect("validated");
            for i in 0..arch.layers {
                let s = (0..subs).map(|_| draw(sym_len(d), &small)).collect();
                let a = draw(d, &small);
                let b = Some(draw(d, &small));
                let c = nonauto.then(|| draw(d, &small));
                modules.push(Module::Conjugated(ConjugatedBlock {
                    linear: LinearModule {
                        d,
                        s,
                        start: cfg.start_direction,
                        bias: None,
                    },
                    activation: ActivationModule {
                        a,
                        b,
                        c,
                        direction: dir_at(i),
                    },
                }));
            }
        }
    }
    Ok(SympNetModel {
        kind,
        d,
        activation: Activation::Tanh,
        arch,
        seed: Some(seed),
        modules,
    })
}

impl SympNetModel {
    /// Assembles a model from explicit modules, checking that they fit the
    /// kind.
    pub fn from_modules(
        kind: Kind,
        d: usize,
        activation: Activation,
        arch: Arch,
        modules: Vec<Module>,
    ) -> Result<Self> {
        let model = Self {
            kind,
            d,
            activation,
            arch,
            seed: None,
            modules,
        };
        model.check_structure()?;
        Ok(model)
    }

    fn check_structure(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArch(msg));
        if self.d == 0 || self.modules.is_empty() {
            return bad("model needs d >= 1 and at least one module".into());
        }
        let nonauto = self.kind.is_non_autonomous();
        let d = self.d;
        let linear_ok = |l: &LinearModule, with_bias: bool| {
            l.d == d
                && !l.s.is_empty()
                && l.s.iter().all(|s| s.len() == sym_len(d))
                && l.bias.as_ref().map(Vec::len) == with_bias.then_some(2 * d)
        };
        let act_ok = |a: &ActivationModule, with_b: bool| {
            a.a.len() == d
                && a.b.as_ref().map(Vec::len) == with_b.then_some(d)
                && a.c.as_ref().map(Vec::len) == nonauto.then_some(d)
        };
        for (i, m) in self.modules.iter().enumerate() {
            let ok = match (self.kind, m) {
                (Kind::Tg | Kind::Natg, Module::Gradient(g)) => {
                    let n = g.a.len();
                    n > 0
                        && g.k.len() == n * d
                        && g.b.len() == n
                        && g.c.as_ref().map(Vec::len) == nonauto.then_some(n)
                }
                (Kind::Otla, Module::Linear(l)) => i % 2 == 0 && linear_ok(l, true),
                (Kind::Otla, Module::Activation(a)) => i % 2 == 1 && act_ok(a, false),
                (Kind::Tla | Kind::Natla, Module::Conjugated(c)) => {
                    linear_ok(&c.linear, false) && act_ok(&c.activation, true)
                }
                _ => false,
            };
            if !ok {
                return bad(format!(
                    "module {i} does not fit a {} network of dimension {d}",
                    self.kind
                ));
            }
        }
        if self.kind == Kind::Otla && self.modules.len() % 2 == 0 {
            return bad("OTLA networks must start and end with a linear module".into());
        }
        if self.all_params().iter().any(|v| !v.is_finite()) {
            return bad("parameters must be finite".into());
        }
        Ok(())
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn modules(&self) -> &[Module] {
        &self.modules
    }

    /// Number of clock-advancing elements `m` (the clock moves by `h/m`
    /// per element in the non-autonomous kinds).
    pub fn module_count(&self) -> usize {
        self.modules.len()
    }

    pub fn param_count(&self) -> usize {
        self.modules.iter().map(Module::param_count).sum()
    }

    /// All parameters, module by module, in checkpoint order.
    pub fn all_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for m in &self.modules {
            m.write_params(&mut out);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut at = 0;
        for m in &mut self.modules {
            at += m.read_params(&params[at..]);
        }
        Ok(())
    }

    /// Offsets of each module's slice in the flat parameter vector.
    pub fn param_offsets(&self) -> Vec<usize> {
        let mut offs = Vec::with_capacity(self.modules.len() + 1);
        let mut at = 0;
        offs.push(0);
        for m in &self.modules {
            at += m.param_count();
            offs.push(at);
        }
        offs
    }

    /// Clock seen by element `i`.
    #[inline]
    pub(crate) fn clock(&self, t: f64, h: f64, i: usize) -> f64 {
        if self.kind.is_non_autonomous() {
            t + h * (i as f64 / self.modules.len() as f64)
        } else {
            t
        }
    }

    /// `∂clock(i)/∂h`.
    #[inline]
    pub(crate) fn clock_rate(&self, i: usize) -> f64 {
        if self.kind.is_non_autonomous() {
            i as f64 / self.modules.len() as f64
        } else {
            0.0
        }
    }

    fn check_inputs(&self, t: Option<f64>, x: &[f64]) -> Result<f64> {
        if x.len() != 2 * self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: x.len() / 2,
            });
        }
        match (self.kind.is_non_autonomous(), t) {
            (true, Some(t)) => Ok(t),
            (false, None) => Ok(0.0),
            (needs_clock, _) => Err(Error::ClockMismatch {
                kind: self.kind,
                needs_clock,
            }),
        }
    }

    /// Clock argument appropriate for this kind: `Some(t)` for
    /// non-autonomous networks, `None` otherwise.
    pub fn clock_arg(&self, t: f64) -> Option<f64> {
        self.kind.is_non_autonomous().then_some(t)
    }

    /// `ψ(h, t, x)`. `t` must be given exactly for the non-autonomous kinds.
    pub fn forward(&self, h: f64, t: Option<f64>, x: &PhasePoint) -> Result<PhasePoint> {
        let t = self.check_inputs(t, x.as_slice())?;
        let mut y = x.clone();
        self.forward_slice(h, t, y.as_mut_slice(), &mut Scratch::default());
        Ok(y)
    }

    /// Like [`forward`](Self::forward), also returning the threaded clock
    /// after the pass (`t + h` for non-autonomous kinds, `t` otherwise).
    pub fn forward_with_clock(
        &self,
        h: f64,
        t: Option<f64>,
        x: &PhasePoint,
    ) -> Result<(PhasePoint, Option<f64>)> {
        let y = self.forward(h, t, x)?;
        let t_out = t.map(|t| self.clock(t, h, self.modules.len()));
        Ok((y, t_out))
    }

    /// Unchecked in-place evaluation on a flat `[p, q]` buffer.
    pub fn forward_slice(&self, h: f64, t: f64, x: &mut [f64], ws: &mut Scratch) {
        for (i, m) in self.modules.iter().enumerate() {
            m.forward(self.activation, h, self.clock(t, h, i), x, ws);
        }
    }

    /// Evaluation that records the input of every module in `tape`
    /// (`(modules + 1) × 2d` values, the last row being the output).
    pub(crate) fn forward_taped(
        &self,
        h: f64,
        t: f64,
        x: &[f64],
        tape: &mut Vec<f64>,
        ws: &mut Scratch,
    ) {
        let dd = 2 * self.d;
        tape.clear();
        tape.extend_from_slice(x);
        for (i, m) in self.modules.iter().enumerate() {
            let start = tape.len();
            tape.extend_from_within(start - dd..start);
            m.forward(
                self.activation,
                h,
                self.clock(t, h, i),
                &mut tape[start..],
                ws,
            );
        }
    }

    /// Exact Jacobian `∂ψ/∂x` at fixed `(h, t)`, formed by pushing the
    /// identity through every module's tangent map.
    pub fn forward_jacobian(&self, h: f64, t: Option<f64>, x: &PhasePoint) -> Result<DMatrix<f64>> {
        let t = self.check_inputs(t, x.as_slice())?;
        let dd = 2 * self.d;
        let mut ws = Scratch::default();
        let mut state = x.as_slice().to_vec();
        // columns of the running Jacobian, stored contiguously
        let mut cols = vec![0.0; dd * dd];
        for j in 0..dd {
            cols[j * dd + j] = 1.0;
        }
        for (i, m) in self.modules.iter().enumerate() {
            let ti = self.clock(t, h, i);
            for col in cols.chunks_mut(dd) {
                m.jvp(self.activation, h, ti, &state, col, &mut ws);
            }
            m.forward(self.activation, h, ti, &mut state, &mut ws);
        }
        Ok(DMatrix::from_column_slice(dd, dd, &cols))
    }

    /// `ψ(h, t, x) − x` accumulated so that the result carries no
    /// round-off from `x` itself.
    pub fn displacement(&self, h: f64, t: Option<f64>, x: &PhasePoint) -> Result<Vec<f64>> {
        let t = self.check_inputs(t, x.as_slice())?;
        let mut base = x.as_slice().to_vec();
        let mut off = vec![0.0; base.len()];
        let mut ws = Scratch::default();
        for (i, m) in self.modules.iter().enumerate() {
            m.forward_split(
                self.activation,
                h,
                self.clock(t, h, i),
                &mut base,
                &mut off,
                &mut ws,
            );
        }
        // `base` went through h-free linear maps and their inverses only.
        for (o, (b, x0)) in off.iter_mut().zip(base.iter().zip(x.as_slice())) {
            *o += b - x0;
        }
        Ok(off)
    }

    /// `∂ψ/∂h` at `h = 0` by a central difference with step `1e-6`.
    ///
    /// By the chain rule at `h = 0` this is the vector field `J⁻¹∇H̃` of the
    /// Hamiltonian the network has implicitly learned.
    pub fn dh_at_zero(&self, t: Option<f64>, x: &PhasePoint) -> Result<Vec<f64>> {
        const STEP: f64 = 1e-6;
        let plus = self.displacement_raw(STEP, t, x)?;
        let minus = self.displacement_raw(-STEP, t, x)?;
        Ok(plus
            .iter()
            .zip(&minus)
            .map(|(a, b)| (a - b) / (2.0 * STEP))
            .collect())
    }

    /// Split evaluation without folding the `base` drift back in; the
    /// drift is `h`-independent and cancels in differences.
    fn displacement_raw(&self, h: f64, t: Option<f64>, x: &PhasePoint) -> Result<Vec<f64>> {
        let t = self.check_inputs(t, x.as_slice())?;
        let mut base = x.as_slice().to_vec();
        let mut off = vec![0.0; base.len()];
        let mut ws = Scratch::default();
        for (i, m) in self.modules.iter().enumerate() {
            m.forward_split(
                self.activation,
                h,
                self.clock(t, h, i),
                &mut base,
                &mut off,
                &mut ws,
            );
        }
        Ok(off)
    }
}

/// Applies an `h`-free linear module: `L(x)`.
pub fn linear_module_apply(params: &LinearModule, x: &PhasePoint) -> Result<PhasePoint> {
    linear_run(params, false, x)
}

/// Applies `L⁻¹`: negated shears in reverse order.
pub fn linear_module_inverse(params: &LinearModule, x: &PhasePoint) -> Result<PhasePoint> {
    linear_run(params, true, x)
}

fn linear_run(params: &LinearModule, inverse: bool, x: &PhasePoint) -> Result<PhasePoint> {
    if x.dim() != params.d {
        return Err(Error::DimensionMismatch {
            expected: params.d,
            got: x.dim(),
        });
    }
    let mut y = x.clone();
    params.run(1.0, inverse, y.as_mut_slice());
    Ok(y)
}

/// Parameter count of a model.
pub fn param_count(model: &SympNetModel) -> usize {
    model.param_count()
}

/// `‖DᵀJD − J‖∞` (max-abs entry) with `J = [0 I; −I 0]`.
pub fn symplectic_residual(jac: &DMatrix<f64>) -> f64 {
    let n = jac.nrows();
    let d = n / 2;
    let mut j = DMatrix::<f64>::zeros(n, n);
    for i in 0..d {
        j[(i, d + i)] = 1.0;
        j[(d + i, i)] = -1.0;
    }
    let r = jac.transpose() * &j * jac - &j;
    r.amax()
}
