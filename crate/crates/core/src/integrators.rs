//! Explicit one-step methods for separable Hamiltonians, a composition
//! driver, and an RK4 stepper used only as a cross-check oracle.
//!
//! Time-dependent systems get their gradients evaluated at a clock time
//! threaded by the caller; within a step the clock advances with the
//! sub-stage the gradient belongs to.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::{HamiltonianSystem, Separable};
use crate::phase::PhasePoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepScheme {
    SymplecticEulerVK,
    StormerVerlet,
    Composition6,
    Rk4Oracle,
}

impl StepScheme {
    pub fn order(self) -> u32 {
        match self {
            StepScheme::SymplecticEulerVK => 1,
            StepScheme::StormerVerlet => 2,
            StepScheme::Rk4Oracle => 4,
            StepScheme::Composition6 => 6,
        }
    }

    pub fn is_symplectic(self) -> bool {
        !matches!(self, StepScheme::Rk4Oracle)
    }
}

/// Symmetric 9-stage composition of Störmer–Verlet of order 6
/// (Kahan & Li, Math. Comp. 66 (1997), method `s9odr6a`; also tabulated in
/// Hairer, Lubich & Wanner, *Geometric Numerical Integration*, §V.3.2).
pub const COMPOSITION6_COEFFS: [f64; 9] = [
    0.392_161_444_007_314_139_279_250_56,
    0.332_599_136_789_359_438_599_748_64,
    -0.706_246_172_557_639_359_809_964_82,
    0.082_213_596_293_550_800_231_490_45,
    0.798_543_990_934_829_963_398_950_35,
    0.082_213_596_293_550_800_231_490_45,
    -0.706_246_172_557_639_359_809_964_82,
    0.332_599_136_789_359_438_599_748_64,
    0.392_161_444_007_314_139_279_250_56,
];

/// `p' = p − h∇V(q, t)`, `q' = q + h∇K(p', t)`.
pub fn symplectic_euler_step<S: Separable + ?Sized>(
    sys: &S,
    h: f64,
    t: f64,
    x: &PhasePoint,
) -> PhasePoint {
    let mut y = x.clone();
    symplectic_euler_in_place(sys, h, t, y.as_mut_slice(), &mut vec![0.0; sys.dim()]);
    y
}

fn symplectic_euler_in_place<S: Separable + ?Sized>(
    sys: &S,
    h: f64,
    t: f64,
    x: &mut [f64],
    buf: &mut [f64],
) {
    let d = sys.dim();
    let (p, q) = x.split_at_mut(d);
    sys.grad_v(q, t, buf);
    p.iter_mut()
        .zip(buf.iter())
        .for_each(|(pi, g)| *pi -= h * g);
    sys.grad_k(p, t, buf);
    q.iter_mut()
        .zip(buf.iter())
        .for_each(|(qi, g)| *qi += h * g);
}

/// Half kick, drift, half kick. The drift sees the mid-step clock, the
/// second kick the end-of-step clock.
pub fn stormer_verlet_step<S: Separable + ?Sized>(
    sys: &S,
    h: f64,
    t: f64,
    x: &PhasePoint,
) -> PhasePoint {
    let mut y = x.clone();
    stormer_verlet_in_place(sys, h, t, y.as_mut_slice(), &mut vec![0.0; sys.dim()]);
    y
}

fn stormer_verlet_in_place<S: Separable + ?Sized>(
    sys: &S,
    h: f64,
    t: f64,
    x: &mut [f64],
    buf: &mut [f64],
) {
    let d = sys.dim();
    let (p, q) = x.split_at_mut(d);
    let half = 0.5 * h;
    sys.grad_v(q, t, buf);
    p.iter_mut()
        .zip(buf.iter())
        .for_each(|(pi, g)| *pi -= half * g);
    sys.grad_k(p, t + half, buf);
    q.iter_mut()
        .zip(buf.iter())
        .for_each(|(qi, g)| *qi += h * g);
    sys.grad_v(q, t + h, buf);
    p.iter_mut()
        .zip(buf.iter())
        .for_each(|(pi, g)| *pi -= half * g);
}

pub fn composition6_step<S: Separable + ?Sized>(
    sys: &S,
    h: f64,
    t: f64,
    x: &PhasePoint,
) -> PhasePoint {
    let mut y = x.clone();
    composition6_in_place(sys, h, t, y.as_mut_slice(), &mut vec![0.0; sys.dim()]);
    y
}

fn composition6_in_place<S: Separable + ?Sized>(
    sys: &S,
    h: f64,
    t: f64,
    x: &mut [f64],
    buf: &mut [f64],
) {
    let mut clock = t;
    for &g in &COMPOSITION6_COEFFS {
        stormer_verlet_in_place(sys, g * h, clock, x, buf);
        clock += g * h;
    }
}

/// Classical RK4 on `ẋ = J⁻¹∇H`. Not symplectic; only used as an oracle.
pub fn rk4_step<S: HamiltonianSystem + ?Sized>(
    sys: &S,
    h: f64,
    t: f64,
    x: &PhasePoint,
) -> PhasePoint {
    let mut y = x.clone();
    let mut ws = Rk4Workspace::new(2 * sys.dim());
    ws.step(sys, h, t, y.as_mut_slice(), None);
    y
}

struct Rk4Workspace {
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Rk4Workspace {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
        }
    }

    fn step<S: HamiltonianSystem + ?Sized>(
        &mut self,
        sys: &S,
        h: f64,
        t: f64,
        x: &mut [f64],
        compensation: Option<&mut [f64]>,
    ) {
        let n = x.len();
        let [k1, k2, k3, k4] = &mut self.k;
        let tmp = &mut self.tmp;
        sys.vector_field(x, t, k1);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        sys.vector_field(tmp, t + 0.5 * h, k2);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        sys.vector_field(tmp, t + 0.5 * h, k3);
        for i in 0..n {
            tmp[i] = x[i] + h * k3[i];
        }
        sys.vector_field(tmp, t + h, k4);
        match compensation {
            // Kahan-compensated accumulation keeps round-off from dominating
            // over millions of tiny steps.
            Some(c) => {
                for i in 0..n {
                    let inc = h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) - c[i];
                    let sum = x[i] + inc;
                    c[i] = (sum - x[i]) - inc;
                    x[i] = sum;
                }
            }
            None => {
                for i in 0..n {
                    x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
        }
    }
}

/// High-accuracy reference solution over `[t0, t0 + span]` with RK4 steps
/// no larger than `max_step` and compensated summation.
pub fn rk4_reference<S: HamiltonianSystem + ?Sized>(
    sys: &S,
    t0: f64,
    span: f64,
    max_step: f64,
    x: &PhasePoint,
) -> PhasePoint {
    if span == 0.0 {
        return x.clone();
    }
    let n = (span.abs() / max_step).ceil().max(1.0) as usize;
    let h = span / n as f64;
    let mut y = x.clone();
    let mut ws = Rk4Workspace::new(y.as_slice().len());
    let mut comp = vec![0.0; y.as_slice().len()];
    for i in 0..n {
        ws.step(sys, h, t0 + i as f64 * h, y.as_mut_slice(), Some(&mut comp));
    }
    y
}

/// Applies `scheme` `n_steps` times, threading the clock `t0 + i·h`.
/// Returns all `n_steps + 1` states including `x`.
pub fn integrate<S: HamiltonianSystem + ?Sized>(
    scheme: StepScheme,
    sys: &S,
    t0: f64,
    h: f64,
    n_steps: usize,
    x: &PhasePoint,
) -> Result<Vec<PhasePoint>> {
    if x.dim() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            got: x.dim(),
        });
    }
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(x.clone());
    let mut state = x.clone();
    let mut buf = vec![0.0; sys.dim()];
    if scheme == StepScheme::Rk4Oracle {
        let mut ws = Rk4Workspace::new(2 * sys.dim());
        for i in 0..n_steps {
            ws.step(sys, h, t0 + i as f64 * h, state.as_mut_slice(), None);
            out.push(state.clone());
        }
        return Ok(out);
    }
    let sep = sys
        .as_separable()
        .ok_or_else(|| Error::NotSeparable(sys.name().to_string()))?;
    for i in 0..n_steps {
        let t = t0 + i as f64 * h;
        let s = state.as_mut_slice();
        match scheme {
            StepScheme::SymplecticEulerVK => symplectic_euler_in_place(sep, h, t, s, &mut buf),
            StepScheme::StormerVerlet => stormer_verlet_in_place(sep, h, t, s, &mut buf),
            StepScheme::Composition6 => composition6_in_place(sep, h, t, s, &mut buf),
            StepScheme::Rk4Oracle => unreachable!(),
        }
        out.push(state.clone());
    }
    Ok(out)
}

/// `m`-fold composition of symplectic Euler with substep `h/m`; substep `i`
/// sees the clock `t0 + i·h/m`.
pub fn trotter_composition<S: Separable + ?Sized>(
    sys: &S,
    h: f64,
    m: usize,
    t0: f64,
    x: &PhasePoint,
) -> Result<PhasePoint> {
    if m == 0 {
        return Err(Error::InvalidConfig(
            "composition count m must be >= 1".into(),
        ));
    }
    let sub = h / m as f64;
    let mut y = x.clone();
    let mut buf = vec![0.0; sys.dim()];
    for i in 0..m {
        symplectic_euler_in_place(sys, sub, t0 + i as f64 * sub, y.as_mut_slice(), &mut buf);
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{forced_harmonic_oscillator, pendulum};

    #[test]
    fn composition_coefficients_are_consistent() {
        let sum: f64 = COMPOSITION6_COEFFS.iter().sum();
        assert!((sum - 1.0).abs() < 1e-15);
        // symmetric
        for i in 0..9 {
            assert_eq!(COMPOSITION6_COEFFS[i], COMPOSITION6_COEFFS[8 - i]);
        }
        // third-order condition Σγ³ = 0
        let cubes: f64 = COMPOSITION6_COEFFS.iter().map(|g| g * g * g).sum();
        assert!(cubes.abs() < 1e-14, "{cubes}");
        // fifth-order condition Σγ⁵ = 0
        let fifths: f64 = COMPOSITION6_COEFFS.iter().map(|g| g.powi(5)).sum();
        assert!(fifths.abs() < 1e-14, "{fifths}");
    }

    #[test]
    fn symplectic_euler_hand_value() {
        let y = symplectic_euler_step(&pendulum(), 0.1, 0.0, &PhasePoint::from_pq(1.0, 0.0));
        assert_eq!(y.p()[0], 1.0);
        assert_eq!(y.q()[0], 0.1);
    }

    #[test]
    fn stormer_verlet_hand_value() {
        let y = stormer_verlet_step(&pendulum(), 0.1, 0.0, &PhasePoint::from_pq(1.0, 0.0));
        assert_eq!(y.q()[0], 0.1);
        assert_eq!(y.p()[0], 1.0 - 0.05 * 0.1f64.sin());
    }

    #[test]
    fn zero_step_is_identity() {
        let sys = pendulum();
        let x = PhasePoint::from_pq(0.3, -1.2);
        assert_eq!(symplectic_euler_step(&sys, 0.0, 0.0, &x), x);
        assert_eq!(stormer_verlet_step(&sys, 0.0, 0.0, &x), x);
        assert_eq!(composition6_step(&sys, 0.0, 0.0, &x), x);
        for m in [1, 3, 17] {
            assert_eq!(trotter_composition(&sys, 0.0, m, 0.0, &x).unwrap(), x);
        }
    }

    #[test]
    fn stormer_verlet_is_symmetric() {
        let sys = pendulum();
        let x = PhasePoint::from_pq(0.9, 2.1);
        for &h in &[0.05, 0.3, 1.1] {
            let back = stormer_verlet_step(&sys, h, 0.0, &stormer_verlet_step(&sys, -h, 0.0, &x));
            assert!(back.max_abs_diff(&x) <= 1e-13);
        }
        let ho = forced_harmonic_oscillator(1.0, 2.0, 1.0).unwrap();
        let (t, h) = (2.3, 0.2);
        let fwd = stormer_verlet_step(&ho, h, t, &x);
        let back = stormer_verlet_step(&ho, -h, t + h, &fwd);
        assert!(back.max_abs_diff(&x) <= 1e-13);
    }

    #[test]
    fn trotter_single_substep_is_euler() {
        let sys = pendulum();
        let x = PhasePoint::from_pq(0.4, 0.8);
        assert_eq!(
            trotter_composition(&sys, 0.37, 1, 0.0, &x).unwrap(),
            symplectic_euler_step(&sys, 0.37, 0.0, &x)
        );
        assert!(trotter_composition(&sys, 0.37, 0, 0.0, &x).is_err());
    }

    #[test]
    fn integrate_lengths_and_composition() {
        let sys = pendulum();
        let x = PhasePoint::from_pq(1.0, 0.0);
        let zero = integrate(StepScheme::Composition6, &sys, 0.0, 0.1, 0, &x).unwrap();
        assert_eq!(zero, vec![x.clone()]);
        let all = integrate(StepScheme::Composition6, &sys, 0.0, 0.1, 12, &x).unwrap();
        assert_eq!(all.len(), 13);
        let first = integrate(StepScheme::Composition6, &sys, 0.0, 0.1, 5, &x).unwrap();
        let second = integrate(
            StepScheme::Composition6,
            &sys,
            0.5,
            0.1,
            7,
            first.last().unwrap(),
        )
        .unwrap();
        assert_eq!(all.last(), second.last());
    }

    #[test]
    fn integrate_rejects_nonseparable_symplectic_scheme() {
        let sys = crate::hamiltonians::linear_nonseparable();
        let x = PhasePoint::from_pq(1.0, 0.0);
        assert!(integrate(StepScheme::StormerVerlet, &sys, 0.0, 0.1, 3, &x).is_err());
        assert_eq!(
            integrate(StepScheme::Rk4Oracle, &sys, 0.0, 0.1, 3, &x)
                .unwrap()
                .len(),
            4
        );
    }

    #[test]
    fn scheme_metadata() {
        assert_eq!(StepScheme::Composition6.order(), 6);
        assert!(!StepScheme::Rk4Oracle.is_symplectic());
        assert!(StepScheme::SymplecticEulerVK.is_symplectic());
    }
}
