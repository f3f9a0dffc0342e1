//! Reference flows of the benchmark systems against test-local oracles.

use tsympnet::hamiltonians::{
    forced_harmonic_oscillator, linear_nonseparable, pendulum, ForcedHarmonicOscillator, Forcing,
};
use tsympnet::{FlowAccuracy, HamiltonianSystem, PhasePoint};

mod common;
use common::{pendulum_field, rk4};

type M2 = [[f64; 2]; 2];

fn mat_mul(a: M2, b: M2) -> M2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

/// `exp(A)` by scaling and squaring of a truncated Taylor series.
fn expm(a: M2) -> M2 {
    let norm = a.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    let s = (norm / 0.1).log2().ceil().max(0.0) as i32;
    let scale = 0.5_f64.powi(s);
    let b = [
        [a[0][0] * scale, a[0][1] * scale],
        [a[1][0] * scale, a[1][1] * scale],
    ];
    let mut sum = [[1.0, 0.0], [0.0, 1.0]];
    let mut term = sum;
    for k in 1..=20 {
        term = mat_mul(term, b);
        for row in term.iter_mut() {
            for v in row.iter_mut() {
                *v /= k as f64;
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                sum[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..s {
        sum = mat_mul(sum, sum);
    }
    sum
}

/// Generator of `ẋ = (−∂H/∂q, ∂H/∂p)` for `H = ½p² + 0.4pq + ½q²`.
const LINEAR_GENERATOR: M2 = [[-0.4, -1.0], [1.0, 0.4]];

fn linear_field(_t: f64, x: [f64; 2]) -> [f64; 2] {
    let a = LINEAR_GENERATOR;
    [
        a[0][0] * x[0] + a[0][1] * x[1],
        a[1][0] * x[0] + a[1][1] * x[1],
    ]
}

fn forced_field(forcing: Forcing) -> impl Fn(f64, [f64; 2]) -> [f64; 2] {
    move |t, [p, q]| {
        [
            -(forcing.omega0 * forcing.omega0 * q) + forcing.f0 * (forcing.omega * t).sin(),
            p,
        ]
    }
}

fn pt(x: [f64; 2]) -> PhasePoint {
    PhasePoint::from_pq(x[0], x[1])
}

fn arr(x: &PhasePoint) -> [f64; 2] {
    [x.as_slice()[0], x.as_slice()[1]]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
}

fn fho() -> ForcedHarmonicOscillator {
    ForcedHarmonicOscillator::new(Forcing::default()).unwrap()
}

#[test]
fn pendulum_values() {
    let sys = pendulum();
    assert_eq!(sys.hamiltonian(&[1.0, 0.0], 0.0), -0.5);
    let mut g = [1.0, 1.0];
    sys.gradient(&[0.0, 0.0], 0.0, &mut g);
    assert_eq!(g, [0.0, 0.0]);
    assert_eq!(sys.flow_accuracy(), Some(FlowAccuracy::ReferenceNumeric));
}

#[test]
fn pendulum_energy_along_reference_flow() {
    let sys = pendulum();
    let mut x = PhasePoint::from_pq(1.0, 0.0);
    for _ in 0..100 {
        x = sys.exact_flow(0.0, 0.1, &x).unwrap();
        let e = sys.hamiltonian(x.as_slice(), 0.0);
        assert!((e + 0.5).abs() <= 1e-8, "energy {e}");
    }
}

#[test]
fn pendulum_reference_flow_matches_local_rk4() {
    let x0 = [1.0, 0.3];
    let got = arr(&pendulum().exact_flow(0.0, 0.5, &pt(x0)).unwrap());
    let want = rk4(&pendulum_field, 0.0, 0.5, 1e-4, x0);
    // The reference flow is ten sixth-order substeps; its truncation error is
    // a few 1e-12 over this step.
    assert!(dist(got, want) <= 1e-10, "{got:?} vs {want:?}");
}

#[test]
fn linear_flow_matches_matrix_exponential_and_rk4() {
    let sys = linear_nonseparable();
    assert_eq!(
        arr(&sys.exact_flow(0.0, 0.0, &pt([1.0, 0.0])).unwrap()),
        [1.0, 0.0]
    );
    for &h in &[0.1, 0.37, 1.0, 4.2] {
        let x0 = [1.0, 0.0];
        let got = arr(&sys.exact_flow(0.0, h, &pt(x0)).unwrap());
        let a = LINEAR_GENERATOR;
        let e = expm([[a[0][0] * h, a[0][1] * h], [a[1][0] * h, a[1][1] * h]]);
        let via_expm = [
            e[0][0] * x0[0] + e[0][1] * x0[1],
            e[1][0] * x0[0] + e[1][1] * x0[1],
        ];
        assert!(
            dist(got, via_expm) <= 1e-13,
            "h={h}: {got:?} vs {via_expm:?}"
        );
        if h <= 1.0 {
            let via_rk4 = rk4(&linear_field, 0.0, h, 1e-5, x0);
            assert!(dist(via_expm, via_rk4) <= 1e-12, "h={h}: oracles disagree");
        }
    }
}

#[test]
fn linear_energy_is_conserved() {
    let sys = linear_nonseparable();
    let x0 = pt([0.7, -1.1]);
    let e0 = sys.hamiltonian(x0.as_slice(), 0.0);
    for i in 0..=100 {
        let t = 0.1 * i as f64;
        let x = sys.exact_flow(0.0, t, &x0).unwrap();
        assert!(
            (sys.hamiltonian(x.as_slice(), 0.0) - e0).abs() <= 1e-10,
            "t={t}"
        );
    }
}

#[test]
fn forced_flow_matches_local_rk4() {
    let sys = fho();
    let x0 = [-0.2, -0.5];
    let got = arr(&sys.exact_flow(1.3, 0.2, &pt(x0)).unwrap());
    let want = rk4(&forced_field(Forcing::default()), 1.3, 0.2, 1e-6, x0);
    assert!(dist(got, want) <= 1e-8, "{got:?} vs {want:?}");

    // A longer horizon and another forcing.
    let forcing = Forcing {
        omega0: 1.5,
        omega: 0.7,
        f0: -0.8,
    };
    let sys = ForcedHarmonicOscillator::new(forcing).unwrap();
    let got = arr(&sys.exact_flow(4.0, 3.0, &pt([0.5, 1.0])).unwrap());
    let want = rk4(&forced_field(forcing), 4.0, 3.0, 1e-4, [0.5, 1.0]);
    assert!(dist(got, want) <= 1e-10, "{got:?} vs {want:?}");
}

#[test]
fn unforced_oscillator_rotates() {
    let w0 = 1.7;
    let sys = forced_harmonic_oscillator(w0, 2.0, 0.0).unwrap();
    let (p0, q0) = (0.4, -0.9);
    for &t in &[0.0, 0.3, 2.5] {
        let got = arr(&sys
            .exact_flow(0.0, t, &PhasePoint::from_pq(p0, q0))
            .unwrap());
        let want = [
            p0 * (w0 * t).cos() - q0 * w0 * (w0 * t).sin(),
            q0 * (w0 * t).cos() + p0 / w0 * (w0 * t).sin(),
        ];
        assert!(dist(got, want) <= 1e-14, "t={t}: {got:?} vs {want:?}");
    }
}

#[test]
fn forced_flow_at_zero_step_is_identity() {
    let x = PhasePoint::from_pq(0.3, -0.4);
    for t0 in [0.0, 1.0, 7.5] {
        assert_eq!(fho().exact_flow(t0, 0.0, &x).unwrap(), x);
    }
}

#[test]
fn resonant_and_invalid_forcing_rejected() {
    assert!(forced_harmonic_oscillator(1.0, 1.0, 1.0).is_err());
    assert!(forced_harmonic_oscillator(1.0, -1.0, 1.0).is_err());
    assert!(forced_harmonic_oscillator(0.0, 2.0, 1.0).is_err());
}

#[test]
fn analytic_flows_form_a_semigroup() {
    let systems: Vec<Box<dyn HamiltonianSystem>> =
        vec![Box::new(linear_nonseparable()), Box::new(fho())];
    let x = pt([0.8, -0.3]);
    for sys in &systems {
        assert_eq!(sys.flow_accuracy(), Some(FlowAccuracy::Analytic));
        for &(t0, h1, h2) in &[(0.0, 0.3, 0.4), (1.3, 0.05, 2.0), (9.0, 1.1, 0.7)] {
            let direct = sys.exact_flow(t0, h1 + h2, &x).unwrap();
            let mid = sys.exact_flow(t0, h1, &x).unwrap();
            let split = sys.exact_flow(t0 + h1, h2, &mid).unwrap();
            assert!(direct.max_abs_diff(&split) <= 1e-10, "{}", sys.name());
        }
    }
}

#[test]
fn flows_are_area_preserving() {
    // For one degree of freedom symplecticity is det(D) = 1.
    let systems: Vec<Box<dyn HamiltonianSystem>> = vec![
        Box::new(pendulum()),
        Box::new(linear_nonseparable()),
        Box::new(fho()),
    ];
    let eps = 1e-5;
    for sys in &systems {
        for &(t0, h, x) in &[(0.0, 0.3, [0.5, 0.2]), (2.0, 0.25, [-1.0, 1.2])] {
            let mut jac = [[0.0; 2]; 2];
            for j in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[j] += eps;
                xm[j] -= eps;
                let fp = arr(&sys.exact_flow(t0, h, &pt(xp)).unwrap());
                let fm = arr(&sys.exact_flow(t0, h, &pt(xm)).unwrap());
                for i in 0..2 {
                    jac[i][j] = (fp[i] - fm[i]) / (2.0 * eps);
                }
            }
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            assert!((det - 1.0).abs() <= 1e-8, "{}: det {det}", sys.name());
        }
    }
}

#[test]
fn vector_field_matches_hamiltonian_gradient() {
    let systems: Vec<Box<dyn HamiltonianSystem>> = vec![
        Box::new(pendulum()),
        Box::new(linear_nonseparable()),
        Box::new(fho()),
    ];
    let eps = 1e-6;
    let x = [0.4, -0.7];
    let t = 0.9;
    for sys in &systems {
        let mut v = [0.0; 2];
        sys.vector_field(&x, t, &mut v);
        let dh = |i: usize| {
            let mut a = x;
            let mut b = x;
            a[i] += eps;
            b[i] -= eps;
            (sys.hamiltonian(&a, t) - sys.hamiltonian(&b, t)) / (2.0 * eps)
        };
        assert!((v[0] + dh(1)).abs() <= 1e-8, "{}", sys.name());
        assert!((v[1] - dh(0)).abs() <= 1e-8, "{}", sys.name());
    }
}
