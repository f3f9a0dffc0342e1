//! Reverse-mode gradients against central finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsympnet::{
    init_model_with, loss_and_gradients, pullback, Arch, InitConfig, Kind, Loss, PhasePoint,
    SympNetModel, TrainingSample,
};

const KINDS: [Kind; 5] = [Kind::Tg, Kind::Otla, Kind::Tla, Kind::Natg, Kind::Natla];
const STEP: f64 = 1e-5;

fn close(analytic: f64, numeric: f64) -> bool {
    let diff = (analytic - numeric).abs();
    diff <= 1e-7 || diff <= 1e-4 * numeric.abs().max(analytic.abs())
}

fn random_point(d: usize, rng: &mut ChaCha8Rng) -> PhasePoint {
    PhasePoint::from_vec((0..2 * d).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap()
}

fn random_model(kind: Kind, seed: u64) -> SympNetModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
    let d = rng.random_range(1..=2);
    let arch = if kind.uses_gradient_modules() {
        Arch::gradient(rng.random_range(1..=3), rng.random_range(1..=5))
    } else {
        Arch::linear(rng.random_range(1..=3), rng.random_range(1..=3))
    };
    // Larger-than-default scales so every parameter influences the output.
    let cfg = InitConfig {
        k_scale: Some(0.7),
        small_scale: 0.4,
        ..InitConfig::default()
    };
    init_model_with(kind, d, arch, seed, &cfg).unwrap()
}

fn random_batch(model: &SympNetModel, n: usize, rng: &mut ChaCha8Rng) -> Vec<TrainingSample> {
    let d = model.dim();
    (0..n)
        .map(|_| TrainingSample {
            x: random_point(d, rng),
            t: model
                .kind()
                .is_non_autonomous()
                .then(|| rng.random_range(0.0..5.0)),
            h: rng.random_range(0.05..0.5),
            y: random_point(d, rng),
        })
        .collect()
}

fn loss_at(model: &SympNetModel, params: &[f64], batch: &[TrainingSample]) -> f64 {
    let mut m = model.clone();
    m.set_params(params).unwrap();
    loss_and_gradients(&m, batch, Loss::Mse).unwrap().0
}

#[test]
fn parameter_gradients_match_finite_differences() {
    for kind in KINDS {
        for instance in 0..20u64 {
            let model = random_model(kind, 100 * instance + kind as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(instance);
            let batch = random_batch(&model, 4, &mut rng);
            let (_, grads) = loss_and_gradients(&model, &batch, Loss::Mse).unwrap();
            let g = grads.flat();
            let base = model.all_params();
            assert_eq!(g.len(), base.len());
            for i in 0..base.len() {
                let mut plus = base.clone();
                let mut minus = base.clone();
                plus[i] += STEP;
                minus[i] -= STEP;
                let fd = (loss_at(&model, &plus, &batch) - loss_at(&model, &minus, &batch))
                    / (2.0 * STEP);
                assert!(
                    close(g[i], fd),
                    "{kind} instance {instance} param {i}: reverse {} vs fd {fd}",
                    g[i]
                );
            }
        }
    }
}

#[test]
fn gradients_are_congruent_with_modules() {
    for kind in KINDS {
        let model = random_model(kind, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let batch = random_batch(&model, 3, &mut rng);
        let (_, grads) = loss_and_gradients(&model, &batch, Loss::Mse).unwrap();
        assert_eq!(grads.per_module.len(), model.module_count());
        for (g, m) in grads.per_module.iter().zip(model.modules()) {
            assert_eq!(g.len(), m.param_count());
        }
    }
}

#[test]
fn input_step_and_clock_adjoints_match_finite_differences() {
    for kind in KINDS {
        for instance in 0..20u64 {
            let model = random_model(kind, 31 * instance + 3);
            let d = model.dim();
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + instance);
            let x = random_point(d, &mut rng);
            let h = rng.random_range(0.05..0.5);
            let t = model
                .kind()
                .is_non_autonomous()
                .then(|| rng.random_range(0.0..5.0));
            let ybar: Vec<f64> = (0..2 * d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let pb = pullback(&model, h, t, &x, &ybar).unwrap();
            let f = |h: f64, t: Option<f64>, x: &PhasePoint| -> f64 {
                let y = model.forward(h, t, x).unwrap();
                y.as_slice().iter().zip(&ybar).map(|(a, b)| a * b).sum()
            };

            for i in 0..2 * d {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp.as_mut_slice()[i] += STEP;
                xm.as_mut_slice()[i] -= STEP;
                let fd = (f(h, t, &xp) - f(h, t, &xm)) / (2.0 * STEP);
                assert!(close(pb.x[i], fd), "{kind} x[{i}]: {} vs {fd}", pb.x[i]);
            }

            let fd_h = (f(h + STEP, t, &x) - f(h - STEP, t, &x)) / (2.0 * STEP);
            assert!(close(pb.h, fd_h), "{kind} h: {} vs {fd_h}", pb.h);

            match t {
                Some(t) => {
                    let fd_t = (f(h, Some(t + STEP), &x) - f(h, Some(t - STEP), &x)) / (2.0 * STEP);
                    assert!(close(pb.t, fd_t), "{kind} t: {} vs {fd_t}", pb.t);
                }
                None => assert_eq!(pb.t, 0.0),
            }
        }
    }
}

#[test]
fn loss_value_matches_direct_evaluation() {
    for kind in KINDS {
        let model = random_model(kind, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let batch = random_batch(&model, 5, &mut rng);
        let (loss, _) = loss_and_gradients(&model, &batch, Loss::Mse).unwrap();
        let direct: f64 = batch
            .iter()
            .map(|s| {
                let y = model.forward(s.h, s.t, &s.x).unwrap();
                y.as_slice()
                    .iter()
                    .zip(s.y.as_slice())
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
            })
            .sum::<f64>()
            / batch.len() as f64;
        assert!(
            (loss - direct).abs() <= 1e-14 * direct.max(1.0),
            "{kind}: {loss} vs {direct}"
        );
    }
}

#[test]
fn perfect_fit_has_zero_gradient() {
    // Labels equal to the model's own outputs: the loss is at a minimum.
    for kind in KINDS {
        let model = random_model(kind, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut batch = random_batch(&model, 3, &mut rng);
        for s in &mut batch {
            s.y = model.forward(s.h, s.t, &s.x).unwrap();
        }
        let (loss, grads) = loss_and_gradients(&model, &batch, Loss::Mse).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(grads.max_abs(), 0.0);
    }
}

#[test]
fn zero_step_makes_module_parameters_inert() {
    // With h = 0 every module is the identity, so the loss cannot depend on
    // any parameter. Conjugated linear pairs cancel only up to rounding.
    for kind in KINDS {
        let model = random_model(kind, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut batch = random_batch(&model, 3, &mut rng);
        for s in &mut batch {
            s.h = 0.0;
        }
        let (_, grads) = loss_and_gradients(&model, &batch, Loss::Mse).unwrap();
        assert!(grads.max_abs() <= 1e-14, "{kind}: {}", grads.max_abs());
    }
}
