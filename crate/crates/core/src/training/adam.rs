use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, cfg: &AdamConfig) {
    debug_assert_eq!(params.len(), grads.len());
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_hand_value() {
        let mut p = [0.0];
        let mut st = AdamState::new(1);
        adam_step(&mut p, &[1.0], &mut st, &AdamConfig::default());
        // m̂ = v̂ = 1
        assert_eq!(p[0], -1e-3 * (1.0 / (1.0 + 1e-8)));
        assert!((p[0] + 9.999_999_9e-4).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_keeps_params_and_decays_moments() {
        let mut p = [0.5, -2.0];
        let mut st = AdamState {
            m: vec![0.2, -0.1],
            v: vec![0.04, 0.01],
            step: 3,
        };
        adam_step(
            &mut p,
            &[0.0, 0.0],
            &mut st,
            &AdamConfig {
                learning_rate: 0.0,
                ..Default::default()
            },
        );
        assert_eq!(p, [0.5, -2.0]);

        let mut p = [0.5, -2.0];
        let mut st = AdamState::new(2);
        adam_step(&mut p, &[0.0, 0.0], &mut st, &AdamConfig::default());
        assert_eq!(p, [0.5, -2.0]);
        let mut st = AdamState {
            m: vec![0.2, -0.1],
            v: vec![0.04, 0.01],
            step: 3,
        };
        let mut q = [0.5, -2.0];
        adam_step(&mut q, &[0.0, 0.0], &mut st, &AdamConfig::default());
        assert_eq!(st.m, vec![0.9 * 0.2, 0.9 * -0.1]);
        assert_eq!(st.v, vec![0.999 * 0.04, 0.999 * 0.01]);
        assert_eq!(st.step, 4);
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut p = vec![0.3, 0.1, -0.7];
            let mut st = AdamState::new(3);
            for k in 0..10 {
                let g: Vec<f64> = p.iter().map(|x| x * (k as f64 + 1.0)).collect();
                adam_step(&mut p, &g, &mut st, &AdamConfig::default());
            }
            (p, st)
        };
        assert_eq!(run(), run());
    }
}
