//! Oracles shared by the integration tests, independent of the crate's own.

#![allow(dead_code)]

/// Classical RK4 for a one-degree-of-freedom field `(t, [p, q]) ↦ [ṗ, q̇]`.
pub fn rk4(
    f: &dyn Fn(f64, [f64; 2]) -> [f64; 2],
    t0: f64,
    span: f64,
    step: f64,
    x: [f64; 2],
) -> [f64; 2] {
    let n = (span / step).ceil() as usize;
    let h = span / n as f64;
    let mut y = x;
    let add = |a: [f64; 2], b: [f64; 2], s: f64| [a[0] + s * b[0], a[1] + s * b[1]];
    for i in 0..n {
        let t = t0 + i as f64 * h;
        let k1 = f(t, y);
        let k2 = f(t + h / 2.0, add(y, k1, h / 2.0));
        let k3 = f(t + h / 2.0, add(y, k2, h / 2.0));
        let k4 = f(t + h, add(y, k3, h));
        for j in 0..2 {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    y
}

pub fn pendulum_field(_t: f64, [p, q]: [f64; 2]) -> [f64; 2] {
    [-q.sin(), p]
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// `‖DᵀJD − J‖∞` for a `2d × 2d` row-major Jacobian with `J = [[0, I], [−I, 0]]`.
pub fn symplectic_defect(jac: &[Vec<f64>]) -> f64 {
    let n = jac.len();
    let d = n / 2;
    let j = |r: usize, c: usize| -> f64 {
        if r < d && c == r + d {
            1.0
        } else if r >= d && c + d == r {
            -1.0
        } else {
            0.0
        }
    };
    let mut worst = 0.0_f64;
    for a in 0..n {
        for b in 0..n {
            let mut s = 0.0;
            for r in 0..n {
                for c in 0..n {
                    s += jac[r][a] * j(r, c) * jac[c][b];
                }
            }
            worst = worst.max((s - j(a, b)).abs());
        }
    }
    worst
}

/// Central-difference Jacobian of `f` at `x`.
pub fn fd_jacobian(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], eps: f64) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut jac = vec![vec![0.0; n]; n];
    for c in 0..n {
        let mut a = x.to_vec();
        let mut b = x.to_vec();
        a[c] += eps;
        b[c] -= eps;
        let (fa, fb) = (f(&a), f(&b));
        for r in 0..n {
            jac[r][c] = (fa[r] - fb[r]) / (2.0 * eps);
        }
    }
    jac
}
