//! Reference solvers shared by the oracle and acceptance suites.
#![allow(dead_code)]

use robust_sysid::loss::{huber_deriv, huber_value};

/// Exhaustive LAD: some minimizer interpolates `m` samples, so checking every
/// pair-interpolant (m = 2) finds the optimum.
pub fn lad_by_enumeration(phi: &[[f64; 2]], y: &[f64]) -> ([f64; 2], f64) {
    let cost = |a: [f64; 2]| -> f64 {
        phi.iter().zip(y).map(|(p, yt)| (yt - p[0] * a[0] - p[1] * a[1]).abs()).sum()
    };
    let mut best = ([0.0; 2], f64::INFINITY);
    for i in 0..phi.len() {
        for j in i + 1..phi.len() {
            let det = phi[i][0] * phi[j][1] - phi[i][1] * phi[j][0];
            if det.abs() < 1e-12 {
                continue;
            }
            let a = [
                (y[i] * phi[j][1] - y[j] * phi[i][1]) / det,
                (phi[i][0] * y[j] - phi[j][0] * y[i]) / det,
            ];
            let c = cost(a);
            if c < best.1 {
                best = (a, c);
            }
        }
    }
    best
}

/// Gradient descent with Armijo backtracking on the Huber objective of one row.
pub fn huber_by_gradient_descent(phi: &[Vec<f64>], y: &[f64], mu: f64) -> Vec<f64> {
    let m = phi[0].len();
    let value = |a: &[f64]| -> f64 {
        phi.iter()
            .zip(y)
            .map(|(p, yt)| huber_value(yt - p.iter().zip(a).map(|(u, v)| u * v).sum::<f64>(), mu).unwrap())
            .sum()
    };
    let grad = |a: &[f64]| -> Vec<f64> {
        let mut g = vec![0.0; m];
        for (p, yt) in phi.iter().zip(y) {
            let r = yt - p.iter().zip(a).map(|(u, v)| u * v).sum::<f64>();
            let d = huber_deriv(r, mu).unwrap();
            for j in 0..m {
                g[j] -= d * p[j];
            }
        }
        g
    };
    let mut a = vec![0.0; m];
    let mut step = 1.0;
    for _ in 0..200_000 {
        let g = grad(&a);
        let gn2: f64 = g.iter().map(|v| v * v).sum();
        if gn2.sqrt() < 1e-12 {
            break;
        }
        let f0 = value(&a);
        step *= 2.0;
        loop {
            let cand: Vec<f64> = a.iter().zip(&g).map(|(x, d)| x - step * d).collect();
            if value(&cand) <= f0 - 0.5 * step * gn2 || step < 1e-20 {
                a = cand;
                break;
            }
            step *= 0.5;
        }
    }
    a
}
