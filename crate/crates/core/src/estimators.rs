//! Row-decoupled estimators: closed-form least squares, Huber by IRLS and
//! ℓ1 (least absolute deviations) by graduated smoothed IRLS.
//!
//! Every row `a_i` of the estimate solves an independent scalar-output
//! regression on the same features, so each routine works one row at a time.

use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, dot, norm2, Mat};
use crate::loss::{huber, huber_grad, objective, Method, RegressionData};

const REFINE_STEPS: usize = 2;
const HUBER_POLISH_STEPS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub method: Method,
    /// Relative objective-decrease stopping threshold.
    pub tol: f64,
    /// Iteration cap (per smoothing stage for ℓ1).
    pub max_iter: usize,
    /// Decreasing smoothing levels ε for the ℓ1 weights `1/max(|r|, ε)`.
    pub l1_smoothing: Vec<f64>,
    /// Diagonal shift added to every (weighted) Gram matrix.
    pub ridge: f64,
}

impl EstimatorConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            tol: 1e-10,
            max_iter: 500,
            l1_smoothing: vec![1e-2, 1e-4, 1e-6, 1e-8],
            ridge: 1e-10,
        }
    }

    pub fn ls() -> Self {
        Self::new(Method::Ls)
    }

    pub fn l1() -> Self {
        Self::new(Method::L1)
    }

    pub fn huber(mu: f64) -> Self {
        Self::new(Method::Huber { mu })
    }

    pub fn validate(&self) -> Result<()> {
        self.method.validate()?;
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return bad("tol must be > 0");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be >= 1");
        }
        if !(self.ridge.is_finite() && self.ridge >= 0.0) {
            return bad("ridge must be >= 0");
        }
        if self.method == Method::L1 {
            if self.l1_smoothing.is_empty() || self.l1_smoothing.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
                return bad("l1 smoothing levels must be positive");
            }
            if self.l1_smoothing.windows(2).any(|w| w[1] >= w[0]) {
                return bad("l1 smoothing levels must be strictly decreasing");
            }
        }
        Ok(())
    }
}

/// Result of fitting one row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowFit {
    pub coef: Vec<f64>,
    pub iterations: usize,
    /// Unsmoothed objective of this row at `coef`.
    pub objective: f64,
    pub converged: bool,
    /// First-order residual: `‖Φᵀ(Φa − y)‖₂` for LS, `‖Σ_t H'_μ(r_t) φ_t‖₂`
    /// for Huber. Not defined for ℓ1.
    pub gradient_norm: Option<f64>,
    /// Objective after each iterate (smoothed objective for ℓ1 stages).
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub a_hat: Mat,
    pub per_row_iterations: Vec<usize>,
    pub final_objective: f64,
    pub converged: Vec<bool>,
    pub gradient_norm: Vec<Option<f64>>,
    pub objective_traces: Vec<Vec<f64>>,
}

impl FitResult {
    pub fn converged_all(&self) -> bool {
        self.converged.iter().all(|c| *c)
    }
}

/// Fits every row of `Â`.
pub fn fit(data: &RegressionData, cfg: &EstimatorConfig) -> Result<FitResult> {
    cfg.validate()?;
    let n = data.output_dim();
    let m = data.feature_dim();
    let rows = (0..n)
        .map(|i| fit_rowwise(data, i, cfg))
        .collect::<Result<Vec<_>>>()?;
    let coef: Vec<f64> = rows.iter().flat_map(|r| r.coef.iter().copied()).collect();
    let a_hat = Mat::new(n, m, coef)?;
    let final_objective = objective(cfg.method, &a_hat, data)?;
    Ok(FitResult {
        a_hat,
        per_row_iterations: rows.iter().map(|r| r.iterations).collect(),
        final_objective,
        converged: rows.iter().map(|r| r.converged).collect(),
        gradient_norm: rows.iter().map(|r| r.gradient_norm).collect(),
        objective_traces: rows.into_iter().map(|r| r.objective_trace).collect(),
    })
}

/// Fits row `row` of `Â` alone; identical to the same row of [`fit`].
pub fn fit_rowwise(data: &RegressionData, row: usize, cfg: &EstimatorConfig) -> Result<RowFit> {
    cfg.validate()?;
    if row >= data.output_dim() {
        return Err(Error::InvalidParameter(format!(
            "row {row} out of range for {} outputs",
            data.output_dim()
        )));
    }
    if data.len() < data.feature_dim() {
        return Err(Error::RankDeficient { row });
    }
    let problem = RowProblem::new(data, row, cfg.ridge);
    match cfg.method {
        Method::Ls => problem.least_squares(),
        Method::Huber { mu } => problem.huber(mu, cfg.tol, cfg.max_iter),
        Method::L1 => problem.l1(&cfg.l1_smoothing, cfg.tol, cfg.max_iter),
    }
}

struct RowProblem<'a> {
    phi: &'a Mat,
    y: Vec<f64>,
    ridge: f64,
    row: usize,
}

impl<'a> RowProblem<'a> {
    fn new(data: &'a RegressionData, row: usize, ridge: f64) -> Self {
        let y = (0..data.len()).map(|t| data.y().get(t, row)).collect();
        Self {
            phi: data.phi(),
            y,
            ridge,
            row,
        }
    }

    fn residuals(&self, coef: &[f64]) -> Vec<f64> {
        self.y
            .iter()
            .enumerate()
            .map(|(t, y)| y - dot(self.phi.row(t), coef))
            .collect()
    }

    /// Solves `(Σ_t w_t φ_t φ_tᵀ + ridge·I) a = Σ_t w_t φ_t y_t`.
    fn weighted_solve(&self, weights: Option<&[f64]>) -> Result<Vec<f64>> {
        let m = self.phi.cols();
        let mut gram = vec![0.0; m * m];
        let mut rhs = vec![0.0; m];
        for t in 0..self.phi.rows() {
            let w = weights.map_or(1.0, |w| w[t]);
            let p = self.phi.row(t);
            for i in 0..m {
                let wpi = w * p[i];
                rhs[i] += wpi * self.y[t];
                for j in 0..=i {
                    gram[i * m + j] += wpi * p[j];
                }
            }
        }
        for i in 0..m {
            gram[i * m + i] += self.ridge;
            for j in 0..i {
                gram[j * m + i] = gram[i * m + j];
            }
        }
        let l = cholesky(&gram, m).ok_or(Error::RankDeficient { row: self.row })?;
        let mut a = cholesky_solve(&l, m, &rhs);
        // The ridge only regularizes the factorization; refinement steps
        // against the weighted data residuals remove its bias.
        for _ in 0..REFINE_STEPS {
            if a.iter().any(|v| !v.is_finite()) {
                break;
            }
            let mut corr = vec![0.0; m];
            for t in 0..self.phi.rows() {
                let w = weights.map_or(1.0, |w| w[t]);
                let p = self.phi.row(t);
                let wr = w * (self.y[t] - dot(p, &a));
                for (c, pj) in corr.iter_mut().zip(p) {
                    *c += wr * pj;
                }
            }
            let delta = cholesky_solve(&l, m, &corr);
            for (ai, di) in a.iter_mut().zip(&delta) {
                *ai += di;
            }
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::RankDeficient { row: self.row });
        }
        Ok(a)
    }

    /// `‖Σ_t g(r_t) φ_t‖₂`.
    fn score_norm(&self, r: &[f64], g: impl Fn(f64) -> f64) -> f64 {
        let m = self.phi.cols();
        let mut s = vec![0.0; m];
        for (t, rt) in r.iter().enumerate() {
            let gt = g(*rt);
            for (sj, pj) in s.iter_mut().zip(self.phi.row(t)) {
                *sj += gt * pj;
            }
        }
        norm2(&s)
    }

    fn least_squares(&self) -> Result<RowFit> {
        let coef = self.weighted_solve(None)?;
        let r = self.residuals(&coef);
        let obj = r.iter().map(|z| z * z).sum();
        Ok(RowFit {
            gradient_norm: Some(self.score_norm(&r, |z| z)),
            coef,
            iterations: 1,
            objective: obj,
            converged: true,
            objective_trace: vec![obj],
        })
    }

    fn huber(&self, mu: f64, tol: f64, max_iter: usize) -> Result<RowFit> {
        let hub = |r: &[f64]| -> f64 { r.iter().map(|z| huber(*z, mu)).sum() };
        let mut coef = self.weighted_solve(None)?;
        let mut r = self.residuals(&coef);
        let mut obj = hub(&r);
        let mut trace = vec![obj];
        let mut converged = false;
        let mut iterations = 0;
        let mut weights = vec![0.0; r.len()];
        while iterations < max_iter {
            for (w, z) in weights.iter_mut().zip(&r) {
                let a = z.abs();
                *w = if a <= mu { 1.0 } else { mu / a };
            }
            let next = self.weighted_solve(Some(&weights))?;
            iterations += 1;
            let r_next = self.residuals(&next);
            let obj_next = hub(&r_next);
            if obj_next > obj {
                // Round-off floor: keep the better iterate.
                converged = true;
                break;
            }
            let decrease = obj - obj_next;
            coef = next;
            r = r_next;
            obj = obj_next;
            trace.push(obj);
            if decrease <= tol * obj.max(f64::MIN_POSITIVE) || obj == 0.0 {
                converged = true;
                break;
            }
        }
        if converged {
            // IRLS creeps near the optimum; finish with Newton steps on the
            // piecewise quadratic, whose Hessian is the Gram matrix of the
            // samples in the quadratic branch.
            for _ in 0..HUBER_POLISH_STEPS {
                let Some((next, r_next, obj_next)) = self.huber_newton_step(&coef, &r, obj, mu) else {
                    break;
                };
                iterations += 1;
                coef = next;
                r = r_next;
                obj = obj_next;
                trace.push(obj);
            }
        }
        Ok(RowFit {
            gradient_norm: Some(self.score_norm(&r, |z| huber_grad(z, mu))),
            coef,
            iterations,
            objective: obj,
            converged,
            objective_trace: trace,
        })
    }

    /// One damped Newton step; `None` when it cannot lower the objective.
    fn huber_newton_step(&self, coef: &[f64], r: &[f64], obj: f64, mu: f64) -> Option<(Vec<f64>, Vec<f64>, f64)> {
        let m = self.phi.cols();
        let mut hess = vec![0.0; m * m];
        let mut score = vec![0.0; m];
        for (t, rt) in r.iter().enumerate() {
            let p = self.phi.row(t);
            let g = huber_grad(*rt, mu);
            let inlier = rt.abs() <= mu;
            for i in 0..m {
                score[i] += g * p[i];
                if inlier {
                    for j in 0..=i {
                        hess[i * m + j] += p[i] * p[j];
                    }
                }
            }
        }
        if norm2(&score) == 0.0 {
            return None;
        }
        for i in 0..m {
            hess[i * m + i] += self.ridge;
            for j in 0..i {
                hess[j * m + i] = hess[i * m + j];
            }
        }
        let l = cholesky(&hess, m)?;
        let step = cholesky_solve(&l, m, &score);
        let mut scale = 1.0;
        for _ in 0..30 {
            let cand: Vec<f64> = coef.iter().zip(&step).map(|(a, d)| a + scale * d).collect();
            let r_cand = self.residuals(&cand);
            let obj_cand: f64 = r_cand.iter().map(|z| huber(*z, mu)).sum();
            if obj_cand < obj {
                return Some((cand, r_cand, obj_cand));
            }
            scale *= 0.5;
        }
        None
    }

    fn l1(&self, smoothing: &[f64], tol: f64, max_iter: usize) -> Result<RowFit> {
        // Majorized function for weights 1/max(|r|, ε): |r| outside (−ε, ε),
        // r²/(2ε) + ε/2 inside.
        let smoothed = |r: &[f64], eps: f64| -> f64 {
            r.iter()
                .map(|z| {
                    let a = z.abs();
                    if a >= eps {
                        a
                    } else {
                        0.5 * (z * z / eps + eps)
                    }
                })
                .sum()
        };
        let mut coef = self.weighted_solve(None)?;
        let mut r = self.residuals(&coef);
        let mut trace = Vec::new();
        let mut iterations = 0;
        let mut converged = false;
        let mut weights = vec![0.0; r.len()];
        for &eps in smoothing {
            let mut obj = smoothed(&r, eps);
            trace.push(obj);
            converged = false;
            for _ in 0..max_iter {
                for (w, z) in weights.iter_mut().zip(&r) {
                    *w = 1.0 / z.abs().max(eps);
                }
                let next = self.weighted_solve(Some(&weights))?;
                iterations += 1;
                let r_next = self.residuals(&next);
                let obj_next = smoothed(&r_next, eps);
                if obj_next > obj {
                    converged = true;
                    break;
                }
                let decrease = obj - obj_next;
                coef = next;
                r = r_next;
                obj = obj_next;
                trace.push(obj);
                if decrease <= tol * obj.max(f64::MIN_POSITIVE) {
                    converged = true;
                    break;
                }
            }
        }
        Ok(RowFit {
            objective: r.iter().map(|z| z.abs()).sum(),
            coef,
            iterations,
            converged,
            gradient_norm: None,
            objective_trace: trace,
        })
    }
}
