//! Error-versus-length sweeps, log-log slope fits and the reconstruction
//! stability study.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use crate::disturbance::{derive_stream, DisturbanceSpec, RngStream};
use crate::error::{Error, Result};
use crate::estimators::{fit, EstimatorConfig};
use crate::linalg::{norm2, Mat};
use crate::loss::{Method, RegressionData};
use crate::model::{benchmark_system, SystemModel, BENCHMARK_X0};
use crate::simulate::{empirical_excitation, reconstruct_rollout, simulate_rollout, Rollout, Trajectory};

/// Default trajectory lengths, spanning 40 to 2500.
pub const DEFAULT_T_GRID: [usize; 7] = [40, 100, 200, 400, 800, 1600, 2500];

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub model: SystemModel,
    pub spec: DisturbanceSpec,
    pub x0: Vec<f64>,
    pub t_grid: Vec<usize>,
    pub seeds: usize,
    pub methods: Vec<EstimatorConfig>,
    pub master_seed: u64,
}

impl SweepConfig {
    /// Benchmark system from `[3, 3, 3]` with LS, ℓ1 and Huber(0.1), 20 seeds.
    pub fn benchmark(spec: DisturbanceSpec) -> Self {
        Self {
            model: benchmark_system(),
            spec,
            x0: BENCHMARK_X0.to_vec(),
            t_grid: DEFAULT_T_GRID.to_vec(),
            seeds: 20,
            methods: vec![EstimatorConfig::ls(), EstimatorConfig::l1(), EstimatorConfig::huber(0.1)],
            master_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_grid.is_empty() || self.t_grid[0] == 0 {
            return Err(Error::InvalidParameter("t_grid must hold positive lengths".into()));
        }
        if self.t_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("t_grid must be strictly ascending".into()));
        }
        if self.seeds == 0 {
            return Err(Error::InvalidParameter("seeds must be >= 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("at least one method is required".into()));
        }
        for m in &self.methods {
            m.validate()?;
        }
        self.spec.validate()?;
        if self.x0.len() != self.model.state_dim() {
            return Err(Error::Dimension("x0 does not match the model state dimension".into()));
        }
        Ok(())
    }
}

/// One `(T, seed, method)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub t: usize,
    pub seed: usize,
    pub method: Method,
    /// `‖Ā − Â‖_F`; `None` when the cell failed.
    pub frob_error: Option<f64>,
    pub row_errors: Vec<f64>,
    pub converged: bool,
    pub lambda_min_sq: Option<f64>,
    pub wall_time_ms: f64,
    /// Why the cell has no estimate (divergent trajectory, rank deficiency).
    pub failure: Option<String>,
}

impl SweepRow {
    /// Usable for averages and slope fits.
    pub fn is_valid(&self) -> bool {
        self.converged && self.frob_error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

pub const SWEEP_CSV_HEADER: &str = "T,seed,method,frob_error,row_errors,converged,lambda_min_sq,wall_time_ms";

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

impl SweepReport {
    /// CSV in canonical `(T, seed, method)` order. Timing is the only
    /// non-deterministic column, so it is written only when requested.
    pub fn to_csv(&self, include_timing: bool) -> String {
        let mut s = String::from(SWEEP_CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let frob = r.frob_error.map(fmt17).unwrap_or_default();
            let rows: Vec<String> = r.row_errors.iter().map(|v| fmt17(*v)).collect();
            let lam = r.lambda_min_sq.map(fmt17).unwrap_or_default();
            let time = if include_timing { format!("{:.3}", r.wall_time_ms) } else { String::new() };
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.t,
                r.seed,
                r.method,
                frob,
                rows.join(";"),
                u8::from(r.converged),
                lam,
                time
            );
        }
        s
    }

    pub fn methods(&self) -> Vec<Method> {
        let mut out: Vec<Method> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.method) {
                out.push(r.method);
            }
        }
        out
    }

    /// `(T, mean Frobenius error over valid seeds)` for `T ≥ t_min`, ascending
    /// in `T`. Lengths with no valid cell are skipped.
    pub fn mean_errors(&self, method: Method, t_min: usize) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64, usize)> = Vec::new();
        for r in self.rows.iter().filter(|r| r.method == method && r.t >= t_min && r.is_valid()) {
            let e = r.frob_error.unwrap_or_default();
            match out.last_mut() {
                Some(last) if last.0 == r.t => {
                    last.1 += e;
                    last.2 += 1;
                }
                _ => out.push((r.t, e, 1)),
            }
        }
        out.into_iter().map(|(t, s, k)| (t, s / k as f64)).collect()
    }
}

/// Runs every `(T, seed, method)` cell. One trajectory of length `max(t_grid)`
/// is simulated per seed and its prefixes are fitted for the shorter lengths.
/// Seeds run in parallel; rows come back in canonical order regardless.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let per_seed: Vec<Vec<SweepRow>> = (0..cfg.seeds)
        .into_par_iter()
        .map(|seed| {
            let mut rng = derive_stream(cfg.master_seed, seed as u64);
            sweep_seed(cfg, seed, &mut rng)
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(cfg.seeds * cfg.t_grid.len() * cfg.methods.len());
    let per_t = cfg.methods.len();
    for ti in 0..cfg.t_grid.len() {
        for seed_rows in &per_seed {
            rows.extend_from_slice(&seed_rows[ti * per_t..(ti + 1) * per_t]);
        }
    }
    Ok(SweepReport { rows })
}

fn sweep_seed(cfg: &SweepConfig, seed: usize, rng: &mut RngStream) -> Result<Vec<SweepRow>> {
    let t_max = *cfg.t_grid.last().expect("validated non-empty");
    let Rollout { trajectory, divergence } = simulate_rollout(&cfg.model, &cfg.spec, &cfg.x0, t_max, rng)?;
    let full = RegressionData::from_trajectory(&trajectory, cfg.model.basis())?;
    let mut rows = Vec::new();
    for &t in &cfg.t_grid {
        let failed = |method: Method, why: String| SweepRow {
            t,
            seed,
            method,
            frob_error: None,
            row_errors: Vec::new(),
            converged: false,
            lambda_min_sq: None,
            wall_time_ms: 0.0,
            failure: Some(why),
        };
        if t > trajectory.horizon() {
            let (at, _) = divergence.expect("short trajectory implies divergence");
            let why = format!("trajectory diverged at t = {at}");
            rows.extend(cfg.methods.iter().map(|m| failed(m.method, why.clone())));
            continue;
        }
        let data = full.prefix(t)?;
        let lambda = empirical_excitation(&trajectory.prefix(t)?, cfg.model.basis(), None)?.lambda_min_sq;
        for method in &cfg.methods {
            let start = Instant::now();
            let result = fit(&data, method);
            let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
            match result {
                Ok(f) => {
                    let row_errors = row_errors(cfg.model.a_bar(), &f.a_hat);
                    rows.push(SweepRow {
                        t,
                        seed,
                        method: method.method,
                        frob_error: Some(row_errors.iter().map(|e| e * e).sum::<f64>().sqrt()),
                        row_errors,
                        converged: f.converged_all(),
                        lambda_min_sq: Some(lambda),
                        wall_time_ms,
                        failure: None,
                    });
                }
                Err(e @ Error::RankDeficient { .. }) => {
                    let mut r = failed(method.method, e.to_string());
                    r.lambda_min_sq = Some(lambda);
                    rows.push(r);
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(rows)
}

/// `‖ā_i − â_i‖₂` for every row.
pub fn row_errors(a_bar: &Mat, a_hat: &Mat) -> Vec<f64> {
    (0..a_bar.rows())
        .map(|i| {
            a_bar
                .row(i)
                .iter()
                .zip(a_hat.row(i))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub t_range: (usize, usize),
    pub points: usize,
}

/// Ordinary least squares of `ln(mean error)` on `ln T` over `T ≥ t_min`.
pub fn fit_slope(report: &SweepReport, method: Method, t_min: usize) -> Result<SlopeFit> {
    let pts = report.mean_errors(method, t_min);
    if pts.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "{} distinct lengths >= {t_min} for {method}; need 4",
            pts.len()
        )));
    }
    if let Some((t, _)) = pts.iter().find(|(_, e)| e.is_nan() || *e <= 0.0) {
        return Err(Error::InsufficientData(format!(
            "mean error at T = {t} is zero; log-log slope undefined"
        )));
    }
    let xs: Vec<f64> = pts.iter().map(|(t, _)| (*t as f64).ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, e)| e.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(SlopeFit {
        slope,
        intercept,
        r_squared,
        t_range: (pts[0].0, pts[pts.len() - 1].0),
        points: pts.len(),
    })
}

/// Largest seed-mean error over `T ≥ t_min` together with the slope fit.
/// Callers decide the boundedness threshold.
pub fn bounded_error_check(report: &SweepReport, method: Method, t_min: usize) -> Result<(f64, SlopeFit)> {
    let slope = fit_slope(report, method, t_min)?;
    let max_error = report
        .mean_errors(method, t_min)
        .iter()
        .map(|(_, e)| *e)
        .fold(0.0, f64::max);
    Ok((max_error, slope))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutSummary {
    pub max_norm: f64,
    pub diverged: bool,
    pub final_state: Vec<f64>,
    /// Largest state-wise distance to the true noise-free rollout; `None` if
    /// either rollout diverged.
    pub max_deviation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodRollout {
    pub method: Method,
    pub frob_error: f64,
    pub converged: bool,
    pub summary: RolloutSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub truth: RolloutSummary,
    pub estimates: Vec<MethodRollout>,
}

fn summarize(rollout: &Rollout, truth: Option<&Trajectory>) -> RolloutSummary {
    let traj = &rollout.trajectory;
    let final_state = traj.states().last().cloned().unwrap_or_default();
    let max_deviation = match (rollout.divergence, truth) {
        (None, Some(tr)) => Some(
            traj.states()
                .iter()
                .zip(tr.states())
                .map(|(a, b)| norm2(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>()))
                .fold(0.0, f64::max),
        ),
        (None, None) => Some(0.0),
        _ => None,
    };
    RolloutSummary {
        max_norm: traj.max_norm().max(rollout.divergence.map_or(0.0, |(_, n)| n)),
        diverged: rollout.divergence.is_some(),
        final_state,
        max_deviation,
    }
}

/// Simulates one disturbed trajectory, fits each method on it, and rolls the
/// true matrix and every estimate forward noise-free from `x0`.
pub fn stability_study(
    model: &SystemModel,
    spec: &DisturbanceSpec,
    x0: &[f64],
    horizon: usize,
    methods: &[EstimatorConfig],
    rng: &mut RngStream,
) -> Result<StabilityReport> {
    let traj = simulate_rollout(model, spec, x0, horizon, rng)?.into_result()?;
    let data = RegressionData::from_trajectory(&traj, model.basis())?;
    let truth_rollout = reconstruct_rollout(model.a_bar(), model.basis(), x0, horizon)?;
    let truth = summarize(&truth_rollout, None);
    let truth_traj = (!truth.diverged).then_some(&truth_rollout.trajectory);
    let mut estimates = Vec::with_capacity(methods.len());
    for cfg in methods {
        let f = fit(&data, cfg)?;
        let rollout = reconstruct_rollout(&f.a_hat, model.basis(), x0, horizon)?;
        estimates.push(MethodRollout {
            method: cfg.method,
            frob_error: model.a_bar().frobenius_distance(&f.a_hat)?,
            converged: f.converged_all(),
            summary: summarize(&rollout, truth_traj),
        });
    }
    Ok(StabilityReport { truth, estimates })
}
