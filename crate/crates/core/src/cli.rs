//! Config-file driven front end behind the `robust-sysid` binary.
//!
//! A config is one directive per line, `#` starts a comment:
//!
//! ```text
//! model benchmark              # or: model path/to/model.txt
//! noise uniform 0.2            # or: noise gaussian <sigma>
//! attack 0.4 state 0.2 1.0     # or: attack <p> constant <b1> .. <bn>
//! x0 3 3 3
//! T 2500                       # or: tgrid 100,200,400
//! seeds 20
//! method ls                    # repeatable: ls | l1 | huber <mu>
//! master_seed 0
//! out trajectory.csv
//! ```
//!
//! Relative paths are resolved against the directory holding the config.
//! Exit codes: 0 ok, 2 config or input error, 3 divergence, 4 numerical
//! failure.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::disturbance::{derive_stream, DisturbanceSpec};
use crate::error::{Error, Result};
use crate::estimators::{fit, EstimatorConfig};
use crate::experiments::{bounded_error_check, fit_slope, row_errors, run_sweep, SweepConfig};
use crate::loss::{Method, RegressionData};
use crate::model::{benchmark_system, SystemModel, BENCHMARK_X0};
use crate::simulate::{check_assumptions, empirical_excitation, simulate, Trajectory};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Divergence { .. } => EXIT_DIVERGENCE,
        Error::RankDeficient { .. } => EXIT_NUMERICAL,
        _ => EXIT_INPUT,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSource {
    Builtin,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Horizon {
    Single(usize),
    Grid(Vec<usize>),
}

impl Horizon {
    fn grid(&self) -> Vec<usize> {
        match self {
            Horizon::Single(t) => vec![*t],
            Horizon::Grid(g) => g.clone(),
        }
    }
}

/// Validated contents of a config file.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model_source: ModelSource,
    pub model: SystemModel,
    pub disturbance: Option<DisturbanceSpec>,
    /// Initial state; defaults to `[3, 3, 3]` for the built-in model.
    pub x0: Option<Vec<f64>>,
    pub horizon: Option<Horizon>,
    pub seeds: usize,
    /// Methods in the order given; empty means "all three".
    pub methods: Vec<Method>,
    pub master_seed: u64,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
            line: 0,
            msg: format!("cannot read config {}: {e}", path.display()),
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let perr = |line: usize, msg: String| Error::Parse { line, msg };
        let mut model_source = None;
        let mut disturbance: Option<(usize, DisturbanceSpec)> = None;
        let mut x0: Option<(usize, Vec<f64>)> = None;
        let mut horizon = None;
        let mut seeds = 20;
        let mut methods = Vec::new();
        let mut master_seed = 0;
        let mut out = None;

        for (k, raw) in text.lines().enumerate() {
            let line_no = k + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            let rest = rest.trim();
            let field_err = |msg: &str| perr(line_no, format!("`{key}`: {msg}"));
            let count = |s: &str| -> Result<usize> {
                s.parse::<usize>()
                    .map_err(|_| field_err(&format!("`{s}` is not a non-negative integer")))
            };
            match key {
                "model" => {
                    if rest.is_empty() {
                        return Err(field_err("expected `benchmark` or a file path"));
                    }
                    model_source = Some(if rest == "benchmark" {
                        ModelSource::Builtin
                    } else {
                        ModelSource::File(base_dir.join(rest))
                    });
                }
                "noise" | "attack" => {
                    if disturbance.is_some() {
                        return Err(field_err("disturbance given twice"));
                    }
                    let spec = DisturbanceSpec::parse(line).map_err(|e| field_err(&e.to_string()))?;
                    disturbance = Some((line_no, spec));
                }
                "x0" => {
                    let v = rest
                        .split_whitespace()
                        .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
                        .collect::<Option<Vec<_>>>()
                        .filter(|v| !v.is_empty())
                        .ok_or_else(|| field_err("expected finite numbers"))?;
                    x0 = Some((line_no, v));
                }
                "T" => {
                    let t = count(rest)?;
                    if t == 0 {
                        return Err(field_err("trajectory length must be >= 1"));
                    }
                    horizon = Some(Horizon::Single(t));
                }
                "tgrid" => {
                    let g = rest
                        .split(',')
                        .map(|s| count(s.trim()))
                        .collect::<Result<Vec<_>>>()?;
                    if g.is_empty() || g[0] == 0 || g.windows(2).any(|w| w[1] <= w[0]) {
                        return Err(field_err("lengths must be positive and strictly ascending"));
                    }
                    horizon = Some(Horizon::Grid(g));
                }
                "seeds" => {
                    seeds = count(rest)?;
                    if seeds == 0 {
                        return Err(field_err("must be >= 1"));
                    }
                }
                "method" => {
                    let tok: Vec<&str> = rest.split_whitespace().collect();
                    let m = match tok.as_slice() {
                        ["ls"] => Method::Ls,
                        ["l1"] => Method::L1,
                        ["huber", mu] => {
                            let mu: f64 = mu.parse().map_err(|_| field_err("huber threshold must be a number"))?;
                            Method::huber(mu).map_err(|e| field_err(&e.to_string()))?
                        }
                        _ => return Err(field_err("expected `ls`, `l1` or `huber <mu>`")),
                    };
                    methods.push(m);
                }
                "master_seed" => {
                    master_seed = rest
                        .parse::<u64>()
                        .map_err(|_| field_err("expected a 64-bit unsigned integer"))?;
                }
                "out" => {
                    if rest.is_empty() {
                        return Err(field_err("expected a path"));
                    }
                    out = Some(base_dir.join(rest));
                }
                other => return Err(perr(line_no, format!("unknown directive `{other}`"))),
            }
        }

        let model_source = model_source.ok_or_else(|| perr(0, "`model`: directive is required".into()))?;
        let model = match &model_source {
            ModelSource::Builtin => benchmark_system(),
            ModelSource::File(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| perr(0, format!("`model`: cannot read {}: {e}", p.display())))?;
                SystemModel::from_text(&text).map_err(|e| perr(0, format!("`model` file {}: {e}", p.display())))?
            }
        };
        let n = model.state_dim();
        if let Some((line, spec)) = &disturbance {
            spec.check_dim(n).map_err(|e| perr(*line, format!("`attack`: {e}")))?;
        }
        let x0 = match x0 {
            Some((line, v)) => {
                if v.len() != n {
                    return Err(perr(line, format!("`x0`: {} coordinates for a {n}-state model", v.len())));
                }
                Some(v)
            }
            None if model_source == ModelSource::Builtin => Some(BENCHMARK_X0.to_vec()),
            None => None,
        };
        Ok(Self {
            model_source,
            model,
            disturbance: disturbance.map(|(_, s)| s),
            x0,
            horizon,
            seeds,
            methods,
            master_seed,
            out,
        })
    }

    pub fn estimator_configs(&self) -> Vec<EstimatorConfig> {
        if self.methods.is_empty() {
            vec![EstimatorConfig::ls(), EstimatorConfig::l1(), EstimatorConfig::huber(0.1)]
        } else {
            self.methods.iter().map(|m| EstimatorConfig::new(*m)).collect()
        }
    }

    fn require_disturbance(&self) -> Result<&DisturbanceSpec> {
        self.disturbance.as_ref().ok_or_else(|| Error::Parse {
            line: 0,
            msg: "`noise` or `attack`: a disturbance directive is required".into(),
        })
    }

    fn require_x0(&self) -> Result<&[f64]> {
        self.x0.as_deref().ok_or_else(|| Error::Parse {
            line: 0,
            msg: "`x0`: required for a model file".into(),
        })
    }

    fn require_out(&self) -> Result<&Path> {
        self.out.as_deref().ok_or_else(|| Error::Parse {
            line: 0,
            msg: "`out`: an output path is required".into(),
        })
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Parse {
        line: 0,
        msg: format!("cannot write {}: {e}", path.display()),
    })
}

fn report(err: &mut dyn Write, e: &Error) -> i32 {
    let _ = writeln!(err, "error: {e}");
    exit_code(e)
}

/// `simulate`: writes the trajectory CSV and prints a short summary.
pub fn cmd_simulate(config_path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match run_simulate(config_path, out) {
        Ok(()) => EXIT_OK,
        Err(e) => report(err, &e),
    }
}

fn run_simulate(config_path: &Path, out: &mut dyn Write) -> Result<()> {
    let cfg = RunConfig::load(config_path)?;
    let spec = cfg.require_disturbance()?;
    let horizon = match &cfg.horizon {
        Some(Horizon::Single(t)) => *t,
        Some(Horizon::Grid(_)) => {
            return Err(Error::Parse {
                line: 0,
                msg: "`T`: simulate needs a single length, not `tgrid`".into(),
            })
        }
        None => {
            return Err(Error::Parse {
                line: 0,
                msg: "`T`: trajectory length is required".into(),
            })
        }
    };
    let path = cfg.require_out()?;
    let mut rng = derive_stream(cfg.master_seed, 0);
    let traj = simulate(&cfg.model, spec, cfg.require_x0()?, horizon, &mut rng)?;
    write_file(path, &traj.to_csv())?;
    let _ = writeln!(out, "T = {}", traj.horizon());
    let _ = writeln!(out, "max_norm = {}", traj.max_norm());
    let _ = writeln!(out, "attacks = {}", traj.attack_count());
    let _ = writeln!(out, "wrote {}", path.display());
    Ok(())
}

fn output_path_for(base: &Path, method: Method, several: bool) -> PathBuf {
    if !several {
        return base.to_path_buf();
    }
    let tag: String = method
        .to_string()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' })
        .collect();
    let tag = tag.trim_end_matches('_');
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match base.extension() {
        Some(ext) => format!("{stem}.{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{tag}"),
    };
    base.with_file_name(name)
}

/// `fit`: estimates `Â` from a trajectory CSV for each configured method.
pub fn cmd_fit(config_path: &Path, trajectory_path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match run_fit(config_path, trajectory_path, out) {
        Ok(()) => EXIT_OK,
        Err(e) => report(err, &e),
    }
}

fn run_fit(config_path: &Path, trajectory_path: &Path, out: &mut dyn Write) -> Result<()> {
    let cfg = RunConfig::load(config_path)?;
    let text = std::fs::read_to_string(trajectory_path).map_err(|e| Error::Parse {
        line: 0,
        msg: format!("cannot read trajectory {}: {e}", trajectory_path.display()),
    })?;
    let traj = Trajectory::from_csv(&text)?;
    if traj.state_dim() != cfg.model.state_dim() {
        return Err(Error::Dimension(format!(
            "trajectory has {} state columns, model expects {}",
            traj.state_dim(),
            cfg.model.state_dim()
        )));
    }
    let data = RegressionData::from_trajectory(&traj, cfg.model.basis())?;
    let methods = cfg.estimator_configs();
    let several = methods.len() > 1;
    for m in &methods {
        let f = fit(&data, m)?;
        let mut s = String::new();
        let _ = writeln!(s, "method {}", m.method);
        let _ = writeln!(s, "  converged = {:?}", f.converged);
        let _ = writeln!(s, "  iterations = {:?}", f.per_row_iterations);
        let _ = writeln!(s, "  objective = {}", f.final_objective);
        for i in 0..f.a_hat.rows() {
            let row: Vec<String> = f.a_hat.row(i).iter().map(|v| format!("{v:.6}")).collect();
            let _ = writeln!(s, "  a_hat[{i}] = [{}]", row.join(", "));
        }
        let errs = row_errors(cfg.model.a_bar(), &f.a_hat);
        let _ = writeln!(s, "  row_errors = {errs:?}");
        let _ = writeln!(s, "  frob_error = {}", errs.iter().map(|e| e * e).sum::<f64>().sqrt());
        if let Some(base) = &cfg.out {
            let path = output_path_for(base, m.method, several);
            write_file(&path, &cfg.model.with_matrix(f.a_hat.clone())?.to_text())?;
            let _ = writeln!(s, "  wrote {}", path.display());
        }
        let _ = out.write_all(s.as_bytes());
    }
    Ok(())
}

/// `sweep`: writes the sweep CSV and prints slope and boundedness summaries.
pub fn cmd_sweep(config_path: &Path, include_timing: bool, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match run_sweep_cmd(config_path, include_timing, out, err) {
        Ok(code) => code,
        Err(e) => report(err, &e),
    }
}

fn run_sweep_cmd(config_path: &Path, include_timing: bool, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let cfg = RunConfig::load(config_path)?;
    let spec = cfg.require_disturbance()?.clone();
    let path = cfg.require_out()?.to_path_buf();
    let sweep = SweepConfig {
        model: cfg.model.clone(),
        spec,
        x0: cfg.require_x0()?.to_vec(),
        t_grid: cfg
            .horizon
            .as_ref()
            .map_or_else(|| crate::experiments::DEFAULT_T_GRID.to_vec(), Horizon::grid),
        seeds: cfg.seeds,
        methods: cfg.estimator_configs(),
        master_seed: cfg.master_seed,
    };
    let report = run_sweep(&sweep)?;
    write_file(&path, &report.to_csv(include_timing))?;
    let valid = report.rows.iter().filter(|r| r.is_valid()).count();
    let _ = writeln!(err, "sweep: {} cells, {valid} valid", report.rows.len());
    let mut s = String::new();
    for m in report.methods() {
        let _ = writeln!(s, "method {m}");
        for (t, e) in report.mean_errors(m, 0) {
            let _ = writeln!(s, "  T = {t:>6}  mean frob_error = {e:.6e}");
        }
        match fit_slope(&report, m, 100) {
            Ok(f) => {
                let _ = writeln!(
                    s,
                    "  slope (T >= 100) = {:.4}  r^2 = {:.4}  over T in [{}, {}]",
                    f.slope, f.r_squared, f.t_range.0, f.t_range.1
                );
            }
            Err(e) => {
                let _ = writeln!(s, "  slope (T >= 100) = n/a ({e})");
            }
        }
        match bounded_error_check(&report, m, 400) {
            Ok((max, f)) => {
                let _ = writeln!(s, "  max mean error (T >= 400) = {max:.6e}  slope = {:.4}", f.slope);
            }
            Err(_) => {
                let max = report.mean_errors(m, 400).iter().map(|(_, e)| *e).fold(0.0, f64::max);
                let _ = writeln!(s, "  max mean error (T >= 400) = {max:.6e}  slope = n/a");
            }
        }
        let max100 = report.mean_errors(m, 100).iter().map(|(_, e)| *e).fold(0.0, f64::max);
        let _ = writeln!(s, "  max mean error (T >= 100) = {max100:.6e}");
    }
    let _ = writeln!(s, "wrote {}", path.display());
    let _ = out.write_all(s.as_bytes());
    if valid > 0 {
        Ok(EXIT_OK)
    } else if report.rows.iter().any(|r| r.failure.as_deref().is_some_and(|f| f.contains("diverged"))) {
        Ok(EXIT_DIVERGENCE)
    } else {
        Ok(EXIT_NUMERICAL)
    }
}

/// Half-width of the sampling hypercube for the Lipschitz estimate.
pub const CHECK_REGION_HALF_WIDTH: f64 = 5.0;
pub const CHECK_SAMPLE_PAIRS: usize = 10_000;

/// `check`: prints the stability report and, given a trajectory, its
/// empirical excitation.
pub fn cmd_check(config_path: &Path, trajectory_path: Option<&Path>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match run_check(config_path, trajectory_path, out) {
        Ok(()) => EXIT_OK,
        Err(e) => report(err, &e),
    }
}

fn run_check(config_path: &Path, trajectory_path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let cfg = RunConfig::load(config_path)?;
    let mut rng = derive_stream(cfg.master_seed, 0);
    let r = check_assumptions(&cfg.model, CHECK_REGION_HALF_WIDTH, CHECK_SAMPLE_PAIRS, &mut rng)?;
    let mut s = String::new();
    let _ = writeln!(s, "rho = {}", r.rho);
    let _ = writeln!(
        s,
        "lipschitz_est = {}  (sampled on [-{CHECK_REGION_HALF_WIDTH}, {CHECK_REGION_HALF_WIDTH}]^n)",
        r.lipschitz_est
    );
    let _ = writeln!(s, "rho_L = {}", r.rho_l);
    let _ = writeln!(s, "stable = {}", r.stable);
    let _ = writeln!(s, "phi0_norm = {}", r.phi0_norm);
    if let Some(p) = trajectory_path {
        let text = std::fs::read_to_string(p).map_err(|e| Error::Parse {
            line: 0,
            msg: format!("cannot read trajectory {}: {e}", p.display()),
        })?;
        let traj = Trajectory::from_csv(&text)?;
        let ex = empirical_excitation(&traj, cfg.model.basis(), None)?;
        let _ = writeln!(s, "lambda_min_sq = {}", ex.lambda_min_sq);
        let _ = writeln!(s, "subset_size = {}", ex.subset_size);
    }
    let _ = out.write_all(s.as_bytes());
    Ok(())
}
