//! Trajectory rollout, noise-free reconstruction and the stability and
//! excitation diagnostics.

use std::fmt::Write as _;

use crate::basis::BasisLibrary;
use crate::disturbance::{draw_disturbance, DisturbanceSpec, RngStream};
use crate::error::{Error, Result};
use crate::linalg::{norm2, spectral_norm, symmetric_eigenvalues, Mat};
use crate::model::SystemModel;

/// States above this norm are treated as divergence.
pub const DIVERGENCE_CUTOFF: f64 = 1e12;

/// States `x_0..x_T` with the disturbances `w_0..w_{T-1}` that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: Vec<Vec<f64>>,
    disturbances: Vec<Vec<f64>>,
    attack_flags: Option<Vec<bool>>,
}

impl Trajectory {
    pub fn new(
        states: Vec<Vec<f64>>,
        disturbances: Vec<Vec<f64>>,
        attack_flags: Option<Vec<bool>>,
    ) -> Result<Self> {
        if states.len() != disturbances.len() + 1 {
            return Err(Error::Dimension(format!(
                "{} states need {} disturbances, got {}",
                states.len(),
                states.len().saturating_sub(1),
                disturbances.len()
            )));
        }
        if let Some(f) = &attack_flags {
            if f.len() != disturbances.len() {
                return Err(Error::Dimension("attack flags length".into()));
            }
        }
        let n = states[0].len();
        if states.iter().chain(&disturbances).any(|v| v.len() != n) {
            return Err(Error::Dimension("inconsistent state dimension".into()));
        }
        Ok(Self {
            states,
            disturbances,
            attack_flags,
        })
    }

    /// Number of transitions `T`.
    pub fn horizon(&self) -> usize {
        self.disturbances.len()
    }

    pub fn state_dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn disturbances(&self) -> &[Vec<f64>] {
        &self.disturbances
    }

    pub fn attack_flags(&self) -> Option<&[bool]> {
        self.attack_flags.as_deref()
    }

    pub fn attack_count(&self) -> usize {
        self.attack_flags
            .as_ref()
            .map_or(0, |f| f.iter().filter(|a| **a).count())
    }

    pub fn max_norm(&self) -> f64 {
        self.states.iter().map(|x| norm2(x)).fold(0.0, f64::max)
    }

    /// First `t` transitions (states `x_0..x_t`).
    pub fn prefix(&self, t: usize) -> Result<Self> {
        if t > self.horizon() {
            return Err(Error::InsufficientData(format!(
                "prefix of length {t} from a trajectory of length {}",
                self.horizon()
            )));
        }
        Ok(Self {
            states: self.states[..=t].to_vec(),
            disturbances: self.disturbances[..t].to_vec(),
            attack_flags: self.attack_flags.as_ref().map(|f| f[..t].to_vec()),
        })
    }

    /// CSV with header `t,x_0,..,x_{n-1},w_0,..,w_{n-1},attacked`. Row `t`
    /// carries `w_t`; the final state row leaves the disturbance fields empty.
    pub fn to_csv(&self) -> String {
        let n = self.state_dim();
        let mut s = String::from("t");
        for i in 0..n {
            let _ = write!(s, ",x_{i}");
        }
        for i in 0..n {
            let _ = write!(s, ",w_{i}");
        }
        s.push_str(",attacked\n");
        for (t, x) in self.states.iter().enumerate() {
            let _ = write!(s, "{t}");
            for v in x {
                let _ = write!(s, ",{v}");
            }
            match self.disturbances.get(t) {
                Some(w) => {
                    for v in w {
                        let _ = write!(s, ",{v}");
                    }
                    match &self.attack_flags {
                        Some(f) => s.push_str(if f[t] { ",1" } else { ",0" }),
                        None => s.push(','),
                    }
                }
                None => {
                    s.push_str(&",".repeat(n + 1));
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let perr = |line: usize, msg: String| Error::Parse { line, msg };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| perr(1, "empty trajectory file".into()))?;
        let cols: Vec<&str> = header.trim().split(',').collect();
        let n = cols.iter().filter(|c| c.starts_with("x_")).count();
        let mut expect = vec!["t".to_string()];
        expect.extend((0..n).map(|i| format!("x_{i}")));
        expect.extend((0..n).map(|i| format!("w_{i}")));
        expect.push("attacked".into());
        if n == 0 || cols != expect {
            return Err(perr(1, format!("unexpected header `{}`", header.trim())));
        }
        let width = 2 * n + 2;
        let mut states = Vec::new();
        let mut dist = Vec::new();
        let mut flags = Vec::new();
        let mut have_flags = None;
        let mut finished = false;
        for (k, line) in lines {
            let lineno = k + 1;
            if finished {
                return Err(perr(lineno, "data after the final state row".into()));
            }
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != width {
                return Err(perr(lineno, format!("expected {width} columns, got {}", f.len())));
            }
            let num = |s: &str| -> Result<f64> {
                let v: f64 = s
                    .trim()
                    .parse()
                    .map_err(|_| perr(lineno, format!("`{s}` is not a number")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(perr(lineno, "non-finite value".into()))
                }
            };
            let t: usize = f[0]
                .trim()
                .parse()
                .map_err(|_| perr(lineno, "bad time index".into()))?;
            if t != states.len() {
                return Err(perr(lineno, format!("time index {t} out of sequence")));
            }
            states.push(f[1..=n].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?);
            if f[n + 1..].iter().all(|s| s.trim().is_empty()) {
                finished = true;
                continue;
            }
            dist.push(f[n + 1..=2 * n].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?);
            let flag = match f[2 * n + 1].trim() {
                "" => None,
                "0" => Some(false),
                "1" => Some(true),
                other => return Err(perr(lineno, format!("bad attacked flag `{other}`"))),
            };
            match (have_flags, flag) {
                (None, _) => have_flags = Some(flag.is_some()),
                (Some(h), fl) if h != fl.is_some() => {
                    return Err(perr(lineno, "attacked column partially filled".into()))
                }
                _ => {}
            }
            if let Some(fl) = flag {
                flags.push(fl);
            }
        }
        if !finished {
            return Err(perr(0, "missing final state row".into()));
        }
        let flags = if have_flags == Some(true) { Some(flags) } else { None };
        Self::new(states, dist, flags)
    }
}

/// A rollout that may have stopped early at the divergence cutoff.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub trajectory: Trajectory,
    /// `(t, norm)` of the first state that crossed the cutoff, if any.
    pub divergence: Option<(usize, f64)>,
}

impl Rollout {
    pub fn into_result(self) -> Result<Trajectory> {
        match self.divergence {
            Some((t, norm)) => Err(Error::Divergence { t, norm }),
            None => Ok(self.trajectory),
        }
    }
}

fn check_x0(n: usize, x0: &[f64]) -> Result<()> {
    if x0.len() != n {
        return Err(Error::Dimension(format!(
            "x0 has {} coordinates, model has {n}",
            x0.len()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("x0".into()));
    }
    Ok(())
}

fn rollout<F>(a: &Mat, basis: &BasisLibrary, x0: &[f64], horizon: usize, mut disturb: F) -> Rollout
where
    F: FnMut(&[f64]) -> Option<(Vec<f64>, bool)>,
{
    let mut states = Vec::with_capacity(horizon + 1);
    let mut dist = Vec::with_capacity(horizon);
    let mut flags = Vec::with_capacity(horizon);
    let mut track_flags = true;
    let mut phi = vec![0.0; basis.len()];
    states.push(x0.to_vec());
    let mut divergence = None;
    for t in 0..horizon {
        let x = &states[t];
        basis.eval_into(x, &mut phi);
        let mut next = a.mul_vec(&phi);
        let (w, attacked) = match disturb(x) {
            Some(d) => d,
            None => {
                track_flags = false;
                (vec![0.0; x.len()], false)
            }
        };
        for (xn, wi) in next.iter_mut().zip(&w) {
            *xn += wi;
        }
        let norm = norm2(&next);
        if norm.is_nan() || norm > DIVERGENCE_CUTOFF {
            divergence = Some((t + 1, norm));
            break;
        }
        states.push(next);
        dist.push(w);
        flags.push(attacked);
    }
    Rollout {
        trajectory: Trajectory {
            states,
            disturbances: dist,
            attack_flags: track_flags.then_some(flags),
        },
        divergence,
    }
}

/// Rolls out `x_{t+1} = Ā φ(x_t) + w_t`, stopping at the divergence cutoff.
pub fn simulate_rollout(
    model: &SystemModel,
    spec: &DisturbanceSpec,
    x0: &[f64],
    horizon: usize,
    rng: &mut RngStream,
) -> Result<Rollout> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("trajectory length T must be >= 1".into()));
    }
    check_x0(model.state_dim(), x0)?;
    spec.validate()?;
    spec.check_dim(model.state_dim())?;
    Ok(rollout(model.a_bar(), model.basis(), x0, horizon, |x| {
        Some(draw_disturbance(spec, x, rng))
    }))
}

pub fn simulate(
    model: &SystemModel,
    spec: &DisturbanceSpec,
    x0: &[f64],
    horizon: usize,
    rng: &mut RngStream,
) -> Result<Trajectory> {
    simulate_rollout(model, spec, x0, horizon, rng)?.into_result()
}

/// Noise-free rollout `x_{t+1} = Â φ(x_t)` that reports divergence as data.
pub fn reconstruct_rollout(a_hat: &Mat, basis: &BasisLibrary, x0: &[f64], horizon: usize) -> Result<Rollout> {
    if a_hat.rows() != basis.state_dim() || a_hat.cols() != basis.len() {
        return Err(Error::Dimension(format!(
            "estimate is {}x{}, basis maps R^{} to R^{}",
            a_hat.rows(),
            a_hat.cols(),
            basis.state_dim(),
            basis.len()
        )));
    }
    check_x0(basis.state_dim(), x0)?;
    Ok(rollout(a_hat, basis, x0, horizon, |_| None))
}

pub fn reconstruct(a_hat: &Mat, basis: &BasisLibrary, x0: &[f64], horizon: usize) -> Result<Trajectory> {
    reconstruct_rollout(a_hat, basis, x0, horizon)?.into_result()
}

/// Stability quantities: `ρ = ‖Ā‖₂`, a sampled Lipschitz estimate of φ and
/// `‖φ(0)‖₂` (nonzero bases violate the `φ(0) = 0` premise).
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub rho: f64,
    pub lipschitz_est: f64,
    pub rho_l: f64,
    pub stable: bool,
    pub phi0_norm: f64,
}

pub fn check_assumptions(
    model: &SystemModel,
    sample_region_half_width: f64,
    samples: usize,
    rng: &mut RngStream,
) -> Result<AssumptionReport> {
    if samples < 2 {
        return Err(Error::InvalidParameter("need at least 2 sample pairs".into()));
    }
    if !(sample_region_half_width.is_finite() && sample_region_half_width > 0.0) {
        return Err(Error::InvalidParameter("sample region half width must be > 0".into()));
    }
    let rho = spectral_norm(model.a_bar(), 1e-10, 10_000);
    let lipschitz_est = lipschitz_estimate(model.basis(), sample_region_half_width, samples, rng);
    let rho_l = rho * lipschitz_est;
    let phi0 = model.basis().eval(&vec![0.0; model.state_dim()])?;
    Ok(AssumptionReport {
        rho,
        lipschitz_est,
        rho_l,
        stable: rho_l < 1.0,
        phi0_norm: norm2(&phi0),
    })
}

/// `max ‖φ(x) − φ(x̃)‖₂ / ‖x − x̃‖₂` over pairs drawn uniformly from the
/// hypercube `[−h, h]ⁿ`.
pub fn lipschitz_estimate(basis: &BasisLibrary, half_width: f64, samples: usize, rng: &mut RngStream) -> f64 {
    let n = basis.state_dim();
    let m = basis.len();
    let (mut fa, mut fb) = (vec![0.0; m], vec![0.0; m]);
    let mut best: f64 = 0.0;
    for _ in 0..samples {
        let xa: Vec<f64> = (0..n).map(|_| rng.uniform(-half_width, half_width)).collect();
        let xb: Vec<f64> = (0..n).map(|_| rng.uniform(-half_width, half_width)).collect();
        let dx: f64 = xa.iter().zip(&xb).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if dx == 0.0 {
            continue;
        }
        basis.eval_into(&xa, &mut fa);
        basis.eval_into(&xb, &mut fb);
        let df: f64 = fa.iter().zip(&fb).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        best = best.max(df / dx);
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationReport {
    /// Smallest eigenvalue of `(1/|T'|) Σ φ(x_t) φ(x_t)ᵀ`.
    pub lambda_min_sq: f64,
    pub subset_size: usize,
}

/// Empirical excitation over the time indices in `subset` (all `t < T` by
/// default). This is the sample surrogate for the conditional-expectation
/// excitation level; a single trajectory cannot observe the latter.
pub fn empirical_excitation(
    traj: &Trajectory,
    basis: &BasisLibrary,
    subset: Option<&[usize]>,
) -> Result<ExcitationReport> {
    if traj.state_dim() != basis.state_dim() {
        return Err(Error::Dimension("trajectory and basis state dimensions differ".into()));
    }
    let horizon = traj.horizon();
    let mut idx: Vec<usize> = match subset {
        Some(s) => s.to_vec(),
        None => (0..horizon).collect(),
    };
    if idx.is_empty() {
        return Err(Error::InsufficientData("excitation over an empty time set".into()));
    }
    if let Some(bad) = idx.iter().find(|t| **t >= horizon) {
        return Err(Error::InvalidParameter(format!(
            "time index {bad} outside [0, {}]",
            horizon.saturating_sub(1)
        )));
    }
    idx.sort_unstable();
    let m = basis.len();
    let mut gram = vec![0.0; m * m];
    let mut phi = vec![0.0; m];
    for &t in &idx {
        basis.eval_into(&traj.states[t], &mut phi);
        for i in 0..m {
            for j in 0..m {
                gram[i * m + j] += phi[i] * phi[j];
            }
        }
    }
    let k = idx.len() as f64;
    gram.iter_mut().for_each(|g| *g /= k);
    let eig = symmetric_eigenvalues(&Mat::new(m, m, gram)?, 1e-15)?;
    Ok(ExcitationReport {
        lambda_min_sq: eig.first().copied().unwrap_or(0.0).max(0.0),
        subset_size: idx.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisTerm;
    use crate::disturbance::derive_stream;
    use crate::model::{benchmark_system, BENCHMARK_X0};

    fn scalar(a: f64) -> SystemModel {
        SystemModel::new(Mat::new(1, 1, vec![a]).unwrap(), BasisLibrary::linear(1)).unwrap()
    }

    #[test]
    fn geometric_decay() {
        let traj = simulate(&scalar(0.5), &DisturbanceSpec::none(), &[1.0], 3, &mut derive_stream(0, 0)).unwrap();
        let xs: Vec<f64> = traj.states().iter().map(|x| x[0]).collect();
        assert_eq!(xs, vec![1.0, 0.5, 0.25, 0.125]);
        assert_eq!(traj.attack_flags(), Some(&[false, false, false][..]));
    }

    #[test]
    fn first_benchmark_step_is_exact() {
        let m = benchmark_system();
        let traj = simulate(&m, &DisturbanceSpec::none(), &BENCHMARK_X0, 1, &mut derive_stream(0, 0)).unwrap();
        assert_eq!(traj.states()[1], m.step(&BENCHMARK_X0).unwrap());
    }

    #[test]
    fn divergence_names_the_step() {
        let err = simulate(&scalar(10.0), &DisturbanceSpec::none(), &[1.0], 100, &mut derive_stream(0, 0)).unwrap_err();
        assert_eq!(err, Error::Divergence { t: 13, norm: 1e13 });
        assert!(simulate(&scalar(0.5), &DisturbanceSpec::none(), &[1.0], 0, &mut derive_stream(0, 0)).is_err());
    }

    #[test]
    fn reconstruct_matches_noiseless_simulation() {
        let m = benchmark_system();
        let sim = simulate(&m, &DisturbanceSpec::none(), &BENCHMARK_X0, 200, &mut derive_stream(9, 9)).unwrap();
        let rec = reconstruct(m.a_bar(), m.basis(), &BENCHMARK_X0, 200).unwrap();
        assert_eq!(sim.states(), rec.states());
        assert!(rec.attack_flags().is_none());
    }

    #[test]
    fn zero_estimate_collapses_to_origin() {
        let basis = BasisLibrary::new(2, vec![BasisTerm::Linear(0), BasisTerm::Cross(0, 1), BasisTerm::SinProd(0, 1)]).unwrap();
        let rec = reconstruct(&Mat::zeros(2, 3), &basis, &[4.0, -1.0], 5).unwrap();
        assert!(rec.states()[1..].iter().all(|x| x == &vec![0.0, 0.0]));
    }

    #[test]
    fn assumption_checks_on_linear_models() {
        let half = SystemModel::new(Mat::identity(3).scaled(0.5), BasisLibrary::linear(3)).unwrap();
        let r = check_assumptions(&half, 5.0, 100, &mut derive_stream(0, 0)).unwrap();
        assert!((r.rho - 0.5).abs() < 1e-12);
        assert!((r.lipschitz_est - 1.0).abs() < 1e-6);
        assert!(r.stable);
        assert_eq!(r.phi0_norm, 0.0);
        let double = SystemModel::new(Mat::identity(3).scaled(2.0), BasisLibrary::linear(3)).unwrap();
        assert!(!check_assumptions(&double, 5.0, 100, &mut derive_stream(0, 0)).unwrap().stable);
        assert!(check_assumptions(&double, 5.0, 1, &mut derive_stream(0, 0)).is_err());
    }

    #[test]
    fn benchmark_basis_reports_cos_offset() {
        let r = check_assumptions(&benchmark_system(), 5.0, 1000, &mut derive_stream(0, 0)).unwrap();
        assert_eq!(r.phi0_norm, 1.0);
    }

    #[test]
    fn excitation_edge_cases() {
        let traj = Trajectory::new(vec![vec![1.0, 2.0], vec![0.0, 0.0]], vec![vec![0.0, 0.0]], None).unwrap();
        let r = empirical_excitation(&traj, &BasisLibrary::linear(2), None).unwrap();
        assert_eq!(r.subset_size, 1);
        assert!(r.lambda_min_sq.abs() < 1e-14);
        assert!(empirical_excitation(&traj, &BasisLibrary::linear(2), Some(&[])).is_err());
        assert!(empirical_excitation(&traj, &BasisLibrary::linear(2), Some(&[1])).is_err());

        // states cycle through standard basis vectors
        let m = 4;
        let states: Vec<Vec<f64>> = (0..=m)
            .map(|t| (0..m).map(|i| if i == t % m { 1.0 } else { 0.0 }).collect())
            .collect();
        let traj = Trajectory::new(states, vec![vec![0.0; m]; m], None).unwrap();
        let r = empirical_excitation(&traj, &BasisLibrary::linear(m), None).unwrap();
        assert!((r.lambda_min_sq - 0.25).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip_and_layout() {
        let m = benchmark_system();
        let spec = DisturbanceSpec::state_attack(0.4, 0.2, 1.0).unwrap();
        let traj = simulate(&m, &spec, &BENCHMARK_X0, 20, &mut derive_stream(5, 0)).unwrap();
        let csv = traj.to_csv();
        assert!(csv.starts_with("t,x_0,x_1,x_2,w_0,w_1,w_2,attacked\n"));
        assert!(csv.ends_with(",,,,\n"));
        assert_eq!(csv.lines().count(), 22);
        assert_eq!(Trajectory::from_csv(&csv).unwrap(), traj);

        let rec = reconstruct(m.a_bar(), m.basis(), &BENCHMARK_X0, 3).unwrap();
        assert_eq!(Trajectory::from_csv(&rec.to_csv()).unwrap(), rec);
    }

    #[test]
    fn csv_rejects_malformed_input() {
        assert!(Trajectory::from_csv("").is_err());
        assert!(Trajectory::from_csv("t,x_0,w_0\n").is_err());
        let bad_width = "t,x_0,w_0,attacked\n0,1,0.5\n1,2,,\n";
        assert!(matches!(Trajectory::from_csv(bad_width), Err(Error::Parse { line: 2, .. })));
        let no_final = "t,x_0,w_0,attacked\n0,1,0.5,0\n";
        assert!(Trajectory::from_csv(no_final).is_err());
    }
}
