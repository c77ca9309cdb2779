//! Huber loss machinery and the estimator objectives.
//!
//! The Huber objective equals the lasso-type objective
//! `Σ_t ½‖y_t − A φ_t − v_t‖² + μ‖v_t‖₁` once each `v_{t,i}` is replaced by
//! the soft-threshold of the corresponding residual ([`inner_v`]).

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{dot, Mat};
use crate::simulate::Trajectory;
use crate::basis::BasisLibrary;

/// Which regression objective an estimate minimizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Ls,
    L1,
    Huber { mu: f64 },
}

impl Method {
    pub fn huber(mu: f64) -> Result<Self> {
        check_mu(mu)?;
        Ok(Method::Huber { mu })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Method::Huber { mu } => check_mu(mu),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Ls => write!(f, "ls"),
            Method::L1 => write!(f, "l1"),
            Method::Huber { mu } => write!(f, "huber({mu})"),
        }
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if mu.is_finite() && mu > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("huber threshold mu must be > 0, got {mu}")))
    }
}

/// `H_μ(z)`: `z²/2` for `|z| ≤ μ`, `μ|z| − μ²/2` otherwise.
pub fn huber_value(z: f64, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    Ok(huber(z, mu))
}

/// `H'_μ(z)`: `z` clipped to `[−μ, μ]`.
pub fn huber_deriv(z: f64, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    Ok(huber_grad(z, mu))
}

/// Minimizer over `v` of `½(r − v)² + μ|v|`, i.e. the soft-threshold of `r`.
pub fn inner_v(residual: f64, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    Ok(soft_threshold(residual, mu))
}

#[inline]
pub(crate) fn huber(z: f64, mu: f64) -> f64 {
    let a = z.abs();
    if a <= mu {
        0.5 * z * z
    } else {
        mu * a - 0.5 * mu * mu
    }
}

#[inline]
pub(crate) fn huber_grad(z: f64, mu: f64) -> f64 {
    z.clamp(-mu, mu)
}

#[inline]
pub(crate) fn soft_threshold(r: f64, mu: f64) -> f64 {
    if r > mu {
        r - mu
    } else if r < -mu {
        r + mu
    } else {
        0.0
    }
}

/// Regression samples `(φ(x_t), x_{t+1})`, `t = 0..T−1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    phi: Mat,
    y: Mat,
}

impl RegressionData {
    pub fn new(phi: Mat, y: Mat) -> Result<Self> {
        if phi.rows() != y.rows() {
            return Err(Error::Dimension(format!(
                "{} feature rows but {} targets",
                phi.rows(),
                y.rows()
            )));
        }
        Ok(Self { phi, y })
    }

    pub fn from_trajectory(traj: &Trajectory, basis: &BasisLibrary) -> Result<Self> {
        if traj.state_dim() != basis.state_dim() {
            return Err(Error::Dimension("trajectory and basis state dimensions differ".into()));
        }
        let horizon = traj.horizon();
        let m = basis.len();
        let n = basis.state_dim();
        let mut phi = vec![0.0; horizon * m];
        let mut y = Vec::with_capacity(horizon * n);
        let states = traj.states();
        for t in 0..horizon {
            basis.eval_into(&states[t], &mut phi[t * m..(t + 1) * m]);
            y.extend_from_slice(&states[t + 1]);
        }
        Self::new(Mat::new(horizon, m, phi)?, Mat::new(horizon, n, y)?)
    }

    /// Number of samples `T`.
    pub fn len(&self) -> usize {
        self.phi.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn feature_dim(&self) -> usize {
        self.phi.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.y.cols()
    }

    pub fn phi(&self) -> &Mat {
        &self.phi
    }

    pub fn y(&self) -> &Mat {
        &self.y
    }

    /// First `t` samples.
    pub fn prefix(&self, t: usize) -> Result<Self> {
        if t > self.len() {
            return Err(Error::InsufficientData(format!("prefix {t} of {} samples", self.len())));
        }
        Self::new(
            Mat::new(t, self.feature_dim(), self.phi.as_slice()[..t * self.feature_dim()].to_vec())?,
            Mat::new(t, self.output_dim(), self.y.as_slice()[..t * self.output_dim()].to_vec())?,
        )
    }

    fn check_coef(&self, a: &Mat) -> Result<()> {
        if a.rows() != self.output_dim() || a.cols() != self.feature_dim() {
            return Err(Error::Dimension(format!(
                "coefficient matrix is {}x{}, data needs {}x{}",
                a.rows(),
                a.cols(),
                self.output_dim(),
                self.feature_dim()
            )));
        }
        Ok(())
    }

    /// Residual matrix `R[t][i] = y_{t,i} − a_iᵀ φ_t`, row-major `T×n`.
    pub fn residuals(&self, a: &Mat) -> Result<Mat> {
        self.check_coef(a)?;
        let (t_len, n) = (self.len(), self.output_dim());
        let mut r = Vec::with_capacity(t_len * n);
        for t in 0..t_len {
            let phi_t = self.phi.row(t);
            for i in 0..n {
                r.push(self.y.get(t, i) - dot(a.row(i), phi_t));
            }
        }
        Mat::new(t_len, n, r)
    }
}

/// Total objective of `method` at coefficients `a`, summed in order
/// `t = 0..T−1`, then `i = 0..n−1`.
pub fn objective(method: Method, a: &Mat, data: &RegressionData) -> Result<f64> {
    method.validate()?;
    let r = data.residuals(a)?;
    let sum = match method {
        Method::Ls => r.as_slice().iter().map(|z| z * z).sum(),
        Method::L1 => r.as_slice().iter().map(|z| z.abs()).sum(),
        Method::Huber { mu } => r.as_slice().iter().map(|z| huber(*z, mu)).sum(),
    };
    Ok(sum)
}

/// `Σ_t [ ½‖y_t − a φ_t − v_t‖₂² + μ‖v_t‖₁ ]` for an explicit `T×n` matrix `v`.
pub fn lasso_form_objective(a: &Mat, v: &Mat, data: &RegressionData, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    let r = data.residuals(a)?;
    if v.rows() != r.rows() || v.cols() != r.cols() {
        return Err(Error::Dimension(format!(
            "v is {}x{}, expected {}x{}",
            v.rows(),
            v.cols(),
            r.rows(),
            r.cols()
        )));
    }
    let mut total = 0.0;
    for t in 0..r.rows() {
        let (mut quad, mut abs) = (0.0, 0.0);
        for i in 0..r.cols() {
            let d = r.get(t, i) - v.get(t, i);
            quad += d * d;
            abs += v.get(t, i).abs();
        }
        total += 0.5 * quad + mu * abs;
    }
    Ok(total)
}

/// Closed-form inner minimizer `v*` of [`lasso_form_objective`] at `a`.
pub fn optimal_v(a: &Mat, data: &RegressionData, mu: f64) -> Result<Mat> {
    check_mu(mu)?;
    let r = data.residuals(a)?;
    let v = r.as_slice().iter().map(|z| soft_threshold(*z, mu)).collect();
    Mat::new(r.rows(), r.cols(), v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_sample(y: f64) -> RegressionData {
        RegressionData::new(Mat::new(1, 1, vec![1.0]).unwrap(), Mat::new(1, 1, vec![y]).unwrap()).unwrap()
    }

    #[test]
    fn huber_branches() {
        assert!((huber_value(0.05, 0.1).unwrap() - 0.00125).abs() < 1e-15);
        assert!((huber_value(0.2, 0.1).unwrap() - 0.015).abs() < 1e-15);
        for z in [0.1, -0.1] {
            let quad = 0.5 * z * z;
            let lin = 0.1 * f64::abs(z) - 0.5 * 0.1 * 0.1;
            assert!((quad - lin).abs() < 1e-16);
            assert!((huber_value(z, 0.1).unwrap() - 0.005).abs() < 1e-16);
        }
    }

    #[test]
    fn derivative_and_inner_v() {
        assert_eq!(huber_deriv(0.05, 0.1).unwrap(), 0.05);
        assert_eq!(huber_deriv(5.0, 0.1).unwrap(), 0.1);
        assert_eq!(huber_deriv(-5.0, 0.1).unwrap(), -0.1);
        assert_eq!(inner_v(0.05, 0.1).unwrap(), 0.0);
        assert!((inner_v(0.3, 0.1).unwrap() - 0.2).abs() < 1e-16);
        assert!((inner_v(-0.3, 0.1).unwrap() + 0.2).abs() < 1e-16);
    }

    #[test]
    fn non_positive_mu_is_rejected() {
        for mu in [0.0, -1.0, f64::NAN] {
            assert!(huber_value(1.0, mu).is_err());
            assert!(huber_deriv(1.0, mu).is_err());
            assert!(inner_v(1.0, mu).is_err());
            assert!(Method::huber(mu).is_err());
        }
    }

    #[test]
    fn single_sample_objectives() {
        let d = one_sample(0.3);
        let a = Mat::zeros(1, 1);
        assert!((objective(Method::Ls, &a, &d).unwrap() - 0.09).abs() < 1e-15);
        assert!((objective(Method::L1, &a, &d).unwrap() - 0.3).abs() < 1e-15);
        assert!((objective(Method::Huber { mu: 0.1 }, &a, &d).unwrap() - 0.025).abs() < 1e-15);
    }

    #[test]
    fn lasso_form_special_cases() {
        let phi = Mat::new(3, 2, vec![1.0, 0.5, -0.3, 2.0, 0.7, 0.1]).unwrap();
        let y = Mat::new(3, 1, vec![0.4, -1.2, 2.5]).unwrap();
        let d = RegressionData::new(phi, y).unwrap();
        let a = Mat::new(1, 2, vec![0.2, -0.1]).unwrap();
        let mu = 0.3;
        let zero = Mat::zeros(3, 1);
        let ls = objective(Method::Ls, &a, &d).unwrap();
        assert!((lasso_form_objective(&a, &zero, &d, mu).unwrap() - 0.5 * ls).abs() < 1e-14);
        let full = d.residuals(&a).unwrap();
        let l1 = objective(Method::L1, &a, &d).unwrap();
        assert!((lasso_form_objective(&a, &full, &d, mu).unwrap() - mu * l1).abs() < 1e-14);
        let v = optimal_v(&a, &d, mu).unwrap();
        let h = objective(Method::Huber { mu }, &a, &d).unwrap();
        assert!((lasso_form_objective(&a, &v, &d, mu).unwrap() - h).abs() < 1e-12 * (1.0 + h));
    }

    #[test]
    fn dimension_errors() {
        let d = one_sample(1.0);
        assert!(objective(Method::Ls, &Mat::zeros(2, 1), &d).is_err());
        assert!(lasso_form_objective(&Mat::zeros(1, 1), &Mat::zeros(2, 1), &d, 0.1).is_err());
        assert!(RegressionData::new(Mat::zeros(2, 1), Mat::zeros(1, 1)).is_err());
    }
}
