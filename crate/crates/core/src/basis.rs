//! Closed set of basis terms making up the feature map φ: Rⁿ → Rᵐ.

use std::fmt;

use crate::error::{Error, Result};

/// One coordinate of the feature map. Indices are 0-based state coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisTerm {
    Linear(usize),
    Cross(usize, usize),
    Square(usize),
    SinProd(usize, usize),
    Cos(usize),
}

impl BasisTerm {
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            BasisTerm::Linear(i) => x[i],
            BasisTerm::Cross(i, j) => x[i] * x[j],
            BasisTerm::Square(i) => x[i] * x[i],
            BasisTerm::SinProd(i, j) => (x[i] * x[j]).sin(),
            BasisTerm::Cos(i) => x[i].cos(),
        }
    }

    fn max_index(&self) -> usize {
        match *self {
            BasisTerm::Linear(i) | BasisTerm::Square(i) | BasisTerm::Cos(i) => i,
            BasisTerm::Cross(i, j) | BasisTerm::SinProd(i, j) => i.max(j),
        }
    }

    /// Parses the textual form used in model files, e.g. `cross 0 1`.
    pub fn parse(s: &str) -> Option<Self> {
        let mut it = s.split_whitespace();
        let kind = it.next()?;
        let idx: Vec<usize> = it.map(|t| t.parse().ok()).collect::<Option<_>>()?;
        match (kind, idx.as_slice()) {
            ("linear", &[i]) => Some(BasisTerm::Linear(i)),
            ("cross", &[i, j]) => Some(BasisTerm::Cross(i, j)),
            ("square", &[i]) => Some(BasisTerm::Square(i)),
            ("sinprod", &[i, j]) => Some(BasisTerm::SinProd(i, j)),
            ("cos", &[i]) => Some(BasisTerm::Cos(i)),
            _ => None,
        }
    }
}

impl fmt::Display for BasisTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisTerm::Linear(i) => write!(f, "linear {i}"),
            BasisTerm::Cross(i, j) => write!(f, "cross {i} {j}"),
            BasisTerm::Square(i) => write!(f, "square {i}"),
            BasisTerm::SinProd(i, j) => write!(f, "sinprod {i} {j}"),
            BasisTerm::Cos(i) => write!(f, "cos {i}"),
        }
    }
}

/// Ordered list of terms over an `n`-dimensional state; term order is the
/// coordinate order of φ(x).
#[derive(Debug, Clone, PartialEq)]
pub struct BasisLibrary {
    state_dim: usize,
    terms: Vec<BasisTerm>,
}

impl BasisLibrary {
    pub fn new(state_dim: usize, terms: Vec<BasisTerm>) -> Result<Self> {
        for t in &terms {
            if t.max_index() >= state_dim {
                return Err(Error::InvalidParameter(format!(
                    "term `{t}` indexes past state dimension {state_dim}"
                )));
            }
            if let BasisTerm::Cross(i, j) = *t {
                if i == j {
                    return Err(Error::InvalidParameter(format!(
                        "cross term needs distinct indices, got `{t}`"
                    )));
                }
            }
        }
        Ok(Self { state_dim, terms })
    }

    /// φ(x) = x.
    pub fn linear(state_dim: usize) -> Self {
        Self {
            state_dim,
            terms: (0..state_dim).map(BasisTerm::Linear).collect(),
        }
    }

    /// The 11-term library over R³:
    /// `[x₁, x₂, x₃, x₁x₂, x₂x₃, x₃x₁, x₁², x₂², x₃², sin(x₁x₂), cos(x₃)]`.
    pub fn polynomial_trig_3d() -> Self {
        use BasisTerm::*;
        Self {
            state_dim: 3,
            terms: vec![
                Linear(0),
                Linear(1),
                Linear(2),
                Cross(0, 1),
                Cross(1, 2),
                Cross(2, 0),
                Square(0),
                Square(1),
                Square(2),
                SinProd(0, 1),
                Cos(2),
            ],
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[BasisTerm] {
        &self.terms
    }

    pub fn has_constant_offset(&self) -> bool {
        self.terms.iter().any(|t| matches!(t, BasisTerm::Cos(_)))
    }

    /// Evaluates φ(x), checking dimension and finiteness.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.state_dim {
            return Err(Error::Dimension(format!(
                "state has {} coordinates, basis expects {}",
                x.len(),
                self.state_dim
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("basis input".into()));
        }
        let mut out = vec![0.0; self.terms.len()];
        self.eval_into(x, &mut out);
        Ok(out)
    }

    /// Unchecked evaluation into a caller buffer of length `m`.
    #[inline]
    pub(crate) fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, t) in out.iter_mut().zip(&self.terms) {
            *o = t.eval(x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_trig_library_at_zero_and_ones() {
        let b = BasisLibrary::polynomial_trig_3d();
        let z = b.eval(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(z, vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let o = b.eval(&[1.0, 1.0, 1.0]).unwrap();
        let mut expect = vec![1.0; 9];
        expect.push(1f64.sin());
        expect.push(1f64.cos());
        assert_eq!(o, expect);
    }

    #[test]
    fn linear_library_is_identity() {
        let b = BasisLibrary::linear(4);
        let x = [0.3, -2.0, 1e-300, 7.5];
        assert_eq!(b.eval(&x).unwrap(), x.to_vec());
    }

    #[test]
    fn errors() {
        let b = BasisLibrary::linear(2);
        assert!(matches!(b.eval(&[1.0]), Err(Error::Dimension(_))));
        assert!(matches!(b.eval(&[1.0, f64::INFINITY]), Err(Error::NonFinite(_))));
        assert!(BasisLibrary::new(2, vec![BasisTerm::Cross(1, 1)]).is_err());
        assert!(BasisLibrary::new(2, vec![BasisTerm::Square(2)]).is_err());
    }

    #[test]
    fn term_text_round_trip() {
        for t in BasisLibrary::polynomial_trig_3d().terms() {
            assert_eq!(BasisTerm::parse(&t.to_string()), Some(*t));
        }
        assert_eq!(BasisTerm::parse("cross 0"), None);
        assert_eq!(BasisTerm::parse("tanh 0"), None);
    }
}
