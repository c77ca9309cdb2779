//! System models `x_{t+1} = Ā φ(x_t) + w_t` and their text file format.
//!
//! ```text
//! state_dim 3
//! terms
//! linear 0
//! cross 0 1
//! a_bar
//! 0.8 -0.5
//! ...
//! ```
//!
//! Lines starting with `#` and blank lines are ignored. Decimals are
//! written in shortest round-trip form so reading back is exact.

use std::fmt::Write as _;

use crate::basis::{BasisLibrary, BasisTerm};
use crate::error::{Error, Result};
use crate::linalg::Mat;

#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    a_bar: Mat,
    basis: BasisLibrary,
}

impl SystemModel {
    pub fn new(a_bar: Mat, basis: BasisLibrary) -> Result<Self> {
        if a_bar.cols() != basis.len() || a_bar.rows() != basis.state_dim() {
            return Err(Error::Dimension(format!(
                "matrix is {}x{} but basis maps R^{} to R^{}",
                a_bar.rows(),
                a_bar.cols(),
                basis.state_dim(),
                basis.len()
            )));
        }
        Ok(Self { a_bar, basis })
    }

    pub fn a_bar(&self) -> &Mat {
        &self.a_bar
    }

    pub fn basis(&self) -> &BasisLibrary {
        &self.basis
    }

    pub fn state_dim(&self) -> usize {
        self.basis.state_dim()
    }

    pub fn feature_dim(&self) -> usize {
        self.basis.len()
    }

    /// Model with the same basis and a different matrix.
    pub fn with_matrix(&self, a: Mat) -> Result<Self> {
        Self::new(a, self.basis.clone())
    }

    /// One noise-free step `Ā φ(x)`.
    pub fn step(&self, x: &[f64]) -> Result<Vec<f64>> {
        let phi = self.basis.eval(x)?;
        Ok(self.a_bar.mul_vec(&phi))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "state_dim {}", self.state_dim());
        s.push_str("terms\n");
        for t in self.basis.terms() {
            let _ = writeln!(s, "{t}");
        }
        s.push_str("a_bar\n");
        for i in 0..self.a_bar.rows() {
            let line: Vec<String> = self.a_bar.row(i).iter().map(|v| format!("{v}")).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        enum Section {
            Header,
            Terms,
            Matrix,
        }
        let perr = |line: usize, msg: String| Error::Parse { line, msg };
        let mut state_dim = None;
        let mut terms = Vec::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut section = Section::Header;
        for (k, raw) in text.lines().enumerate() {
            let lineno = k + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line {
                "terms" => {
                    section = Section::Terms;
                    continue;
                }
                "a_bar" => {
                    section = Section::Matrix;
                    continue;
                }
                _ => {}
            }
            match section {
                Section::Header => {
                    let rest = line
                        .strip_prefix("state_dim")
                        .ok_or_else(|| perr(lineno, format!("unexpected `{line}`")))?;
                    let n: usize = rest
                        .trim()
                        .parse()
                        .map_err(|_| perr(lineno, "state_dim must be a count".into()))?;
                    state_dim = Some(n);
                }
                Section::Terms => {
                    let t = BasisTerm::parse(line)
                        .ok_or_else(|| perr(lineno, format!("unknown basis term `{line}`")))?;
                    terms.push(t);
                }
                Section::Matrix => {
                    let row = line
                        .split_whitespace()
                        .map(|v| v.parse::<f64>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|e| perr(lineno, format!("bad matrix entry: {e}")))?;
                    if row.len() != terms.len() {
                        return Err(perr(
                            lineno,
                            format!("matrix row has {} entries, expected {}", row.len(), terms.len()),
                        ));
                    }
                    rows.push(row);
                }
            }
        }
        let n = state_dim.ok_or_else(|| perr(0, "missing state_dim".into()))?;
        if rows.len() != n {
            return Err(perr(0, format!("a_bar has {} rows, expected {n}", rows.len())));
        }
        let basis = BasisLibrary::new(n, terms).map_err(|e| perr(0, e.to_string()))?;
        let a = if n == 0 {
            Mat::zeros(0, basis.len())
        } else {
            Mat::from_rows(&rows)?
        };
        Self::new(a, basis)
    }
}

/// The 3-state, 11-feature benchmark system.
pub fn benchmark_system() -> SystemModel {
    #[rustfmt::skip]
    let a = vec![
        0.8, -0.5, 0.0,  0.0,  0.4, 0.0,   0.0,  0.0, 0.0, 0.1, 0.0,
        0.5,  0.8, 0.0,  0.06, 0.0, 0.0,  -0.05, 0.0, 0.0, 0.0, 0.0,
        0.0,  0.0, 0.45, 0.0,  0.0, 0.05,  0.0,  0.0, 0.0, 0.0, 0.1,
    ];
    SystemModel::new(
        Mat::new(3, 11, a).expect("static matrix"),
        BasisLibrary::polynomial_trig_3d(),
    )
    .expect("static shapes agree")
}

/// Initial state used with [`benchmark_system`].
pub const BENCHMARK_X0: [f64; 3] = [3.0, 3.0, 3.0];
