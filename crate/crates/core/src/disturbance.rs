//! Seeded disturbance generation for the two regimes: persistent zero-mean
//! noise and sparse (Bernoulli-timed) attacks.

use std::fmt;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::norm2;

/// Reproducible random stream identified by `(seed, stream_id)`.
///
/// Backed by ChaCha8 with the stream id selecting an independent keystream,
/// so the sequence is identical on every platform.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform double in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

/// Stream for trial `trial_index` under a master seed.
pub fn derive_stream(seed: u64, trial_index: u64) -> RngStream {
    RngStream::new(seed, trial_index)
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseLaw {
    /// I.i.d. coordinates uniform on `[-a, a]`.
    UniformSym { half_width: f64 },
    /// I.i.d. `N(0, σ²)` coordinates.
    GaussianIso { sigma: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttackValue {
    /// Coordinates uniform on `[c - r, c + r]` with `r = min(‖x_t‖₂, cap)`.
    StateDependent { center: f64, cap: f64 },
    ConstantBias(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackLaw {
    pub p: f64,
    pub value: AttackValue,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DisturbanceSpec {
    ZeroMeanNoise(NoiseLaw),
    SparseAttack(AttackLaw),
}

impl DisturbanceSpec {
    pub fn uniform(half_width: f64) -> Result<Self> {
        let s = Self::ZeroMeanNoise(NoiseLaw::UniformSym { half_width });
        s.validate()?;
        Ok(s)
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        let s = Self::ZeroMeanNoise(NoiseLaw::GaussianIso { sigma });
        s.validate()?;
        Ok(s)
    }

    pub fn state_attack(p: f64, center: f64, cap: f64) -> Result<Self> {
        let s = Self::SparseAttack(AttackLaw {
            p,
            value: AttackValue::StateDependent { center, cap },
        });
        s.validate()?;
        Ok(s)
    }

    pub fn constant_attack(p: f64, bias: Vec<f64>) -> Result<Self> {
        let s = Self::SparseAttack(AttackLaw {
            p,
            value: AttackValue::ConstantBias(bias),
        });
        s.validate()?;
        Ok(s)
    }

    /// Attack regime that never fires: every `w_t` is exactly zero.
    pub fn none() -> Self {
        Self::SparseAttack(AttackLaw {
            p: 0.0,
            value: AttackValue::StateDependent {
                center: 0.0,
                cap: 0.0,
            },
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        match self {
            Self::ZeroMeanNoise(NoiseLaw::UniformSym { half_width: a }) => {
                if !(a.is_finite() && *a > 0.0) {
                    return bad(format!("uniform half width must be > 0, got {a}"));
                }
            }
            Self::ZeroMeanNoise(NoiseLaw::GaussianIso { sigma }) => {
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return bad(format!("gaussian sigma must be > 0, got {sigma}"));
                }
            }
            Self::SparseAttack(AttackLaw { p, value }) => {
                if !(0.0..0.5).contains(p) {
                    return bad(format!("attack probability must lie in [0, 0.5), got {p}"));
                }
                match value {
                    AttackValue::StateDependent { center, cap } => {
                        if !center.is_finite() || !(cap.is_finite() && *cap >= 0.0) {
                            return bad("attack center must be finite and cap >= 0".into());
                        }
                    }
                    AttackValue::ConstantBias(b) => {
                        if b.iter().any(|v| !v.is_finite()) {
                            return bad("attack bias must be finite".into());
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub(crate) fn check_dim(&self, n: usize) -> Result<()> {
        if let Self::SparseAttack(AttackLaw {
            value: AttackValue::ConstantBias(b),
            ..
        }) = self
        {
            if b.len() != n {
                return Err(Error::Dimension(format!(
                    "attack bias has {} coordinates, state has {n}",
                    b.len()
                )));
            }
        }
        Ok(())
    }

    /// Parses a config directive such as `noise uniform 0.2` or
    /// `attack 0.4 state 0.2 1.0`.
    pub fn parse(line: &str) -> Result<Self> {
        let tok: Vec<&str> = line.split_whitespace().collect();
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("`{s}` is not a number")))
        };
        let malformed = || Error::InvalidParameter(format!("malformed disturbance `{line}`"));
        match tok.as_slice() {
            ["noise", "uniform", a] => Self::uniform(num(a)?),
            ["noise", "gaussian", s] => Self::gaussian(num(s)?),
            ["attack", p, "state", c, cap] => Self::state_attack(num(p)?, num(c)?, num(cap)?),
            ["attack", p, "constant", bias @ ..] if !bias.is_empty() => {
                let b = bias.iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?;
                Self::constant_attack(num(p)?, b)
            }
            _ => Err(malformed()),
        }
    }
}

impl fmt::Display for DisturbanceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ZeroMeanNoise(NoiseLaw::UniformSym { half_width }) => {
                write!(f, "noise uniform {half_width}")
            }
            Self::ZeroMeanNoise(NoiseLaw::GaussianIso { sigma }) => {
                write!(f, "noise gaussian {sigma}")
            }
            Self::SparseAttack(AttackLaw { p, value }) => match value {
                AttackValue::StateDependent { center, cap } => {
                    write!(f, "attack {p} state {center} {cap}")
                }
                AttackValue::ConstantBias(b) => {
                    write!(f, "attack {p} constant")?;
                    for v in b {
                        write!(f, " {v}")?;
                    }
                    Ok(())
                }
            },
        }
    }
}

/// Draws `(w_t, attacked)` given the current state.
///
/// Under an attack law the Bernoulli flag is drawn first and the attack
/// values second, from the same stream. A non-attacked step consumes exactly
/// one draw and yields the exact zero vector.
pub fn draw_disturbance(spec: &DisturbanceSpec, x_t: &[f64], rng: &mut RngStream) -> (Vec<f64>, bool) {
    let n = x_t.len();
    match spec {
        DisturbanceSpec::ZeroMeanNoise(NoiseLaw::UniformSym { half_width }) => {
            let w = (0..n).map(|_| rng.uniform(-half_width, *half_width)).collect();
            (w, false)
        }
        DisturbanceSpec::ZeroMeanNoise(NoiseLaw::GaussianIso { sigma }) => {
            let w = (0..n).map(|_| sigma * rng.standard_normal()).collect();
            (w, false)
        }
        DisturbanceSpec::SparseAttack(AttackLaw { p, value }) => {
            if !rng.bernoulli(*p) {
                return (vec![0.0; n], false);
            }
            let w = match value {
                AttackValue::StateDependent { center, cap } => {
                    let r = norm2(x_t).min(*cap);
                    (0..n).map(|_| rng.uniform(center - r, center + r)).collect()
                }
                AttackValue::ConstantBias(b) => b.clone(),
            };
            (w, true)
        }
    }
}
