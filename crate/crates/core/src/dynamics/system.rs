use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{is_finite, mat_exp, rows, Matrix, EXP_TOL, TRACE_TOL};

/// Admissible control values `u`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ControlModel {
    /// `u ∈ ℝ`.
    Unbounded,
    /// `u` ranges over a finite set.
    Set { values: Vec<f64> },
    /// `u ∈ [lo, hi]`.
    Interval { lo: f64, hi: f64 },
}

impl ControlModel {
    fn validate(&self) -> Result<()> {
        match self {
            ControlModel::Unbounded => Ok(()),
            ControlModel::Set { values } => {
                if values.is_empty() {
                    return Err(Error::arg("control set must be nonempty"));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::arg("control set has a non-finite value"));
                }
                Ok(())
            }
            ControlModel::Interval { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(Error::arg(format!("bad control interval [{lo}, {hi}]")));
                }
                Ok(())
            }
        }
    }

    /// Closed under `u ↦ −u`.
    pub fn is_symmetric(&self) -> bool {
        match self {
            ControlModel::Unbounded => true,
            ControlModel::Set { values } => values
                .iter()
                .all(|v| values.iter().any(|w| (w + v).abs() <= 1e-12 * (1.0 + v.abs()))),
            ControlModel::Interval { lo, hi } => (lo + hi).abs() <= 1e-12 * (1.0 + hi.abs()),
        }
    }

    pub fn admits(&self, u: f64) -> bool {
        match self {
            ControlModel::Unbounded => u.is_finite(),
            ControlModel::Set { values } => values.iter().any(|v| *v == u),
            ControlModel::Interval { lo, hi } => *lo <= u && u <= *hi,
        }
    }

    /// Extreme control values: the whole set, the interval endpoints, or
    /// nothing for an unbounded model.
    pub fn extreme_values(&self) -> Vec<f64> {
        match self {
            ControlModel::Unbounded => Vec::new(),
            ControlModel::Set { values } => values.clone(),
            ControlModel::Interval { lo, hi } => {
                if lo == hi {
                    vec![*lo]
                } else {
                    vec![*lo, *hi]
                }
            }
        }
    }
}

/// The bilinear system `ẋ = Ax + uBx` together with its control model and RNG seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub d: usize,
    #[serde(with = "rows")]
    pub a: Matrix,
    #[serde(with = "rows")]
    pub b: Matrix,
    pub control: ControlModel,
    pub rng_seed: u64,
}

impl SystemSpec {
    pub fn new(a: Matrix, b: Matrix, control: ControlModel, rng_seed: u64) -> Result<Self> {
        let spec = SystemSpec {
            d: a.nrows(),
            a,
            b,
            control,
            rng_seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.d;
        if d < 2 {
            return Err(Error::arg(format!("dimension must be at least 2, got {d}")));
        }
        for (name, m) in [("A", &self.a), ("B", &self.b)] {
            if m.shape() != (d, d) {
                return Err(Error::arg(format!(
                    "{name} must be {d}x{d}, got {}x{}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if !is_finite(m) {
                return Err(Error::arg(format!("{name} has a non-finite entry")));
            }
            let tr = m.trace();
            if tr.abs() > TRACE_TOL {
                return Err(Error::arg(format!(
                    "{name} must be traceless (in sl(d,R)), trace is {tr:e}"
                )));
            }
        }
        self.control.validate()
    }

    /// `A + uB`.
    pub fn generator(&self, u: f64) -> Matrix {
        &self.a + &self.b * u
    }

    /// With an unbounded control, `e^{sB}` lies in the closure of the
    /// semigroup for every real `s`.
    pub fn closure_contains_control_flow(&self) -> bool {
        matches!(self.control, ControlModel::Unbounded)
    }

    pub fn lie_dim(&self) -> usize {
        self.d * self.d - 1
    }
}

/// System whose semigroup is the inverse semigroup `S⁻¹`.
///
/// `S⁻¹` is generated by `e^{t(−A − uB)}`. With a symmetric control model
/// that is the system `(−A, B)`; otherwise `B` is negated as well and the
/// control model is kept.
pub fn inverse_system(spec: &SystemSpec) -> SystemSpec {
    let b = if spec.control.is_symmetric() {
        spec.b.clone()
    } else {
        -&spec.b
    };
    SystemSpec {
        d: spec.d,
        a: -&spec.a,
        b,
        control: spec.control.clone(),
        rng_seed: spec.rng_seed,
    }
}

/// One factor of a semigroup word.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Letter {
    /// `e^{t(A + uB)}` with `t ≥ 0`.
    Flow { t: f64, u: f64 },
    /// `e^{sB}`, a limit of `e^{t(A+uB)}` with `tu → s`, `t → 0`; only in the
    /// closure of the semigroup and only for unbounded controls.
    Control { s: f64 },
}

impl Letter {
    pub fn exponent(&self, spec: &SystemSpec) -> Matrix {
        match *self {
            Letter::Flow { t, u } => spec.generator(u) * t,
            Letter::Control { s } => &spec.b * s,
        }
    }

    pub fn check(&self, spec: &SystemSpec) -> Result<()> {
        match *self {
            Letter::Flow { t, u } => {
                if !(t >= 0.0 && t.is_finite()) {
                    return Err(Error::arg(format!("flow time must be finite and >= 0, got {t}")));
                }
                if !spec.control.admits(u) {
                    return Err(Error::arg(format!("control value {u} not admitted")));
                }
                Ok(())
            }
            Letter::Control { s } => {
                if !s.is_finite() {
                    return Err(Error::arg("control-flow letter needs a finite s"));
                }
                if !spec.closure_contains_control_flow() {
                    return Err(Error::arg(
                        "control-flow letters need an unbounded control model",
                    ));
                }
                Ok(())
            }
        }
    }
}

/// Product `e^{X_n}⋯e^{X_1}` of its letters; the first letter acts first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemigroupWord {
    pub letters: Vec<Letter>,
}

impl SemigroupWord {
    pub fn new(letters: Vec<Letter>) -> Result<Self> {
        if letters.is_empty() {
            return Err(Error::arg("semigroup word must be nonempty"));
        }
        Ok(SemigroupWord { letters })
    }

    /// The one-letter word `e^{0·A}`, i.e. the identity.
    pub fn identity() -> Self {
        SemigroupWord {
            letters: vec![Letter::Flow { t: 0.0, u: 0.0 }],
        }
    }

    pub fn single(letter: Letter) -> Self {
        SemigroupWord { letters: vec![letter] }
    }

    pub fn check(&self, spec: &SystemSpec) -> Result<()> {
        if self.letters.is_empty() {
            return Err(Error::arg("semigroup word must be nonempty"));
        }
        self.letters.iter().try_for_each(|l| l.check(spec))
    }

    /// The matrix the word denotes.
    pub fn element(&self, spec: &SystemSpec) -> Result<Matrix> {
        let mut g = Matrix::identity(spec.d, spec.d);
        for letter in &self.letters {
            g = mat_exp(&letter.exponent(spec), EXP_TOL)? * g;
        }
        Ok(g)
    }

    pub fn is_identity(&self) -> bool {
        self.letters.iter().all(|l| match *l {
            Letter::Flow { t, .. } => t == 0.0,
            Letter::Control { s } => s == 0.0,
        })
    }
}
