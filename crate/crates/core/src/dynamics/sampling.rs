use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution};
use serde::{Deserialize, Serialize};

use super::system::{ControlModel, Letter, SemigroupWord, SystemSpec};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Grid the unbounded control model draws from (besides heavy-tailed draws).
pub const U_GRID: [f64; 11] = [0.0, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0, 5.0, -5.0, 10.0, -10.0];
/// Flow times of the pure-drift words every cloud contains.
pub const SPECIAL_TIMES: [f64; 3] = [PI / 2.0, PI, 2.0 * PI];
const HEAVY_TAIL_SCALE: f64 = 2.0;
const HEAVY_TAIL_CLIP: f64 = 50.0;
/// Control-flow letters `e^{sB}` draw `s` from `±CONTROL_SPAN · t_max`.
const CONTROL_SPAN: f64 = 10.0;

/// Sampling effort for non-pointedness searches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budget {
    /// Seeds per search (attractor seeds first, then basis seeds).
    pub seeds: usize,
    /// Cloud size per seed, counting the seed and the pure-drift words.
    pub words_per_seed: usize,
    pub max_word_len: usize,
    pub t_max: f64,
    /// Share of unbounded control draws taken from a clipped Cauchy law.
    pub heavy_tail_fraction: f64,
    /// Share of letters that are closure elements `e^{sB}` (unbounded control only).
    pub control_letter_fraction: f64,
    /// Share of cloud points pushed towards an attractor before recording.
    pub refine_fraction: f64,
    pub refine_iters: u32,
    pub attractor_iters: u32,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            seeds: 8,
            words_per_seed: 400,
            max_word_len: 6,
            t_max: 2.0,
            heavy_tail_fraction: 0.2,
            control_letter_fraction: 0.15,
            refine_fraction: 0.25,
            refine_iters: 60,
            attractor_iters: 200,
        }
    }
}

impl Budget {
    pub fn validate(&self) -> Result<()> {
        if self.seeds == 0 || self.words_per_seed == 0 || self.max_word_len == 0 {
            return Err(Error::arg("budget counts must be positive"));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::arg("budget t_max must be positive"));
        }
        for (name, f) in [
            ("heavy_tail_fraction", self.heavy_tail_fraction),
            ("control_letter_fraction", self.control_letter_fraction),
            ("refine_fraction", self.refine_fraction),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::arg(format!("budget {name} must lie in [0, 1]")));
            }
        }
        if self.attractor_iters == 0 {
            return Err(Error::arg("budget attractor_iters must be positive"));
        }
        Ok(())
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent deterministic stream for a tuple of tags.
pub fn stream_rng(master: u64, tags: &[u64]) -> ChaCha8Rng {
    let h = tags.iter().fold(splitmix(master), |acc, t| splitmix(acc ^ splitmix(*t)));
    ChaCha8Rng::seed_from_u64(h)
}

pub fn sample_control<R: Rng + ?Sized>(model: &ControlModel, heavy_tail_fraction: f64, rng: &mut R) -> f64 {
    match model {
        ControlModel::Unbounded => {
            if rng.random::<f64>() < heavy_tail_fraction {
                let c = Cauchy::new(0.0, HEAVY_TAIL_SCALE).expect("valid Cauchy scale");
                c.sample(rng).clamp(-HEAVY_TAIL_CLIP, HEAVY_TAIL_CLIP)
            } else {
                U_GRID[rng.random_range(0..U_GRID.len())]
            }
        }
        ControlModel::Set { values } => values[rng.random_range(0..values.len())],
        ControlModel::Interval { lo, hi } => {
            let r = rng.random::<f64>();
            if r < 0.1 || lo == hi {
                *lo
            } else if r < 0.2 {
                *hi
            } else {
                rng.random_range(*lo..=*hi)
            }
        }
    }
}

pub(crate) fn sample_letter<R: Rng + ?Sized>(spec: &SystemSpec, budget: &Budget, rng: &mut R) -> Letter {
    if spec.closure_contains_control_flow() && rng.random::<f64>() < budget.control_letter_fraction {
        let span = CONTROL_SPAN * budget.t_max;
        return Letter::Control {
            s: rng.random_range(-span..=span),
        };
    }
    Letter::Flow {
        t: rng.random_range(0.0..=budget.t_max),
        u: sample_control(&spec.control, budget.heavy_tail_fraction, rng),
    }
}

pub(crate) fn sample_word<R: Rng + ?Sized>(spec: &SystemSpec, budget: &Budget, max_len: usize, rng: &mut R) -> SemigroupWord {
    let len = rng.random_range(1..=max_len.max(1));
    SemigroupWord {
        letters: (0..len).map(|_| sample_letter(spec, budget, rng)).collect(),
    }
}

/// A random semigroup element `e^{t_n(A+u_nB)}⋯e^{t_1(A+u_1B)}` with
/// `t_i ~ U[0, t_max]` and `u_i` drawn from the control model.
pub fn sample_element<R: Rng + ?Sized>(
    spec: &SystemSpec,
    word_len: usize,
    t_max: f64,
    rng: &mut R,
) -> Result<(Matrix, SemigroupWord)> {
    if word_len == 0 {
        return Err(Error::arg("word_len must be at least 1"));
    }
    if !(t_max > 0.0) {
        return Err(Error::arg("t_max must be positive"));
    }
    let heavy = Budget::default().heavy_tail_fraction;
    let letters = (0..word_len)
        .map(|_| Letter::Flow {
            t: rng.random_range(0.0..=t_max),
            u: sample_control(&spec.control, heavy, rng),
        })
        .collect();
    let word = SemigroupWord { letters };
    Ok((word.element(spec)?, word))
}

/// Pure-drift words `e^{tA}` for the special times, when `u = 0` is admissible.
pub(crate) fn special_words(spec: &SystemSpec) -> Vec<SemigroupWord> {
    if !spec.control.admits(0.0) {
        return Vec::new();
    }
    SPECIAL_TIMES
        .iter()
        .map(|&t| SemigroupWord::single(Letter::Flow { t, u: 0.0 }))
        .collect()
}

/// Elements whose attractors seed a search, in a fixed order: the control
/// flows `e^{±B}` (closure elements), the drift `e^{A}`, then one-letter
/// flows at the extreme controls.
pub(crate) fn canonical_attractor_words(spec: &SystemSpec) -> Vec<SemigroupWord> {
    let mut out = Vec::new();
    if spec.closure_contains_control_flow() {
        out.push(SemigroupWord::single(Letter::Control { s: 1.0 }));
        out.push(SemigroupWord::single(Letter::Control { s: -1.0 }));
    }
    if spec.control.admits(0.0) {
        out.push(SemigroupWord::single(Letter::Flow { t: 1.0, u: 0.0 }));
    }
    for u in spec.control.extreme_values() {
        if u != 0.0 {
            out.push(SemigroupWord::single(Letter::Flow { t: 1.0, u }));
        }
    }
    out
}
