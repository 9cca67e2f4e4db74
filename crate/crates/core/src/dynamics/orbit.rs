//! The semigroup acting on ∧^k ℝ^d: attractors and orbit clouds.
//!
//! Words are applied to exterior vectors letter by letter. A letter
//! `e^{X}` with a large exponent is split into `m` equal substeps whose
//! compound is applied `m` times with renormalisation in between, so that
//! directions contracted by a long flow keep their relative accuracy.
//!
//! Alongside each direction a first-order estimate of its error is carried:
//! a tangent vector is pushed through the same substeps, and every step
//! multiplies the error by the tangent's growth relative to the direction
//! before adding one rounding unit. The estimate is only meaningful while
//! it stays small, so its largest value along the way is what counts.
//! Directions that depend on digits the computation does not have are
//! dropped from clouds.

use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sampling::{canonical_attractor_words, sample_word, special_words, stream_rng, Budget};
use super::system::{SemigroupWord, SystemSpec};
use crate::error::{Error, Result};
use crate::exterior::{alignment, compound_matrix_in, ExteriorVector, MultiIndex, MultiIndexTable};
use crate::linalg::{mat_exp, norm1, Matrix};

/// Largest 1-norm of a single substep exponent.
pub const MAX_STEP_NORM: f64 = 2.0;
/// Iterates smaller than this before renormalisation are treated as lost.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;
/// Successive attractor iterates must agree to this alignment.
pub const ATTRACTOR_CONVERGENCE: f64 = 1e-12;
/// Cloud directions whose error estimate exceeds this are discarded.
pub const MAX_DIRECTION_ERROR: f64 = 1e-7;
/// Attractor seeds closer than this in alignment are duplicates.
const SEED_DUPLICATE: f64 = 1e-9;

// Stream tags keep the random words of different purposes apart.
const TAG_CLOUD: u64 = 1;
const TAG_ATTRACTOR: u64 = 2;

/// Scale `v` to unit length and return its former norm.
fn renormalize(v: &mut DVector<f64>) -> Result<f64> {
    let n = v.norm();
    if !n.is_finite() {
        return Err(Error::Numerical("exterior iterate is not finite".into()));
    }
    if n < UNDERFLOW_FLOOR {
        return Err(Error::Underflow(format!("exterior iterate collapsed to norm {n:e}")));
    }
    *v /= n;
    Ok(n)
}

struct StepAction {
    step: Matrix,
    reps: usize,
}

/// Rounding error committed by one substep on a vector of length `n`.
fn step_rounding(n: usize) -> f64 {
    (n as f64 + 2.0) * f64::EPSILON
}

/// Running first-order error estimate of a unit direction.
pub(crate) struct ErrorTrack {
    tangent: DVector<f64>,
    error: f64,
    peak: f64,
}

impl ErrorTrack {
    /// Start tracking the unit vector `v`, already known to within `error`.
    pub(crate) fn new(v: &DVector<f64>, error: f64) -> Self {
        let mut tangent = generic_start(v.len());
        let along = tangent.dot(v);
        tangent.axpy(-along, v, 1.0);
        let n = tangent.norm();
        if n > 0.0 {
            tangent /= n;
        }
        ErrorTrack {
            tangent,
            error,
            peak: error,
        }
    }

    /// Largest error estimate seen so far.
    pub(crate) fn peak(&self) -> f64 {
        self.peak
    }

    /// Account for one substep `step` that has just mapped the previous unit
    /// direction onto `growth · next`, with `next` unit.
    fn advance(&mut self, step: &Matrix, next: &DVector<f64>, growth: f64, rounding: f64) {
        let mut w = step * &self.tangent;
        let along = w.dot(next);
        w.axpy(-along, next, 1.0);
        let wn = w.norm();
        self.error = self.error * wn / growth + rounding;
        self.peak = self.peak.max(self.error);
        if wn > 0.0 {
            self.tangent = w / wn;
        }
    }
}

/// Compounds of the substeps of a word, ready to act on ∧^k ℝ^d.
pub(crate) struct WordAction {
    steps: Vec<StepAction>,
}

impl WordAction {
    pub(crate) fn new(spec: &SystemSpec, table: &Arc<MultiIndexTable>, word: &SemigroupWord) -> Result<Self> {
        let steps = word
            .letters
            .iter()
            .map(|letter| {
                let x = letter.exponent(spec);
                let reps = ((norm1(&x) / MAX_STEP_NORM).ceil() as usize).max(1);
                let g = mat_exp(&(x / reps as f64), f64::EPSILON)?;
                Ok(StepAction {
                    step: compound_matrix_in(table, &g).into_entries(),
                    reps,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(WordAction { steps })
    }

    /// Replace `v` by the unit direction of `word · v`.
    pub(crate) fn apply(&self, v: &mut DVector<f64>) -> Result<()> {
        renormalize(v)?;
        for s in &self.steps {
            for _ in 0..s.reps {
                *v = &s.step * &*v;
                renormalize(v)?;
            }
        }
        Ok(())
    }

    /// As [`WordAction::apply`] on a unit `v`, updating its error estimate.
    pub(crate) fn apply_tracked(&self, v: &mut DVector<f64>, track: &mut ErrorTrack) -> Result<()> {
        let rounding = step_rounding(v.len());
        for s in &self.steps {
            for _ in 0..s.reps {
                *v = &s.step * &*v;
                let growth = renormalize(v)?;
                track.advance(&s.step, v, growth, rounding);
            }
        }
        Ok(())
    }
}

/// Power iteration of `compound(h, k)` from `v0`, renormalised every step.
pub fn attractor_direction(h: &Matrix, k: usize, v0: &ExteriorVector, iters: u32) -> Result<ExteriorVector> {
    let table = v0.table().clone();
    if !h.is_square() || h.nrows() != table.d() || k != table.k() {
        return Err(Error::arg(format!(
            "h is {}x{} but the seed lives in the degree-{} power of R^{}",
            h.nrows(),
            h.ncols(),
            table.k(),
            table.d()
        )));
    }
    if !(v0.norm() > 0.0) {
        return Err(Error::arg("attractor iteration needs a nonzero start vector"));
    }
    let c = compound_matrix_in(&table, h).into_entries();
    let mut w = v0.coords().clone();
    renormalize(&mut w)?;
    for _ in 0..iters {
        w = &c * &w;
        renormalize(&mut w)?;
    }
    ExteriorVector::new(table, w)
}

/// Deterministic start vector with no zero or repeated coordinates.
pub(crate) fn generic_start(n: usize) -> DVector<f64> {
    const PHI: f64 = 0.618_033_988_749_894_9;
    DVector::from_fn(n, |i, _| 0.5 + ((i as f64 + 1.0) * PHI).fract())
}

/// Attractor of the word's action with an estimate of its error, or `None`
/// when `iters` iterations from the generic start have not settled.
pub(crate) fn word_attractor(
    spec: &SystemSpec,
    table: &Arc<MultiIndexTable>,
    word: &SemigroupWord,
    iters: u32,
) -> Result<Option<(DVector<f64>, f64)>> {
    let action = WordAction::new(spec, table, word)?;
    let mut v = generic_start(table.len());
    let mut prev = v.clone();
    let (mut change, mut last_change) = (f64::INFINITY, f64::INFINITY);
    for _ in 0..iters {
        prev.copy_from(&v);
        action.apply(&mut v)?;
        last_change = change;
        change = (&v - &prev).norm();
    }
    if iters == 0 || alignment(&v, &prev) < 1.0 - ATTRACTOR_CONVERGENCE {
        return Ok(None);
    }
    // Geometric tail of the remaining iterations, contraction capped at 0.9.
    let ratio = if last_change > 0.0 { (change / last_change).min(0.9) } else { 0.0 };
    let error = change / (1.0 - ratio) + step_rounding(v.len());
    Ok(Some((v, error)))
}

/// Where a search seed comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SeedSource {
    /// Attractor of a semigroup element: every invariant cone with interior
    /// contains it up to sign.
    Attractor { word: SemigroupWord, iters: u32 },
    /// A basis vector `e_I`; a heuristic starting point.
    Basis { index: MultiIndex },
    /// Supplied by the caller.
    Given,
}

/// A decomposable starting direction of an orbit cloud.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Seed {
    pub coords: Vec<f64>,
    pub source: SeedSource,
    /// Estimated distance of `coords` from the exact seed direction.
    #[serde(default)]
    pub error: f64,
}

impl Seed {
    pub fn given(v: &ExteriorVector) -> Result<Self> {
        let v = v.normalized()?;
        Ok(Seed {
            coords: v.coords().iter().copied().collect(),
            source: SeedSource::Given,
            error: 0.0,
        })
    }

    pub fn basis(table: &MultiIndexTable, pos: usize) -> Self {
        let mut coords = vec![0.0; table.len()];
        coords[pos] = 1.0;
        Seed {
            coords,
            source: SeedSource::Basis {
                index: table.list()[pos].clone(),
            },
            error: 0.0,
        }
    }

    pub fn vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.coords)
    }

    /// Recompute the seed from the system, compare with the stored
    /// coordinates and return the recomputed error estimate.
    pub fn verify(&self, spec: &SystemSpec, table: &Arc<MultiIndexTable>) -> Result<f64> {
        if self.coords.len() != table.len() {
            return Err(Error::Certificate(format!(
                "seed has {} coordinates, expected {}",
                self.coords.len(),
                table.len()
            )));
        }
        let (expected, error) = match &self.source {
            SeedSource::Given => {
                if !(self.error >= 0.0) {
                    return Err(Error::Certificate("given seed has an invalid error estimate".into()));
                }
                return Ok(self.error);
            }
            SeedSource::Basis { index } => {
                let pos = table
                    .position(index)
                    .ok_or_else(|| Error::Certificate(format!("seed index {index} not in table")))?;
                let mut e = DVector::zeros(table.len());
                e[pos] = 1.0;
                (e, 0.0)
            }
            SeedSource::Attractor { word, iters } => {
                word.check(spec).map_err(|e| Error::Certificate(format!("seed word: {e}")))?;
                word_attractor(spec, table, word, *iters)?
                    .ok_or_else(|| Error::Certificate("seed attractor does not converge".into()))?
            }
        };
        if alignment(&expected, &self.vector()) < 1.0 - SEED_DUPLICATE {
            return Err(Error::Certificate("seed does not match its recomputation".into()));
        }
        Ok(error)
    }
}

/// Search seeds at degree `k`: converged attractors first (at most half the
/// budget), then basis vectors in lexicographic order, then further attractors.
/// Attractors known less accurately than [`MAX_DIRECTION_ERROR`] are skipped.
pub fn search_seeds(spec: &SystemSpec, k: usize, budget: &Budget) -> Result<Vec<Seed>> {
    let table = MultiIndexTable::shared(spec.d, k)?;
    let mut candidates = canonical_attractor_words(spec);
    for attempt in 0..(4 * budget.seeds) as u64 {
        let mut rng = stream_rng(spec.rng_seed, &[TAG_ATTRACTOR, k as u64, attempt]);
        candidates.push(sample_word(spec, budget, 2, &mut rng));
    }
    let attractors = candidates
        .par_iter()
        .map(|word| word_attractor(spec, &table, word, budget.attractor_iters))
        .collect::<Result<Vec<_>>>()?;

    let mut found: Vec<Seed> = Vec::new();
    for (word, v) in candidates.iter().zip(attractors) {
        let Some((v, error)) = v.filter(|(_, error)| *error <= MAX_DIRECTION_ERROR) else {
            continue;
        };
        if found.iter().any(|s| alignment(&s.vector(), &v).abs() >= 1.0 - SEED_DUPLICATE) {
            continue;
        }
        found.push(Seed {
            coords: v.iter().copied().collect(),
            source: SeedSource::Attractor {
                word: word.clone(),
                iters: budget.attractor_iters,
            },
            error,
        });
    }

    let first = found.len().min(budget.seeds.div_ceil(2));
    let mut rest = found.split_off(first);
    let mut seeds = found;
    for pos in 0..table.len() {
        if seeds.len() >= budget.seeds {
            break;
        }
        seeds.push(Seed::basis(&table, pos));
    }
    while seeds.len() < budget.seeds && !rest.is_empty() {
        seeds.push(rest.remove(0));
    }
    Ok(seeds)
}

/// Attractor refinement `h^iters` applied after the main word.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub word: SemigroupWord,
    pub iters: u32,
}

/// How a cloud direction was produced from the seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub word: SemigroupWord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine: Option<Refinement>,
}

impl Provenance {
    pub fn plain(word: SemigroupWord) -> Self {
        Provenance { word, refine: None }
    }

    pub fn check(&self, spec: &SystemSpec) -> Result<()> {
        self.word.check(spec)?;
        if let Some(r) = &self.refine {
            r.word.check(spec)?;
        }
        Ok(())
    }

    /// Unit direction of the element this provenance denotes applied to
    /// `seed`, with the peak error estimate when the seed is off by `seed_error`.
    pub fn direction(
        &self,
        spec: &SystemSpec,
        table: &Arc<MultiIndexTable>,
        seed: &DVector<f64>,
        seed_error: f64,
    ) -> Result<(DVector<f64>, f64)> {
        let mut v = seed.clone();
        renormalize(&mut v)?;
        let mut track = ErrorTrack::new(&v, seed_error);
        WordAction::new(spec, table, &self.word)?.apply_tracked(&mut v, &mut track)?;
        if let Some(r) = &self.refine {
            let h = WordAction::new(spec, table, &r.word)?;
            for _ in 0..r.iters {
                h.apply_tracked(&mut v, &mut track)?;
            }
        }
        Ok((v, track.peak()))
    }

    /// The matrix of the whole element (word, then refinement powers).
    pub fn element(&self, spec: &SystemSpec) -> Result<Matrix> {
        let mut g = self.word.element(spec)?;
        if let Some(r) = &self.refine {
            let h = r.word.element(spec)?;
            for _ in 0..r.iters {
                g = &h * g;
            }
        }
        Ok(g)
    }
}

/// Sampled orbit directions of one seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitCloud {
    pub k: usize,
    pub seed: Seed,
    pub directions: Vec<Vec<f64>>,
    pub provenance: Vec<Provenance>,
    /// Sampled words whose direction was too inaccurate to keep.
    #[serde(default)]
    pub dropped: usize,
}

impl OrbitCloud {
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn vectors(&self) -> Vec<DVector<f64>> {
        self.directions.iter().map(|d| DVector::from_column_slice(d)).collect()
    }
}

/// Words of the cloud of seed number `stream`: the identity, the pure-drift
/// words, then random words, `budget.words_per_seed` in total.
pub(crate) fn cloud_provenance(spec: &SystemSpec, k: usize, stream: u64, budget: &Budget) -> Vec<Provenance> {
    let n = budget.words_per_seed;
    let mut out: Vec<Provenance> = std::iter::once(SemigroupWord::identity())
        .chain(special_words(spec))
        .map(Provenance::plain)
        .take(n)
        .collect();
    let fixed = out.len();
    out.extend((fixed..n).into_par_iter().map(|i| {
        let mut rng = stream_rng(spec.rng_seed, &[TAG_CLOUD, k as u64, stream, i as u64]);
        let word = sample_word(spec, budget, budget.max_word_len, &mut rng);
        let refine = (rng.random::<f64>() < budget.refine_fraction).then(|| Refinement {
            word: sample_word(spec, budget, 2, &mut rng),
            iters: budget.refine_iters,
        });
        Provenance { word, refine }
    }).collect::<Vec<_>>());
    out
}

/// Orbit cloud of `seed` under the system semigroup at degree `k`.
///
/// `stream` selects the random words; clouds with equal streams and seeds
/// are identical. The seed is expected to be decomposable.
pub fn orbit_directions(
    spec: &SystemSpec,
    k: usize,
    seed: &Seed,
    budget: &Budget,
    stream: u64,
) -> Result<OrbitCloud> {
    budget.validate()?;
    let table = MultiIndexTable::shared(spec.d, k)?;
    if seed.coords.len() != table.len() {
        return Err(Error::arg(format!(
            "seed has {} coordinates, degree {k} needs {}",
            seed.coords.len(),
            table.len()
        )));
    }
    let v0 = seed.vector();
    if !(v0.norm() > 0.0) {
        return Err(Error::arg("seed must be nonzero"));
    }
    let computed = cloud_provenance(spec, k, stream, budget)
        .into_par_iter()
        .map(|p| p.direction(spec, &table, &v0, seed.error).map(|(v, err)| (p, v, err)))
        .collect::<Result<Vec<_>>>()?;
    let total = computed.len();
    let (provenance, directions): (Vec<_>, Vec<_>) = computed
        .into_iter()
        .filter(|(_, _, err)| *err <= MAX_DIRECTION_ERROR)
        .map(|(p, v, _)| (p, v.iter().copied().collect::<Vec<f64>>()))
        .unzip();
    Ok(OrbitCloud {
        k,
        seed: seed.clone(),
        dropped: total - directions.len(),
        directions,
        provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ControlModel;
    use crate::exterior::plucker;
    use crate::linalg::from_rows;

    fn diag(v: &[f64]) -> Matrix {
        Matrix::from_diagonal(&DVector::from_column_slice(v))
    }

    fn generic(table: Arc<MultiIndexTable>) -> ExteriorVector {
        let n = table.len();
        ExteriorVector::new(table, generic_start(n)).unwrap()
    }

    #[test]
    fn attractor_of_diagonal_element() {
        let h = diag(&[4.0, 2.0, 0.125]);
        let t1 = MultiIndexTable::shared(3, 1).unwrap();
        let a = attractor_direction(&h, 1, &generic(t1), 100).unwrap();
        assert!((a.coords()[0] - 1.0).abs() < 1e-12);
        let t2 = MultiIndexTable::shared(3, 2).unwrap();
        let a = attractor_direction(&h, 2, &generic(t2), 100).unwrap();
        // e1∧e2 is the first basis vector of the degree-2 power.
        assert!((a.coords()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_eigenvector_is_fixed() {
        let t = MultiIndexTable::shared(3, 1).unwrap();
        let e2 = ExteriorVector::basis(t, 1);
        let a = attractor_direction(&diag(&[2.0, 1.0, 0.5]), 1, &e2, 50).unwrap();
        assert_eq!(a.coords().as_slice(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn attractor_rejects_zero_and_underflow() {
        let t = MultiIndexTable::shared(2, 1).unwrap();
        let zero = ExteriorVector::new(t.clone(), DVector::zeros(2)).unwrap();
        assert!(attractor_direction(&diag(&[2.0, 0.5]), 1, &zero, 3).is_err());
        let e1 = ExteriorVector::basis(t, 0);
        let err = attractor_direction(&Matrix::zeros(2, 2), 1, &e1, 3).unwrap_err();
        assert!(matches!(err, Error::Underflow(_)));
    }

    fn rotation_spec() -> SystemSpec {
        let a = from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        SystemSpec::new(a, diag(&[1.0, -1.0]), ControlModel::Unbounded, 5).unwrap()
    }

    #[test]
    fn single_point_cloud_is_the_seed() {
        let spec = rotation_spec();
        let seed = Seed::given(&plucker(&from_rows(&[vec![3.0], vec![4.0]]).unwrap()).unwrap()).unwrap();
        let budget = Budget {
            words_per_seed: 1,
            ..Budget::default()
        };
        let cloud = orbit_directions(&spec, 1, &seed, &budget, 0).unwrap();
        assert_eq!(cloud.directions, vec![vec![0.6, 0.8]]);
    }

    #[test]
    fn clouds_are_unit_and_deterministic() {
        let spec = rotation_spec();
        let t = MultiIndexTable::shared(2, 1).unwrap();
        let seed = Seed::basis(&t, 0);
        let budget = Budget {
            words_per_seed: 60,
            ..Budget::default()
        };
        let a = orbit_directions(&spec, 1, &seed, &budget, 3).unwrap();
        let b = orbit_directions(&spec, 1, &seed, &budget, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len() + a.dropped, 60);
        assert_eq!(a.provenance.len(), a.len());
        for d in a.vectors() {
            assert!((d.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn long_letters_match_the_matrix_route() {
        let spec = rotation_spec();
        let t = MultiIndexTable::shared(2, 1).unwrap();
        let word = SemigroupWord::new(vec![
            super::super::Letter::Flow { t: 1.7, u: 5.0 },
            super::super::Letter::Control { s: -3.0 },
        ])
        .unwrap();
        let p = Provenance::plain(word);
        let seed = DVector::from_column_slice(&[0.3, -0.9]);
        let (v, err) = p.direction(&spec, &t, &seed, 0.0).unwrap();
        assert!(err < 1e-12, "{err}");
        let w = p.element(&spec).unwrap() * &seed;
        assert!((alignment(&v, &w) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn amplified_residue_is_flagged() {
        // The e1 coordinate is far below the seed's accuracy, yet e^{40B}
        // makes it dominant: the sign of the result is not known.
        let spec = rotation_spec();
        let t = MultiIndexTable::shared(2, 1).unwrap();
        let word = SemigroupWord::new(vec![super::super::Letter::Control { s: 40.0 }]).unwrap();
        let p = Provenance::plain(word);
        let seed = DVector::from_column_slice(&[1e-30, 1.0]);
        let (v, err) = p.direction(&spec, &t, &seed, 1e-15).unwrap();
        assert!(v[0] > 0.99);
        assert!(err > MAX_DIRECTION_ERROR, "{err}");
        // Along the expanding direction the same word is harmless.
        let (v, err) = p.direction(&spec, &t, &DVector::from_column_slice(&[1.0, 1e-30]), 1e-15).unwrap();
        assert!(v[0] == 1.0 && v[1].abs() < 1e-60);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn seeds_start_with_attractors() {
        let spec = rotation_spec();
        let seeds = search_seeds(&spec, 1, &Budget::default()).unwrap();
        assert_eq!(seeds.len(), 8);
        assert!(matches!(seeds[0].source, SeedSource::Attractor { .. }));
        // e^{B} = diag(e, 1/e) has attractor ±e1.
        assert!(seeds[0].coords[0].abs() > 1.0 - 1e-9);
        for s in &seeds {
            s.verify(&spec, &MultiIndexTable::shared(2, 1).unwrap()).unwrap();
        }
    }
}
