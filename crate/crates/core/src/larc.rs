//! Lie Algebra Rank Condition.
//!
//! Two routes to the same question, "do the brackets of A and B span sl(d,ℝ)?":
//!
//! * [`larc_algorithm1`] grows a list `C = {A, B, [A,B], …}` by bracketing a
//!   pivot element `C_k` with earlier elements `C_j`, walking `j` downwards and
//!   backtracking the pivot when no bracket enlarges the span.
//! * [`bracket_closure_dim`] saturates the span under all pairwise brackets
//!   and is used as ground truth.
//!
//! Linear independence is always decided by [`rank_tol`] on the matrix whose
//! rows are the vectorised elements, each scaled to unit Frobenius norm so
//! that deep nested brackets do not drown earlier ones.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{bracket, is_traceless, rank_tol, Matrix, TRACE_TOL};

/// Default pivot threshold for independence tests.
pub const LARC_EPS: f64 = 1e-9;

/// Ordered generating list of the incremental bracket search.
#[derive(Clone, Debug)]
pub struct BracketBasis {
    generators: Vec<Matrix>,
    dim_target: usize,
    eps: f64,
}

impl BracketBasis {
    pub fn new(dim_target: usize, eps: f64) -> Self {
        BracketBasis {
            generators: Vec::new(),
            dim_target,
            eps,
        }
    }

    pub fn generators(&self) -> &[Matrix] {
        &self.generators
    }

    pub fn dim_target(&self) -> usize {
        self.dim_target
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    /// Would `candidate` keep the list linearly independent?
    pub fn extends(&self, candidate: &Matrix) -> bool {
        independent(self.generators.iter().chain(std::iter::once(candidate)), self.eps)
    }

    pub fn is_independent(&self) -> bool {
        independent(self.generators.iter(), self.eps)
    }

    fn push(&mut self, m: Matrix) {
        self.generators.push(m);
    }
}

fn independent<'a>(elements: impl Iterator<Item = &'a Matrix>, eps: f64) -> bool {
    let rows: Vec<&Matrix> = elements.collect();
    if rows.is_empty() {
        return true;
    }
    let width = rows[0].len();
    let mut stacked = Matrix::zeros(rows.len(), width);
    for (r, m) in rows.iter().enumerate() {
        let n = m.norm();
        if n == 0.0 {
            return false;
        }
        // nalgebra stores column-major; any fixed vectorisation works.
        for (c, v) in m.iter().enumerate() {
            stacked[(r, c)] = v / n;
        }
    }
    rank_tol(&stacked, eps) == rows.len()
}

/// How the removal branch of the incremental bracket search is read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm1Reading {
    /// Line-by-line transcription: the trial index only walks down to 3 and
    /// `j = 3` alone triggers removal of `C_k` from the list.
    Literal,
    /// Removal fires when the downward walk ends on a dependent trial; the
    /// removed element stops being the pivot but stays in the span. A new
    /// element always becomes the next pivot.
    Pivot,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Algorithm1Run {
    pub reading: Algorithm1Reading,
    pub result: bool,
    /// Size of the generating list when the run stopped.
    pub final_len: usize,
    pub iterations: usize,
}

fn check_pair(a: &Matrix, b: &Matrix) -> Result<()> {
    if !a.is_square() || a.shape() != b.shape() {
        return Err(Error::arg(format!(
            "A and B must be square of equal shape, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Incremental bracket search in the [`Algorithm1Reading::Pivot`] reading; `dim_target` is
/// `d² − 1` for sl(d,ℝ).
pub fn larc_algorithm1(a: &Matrix, b: &Matrix, dim_target: usize) -> Result<bool> {
    larc_algorithm1_run(a, b, dim_target, Algorithm1Reading::Pivot, LARC_EPS).map(|r| r.result)
}

pub fn larc_algorithm1_run(
    a: &Matrix,
    b: &Matrix,
    dim_target: usize,
    reading: Algorithm1Reading,
    eps: f64,
) -> Result<Algorithm1Run> {
    check_pair(a, b)?;
    if !is_traceless(a, TRACE_TOL) || !is_traceless(b, TRACE_TOL) {
        return Err(Error::arg("the bracket search expects traceless A and B (elements of sl(d,R))"));
    }
    if dim_target < 3 {
        return Err(Error::arg("dim_target must be at least 3"));
    }
    let mut basis = BracketBasis::new(dim_target, eps);
    basis.push(a.clone());
    basis.push(b.clone());
    basis.push(bracket(a, b)?);
    if !basis.is_independent() {
        return Ok(Algorithm1Run {
            reading,
            result: false,
            final_len: 3,
            iterations: 0,
        });
    }
    match reading {
        Algorithm1Reading::Literal => Ok(run_literal(basis)),
        Algorithm1Reading::Pivot => Ok(run_pivot(basis)),
    }
}

// 1-based helpers so the loops read like the pseudocode.
fn nth(basis: &BracketBasis, i: usize) -> &Matrix {
    &basis.generators[i - 1]
}

fn run_literal(mut basis: BracketBasis) -> Algorithm1Run {
    let dim = basis.dim_target;
    let mut k = 3;
    let mut iterations = 0;
    // The literal loop can revisit the same state forever; cap it.
    let cap = 16 * dim * dim;
    while k <= dim {
        iterations += 1;
        if iterations > cap {
            break;
        }
        let mut j = k - 1;
        let mut trial = bracket(nth(&basis, j), nth(&basis, k)).unwrap();
        while !basis.extends(&trial) && j > 3 {
            j -= 1;
            trial = bracket(nth(&basis, j), nth(&basis, k)).unwrap();
        }
        if j == 3 {
            basis.generators.remove(k - 1);
            k -= 1;
        } else {
            basis.push(trial);
            k += 1;
        }
        if k == 3 {
            return Algorithm1Run {
                reading: Algorithm1Reading::Literal,
                result: false,
                final_len: basis.len(),
                iterations,
            };
        }
    }
    Algorithm1Run {
        reading: Algorithm1Reading::Literal,
        result: k > dim,
        final_len: basis.len(),
        iterations,
    }
}

fn run_pivot(mut basis: BracketBasis) -> Algorithm1Run {
    let dim = basis.dim_target;
    let mut k = 3;
    let mut iterations = 0;
    while basis.len() < dim {
        iterations += 1;
        let mut j = k - 1;
        let mut found = None;
        while j >= 1 {
            let trial = bracket(nth(&basis, j), nth(&basis, k)).unwrap();
            if basis.extends(&trial) {
                found = Some(trial);
                break;
            }
            j -= 1;
        }
        match found {
            Some(trial) => {
                basis.push(trial);
                k = basis.len();
            }
            None => {
                k -= 1;
                if k <= 3 {
                    return Algorithm1Run {
                        reading: Algorithm1Reading::Pivot,
                        result: false,
                        final_len: basis.len(),
                        iterations,
                    };
                }
            }
        }
    }
    Algorithm1Run {
        reading: Algorithm1Reading::Pivot,
        result: true,
        final_len: basis.len(),
        iterations,
    }
}

/// Dimension of the smallest bracket-closed subspace containing `A` and `B`.
pub fn bracket_closure_dim(a: &Matrix, b: &Matrix) -> Result<usize> {
    bracket_closure_dim_eps(a, b, LARC_EPS)
}

pub fn bracket_closure_dim_eps(a: &Matrix, b: &Matrix, eps: f64) -> Result<usize> {
    check_pair(a, b)?;
    let mut span = BracketBasis::new(a.len(), eps);
    for g in [a, b] {
        if span.extends(g) {
            span.push(g.clone());
        }
    }
    // Every pair (i, j) with i < j is bracketed once; new elements are
    // appended and eventually paired with everything before them.
    let mut hi = 1;
    while hi < span.len() {
        for lo in 0..hi {
            let c = bracket(&span.generators[lo], &span.generators[hi])?;
            if span.extends(&c) {
                span.push(c);
            }
        }
        hi += 1;
    }
    Ok(span.len())
}
