//! Coordinates on the exterior powers ∧^k ℝ^d.
//!
//! The basis `e_I = e_{i₁}∧⋯∧e_{i_k}` is indexed by k-subsets `I` of `{1..d}`
//! in lexicographic order. Every sign convention in the crate follows from
//! that order.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use itertools::Itertools;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{det_in_place, rank_tol, Matrix, RANK_EPS};

/// Strictly increasing list of 1-based indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(entries: Vec<usize>, d: usize) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::arg("multi-index must be nonempty"));
        }
        if entries.iter().any(|&i| i == 0 || i > d) {
            return Err(Error::arg(format!("multi-index {entries:?} out of range 1..={d}")));
        }
        if entries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::arg(format!("multi-index {entries:?} not strictly increasing")));
        }
        Ok(MultiIndex(entries))
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// 0-based row/column indices.
    pub fn zero_based(&self) -> Vec<usize> {
        self.0.iter().map(|i| i - 1).collect()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.0.iter().join(","))
    }
}

/// The ordered set of k-subsets of `{1..d}` with position lookup.
#[derive(Clone, Debug)]
pub struct MultiIndexTable {
    d: usize,
    k: usize,
    list: Vec<MultiIndex>,
    positions: HashMap<MultiIndex, usize>,
}

impl PartialEq for MultiIndexTable {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d && self.k == other.k
    }
}

/// All k-subsets of `{1..d}` in lexicographic order.
pub fn multi_index_table(d: usize, k: usize) -> Result<MultiIndexTable> {
    if d < 2 {
        return Err(Error::arg(format!("dimension must be at least 2, got {d}")));
    }
    if k == 0 || k > d {
        return Err(Error::arg(format!("degree must lie in 1..={d}, got {k}")));
    }
    let list: Vec<MultiIndex> = (1..=d).combinations(k).map(MultiIndex).collect();
    let positions = list.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
    Ok(MultiIndexTable { d, k, list, positions })
}

impl MultiIndexTable {
    pub fn shared(d: usize, k: usize) -> Result<Arc<Self>> {
        multi_index_table(d, k).map(Arc::new)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Dimension of ∧^k ℝ^d.
    pub fn len(&self) -> usize {
        self.list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.list.is_empty()
    }

    pub fn list(&self) -> &[MultiIndex] {
        &self.list
    }

    pub fn get(&self, pos: usize) -> Option<&MultiIndex> {
        self.list.get(pos)
    }

    pub fn position(&self, index: &MultiIndex) -> Option<usize> {
        self.positions.get(index).copied()
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// A vector of ∧^k ℝ^d in the lexicographic basis.
#[derive(Clone, Debug)]
pub struct ExteriorVector {
    table: Arc<MultiIndexTable>,
    coords: DVector<f64>,
}

impl ExteriorVector {
    pub fn new(table: Arc<MultiIndexTable>, coords: DVector<f64>) -> Result<Self> {
        if coords.len() != table.len() {
            return Err(Error::arg(format!(
                "exterior vector needs {} coordinates, got {}",
                table.len(),
                coords.len()
            )));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("exterior vector has a non-finite coordinate"));
        }
        Ok(ExteriorVector { table, coords })
    }

    /// The basis element `e_I`.
    pub fn basis(table: Arc<MultiIndexTable>, pos: usize) -> Self {
        let mut coords = DVector::zeros(table.len());
        coords[pos] = 1.0;
        ExteriorVector { table, coords }
    }

    pub fn table(&self) -> &Arc<MultiIndexTable> {
        &self.table
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn into_coords(self) -> DVector<f64> {
        self.coords
    }

    pub fn norm(&self) -> f64 {
        self.coords.norm()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0) {
            return Err(Error::Degenerate("cannot normalize the zero vector".into()));
        }
        Ok(ExteriorVector {
            table: self.table.clone(),
            coords: &self.coords / n,
        })
    }

    /// Cosine of the angle to `other`.
    pub fn alignment(&self, other: &Self) -> f64 {
        alignment(&self.coords, &other.coords)
    }
}

/// Cosine of the angle between two coordinate vectors (0 if either is zero).
pub fn alignment(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let denom = a.norm() * b.norm();
    if denom == 0.0 {
        0.0
    } else {
        a.dot(b) / denom
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompoundKind {
    /// Induced group action `δ(g)(u₁∧⋯∧u_k) = gu₁∧⋯∧gu_k`.
    Multiplicative,
    /// Induced Lie algebra action, the derivative at `t = 0` of `δ(e^{tX})`.
    Additive,
}

/// Matrix of the map induced on ∧^k ℝ^d by a d×d matrix.
#[derive(Clone, Debug)]
pub struct CompoundMatrix {
    table: Arc<MultiIndexTable>,
    entries: Matrix,
    kind: CompoundKind,
}

impl CompoundMatrix {
    pub fn table(&self) -> &Arc<MultiIndexTable> {
        &self.table
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    pub fn into_entries(self) -> Matrix {
        self.entries
    }

    pub fn kind(&self) -> CompoundKind {
        self.kind
    }

    pub fn apply(&self, v: &ExteriorVector) -> Result<ExteriorVector> {
        if **v.table() != *self.table {
            return Err(Error::arg("exterior vector and compound use different tables"));
        }
        Ok(ExteriorVector {
            table: self.table.clone(),
            coords: &self.entries * &v.coords,
        })
    }
}

/// Minor of `m` on the given 0-based rows and columns.
pub fn minor(m: &Matrix, rows: &[usize], cols: &[usize]) -> f64 {
    let k = rows.len();
    debug_assert_eq!(k, cols.len());
    let mut buf = Vec::with_capacity(k * k);
    for &r in rows {
        for &c in cols {
            buf.push(m[(r, c)]);
        }
    }
    det_in_place(&mut buf, k)
}

/// Plücker coordinates of the column span of a rank-k d×k matrix.
pub fn plucker(p: &Matrix) -> Result<ExteriorVector> {
    let (d, k) = p.shape();
    let table = MultiIndexTable::shared(d, k)?;
    plucker_in(&table, p)
}

/// As [`plucker`], reusing an existing table.
pub fn plucker_in(table: &Arc<MultiIndexTable>, p: &Matrix) -> Result<ExteriorVector> {
    let (d, k) = p.shape();
    if d != table.d() || k != table.k() {
        return Err(Error::arg(format!(
            "frame is {d}x{k}, table expects {}x{}",
            table.d(),
            table.k()
        )));
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("frame has a non-finite entry"));
    }
    if rank_tol(p, RANK_EPS) < k {
        return Err(Error::Degenerate(format!("frame of shape {d}x{k} is not of full column rank")));
    }
    let cols: Vec<usize> = (0..k).collect();
    let coords = DVector::from_iterator(
        table.len(),
        table.list().iter().map(|idx| minor(p, &idx.zero_based(), &cols)),
    );
    Ok(ExteriorVector { table: table.clone(), coords })
}

fn check_square(g: &Matrix, k: usize) -> Result<Arc<MultiIndexTable>> {
    if !g.is_square() {
        return Err(Error::arg(format!("expected a square matrix, got {:?}", g.shape())));
    }
    MultiIndexTable::shared(g.nrows(), k)
}

/// k-th multiplicative compound: entry `(I, J)` is the minor of `g` on rows `I`, columns `J`.
pub fn compound_matrix(g: &Matrix, k: usize) -> Result<CompoundMatrix> {
    let table = check_square(g, k)?;
    Ok(compound_matrix_in(&table, g))
}

pub(crate) fn compound_matrix_in(table: &Arc<MultiIndexTable>, g: &Matrix) -> CompoundMatrix {
    let n = table.len();
    let zero_based: Vec<Vec<usize>> = table.list().iter().map(MultiIndex::zero_based).collect();
    let entries = Matrix::from_fn(n, n, |a, b| minor(g, &zero_based[a], &zero_based[b]));
    CompoundMatrix {
        table: table.clone(),
        entries,
        kind: CompoundKind::Multiplicative,
    }
}

/// k-th additive compound, the generator with `compound(e^{tX}) = e^{t·additive(X)}`.
pub fn additive_compound(x: &Matrix, k: usize) -> Result<CompoundMatrix> {
    let table = check_square(x, k)?;
    Ok(additive_compound_in(&table, x))
}

pub(crate) fn additive_compound_in(table: &Arc<MultiIndexTable>, x: &Matrix) -> CompoundMatrix {
    let n = table.len();
    let k = table.k();
    let mut entries = Matrix::zeros(n, n);
    for (a, row_index) in table.list().iter().enumerate() {
        let rows = row_index.zero_based();
        entries[(a, a)] = rows.iter().map(|&i| x[(i, i)]).sum();
        // Replace the element at position p of I by some j ∉ I; the sorted
        // position q of j in the new index fixes the sign (−1)^{p+q}.
        for (p, &i) in rows.iter().enumerate() {
            for j in 0..table.d() {
                if rows.contains(&j) {
                    continue;
                }
                let mut cols: Vec<usize> = rows.iter().copied().filter(|&r| r != i).collect();
                let q = cols.partition_point(|&c| c < j);
                cols.insert(q, j);
                let col_index = MultiIndex(cols.iter().map(|c| c + 1).collect());
                let b = table.position(&col_index).expect("column index in table");
                debug_assert_eq!(cols.len(), k);
                let sign = if (p + q) % 2 == 0 { 1.0 } else { -1.0 };
                entries[(a, b)] = sign * x[(i, j)];
            }
        }
    }
    CompoundMatrix {
        table: table.clone(),
        entries,
        kind: CompoundKind::Additive,
    }
}
