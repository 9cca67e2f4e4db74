//! Invariant orthants through the cross-sign condition on off-diagonal entries.
//!
//! The flow of `X` maps the closed orthant with signs `σ` into itself iff
//! `σ_i σ_j x_ij ≥ 0` for all `i ≠ j`. Every off-diagonal entry therefore pins
//! the relative sign of two coordinates, and the admissible patterns are the
//! solutions of a parity constraint system. Applied to additive compounds this
//! finds orthants of ∧^k ℝ^d left invariant by the whole system semigroup.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlModel, SystemSpec};
use crate::error::{Error, Result};
use crate::exterior::{additive_compound_in, MultiIndexTable};
use crate::linalg::Matrix;

/// Default tolerance for sign tests on compound entries.
pub const ORTHANT_TOL: f64 = 1e-9;
/// Largest side accepted by the searches (C(8,4)).
pub const MAX_SIDE: usize = 70;
/// Side up to which [`invariant_orthants_exhaustive`] may be used.
pub const EXHAUSTIVE_LIMIT: usize = 25;
/// Upper bound on the number of patterns a search may return.
pub const MAX_PATTERNS: usize = 1 << 16;

/// Orthant sign vector, normalised so that the first entry is `+1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct SignPattern(Vec<i8>);

impl SignPattern {
    /// Builds a pattern from ±1 entries, flipping globally if needed.
    pub fn new(mut signs: Vec<i8>) -> Result<Self> {
        if signs.is_empty() || signs.iter().any(|s| *s != 1 && *s != -1) {
            return Err(Error::arg("sign pattern entries must be +1 or -1"));
        }
        if signs[0] == -1 {
            signs.iter_mut().for_each(|s| *s = -*s);
        }
        Ok(SignPattern(signs))
    }

    pub fn all_plus(n: usize) -> Self {
        SignPattern(vec![1; n])
    }

    pub fn signs(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sign(&self, i: usize) -> f64 {
        self.0[i] as f64
    }

    pub fn is_all_plus(&self) -> bool {
        self.0.iter().all(|s| *s == 1)
    }

    /// Lexicographic key with `+` before `−`.
    fn order_key(&self) -> Vec<bool> {
        self.0.iter().map(|s| *s < 0).collect()
    }
}

impl TryFrom<Vec<i8>> for SignPattern {
    type Error = Error;
    fn try_from(v: Vec<i8>) -> Result<Self> {
        let normalized = SignPattern::new(v.clone())?;
        if normalized.0 != v {
            return Err(Error::arg("sign pattern must start with +1"));
        }
        Ok(normalized)
    }
}

impl From<SignPattern> for Vec<i8> {
    fn from(p: SignPattern) -> Self {
        p.0
    }
}

impl fmt::Display for SignPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for s in &self.0 {
            f.write_str(if *s > 0 { "+" } else { "-" })?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossCheck {
    pub holds: bool,
    /// `min σ_i σ_j x_ij` over `i ≠ j` (`+∞` for 1×1 input).
    pub slack: f64,
    /// 0-based position of the minimising entry.
    pub worst: Option<(usize, usize)>,
}

/// Does the flow of `x` keep the closed orthant `sigma` invariant?
pub fn cross_positive(x: &Matrix, sigma: &SignPattern, tol: f64) -> Result<CrossCheck> {
    if !x.is_square() || x.nrows() != sigma.len() {
        return Err(Error::arg(format!(
            "cross_positive: matrix {:?} vs pattern of length {}",
            x.shape(),
            sigma.len()
        )));
    }
    let n = x.nrows();
    let mut slack = f64::INFINITY;
    let mut worst = None;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let v = sigma.sign(i) * sigma.sign(j) * x[(i, j)];
            if v < slack {
                slack = v;
                worst = Some((i, j));
            }
        }
    }
    Ok(CrossCheck {
        holds: slack >= -tol,
        slack,
        worst,
    })
}

/// Why no orthant works: the entry at `pair` demands `σ_iσ_j = required`,
/// while the chain of stronger constraints along `path` forces `implied`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignConflict {
    /// 0-based coordinates.
    pub pair: (usize, usize),
    pub required: i8,
    pub implied: i8,
    /// 0-based vertices from `pair.0` to `pair.1` through accepted constraints.
    pub path: Vec<usize>,
}

impl fmt::Display for SignConflict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (i, j) = (self.pair.0 + 1, self.pair.1 + 1);
        write!(
            f,
            "sigma_{i} sigma_{j} must be {} (entry ({i},{j})) and {} (path {})",
            self.required,
            self.implied,
            self.path.iter().map(|v| (v + 1).to_string()).collect::<Vec<_>>().join("-")
        )
    }
}

struct ParityForest {
    parent: Vec<usize>,
    parity: Vec<i8>,
    adjacency: Vec<Vec<(usize, i8)>>,
}

impl ParityForest {
    fn new(n: usize) -> Self {
        ParityForest {
            parent: (0..n).collect(),
            parity: vec![1; n],
            adjacency: vec![Vec::new(); n],
        }
    }

    /// Root of `v` and `σ_v σ_root`.
    fn find(&mut self, v: usize) -> (usize, i8) {
        let p = self.parent[v];
        if p == v {
            return (v, 1);
        }
        let (root, par) = self.find(p);
        self.parent[v] = root;
        self.parity[v] *= par;
        (root, self.parity[v])
    }

    fn path(&self, from: usize, to: usize) -> Vec<usize> {
        let n = self.adjacency.len();
        let mut prev = vec![usize::MAX; n];
        let mut queue = VecDeque::from([from]);
        prev[from] = from;
        while let Some(v) = queue.pop_front() {
            if v == to {
                break;
            }
            for &(w, _) in &self.adjacency[v] {
                if prev[w] == usize::MAX {
                    prev[w] = v;
                    queue.push_back(w);
                }
            }
        }
        let mut path = vec![to];
        let mut cur = to;
        while cur != from && prev[cur] != usize::MAX {
            cur = prev[cur];
            path.push(cur);
        }
        path.reverse();
        path
    }

    /// Record `σ_i σ_j = s`; returns the implied sign on conflict.
    fn constrain(&mut self, i: usize, j: usize, s: i8) -> Option<i8> {
        let (ri, pi) = self.find(i);
        let (rj, pj) = self.find(j);
        if ri == rj {
            let implied = pi * pj;
            return (implied != s).then_some(implied);
        }
        self.parent[ri] = rj;
        self.parity[ri] = pi * pj * s;
        self.adjacency[i].push((j, s));
        self.adjacency[j].push((i, s));
        None
    }
}

fn check_family(generators: &[&Matrix]) -> Result<usize> {
    let n = generators
        .first()
        .ok_or_else(|| Error::arg("need at least one generator"))?
        .nrows();
    if generators.iter().any(|g| g.shape() != (n, n)) {
        return Err(Error::arg("generators must be square of equal side"));
    }
    if n > MAX_SIDE {
        return Err(Error::Capacity(format!("side {n} exceeds {MAX_SIDE}")));
    }
    Ok(n)
}

/// Solve the sign constraints of a family; constraints are applied strongest
/// first so a conflict is blamed on the weakest entry of the offending cycle.
fn solve_constraints(generators: &[&Matrix], tol: f64) -> Result<std::result::Result<ParityForest, SignConflict>> {
    let n = check_family(generators)?;
    let mut edges: Vec<(f64, usize, usize, i8)> = Vec::new();
    for g in generators {
        for i in 0..n {
            for j in 0..n {
                let v = g[(i, j)];
                if i != j && v.abs() > tol {
                    let (a, b) = if i < j { (i, j) } else { (j, i) };
                    edges.push((v.abs(), a, b, if v > 0.0 { 1 } else { -1 }));
                }
            }
        }
    }
    edges.sort_by(|x, y| y.0.total_cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    let mut forest = ParityForest::new(n);
    for (_, i, j, s) in edges {
        if let Some(implied) = forest.constrain(i, j, s) {
            let path = forest.path(i, j);
            return Ok(Err(SignConflict {
                pair: (i, j),
                required: s,
                implied,
                path,
            }));
        }
    }
    Ok(Ok(forest))
}

/// The sign conflict ruling out every orthant for the family, if any.
pub fn orthant_conflict(generators: &[&Matrix], tol: f64) -> Result<Option<SignConflict>> {
    Ok(solve_constraints(generators, tol)?.err())
}

/// All normalised patterns whose closed orthant is invariant under `x`.
pub fn invariant_orthants(x: &Matrix, tol: f64) -> Result<Vec<SignPattern>> {
    common_invariant_orthants(&[x], tol)
}

/// Patterns invariant under every matrix of the family, in lexicographic order.
pub fn common_invariant_orthants(generators: &[&Matrix], tol: f64) -> Result<Vec<SignPattern>> {
    let mut forest = match solve_constraints(generators, tol)? {
        Ok(f) => f,
        Err(_) => return Ok(Vec::new()),
    };
    let n = forest.parent.len();
    let resolved: Vec<(usize, i8)> = (0..n).map(|v| forest.find(v)).collect();
    let mut roots: Vec<usize> = resolved.iter().map(|r| r.0).collect();
    roots.sort_unstable();
    roots.dedup();
    let free = roots.len() - 1;
    if free >= usize::BITS as usize || (1usize << free) > MAX_PATTERNS {
        return Err(Error::Capacity(format!(
            "{free} independent sign blocks give more than {MAX_PATTERNS} orthants"
        )));
    }
    let root_of_first = resolved[0].0;
    let free_roots: Vec<usize> = roots.iter().copied().filter(|r| *r != root_of_first).collect();
    let mut patterns = Vec::with_capacity(1 << free);
    for mask in 0..(1usize << free) {
        let root_sign = |r: usize| -> i8 {
            if r == root_of_first {
                // σ_0 = +1 fixes the sign of its root.
                resolved[0].1
            } else {
                let bit = free_roots.iter().position(|x| *x == r).unwrap();
                if mask >> bit & 1 == 1 {
                    -1
                } else {
                    1
                }
            }
        };
        let signs: Vec<i8> = resolved.iter().map(|&(r, p)| root_sign(r) * p).collect();
        patterns.push(SignPattern::new(signs)?);
    }
    patterns.sort_by_key(SignPattern::order_key);
    patterns.dedup();
    Ok(patterns)
}

/// Brute-force enumeration of all `2^{n−1}` normalised patterns.
pub fn invariant_orthants_exhaustive(generators: &[&Matrix], tol: f64) -> Result<Vec<SignPattern>> {
    let n = check_family(generators)?;
    if n > EXHAUSTIVE_LIMIT {
        return Err(Error::Capacity(format!(
            "exhaustive orthant search limited to side {EXHAUSTIVE_LIMIT}, got {n}"
        )));
    }
    let mut out = Vec::new();
    for mask in 0..(1usize << (n - 1)) {
        let signs: Vec<i8> = (0..n)
            .map(|i| if i > 0 && mask >> (n - 1 - i) & 1 == 1 { -1 } else { 1 })
            .collect();
        let sigma = SignPattern(signs);
        let mut ok = true;
        for g in generators {
            if !cross_positive(g, &sigma, tol)?.holds {
                ok = false;
                break;
            }
        }
        if ok {
            out.push(sigma);
        }
    }
    out.sort_by_key(SignPattern::order_key);
    Ok(out)
}

/// An orthant of ∧^k ℝ^d left invariant by the system semigroup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrthantCertificate {
    pub k: usize,
    pub pattern: SignPattern,
    /// `min σ_iσ_j m_ij` over the off-diagonal entries of the checked generators.
    pub slack: f64,
}

/// Generators whose flows must all preserve the orthant, or `None` when the
/// control term alone already rules every orthant out.
fn compound_generators(spec: &SystemSpec, k: usize, tol: f64) -> Result<Option<Vec<Matrix>>> {
    let table = MultiIndexTable::shared(spec.d, k)?;
    let a = additive_compound_in(&table, &spec.a).into_entries();
    let b = additive_compound_in(&table, &spec.b).into_entries();
    match &spec.control {
        ControlModel::Unbounded => {
            // σ_iσ_j(a_ij + u b_ij) ≥ 0 for all real u forces b_ij = 0.
            let n = b.nrows();
            let coupled = (0..n).any(|i| (0..n).any(|j| i != j && b[(i, j)].abs() > tol));
            Ok((!coupled).then(|| vec![a]))
        }
        model => Ok(Some(
            model.extreme_values().into_iter().map(|u| &a + &b * u).collect(),
        )),
    }
}

/// Orthants of ∧^k ℝ^d invariant under every `e^{t(A+uB)}` of the system.
pub fn family_invariant_orthants(spec: &SystemSpec, k: usize, tol: f64) -> Result<Vec<OrthantCertificate>> {
    if k == 0 || k >= spec.d {
        return Err(Error::arg(format!("degree must lie in 1..{}, got {k}", spec.d)));
    }
    let generators = match compound_generators(spec, k, tol)? {
        Some(g) => g,
        None => return Ok(Vec::new()),
    };
    let refs: Vec<&Matrix> = generators.iter().collect();
    common_invariant_orthants(&refs, tol)?
        .into_iter()
        .map(|pattern| {
            let slack = refs
                .iter()
                .map(|g| cross_positive(g, &pattern, tol).map(|c| c.slack))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            Ok(OrthantCertificate { k, pattern, slack })
        })
        .collect()
}

impl OrthantCertificate {
    /// Recheck from the system alone.
    pub fn verify(&self, spec: &SystemSpec, tol: f64) -> Result<()> {
        if self.k == 0 || self.k >= spec.d {
            return Err(Error::Certificate(format!("degree {} out of range", self.k)));
        }
        let generators = compound_generators(spec, self.k, tol)?.ok_or_else(|| {
            Error::Certificate("control compound couples coordinates; no orthant can be invariant".into())
        })?;
        for g in &generators {
            if g.nrows() != self.pattern.len() {
                return Err(Error::Certificate("pattern length does not match C(d,k)".into()));
            }
            let check = cross_positive(g, &self.pattern, tol)?;
            if !check.holds {
                return Err(Error::Certificate(format!(
                    "pattern {} fails the cross-sign test with slack {:e}",
                    self.pattern, check.slack
                )));
            }
        }
        Ok(())
    }
}
