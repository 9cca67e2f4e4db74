//! Pointedness of sampled orbit cones and the certificates refuting it.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::orbit::{orbit_directions, search_seeds, OrbitCloud, Provenance, Seed, MAX_DIRECTION_ERROR};
use super::sampling::Budget;
use super::system::SystemSpec;
use crate::error::{Error, Result};
use crate::exterior::{alignment, MultiIndexTable};
use crate::linalg::{origin_in_hull, HULL_EPS, HULL_MARGIN};

/// Two directions count as antipodal when their alignment is at most `−1 + δ`.
pub const ANTIPODAL_DELTA: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HullTerm {
    pub provenance: Provenance,
    pub weight: f64,
}

/// Why the cone generated by an orbit contains a line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum NonPointedEvidence {
    /// Two orbit directions that are (numerically) opposite.
    LinePair {
        first: Provenance,
        second: Provenance,
        alignment: f64,
    },
    /// A convex combination of orbit directions that vanishes.
    Hull { support: Vec<HullTerm>, residual: f64 },
}

/// Evidence that the closed cone spanned by an orbit in ∧^k ℝ^d is not pointed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonPointedCertificate {
    pub k: usize,
    pub seed: Seed,
    pub evidence: NonPointedEvidence,
}

impl NonPointedCertificate {
    /// True for a line pair whose first member is the seed itself.
    pub fn negates_seed(&self) -> bool {
        matches!(&self.evidence, NonPointedEvidence::LinePair { first, .. }
            if first.refine.is_none() && first.word.is_identity())
    }

    /// Recompute every direction from the system and recheck the evidence.
    pub fn verify(&self, spec: &SystemSpec) -> Result<()> {
        if self.k == 0 || self.k >= spec.d {
            return Err(Error::Certificate(format!("degree {} out of range", self.k)));
        }
        let table = MultiIndexTable::shared(spec.d, self.k)?;
        let seed_error = self.seed.verify(spec, &table)?;
        let seed = self.seed.vector();
        let direction = |p: &Provenance| -> Result<DVector<f64>> {
            p.check(spec).map_err(|e| Error::Certificate(format!("word rejected: {e}")))?;
            let (v, err) = p.direction(spec, &table, &seed, seed_error)?;
            if !(err <= MAX_DIRECTION_ERROR) {
                return Err(Error::Certificate(format!("direction error estimate {err:e} is too large")));
            }
            Ok(v)
        };
        match &self.evidence {
            NonPointedEvidence::LinePair { first, second, .. } => {
                let c = alignment(&direction(first)?, &direction(second)?);
                if c > -1.0 + ANTIPODAL_DELTA {
                    return Err(Error::Certificate(format!("line pair has alignment {c}, not antipodal")));
                }
            }
            NonPointedEvidence::Hull { support, .. } => {
                if support.is_empty() {
                    return Err(Error::Certificate("empty hull support".into()));
                }
                let total: f64 = support.iter().map(|t| t.weight).sum();
                if support.iter().any(|t| !(t.weight >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                    return Err(Error::Certificate("hull weights are not convex".into()));
                }
                let mut acc = DVector::zeros(table.len());
                for term in support {
                    acc.axpy(term.weight, &direction(&term.provenance)?, 1.0);
                }
                if acc.norm() > HULL_EPS {
                    return Err(Error::Certificate(format!(
                        "hull combination has residual {:e}",
                        acc.norm()
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum Pointedness {
    /// `λ·w ≥ margin` for every direction of the cloud.
    Pointed { witness: Vec<f64> },
    NonPointed(NonPointedCertificate),
}

impl Pointedness {
    /// Recheck against the cloud the result was computed from.
    pub fn verify(&self, cloud: &OrbitCloud) -> bool {
        let points = cloud.vectors();
        match self {
            Pointedness::Pointed { witness } => {
                let w = DVector::from_column_slice(witness);
                points.iter().all(|p| p.len() == w.len() && w.dot(p) >= HULL_MARGIN)
            }
            Pointedness::NonPointed(cert) => match &cert.evidence {
                NonPointedEvidence::LinePair { first, second, .. } => {
                    let find = |p: &Provenance| cloud.provenance.iter().position(|q| q == p);
                    match (find(first), find(second)) {
                        (Some(i), Some(j)) => alignment(&points[i], &points[j]) <= -1.0 + ANTIPODAL_DELTA,
                        _ => false,
                    }
                }
                NonPointedEvidence::Hull { support, .. } => {
                    let mut acc = DVector::zeros(points[0].len());
                    for t in support {
                        match cloud.provenance.iter().position(|q| *q == t.provenance) {
                            Some(i) => acc.axpy(t.weight, &points[i], 1.0),
                            None => return false,
                        }
                    }
                    acc.norm() <= HULL_EPS
                }
            },
        }
    }
}

/// Is the cone spanned by the cloud pointed?
///
/// Antipodal pairs are looked for first, in lexicographic order of their
/// indices; otherwise the origin is tested against the convex hull of the
/// directions with tolerance `eps`.
pub fn pointedness(cloud: &OrbitCloud, eps: f64) -> Result<Pointedness> {
    if cloud.is_empty() {
        return Err(Error::arg("pointedness of an empty cloud"));
    }
    if cloud.provenance.len() != cloud.len() {
        return Err(Error::arg("cloud provenance does not match its directions"));
    }
    let points = cloud.vectors();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let c = alignment(&points[i], &points[j]);
            if c <= -1.0 + ANTIPODAL_DELTA {
                return Ok(Pointedness::NonPointed(NonPointedCertificate {
                    k: cloud.k,
                    seed: cloud.seed.clone(),
                    evidence: NonPointedEvidence::LinePair {
                        first: cloud.provenance[i].clone(),
                        second: cloud.provenance[j].clone(),
                        alignment: c,
                    },
                }));
            }
        }
    }
    let hull = origin_in_hull(&points, eps)?;
    if hull.inside {
        let coeffs = hull.coefficients.unwrap_or_default();
        let support: Vec<HullTerm> = coeffs
            .iter()
            .zip(&cloud.provenance)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, p)| HullTerm {
                provenance: p.clone(),
                weight: *w,
            })
            .collect();
        Ok(Pointedness::NonPointed(NonPointedCertificate {
            k: cloud.k,
            seed: cloud.seed.clone(),
            evidence: NonPointedEvidence::Hull {
                support,
                residual: hull.distance,
            },
        }))
    } else {
        Ok(Pointedness::Pointed {
            witness: hull.witness.unwrap_or_default(),
        })
    }
}

/// Look for a verified non-pointedness certificate at degree `k`.
///
/// Seeds are searched in parallel; the certificate of the lowest-numbered
/// seed wins. `None` only means nothing was found within `budget`.
pub fn nonpointedness_search(spec: &SystemSpec, k: usize, budget: &Budget) -> Result<Option<NonPointedCertificate>> {
    spec.validate()?;
    budget.validate()?;
    if k == 0 || k >= spec.d {
        return Err(Error::arg(format!("degree must lie in 1..{}, got {k}", spec.d)));
    }
    let seeds = search_seeds(spec, k, budget)?;
    let found = seeds
        .par_iter()
        .enumerate()
        .map(|(i, seed)| -> Result<Option<NonPointedCertificate>> {
            let cloud = orbit_directions(spec, k, seed, budget, i as u64)?;
            if cloud.is_empty() {
                return Ok(None);
            }
            match pointedness(&cloud, HULL_EPS)? {
                Pointedness::NonPointed(cert) => Ok(cert.verify(spec).is_ok().then_some(cert)),
                Pointedness::Pointed { .. } => Ok(None),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(found.into_iter().flatten().next())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{ControlModel, SemigroupWord};

    fn cloud(points: &[&[f64]]) -> OrbitCloud {
        let n = points[0].len();
        OrbitCloud {
            k: 1,
            seed: Seed {
                coords: vec![1.0; n],
                source: super::super::orbit::SeedSource::Given,
                error: 0.0,
            },
            directions: points.iter().map(|p| p.to_vec()).collect(),
            provenance: (0..points.len())
                .map(|i| {
                    Provenance::plain(
                        SemigroupWord::new(vec![super::super::Letter::Flow { t: i as f64, u: 0.0 }]).unwrap(),
                    )
                })
                .collect(),
            dropped: 0,
        }
    }

    #[test]
    fn two_basis_vectors_are_pointed() {
        let c = cloud(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let p = pointedness(&c, HULL_EPS).unwrap();
        assert!(matches!(p, Pointedness::Pointed { .. }));
        assert!(p.verify(&c));
    }

    #[test]
    fn opposite_vectors_give_a_line_pair() {
        let c = cloud(&[&[0.6, 0.8], &[-0.6, -0.8]]);
        let p = pointedness(&c, HULL_EPS).unwrap();
        match &p {
            Pointedness::NonPointed(cert) => {
                assert!(matches!(cert.evidence, NonPointedEvidence::LinePair { .. }));
            }
            _ => panic!("expected a certificate"),
        }
        assert!(p.verify(&c));
    }

    #[test]
    fn balanced_triangle_gives_hull_evidence() {
        let s = 3f64.sqrt() / 2.0;
        let c = cloud(&[&[1.0, 0.0], &[-0.5, s], &[-0.5, -s]]);
        let p = pointedness(&c, HULL_EPS).unwrap();
        match &p {
            Pointedness::NonPointed(cert) => match &cert.evidence {
                NonPointedEvidence::Hull { support, .. } => assert_eq!(support.len(), 3),
                _ => panic!("expected hull evidence"),
            },
            _ => panic!("expected a certificate"),
        }
        assert!(p.verify(&c));
    }

    #[test]
    fn search_rejects_bad_degrees() {
        let a = crate::linalg::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let spec = SystemSpec::new(a.clone(), a, ControlModel::Unbounded, 1).unwrap();
        assert!(nonpointedness_search(&spec, 0, &Budget::default()).is_err());
        assert!(nonpointedness_search(&spec, 2, &Budget::default()).is_err());
    }

    #[test]
    fn rotation_line_pair_at_degree_one() {
        // A rotation generator turns every direction into its negative.
        let a = crate::linalg::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let spec = SystemSpec::new(a, crate::linalg::Matrix::zeros(2, 2), ControlModel::Unbounded, 1).unwrap();
        let cert = nonpointedness_search(&spec, 1, &Budget::default()).unwrap().unwrap();
        cert.verify(&spec).unwrap();
    }
}
