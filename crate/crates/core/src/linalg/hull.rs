//! Origin-in-convex-hull decision with self-checking certificates.
//!
//! Uses Wolfe's minimum-norm-point method: the nearest point `x` of
//! `conv{w_i}` to the origin either has `‖x‖ ≤ eps` (the convex weights are
//! the certificate) or satisfies `x·w_i ≥ ‖x‖²` for every generator, so
//! `λ = x/‖x‖²` separates the hull from the origin with `λ·w_i ≥ 1`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default distance under which the origin counts as inside the hull.
pub const HULL_EPS: f64 = 1e-7;
/// Minimum value of `λ·w_i` a separating witness has to reach.
pub const HULL_MARGIN: f64 = 1e-9;

const OPTIMALITY_GAP: f64 = 1e-12;
const WEIGHT_FLOOR: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HullResult {
    pub inside: bool,
    /// Convex weights, one per input point (present iff `inside`).
    pub coefficients: Option<Vec<f64>>,
    /// Separating functional (present iff not `inside`).
    pub witness: Option<Vec<f64>>,
    /// Distance from the origin to the computed nearest hull point.
    pub distance: f64,
}

impl HullResult {
    /// Re-check the certificate against `points`.
    pub fn verify(&self, points: &[DVector<f64>], eps: f64, margin: f64) -> bool {
        match (self.inside, &self.coefficients, &self.witness) {
            (true, Some(c), None) => {
                c.len() == points.len() && check_convex_combination(points, c, eps)
            }
            (false, None, Some(w)) => {
                let w = DVector::from_column_slice(w);
                points
                    .iter()
                    .all(|p| p.len() == w.len() && w.dot(p) >= margin)
            }
            _ => false,
        }
    }
}

/// Weights non-negative, summing to one, and `‖Σ c_i p_i‖ ≤ eps`.
pub(crate) fn check_convex_combination(points: &[DVector<f64>], coeffs: &[f64], eps: f64) -> bool {
    if coeffs.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return false;
    }
    let total: f64 = coeffs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return false;
    }
    let dim = match points.first() {
        Some(p) => p.len(),
        None => return false,
    };
    let mut acc = DVector::zeros(dim);
    for (p, &c) in points.iter().zip(coeffs) {
        if c != 0.0 {
            acc.axpy(c, p, 1.0);
        }
    }
    acc.norm() <= eps
}

/// Decide whether the origin lies in `conv(points)` up to distance `eps`.
pub fn origin_in_hull(points: &[DVector<f64>], eps: f64) -> Result<HullResult> {
    let first = points
        .first()
        .ok_or_else(|| Error::arg("origin_in_hull: empty point list"))?;
    let dim = first.len();
    if dim == 0 || points.iter().any(|p| p.len() != dim) {
        return Err(Error::arg("origin_in_hull: points must share a positive dimension"));
    }
    if points.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
        return Err(Error::arg("origin_in_hull: non-finite coordinate"));
    }
    if !(eps > 0.0) {
        return Err(Error::arg("origin_in_hull: eps must be positive"));
    }

    let start = (0..points.len())
        .min_by(|&a, &b| points[a].norm_squared().total_cmp(&points[b].norm_squared()))
        .unwrap();
    let mut support = vec![start];
    let mut weights = vec![1.0];
    let mut x = points[start].clone();

    let max_major = 50 * (points.len() + dim) + 100;
    for _ in 0..max_major {
        if x.norm() <= eps {
            break;
        }
        let xx = x.norm_squared();
        let (j, best) = points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, x.dot(p)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if xx - best <= OPTIMALITY_GAP * xx || support.contains(&j) {
            break;
        }
        support.push(j);
        weights.push(0.0);

        // Minor cycle: move towards the affine minimiser of the support while
        // keeping weights non-negative, dropping points that hit zero.
        for _ in 0..=support.len() + 1 {
            let alpha = affine_min_norm(points, &support);
            if alpha.iter().all(|&a| a > WEIGHT_FLOOR) {
                weights = alpha;
                break;
            }
            let theta = weights
                .iter()
                .zip(&alpha)
                .filter(|(_, &a)| a <= WEIGHT_FLOOR)
                .map(|(&w, &a)| if w - a > 0.0 { w / (w - a) } else { 0.0 })
                .fold(1.0_f64, f64::min)
                .clamp(0.0, 1.0);
            for (w, a) in weights.iter_mut().zip(&alpha) {
                *w = (1.0 - theta) * *w + theta * a;
            }
            let mut kept_support = Vec::with_capacity(support.len());
            let mut kept_weights = Vec::with_capacity(support.len());
            // Drop at least the smallest weight so the cycle always shrinks.
            let smallest = weights
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap();
            for (i, (&s, &w)) in support.iter().zip(&weights).enumerate() {
                if w > WEIGHT_FLOOR && i != smallest {
                    kept_support.push(s);
                    kept_weights.push(w);
                }
            }
            if kept_support.is_empty() {
                kept_support.push(support[smallest]);
                kept_weights.push(1.0);
            }
            let total: f64 = kept_weights.iter().sum();
            kept_weights.iter_mut().for_each(|w| *w /= total);
            support = kept_support;
            weights = kept_weights;
        }
        x = combine(points, &support, &weights, dim);
    }

    let distance = x.norm();
    if distance <= eps {
        let mut coefficients = vec![0.0; points.len()];
        for (&s, &w) in support.iter().zip(&weights) {
            coefficients[s] += w.max(0.0);
        }
        let total: f64 = coefficients.iter().sum();
        coefficients.iter_mut().for_each(|c| *c /= total);
        return Ok(HullResult {
            inside: true,
            coefficients: Some(coefficients),
            witness: None,
            distance,
        });
    }
    let witness = &x / x.norm_squared();
    let worst = points
        .iter()
        .map(|p| witness.dot(p))
        .fold(f64::INFINITY, f64::min);
    if worst < HULL_MARGIN {
        return Err(Error::Numerical(format!(
            "origin_in_hull stalled at distance {distance:.3e} with witness margin {worst:.3e}"
        )));
    }
    Ok(HullResult {
        inside: false,
        coefficients: None,
        witness: Some(witness.iter().copied().collect()),
        distance,
    })
}

fn combine(points: &[DVector<f64>], support: &[usize], weights: &[f64], dim: usize) -> DVector<f64> {
    let mut x = DVector::zeros(dim);
    for (&s, &w) in support.iter().zip(weights) {
        x.axpy(w, &points[s], 1.0);
    }
    x
}

/// Weights of the point of minimal norm in the affine hull of the support.
fn affine_min_norm(points: &[DVector<f64>], support: &[usize]) -> Vec<f64> {
    let s = support.len();
    let mut kkt = DMatrix::zeros(s + 1, s + 1);
    for a in 0..s {
        for b in 0..s {
            kkt[(a, b)] = points[support[a]].dot(&points[support[b]]);
        }
        kkt[(a, s)] = 1.0;
        kkt[(s, a)] = 1.0;
    }
    let mut rhs = DVector::zeros(s + 1);
    rhs[s] = 1.0;
    let solution = kkt
        .clone()
        .lu()
        .solve(&rhs)
        .filter(|sol| sol.iter().all(|v| v.is_finite()))
        .or_else(|| kkt.svd(true, true).solve(&rhs, 1e-13).ok())
        .unwrap_or_else(|| {
            let mut uniform = DVector::from_element(s + 1, 1.0 / s as f64);
            uniform[s] = 0.0;
            uniform
        });
    let mut alpha: Vec<f64> = solution.iter().take(s).copied().collect();
    let total: f64 = alpha.iter().sum();
    if total.abs() > f64::EPSILON {
        alpha.iter_mut().for_each(|a| *a /= total);
    }
    alpha
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(raw: &[&[f64]]) -> Vec<DVector<f64>> {
        raw.iter().map(|p| DVector::from_column_slice(p)).collect()
    }

    #[test]
    fn two_axes_are_separated_by_all_ones() {
        let p = pts(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let r = origin_in_hull(&p, HULL_EPS).unwrap();
        assert!(!r.inside);
        let w = r.witness.as_ref().unwrap();
        assert!((w[0] - 1.0).abs() < 1e-12 && (w[1] - 1.0).abs() < 1e-12);
        assert!(r.verify(&p, HULL_EPS, HULL_MARGIN));
    }

    #[test]
    fn antipodal_pair_is_inside_with_half_weights() {
        let p = pts(&[&[1.0, 0.0], &[-1.0, 0.0]]);
        let r = origin_in_hull(&p, HULL_EPS).unwrap();
        assert!(r.inside);
        let c = r.coefficients.as_ref().unwrap();
        assert!((c[0] - 0.5).abs() < 1e-12 && (c[1] - 0.5).abs() < 1e-12);
        assert!(r.verify(&p, HULL_EPS, HULL_MARGIN));
    }

    #[test]
    fn surrounding_triangle_is_inside() {
        let p = pts(&[&[1.0, 0.0], &[-1.0, 1.0], &[-1.0, -1.0]]);
        let r = origin_in_hull(&p, HULL_EPS).unwrap();
        assert!(r.inside);
        assert!(r.verify(&p, HULL_EPS, HULL_MARGIN));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(origin_in_hull(&[], HULL_EPS), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn single_point_is_outside() {
        let p = pts(&[&[0.0, 0.0, 2.0]]);
        let r = origin_in_hull(&p, HULL_EPS).unwrap();
        assert!(!r.inside);
        assert!(r.verify(&p, HULL_EPS, HULL_MARGIN));
    }

    #[test]
    fn duplicated_points_do_not_break_the_solver() {
        let p = pts(&[&[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], &[0.0, 1.0], &[-1.0, -1.0]]);
        let r = origin_in_hull(&p, HULL_EPS).unwrap();
        assert!(r.inside);
        assert!(r.verify(&p, HULL_EPS, HULL_MARGIN));
    }
}
