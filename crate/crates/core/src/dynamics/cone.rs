use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exterior::alignment;
use crate::linalg::{origin_in_hull, rank_tol, Matrix, RANK_EPS};

/// Rays closer than this in alignment are merged.
pub const RAY_DUPLICATE: f64 = 1e-9;
/// Radius of the probe ball used to test whether the hull surrounds the origin.
pub const WHOLE_SPACE_PROBE: f64 = 1e-6;

/// Ray generators of a closed convex cone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeGenerators {
    /// Unit vectors, in first-seen order.
    pub rays: Vec<Vec<f64>>,
    /// The rays span the whole space as a cone.
    pub whole_space: bool,
}

/// Closed conic hull of `generators`, given by its deduplicated unit rays.
///
/// The whole-space flag is raised when the rays have full rank and the
/// convex hull of the rays contains every point `±τe_i` for `τ = 1e-6`,
/// i.e. the origin is interior to the hull up to that radius.
pub fn cone_from_convex(generators: &[DVector<f64>]) -> Result<ConeGenerators> {
    let dim = generators
        .first()
        .ok_or_else(|| Error::arg("cone_from_convex: no generators"))?
        .len();
    if generators.iter().any(|g| g.len() != dim) {
        return Err(Error::arg("cone_from_convex: generators differ in length"));
    }
    let mut rays: Vec<DVector<f64>> = Vec::new();
    for g in generators {
        let n = g.norm();
        if !n.is_finite() {
            return Err(Error::arg("cone_from_convex: non-finite generator"));
        }
        if n == 0.0 {
            continue;
        }
        if rays.iter().all(|r| alignment(r, g) < 1.0 - RAY_DUPLICATE) {
            rays.push(g / n);
        }
    }
    if rays.is_empty() {
        return Err(Error::arg("cone_from_convex: all generators are zero"));
    }
    let whole_space = surrounds_origin(&rays)?;
    Ok(ConeGenerators {
        rays: rays.iter().map(|r| r.iter().copied().collect()).collect(),
        whole_space,
    })
}

fn surrounds_origin(rays: &[DVector<f64>]) -> Result<bool> {
    let dim = rays[0].len();
    let stacked = Matrix::from_fn(rays.len(), dim, |i, j| rays[i][j]);
    if rank_tol(&stacked, RANK_EPS) < dim {
        return Ok(false);
    }
    for axis in 0..dim {
        for sign in [1.0, -1.0] {
            // p ∈ conv(rays) iff 0 ∈ conv(rays − p).
            let shifted: Vec<DVector<f64>> = rays
                .iter()
                .map(|r| {
                    let mut s = r.clone();
                    s[axis] -= sign * WHOLE_SPACE_PROBE;
                    s
                })
                .collect();
            if !origin_in_hull(&shifted, WHOLE_SPACE_PROBE * 1e-3)?.inside {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
