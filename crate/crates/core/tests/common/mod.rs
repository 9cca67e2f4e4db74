#![allow(dead_code)]

use std::path::PathBuf;

use conelab::cli::SystemFile;
use conelab::dynamics::SystemSpec;
use conelab::linalg::Matrix;
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn load_spec(name: &str) -> SystemSpec {
    SystemFile::load(&fixture(name)).unwrap().to_spec().unwrap()
}

pub fn example1() -> SystemSpec {
    load_spec("example1.json")
}

pub fn example2() -> SystemSpec {
    load_spec("example2.json")
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

/// Random traceless matrix.
pub fn random_sl<R: Rng>(rng: &mut R, d: usize, scale: f64) -> Matrix {
    let mut m = random_matrix(rng, d, d, scale);
    let shift = m.trace() / d as f64;
    for i in 0..d {
        m[(i, i)] -= shift;
    }
    m
}

/// Relative distance `‖x − y‖ / max(1, ‖y‖)`.
pub fn rel(x: &Matrix, y: &Matrix) -> f64 {
    (x - y).norm() / y.norm().max(1.0)
}

/// Determinant by the Leibniz permutation expansion.
pub fn leibniz_det(m: &Matrix) -> f64 {
    let n = m.nrows();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut total = 0.0;
    permute(&mut perm, 0, m, &mut total);
    total
}

fn permute(perm: &mut Vec<usize>, start: usize, m: &Matrix, total: &mut f64) {
    let n = perm.len();
    if start == n {
        let mut inversions = 0;
        for i in 0..n {
            for j in i + 1..n {
                if perm[i] > perm[j] {
                    inversions += 1;
                }
            }
        }
        let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
        *total += sign * (0..n).map(|i| m[(i, perm[i])]).product::<f64>();
        return;
    }
    for i in start..n {
        perm.swap(start, i);
        permute(perm, start + 1, m, total);
        perm.swap(start, i);
    }
}

/// All k-subsets of 0..d in lexicographic order, by plain recursion.
pub fn subsets(d: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, d: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..d {
            cur.push(i);
            go(i + 1, d, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, d, k, &mut Vec::new(), &mut out);
    out
}

/// Compound matrix with Leibniz minors, independent of the crate's determinant.
pub fn compound_oracle(g: &Matrix, k: usize) -> Matrix {
    let sets = subsets(g.nrows(), k);
    let n = sets.len();
    Matrix::from_fn(n, n, |a, b| {
        let sub = Matrix::from_fn(k, k, |i, j| g[(sets[a][i], sets[b][j])]);
        leibniz_det(&sub)
    })
}

use conelab::dynamics::{sample_control, ControlModel};
use conelab::exterior::additive_compound;
use conelab::orthant::OrthantCertificate;
use nalgebra::DVector;

/// Random system with an invariant orthant in ℝ^d: a sign-conjugated
/// Metzler drift and a diagonal control matrix.
pub fn orthant_system<R: Rng>(rng: &mut R, d: usize) -> (Matrix, Matrix) {
    let signs: Vec<f64> = (0..d).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    let mut a = Matrix::from_fn(d, d, |i, j| {
        if i == j {
            rng.random_range(-2.0..2.0)
        } else if rng.random::<f64>() < 0.3 {
            0.0
        } else {
            signs[i] * signs[j] * rng.random_range(0.0..2.0)
        }
    });
    let shift = a.trace() / d as f64;
    for i in 0..d {
        a[(i, i)] -= shift;
    }
    let mut b = Matrix::from_diagonal(&DVector::from_fn(d, |_, _| rng.random_range(-3.0..3.0)));
    let shift = b.trace() / d as f64;
    for i in 0..d {
        b[(i, i)] -= shift;
    }
    (a, b)
}

/// Worst relative escape `−min σ_i y_i / ‖y‖` of `rays` random rays of the
/// certified orthant under piecewise-constant admissible controls,
/// integrated with classical Runge-Kutta on ∧^k ℝ^d.
pub fn orthant_flow_escape<R: Rng>(
    a: &Matrix,
    b: &Matrix,
    model: &ControlModel,
    cert: &OrthantCertificate,
    rays: usize,
    rng: &mut R,
) -> f64 {
    let k = cert.k;
    let ak = additive_compound(a, k).unwrap().into_entries();
    let bk = additive_compound(b, k).unwrap().into_entries();
    let sigma: Vec<f64> = cert.pattern.signs().iter().map(|s| *s as f64).collect();
    let n = sigma.len();
    let mut worst: f64 = 0.0;
    for _ in 0..rays {
        let mut y = DVector::from_fn(n, |i, _| sigma[i] * rng.random_range(0.0..1.0));
        if rng.random::<f64>() < 0.5 {
            // Rays on the boundary are the delicate ones.
            let zero = rng.random_range(0..n);
            y[zero] = 0.0;
        }
        for _ in 0..4 {
            let u = match model {
                ControlModel::Unbounded => sample_control(model, 0.0, rng),
                _ => sample_control(model, 0.2, rng),
            };
            let m = &ak + &bk * u;
            let t = rng.random_range(0.0..1.0);
            let steps = ((t * (1.0 + m.norm())) / 0.01).ceil().max(1.0) as usize;
            let h = t / steps as f64;
            for _ in 0..steps {
                let k1 = &m * &y;
                let k2 = &m * (&y + &k1 * (h / 2.0));
                let k3 = &m * (&y + &k2 * (h / 2.0));
                let k4 = &m * (&y + &k3 * h);
                y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
                let norm = y.norm();
                y /= norm;
                for i in 0..n {
                    worst = worst.max(-sigma[i] * y[i]);
                }
            }
        }
    }
    worst
}
