//! Distance from a point to the convex hull of finitely many points, by
//! Wolfe's minimum-norm-point algorithm.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Polytope;
use crate::error::{Error, Result};
use crate::linalg::{dot, Vector};

const MAX_MAJOR: usize = 10_000;
/// Weights at or below this are treated as zero when shrinking the corral.
const ZERO_WEIGHT: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolytopeProjection {
    /// Upper end of the certified interval `[distance - gap, distance]`.
    pub distance: f64,
    /// Convex weights over the vertices, in vertex order.
    pub weights: Vec<f64>,
    /// Width of the duality interval at termination.
    pub gap: f64,
    pub iterations: usize,
}

/// Maximum distance from `b` to a vertex of `polytope`.
pub fn max_vertex_dist(b: &Vector, polytope: &Polytope) -> Result<f64> {
    polytope.vertices.check_dim(b.dim())?;
    Ok(polytope.vertices.iter().map(|a| a.dist_sq(b)).fold(0.0, f64::max).sqrt())
}

/// Minimises `||Y alpha||` subject to `sum(alpha) = 1` over the columns in
/// `corral`.
fn affine_minimizer(points: &[Vec<f64>], corral: &[usize]) -> Option<Vec<f64>> {
    let s = corral.len();
    if s == 1 {
        return Some(vec![1.0]);
    }
    let mut kkt = DMatrix::<f64>::zeros(s + 1, s + 1);
    for (i, &pi) in corral.iter().enumerate() {
        for (j, &pj) in corral.iter().enumerate().skip(i) {
            let g = dot(&points[pi], &points[pj]);
            kkt[(i, j)] = g;
            kkt[(j, i)] = g;
        }
        kkt[(i, s)] = 1.0;
        kkt[(s, i)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(s + 1);
    rhs[s] = 1.0;
    let sol = kkt.clone().lu().solve(&rhs).or_else(|| kkt.svd(true, true).solve(&rhs, 1e-14).ok())?;
    let alpha: Vec<f64> = sol.iter().take(s).copied().collect();
    alpha.iter().all(|a| a.is_finite()).then_some(alpha)
}

fn combine(points: &[Vec<f64>], corral: &[usize], weights: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; points[0].len()];
    for (&i, &w) in corral.iter().zip(weights) {
        for (xi, yi) in x.iter_mut().zip(&points[i]) {
            *xi += w * yi;
        }
    }
    x
}

/// Euclidean distance from `b` to `conv(vertices)`, with convex weights of a
/// near-closest point.
///
/// Terminates once `||x|| - min_i <x, a_i - b> / ||x||` is at most `tol`,
/// which brackets the true distance to within `tol`.
pub fn min_norm_point_polytope(b: &Vector, polytope: &Polytope, tol: f64) -> Result<PolytopeProjection> {
    polytope.vertices.check_dim(b.dim())?;
    if !(tol > 0.0) {
        return Err(Error::OutOfRange(format!("tol = {tol} must be positive")));
    }
    let shifted: Vec<Vec<f64>> = polytope.vertices.iter().map(|a| a.sub(b).into_inner()).collect();
    let n = shifted.len();

    let start = (0..n)
        .min_by(|&i, &j| dot(&shifted[i], &shifted[i]).total_cmp(&dot(&shifted[j], &shifted[j])))
        .expect("nonempty polytope");
    let mut corral = vec![start];
    let mut weights = vec![1.0];
    let mut x = shifted[start].clone();
    let mut gap = f64::INFINITY;

    let finish = |corral: &[usize], weights: &[f64], x: &[f64], gap: f64, iterations: usize| {
        let mut full = vec![0.0; n];
        for (&i, &w) in corral.iter().zip(weights) {
            full[i] = w;
        }
        PolytopeProjection { distance: dot(x, x).sqrt(), weights: full, gap, iterations }
    };

    for iteration in 0..MAX_MAJOR {
        let norm_sq = dot(&x, &x);
        let norm = norm_sq.sqrt();
        let (entering, min_dot) = (0..n)
            .map(|i| (i, dot(&x, &shifted[i])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty polytope");
        let lower = if norm > 0.0 { (min_dot / norm).max(0.0) } else { 0.0 };
        gap = norm - lower;
        if gap <= tol {
            return Ok(finish(&corral, &weights, &x, gap, iteration));
        }
        if corral.contains(&entering) {
            // No descent direction left at working precision.
            break;
        }
        corral.push(entering);
        weights.push(0.0);

        while let Some(alpha) = affine_minimizer(&shifted, &corral) {
            if alpha.iter().all(|&a| a > ZERO_WEIGHT) {
                weights = alpha;
                break;
            }
            let theta = weights
                .iter()
                .zip(&alpha)
                .filter(|(_, &a)| a <= ZERO_WEIGHT)
                .map(|(&w, &a)| w / (w - a))
                .fold(1.0, f64::min);
            for (w, a) in weights.iter_mut().zip(&alpha) {
                *w = theta * a + (1.0 - theta) * *w;
            }
            let mut keep = weights.iter().map(|&w| w > ZERO_WEIGHT).collect::<Vec<_>>();
            if keep.iter().all(|&k| k) {
                // theta computed from a weight that rounding kept positive
                let drop = weights
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(i, _)| i)
                    .expect("nonempty corral");
                keep[drop] = false;
            }
            let mut kept = keep.iter();
            corral.retain(|_| *kept.next().unwrap());
            let mut kept = keep.iter();
            weights.retain(|_| *kept.next().unwrap());
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            if corral.len() == 1 {
                weights = vec![1.0];
                break;
            }
        }
        x = combine(&shifted, &corral, &weights);
    }

    let best = finish(&corral, &weights, &x, gap, MAX_MAJOR);
    Err(Error::NonConvergence {
        solver: "min-norm-point",
        iterations: best.iterations,
        best_distance: best.distance,
        gap,
        best_weights: best.weights,
    })
}
