//! Cone oracles: distance by nonnegative least squares, the induced norm
//! `||x||_A` by linear programming, and estimates of `mu_A`.

use nalgebra::{DMatrix, DVector};
use num_rational::BigRational;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::simplex::{min_weight_representation, rational, LpOutcome};
use super::{Cone, PointSet};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, rng_from_seed, Vector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeProjection {
    pub distance: f64,
    /// Nonnegative generator coefficients of the closest point found.
    pub coefficients: Vec<f64>,
    /// `distance` minus the certified lower bound.
    pub gap: f64,
    pub iterations: usize,
}

fn least_squares(columns: &[&[f64]], b: &[f64]) -> Option<Vec<f64>> {
    let a = DMatrix::from_fn(b.len(), columns.len(), |i, j| columns[j][i]);
    let rhs = DVector::from_column_slice(b);
    a.svd(true, true).solve(&rhs, 1e-13).ok().map(|s| s.iter().copied().collect())
}

fn residual(gens: &[&[f64]], coef: &[f64], b: &[f64]) -> Vec<f64> {
    let mut r = b.to_vec();
    for (g, &c) in gens.iter().zip(coef) {
        if c != 0.0 {
            for (ri, gi) in r.iter_mut().zip(g.iter()) {
                *ri -= c * gi;
            }
        }
    }
    r
}

/// Distance from `b` to `cone(generators)` by the Lawson–Hanson active-set
/// method.
///
/// At termination the residual `r = b - Aθ` satisfies `Aᵀr <= 0` up to
/// rounding, so `<b, r> / ||r||` is a lower bound on the distance; the
/// result is accepted when it is within `tol` of `||r||`.
pub fn dist_to_cone(b: &Vector, cone: &Cone, tol: f64) -> Result<ConeProjection> {
    cone.generators.check_dim(b.dim())?;
    if !(tol > 0.0) {
        return Err(Error::OutOfRange(format!("tol = {tol} must be positive")));
    }
    let gens: Vec<&[f64]> = cone.generators.iter().map(|g| g.as_slice()).collect();
    let b = b.as_slice();
    let n = gens.len();
    let scale = gens.iter().map(|g| norm(g)).fold(0.0, f64::max) * norm(b).max(1.0);
    let stationarity = 1e-12 * scale.max(1.0);
    let max_iter = 30 * n.max(1) + 100;

    let mut x = vec![0.0; n];
    let mut passive = vec![false; n];
    let mut iterations = 0;
    let mut stalled = false;

    loop {
        let r = residual(&gens, &x, b);
        let w: Vec<f64> = gens.iter().map(|g| dot(g, &r)).collect();
        let entering = (0..n)
            .filter(|&j| !passive[j] && w[j] > stationarity)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = entering else { break };
        if iterations >= max_iter {
            stalled = true;
            break;
        }
        iterations += 1;
        passive[j] = true;

        loop {
            let idx: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
            let cols: Vec<&[f64]> = idx.iter().map(|&i| gens[i]).collect();
            let Some(sol) = least_squares(&cols, b) else {
                stalled = true;
                break;
            };
            if sol.iter().all(|&s| s > 0.0) {
                x.iter_mut().for_each(|v| *v = 0.0);
                for (&i, &s) in idx.iter().zip(&sol) {
                    x[i] = s;
                }
                break;
            }
            let alpha = idx
                .iter()
                .zip(&sol)
                .filter(|(_, &s)| s <= 0.0)
                .map(|(&i, &s)| x[i] / (x[i] - s))
                .fold(1.0, f64::min);
            for (&i, &s) in idx.iter().zip(&sol) {
                x[i] += alpha * (s - x[i]);
            }
            let mut removed = false;
            for &i in &idx {
                if x[i] <= 1e-15 * scale.max(1.0) {
                    x[i] = 0.0;
                    passive[i] = false;
                    removed = true;
                }
            }
            if !removed {
                // alpha came from a coefficient that rounding left positive
                let worst = idx
                    .iter()
                    .zip(&sol)
                    .filter(|(_, &s)| s <= 0.0)
                    .map(|(&i, _)| i)
                    .min_by(|&a, &c| x[a].total_cmp(&x[c]))
                    .expect("a nonpositive coefficient exists");
                x[worst] = 0.0;
                passive[worst] = false;
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
        if stalled {
            break;
        }
    }

    let r = residual(&gens, &x, b);
    let distance = norm(&r);
    let lower = if distance > 0.0 { (dot(b, &r) / distance).max(0.0) } else { 0.0 };
    let gap = (distance - lower).max(0.0);
    if stalled || gap > tol {
        return Err(Error::NonConvergence {
            solver: "nonnegative least squares",
            iterations,
            best_distance: distance,
            gap,
            best_weights: x,
        });
    }
    Ok(ConeProjection { distance, coefficients: x, gap, iterations })
}

/// `||x||_A = min { sum θ : θ >= 0, x = Σ θ_i a_i }` in floating point.
pub fn induced_norm(x: &Vector, generators: &PointSet, tol: f64) -> Result<f64> {
    generators.check_dim(x.dim())?;
    let cols: Vec<Vec<f64>> = generators.iter().map(|g| g.as_slice().to_vec()).collect();
    match min_weight_representation(&cols, x.as_slice()) {
        LpOutcome::Optimal { value, theta } => {
            let rep = residual(&cols.iter().map(Vec::as_slice).collect::<Vec<_>>(), &theta, x.as_slice());
            if norm(&rep) > tol.max(1e-9 * x.norm()) {
                return Err(Error::NotInCone);
            }
            Ok(value)
        }
        LpOutcome::Infeasible(_) => Err(Error::NotInCone),
    }
}

/// Exact induced norm over rationals.
pub fn induced_norm_exact(x: &[BigRational], generators: &[Vec<BigRational>]) -> Result<BigRational> {
    if generators.is_empty() {
        return Err(Error::Empty("generator list"));
    }
    if let Some(g) = generators.iter().find(|g| g.len() != x.len()) {
        return Err(Error::DimensionMismatch { expected: x.len(), found: g.len() });
    }
    match min_weight_representation(generators, x) {
        LpOutcome::Optimal { value, .. } => Ok(value),
        LpOutcome::Infeasible(_) => Err(Error::NotInCone),
    }
}

/// Exact induced norm of floating-point data, each `f64` read as the
/// rational it represents.
pub fn induced_norm_rational(x: &Vector, generators: &PointSet) -> Result<BigRational> {
    generators.check_dim(x.dim())?;
    let xr: Vec<BigRational> = x.as_slice().iter().map(|&v| rational(v)).collect();
    let gr: Vec<Vec<BigRational>> =
        generators.iter().map(|g| g.as_slice().iter().map(|&v| rational(v)).collect()).collect();
    induced_norm_exact(&xr, &gr)
}

/// Sampling lower bound on `mu_A = max { ||x||_A : x in cone(A), ||x|| <= 1 }`.
///
/// Draws `samples` random nonnegative combinations from one seeded stream,
/// normalises each and keeps the running maximum of the induced norm. The
/// value never exceeds `mu_A`; a longer run with the same seed never gives a
/// smaller value.
pub fn mu_a_estimate(generators: &PointSet, samples: usize, seed: u64) -> Result<f64> {
    let n = generators.len();
    let dim = generators.dim();
    let mut rng = rng_from_seed(seed);
    let mut best: f64 = 0.0;
    for g in generators.iter() {
        let gn = g.norm();
        if gn > 0.0 {
            if let Ok(v) = induced_norm(&g.scaled(1.0 / gn), generators, 1e-9) {
                best = best.max(v);
            }
        }
    }
    for _ in 0..samples {
        let mut x = vec![0.0; dim];
        for g in generators.iter() {
            let w: f64 = rng.random();
            for (xi, gi) in x.iter_mut().zip(g.as_slice()) {
                *xi += w * gi;
            }
        }
        let xn = norm(&x);
        if !(xn > 1e-12) || n == 0 {
            continue;
        }
        x.iter_mut().for_each(|v| *v /= xn);
        if let Ok(v) = induced_norm(&Vector::new(x)?, generators, 1e-9) {
            best = best.max(v);
        }
    }
    Ok(best)
}

/// `mu_A` in closed form for unit generators when one is known: a single
/// generator (1), two generators at angle φ (`1/cos(φ/2)`, or 1 when they
/// are opposite), and pairwise orthogonal generators (`sqrt(n)`).
pub fn mu_a_closed_form(generators: &PointSet) -> Option<f64> {
    let g = generators.points();
    const ORTHO: f64 = 1e-12;
    match g.len() {
        1 => Some(1.0),
        2 => {
            let c = g[0].dot(&g[1]).clamp(-1.0, 1.0);
            if c <= -1.0 + 1e-12 {
                Some(1.0)
            } else {
                Some(1.0 / ((1.0 + c) / 2.0).sqrt())
            }
        }
        n => {
            let orthogonal =
                (0..n).all(|i| (i + 1..n).all(|j| g[i].dot(&g[j]).abs() <= ORTHO));
            orthogonal.then(|| (n as f64).sqrt())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn ps(rows: Vec<Vec<f64>>) -> PointSet {
        PointSet::from_rows(rows).unwrap()
    }

    fn v(x: &[f64]) -> Vector {
        Vector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn orthogonal_generator() {
        let k = Cone::new(ps(vec![vec![1.0, 0.0]]));
        let res = dist_to_cone(&v(&[0.0, 1.0]), &k, 1e-9).unwrap();
        assert!((res.distance - 1.0).abs() < 1e-12);
        assert_eq!(res.coefficients, vec![0.0]);
    }

    #[test]
    fn inside_cone() {
        let k = Cone::new(ps(vec![vec![1.0, 0.0], vec![0.0, 1.0]]));
        let res = dist_to_cone(&v(&[1.0, 1.0]), &k, 1e-9).unwrap();
        assert!(res.distance < 1e-12);
        assert!((res.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((res.coefficients[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negative_orthant_projects_to_origin() {
        let k = Cone::new(ps(vec![vec![1.0, 0.0], vec![0.0, 1.0]]));
        let res = dist_to_cone(&v(&[-3.0, -4.0]), &k, 1e-9).unwrap();
        assert!((res.distance - 5.0).abs() < 1e-12);
    }

    #[test]
    fn induced_norm_examples() {
        let a = ps(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!((induced_norm(&v(&[2.0, 3.0]), &a, 1e-9).unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(induced_norm(&v(&[0.0, 0.0]), &a, 1e-9).unwrap(), 0.0);
        let b = ps(vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]]);
        assert!((induced_norm(&v(&[1.0, 1.0]), &b, 1e-9).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(
            induced_norm_rational(&v(&[1.0, 1.0]), &b).unwrap(),
            BigRational::from_integer(BigInt::from(1))
        );
    }

    #[test]
    fn induced_norm_outside_cone() {
        let a = ps(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(induced_norm(&v(&[-1.0, 1.0]), &a, 1e-9), Err(Error::NotInCone));
    }

    #[test]
    fn mu_estimate_orthogonal_pair() {
        let a = ps(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let est = mu_a_estimate(&a, 2000, 5).unwrap();
        let mu = 2f64.sqrt();
        assert!(est <= mu + 1e-9);
        assert!(est > mu - 1e-3, "estimate {est}");
        assert!((mu_a_closed_form(&a).unwrap() - mu).abs() < 1e-15);
    }

    #[test]
    fn mu_single_generator() {
        let a = ps(vec![vec![1.0, 0.0]]);
        assert_eq!(mu_a_estimate(&a, 10, 1).unwrap(), 1.0);
        assert_eq!(mu_a_closed_form(&a), Some(1.0));
    }

    #[test]
    fn mu_estimate_monotone_in_samples() {
        let a = ps(vec![vec![1.0, 0.0, 0.0], vec![0.6, 0.8, 0.0], vec![0.0, 0.6, 0.8]]);
        let mut prev = 0.0;
        for s in [1, 5, 20, 100, 400] {
            let e = mu_a_estimate(&a, s, 9).unwrap();
            assert!(e >= prev);
            prev = e;
        }
    }
}
