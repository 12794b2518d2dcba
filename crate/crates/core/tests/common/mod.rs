//! Brute-force oracles shared by the integration targets. They use no
//! solver from the library.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

/// Compass search on a grid that shrinks only when no neighbour improves.
/// `f` is minimised over the box `[lo, hi]^dim` after `clamp` maps each
/// candidate into the feasible set.
fn pattern_search(
    dim: usize,
    lo: f64,
    hi: f64,
    coarse: usize,
    clamp: &dyn Fn(&mut [f64]),
    f: &dyn Fn(&[f64]) -> f64,
) -> f64 {
    // coarse full grid
    let mut best_x = vec![lo; dim];
    clamp(&mut best_x);
    let mut best = f(&best_x);
    let step = (hi - lo) / (coarse - 1) as f64;
    let total = coarse.pow(dim as u32);
    let mut x = vec![0.0; dim];
    for idx in 0..total {
        let mut r = idx;
        for xi in x.iter_mut() {
            *xi = lo + step * (r % coarse) as f64;
            r /= coarse;
        }
        clamp(&mut x);
        let v = f(&x);
        if v < best {
            best = v;
            best_x.clone_from(&x);
        }
    }
    // local refinement with a 9-point stencil per axis
    const HALF: i64 = 4;
    let width = (2 * HALF + 1) as usize;
    let mut h = step / 2.0;
    let mut rounds = 0;
    while h > 1e-13 && rounds < 5000 {
        rounds += 1;
        let center = best_x.clone();
        let mut moved = false;
        for idx in 0..width.pow(dim as u32) {
            let mut r = idx;
            for (xi, ci) in x.iter_mut().zip(&center) {
                *xi = (ci + h * ((r % width) as i64 - HALF) as f64).clamp(lo, hi);
                r /= width;
            }
            clamp(&mut x);
            let v = f(&x);
            if v < best {
                best = v;
                best_x.clone_from(&x);
                moved = true;
            }
        }
        if !moved {
            h /= 2.0;
        }
    }
    best
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Distance from `b` to the convex hull of `vertices` by grid search over
/// the weights.
pub fn grid_polytope_distance(b: &[f64], vertices: &[Vec<f64>]) -> f64 {
    let n = vertices.len();
    if n == 1 {
        return dist_sq(b, &vertices[0]).sqrt();
    }
    let point = |w: &[f64]| -> Vec<f64> {
        let last = 1.0 - w.iter().sum::<f64>();
        (0..b.len())
            .map(|r| w.iter().zip(vertices).map(|(wi, v)| wi * v[r]).sum::<f64>() + last * vertices[n - 1][r])
            .collect()
    };
    let clamp = |w: &mut [f64]| {
        for wi in w.iter_mut() {
            *wi = wi.max(0.0);
        }
        let s: f64 = w.iter().sum();
        if s > 1.0 {
            for wi in w.iter_mut() {
                *wi /= s;
            }
        }
    };
    let coarse = match n - 1 {
        1 => 2001,
        2 => 201,
        _ => 41,
    };
    pattern_search(n - 1, 0.0, 1.0, coarse, &clamp, &|w| dist_sq(b, &point(w))).sqrt()
}

/// Distance from `b` to the cone of `generators`, searching coefficients
/// in `[0, bound]`.
pub fn grid_cone_distance(b: &[f64], generators: &[Vec<f64>], bound: f64) -> f64 {
    let n = generators.len();
    let point =
        |c: &[f64]| -> Vec<f64> { (0..b.len()).map(|r| c.iter().zip(generators).map(|(ci, g)| ci * g[r]).sum()).collect() };
    let coarse = match n {
        1 => 2001,
        2 => 201,
        3 => 41,
        _ => 21,
    };
    pattern_search(n, 0.0, bound, coarse, &|_| {}, &|c| dist_sq(b, &point(c))).sqrt()
}

/// Solves `cols * y = x` exactly when the columns are independent and the
/// system is consistent.
fn solve_exact(cols: &[&Vec<BigRational>], x: &[BigRational]) -> Option<Vec<BigRational>> {
    let rows = x.len();
    let k = cols.len();
    let mut m: Vec<Vec<BigRational>> =
        (0..rows).map(|r| cols.iter().map(|c| c[r].clone()).chain([x[r].clone()]).collect()).collect();
    let mut pivot_row = 0;
    let mut pivots = Vec::new();
    for c in 0..k {
        let Some(p) = (pivot_row..rows).find(|&r| !m[r][c].is_zero()) else {
            return None; // dependent columns
        };
        m.swap(pivot_row, p);
        let inv = m[pivot_row][c].clone();
        for v in m[pivot_row].iter_mut() {
            *v = &*v / &inv;
        }
        for r in 0..rows {
            if r != pivot_row && !m[r][c].is_zero() {
                let factor = m[r][c].clone();
                let pivot = m[pivot_row].clone();
                for (e, p) in m[r].iter_mut().zip(&pivot) {
                    *e = &*e - &factor * p;
                }
            }
        }
        pivots.push(pivot_row);
        pivot_row += 1;
    }
    if (pivot_row..rows).any(|r| !m[r][k].is_zero()) {
        return None;
    }
    Some(pivots.iter().map(|&r| m[r][k].clone()).collect())
}

/// Induced norm by enumerating every basic feasible solution of
/// `{y >= 0 : G y = x}`; `None` if `x` is not in the cone.
pub fn induced_norm_bfs(x: &[BigRational], generators: &[Vec<BigRational>]) -> Option<BigRational> {
    if x.iter().all(Zero::is_zero) {
        return Some(BigRational::zero());
    }
    let n = generators.len();
    let mut best: Option<BigRational> = None;
    for mask in 1u32..(1 << n) {
        let cols: Vec<&Vec<BigRational>> = (0..n).filter(|j| mask >> j & 1 == 1).map(|j| &generators[j]).collect();
        if let Some(y) = solve_exact(&cols, x) {
            if y.iter().all(|v| !v.is_negative()) {
                let s: BigRational = y.iter().sum();
                if best.as_ref().is_none_or(|b| s < *b) {
                    best = Some(s);
                }
            }
        }
    }
    best
}

pub fn to_rational(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite")
}

pub fn big(v: i64) -> BigInt {
    BigInt::from(v)
}
