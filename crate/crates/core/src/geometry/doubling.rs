//! Doubling constants of finite point sets and the halving ball cover.
//!
//! All ball tests compare squared distances, so a half-radius ball of a
//! ball whose radius is the distance `|p - q|` contains `x` iff
//! `4 |x - c|² <= |p - q|²`.

use serde::{Deserialize, Serialize};

use super::set_cover::{greedy_set_cover, min_set_cover};
use super::PointSet;
use crate::error::{Error, Result};
use crate::linalg::{dist_sq, Vector};

/// Largest set accepted by [`doubling_constant_exact`].
pub const EXACT_DOUBLING_CAP: usize = 24;

/// Largest ball membership solved exactly inside [`ball_cover`].
const EXACT_COVER_LIMIT: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DoublingMode {
    Exact,
    Greedy,
}

fn squared_distances(set: &PointSet) -> Vec<Vec<f64>> {
    let pts = set.points();
    pts.iter().map(|a| pts.iter().map(|b| a.dist_sq(b)).collect()).collect()
}

/// Runs `cover_size` on every (center, radius) subproblem and returns the
/// largest answer. Radii range over the distances from the center to the
/// other points: between two consecutive such distances the ball is fixed
/// while the half-radius balls only grow, so the left endpoint is the
/// worst case.
fn worst_subproblem(set: &PointSet, mut cover_size: impl FnMut(&[usize], &[Vec<usize>]) -> usize) -> usize {
    let d2 = squared_distances(set);
    let n = set.len();
    let mut worst = 1;
    let mut seen = std::collections::HashSet::new();
    for p in 0..n {
        let mut radii: Vec<f64> = d2[p].iter().copied().filter(|&r| r > 0.0).collect();
        radii.sort_by(f64::total_cmp);
        radii.dedup();
        for r2 in radii {
            let members: Vec<usize> = (0..n).filter(|&x| d2[p][x] <= r2).collect();
            if !seen.insert((members.clone(), r2.to_bits())) {
                continue;
            }
            let sets: Vec<Vec<usize>> = (0..n)
                .map(|c| members.iter().copied().filter(|&x| 4.0 * d2[c][x] <= r2).collect())
                .collect();
            worst = worst.max(cover_size(&members, &sets));
        }
    }
    worst
}

/// Exact doubling constant: the largest, over centers `p` in the set and
/// radii `r`, of the minimum number of radius-`r/2` balls centred at set
/// points needed to cover the set's points within `r` of `p`.
pub fn doubling_constant_exact(set: &PointSet) -> Result<u64> {
    if set.len() > EXACT_DOUBLING_CAP {
        return Err(Error::CapExceeded { size: set.len(), cap: EXACT_DOUBLING_CAP });
    }
    Ok(worst_subproblem(set, |members, sets| {
        min_set_cover(members, sets).expect("every member covers itself").len()
    }) as u64)
}

/// Greedy upper bound on the doubling constant; never below the exact value.
pub fn doubling_constant_greedy(set: &PointSet) -> u64 {
    worst_subproblem(set, |members, sets| {
        greedy_set_cover(members, sets).expect("every member covers itself").len()
    }) as u64
}

/// Exact below the cap, greedy above, unless `mode` forces one.
pub fn doubling_constant(set: &PointSet, mode: Option<DoublingMode>) -> Result<(u64, DoublingMode)> {
    let mode = mode.unwrap_or(if set.len() <= EXACT_DOUBLING_CAP {
        DoublingMode::Exact
    } else {
        DoublingMode::Greedy
    });
    let lambda = match mode {
        DoublingMode::Exact => doubling_constant_exact(set)?,
        DoublingMode::Greedy => doubling_constant_greedy(set),
    };
    Ok((lambda, mode))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallCover {
    /// Indices into the covered point set.
    pub center_indices: Vec<usize>,
    pub centers: Vec<Vector>,
    /// Every covered point lies within this radius of a center.
    pub radius: f64,
    pub covered_set_size: usize,
    /// Number of halving rounds, `ceil(log2(r / eps))`.
    pub levels: u32,
}

/// Covers `members` by balls of squared radius `r2` centred at set points.
/// Returns (center, assigned members) pairs.
fn cover_members(d2_to: &dyn Fn(usize, usize) -> f64, n: usize, members: &[usize], r2: f64) -> Vec<(usize, Vec<usize>)> {
    let sets: Vec<Vec<usize>> =
        (0..n).map(|c| members.iter().copied().filter(|&x| d2_to(c, x) <= r2).collect()).collect();
    let chosen = if members.len() <= EXACT_COVER_LIMIT {
        min_set_cover(members, &sets)
    } else {
        greedy_set_cover(members, &sets)
    }
    .expect("every member covers itself");
    let mut assigned = vec![false; n];
    chosen
        .into_iter()
        .map(|c| {
            let mine: Vec<usize> = sets[c].iter().copied().filter(|&x| !std::mem::replace(&mut assigned[x], true)).collect();
            (c, mine)
        })
        .filter(|(_, mine)| !mine.is_empty())
        .collect()
}

/// Covers the points of `set` within `r` of `p` by balls of radius `eps`
/// centred at points of `set`.
///
/// Starting from the ball around `p`, every round replaces each ball by a
/// minimum cover of its assigned points with balls of half the radius, so
/// after `ceil(log2(r/eps))` rounds each round has multiplied the count by
/// at most the doubling constant.
pub fn ball_cover(set: &PointSet, p: &Vector, r: f64, eps: f64) -> Result<BallCover> {
    set.check_dim(p.dim())?;
    if !(r > 0.0 && eps > 0.0) {
        return Err(Error::Precondition(format!("radii must be positive (r = {r}, eps = {eps})")));
    }
    if eps > r {
        return Err(Error::Precondition(format!("eps = {eps} exceeds r = {r}")));
    }
    let n = set.len();
    let pts = set.points();
    let d2 = |a: usize, b: usize| pts[a].dist_sq(&pts[b]);
    let target: Vec<usize> = (0..n).filter(|&x| pts[x].dist_sq(p) <= r * r).collect();
    let p_index = (0..n).find(|&x| dist_sq(pts[x].as_slice(), p.as_slice()) == 0.0);

    let mut radius = r;
    let mut levels = 0;
    // `None` stands for the query point itself when it is not in the set.
    let mut balls: Vec<(Option<usize>, Vec<usize>)> = vec![(p_index, target.clone())];
    while radius > eps {
        radius /= 2.0;
        levels += 1;
        let r2 = radius * radius;
        balls = balls
            .iter()
            .flat_map(|(_, members)| cover_members(&d2, n, members, r2))
            .map(|(c, m)| (Some(c), m))
            .collect();
    }
    if balls.iter().any(|(c, m)| c.is_none() && !m.is_empty()) {
        let r2 = radius * radius;
        balls = balls
            .iter()
            .flat_map(|(_, members)| cover_members(&d2, n, members, r2))
            .map(|(c, m)| (Some(c), m))
            .collect();
    }
    let mut center_indices: Vec<usize> = Vec::new();
    for (c, members) in &balls {
        if let Some(c) = c {
            if !members.is_empty() && !center_indices.contains(c) {
                center_indices.push(*c);
            }
        }
    }
    Ok(BallCover {
        centers: center_indices.iter().map(|&i| pts[i].clone()).collect(),
        center_indices,
        radius: eps,
        covered_set_size: target.len(),
        levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ps(rows: Vec<Vec<f64>>) -> PointSet {
        PointSet::from_rows(rows).unwrap()
    }

    fn square() -> PointSet {
        ps(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]])
    }

    #[test]
    fn two_points_on_a_line() {
        let x = ps(vec![vec![0.0], vec![1.0]]);
        assert_eq!(doubling_constant_exact(&x).unwrap(), 2);
        assert_eq!(doubling_constant_greedy(&x), 2);
    }

    #[test]
    fn singleton() {
        let x = ps(vec![vec![3.0, 1.0]]);
        assert_eq!(doubling_constant_exact(&x).unwrap(), 1);
        assert_eq!(doubling_constant_greedy(&x), 1);
    }

    #[test]
    fn unit_square() {
        assert_eq!(doubling_constant_exact(&square()).unwrap(), 4);
    }

    #[test]
    fn over_cap_errors() {
        let x = ps((0..25).map(|i| vec![i as f64]).collect());
        assert!(matches!(doubling_constant_exact(&x), Err(Error::CapExceeded { size: 25, cap: 24 })));
        assert_eq!(doubling_constant(&x, None).unwrap().1, DoublingMode::Greedy);
    }

    #[test]
    fn cover_with_eps_equal_r() {
        let x = square();
        let c = ball_cover(&x, &Vector::new(vec![0.0, 0.0]).unwrap(), 2.0, 2.0).unwrap();
        assert_eq!(c.center_indices, vec![0]);
    }

    #[test]
    fn cover_two_points() {
        let x = ps(vec![vec![0.0], vec![1.0]]);
        let c = ball_cover(&x, &Vector::new(vec![0.0]).unwrap(), 1.0, 0.5).unwrap();
        assert_eq!(c.levels, 1);
        assert_eq!(c.center_indices.len(), 2);
    }

    #[test]
    fn cover_square() {
        let x = square();
        let r = 2f64.sqrt();
        let c = ball_cover(&x, &Vector::new(vec![0.0, 0.0]).unwrap(), r, r / 2.0).unwrap();
        assert!(c.center_indices.len() <= 4);
        for q in x.iter() {
            assert!(c.centers.iter().any(|s| s.dist(q) <= r / 2.0));
        }
    }

    #[test]
    fn cover_rejects_eps_above_r() {
        let x = square();
        assert!(ball_cover(&x, &Vector::new(vec![0.0, 0.0]).unwrap(), 1.0, 2.0).is_err());
    }
}
