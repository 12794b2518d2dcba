//! Geometric oracles consumed by the bounds and deciders.

mod cone;
mod doubling;
mod fiber;
mod polytope;
mod set_cover;
mod simplex;

pub use cone::{
    dist_to_cone, induced_norm, induced_norm_exact, induced_norm_rational, mu_a_closed_form,
    mu_a_estimate, ConeProjection,
};
pub use doubling::{
    ball_cover, doubling_constant, doubling_constant_exact, doubling_constant_greedy, BallCover,
    DoublingMode, EXACT_DOUBLING_CAP,
};
pub use fiber::{enumerate_box, enumerate_fiber, BoxBounds, IntegerFiber};
pub use polytope::{max_vertex_dist, min_norm_point_polytope, PolytopeProjection};
pub use set_cover::{greedy_set_cover, min_set_cover};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Solver tolerance used when none is given explicitly.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Nonempty list of points sharing one dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vector>", into = "Vec<Vector>")]
pub struct PointSet {
    points: Vec<Vector>,
}

impl PointSet {
    pub fn new(points: Vec<Vector>) -> Result<Self> {
        let first = points.first().ok_or(Error::Empty("point set"))?.dim();
        if let Some(bad) = points.iter().find(|p| p.dim() != first) {
            return Err(Error::DimensionMismatch { expected: first, found: bad.dim() });
        }
        Ok(Self { points })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows.into_iter().map(Vector::new).collect::<Result<_>>()?)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    pub fn get(&self, i: usize) -> &Vector {
        &self.points[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Vector> {
        self.points.iter()
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: dim });
        }
        Ok(())
    }
}

impl TryFrom<Vec<Vector>> for PointSet {
    type Error = Error;
    fn try_from(points: Vec<Vector>) -> Result<Self> {
        PointSet::new(points)
    }
}

impl From<PointSet> for Vec<Vector> {
    fn from(p: PointSet) -> Self {
        p.points
    }
}

/// Convex hull of its vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polytope {
    pub vertices: PointSet,
}

impl Polytope {
    pub fn new(vertices: PointSet) -> Self {
        Self { vertices }
    }
}

/// Conic hull of its generators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Cone {
    pub generators: PointSet,
}

impl Cone {
    pub fn new(generators: PointSet) -> Self {
        Self { generators }
    }

    /// Errors unless every generator has norm 1 within `tol`.
    pub fn check_unit(&self, tol: f64) -> Result<()> {
        for (i, g) in self.generators.iter().enumerate() {
            let n = g.norm();
            if (n - 1.0).abs() > tol {
                return Err(Error::ConventionViolation(format!("generator {i} has norm {n}")));
            }
        }
        Ok(())
    }
}

/// Minimum Euclidean distance from `p` to `set` and the lowest index
/// attaining it.
pub fn dist_to_finite(p: &Vector, set: &PointSet) -> Result<(f64, usize)> {
    set.check_dim(p.dim())?;
    let mut best = (f64::INFINITY, 0);
    for (i, x) in set.iter().enumerate() {
        let d2 = p.dist_sq(x);
        if d2 < best.0 {
            best = (d2, i);
        }
    }
    Ok((best.0.sqrt(), best.1))
}
