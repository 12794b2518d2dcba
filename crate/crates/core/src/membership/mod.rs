//! Deciders for projected membership: map the query and the set with a
//! sampled `T` and test separation in `R^k`.

pub mod exact;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::{
    self, dist_to_cone, dist_to_finite, doubling_constant, enumerate_fiber, max_vertex_dist,
    min_norm_point_polytope, mu_a_closed_form, mu_a_estimate, Cone, IntegerFiber, PointSet, Polytope,
};
use crate::linalg::{sample_projection, ProjectionMatrix, ProjectionSpec, Vector};
use crate::tail_bounds::{
    cone_success_bound, k_for_cone, k_for_doubling, k_for_finite_threshold, k_for_integer_fiber,
    k_for_polytope, polytope_success_bound, small_norm_prob_bound, ConstantConfig, KSelection,
};

pub use exact::ExactVerdict;

/// Separation threshold for projected polytope and cone membership.
pub const DECISION_TOL: f64 = 1e-7;

/// Tolerance for the unit-norm requirement on cone data.
pub const UNIT_NORM_TOL: f64 = 1e-9;

/// Samples drawn when `mu_A` has no closed form.
pub const MU_A_SAMPLES: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    OriginalMember,
    Separated,
    NotSeparated,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Margin {
    /// Euclidean distance in the projected space.
    Real(f64),
    /// Max-norm gap of the exact integer path.
    Exact(#[serde(serialize_with = "bigint_as_string")] BigInt),
    /// Empty fiber: nothing to be close to.
    Unbounded,
}

fn bigint_as_string<S: Serializer>(v: &BigInt, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Decision {
    pub outcome: Outcome,
    pub margin: Margin,
    /// Separation requires `margin > threshold`.
    pub threshold: f64,
    pub k_used: usize,
    pub selection: Option<KSelection>,
    /// Lower bound on the probability that a non-member is separated.
    pub guarantee: Option<f64>,
    /// Separated only because the fiber is empty.
    pub vacuous: bool,
    /// The guarantee rests on an estimated quantity and may overstate.
    pub optimistic: bool,
}

impl Decision {
    fn new(outcome: Outcome, margin: Margin, threshold: f64, k_used: usize) -> Self {
        Self {
            outcome,
            margin,
            threshold,
            k_used,
            selection: None,
            guarantee: None,
            vacuous: false,
            optimistic: false,
        }
    }

    fn member(k_used: usize) -> Self {
        Self::new(Outcome::OriginalMember, Margin::Real(0.0), 0.0, k_used)
    }
}

fn check_projection(t: &ProjectionMatrix, dim: usize) -> Result<()> {
    if t.m() != dim {
        return Err(Error::DimensionMismatch { expected: t.m(), found: dim });
    }
    Ok(())
}

fn project_set(t: &ProjectionMatrix, set: &PointSet) -> Result<PointSet> {
    PointSet::new(set.iter().map(|x| t.apply(x)).collect::<Result<_>>()?)
}

/// Threshold test on a finite set: separated iff
/// `min_x ||T p - T x|| > tau`.
pub fn decide_finite(p: &Vector, set: &PointSet, t: &ProjectionMatrix, tau: f64) -> Result<Decision> {
    check_projection(t, p.dim())?;
    set.check_dim(p.dim())?;
    if !(tau >= 0.0) {
        return Err(Error::OutOfRange(format!("tau = {tau} must be nonnegative")));
    }
    if dist_to_finite(p, set)?.0 == 0.0 {
        return Ok(Decision::member(t.k()));
    }
    let tp = t.apply(p)?;
    let margin = set
        .iter()
        .map(|x| t.apply(x).map(|tx| tp.dist(&tx)))
        .try_fold(f64::INFINITY, |acc, d| d.map(|d| acc.min(d)))?;
    let outcome = if margin > tau { Outcome::Separated } else { Outcome::NotSeparated };
    Ok(Decision::new(outcome, Margin::Real(margin), tau, t.k()))
}

/// Projected polytope membership by the distance from `T b` to
/// `conv(T a_i)`.
pub fn decide_polytope(b: &Vector, polytope: &Polytope, t: &ProjectionMatrix, tol: f64) -> Result<Decision> {
    check_projection(t, b.dim())?;
    if !(tol > 0.0) {
        return Err(Error::OutOfRange(format!("tol = {tol} must be positive")));
    }
    let solver_tol = tol / 10.0;
    if min_norm_point_polytope(b, polytope, solver_tol)?.distance <= tol {
        return Ok(Decision::member(t.k()));
    }
    let image = Polytope::new(project_set(t, &polytope.vertices)?);
    let margin = min_norm_point_polytope(&t.apply(b)?, &image, solver_tol)?.distance;
    let outcome = if margin > tol { Outcome::Separated } else { Outcome::NotSeparated };
    Ok(Decision::new(outcome, Margin::Real(margin), tol, t.k()))
}

fn check_unit(v: &Vector, what: &str) -> Result<()> {
    let n = v.norm();
    if (n - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::ConventionViolation(format!("{what} has norm {n}")));
    }
    Ok(())
}

/// Projected cone membership; `b` and the generators must have unit norm.
pub fn decide_cone(b: &Vector, cone: &Cone, t: &ProjectionMatrix, tol: f64) -> Result<Decision> {
    check_projection(t, b.dim())?;
    cone.generators.check_dim(b.dim())?;
    if !(tol > 0.0) {
        return Err(Error::OutOfRange(format!("tol = {tol} must be positive")));
    }
    check_unit(b, "query")?;
    cone.check_unit(UNIT_NORM_TOL)?;
    let solver_tol = tol / 10.0;
    if dist_to_cone(b, cone, solver_tol)?.distance <= tol {
        return Ok(Decision::member(t.k()));
    }
    let image = Cone::new(project_set(t, &cone.generators)?);
    let margin = dist_to_cone(&t.apply(b)?, &image, solver_tol)?.distance;
    let outcome = if margin > tol { Outcome::Separated } else { Outcome::NotSeparated };
    Ok(Decision::new(outcome, Margin::Real(margin), tol, t.k()))
}

/// Exact integer test: removes the positive row, projects the rest with an
/// unscaled Rademacher `T`, and checks `T b~ != Σ x_j T a'_j` for every
/// fiber point `x`.
pub fn decide_integer_exact(fiber: &IntegerFiber, t: &ProjectionMatrix) -> Result<Decision> {
    let verdict = exact::separate(fiber, t.as_signs()?)?;
    let k = t.k();
    Ok(match verdict {
        ExactVerdict::EmptyFiber => Decision {
            vacuous: true,
            ..Decision::new(Outcome::Separated, Margin::Unbounded, 0.0, k)
        },
        ExactVerdict::OriginalMember { .. } => {
            Decision::new(Outcome::OriginalMember, Margin::Exact(BigInt::default()), 0.0, k)
        }
        ExactVerdict::Separated { gap, .. } => Decision::new(Outcome::Separated, Margin::Exact(gap), 0.0, k),
        ExactVerdict::NotSeparated { .. } => {
            Decision::new(Outcome::NotSeparated, Margin::Exact(BigInt::default()), 0.0, k)
        }
    })
}

/// The five supported set classes.
#[derive(Clone, Debug, PartialEq)]
pub enum SetInstance {
    Finite(PointSet),
    Polytope(Polytope),
    Cone(Cone),
    Integer(IntegerFiber),
    /// Finite sample of a set of low doubling dimension.
    Doubling(PointSet),
}

impl SetInstance {
    pub fn class_name(&self) -> &'static str {
        match self {
            SetInstance::Finite(_) => "finite",
            SetInstance::Polytope(_) => "polytope",
            SetInstance::Cone(_) => "cone",
            SetInstance::Integer(_) => "integer",
            SetInstance::Doubling(_) => "doubling",
        }
    }
}

fn u64_of(v: &BigInt) -> Result<u64> {
    u64::try_from(v).map_err(|_| Error::OutOfRange(format!("{v} does not fit in 64 bits")))
}

/// Picks `k` for the instance class, samples `T` with `seed` and runs the
/// matching decider.
///
/// `query` is the point `p` (or `b`) for every class except
/// [`SetInstance::Integer`], whose right-hand side is part of the fiber.
/// `tau` is the separation threshold of the finite and doubling classes;
/// polytope and cone decisions use [`DECISION_TOL`].
pub fn decide_pipeline(
    instance: &SetInstance,
    query: Option<&Vector>,
    delta: f64,
    tau: f64,
    cfg: &ConstantConfig,
    seed: u64,
) -> Result<Decision> {
    cfg.validate()?;
    let need_query = || query.ok_or_else(|| Error::Precondition("a query point is required".into()));
    match instance {
        SetInstance::Finite(set) => {
            let p = need_query()?;
            let (d, _) = dist_to_finite(p, set)?;
            if d == 0.0 {
                return Ok(Decision { guarantee: Some(1.0), ..Decision::member(cfg.k_min) });
            }
            let sel = k_for_finite_threshold(set.len() as u64, delta, tau, d, cfg)?;
            let t = sample_projection(ProjectionSpec::gaussian(p.dim(), sel.k, seed))?;
            let mut dec = decide_finite(p, set, &t, tau)?;
            let miss = set.len() as f64 * small_norm_prob_bound(sel.k, tau / d)?;
            dec.guarantee = Some((1.0 - miss).clamp(0.0, 1.0));
            dec.selection = Some(sel);
            Ok(dec)
        }
        SetInstance::Doubling(set) => {
            let p = need_query()?;
            let (d, _) = dist_to_finite(p, set)?;
            if d == 0.0 {
                return Ok(Decision { guarantee: Some(1.0), ..Decision::member(cfg.k_min) });
            }
            let (lambda, _) = doubling_constant(set, None)?;
            let sel = k_for_doubling(lambda as f64, delta, tau, d, cfg)?;
            let t = sample_projection(ProjectionSpec::gaussian(p.dim(), sel.k, seed))?;
            let mut dec = decide_finite(p, set, &t, tau)?;
            dec.guarantee = Some(1.0 - delta);
            dec.optimistic = true;
            dec.selection = Some(sel);
            Ok(dec)
        }
        SetInstance::Polytope(poly) => {
            let b = need_query()?;
            let d = min_norm_point_polytope(b, poly, geometry::DEFAULT_TOL)?.distance;
            if d <= DECISION_TOL {
                return Ok(Decision { guarantee: Some(1.0), ..Decision::member(cfg.k_min) });
            }
            let big_d = max_vertex_dist(b, poly)?;
            let n = poly.vertices.len() as u64;
            let sel = k_for_polytope(n, d, big_d, 1.0 - delta, cfg)?;
            let t = sample_projection(ProjectionSpec::gaussian(b.dim(), sel.k, seed))?;
            let mut dec = decide_polytope(b, poly, &t, DECISION_TOL)?;
            dec.guarantee = Some(polytope_success_bound(n, sel.k, d, big_d, cfg)?.bound);
            dec.selection = Some(sel);
            Ok(dec)
        }
        SetInstance::Cone(cone) => {
            let b = need_query()?;
            check_unit(b, "query")?;
            cone.check_unit(UNIT_NORM_TOL)?;
            let d = dist_to_cone(b, cone, geometry::DEFAULT_TOL)?.distance;
            if d <= DECISION_TOL {
                return Ok(Decision { guarantee: Some(1.0), ..Decision::member(cfg.k_min) });
            }
            let (mu, optimistic) = match mu_a_closed_form(&cone.generators) {
                Some(mu) => (mu, false),
                None => (mu_a_estimate(&cone.generators, MU_A_SAMPLES, seed)?, true),
            };
            let n = cone.generators.len() as u64;
            let d = d.min(1.0);
            let sel = k_for_cone(n, d, mu, 1.0 - delta, cfg)?;
            let t = sample_projection(ProjectionSpec::gaussian(b.dim(), sel.k, seed))?;
            let mut dec = decide_cone(b, cone, &t, DECISION_TOL)?;
            dec.guarantee = Some(cone_success_bound(n, sel.k, d, mu, cfg)?.bound);
            dec.optimistic = optimistic;
            dec.selection = Some(sel);
            Ok(dec)
        }
        SetInstance::Integer(fiber) => {
            if fiber.rows() < 2 {
                return Err(Error::Precondition("A needs a row besides the positive row".into()));
            }
            let n = fiber.cols() as u64;
            let b_bound = u64_of(&fiber.b_bound())?;
            let sel = k_for_integer_fiber(n, b_bound, delta, cfg)?;
            let t = sample_projection(ProjectionSpec::rademacher(fiber.rows() - 1, sel.k, seed))?;
            let mut dec = decide_integer_exact(fiber, &t)?;
            let size = enumerate_fiber(fiber).len() as f64;
            let miss = 2.0 * size * (-cfg.c_jl * sel.k as f64).exp();
            dec.guarantee = Some((1.0 - miss).clamp(0.0, 1.0));
            dec.selection = Some(sel);
            Ok(dec)
        }
    }
}

/// Runs the class decider with an already chosen `k` and projection seed.
pub fn decide_with_k(
    instance: &SetInstance,
    query: Option<&Vector>,
    k: usize,
    tau: f64,
    seed: u64,
) -> Result<Decision> {
    let need_query = || query.ok_or_else(|| Error::Precondition("a query point is required".into()));
    match instance {
        SetInstance::Finite(set) | SetInstance::Doubling(set) => {
            let p = need_query()?;
            let t = sample_projection(ProjectionSpec::gaussian(p.dim(), k, seed))?;
            decide_finite(p, set, &t, tau)
        }
        SetInstance::Polytope(poly) => {
            let b = need_query()?;
            let t = sample_projection(ProjectionSpec::gaussian(b.dim(), k, seed))?;
            decide_polytope(b, poly, &t, DECISION_TOL)
        }
        SetInstance::Cone(cone) => {
            let b = need_query()?;
            let t = sample_projection(ProjectionSpec::gaussian(b.dim(), k, seed))?;
            decide_cone(b, cone, &t, DECISION_TOL)
        }
        SetInstance::Integer(fiber) => {
            if fiber.rows() < 2 {
                return Err(Error::Precondition("A needs a row besides the positive row".into()));
            }
            let t = sample_projection(ProjectionSpec::rademacher(fiber.rows() - 1, k, seed))?;
            decide_integer_exact(fiber, &t)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Distribution;

    fn v(x: &[f64]) -> Vector {
        Vector::new(x.to_vec()).unwrap()
    }

    fn ps(rows: Vec<Vec<f64>>) -> PointSet {
        PointSet::from_rows(rows).unwrap()
    }

    #[test]
    fn finite_member_short_circuits() {
        let set = ps(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let t = sample_projection(ProjectionSpec::gaussian(2, 3, 1)).unwrap();
        let d = decide_finite(&v(&[3.0, 4.0]), &set, &t, 0.1).unwrap();
        assert_eq!(d.outcome, Outcome::OriginalMember);
        assert_eq!(d.margin, Margin::Real(0.0));
    }

    #[test]
    fn finite_margin_matches_pinned_matrix() {
        let set = ps(vec![vec![0.0, 1.0, 0.0]]);
        let p = v(&[1.0, 0.0, 0.0]);
        let t = sample_projection(ProjectionSpec::gaussian(3, 2, 17)).unwrap();
        let d = decide_finite(&p, &set, &t, 0.0).unwrap();
        let hand = ((t.entry(0, 0) - t.entry(0, 1)).powi(2) + (t.entry(1, 0) - t.entry(1, 1)).powi(2)).sqrt();
        match d.margin {
            Margin::Real(m) => assert!((m - hand).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn polytope_vertex_is_member() {
        let poly = Polytope::new(ps(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]));
        let t = sample_projection(ProjectionSpec::gaussian(3, 2, 4)).unwrap();
        let d = decide_polytope(&v(&[1.0, 0.0, 0.0]), &poly, &t, DECISION_TOL).unwrap();
        assert_eq!(d.outcome, Outcome::OriginalMember);
    }

    #[test]
    fn polytope_identity_like_rademacher_separates() {
        let spec = ProjectionSpec::rademacher(3, 3, 0);
        let t = ProjectionMatrix::from_rows(
            spec,
            &[vec![1.0, 1.0, 1.0], vec![1.0, -1.0, 1.0], vec![1.0, 1.0, -1.0]],
        )
        .unwrap();
        let poly = Polytope::new(ps(vec![vec![1.0, 0.0, 0.0], vec![2.0, 1.0, 0.0]]));
        let d = decide_polytope(&v(&[0.0, 0.0, 0.0]), &poly, &t, DECISION_TOL).unwrap();
        assert_eq!(d.outcome, Outcome::Separated);
    }

    #[test]
    fn cone_rejects_non_unit() {
        let cone = Cone::new(ps(vec![vec![2.0, 0.0]]));
        let t = sample_projection(ProjectionSpec::gaussian(2, 1, 1)).unwrap();
        assert!(matches!(
            decide_cone(&v(&[0.0, 1.0]), &cone, &t, DECISION_TOL),
            Err(Error::ConventionViolation(_))
        ));
    }

    #[test]
    fn cone_one_dimensional_case_analysis() {
        let cone = Cone::new(ps(vec![vec![1.0, 0.0]]));
        let b = v(&[0.0, 1.0]);
        for seed in 0..50 {
            let t = sample_projection(ProjectionSpec::gaussian(2, 1, seed)).unwrap();
            let (t1, t2) = (t.entry(0, 0), t.entry(0, 1));
            let d = decide_cone(&b, &cone, &t, DECISION_TOL).unwrap();
            let expected = if t1.signum() == t2.signum() { Outcome::NotSeparated } else { Outcome::Separated };
            assert_eq!(d.outcome, expected, "seed {seed}: t = ({t1}, {t2})");
        }
    }

    #[test]
    fn integer_empty_fiber_is_vacuous() {
        let f = IntegerFiber::from_i64(&[vec![2, 2], vec![1, 0]], &[3, 1], 0, None).unwrap();
        let t = sample_projection(ProjectionSpec::rademacher(1, 3, 1)).unwrap();
        let d = decide_integer_exact(&f, &t).unwrap();
        assert_eq!(d.outcome, Outcome::Separated);
        assert!(d.vacuous);
        assert_eq!(d.margin, Margin::Unbounded);
    }

    #[test]
    fn integer_parity_single_sign() {
        let f = IntegerFiber::from_i64(&[vec![1, 1, 1], vec![2, 2, 2]], &[2, 3], 0, None).unwrap();
        for sign in [1.0, -1.0] {
            let t = ProjectionMatrix::from_rows(ProjectionSpec::rademacher(1, 1, 0), &[vec![sign]]).unwrap();
            let d = decide_integer_exact(&f, &t).unwrap();
            assert_eq!(d.outcome, Outcome::Separated);
            match d.margin {
                Margin::Exact(g) => assert!(g >= BigInt::from(1)),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn integer_member() {
        let f = IntegerFiber::from_i64(&[vec![1, 1], vec![1, 2]], &[2, 3], 0, None).unwrap();
        let t = sample_projection(ProjectionSpec::rademacher(1, 4, 2)).unwrap();
        assert_eq!(decide_integer_exact(&f, &t).unwrap().outcome, Outcome::OriginalMember);
    }

    #[test]
    fn integer_rejects_gaussian() {
        let f = IntegerFiber::from_i64(&[vec![1, 1], vec![1, 2]], &[2, 3], 0, None).unwrap();
        let t = sample_projection(ProjectionSpec::new(1, 4, Distribution::Gaussian, 2)).unwrap();
        assert_eq!(decide_integer_exact(&f, &t), Err(Error::UnsupportedExactPath));
    }

    #[test]
    fn pipeline_finite_uses_selector_k() {
        // |X| = 1000 points at distance >= 1 with the closest exactly 1
        let mut rows = vec![vec![1.0, 0.0, 0.0]];
        for i in 1..1000 {
            rows.push(vec![2.0 + i as f64, 1.0, -1.0]);
        }
        let set = SetInstance::Finite(ps(rows));
        let cfg = ConstantConfig::default();
        let d = decide_pipeline(&set, Some(&v(&[0.0, 0.0, 0.0])), 0.01, 0.1, &cfg, 3).unwrap();
        assert_eq!(d.k_used, 5);
        assert_eq!(d.selection.unwrap().k, 5);
    }

    #[test]
    fn pipeline_member_regardless_of_parameters() {
        let set = SetInstance::Finite(ps(vec![vec![1.0, 1.0]]));
        let cfg = ConstantConfig::default();
        let d = decide_pipeline(&set, Some(&v(&[1.0, 1.0])), 0.5, 10.0, &cfg, 0).unwrap();
        assert_eq!(d.outcome, Outcome::OriginalMember);
    }

    #[test]
    fn pipeline_integer_is_exact() {
        let f = IntegerFiber::from_i64(&[vec![1, 1, 1], vec![2, 2, 2], vec![0, 2, 4]], &[2, 3, 1], 0, None).unwrap();
        let cfg = ConstantConfig::default();
        let d = decide_pipeline(&SetInstance::Integer(f), None, 0.1, 0.0, &cfg, 42).unwrap();
        assert!(matches!(d.margin, Margin::Exact(_)));
        assert_eq!(d.selection.unwrap().rule, crate::tail_bounds::SelectionRule::IntegerFiber);
    }
}
