//! Monte Carlo harness: empirical failure rates against the tail bounds,
//! the floating-point gap experiment on infeasible integer programs, and
//! least-squares calibration of the exponent constant.
//!
//! Every report is a pure function of its configuration. Trial `i` uses the
//! projection seed `derive_seed(master_seed, i)`; trials run in parallel and
//! are aggregated with integer counts or in index order.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{
    dist_to_cone, dist_to_finite, doubling_constant, enumerate_box, enumerate_fiber, max_vertex_dist,
    min_norm_point_polytope, BoxBounds, Cone, IntegerFiber, PointSet, Polytope,
};
use crate::linalg::{derive_seed, rng_from_seed, sample_projection, IntVector, ProjectionSpec, SeededRng, Vector};
use crate::membership::{decide_with_k, Outcome, SetInstance, DECISION_TOL};
use crate::tail_bounds::{
    cone_success_bound, k_for_cone, k_for_doubling, k_for_finite_threshold, k_for_integer_fiber, k_for_polytope,
    polytope_success_bound, small_norm_prob_bound, ConstantConfig, KSelection,
};

/// Two-sided 99% standard normal quantile.
pub const WILSON_Z_99: f64 = 2.5758293035489004;

/// Relative tolerances of the floating-point feasibility check.
pub const IFP_TOLERANCES: [f64; 3] = [1e-6, 1e-9, 1e-12];

const DEFAULT_TAU_RATIO: f64 = 0.1;

/// Tolerance for agreement between an analytic distance and the solver.
const CERTIFY_TOL: f64 = 1e-6;

/// Wilson score interval `(lower, upper)` for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    assert!(trials > 0 && successes <= trials);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lower = if successes == 0 { 0.0 } else { (center - half).clamp(0.0, p) };
    let upper = if successes == trials { 1.0 } else { (center + half).clamp(p, 1.0) };
    (lower, upper)
}

/// Instance generators. Every generated instance is a certified
/// non-member: its distance to the set is known analytically or computed
/// by a geometry oracle and checked to be positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceSpec {
    /// `size` points around a Gaussian query `p`, the first at distance
    /// exactly `d`, the rest at distance in `[d, (1 + spread) d]`.
    Finite {
        m: usize,
        size: usize,
        d: f64,
        #[serde(default = "default_spread")]
        spread: f64,
        seed: u64,
    },
    /// Vertices in the hyperplane `x_0 = 0`, Gaussian around a center with
    /// standard deviation `spread`; the query is the centroid lifted to
    /// `x_0 = height`, so `d = height`.
    Polytope {
        m: usize,
        vertices: usize,
        height: f64,
        spread: f64,
        seed: u64,
    },
    /// `n` orthonormal generators of a random frame (`mu_A = sqrt(n)`) and a
    /// unit query at distance `d` from their cone.
    Cone { m: usize, generators: usize, d: f64, seed: u64 },
    /// Parity-infeasible system: row 0 is positive with `b_0 = b_bound`,
    /// every other row has even entries, and the first `odd_entries` of
    /// them have odd right-hand sides.
    Integer {
        n: usize,
        b_bound: u64,
        rows: usize,
        #[serde(default = "default_odd_entries")]
        odd_entries: usize,
        #[serde(default)]
        box_upper: Option<i64>,
        seed: u64,
    },
    /// `size` points of a random `intrinsic_dim`-dimensional affine
    /// subspace, with the query at distance `d` from it.
    Doubling {
        m: usize,
        intrinsic_dim: usize,
        size: usize,
        d: f64,
        seed: u64,
    },
}

fn default_spread() -> f64 {
    3.0
}

fn default_odd_entries() -> usize {
    1
}

/// Choice of projection dimension.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KChoice {
    #[default]
    Selector,
    Fixed(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceSpec,
    pub trials: u64,
    #[serde(default)]
    pub k: KChoice,
    pub delta: f64,
    /// Absolute threshold for the finite and doubling classes.
    #[serde(default)]
    pub tau: Option<f64>,
    /// Threshold as a fraction of `d`; 0.1 when neither is given.
    #[serde(default)]
    pub tau_ratio: Option<f64>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub constants: ConstantConfig,
}

impl ExperimentConfig {
    pub fn new(instance: InstanceSpec, trials: u64, delta: f64) -> Self {
        Self {
            instance,
            trials,
            k: KChoice::Selector,
            delta,
            tau: None,
            tau_ratio: None,
            master_seed: 0,
            constants: ConstantConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidSpec("trials must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::OutOfRange(format!("delta = {} must lie in (0, 1)", self.delta)));
        }
        if self.tau.is_some() && self.tau_ratio.is_some() {
            return Err(Error::InvalidSpec("give at most one of tau and tau_ratio".into()));
        }
        if let KChoice::Fixed(0) = self.k {
            return Err(Error::InvalidSpec("k must be positive".into()));
        }
        self.constants.validate()
    }

    fn tau_for(&self, d: f64) -> Result<f64> {
        let tau = match (self.tau, self.tau_ratio) {
            (Some(t), _) => t,
            (None, r) => r.unwrap_or(DEFAULT_TAU_RATIO) * d,
        };
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::OutOfRange(format!("tau = {tau} must be finite and nonnegative")));
        }
        Ok(tau)
    }
}

/// A generated instance with its certified geometric quantities.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedInstance {
    pub instance: SetInstance,
    pub query: Option<Vector>,
    /// Distance from the query to the set.
    pub d: Option<f64>,
    /// Largest vertex distance (polytopes).
    pub big_d: Option<f64>,
    pub mu_a: Option<f64>,
    /// Exact or greedy doubling constant (doubling class).
    pub lambda: Option<u64>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::InvalidSpec(format!("{name} = {v} must be positive")));
    }
    Ok(())
}

fn gaussian_vec(rng: &mut SeededRng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn unit_vec(rng: &mut SeededRng, len: usize) -> Vec<f64> {
    loop {
        let v = gaussian_vec(rng, len);
        let n = crate::linalg::norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// `cols` orthonormal vectors of `R^m` from the QR factor of a Gaussian
/// matrix.
fn orthonormal_frame(rng: &mut SeededRng, m: usize, cols: usize) -> Vec<Vec<f64>> {
    let g = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = g.qr().q();
    (0..cols).map(|j| q.column(j).iter().copied().collect()).collect()
}

fn to_vector(v: Vec<f64>) -> Result<Vector> {
    Vector::new(v)
}

fn contract(msg: String) -> Error {
    Error::GeneratorContract(msg)
}

/// Builds the instance described by `spec`.
pub fn generate(spec: &InstanceSpec) -> Result<GeneratedInstance> {
    match *spec {
        InstanceSpec::Finite { m, size, d, spread, seed } => {
            positive("d", d)?;
            if m == 0 || size == 0 || !(spread >= 0.0) {
                return Err(Error::InvalidSpec("finite instance needs m, size >= 1 and spread >= 0".into()));
            }
            let mut rng = rng_from_seed(seed);
            let p = gaussian_vec(&mut rng, m);
            let mut pts = Vec::with_capacity(size);
            for i in 0..size {
                let u = unit_vec(&mut rng, m);
                let r = if i == 0 { d } else { d * (1.0 + spread * rng.random::<f64>()) };
                pts.push(to_vector(p.iter().zip(&u).map(|(a, b)| a + r * b).collect())?);
            }
            let set = PointSet::new(pts)?;
            let p = to_vector(p)?;
            let certified = dist_to_finite(&p, &set)?.0;
            if !(certified > 0.0) || (certified - d).abs() > CERTIFY_TOL * d.max(1.0) {
                return Err(contract(format!("finite generator: distance {certified}, expected {d}")));
            }
            Ok(GeneratedInstance {
                instance: SetInstance::Finite(set),
                query: Some(p),
                d: Some(certified),
                big_d: None,
                mu_a: None,
                lambda: None,
            })
        }
        InstanceSpec::Polytope { m, vertices, height, spread, seed } => {
            positive("height", height)?;
            if m < 2 || vertices == 0 || !(spread >= 0.0) {
                return Err(Error::InvalidSpec("polytope instance needs m >= 2, vertices >= 1, spread >= 0".into()));
            }
            let mut rng = rng_from_seed(seed);
            let center = gaussian_vec(&mut rng, m - 1);
            let mut rows = Vec::with_capacity(vertices);
            for _ in 0..vertices {
                let z = gaussian_vec(&mut rng, m - 1);
                let mut row = vec![0.0];
                row.extend(center.iter().zip(&z).map(|(c, z)| c + spread * z));
                rows.push(row);
            }
            let mut b = vec![height];
            for j in 1..m {
                // mean in a fixed order so repeated runs agree bitwise
                b.push(rows.iter().map(|r| r[j]).sum::<f64>() / vertices as f64);
            }
            let poly = Polytope::new(PointSet::from_rows(rows)?);
            let b = to_vector(b)?;
            let solved = min_norm_point_polytope(&b, &poly, 1e-10)?.distance;
            if (solved - height).abs() > CERTIFY_TOL * height.max(1.0) {
                return Err(contract(format!("polytope generator: solver distance {solved}, expected {height}")));
            }
            let big_d = max_vertex_dist(&b, &poly)?;
            Ok(GeneratedInstance {
                instance: SetInstance::Polytope(poly),
                query: Some(b),
                d: Some(height),
                big_d: Some(big_d),
                mu_a: None,
                lambda: None,
            })
        }
        InstanceSpec::Cone { m, generators, d, seed } => {
            if !(d > 0.0 && d <= 1.0) {
                return Err(Error::InvalidSpec(format!("cone distance d = {d} must lie in (0, 1]")));
            }
            if generators == 0 || m < generators + 1 {
                return Err(Error::InvalidSpec("cone instance needs 1 <= generators < m".into()));
            }
            let mut rng = rng_from_seed(seed);
            let q = orthonormal_frame(&mut rng, m, generators + 1);
            let inside = (1.0 - d * d).sqrt() / (generators as f64).sqrt();
            let b: Vec<f64> =
                (0..m).map(|r| inside * q[..generators].iter().map(|c| c[r]).sum::<f64>() + d * q[generators][r]).collect();
            let b = to_vector(b)?;
            let cone = Cone::new(PointSet::from_rows(q[..generators].to_vec())?);
            let solved = dist_to_cone(&b, &cone, 1e-10)?.distance;
            if (solved - d).abs() > CERTIFY_TOL {
                return Err(contract(format!("cone generator: solver distance {solved}, expected {d}")));
            }
            Ok(GeneratedInstance {
                instance: SetInstance::Cone(cone),
                query: Some(b),
                d: Some(d),
                big_d: None,
                mu_a: Some((generators as f64).sqrt()),
                lambda: None,
            })
        }
        InstanceSpec::Integer { n, b_bound, rows, odd_entries, box_upper, seed } => {
            let fiber = integer_instance(n, b_bound, rows, odd_entries, box_upper, seed)?;
            Ok(GeneratedInstance {
                instance: SetInstance::Integer(fiber),
                query: None,
                d: None,
                big_d: None,
                mu_a: None,
                lambda: None,
            })
        }
        InstanceSpec::Doubling { m, intrinsic_dim, size, d, seed } => {
            positive("d", d)?;
            if intrinsic_dim == 0 || m < intrinsic_dim + 1 || size == 0 {
                return Err(Error::InvalidSpec("doubling instance needs 1 <= intrinsic_dim < m and size >= 1".into()));
            }
            let mut rng = rng_from_seed(seed);
            let q = orthonormal_frame(&mut rng, m, intrinsic_dim + 1);
            let offset = gaussian_vec(&mut rng, m);
            let mut pts = Vec::with_capacity(size);
            for i in 0..size {
                let c: Vec<f64> =
                    (0..intrinsic_dim).map(|_| if i == 0 { 0.0 } else { 2.0 * rng.random::<f64>() - 1.0 }).collect();
                pts.push(to_vector(
                    (0..m).map(|r| offset[r] + c.iter().zip(&q).map(|(c, col)| c * col[r]).sum::<f64>()).collect(),
                )?);
            }
            let p = to_vector((0..m).map(|r| offset[r] + d * q[intrinsic_dim][r]).collect())?;
            let set = PointSet::new(pts)?;
            let certified = dist_to_finite(&p, &set)?.0;
            if !(certified > 0.0) {
                return Err(contract("doubling generator produced a member".into()));
            }
            let (lambda, _) = doubling_constant(&set, None)?;
            Ok(GeneratedInstance {
                instance: SetInstance::Doubling(set),
                query: Some(p),
                d: Some(certified),
                big_d: None,
                mu_a: None,
                lambda: Some(lambda),
            })
        }
    }
}

fn integer_instance(
    n: usize,
    b_bound: u64,
    rows: usize,
    odd_entries: usize,
    box_upper: Option<i64>,
    seed: u64,
) -> Result<IntegerFiber> {
    if n == 0 || rows < 2 || odd_entries == 0 || odd_entries > rows - 1 {
        return Err(Error::InvalidSpec("integer instance needs n >= 1, rows >= 2, 1 <= odd_entries < rows".into()));
    }
    if b_bound < 2 {
        return Err(Error::InvalidSpec("integer instance needs b_bound >= 2".into()));
    }
    let big_b = i64::try_from(b_bound).map_err(|_| Error::OutOfRange("b_bound too large".into()))?;
    let mut rng = rng_from_seed(seed);
    let mut a = Vec::with_capacity(rows);
    let mut b = Vec::with_capacity(rows);
    a.push((0..n).map(|j| if j == 0 { 1 } else { rng.random_range(1..=3) }).collect::<Vec<i64>>());
    b.push(big_b);
    for l in 1..rows {
        a.push((0..n).map(|_| 2 * rng.random_range(-2..=2)).collect());
        // odd values in [-B+1, B-1] or even values in [-B, B]
        let v = if l <= odd_entries {
            2 * rng.random_range(-(big_b / 2)..=(big_b - 1) / 2) + 1
        } else {
            2 * rng.random_range(-(big_b / 2)..=big_b / 2)
        };
        b.push(v);
    }
    let bounds = box_upper.map(|u| BoxBounds::uniform(n, 0, u));
    let fiber = IntegerFiber::from_i64(&a, &b, 0, bounds)?;
    if fiber.is_feasible() {
        return Err(contract("integer generator produced a feasible system".into()));
    }
    Ok(fiber)
}

/// SHA-256 of a canonical byte encoding of the instance.
pub fn instance_hash(gen: &GeneratedInstance) -> String {
    let mut h = Sha256::new();
    h.update(gen.instance.class_name().as_bytes());
    let mut points = |set: &PointSet| {
        for p in set.iter() {
            h.update(b"|");
            for x in p.as_slice() {
                h.update(x.to_le_bytes());
            }
        }
    };
    match &gen.instance {
        SetInstance::Finite(s) | SetInstance::Doubling(s) => points(s),
        SetInstance::Polytope(p) => points(&p.vertices),
        SetInstance::Cone(c) => points(&c.generators),
        SetInstance::Integer(f) => {
            for row in f.matrix() {
                h.update(b"|");
                for v in row {
                    h.update(v.to_string().as_bytes());
                    h.update(b",");
                }
            }
            h.update(b"=");
            for v in f.rhs().as_slice() {
                h.update(v.to_string().as_bytes());
                h.update(b",");
            }
            if let Some(bx) = f.bounds() {
                for v in bx.lower.iter().chain(&bx.upper) {
                    h.update(v.to_string().as_bytes());
                    h.update(b";");
                }
            }
        }
    }
    if let Some(q) = &gen.query {
        h.update(b"?");
        for x in q.as_slice() {
            h.update(x.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportMetadata {
    pub class: String,
    pub k: usize,
    pub selection: Option<KSelection>,
    pub constants: ConstantConfig,
    pub instance_hash: String,
    pub master_seed: u64,
    pub d: Option<f64>,
    pub tau: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmpiricalReport {
    pub failures: u64,
    pub trials: u64,
    pub rate: f64,
    pub wilson_99_lower: f64,
    pub wilson_99_upper: f64,
    /// Target failure probability of the configuration.
    pub delta: f64,
    /// Failure probability allowed by the class bound at the `k` used.
    pub theoretical_delta: f64,
    pub metadata: ReportMetadata,
}

impl EmpiricalReport {
    /// Half-width of the Wilson 99% interval.
    pub fn half_width(&self) -> f64 {
        (self.wilson_99_upper - self.wilson_99_lower) / 2.0
    }

    /// `rate <= bound + half_width`.
    pub fn dominated_by(&self, bound: f64) -> bool {
        self.rate <= bound + self.half_width()
    }
}

struct Prepared {
    gen: GeneratedInstance,
    k: usize,
    selection: Option<KSelection>,
    tau: Option<f64>,
    theoretical_delta: f64,
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let gen = generate(&cfg.instance)?;
    let c = &cfg.constants;
    let fixed = match cfg.k {
        KChoice::Fixed(k) => Some(k),
        KChoice::Selector => None,
    };
    let pick = |sel: Result<KSelection>| -> Result<(usize, Option<KSelection>)> {
        match fixed {
            Some(k) => Ok((k, None)),
            None => sel.map(|s| (s.k, Some(s))),
        }
    };
    let (k, selection, tau, theoretical_delta) = match &gen.instance {
        SetInstance::Finite(set) => {
            let d = gen.d.expect("finite instances carry d");
            let tau = cfg.tau_for(d)?;
            let (k, sel) = pick(k_for_finite_threshold(set.len() as u64, cfg.delta, tau, d, c))?;
            let miss = (set.len() as f64 * small_norm_prob_bound(k, tau / d)?).min(1.0);
            (k, sel, Some(tau), miss)
        }
        SetInstance::Doubling(_) => {
            let d = gen.d.expect("doubling instances carry d");
            let tau = cfg.tau_for(d)?;
            let lambda = gen.lambda.expect("doubling instances carry lambda") as f64;
            let (k, sel) = pick(k_for_doubling(lambda, cfg.delta, tau, d, c))?;
            (k, sel, Some(tau), cfg.delta)
        }
        SetInstance::Polytope(p) => {
            let (d, big_d) = (gen.d.expect("d"), gen.big_d.expect("D"));
            let n = p.vertices.len() as u64;
            let (k, sel) = pick(k_for_polytope(n, d, big_d, 1.0 - cfg.delta, c))?;
            (k, sel, None, 1.0 - polytope_success_bound(n, k, d, big_d, c)?.bound)
        }
        SetInstance::Cone(cone) => {
            let (d, mu) = (gen.d.expect("d"), gen.mu_a.expect("mu_A"));
            let n = cone.generators.len() as u64;
            let (k, sel) = pick(k_for_cone(n, d, mu, 1.0 - cfg.delta, c))?;
            (k, sel, None, 1.0 - cone_success_bound(n, k, d, mu, c)?.bound)
        }
        SetInstance::Integer(f) => {
            let b_bound = f.b_bound().to_u64().ok_or_else(|| Error::OutOfRange("B too large".into()))?;
            let (k, sel) = pick(k_for_integer_fiber(f.cols() as u64, b_bound, cfg.delta, c))?;
            let z = enumerate_fiber(f).len() as f64;
            (k, sel, None, (2.0 * z * (-c.c_jl * k as f64).exp()).min(1.0))
        }
    };
    Ok(Prepared { gen, k, selection, tau, theoretical_delta: theoretical_delta.clamp(0.0, 1.0) })
}

/// Runs `cfg.trials` independent projections of one generated non-member
/// instance and counts `NotSeparated` outcomes.
pub fn estimate_failure(cfg: &ExperimentConfig) -> Result<EmpiricalReport> {
    let prep = prepare(cfg)?;
    let tau = prep.tau.unwrap_or(DECISION_TOL);
    let failures: u64 = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(cfg.master_seed, i);
            let dec = decide_with_k(&prep.gen.instance, prep.gen.query.as_ref(), prep.k, tau, seed)?;
            match dec.outcome {
                Outcome::NotSeparated => Ok(1),
                Outcome::Separated => Ok(0),
                Outcome::OriginalMember => Err(contract("instance is a member of its set".into())),
            }
        })
        .collect::<Result<Vec<u64>>>()?
        .into_iter()
        .sum();
    let (lower, upper) = wilson_interval(failures, cfg.trials, WILSON_Z_99);
    Ok(EmpiricalReport {
        failures,
        trials: cfg.trials,
        rate: failures as f64 / cfg.trials as f64,
        wilson_99_lower: lower,
        wilson_99_upper: upper,
        delta: cfg.delta,
        theoretical_delta: prep.theoretical_delta,
        metadata: ReportMetadata {
            class: prep.gen.instance.class_name().into(),
            k: prep.k,
            selection: prep.selection,
            constants: cfg.constants,
            instance_hash: instance_hash(&prep.gen),
            master_seed: cfg.master_seed,
            d: prep.gen.d,
            tau: prep.tau,
        },
    })
}

/// Empirical `Prob(||T a|| <= delta)` for a unit vector `a` and an unscaled
/// `k x 1` Gaussian `T`, next to [`small_norm_prob_bound`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmallNormRow {
    pub k: usize,
    pub delta: f64,
    pub hits: u64,
    pub samples: u64,
    pub rate: f64,
    pub bound: f64,
}

pub fn small_norm_rates(ks: &[usize], deltas: &[f64], samples: u64, master_seed: u64) -> Result<Vec<SmallNormRow>> {
    if samples == 0 {
        return Err(Error::InvalidSpec("samples must be at least 1".into()));
    }
    let a = Vector::new(vec![1.0])?;
    let mut out = Vec::new();
    for &k in ks {
        let bounds: Vec<f64> = deltas.iter().map(|&d| small_norm_prob_bound(k, d)).collect::<Result<_>>()?;
        let stream = derive_seed(master_seed, k as u64);
        let hits = (0..samples)
            .into_par_iter()
            .map(|i| {
                let t = sample_projection(ProjectionSpec::gaussian(1, k, derive_seed(stream, i)))?;
                let norm = t.apply(&a)?.norm();
                Ok(deltas.iter().map(|&d| u64::from(norm <= d)).collect::<Vec<u64>>())
            })
            .try_reduce(
                || vec![0; deltas.len()],
                |x, y| Ok(x.iter().zip(&y).map(|(a, b)| a + b).collect()),
            )?;
        for ((&delta, &bound), hits) in deltas.iter().zip(&bounds).zip(hits) {
            out.push(SmallNormRow { k, delta, hits, samples, rate: hits as f64 / samples as f64, bound });
        }
    }
    Ok(out)
}

/// Quantiles of a sample, by the nearest-rank rule.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Quantiles {
    pub min: f64,
    pub p01: f64,
    pub p10: f64,
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
    pub max: f64,
}

impl Quantiles {
    fn of(sorted: &[f64]) -> Self {
        let q = |p: f64| {
            let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
            sorted[rank - 1]
        };
        Self {
            min: sorted[0],
            p01: q(0.01),
            p10: q(0.1),
            p50: q(0.5),
            p90: q(0.9),
            p99: q(0.99),
            max: sorted[sorted.len() - 1],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ToleranceRow {
    pub tolerance: f64,
    /// Trials whose relative gap is below `tolerance`, i.e. trials a
    /// tolerance-based check would call feasible.
    pub below: u64,
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactCompanion {
    pub k: usize,
    pub separated: u64,
    pub trials: u64,
    pub rate: f64,
    pub wilson_99_lower: f64,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IfpReport {
    pub trials: u64,
    pub lattice_size: usize,
    /// `g / (||t|| max(1, ||b||))` for the one-row Gaussian `t`.
    pub relative_gap: Quantiles,
    pub tolerances: Vec<ToleranceRow>,
    pub exact: ExactCompanion,
    pub instance_hash: String,
    pub master_seed: u64,
}

fn to_f64(v: &BigInt) -> Result<f64> {
    v.to_f64().filter(|x| x.is_finite()).ok_or_else(|| Error::OutOfRange(format!("{v} is not representable")))
}

/// `min_x |t^T A x - t^T b|` over `lattice`, in floating point.
pub fn float_gap(a: &[Vec<BigInt>], b: &IntVector, lattice: &[IntVector], t: &[f64]) -> Result<f64> {
    if t.len() != a.len() || b.dim() != a.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: t.len() });
    }
    let n = a.first().map_or(0, |r| r.len());
    let mut ta = vec![0.0; n];
    let mut tb = 0.0;
    for (l, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            ta[j] += t[l] * to_f64(v)?;
        }
        tb += t[l] * to_f64(&b[l])?;
    }
    let mut best = f64::INFINITY;
    for x in lattice {
        let mut s = 0.0;
        for (c, v) in ta.iter().zip(x.as_slice()) {
            s += c * to_f64(v)?;
        }
        best = best.min((s - tb).abs());
    }
    Ok(best)
}

/// Projects an infeasible bounded integer program with a one-row Gaussian
/// map and records how close the projected program comes to feasibility
/// over the box lattice; the same trials are then decided on the exact
/// Rademacher path.
pub fn reproduce_ifp_float(cfg: &ExperimentConfig) -> Result<IfpReport> {
    cfg.validate()?;
    let InstanceSpec::Integer { box_upper, .. } = cfg.instance else {
        return Err(Error::InvalidSpec("the gap experiment needs an integer instance".into()));
    };
    let upper = box_upper.ok_or_else(|| Error::InvalidSpec("the gap experiment needs box_upper".into()))?;
    if upper < 0 {
        return Err(Error::Precondition("box is empty".into()));
    }
    let gen = generate(&cfg.instance)?;
    let SetInstance::Integer(fiber) = &gen.instance else { unreachable!("integer spec") };
    let lattice = enumerate_box(fiber.bounds().expect("box was set"))?;
    let b = fiber.rhs();
    if lattice.iter().any(|x| fiber.apply(x) == *b) {
        return Err(contract("integer program is feasible on its box".into()));
    }
    let b_norm = b.as_slice().iter().map(to_f64).collect::<Result<Vec<_>>>()?;
    let b_norm = crate::linalg::norm(&b_norm).max(1.0);
    let m = fiber.rows();

    let mut gaps = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let t = sample_projection(ProjectionSpec::gaussian(m, 1, derive_seed(cfg.master_seed, i)))?;
            let row = t.to_row_major();
            let g = float_gap(fiber.matrix(), b, &lattice, &row)?;
            Ok(g / (crate::linalg::norm(&row) * b_norm))
        })
        .collect::<Result<Vec<f64>>>()?;
    gaps.sort_by(f64::total_cmp);
    let tolerances = IFP_TOLERANCES
        .iter()
        .map(|&tol| {
            let below = gaps.iter().filter(|&&g| g < tol).count() as u64;
            ToleranceRow { tolerance: tol, below, fraction: below as f64 / cfg.trials as f64 }
        })
        .collect();

    let b_bound = fiber.b_bound().to_u64().ok_or_else(|| Error::OutOfRange("B too large".into()))?;
    let k = match cfg.k {
        KChoice::Fixed(k) => k,
        KChoice::Selector => k_for_integer_fiber(fiber.cols() as u64, b_bound, cfg.delta, &cfg.constants)?.k,
    };
    let separated: u64 = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let dec = decide_with_k(&gen.instance, None, k, 0.0, derive_seed(cfg.master_seed, i))?;
            Ok(u64::from(dec.outcome == Outcome::Separated))
        })
        .collect::<Result<Vec<u64>>>()?
        .into_iter()
        .sum();
    let (lower, _) = wilson_interval(separated, cfg.trials, WILSON_Z_99);
    Ok(IfpReport {
        trials: cfg.trials,
        lattice_size: lattice.len(),
        relative_gap: Quantiles::of(&gaps),
        tolerances,
        exact: ExactCompanion {
            k,
            separated,
            trials: cfg.trials,
            rate: separated as f64 / cfg.trials as f64,
            wilson_99_lower: lower,
            delta: cfg.delta,
        },
        instance_hash: instance_hash(&gen),
        master_seed: cfg.master_seed,
    })
}

/// Failure model used by [`calibrate_c`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationClass {
    /// Failure iff `k` fair coins all land heads: rate exactly `2^-k`.
    Synthetic,
    /// The experiment's instance at each `k` of the grid.
    Experiment(Box<ExperimentConfig>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    pub class: CalibrationClass,
    pub k_grid: Vec<usize>,
    pub trials: u64,
    #[serde(default)]
    pub master_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CalibrationPoint {
    pub k: usize,
    pub failures: u64,
    pub trials: u64,
    pub rate: f64,
    pub wilson_99_upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Fit {
    /// Fitted decay rate `C` in `ln(rate) = a - C k`.
    pub c_hat: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points_used: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub points: Vec<CalibrationPoint>,
    /// `None` when fewer than two grid values saw a failure.
    pub fit: Option<Fit>,
    /// `max_k -ln(wilson_99_upper_k) / k`: a lower bound on `C` when the
    /// intercept is taken as `0`.
    pub c_lower_bound: f64,
    pub diagnostic: Option<String>,
}

fn least_squares(points: &[(f64, f64)]) -> Fit {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Fit { c_hat: -slope, intercept: my - slope * mx, r_squared, points_used: points.len() }
}

/// Measures the failure rate at each `k` of the grid and fits
/// `ln(rate) = a - C k` over the grid values with at least one failure.
pub fn calibrate_c(cfg: &CalibrationConfig) -> Result<CalibrationReport> {
    let mut grid = cfg.k_grid.clone();
    grid.sort_unstable();
    grid.dedup();
    if grid.len() < 3 {
        return Err(Error::Precondition("k_grid needs at least 3 distinct values".into()));
    }
    if grid[0] == 0 || cfg.trials == 0 {
        return Err(Error::InvalidSpec("k values and trials must be positive".into()));
    }
    let mut points = Vec::with_capacity(grid.len());
    for &k in &grid {
        let stream = derive_seed(cfg.master_seed, k as u64);
        let failures = match &cfg.class {
            CalibrationClass::Synthetic => (0..cfg.trials)
                .into_par_iter()
                .map(|i| {
                    let mut rng = rng_from_seed(derive_seed(stream, i));
                    u64::from((0..k).all(|_| rng.random::<bool>()))
                })
                .sum(),
            CalibrationClass::Experiment(exp) => {
                let run = ExperimentConfig {
                    trials: cfg.trials,
                    k: KChoice::Fixed(k),
                    master_seed: stream,
                    ..(**exp).clone()
                };
                estimate_failure(&run)?.failures
            }
        };
        let (_, upper) = wilson_interval(failures, cfg.trials, WILSON_Z_99);
        points.push(CalibrationPoint {
            k,
            failures,
            trials: cfg.trials,
            rate: failures as f64 / cfg.trials as f64,
            wilson_99_upper: upper,
        });
    }
    let c_lower_bound = points.iter().map(|p| -p.wilson_99_upper.ln() / p.k as f64).fold(0.0, f64::max);
    let usable: Vec<(f64, f64)> = points.iter().filter(|p| p.failures > 0).map(|p| (p.k as f64, p.rate.ln())).collect();
    let (fit, diagnostic) = if usable.len() >= 2 {
        (Some(least_squares(&usable)), None)
    } else {
        let msg = format!(
            "cannot fit: {} of {} grid values saw a failure; C >= {c_lower_bound}",
            usable.len(),
            points.len()
        );
        (None, Some(msg))
    };
    Ok(CalibrationReport { points, fit, c_lower_bound, diagnostic })
}

/// Sequential failure count over the trial indices in `order`; equals
/// `estimate_failure(cfg).failures` for any permutation of `0..trials`.
pub fn failures_in_order(cfg: &ExperimentConfig, order: &[u64]) -> Result<u64> {
    let prep = prepare(cfg)?;
    let tau = prep.tau.unwrap_or(DECISION_TOL);
    let mut failures = 0;
    for &i in order {
        let dec = decide_with_k(&prep.gen.instance, prep.gen.query.as_ref(), prep.k, tau, derive_seed(cfg.master_seed, i))?;
        failures += u64::from(dec.outcome == Outcome::NotSeparated);
    }
    Ok(failures)
}
