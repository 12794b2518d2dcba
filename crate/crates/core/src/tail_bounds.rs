//! Closed-form failure bounds for projected membership and the matching
//! projection-dimension selectors.
//!
//! Logarithms are natural except in the doubling selector's `log2(lambda)`
//! term. Every constant the bounds leave unspecified lives in
//! [`ConstantConfig`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of grid points used when maximising the polytope bound over ε.
pub const POLYTOPE_EPS_GRID: usize = 10_000;

/// Tunable constants of the selectors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantConfig {
    /// Exponent constant of the JL-type bounds (`exp(-C k)` and friends).
    #[serde(default = "default_c_jl")]
    pub c_jl: f64,
    /// Multiplier of the doubling-dimension selector.
    #[serde(default = "default_c_doubling")]
    pub c_doubling: f64,
    /// Admissible thresholds satisfy `tau < kappa * d`.
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    /// Floor applied to every selector.
    #[serde(default = "default_k_min")]
    pub k_min: usize,
}

fn default_c_jl() -> f64 {
    1.0 / 32.0
}
fn default_c_doubling() -> f64 {
    8.0
}
fn default_kappa() -> f64 {
    0.5
}
fn default_k_min() -> usize {
    3
}

impl Default for ConstantConfig {
    fn default() -> Self {
        Self {
            c_jl: default_c_jl(),
            c_doubling: default_c_doubling(),
            kappa: default_kappa(),
            k_min: default_k_min(),
        }
    }
}

impl ConstantConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_jl > 0.0 && self.c_jl.is_finite()) {
            return Err(Error::OutOfRange(format!("c_jl = {} must be positive", self.c_jl)));
        }
        if !(self.c_doubling > 0.0 && self.c_doubling.is_finite()) {
            return Err(Error::OutOfRange(format!(
                "c_doubling = {} must be positive",
                self.c_doubling
            )));
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::OutOfRange(format!("kappa = {} must lie in (0, 1)", self.kappa)));
        }
        if self.k_min < 3 {
            return Err(Error::OutOfRange(format!("k_min = {} must be at least 3", self.k_min)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    FiniteThreshold,
    IntegerFiber,
    Polytope,
    Cone,
    DoublingExact,
    DoublingThreshold,
}

/// Inputs a selector consumed; unused fields stay `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionInputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, rename = "D", skip_serializing_if = "Option::is_none")]
    pub big_d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, rename = "B", skip_serializing_if = "Option::is_none")]
    pub b_bound: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set_size: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KSelection {
    pub k: usize,
    pub rule: SelectionRule,
    pub inputs: SelectionInputs,
    pub constants: ConstantConfig,
}

/// `ceil(x)`, except that values within 1e-9 (relative) of an integer snap
/// to it so that exact ratios such as `ln(1e5)/ln(10)` give 5, not 6.
fn ceil_snapped(x: f64) -> usize {
    let r = x.round();
    let v = if (x - r).abs() <= 1e-9 * x.abs().max(1.0) { r } else { x.ceil() };
    if v <= 0.0 {
        0
    } else {
        v as usize
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("delta = {delta} must lie in (0, 1)")))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("{name} = {v} must be positive")))
    }
}

/// Upper bound `(z e^{1-z})^{k/2}`, `z = x/k`, on the χ²_k CDF at `x`.
pub fn chi2_cdf_upper(k: usize, x: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::OutOfRange("k must be positive".into()));
    }
    let kf = k as f64;
    if !(x > 0.0) || x >= kf {
        return Err(Error::OutOfRange(format!("x = {x} must lie in (0, k = {k})")));
    }
    let z = x / kf;
    Ok((z * (1.0 - z).exp()).powf(kf / 2.0))
}

/// Upper bound on `Prob(||T a|| <= delta)` for a unit vector `a` and an
/// unscaled Gaussian `T` with `k` rows.
///
/// Minimum of `(e delta^2 / k)^{k/2}` and, for `k >= 3`, `delta^k`.
pub fn small_norm_prob_bound(k: usize, delta: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::OutOfRange("k must be positive".into()));
    }
    check_delta(delta)?;
    let kf = k as f64;
    let chi = (std::f64::consts::E * delta * delta / kf).powf(kf / 2.0);
    if k >= 3 {
        Ok(chi.min(delta.powi(k as i32)))
    } else {
        Ok(chi)
    }
}

/// Smallest `k` with `|X| (tau/d)^k <= delta`, floored at `k_min`.
pub fn k_for_finite_threshold(
    set_size: u64,
    delta: f64,
    tau: f64,
    d: f64,
    cfg: &ConstantConfig,
) -> Result<KSelection> {
    cfg.validate()?;
    check_delta(delta)?;
    check_positive("tau", tau)?;
    check_positive("d", d)?;
    if set_size == 0 {
        return Err(Error::OutOfRange("set size must be positive".into()));
    }
    if tau >= d {
        return Err(Error::ThresholdTooLarge { tau, limit: d });
    }
    let raw = ((set_size as f64) / delta).ln() / (d / tau).ln();
    Ok(KSelection {
        k: ceil_snapped(raw).max(cfg.k_min),
        rule: SelectionRule::FiniteThreshold,
        inputs: SelectionInputs {
            delta: Some(delta),
            tau: Some(tau),
            d: Some(d),
            set_size: Some(set_size),
            ..Default::default()
        },
        constants: *cfg,
    })
}

/// `k = ceil((ln(2/delta) + B ln(n+B-1)) / C_jl)`, floored at `k_min`.
pub fn k_for_integer_fiber(n: u64, b_bound: u64, delta: f64, cfg: &ConstantConfig) -> Result<KSelection> {
    cfg.validate()?;
    check_delta(delta)?;
    if n == 0 || b_bound == 0 {
        return Err(Error::OutOfRange("n and B must be positive".into()));
    }
    let bf = b_bound as f64;
    let raw = ((2.0 / delta).ln() + bf * ((n + b_bound - 1) as f64).ln()) / cfg.c_jl;
    Ok(KSelection {
        k: ceil_snapped(raw).max(cfg.k_min),
        rule: SelectionRule::IntegerFiber,
        inputs: SelectionInputs {
            delta: Some(delta),
            n: Some(n),
            b_bound: Some(b_bound),
            ..Default::default()
        },
        constants: *cfg,
    })
}

/// A success-probability lower bound together with the ε that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessBound {
    pub bound: f64,
    pub epsilon: f64,
}

fn eps_gain(eps: f64) -> f64 {
    eps * eps - eps * eps * eps
}

/// Best ε on a grid inside `(0, cap)`: points `cap (1 - rho^i)` geometric in
/// the distance to the ceiling, plus the unconstrained maximiser 2/3 when it
/// lies below the ceiling.
fn best_polytope_eps(cap: f64) -> f64 {
    let rho = (1e-12f64).ln() / POLYTOPE_EPS_GRID as f64;
    let mut best = (f64::NEG_INFINITY, 0.0);
    let candidates = (2.0 / 3.0 < cap)
        .then_some(2.0 / 3.0)
        .into_iter()
        .chain((1..=POLYTOPE_EPS_GRID).map(|i| cap * (1.0 - (rho * i as f64).exp())));
    for eps in candidates {
        if !(eps > 0.0 && eps < cap) {
            continue;
        }
        let g = eps_gain(eps);
        if g > best.0 {
            best = (g, eps);
        }
    }
    best.1
}

fn union_bound(pairs: f64, c: f64, eps: f64, k: usize) -> f64 {
    (1.0 - pairs * (-c * eps_gain(eps) * k as f64).exp()).clamp(0.0, 1.0)
}

fn polytope_eps(d: f64, big_d: f64) -> Result<f64> {
    check_positive("d", d)?;
    check_positive("D", big_d)?;
    if d > big_d {
        return Err(Error::InconsistentGeometry { d, big_d });
    }
    Ok(best_polytope_eps((d * d) / (big_d * big_d)))
}

/// Lower bound `1 - 2n^2 exp(-C (ε²-ε³) k)` on `Prob(T b ∉ T C)` for a
/// polytope with `n` vertices, maximised over ε < d²/D².
pub fn polytope_success_bound(
    n: u64,
    k: usize,
    d: f64,
    big_d: f64,
    cfg: &ConstantConfig,
) -> Result<SuccessBound> {
    cfg.validate()?;
    if n == 0 || k == 0 {
        return Err(Error::OutOfRange("n and k must be positive".into()));
    }
    let eps = polytope_eps(d, big_d)?;
    let nf = n as f64;
    Ok(SuccessBound { bound: union_bound(2.0 * nf * nf, cfg.c_jl, eps, k), epsilon: eps })
}

fn cone_eps(d: f64, mu_a: f64) -> Result<f64> {
    check_positive("d", d)?;
    if d > 1.0 {
        return Err(Error::ConventionViolation(format!("d = {d} exceeds 1 for unit-norm data")));
    }
    if !(mu_a >= 0.0 && mu_a.is_finite()) {
        return Err(Error::OutOfRange(format!("mu_A = {mu_a} must be nonnegative")));
    }
    Ok(d * d / (mu_a * mu_a + 2.0 * (1.0 - d * d).sqrt() * mu_a + 1.0))
}

/// Lower bound `1 - 2n(n+1) exp(-C (ε²-ε³) k)` for a cone with `n` unit
/// generators, with ε = d² / (μ_A² + 2 sqrt(1-d²) μ_A + 1).
pub fn cone_success_bound(
    n: u64,
    k: usize,
    d: f64,
    mu_a: f64,
    cfg: &ConstantConfig,
) -> Result<SuccessBound> {
    cfg.validate()?;
    if n == 0 || k == 0 {
        return Err(Error::OutOfRange("n and k must be positive".into()));
    }
    let eps = cone_eps(d, mu_a)?;
    let nf = n as f64;
    Ok(SuccessBound { bound: union_bound(2.0 * nf * (nf + 1.0), cfg.c_jl, eps, k), epsilon: eps })
}

fn check_target(target: f64) -> Result<()> {
    if target > 0.0 && target < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("target = {target} must lie in (0, 1)")))
    }
}

/// Smallest k at which `1 - pairs * exp(-C g k) >= target`.
fn invert_union_bound(pairs: f64, c: f64, gain: f64, target: f64) -> Result<usize> {
    if !(gain > 0.0) {
        return Err(Error::OutOfRange("epsilon makes the bound vacuous (eps^2 - eps^3 = 0)".into()));
    }
    let raw = (pairs / (1.0 - target)).ln() / (c * gain);
    let mut k = ceil_snapped(raw).max(1);
    while 1.0 - pairs * (-c * gain * k as f64).exp() < target {
        k += 1;
    }
    Ok(k)
}

/// Smallest k whose polytope bound reaches `target`.
pub fn k_for_polytope(
    n: u64,
    d: f64,
    big_d: f64,
    target: f64,
    cfg: &ConstantConfig,
) -> Result<KSelection> {
    cfg.validate()?;
    check_target(target)?;
    if n == 0 {
        return Err(Error::OutOfRange("n must be positive".into()));
    }
    let eps = polytope_eps(d, big_d)?;
    let nf = n as f64;
    let k = invert_union_bound(2.0 * nf * nf, cfg.c_jl, eps_gain(eps), target)?;
    Ok(KSelection {
        k: k.max(cfg.k_min),
        rule: SelectionRule::Polytope,
        inputs: SelectionInputs {
            delta: Some(1.0 - target),
            d: Some(d),
            big_d: Some(big_d),
            n: Some(n),
            epsilon: Some(eps),
            target: Some(target),
            ..Default::default()
        },
        constants: *cfg,
    })
}

/// Smallest k whose cone bound reaches `target`.
pub fn k_for_cone(n: u64, d: f64, mu_a: f64, target: f64, cfg: &ConstantConfig) -> Result<KSelection> {
    cfg.validate()?;
    check_target(target)?;
    if n == 0 {
        return Err(Error::OutOfRange("n must be positive".into()));
    }
    let eps = cone_eps(d, mu_a)?;
    let nf = n as f64;
    let k = invert_union_bound(2.0 * nf * (nf + 1.0), cfg.c_jl, eps_gain(eps), target)?;
    Ok(KSelection {
        k: k.max(cfg.k_min),
        rule: SelectionRule::Cone,
        inputs: SelectionInputs {
            delta: Some(1.0 - target),
            d: Some(d),
            mu_a: Some(mu_a),
            n: Some(n),
            epsilon: Some(eps),
            target: Some(target),
            ..Default::default()
        },
        constants: *cfg,
    })
}

/// Threshold selector for sets of doubling constant `lambda`:
/// `max(k_min, ceil(C ln(lambda/delta)/ln(d/tau)), ceil(C log2 lambda))`.
pub fn k_for_doubling(
    lambda: f64,
    delta: f64,
    tau: f64,
    d: f64,
    cfg: &ConstantConfig,
) -> Result<KSelection> {
    cfg.validate()?;
    check_delta(delta)?;
    check_positive("tau", tau)?;
    check_positive("d", d)?;
    if !(lambda >= 1.0 && lambda.is_finite()) {
        return Err(Error::OutOfRange(format!("lambda = {lambda} must be at least 1")));
    }
    let limit = cfg.kappa * d;
    if tau >= limit {
        return Err(Error::ThresholdTooLarge { tau, limit });
    }
    let threshold = ceil_snapped(cfg.c_doubling * (lambda / delta).ln() / (d / tau).ln());
    let dimension = ceil_snapped(cfg.c_doubling * lambda.log2());
    Ok(KSelection {
        k: threshold.max(dimension).max(cfg.k_min),
        rule: SelectionRule::DoublingThreshold,
        inputs: SelectionInputs {
            delta: Some(delta),
            tau: Some(tau),
            d: Some(d),
            lambda: Some(lambda),
            ..Default::default()
        },
        constants: *cfg,
    })
}

/// Exact-membership selector `max(k_min, ceil(C log2 lambda))`.
pub fn k_for_doubling_exact(lambda: f64, cfg: &ConstantConfig) -> Result<KSelection> {
    cfg.validate()?;
    if !(lambda >= 1.0 && lambda.is_finite()) {
        return Err(Error::OutOfRange(format!("lambda = {lambda} must be at least 1")));
    }
    Ok(KSelection {
        k: ceil_snapped(cfg.c_doubling * lambda.log2()).max(cfg.k_min),
        rule: SelectionRule::DoublingExact,
        inputs: SelectionInputs { lambda: Some(lambda), ..Default::default() },
        constants: *cfg,
    })
}
