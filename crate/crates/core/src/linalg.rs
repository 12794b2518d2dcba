//! Dense vectors, seeded randomness and the Gaussian/Rademacher projection
//! operators.
//!
//! Every projection matrix is a pure function of its [`ProjectionSpec`]:
//! entries are drawn in row-major order from a ChaCha8 stream keyed by
//! `spec.seed` (via `SeedableRng::seed_from_u64`). Gaussian entries use the
//! Ziggurat sampler of `rand_distr::StandardNormal`; Rademacher entries take
//! the low bit of one `bool` draw per entry.

use std::fmt;

use num_bigint::BigInt;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seeded generator used everywhere randomness is needed.
pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `index`-th independent stream under `master`.
///
/// Distinct indices give distinct seeds for a fixed master because both
/// mixing steps are bijections of `u64`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ index)
}

/// A finite real vector of length at least one.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty("vector"));
        }
        if let Some(index) = entries.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self(entries))
    }

    pub fn zeros(len: usize) -> Result<Self> {
        Self::new(vec![0.0; len])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        dot(&self.0, &other.0)
    }

    /// `self - other`; panics on length mismatch.
    pub fn sub(&self, other: &Vector) -> Vector {
        assert_eq!(self.dim(), other.dim(), "vector length mismatch");
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scaled(&self, alpha: f64) -> Vector {
        Vector(self.0.iter().map(|x| alpha * x).collect())
    }

    pub fn add(&self, other: &Vector) -> Vector {
        assert_eq!(self.dim(), other.dim(), "vector length mismatch");
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn dist(&self, other: &Vector) -> f64 {
        dist_sq(&self.0, &other.0).sqrt()
    }

    pub fn dist_sq(&self, other: &Vector) -> f64 {
        dist_sq(&self.0, &other.0)
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.0).finish()
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Vector::new(v)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Exact integer vector backed by arbitrary-precision integers.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IntVector(Vec<BigInt>);

impl IntVector {
    pub fn new(entries: Vec<BigInt>) -> Self {
        Self(entries)
    }

    pub fn from_i64(entries: &[i64]) -> Self {
        Self(entries.iter().map(|&x| BigInt::from(x)).collect())
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![BigInt::zero(); len])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[BigInt] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<BigInt> {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Zero::is_zero)
    }
}

impl std::ops::Index<usize> for IntVector {
    type Output = BigInt;
    fn index(&self, i: usize) -> &BigInt {
        &self.0[i]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    Gaussian,
    Rademacher,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// Raw entries: N(0,1) or ±1.
    #[default]
    None,
    /// Image multiplied by 1/sqrt(k).
    InvSqrtK,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProjectionSpec {
    pub m: usize,
    pub k: usize,
    pub distribution: Distribution,
    #[serde(default)]
    pub scaling: Scaling,
    pub seed: u64,
}

impl ProjectionSpec {
    pub fn new(m: usize, k: usize, distribution: Distribution, seed: u64) -> Self {
        Self { m, k, distribution, scaling: Scaling::None, seed }
    }

    pub fn gaussian(m: usize, k: usize, seed: u64) -> Self {
        Self::new(m, k, Distribution::Gaussian, seed)
    }

    pub fn rademacher(m: usize, k: usize, seed: u64) -> Self {
        Self::new(m, k, Distribution::Rademacher, seed)
    }

    pub fn with_scaling(mut self, scaling: Scaling) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidSpec("target dimension k must be positive".into()));
        }
        if self.m == 0 {
            return Err(Error::InvalidSpec("source dimension m must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Entries {
    Real(Vec<f64>),
    Sign(Vec<i8>),
}

/// A sampled k×m projection matrix, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionMatrix {
    spec: ProjectionSpec,
    entries: Entries,
}

/// Borrowed view of a Rademacher matrix; the exact integer path only ever
/// sees this type.
#[derive(Clone, Copy, Debug)]
pub struct SignMatrix<'a> {
    rows: usize,
    cols: usize,
    signs: &'a [i8],
}

impl<'a> SignMatrix<'a> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn sign(&self, row: usize, col: usize) -> i8 {
        self.signs[row * self.cols + col]
    }

    pub fn apply(&self, v: &IntVector) -> Result<IntVector> {
        if v.dim() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, found: v.dim() });
        }
        let out = self
            .signs
            .chunks_exact(self.cols)
            .map(|row| {
                row.iter().zip(v.as_slice()).fold(BigInt::zero(), |mut acc, (&s, x)| {
                    if s > 0 {
                        acc += x;
                    } else {
                        acc -= x;
                    }
                    acc
                })
            })
            .collect();
        Ok(IntVector(out))
    }
}

/// Samples the k×m matrix described by `spec`.
pub fn sample_projection(spec: ProjectionSpec) -> Result<ProjectionMatrix> {
    spec.validate()?;
    let len = spec.k * spec.m;
    let mut rng = rng_from_seed(spec.seed);
    let entries = match spec.distribution {
        Distribution::Gaussian => {
            Entries::Real((0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        }
        Distribution::Rademacher => {
            Entries::Sign((0..len).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect())
        }
    };
    Ok(ProjectionMatrix { spec, entries })
}

impl ProjectionMatrix {
    /// Builds a matrix from explicit row-major entries. Rademacher matrices
    /// must have every entry equal to ±1.
    pub fn from_rows(spec: ProjectionSpec, rows: &[Vec<f64>]) -> Result<Self> {
        spec.validate()?;
        if rows.len() != spec.k {
            return Err(Error::DimensionMismatch { expected: spec.k, found: rows.len() });
        }
        let mut flat = Vec::with_capacity(spec.k * spec.m);
        for row in rows {
            if row.len() != spec.m {
                return Err(Error::DimensionMismatch { expected: spec.m, found: row.len() });
            }
            flat.extend_from_slice(row);
        }
        if let Some(index) = flat.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let entries = match spec.distribution {
            Distribution::Gaussian => Entries::Real(flat),
            Distribution::Rademacher => {
                let mut signs = Vec::with_capacity(flat.len());
                for x in flat {
                    signs.push(match x {
                        1.0 => 1,
                        -1.0 => -1,
                        _ => return Err(Error::InvalidSpec(format!("Rademacher entry {x} is not ±1"))),
                    });
                }
                Entries::Sign(signs)
            }
        };
        Ok(Self { spec, entries })
    }

    pub fn spec(&self) -> &ProjectionSpec {
        &self.spec
    }

    pub fn k(&self) -> usize {
        self.spec.k
    }

    pub fn m(&self) -> usize {
        self.spec.m
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        let i = row * self.spec.m + col;
        match &self.entries {
            Entries::Real(v) => v[i],
            Entries::Sign(s) => f64::from(s[i]),
        }
    }

    /// Row-major copy of the raw (unscaled) entries.
    pub fn to_row_major(&self) -> Vec<f64> {
        match &self.entries {
            Entries::Real(v) => v.clone(),
            Entries::Sign(s) => s.iter().map(|&x| f64::from(x)).collect(),
        }
    }

    /// The exact view, available only for unscaled Rademacher matrices.
    pub fn as_signs(&self) -> Result<SignMatrix<'_>> {
        match (&self.entries, self.spec.scaling) {
            (Entries::Sign(signs), Scaling::None) => {
                Ok(SignMatrix { rows: self.spec.k, cols: self.spec.m, signs })
            }
            _ => Err(Error::UnsupportedExactPath),
        }
    }

    fn scale_factor(&self) -> f64 {
        match self.spec.scaling {
            Scaling::None => 1.0,
            Scaling::InvSqrtK => 1.0 / (self.spec.k as f64).sqrt(),
        }
    }

    /// Floating-point image `T v`.
    pub fn apply(&self, v: &Vector) -> Result<Vector> {
        if v.dim() != self.spec.m {
            return Err(Error::DimensionMismatch { expected: self.spec.m, found: v.dim() });
        }
        Ok(Vector(self.apply_slice(v.as_slice())))
    }

    pub(crate) fn apply_slice(&self, v: &[f64]) -> Vec<f64> {
        let m = self.spec.m;
        let mut out: Vec<f64> = match &self.entries {
            Entries::Real(e) => e.chunks_exact(m).map(|row| dot(row, v)).collect(),
            Entries::Sign(s) => s
                .chunks_exact(m)
                .map(|row| row.iter().zip(v).map(|(&s, x)| if s > 0 { *x } else { -*x }).sum())
                .collect(),
        };
        let scale = self.scale_factor();
        if scale != 1.0 {
            out.iter_mut().for_each(|x| *x *= scale);
        }
        out
    }

    /// Exact integer image; only for unscaled Rademacher matrices.
    pub fn apply_exact(&self, v: &IntVector) -> Result<IntVector> {
        self.as_signs()?.apply(v)
    }
}
