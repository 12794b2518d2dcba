//! Integer-fiber separation under a Rademacher projection.
//!
//! Everything here works on `BigInt` and `i8` signs; no floating-point value
//! is created or consumed.

#![deny(clippy::float_arithmetic)]

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::geometry::{enumerate_fiber, IntegerFiber};
use crate::linalg::{IntVector, SignMatrix};

/// Outcome of the exact test. `Eq + Hash` rules out floating-point fields.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ExactVerdict {
    /// The fiber over the positive row is empty.
    EmptyFiber,
    /// Some fiber point solves the remaining rows.
    OriginalMember { fiber_size: usize },
    /// Every fiber point misses `T b~` by at least `gap` in the max norm.
    Separated { gap: BigInt, fiber_size: usize },
    /// Some fiber point is mapped exactly onto `T b~`.
    NotSeparated { fiber_size: usize },
}

pub fn separate(fiber: &IntegerFiber, signs: SignMatrix<'_>) -> Result<ExactVerdict> {
    if fiber.rows() < 2 {
        return Err(Error::Precondition("A needs a row besides the positive row".into()));
    }
    if signs.cols() != fiber.rows() - 1 {
        return Err(Error::DimensionMismatch { expected: fiber.rows() - 1, found: signs.cols() });
    }
    let points = enumerate_fiber(fiber);
    let fiber_size = points.len();
    if points.is_empty() {
        return Ok(ExactVerdict::EmptyFiber);
    }
    let n = fiber.cols();
    let target = fiber.reduced_rhs();
    let columns: Vec<IntVector> = (0..n).map(|j| fiber.reduced_column(j)).collect();
    if points.iter().any(|x| combination(&columns, x) == target) {
        return Ok(ExactVerdict::OriginalMember { fiber_size });
    }

    let projected_target = signs.apply(&target)?;
    let projected: Vec<IntVector> = columns.iter().map(|c| signs.apply(c)).collect::<Result<_>>()?;
    let mut smallest: Option<BigInt> = None;
    for x in &points {
        let image = combination(&projected, x);
        let gap = image
            .as_slice()
            .iter()
            .zip(projected_target.as_slice())
            .map(|(a, b)| (a - b).abs())
            .max()
            .unwrap_or_default();
        if gap.is_zero() {
            return Ok(ExactVerdict::NotSeparated { fiber_size });
        }
        if smallest.as_ref().is_none_or(|s| gap < *s) {
            smallest = Some(gap);
        }
    }
    Ok(ExactVerdict::Separated { gap: smallest.expect("fiber is nonempty"), fiber_size })
}

/// `Σ_j x_j c_j`.
fn combination(columns: &[IntVector], x: &IntVector) -> IntVector {
    let len = columns[0].dim();
    let mut acc = vec![BigInt::zero(); len];
    for (c, xj) in columns.iter().zip(x.as_slice()) {
        if xj.is_zero() {
            continue;
        }
        for (a, v) in acc.iter_mut().zip(c.as_slice()) {
            *a += v * xj;
        }
    }
    IntVector::new(acc)
}
