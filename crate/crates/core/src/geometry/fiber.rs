//! Integer fibers `{x in Z^n_+ : a^i . x = b_i}` of a row with positive
//! entries, and plain box lattices.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::linalg::IntVector;

/// Per-coordinate integer bounds `[lower_j, upper_j]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoxBounds {
    pub lower: Vec<BigInt>,
    pub upper: Vec<BigInt>,
}

impl BoxBounds {
    pub fn new(lower: Vec<BigInt>, upper: Vec<BigInt>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), found: upper.len() });
        }
        Ok(Self { lower, upper })
    }

    pub fn uniform(n: usize, lower: i64, upper: i64) -> Self {
        Self { lower: vec![BigInt::from(lower); n], upper: vec![BigInt::from(upper); n] }
    }

    /// Bounds clipped to the nonnegative orthant; `None` if some coordinate
    /// has no admissible value.
    fn clipped(&self) -> Option<Vec<(BigInt, BigInt)>> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| {
                let lo = l.clone().max(BigInt::zero());
                (lo <= *u).then(|| (lo, u.clone()))
            })
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.clipped().is_none()
    }
}

/// Integer system `A x = b` together with a row of positive entries that
/// makes the fiber over that row finite.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntegerFiber {
    a: Vec<Vec<BigInt>>,
    b: IntVector,
    positive_row: usize,
    bounds: Option<BoxBounds>,
}

impl IntegerFiber {
    pub fn new(a: Vec<Vec<BigInt>>, b: IntVector, positive_row: usize, bounds: Option<BoxBounds>) -> Result<Self> {
        let m = a.len();
        if m == 0 {
            return Err(Error::InvalidFiber("A has no rows".into()));
        }
        let n = a[0].len();
        if n == 0 {
            return Err(Error::InvalidFiber("A has no columns".into()));
        }
        if let Some(row) = a.iter().position(|r| r.len() != n) {
            return Err(Error::InvalidFiber(format!("row {row} of A has {} entries, expected {n}", a[row].len())));
        }
        if b.dim() != m {
            return Err(Error::InvalidFiber(format!("b has {} entries, A has {m} rows", b.dim())));
        }
        if positive_row >= m {
            return Err(Error::InvalidFiber(format!("positive_row {positive_row} out of range")));
        }
        if let Some(j) = a[positive_row].iter().position(|v| !v.is_positive()) {
            return Err(Error::InvalidFiber(format!(
                "entry {j} of positive row {positive_row} is {}, not positive",
                a[positive_row][j]
            )));
        }
        if b[positive_row].is_negative() {
            return Err(Error::InvalidFiber(format!("b[{positive_row}] is negative")));
        }
        if let Some(bx) = &bounds {
            if bx.lower.len() != n || bx.upper.len() != n {
                return Err(Error::InvalidFiber(format!("box must have {n} lower and upper bounds")));
            }
            if bx.is_empty() {
                return Err(Error::InvalidFiber("box is empty".into()));
            }
        }
        Ok(Self { a, b, positive_row, bounds })
    }

    pub fn from_i64(a: &[Vec<i64>], b: &[i64], positive_row: usize, bounds: Option<BoxBounds>) -> Result<Self> {
        let a = a.iter().map(|r| r.iter().map(|&v| BigInt::from(v)).collect()).collect();
        Self::new(a, IntVector::from_i64(b), positive_row, bounds)
    }

    pub fn rows(&self) -> usize {
        self.a.len()
    }

    pub fn cols(&self) -> usize {
        self.a[0].len()
    }

    pub fn matrix(&self) -> &[Vec<BigInt>] {
        &self.a
    }

    pub fn rhs(&self) -> &IntVector {
        &self.b
    }

    pub fn positive_row(&self) -> usize {
        self.positive_row
    }

    pub fn bounds(&self) -> Option<&BoxBounds> {
        self.bounds.as_ref()
    }

    /// `B = max(1, max_l |b_l|)`.
    pub fn b_bound(&self) -> BigInt {
        self.b.as_slice().iter().map(|v| v.abs()).max().unwrap_or_default().max(BigInt::one())
    }

    /// Column `j` with the positive row removed.
    pub fn reduced_column(&self, j: usize) -> IntVector {
        IntVector::new(
            self.a.iter().enumerate().filter(|(i, _)| *i != self.positive_row).map(|(_, r)| r[j].clone()).collect(),
        )
    }

    /// `b` with the positive row removed.
    pub fn reduced_rhs(&self) -> IntVector {
        IntVector::new(
            self.b.as_slice().iter().enumerate().filter(|(i, _)| *i != self.positive_row).map(|(_, v)| v.clone()).collect(),
        )
    }

    /// `A x`.
    pub fn apply(&self, x: &IntVector) -> IntVector {
        IntVector::new(
            self.a.iter().map(|row| row.iter().zip(x.as_slice()).map(|(a, v)| a * v).sum()).collect(),
        )
    }

    /// Whether `A x = b` has a solution in the fiber (and box).
    pub fn is_feasible(&self) -> bool {
        let b = self.b.clone();
        enumerate_fiber(self).iter().any(|x| self.apply(x) == b)
    }

    /// Multiplies `A` and `b` by `factor`.
    pub fn scaled(&self, factor: i64) -> Result<Self> {
        let f = BigInt::from(factor);
        Self::new(
            self.a.iter().map(|r| r.iter().map(|v| v * &f).collect()).collect(),
            IntVector::new(self.b.as_slice().iter().map(|v| v * &f).collect()),
            self.positive_row,
            self.bounds.clone(),
        )
    }
}

/// All `x >= 0` (inside the box, if any) with `a^i . x = b_i`, in
/// lexicographic order.
pub fn enumerate_fiber(fiber: &IntegerFiber) -> Vec<IntVector> {
    let row = &fiber.a[fiber.positive_row];
    let n = row.len();
    let ranges: Vec<(BigInt, Option<BigInt>)> = match &fiber.bounds {
        Some(bx) => match bx.clipped() {
            Some(r) => r.into_iter().map(|(l, u)| (l, Some(u))).collect(),
            None => return Vec::new(),
        },
        None => vec![(BigInt::zero(), None); n],
    };
    let mut out = Vec::new();
    let mut x = vec![BigInt::zero(); n];
    fill(row, &ranges, 0, fiber.b[fiber.positive_row].clone(), &mut x, &mut out);
    out
}

fn fill(
    row: &[BigInt],
    ranges: &[(BigInt, Option<BigInt>)],
    j: usize,
    remaining: BigInt,
    x: &mut Vec<BigInt>,
    out: &mut Vec<IntVector>,
) {
    let (lo, hi) = &ranges[j];
    let mut top = remaining.div_floor(&row[j]);
    if let Some(h) = hi {
        top = top.min(h.clone());
    }
    if j + 1 == row.len() {
        let (q, r) = remaining.div_mod_floor(&row[j]);
        if r.is_zero() && q >= *lo && q <= top {
            x[j] = q;
            out.push(IntVector::new(x.clone()));
        }
        return;
    }
    let mut v = lo.clone();
    while v <= top {
        let rest = &remaining - &row[j] * &v;
        x[j] = v.clone();
        fill(row, ranges, j + 1, rest, x, out);
        v += 1;
    }
}

/// Every lattice point of `bounds` clipped to the nonnegative orthant, in
/// lexicographic order.
pub fn enumerate_box(bounds: &BoxBounds) -> Result<Vec<IntVector>> {
    let ranges = bounds.clipped().ok_or_else(|| Error::Precondition("box is empty".into()))?;
    let mut out = vec![IntVector::new(Vec::new())];
    for (lo, hi) in ranges {
        let mut next = Vec::new();
        for prefix in &out {
            let mut v = lo.clone();
            while v <= hi {
                let mut e = prefix.as_slice().to_vec();
                e.push(v.clone());
                next.push(IntVector::new(e));
                v += 1;
            }
        }
        out = next;
    }
    Ok(out)
}
