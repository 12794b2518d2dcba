//! Two-phase dense tableau simplex with Bland's rule, generic over the
//! scalar so the same pivoting runs in `f64` and in exact rationals.
//!
//! Solves `min 1ᵀθ  s.t.  Aθ = x, θ ≥ 0`, which is all the induced norm
//! needs.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub(crate) trait LpScalar:
    Clone
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn is_pos(&self) -> bool;
    fn is_neg(&self) -> bool;
    fn is_negligible(&self) -> bool {
        !self.is_pos() && !self.is_neg()
    }
}

const F64_PIVOT_EPS: f64 = 1e-11;

impl LpScalar for f64 {
    fn is_pos(&self) -> bool {
        *self > F64_PIVOT_EPS
    }
    fn is_neg(&self) -> bool {
        *self < -F64_PIVOT_EPS
    }
}

impl LpScalar for BigRational {
    fn is_pos(&self) -> bool {
        self.is_positive()
    }
    fn is_neg(&self) -> bool {
        self.is_negative()
    }
}

#[derive(Debug, PartialEq)]
pub(crate) enum LpOutcome<T> {
    Optimal { value: T, theta: Vec<T> },
    /// Phase one left a positive residual of this size.
    Infeasible(T),
}

struct Tableau<T> {
    /// Constraint rows followed by the objective row; last column is the rhs.
    rows: Vec<Vec<T>>,
    basis: Vec<usize>,
}

impl<T: LpScalar> Tableau<T> {
    fn cols(&self) -> usize {
        self.rows[0].len() - 1
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        for v in self.rows[r].iter_mut() {
            *v = v.clone() / p.clone();
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                *v = v.clone() - f.clone() * pv.clone();
            }
        }
        self.basis[r] = c;
    }

    /// Bland's rule on the objective row; `allowed` filters entering columns.
    fn run(&mut self, allowed: impl Fn(usize) -> bool) {
        let obj = self.rows.len() - 1;
        loop {
            let Some(enter) = (0..self.cols()).find(|&j| allowed(j) && self.rows[obj][j].is_neg()) else {
                return;
            };
            let rhs = self.cols();
            let mut leave: Option<(usize, T)> = None;
            for i in 0..obj {
                let a = &self.rows[i][enter];
                if !a.is_pos() {
                    continue;
                }
                let ratio = self.rows[i][rhs].clone() / a.clone();
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, enter),
                // Unbounded cannot happen with a nonnegative cost vector.
                None => return,
            }
        }
    }
}

/// `columns[j]` is the j-th generator, `x` the point to represent.
pub(crate) fn min_weight_representation<T: LpScalar>(columns: &[Vec<T>], x: &[T]) -> LpOutcome<T> {
    let m = x.len();
    let n = columns.len();
    let width = n + m + 1;
    let mut rows = Vec::with_capacity(m + 1);
    for i in 0..m {
        let flip = x[i].is_neg();
        let sign = |v: T| if flip { -v } else { v };
        let mut row = Vec::with_capacity(width);
        row.extend(columns.iter().map(|c| sign(c[i].clone())));
        row.extend((0..m).map(|j| if j == i { T::one() } else { T::zero() }));
        row.push(sign(x[i].clone()));
        rows.push(row);
    }
    // Phase one objective: minimise the sum of artificials.
    let mut obj = vec![T::zero(); width];
    for row in &rows {
        for j in 0..n {
            obj[j] = obj[j].clone() - row[j].clone();
        }
        obj[width - 1] = obj[width - 1].clone() - row[width - 1].clone();
    }
    rows.push(obj);
    let mut tab = Tableau { rows, basis: (n..n + m).collect() };
    tab.run(|j| j < n + m);

    let residual = -tab.rows[m][width - 1].clone();
    if residual.is_pos() {
        return LpOutcome::Infeasible(residual);
    }

    // Drive artificials out of the basis; rows where that is impossible are
    // redundant and get dropped.
    let mut r = 0;
    while r < tab.basis.len() {
        if tab.basis[r] >= n {
            match (0..n).find(|&j| !tab.rows[r][j].is_negligible()) {
                Some(j) => tab.pivot(r, j),
                None => {
                    tab.rows.remove(r);
                    tab.basis.remove(r);
                    continue;
                }
            }
        }
        r += 1;
    }

    // Phase two objective: reduced costs of 1ᵀθ.
    let rcount = tab.basis.len();
    let mut obj: Vec<T> = (0..width).map(|j| if j < n { T::one() } else { T::zero() }).collect();
    for row in &tab.rows[..rcount] {
        for (o, r) in obj.iter_mut().zip(row) {
            *o = o.clone() - r.clone();
        }
    }
    *tab.rows.last_mut().unwrap() = obj;
    tab.run(|j| j < n);

    let mut theta = vec![T::zero(); n];
    let mut value = T::zero();
    for i in 0..rcount {
        let b = tab.basis[i];
        if b < n {
            theta[b] = tab.rows[i][width - 1].clone();
            value = value + theta[b].clone();
        }
    }
    LpOutcome::Optimal { value, theta }
}

pub(crate) fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).unwrap_or_else(|| BigRational::from_integer(BigInt::zero()))
}
