//! Dense phase-1 simplex over either exact rationals or doubles.
//!
//! Solves min Σ artificials for {A x = b, x ≥ 0}. Artificial columns are not stored: an
//! artificial that leaves the basis can never re-enter, and the dual vector is recovered
//! at the end from the final basis.

use std::fmt::Debug;

use num_traits::{One, Signed, Zero};

use super::{Rational, SparseRow};
use crate::error::{Error, Result};

pub(crate) trait Scalar: Clone + Debug {
    const EXACT: bool;
    fn zero() -> Self;
    fn one() -> Self;
    fn from_rational(r: &Rational) -> Self;
    fn is_zero(&self) -> bool;
    /// Strictly positive beyond the working tolerance.
    fn is_pos(&self) -> bool;
    fn is_neg(&self) -> bool;
    fn add(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    /// self -= a * b
    fn sub_mul(&mut self, a: &Self, b: &Self);
    fn less(&self, o: &Self) -> bool;
    fn ties(&self, o: &Self) -> bool;
    fn magnitude(&self) -> f64;
    fn approx(&self) -> f64;
    /// Flush round-off to zero; no-op for exact types.
    fn clean(&mut self) {}
    /// Snaps round-off negatives in a basic value back to zero.
    fn clean_rhs(&mut self) {}
}

pub(crate) const FLOAT_TOL: f64 = 1e-9;
const FLOAT_ZERO: f64 = 1e-12;

impl Scalar for f64 {
    const EXACT: bool = false;
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_rational(r: &Rational) -> Self {
        super::rational::to_f64(r)
    }
    fn is_zero(&self) -> bool {
        self.abs() <= FLOAT_ZERO
    }
    fn is_pos(&self) -> bool {
        *self > FLOAT_TOL
    }
    fn is_neg(&self) -> bool {
        *self < -FLOAT_TOL
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn sub_mul(&mut self, a: &Self, b: &Self) {
        *self -= a * b;
    }
    fn less(&self, o: &Self) -> bool {
        self < o
    }
    fn ties(&self, o: &Self) -> bool {
        (self - o).abs() <= FLOAT_ZERO * self.abs().max(1.0)
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
    fn approx(&self) -> f64 {
        *self
    }
    fn clean(&mut self) {
        if self.abs() <= FLOAT_ZERO {
            *self = 0.0;
        }
    }
    fn clean_rhs(&mut self) {
        if *self < 0.0 && *self > -FLOAT_TOL {
            *self = 0.0;
        }
        self.clean();
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn is_pos(&self) -> bool {
        self.is_positive()
    }
    fn is_neg(&self) -> bool {
        self.is_negative()
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn sub_mul(&mut self, a: &Self, b: &Self) {
        *self -= a * b;
    }
    fn less(&self, o: &Self) -> bool {
        self < o
    }
    fn ties(&self, o: &Self) -> bool {
        self == o
    }
    fn magnitude(&self) -> f64 {
        super::rational::to_f64(&self.abs())
    }
    fn approx(&self) -> f64 {
        super::rational::to_f64(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PivotRule {
    /// Smallest eligible index; never cycles.
    Bland,
    /// Most negative reduced cost, falling back to Bland while the objective stalls.
    Dantzig,
}

#[derive(Debug)]
pub(crate) enum Phase1<T> {
    Feasible(Vec<T>),
    /// Dual vector over the (unflipped) rows: yᵀA ≤ 0 and yᵀb > 0.
    Infeasible(Vec<T>),
}

pub(crate) struct Tableau<T> {
    m: usize,
    n: usize,
    t: Vec<T>,
    rhs: Vec<T>,
    basis: Vec<usize>,
    cost: Vec<T>,
    obj: T,
    flipped: Vec<bool>,
    rows: Vec<Vec<(usize, T)>>,
}

const STALL_LIMIT: usize = 50;
const HARRIS_PIVOT: f64 = 1e-7;
const HARRIS_SLACK: f64 = 1e-9;

impl<T: Scalar> Tableau<T> {
    pub fn new(rows: &[SparseRow], rhs: &[Rational], n: usize) -> Self {
        let m = rows.len();
        let mut t = vec![T::zero(); m * n];
        let mut b = Vec::with_capacity(m);
        let mut flipped = Vec::with_capacity(m);
        let mut kept_rows = Vec::with_capacity(m);
        for (i, (row, r)) in rows.iter().zip(rhs).enumerate() {
            let flip = r.is_negative();
            let sign = |v: T| if flip { v.neg() } else { v };
            let mut kept = Vec::with_capacity(row.len());
            for (j, a) in row {
                let v = sign(T::from_rational(a));
                t[i * n + j] = v.clone();
                kept.push((*j, v));
            }
            b.push(sign(T::from_rational(r)));
            flipped.push(flip);
            kept_rows.push(kept);
        }
        let mut cost = vec![T::zero(); n];
        for i in 0..m {
            for (j, v) in &kept_rows[i] {
                cost[*j] = cost[*j].add(&v.neg());
            }
        }
        let obj = b.iter().fold(T::zero(), |acc, v| acc.add(v));
        Self { m, n, t, rhs: b, basis: (n..n + m).collect(), cost, obj, flipped, rows: kept_rows }
    }

    fn entering(&self, rule: PivotRule) -> Option<usize> {
        match rule {
            PivotRule::Bland => (0..self.n).find(|&j| self.cost[j].is_neg()),
            PivotRule::Dantzig => {
                let mut best: Option<usize> = None;
                for j in 0..self.n {
                    if self.cost[j].is_neg() && best.is_none_or(|b| self.cost[j].less(&self.cost[b])) {
                        best = Some(j);
                    }
                }
                best
            }
        }
    }

    /// Minimum-ratio row; exact ties go to the smallest basic index (Bland). Inexact types
    /// use a Harris two-pass test instead.
    fn leaving(&self, j: usize) -> Option<usize> {
        if !T::EXACT {
            return self.leaving_harris(j);
        }
        let mut best: Option<(usize, T)> = None;
        for i in 0..self.m {
            let a = &self.t[i * self.n + j];
            if !a.is_pos() {
                continue;
            }
            let ratio = self.rhs[i].div(a);
            let better = match &best {
                None => true,
                Some((bi, br)) => {
                    ratio.less(br) && !ratio.ties(br) || ratio.ties(br) && self.basis[i] < self.basis[*bi]
                }
            };
            if better {
                best = Some((i, ratio));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Bounds the step with every basic value relaxed by `HARRIS_SLACK`, then takes the
    /// largest pivot element among rows within that bound.
    fn leaving_harris(&self, j: usize) -> Option<usize> {
        let col = |i: usize| self.t[i * self.n + j].approx();
        let mut bound = f64::INFINITY;
        for i in 0..self.m {
            let a = col(i);
            if a > HARRIS_PIVOT {
                bound = bound.min((self.rhs[i].approx() + HARRIS_SLACK) / a);
            }
        }
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.m {
            let a = col(i);
            if a > HARRIS_PIVOT && self.rhs[i].approx() / a <= bound && best.is_none_or(|(_, b)| a > b) {
                best = Some((i, a));
            }
        }
        best.map(|(i, _)| i)
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let n = self.n;
        let piv = self.t[r * n + j].clone();
        let inv = T::one().div(&piv);
        let mut nz: Vec<(usize, T)> = Vec::new();
        for k in 0..n {
            let v = &mut self.t[r * n + k];
            if v.is_zero() {
                continue;
            }
            *v = v.mul(&inv);
            nz.push((k, v.clone()));
        }
        self.t[r * n + j] = T::one();
        self.rhs[r] = self.rhs[r].mul(&inv);
        let rhs_r = self.rhs[r].clone();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * n + j].clone();
            if f.is_zero() {
                continue;
            }
            let row = &mut self.t[i * n..(i + 1) * n];
            for (k, v) in &nz {
                row[*k].sub_mul(&f, v);
                row[*k].clean();
            }
            row[j] = T::zero();
            self.rhs[i].sub_mul(&f, &rhs_r);
            self.rhs[i].clean_rhs();
        }
        let c = self.cost[j].clone();
        for (k, v) in &nz {
            self.cost[*k].sub_mul(&c, v);
            self.cost[*k].clean();
        }
        self.cost[j] = T::zero();
        self.obj = self.obj.add(&c.mul(&rhs_r));
        self.basis[r] = j;
    }

    pub fn solve(mut self, rule: PivotRule, max_iterations: usize) -> Result<Phase1<T>> {
        let mut stall = 0usize;
        let mut best_obj = self.obj.clone();
        for _ in 0..max_iterations {
            let active = if rule == PivotRule::Dantzig && stall < STALL_LIMIT {
                PivotRule::Dantzig
            } else {
                PivotRule::Bland
            };
            if !self.obj.is_pos() {
                // artificial sum already zero: the basic solution is feasible
                return self.finish();
            }
            let Some(j) = self.entering(active) else {
                return self.finish();
            };
            let Some(r) = self.leaving(j) else {
                return Err(Error::Solver("phase-1 objective unbounded below".into()));
            };
            self.pivot(r, j);
            if self.obj.less(&best_obj) && !self.obj.ties(&best_obj) {
                best_obj = self.obj.clone();
                stall = 0;
            } else {
                stall += 1;
            }
        }
        Err(Error::Solver(format!("simplex iteration limit {max_iterations} reached")))
    }

    fn finish(self) -> Result<Phase1<T>> {
        if self.obj.is_pos() {
            let y = self.dual()?;
            let y = y
                .into_iter()
                .zip(&self.flipped)
                .map(|(v, &f)| if f { v.neg() } else { v })
                .collect();
            return Ok(Phase1::Infeasible(y));
        }
        let mut x = vec![T::zero(); self.n];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.n {
                x[b] = self.rhs[i].clone();
            }
        }
        Ok(Phase1::Feasible(x))
    }

    /// Solves Bᵀ y = c_B with c = 1 on artificials, 0 on structurals.
    fn dual(&self) -> Result<Vec<T>> {
        let m = self.m;
        // column k of B is the basic column of row k; row k of Bᵀ is that column transposed
        let mut cols: Vec<Vec<T>> = vec![vec![T::zero(); m]; m];
        let mut c = vec![T::zero(); m];
        let mut col_index: Vec<Vec<(usize, T)>> = vec![Vec::new(); self.n];
        for (i, row) in self.rows.iter().enumerate() {
            for (j, v) in row {
                col_index[*j].push((i, v.clone()));
            }
        }
        for (k, &b) in self.basis.iter().enumerate() {
            if b >= self.n {
                cols[k][b - self.n] = T::one();
                c[k] = T::one();
            } else {
                for (i, v) in &col_index[b] {
                    cols[k][*i] = v.clone();
                }
            }
        }
        solve_dense(cols, c)
    }
}

/// Gaussian elimination with partial pivoting by magnitude (first nonzero for exact types).
fn solve_dense<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Result<Vec<T>> {
    let m = b.len();
    for col in 0..m {
        let mut piv = None;
        let mut best = 0.0;
        for (r, row) in a.iter().enumerate().skip(col) {
            if row[col].is_zero() {
                continue;
            }
            let mag = row[col].magnitude();
            if piv.is_none() || mag > best {
                piv = Some(r);
                best = mag;
            }
        }
        let p = piv.ok_or_else(|| Error::Solver("singular basis".into()))?;
        a.swap(col, p);
        b.swap(col, p);
        let inv = T::one().div(&a[col][col]);
        let pivot_row = a[col].clone();
        let pivot_b = b[col].clone();
        for r in col + 1..m {
            if a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].mul(&inv);
            for k in col..m {
                if !pivot_row[k].is_zero() {
                    a[r][k].sub_mul(&f, &pivot_row[k]);
                }
            }
            b[r].sub_mul(&f, &pivot_b);
        }
    }
    let mut y = vec![T::zero(); m];
    for r in (0..m).rev() {
        let mut acc = b[r].clone();
        for k in r + 1..m {
            if !a[r][k].is_zero() {
                acc.sub_mul(&a[r][k], &y[k]);
            }
        }
        y[r] = acc.div(&a[r][r]);
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lpsolve::rational::int;

    fn rows(spec: &[&[(usize, i64)]]) -> Vec<SparseRow> {
        spec.iter().map(|r| r.iter().map(|&(j, v)| (j, int(v))).collect()).collect()
    }

    #[test]
    fn feasible_point_exact() {
        // x0 + x1 = 2, x0 - x1 = 0
        let a = rows(&[&[(0, 1), (1, 1)], &[(0, 1), (1, -1)]]);
        let b = vec![int(2), int(0)];
        match Tableau::<Rational>::new(&a, &b, 2).solve(PivotRule::Bland, 100).unwrap() {
            Phase1::Feasible(x) => assert_eq!(x, vec![int(1), int(1)]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible_gives_dual() {
        // x0 + x1 = 1, x0 + x1 = 2
        let a = rows(&[&[(0, 1), (1, 1)], &[(0, 1), (1, 1)]]);
        let b = vec![int(1), int(2)];
        for rule in [PivotRule::Bland, PivotRule::Dantzig] {
            let Phase1::Infeasible(y) = Tableau::<Rational>::new(&a, &b, 2).solve(rule, 100).unwrap() else {
                panic!("expected infeasible");
            };
            let yb = &y[0] * &b[0] + &y[1] * &b[1];
            assert!(yb.is_positive());
            assert!((&y[0] + &y[1]) <= int(0));
        }
    }

    #[test]
    fn float_matches_exact_on_negative_rhs() {
        // -x0 = -3 with x0 >= 0 is feasible at 3
        let a = rows(&[&[(0, -1)]]);
        let b = vec![int(-3)];
        match Tableau::<f64>::new(&a, &b, 1).solve(PivotRule::Dantzig, 10).unwrap() {
            Phase1::Feasible(x) => assert!((x[0] - 3.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }
}
