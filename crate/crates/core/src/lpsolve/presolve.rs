//! Structural reductions before the simplex, and the maps needed to lift its answers back.
//!
//! - Two-term rows c·x_u − c·x_w = 0 merge columns u and w (union-find). Merge rows that
//!   close a cycle are redundant.
//! - Singleton inequalities a·x_j ≥ r with a > 0, r ≤ 0 are implied by x ≥ 0.
//! - Remaining inequalities become equalities with a surplus column.
//! - Rows are scaled so their first coefficient is 1 and deduplicated.
//! - Optionally only a maximal linearly independent subset (rank mod a large prime) is kept.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashMap};
use std::hash::{Hash, Hasher};
use std::sync::{Mutex, OnceLock};

use num_traits::{One, Signed, Zero};

use super::{FarkasCertificate, LinearSystem, Rational, SparseRow};

#[derive(Clone, Copy, Debug)]
enum Origin {
    Eq(usize),
    Ineq(usize),
}

/// Merge row `row`: cu·x_u − cu·x_w = 0.
#[derive(Clone, Debug)]
struct Edge {
    row: usize,
    u: usize,
    cu: Rational,
    w: usize,
}

pub(crate) struct Reduced {
    pub n_cols: usize,
    pub rows: Vec<SparseRow>,
    pub rhs: Vec<Rational>,
    /// Stage row behind each reduced row, and the factor applied to it.
    source: Vec<(usize, Rational)>,
    stage: Vec<Origin>,
    class_of: Vec<usize>,
    edges: Vec<Edge>,
    n_eq: usize,
    n_ineq: usize,
    n_vars: usize,
}

pub(crate) enum Presolved {
    Reduced(Reduced),
    Infeasible(FarkasCertificate),
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }
}

fn merge_pair(row: &SparseRow, rhs: &Rational) -> Option<((usize, Rational), (usize, Rational))> {
    if row.len() == 2 && rhs.is_zero() && (&row[0].1 + &row[1].1).is_zero() {
        Some((row[0].clone(), row[1].clone()))
    } else {
        None
    }
}

pub(crate) fn presolve(ls: &LinearSystem, rank_reduction: bool) -> Presolved {
    let n = ls.num_vars();
    let mut uf = UnionFind((0..n).collect());
    let mut edges = Vec::new();
    let mut is_merge = vec![false; ls.eq_rows().len()];
    for (r, (row, rhs)) in ls.eq_rows().iter().zip(ls.eq_rhs()).enumerate() {
        if let Some(((u, cu), (w, _))) = merge_pair(row, rhs) {
            is_merge[r] = true;
            let (ru, rw) = (uf.find(u), uf.find(w));
            if ru != rw {
                uf.0[ru] = rw;
                edges.push(Edge { row: r, u, cu, w });
            }
        }
    }
    let mut class_id: HashMap<usize, usize> = HashMap::new();
    let mut class_of = vec![0; n];
    for (j, slot) in class_of.iter_mut().enumerate() {
        let root = uf.find(j);
        let next = class_id.len();
        *slot = *class_id.entry(root).or_insert(next);
    }
    let n_classes = class_id.len();

    let mut stage = Vec::new();
    let mut stage_rows: Vec<(SparseRow, Rational)> = Vec::new();
    let reduce = |row: &SparseRow| -> BTreeMap<usize, Rational> {
        let mut acc: BTreeMap<usize, Rational> = BTreeMap::new();
        for (j, a) in row {
            *acc.entry(class_of[*j]).or_insert_with(Rational::zero) += a;
        }
        acc.retain(|_, v| !v.is_zero());
        acc
    };
    for (r, (row, rhs)) in ls.eq_rows().iter().zip(ls.eq_rhs()).enumerate() {
        if is_merge[r] {
            continue;
        }
        stage.push(Origin::Eq(r));
        stage_rows.push((reduce(row).into_iter().collect(), rhs.clone()));
    }
    let mut n_cols = n_classes;
    for (k, (row, rhs)) in ls.ineq_rows().iter().zip(ls.ineq_rhs()).enumerate() {
        if row.len() == 1 && row[0].1.is_positive() && !rhs.is_positive() {
            continue;
        }
        let mut reduced: SparseRow = reduce(row).into_iter().collect();
        reduced.push((n_cols, -Rational::one()));
        n_cols += 1;
        stage.push(Origin::Ineq(k));
        stage_rows.push((reduced, rhs.clone()));
    }

    let mut reduced = Reduced {
        n_cols,
        rows: Vec::new(),
        rhs: Vec::new(),
        source: Vec::new(),
        stage,
        class_of,
        edges,
        n_eq: ls.eq_rows().len(),
        n_ineq: ls.ineq_rows().len(),
        n_vars: n,
    };

    let mut seen: HashMap<SparseRow, usize> = HashMap::new();
    for (s, (row, rhs)) in stage_rows.into_iter().enumerate() {
        if row.is_empty() {
            if rhs.is_zero() {
                continue;
            }
            let mut y = vec![Rational::zero(); reduced.stage.len()];
            y[s] = if rhs.is_positive() { Rational::one() } else { -Rational::one() };
            return Presolved::Infeasible(reduced.lift_routed(ls, y));
        }
        let scale = Rational::one() / &row[0].1;
        let row: SparseRow = row.into_iter().map(|(j, a)| (j, a * &scale)).collect();
        let rhs = rhs * &scale;
        if let Some(&u) = seen.get(&row) {
            if reduced.rhs[u] != rhs {
                // same left side, different right side
                let (s0, scale0) = reduced.source[u].clone();
                let mut y = vec![Rational::zero(); reduced.stage.len()];
                let positive = reduced.rhs[u] > rhs;
                let sign = if positive { Rational::one() } else { -Rational::one() };
                y[s0] = &sign * &scale0;
                y[s] = -&sign * &scale;
                return Presolved::Infeasible(reduced.lift_routed(ls, y));
            }
            continue;
        }
        seen.insert(row.clone(), reduced.rows.len());
        reduced.rows.push(row);
        reduced.rhs.push(rhs);
        reduced.source.push((s, scale));
    }

    if rank_reduction && !reduced.rows.is_empty() {
        let keep = independent_rows(&reduced.rows, reduced.n_cols);
        if keep.len() < reduced.rows.len() {
            select(&mut reduced.rows, &keep);
            select(&mut reduced.rhs, &keep);
            select(&mut reduced.source, &keep);
        }
    }
    Presolved::Reduced(reduced)
}

fn select<T: Clone>(v: &mut Vec<T>, keep: &[usize]) {
    let old = std::mem::take(v);
    *v = keep.iter().map(|&i| old[i].clone()).collect();
}

impl Reduced {
    pub fn expand_point(&self, x: &[Rational]) -> Vec<Rational> {
        self.class_of.iter().map(|&c| x[c].clone()).collect()
    }

    /// Lifts a dual vector over the reduced rows to the original system.
    pub fn lift_dual(&self, y: &[Rational]) -> FarkasCertificate {
        let mut stage_y = vec![Rational::zero(); self.stage.len()];
        for (v, (s, scale)) in y.iter().zip(&self.source) {
            stage_y[*s] += v * scale;
        }
        self.lift_stage(stage_y)
    }

    fn lift_routed(&self, ls: &LinearSystem, stage_y: Vec<Rational>) -> FarkasCertificate {
        let mut cert = self.lift_stage(stage_y);
        self.route_merges(ls, &mut cert);
        cert
    }

    fn lift_stage(&self, stage_y: Vec<Rational>) -> FarkasCertificate {
        let mut y_eq = vec![Rational::zero(); self.n_eq];
        let mut y_ineq = vec![Rational::zero(); self.n_ineq];
        for (v, origin) in stage_y.into_iter().zip(&self.stage) {
            match origin {
                Origin::Eq(r) => y_eq[*r] = v,
                Origin::Ineq(k) => y_ineq[*k] = v,
            }
        }
        FarkasCertificate { y_eq, y_ineq }
    }

    /// Routes the residual column sums of `cert` along merge rows so that within each
    /// merged class everything lands on one column.
    pub fn route_merges(&self, ls: &LinearSystem, cert: &mut FarkasCertificate) {
        if self.edges.is_empty() {
            return;
        }
        let mut col = vec![Rational::zero(); self.n_vars];
        for (row, y) in ls.eq_rows().iter().zip(&cert.y_eq) {
            if y.is_zero() {
                continue;
            }
            for (j, a) in row {
                col[*j] += a * y;
            }
        }
        for (row, y) in ls.ineq_rows().iter().zip(&cert.y_ineq) {
            if y.is_zero() {
                continue;
            }
            for (j, a) in row {
                col[*j] += a * y;
            }
        }
        // Root each tree of the undirected merge forest, then move subtree totals
        // upward deepest-first so every child's total is final when it is routed.
        let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
        for (e_idx, e) in self.edges.iter().enumerate() {
            adj.entry(e.u).or_default().push(e_idx);
            adj.entry(e.w).or_default().push(e_idx);
        }
        let mut visited = vec![false; self.n_vars];
        let mut order: Vec<(usize, usize, usize)> = Vec::with_capacity(self.edges.len());
        let mut roots: Vec<usize> = adj.keys().copied().collect();
        roots.sort_unstable();
        for root in roots {
            if visited[root] {
                continue;
            }
            visited[root] = true;
            let mut stack = vec![root];
            while let Some(v) = stack.pop() {
                for &e in &adj[&v] {
                    let edge = &self.edges[e];
                    let other = if edge.u == v { edge.w } else { edge.u };
                    if !visited[other] {
                        visited[other] = true;
                        order.push((e, other, v));
                        stack.push(other);
                    }
                }
            }
        }
        for &(e, child, parent) in order.iter().rev() {
            let edge = &self.edges[e];
            let total = col[child].clone();
            if total.is_zero() {
                continue;
            }
            let coeff = if child == edge.u { edge.cu.clone() } else { -&edge.cu };
            let z = -&total / &coeff;
            cert.y_eq[edge.row] += &z;
            col[child] = Rational::zero();
            col[parent] += total;
        }
    }
}

const PRIME: u64 = (1 << 61) - 1;

fn mulmod(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % PRIME as u128) as u64
}

fn powmod(mut a: u64, mut e: u64) -> u64 {
    let mut r = 1;
    while e > 0 {
        if e & 1 == 1 {
            r = mulmod(r, a);
        }
        a = mulmod(a, a);
        e >>= 1;
    }
    r
}

fn to_mod(r: &Rational) -> u64 {
    let m = num_bigint::BigInt::from(PRIME);
    let reduce = |v: &num_bigint::BigInt| -> u64 {
        let x = ((v % &m) + &m) % &m;
        x.try_into().expect("reduced below the modulus")
    };
    let d = reduce(r.denom());
    mulmod(reduce(r.numer()), powmod(d, PRIME - 2))
}

fn independent_rows(rows: &[SparseRow], n_cols: usize) -> Vec<usize> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Vec<usize>>>> = OnceLock::new();
    let mut h = DefaultHasher::new();
    n_cols.hash(&mut h);
    rows.hash(&mut h);
    let key = h.finish();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(hit) = cache.lock().expect("cache lock").get(&key) {
        return hit.clone();
    }
    let keep = independent_rows_uncached(rows, n_cols);
    cache.lock().expect("cache lock").insert(key, keep.clone());
    keep
}

/// Greedy row basis by elimination over GF(2^61 − 1). A row that is dependent modulo the
/// prime is dependent over the rationals except with negligible probability; the final
/// exact verification catches the rest.
fn independent_rows_uncached(rows: &[SparseRow], n_cols: usize) -> Vec<usize> {
    let mut pivots: Vec<(usize, Vec<u64>)> = Vec::new();
    let mut pivot_of_col: Vec<Option<usize>> = vec![None; n_cols];
    let mut keep = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let mut v = vec![0u64; n_cols];
        for (j, a) in row {
            v[*j] = to_mod(a);
        }
        for c in 0..n_cols {
            if v[c] == 0 {
                continue;
            }
            match pivot_of_col[c] {
                Some(p) => {
                    let f = v[c];
                    let prow = &pivots[p].1;
                    for k in c..n_cols {
                        if prow[k] != 0 {
                            v[k] = (v[k] + PRIME - mulmod(f, prow[k])) % PRIME;
                        }
                    }
                }
                None => {
                    let inv = powmod(v[c], PRIME - 2);
                    for x in v.iter_mut().skip(c) {
                        *x = mulmod(*x, inv);
                    }
                    pivot_of_col[c] = Some(pivots.len());
                    pivots.push((c, v));
                    keep.push(i);
                    break;
                }
            }
        }
    }
    keep
}
