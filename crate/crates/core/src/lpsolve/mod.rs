//! Linear feasibility with exact Farkas certificates.
//!
//! Systems are {A_eq x = b_eq, A_ineq x ≥ b_ineq, x ≥ 0} over the rationals. An
//! infeasibility certificate (y_eq free, y_ineq ≥ 0) satisfies y_eqᵀA_eq + y_ineqᵀA_ineq ≤ 0
//! column by column and y_eqᵀb_eq + y_ineqᵀb_ineq > 0; no x ≥ 0 can then exist.
//!
//! Every answer is checked in exact arithmetic before it is returned. The floating-point
//! simplex only proposes bases.

mod presolve;
pub mod rational;
mod simplex;

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{structural, Error, Result};
use presolve::{presolve, Presolved, Reduced};
pub use simplex::PivotRule;
use simplex::{Phase1, Tableau};

pub type Rational = BigRational;
pub type SparseRow = Vec<(usize, Rational)>;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearSystem {
    num_vars: usize,
    eq: Vec<SparseRow>,
    eq_rhs: Vec<Rational>,
    ineq: Vec<SparseRow>,
    ineq_rhs: Vec<Rational>,
    labels: Vec<String>,
}

impl LinearSystem {
    pub fn new(num_vars: usize) -> Self {
        Self { num_vars, labels: (0..num_vars).map(|j| format!("x{j}")).collect(), ..Self::default() }
    }

    pub fn set_labels(&mut self, labels: Vec<String>) -> Result<()> {
        if labels.len() != self.num_vars {
            return Err(structural(format!("{} labels for {} variables", labels.len(), self.num_vars)));
        }
        self.labels = labels;
        Ok(())
    }

    fn normalize_row(&self, row: SparseRow) -> Result<SparseRow> {
        let mut row = row;
        row.sort_by_key(|(j, _)| *j);
        let mut out: SparseRow = Vec::with_capacity(row.len());
        for (j, a) in row {
            if j >= self.num_vars {
                return Err(structural(format!("column {j} outside {} variables", self.num_vars)));
            }
            match out.last_mut() {
                Some((k, b)) if *k == j => *b += a,
                _ => out.push((j, a)),
            }
        }
        out.retain(|(_, a)| !a.is_zero());
        Ok(out)
    }

    /// row · x = rhs; returns the row index.
    pub fn add_equality(&mut self, row: SparseRow, rhs: Rational) -> Result<usize> {
        let row = self.normalize_row(row)?;
        self.eq.push(row);
        self.eq_rhs.push(rhs);
        Ok(self.eq.len() - 1)
    }

    /// row · x ≥ rhs; returns the row index.
    pub fn add_inequality(&mut self, row: SparseRow, rhs: Rational) -> Result<usize> {
        let row = self.normalize_row(row)?;
        self.ineq.push(row);
        self.ineq_rhs.push(rhs);
        Ok(self.ineq.len() - 1)
    }

    pub fn set_eq_rhs(&mut self, row: usize, rhs: Rational) {
        self.eq_rhs[row] = rhs;
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn eq_rows(&self) -> &[SparseRow] {
        &self.eq
    }

    pub fn eq_rhs(&self) -> &[Rational] {
        &self.eq_rhs
    }

    pub fn ineq_rows(&self) -> &[SparseRow] {
        &self.ineq
    }

    pub fn ineq_rhs(&self) -> &[Rational] {
        &self.ineq_rhs
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn nonzeros(&self) -> usize {
        self.eq.iter().chain(&self.ineq).map(Vec::len).sum()
    }

    /// CPLEX-style LP text with exact "p/q" coefficients and a zero objective.
    pub fn to_lp_text(&self) -> String {
        use std::fmt::Write;
        let term = |out: &mut String, first: bool, a: &Rational, label: &str| {
            let sign = match (a.is_negative(), first) {
                (true, _) => " -",
                (false, true) => "",
                (false, false) => " +",
            };
            let mag = rational::format(&a.abs());
            let coeff = if mag == "1" { String::new() } else { format!(" {mag}") };
            let _ = write!(out, "{sign}{coeff} {label}");
        };
        let mut out = String::from("\\ feasibility system\nMinimize\n obj:");
        if let Some(l) = self.labels.first() {
            let _ = write!(out, " 0 {l}");
        }
        out.push_str("\nSubject To\n");
        let mut block = |prefix: &str, rows: &[SparseRow], rhs: &[Rational], op: &str| {
            for (i, (row, r)) in rows.iter().zip(rhs).enumerate() {
                let _ = write!(out, " {prefix}{i}:");
                if row.is_empty() {
                    let _ = write!(out, " 0 {}", self.labels[0]);
                }
                for (k, (j, a)) in row.iter().enumerate() {
                    term(&mut out, k == 0, a, &self.labels[*j]);
                }
                let _ = writeln!(out, " {op} {}", rational::format(r));
            }
        };
        block("e", &self.eq, &self.eq_rhs, "=");
        block("g", &self.ineq, &self.ineq_rhs, ">=");
        out.push_str("Bounds\n");
        for l in &self.labels {
            let _ = writeln!(out, " {l} >= 0");
        }
        out.push_str("End\n");
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FarkasCertificate {
    pub y_eq: Vec<Rational>,
    pub y_ineq: Vec<Rational>,
}

#[derive(Serialize, Deserialize)]
struct CertificateFile {
    y_eq: Vec<String>,
    y_ineq: Vec<String>,
}

impl FarkasCertificate {
    /// Positive rescaling to coprime integers; validity is unchanged.
    pub fn integerized(&self) -> Self {
        let all: Vec<Rational> = self.y_eq.iter().chain(&self.y_ineq).cloned().collect();
        let (ints, _) = rational::integerize(&all);
        let mut ints = ints.into_iter().map(Rational::from_integer);
        let y_eq = ints.by_ref().take(self.y_eq.len()).collect();
        let y_ineq = ints.collect();
        Self { y_eq, y_ineq }
    }

    /// yᵀb
    pub fn objective(&self, ls: &LinearSystem) -> Rational {
        dot(&self.y_eq, ls.eq_rhs()) + dot(&self.y_ineq, ls.ineq_rhs())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = CertificateFile {
            y_eq: self.y_eq.iter().map(rational::format).collect(),
            y_ineq: self.y_ineq.iter().map(rational::format).collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CertificateFile = serde_json::from_str(text)?;
        let parse = |v: Vec<String>| -> Result<Vec<Rational>> {
            v.iter()
                .map(|s| rational::parse(s).ok_or_else(|| structural(format!("bad rational {s:?}"))))
                .collect()
        };
        Ok(Self { y_eq: parse(file.y_eq)?, y_ineq: parse(file.y_ineq)? })
    }
}

fn dot(y: &[Rational], b: &[Rational]) -> Rational {
    y.iter().zip(b).filter(|(a, _)| !a.is_zero()).map(|(a, c)| a * c).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub enum Feasibility {
    Feasible(Vec<Rational>),
    Infeasible(FarkasCertificate),
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }

    pub fn certificate(&self) -> Option<&FarkasCertificate> {
        match self {
            Feasibility::Infeasible(c) => Some(c),
            Feasibility::Feasible(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMode {
    /// Rational simplex with Bland's rule throughout.
    Exact,
    /// Double-precision simplex, rationalized and verified; exact simplex if that fails.
    FloatThenExact,
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub mode: SolveMode,
    pub float_rule: PivotRule,
    pub max_iterations: usize,
    pub rank_reduction: bool,
    /// Denominator bounds tried, in order, when rationalizing float output.
    pub reconstruction_bounds: Vec<u64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            mode: SolveMode::FloatThenExact,
            float_rule: PivotRule::Dantzig,
            max_iterations: 1_000_000,
            rank_reduction: true,
            reconstruction_bounds: vec![1_000, 1_000_000, 1_000_000_000, 1_000_000_000_000],
        }
    }
}

impl SolverOptions {
    pub fn exact() -> Self {
        Self { mode: SolveMode::Exact, ..Self::default() }
    }
}

pub fn feasibility(ls: &LinearSystem) -> Result<Feasibility> {
    feasibility_with(ls, &SolverOptions::default())
}

pub fn feasibility_with(ls: &LinearSystem, opts: &SolverOptions) -> Result<Feasibility> {
    if opts.mode == SolveMode::FloatThenExact {
        for rank_reduction in [opts.rank_reduction, false] {
            match presolve(ls, rank_reduction) {
                Presolved::Infeasible(cert) => return checked_certificate(ls, cert),
                Presolved::Reduced(red) => {
                    if let Some(answer) = float_attempt(ls, &red, opts)? {
                        return Ok(answer);
                    }
                }
            }
            if !opts.rank_reduction {
                break;
            }
        }
        log::warn!("float simplex output failed exact verification; running exact simplex");
    }
    match presolve(ls, false) {
        Presolved::Infeasible(cert) => checked_certificate(ls, cert),
        Presolved::Reduced(red) => {
            let result = Tableau::<Rational>::new(&red.rows, &red.rhs, red.n_cols)
                .solve(PivotRule::Bland, opts.max_iterations)?;
            let answer = lift(ls, &red, result);
            match &answer {
                Feasibility::Feasible(x) if verify_point(ls, x) => Ok(answer),
                Feasibility::Infeasible(c) if verify_certificate(ls, c) => Ok(answer),
                _ => Err(Error::Solver("exact simplex produced an unverifiable answer".into())),
            }
        }
    }
}

fn checked_certificate(ls: &LinearSystem, cert: FarkasCertificate) -> Result<Feasibility> {
    if verify_certificate(ls, &cert) {
        Ok(Feasibility::Infeasible(cert))
    } else {
        Err(Error::Solver("presolve certificate failed verification".into()))
    }
}

fn lift(ls: &LinearSystem, red: &Reduced, result: Phase1<Rational>) -> Feasibility {
    match result {
        Phase1::Feasible(x) => Feasibility::Feasible(red.expand_point(&x)),
        Phase1::Infeasible(y) => {
            let mut cert = red.lift_dual(&y);
            red.route_merges(ls, &mut cert);
            Feasibility::Infeasible(cert)
        }
    }
}

fn float_attempt(ls: &LinearSystem, red: &Reduced, opts: &SolverOptions) -> Result<Option<Feasibility>> {
    let result = match Tableau::<f64>::new(&red.rows, &red.rhs, red.n_cols).solve(opts.float_rule, opts.max_iterations) {
        Ok(r) => r,
        Err(e) => {
            log::warn!("float simplex failed: {e}");
            return Ok(None);
        }
    };
    for &bound in &opts.reconstruction_bounds {
        let exact = match &result {
            Phase1::Feasible(x) => Phase1::Feasible(
                x.iter().map(|&v| rational::approximate(v.max(0.0), bound, 1e-9)).collect(),
            ),
            Phase1::Infeasible(y) => {
                Phase1::Infeasible(y.iter().map(|&v| rational::approximate(v, bound, 1e-9)).collect())
            }
        };
        let answer = lift(ls, red, exact);
        let ok = match &answer {
            Feasibility::Feasible(x) => verify_point(ls, x),
            Feasibility::Infeasible(c) => verify_certificate(ls, c),
        };
        if ok {
            return Ok(Some(answer));
        }
    }
    Ok(None)
}

/// Exact check of both Farkas conditions. Dimension mismatches give `false`.
pub fn verify_certificate(ls: &LinearSystem, cert: &FarkasCertificate) -> bool {
    if cert.y_eq.len() != ls.eq.len() || cert.y_ineq.len() != ls.ineq.len() {
        return false;
    }
    if cert.y_ineq.iter().any(|v| v.is_negative()) {
        return false;
    }
    let mut col = vec![Rational::zero(); ls.num_vars];
    for (rows, ys) in [(&ls.eq, &cert.y_eq), (&ls.ineq, &cert.y_ineq)] {
        for (row, y) in rows.iter().zip(ys) {
            if y.is_zero() {
                continue;
            }
            for (j, a) in row {
                col[*j] += a * y;
            }
        }
    }
    col.iter().all(|v| !v.is_positive()) && cert.objective(ls).is_positive()
}

/// Exact check that x ≥ 0 satisfies every row.
pub fn verify_point(ls: &LinearSystem, x: &[Rational]) -> bool {
    if x.len() != ls.num_vars || x.iter().any(|v| v.is_negative()) {
        return false;
    }
    let eval = |row: &SparseRow| -> Rational { row.iter().map(|(j, a)| a * &x[*j]).sum() };
    ls.eq.iter().zip(&ls.eq_rhs).all(|(row, b)| &eval(row) == b)
        && ls.ineq.iter().zip(&ls.ineq_rhs).all(|(row, b)| &eval(row) >= b)
}
