//! The simplex against brute-force vertex enumeration on small random systems, plus
//! certificate properties on the inflation LP.

use fnn_core::inflation::{build_inflation_lp_exact, build_inflation_lp_with, InflationOptions, RowKind};
use fnn_core::lpsolve::{
    feasibility_with, rational, verify_certificate, verify_point, Feasibility, FarkasCertificate,
    LinearSystem, Rational, SolverOptions,
};
use fnn_core::qsim::{simulate_star, StarStrategy};
use num_traits::{Signed, Zero};
use proptest::prelude::*;

/// Solves the square system M x = r exactly; `None` if M is singular.
fn solve_square(mut m: Vec<Vec<Rational>>, mut r: Vec<Rational>) -> Option<Vec<Rational>> {
    let n = r.len();
    for col in 0..n {
        let pivot = (col..n).find(|&i| !m[i][col].is_zero())?;
        m.swap(col, pivot);
        r.swap(col, pivot);
        for i in 0..n {
            if i != col && !m[i][col].is_zero() {
                let f = &m[i][col] / &m[col][col];
                for k in col..n {
                    let d = &f * &m[col][k];
                    m[i][k] -= d;
                }
                let d = &f * &r[col];
                r[i] -= d;
            }
        }
    }
    Some((0..n).map(|i| &r[i] / &m[i][i]).collect())
}

fn dense(row: &[(usize, Rational)], n: usize) -> Vec<Rational> {
    let mut out = vec![Rational::zero(); n];
    for (j, a) in row {
        out[*j] += a;
    }
    out
}

/// Feasible iff some vertex exists: with x ≥ 0 the region is pointed, so a nonempty region
/// has a basic feasible solution. Tries every choice of n tight constraints.
fn oracle_feasible(ls: &LinearSystem) -> bool {
    let n = ls.num_vars();
    let mut rows: Vec<(Vec<Rational>, Rational)> = Vec::new();
    for (r, b) in ls.eq_rows().iter().zip(ls.eq_rhs()) {
        rows.push((dense(r, n), b.clone()));
    }
    for (r, b) in ls.ineq_rows().iter().zip(ls.ineq_rhs()) {
        rows.push((dense(r, n), b.clone()));
    }
    for j in 0..n {
        let mut e = vec![Rational::zero(); n];
        e[j] = rational::int(1);
        rows.push((e, Rational::zero()));
    }
    let total = rows.len();
    let mut chosen: Vec<usize> = (0..n).collect();
    loop {
        let m = chosen.iter().map(|&i| rows[i].0.clone()).collect();
        let r = chosen.iter().map(|&i| rows[i].1.clone()).collect();
        if let Some(x) = solve_square(m, r) {
            if verify_point(ls, &x) {
                return true;
            }
        }
        // next combination
        let mut i = n;
        loop {
            if i == 0 {
                return false;
            }
            i -= 1;
            if chosen[i] < total - n + i {
                break;
            }
        }
        chosen[i] += 1;
        for k in i + 1..n {
            chosen[k] = chosen[k - 1] + 1;
        }
    }
}

fn arb_system() -> impl Strategy<Value = LinearSystem> {
    (2usize..=6, 1usize..=3, 0usize..=3).prop_flat_map(|(n, neq, nineq)| {
        let row = prop::collection::vec(-3i64..=3, n);
        (
            Just(n),
            prop::collection::vec((row.clone(), -4i64..=4), neq),
            prop::collection::vec((row, -4i64..=4), nineq),
        )
            .prop_map(|(n, eqs, ineqs)| {
                let mut ls = LinearSystem::new(n);
                let sparse = |r: &[i64]| {
                    r.iter().enumerate().filter(|(_, &a)| a != 0).map(|(j, &a)| (j, rational::int(a))).collect()
                };
                for (r, b) in eqs {
                    ls.add_equality(sparse(&r), rational::int(b)).unwrap();
                }
                for (r, b) in ineqs {
                    ls.add_inequality(sparse(&r), rational::int(b)).unwrap();
                }
                ls
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn agrees_with_vertex_enumeration(ls in arb_system()) {
        let expected = oracle_feasible(&ls);
        for opts in [SolverOptions::default(), SolverOptions::exact()] {
            match feasibility_with(&ls, &opts).unwrap() {
                Feasibility::Feasible(x) => {
                    prop_assert!(expected, "solver found a point the oracle missed");
                    prop_assert!(verify_point(&ls, &x));
                }
                Feasibility::Infeasible(cert) => {
                    prop_assert!(!expected, "certificate issued for a feasible system");
                    prop_assert!(verify_certificate(&ls, &cert));
                }
            }
        }
    }
}

fn columns_nonpositive(ls: &LinearSystem, cert: &FarkasCertificate) -> bool {
    let mut col = vec![Rational::zero(); ls.num_vars()];
    for (rows, ys) in [(ls.eq_rows(), &cert.y_eq), (ls.ineq_rows(), &cert.y_ineq)] {
        for (row, y) in rows.iter().zip(ys.iter()) {
            for (j, a) in row {
                col[*j] += a * y;
            }
        }
    }
    col.iter().all(|v| !v.is_positive())
}

fn ideal_certificate(k: usize) -> (fnn_core::inflation::InflationProblem, FarkasCertificate) {
    let d = simulate_star(&StarStrategy::new(-1.865, -0.415)).unwrap();
    let opts = InflationOptions { denominator_bound: 10_000, ..Default::default() };
    let p = build_inflation_lp_with(&d, k, &opts).unwrap();
    match p.solve(&SolverOptions::default()).unwrap() {
        Feasibility::Infeasible(c) => (p, c),
        Feasibility::Feasible(_) => panic!("ideal star should be infeasible"),
    }
}

#[test]
fn certificate_survives_marginal_rhs_changes() {
    let (p, cert) = ideal_certificate(1);
    assert!(verify_certificate(p.system(), &cert));
    // every marginal right-hand side replaced by the uniform target
    let uniform = vec![rational::ratio(1, 16); 128];
    let other = build_inflation_lp_exact(&uniform, 1).unwrap();
    assert!(p
        .row_kinds()
        .iter()
        .zip(p.system().eq_rhs().iter().zip(other.system().eq_rhs()))
        .all(|(k, (a, b))| matches!(k, RowKind::Marginal { .. }) || a == b));
    assert!(columns_nonpositive(other.system(), &cert));
    // the uniform target is feasible, so the same dual can no longer separate it
    assert!(!cert.objective(other.system()).is_positive());
}

#[test]
fn perturbed_inflation_certificate_is_rejected() {
    let (p, cert) = ideal_certificate(2);
    let mut rejected = 0;
    let nonzero: Vec<usize> = cert.y_eq.iter().enumerate().filter(|(_, v)| !v.is_zero()).map(|(i, _)| i).collect();
    for &i in nonzero.iter().take(20) {
        let mut forged = cert.clone();
        forged.y_eq[i] += rational::ratio(1, 1_000_000);
        if !verify_certificate(p.system(), &forged) {
            rejected += 1;
        }
    }
    assert!(rejected >= 19, "only {rejected} of 20 perturbations rejected");
}

#[test]
fn certificates_are_deterministic() {
    let (_, a) = ideal_certificate(3);
    let (_, b) = ideal_certificate(3);
    assert_eq!(a, b);
    assert_eq!(a.integerized().to_json().unwrap(), b.integerized().to_json().unwrap());
}

#[test]
fn exact_mode_certifies_the_ideal_star() {
    let (p, _) = ideal_certificate(1);
    let Feasibility::Infeasible(cert) = p.solve(&SolverOptions::exact()).unwrap() else {
        panic!("exact simplex disagrees with the float fast path");
    };
    assert!(verify_certificate(p.system(), &cert));
}
