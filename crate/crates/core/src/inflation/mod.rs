//! Hybrid inflation of the star: the source feeding branch 1 is treated as classical and
//! its branch party is cloned three times, while the other two sources stay untouched.
//!
//! Variables are p(a11, a12, a13, a2, a3, b | x11, x12, x13, x2, x3), laid out as
//! `input_index * 64 + output_index` with the first party most significant (the
//! [`inflated_scenario`] layout). The constraints are
//!
//! - positivity of every variable,
//! - normalization per joint setting,
//! - no-signaling for each of the five parties with an input,
//! - invariance under every permutation of the three branch-1 copies,
//! - agreement of the (copy 1, A2, A3, B) marginal with the target for every value of the
//!   spectator inputs (x12, x13).
//!
//! Placements other than source 1 are handled by relabeling the target first, so the
//! classical source always feeds branch 1 inside the LP.

mod hybrid;
mod rationalize;

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::dist::{ConditionalDistribution, Party, Scenario};
use crate::error::{domain, Result};
use crate::lpsolve::{
    feasibility_with, rational, Feasibility, LinearSystem, Rational, SolverOptions, SparseRow,
};

pub use hybrid::{
    random_quantum_box, sample_quantum_model, sample_rational_model, HybridComponent, HybridModel,
    NsiBox, MAX_COMPONENTS,
};
pub use rationalize::{is_exactly_no_signaling, rationalize};

pub const COPIES: usize = 3;
pub const DEFAULT_DENOMINATOR_BOUND: u64 = 1_000_000;

const PERMUTATIONS: [[usize; 3]; 5] = [[1, 0, 2], [2, 1, 0], [0, 2, 1], [1, 2, 0], [2, 0, 1]];

/// What an equality row of the inflation LP encodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    Normalization { setting: usize },
    NoSignaling { party: usize },
    Symmetry { permutation: [usize; 3] },
    /// Right-hand side is entry `base_index` of the relabeled target table.
    Marginal { base_index: usize },
}

/// Parties of the inflated network: three copies of branch 1, then A2, A3, B.
pub fn inflated_scenario() -> Scenario {
    Scenario::new(vec![
        Party::new("A1_1", 2, 2),
        Party::new("A1_2", 2, 2),
        Party::new("A1_3", 2, 2),
        Party::new("A2", 2, 2),
        Party::new("A3", 2, 2),
        Party::new("B", 1, 2),
    ])
    .expect("static scenario")
}

/// Relabeling of the star that moves branch `classical_source` (1-based) into slot 1 and
/// keeps the cyclic order of the others. New party i is old party `perm[i]`.
pub fn placement_permutation(classical_source: usize) -> Result<[usize; 4]> {
    match classical_source {
        1 => Ok([0, 1, 2, 3]),
        2 => Ok([1, 2, 0, 3]),
        3 => Ok([2, 0, 1, 3]),
        k => Err(domain(format!("classical source must be 1, 2 or 3, got {k}"))),
    }
}

struct Template {
    system: LinearSystem,
    kinds: Vec<RowKind>,
}

fn template() -> &'static Template {
    static TEMPLATE: OnceLock<Template> = OnceLock::new();
    TEMPLATE.get_or_init(build_template)
}

fn build_template() -> Template {
    let inf = inflated_scenario();
    let base = Scenario::star();
    let n = inf.table_len();
    let mut ls = LinearSystem::new(n);
    let mut kinds = Vec::new();
    let one = rational::int(1);
    let minus = rational::int(-1);
    let zero = rational::int(0);

    let labels = (0..n)
        .map(|col| {
            let (x, o) = (col / inf.num_joint_outputs(), col % inf.num_joint_outputs());
            let digits = |v: Vec<usize>| v.iter().map(|d| d.to_string()).collect::<String>();
            format!("p{}_{}", digits(inf.decode_outputs(o)), digits(inf.decode_inputs(x)))
        })
        .collect();
    ls.set_labels(labels).expect("one label per column");

    for x in 0..inf.num_joint_inputs() {
        let row = (0..inf.num_joint_outputs()).map(|o| (inf.index(x, o), one.clone())).collect();
        ls.add_equality(row, one.clone()).expect("columns in range");
        kinds.push(RowKind::Normalization { setting: x });
    }

    for party in 0..5 {
        for x in 0..inf.num_joint_inputs() {
            let mut xs = inf.decode_inputs(x);
            if xs[party] != 0 {
                continue;
            }
            xs[party] = 1;
            let x_alt = inf.encode_inputs(&xs);
            for o in 0..inf.num_joint_outputs() {
                if inf.decode_outputs(o)[party] != 0 {
                    continue;
                }
                let mut row: SparseRow = Vec::with_capacity(4);
                for a in 0..2 {
                    let mut os = inf.decode_outputs(o);
                    os[party] = a;
                    let o = inf.encode_outputs(&os);
                    row.push((inf.index(x, o), one.clone()));
                    row.push((inf.index(x_alt, o), minus.clone()));
                }
                ls.add_equality(row, zero.clone()).expect("columns in range");
                kinds.push(RowKind::NoSignaling { party });
            }
        }
    }

    let mut seen = std::collections::HashSet::new();
    for perm in PERMUTATIONS {
        for col in 0..n {
            let (x, o) = (col / inf.num_joint_outputs(), col % inf.num_joint_outputs());
            let (xs, os) = (inf.decode_inputs(x), inf.decode_outputs(o));
            let (mut xp, mut op) = (xs.clone(), os.clone());
            for c in 0..COPIES {
                xp[c] = xs[perm[c]];
                op[c] = os[perm[c]];
            }
            let image = inf.index(inf.encode_inputs(&xp), inf.encode_outputs(&op));
            if image == col || !seen.insert((col.min(image), col.max(image))) {
                continue;
            }
            ls.add_equality(vec![(col, one.clone()), (image, minus.clone())], zero.clone())
                .expect("columns in range");
            kinds.push(RowKind::Symmetry { permutation: perm });
        }
    }

    for x in 0..inf.num_joint_inputs() {
        let xs = inf.decode_inputs(x);
        let base_in = base.encode_inputs(&[xs[0], xs[3], xs[4], 0]);
        for bo in 0..base.num_joint_outputs() {
            let os = base.decode_outputs(bo);
            let row = (0..4)
                .map(|spect| {
                    let out = inf.encode_outputs(&[os[0], spect / 2, spect % 2, os[1], os[2], os[3]]);
                    (inf.index(x, out), one.clone())
                })
                .collect();
            ls.add_equality(row, zero.clone()).expect("columns in range");
            kinds.push(RowKind::Marginal { base_index: base.index(base_in, bo) });
        }
    }

    for col in 0..n {
        ls.add_inequality(vec![(col, one.clone())], zero.clone()).expect("columns in range");
    }
    Template { system: ls, kinds }
}

#[derive(Clone, Debug)]
pub struct InflationOptions {
    /// Largest denominator allowed when rationalizing the target distribution.
    pub denominator_bound: u64,
    pub solver: SolverOptions,
}

impl Default for InflationOptions {
    fn default() -> Self {
        Self { denominator_bound: DEFAULT_DENOMINATOR_BOUND, solver: SolverOptions::default() }
    }
}

/// One compiled inflation LP together with the bookkeeping needed to read certificates.
#[derive(Clone, Debug)]
pub struct InflationProblem {
    classical_source: usize,
    relabel: [usize; 4],
    /// Target table in the original labeling.
    target: Vec<Rational>,
    system: LinearSystem,
}

impl InflationProblem {
    pub fn classical_source(&self) -> usize {
        self.classical_source
    }

    /// New party i of the LP's base scenario is party `relabel()[i]` of the target.
    pub fn relabel(&self) -> [usize; 4] {
        self.relabel
    }

    pub fn target(&self) -> &[Rational] {
        &self.target
    }

    pub fn system(&self) -> &LinearSystem {
        &self.system
    }

    pub fn row_kinds(&self) -> &'static [RowKind] {
        &template().kinds
    }

    pub fn solve(&self, opts: &SolverOptions) -> Result<Feasibility> {
        feasibility_with(&self.system, opts)
    }

    /// Largest constraint violation of a floating-point candidate p_inf (positivity,
    /// equalities). Used to check explicit inflations of irrational models.
    pub fn residual(&self, point: &[f64]) -> f64 {
        let ls = &self.system;
        let mut worst = point.iter().map(|&v| (-v).max(0.0)).fold(0.0, f64::max);
        for (row, b) in ls.eq_rows().iter().zip(ls.eq_rhs()) {
            let lhs: f64 = row.iter().map(|(j, a)| rational::to_f64(a) * point[*j]).sum();
            worst = worst.max((lhs - rational::to_f64(b)).abs());
        }
        worst
    }
}

/// Compiles the LP for `d` with the default denominator bound.
pub fn build_inflation_lp(d: &ConditionalDistribution, classical_source: usize) -> Result<InflationProblem> {
    build_inflation_lp_with(d, classical_source, &InflationOptions::default())
}

pub fn build_inflation_lp_with(
    d: &ConditionalDistribution,
    classical_source: usize,
    opts: &InflationOptions,
) -> Result<InflationProblem> {
    check_target(d)?;
    let exact = rationalize(d, opts.denominator_bound)?;
    build_inflation_lp_exact(&exact, classical_source)
}

/// Compiles the LP for an exact target table over [`Scenario::star`].
pub fn build_inflation_lp_exact(target: &[Rational], classical_source: usize) -> Result<InflationProblem> {
    let base = Scenario::star();
    if target.len() != base.table_len() {
        return Err(domain(format!("target has {} entries, expected {}", target.len(), base.table_len())));
    }
    let relabel = placement_permutation(classical_source)?;
    let map = base.permutation_index_map(&relabel)?;
    let tpl = template();
    let mut system = tpl.system.clone();
    for (r, kind) in tpl.kinds.iter().enumerate() {
        if let RowKind::Marginal { base_index } = kind {
            system.set_eq_rhs(r, target[map[*base_index]].clone());
        }
    }
    Ok(InflationProblem { classical_source, relabel, target: target.to_vec(), system })
}

fn check_target(d: &ConditionalDistribution) -> Result<()> {
    if d.scenario() != &Scenario::star() {
        return Err(domain("inflation targets must be star distributions (A1, A2, A3, B)"));
    }
    let report = d.validate();
    if !report.is_valid() {
        return Err(domain(format!(
            "target distribution is not valid: negativity {:e}, normalization {:e}, signaling {:e}",
            report.nonnegativity,
            report.normalization,
            report.no_signaling_residual()
        )));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct PlacementOutcome {
    pub problem: InflationProblem,
    pub result: Feasibility,
}

#[derive(Clone, Debug)]
pub struct FnnReport {
    pub placements: Vec<PlacementOutcome>,
    /// True iff every placement is infeasible.
    pub fnn: bool,
    /// For targets invariant under cyclic relabeling of the branches (within 1e−12), whether
    /// the three placements agree, as the symmetry argument predicts. `None` otherwise.
    pub agrees_with_symmetry: Option<bool>,
}

impl FnnReport {
    pub fn certificates(&self) -> impl Iterator<Item = (&InflationProblem, &crate::lpsolve::FarkasCertificate)> {
        self.placements.iter().filter_map(|p| p.result.certificate().map(|c| (&p.problem, c)))
    }
}

pub fn certify_fnn(d: &ConditionalDistribution) -> Result<FnnReport> {
    certify_fnn_with(d, &InflationOptions::default())
}

/// Solves all three placements in parallel.
pub fn certify_fnn_with(d: &ConditionalDistribution, opts: &InflationOptions) -> Result<FnnReport> {
    check_target(d)?;
    let exact = rationalize(d, opts.denominator_bound)?;
    let placements = (1..=3)
        .into_par_iter()
        .map(|k| {
            let problem = build_inflation_lp_exact(&exact, k)?;
            let result = problem
                .solve(&opts.solver)
                .map_err(|e| crate::Error::Solver(format!("placement {k}: {e}")))?;
            Ok(PlacementOutcome { problem, result })
        })
        .collect::<Result<Vec<_>>>()?;
    let fnn = placements.iter().all(|p| !p.result.is_feasible());
    let cyclic = d.permute_parties(&[1, 2, 0, 3])?;
    let symmetric = d.table().iter().zip(cyclic.table()).all(|(a, b)| (a - b).abs() <= 1e-12);
    let agrees_with_symmetry = symmetric.then(|| {
        placements.iter().all(|p| p.result.is_feasible() == placements[0].result.is_feasible())
    });
    Ok(FnnReport { placements, fnn, agrees_with_symmetry })
}

/// All 128 deterministic star strategies: a response function per branch (constant 0,
/// constant 1, identity, negation) and a fixed centre outcome.
pub fn deterministic_strategies() -> Vec<ConditionalDistribution> {
    let mut out = Vec::with_capacity(128);
    for code in 0..128usize {
        let f = [code & 3, (code >> 2) & 3, (code >> 4) & 3];
        let b = code >> 6;
        let d = ConditionalDistribution::deterministic(Scenario::star(), |x: &[usize]| {
            let mut o: Vec<usize> = (0..3).map(|i| branch_response(f[i], x[i])).collect();
            o.push(b);
            o
        })
        .expect("deterministic strategies are valid");
        out.push(d);
    }
    out
}

/// One of the four functions {0,1} → {0,1}: 0, 1, identity, negation.
pub fn branch_response(kind: usize, x: usize) -> usize {
    match kind {
        0 => 0,
        1 => 1,
        2 => x,
        _ => 1 - x,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lpsolve::verify_point;
    use crate::qsim::{simulate_star, StarStrategy};

    #[test]
    fn template_shape() {
        let p = build_inflation_lp(&ConditionalDistribution::uniform(Scenario::star()), 1).unwrap();
        let ls = p.system();
        assert_eq!(ls.num_vars(), 2048);
        assert_eq!(ls.ineq_rows().len(), 2048);
        let count = |f: fn(&RowKind) -> bool| p.row_kinds().iter().filter(|k| f(k)).count();
        assert_eq!(count(|k| matches!(k, RowKind::Normalization { .. })), 32);
        assert_eq!(count(|k| matches!(k, RowKind::NoSignaling { .. })), 5 * 16 * 32);
        assert_eq!(count(|k| matches!(k, RowKind::Marginal { .. })), 512);
        // orbits of S3 acting on (copy output, copy input) pairs: each non-fixed variable
        // pairs with every other member of its orbit exactly once
        let inf = inflated_scenario();
        let mut pairs = 0;
        for col in 0..2048 {
            let (x, o) = (inf.decode_inputs(col / 64), inf.decode_outputs(col % 64));
            let key = |c: usize| (x[c], o[c]);
            let mut orbit: Vec<_> = vec![[key(0), key(1), key(2)]];
            for perm in PERMUTATIONS {
                orbit.push([key(perm[0]), key(perm[1]), key(perm[2])]);
            }
            orbit.sort();
            orbit.dedup();
            pairs += orbit.len() - 1;
        }
        assert_eq!(count(|k| matches!(k, RowKind::Symmetry { .. })), pairs / 2);
        assert_eq!(ls.eq_rows().len(), p.row_kinds().len());
    }

    #[test]
    fn uniform_point_is_feasible_by_hand() {
        let p = build_inflation_lp(&ConditionalDistribution::uniform(Scenario::star()), 2).unwrap();
        let point = vec![rational::ratio(1, 64); 2048];
        assert!(verify_point(p.system(), &point));
    }

    #[test]
    fn placement_rejects_bad_index() {
        assert!(placement_permutation(0).is_err());
        assert!(placement_permutation(4).is_err());
        let d = ConditionalDistribution::uniform(Scenario::bilocal());
        assert!(build_inflation_lp(&d, 1).is_err());
    }

    #[test]
    fn ideal_star_infeasible_everywhere() {
        let d = simulate_star(&StarStrategy::new(-1.865, -0.415)).unwrap();
        let opts = InflationOptions { denominator_bound: 10_000, ..Default::default() };
        let report = certify_fnn_with(&d, &opts).unwrap();
        assert!(report.fnn);
        assert_eq!(report.certificates().count(), 3);
        assert_eq!(report.agrees_with_symmetry, Some(true));
    }

    #[test]
    fn deterministic_strategies_are_distinct_and_feasible_somewhere() {
        let all = deterministic_strategies();
        assert_eq!(all.len(), 128);
        for (i, a) in all.iter().enumerate() {
            for b in &all[i + 1..] {
                assert_ne!(a.table(), b.table());
            }
        }
        let p = build_inflation_lp(&all[77], 3).unwrap();
        assert!(p.solve(&SolverOptions::default()).unwrap().is_feasible());
    }
}
