//! Exact rational versions of floating-point targets.
//!
//! Tables whose entries are all close to fractions with small denominators (deterministic
//! strategies, uniform mixtures, dyadic hybrid models) are recovered entry by entry. When
//! that does not give an exactly normalized, no-signaling table (irrational quantum
//! values), every full-body correlator is rounded to a multiple of 1/M instead, with
//! M = bound / 2ⁿ for n binary-output parties. Probabilities rebuilt from rounded
//! correlators are multiples of 1/(2ⁿM), exactly normalized and no-signaling; any negative
//! entries are repaired by mixing in the uniform table with weight t ∈ {1/M, 2/M, 4/M, …}.

use num_traits::{Signed, Zero};

use crate::dist::{ConditionalDistribution, Scenario};
use crate::error::{domain, Result};
use crate::lpsolve::{rational, Rational};

const ENTRY_TOLERANCE: f64 = 1e-14;

pub fn rationalize(d: &ConditionalDistribution, bound: u64) -> Result<Vec<Rational>> {
    if bound == 0 {
        return Err(domain("denominator bound must be positive"));
    }
    let entrywise: Vec<Rational> =
        d.table().iter().map(|&p| rational::approximate(p, bound, ENTRY_TOLERANCE)).collect();
    let close = entrywise
        .iter()
        .zip(d.table())
        .all(|(r, &p)| (rational::to_f64(r) - p).abs() <= ENTRY_TOLERANCE);
    if close && is_normalized(d.scenario(), &entrywise) && is_exactly_no_signaling(d.scenario(), &entrywise)
    {
        return Ok(entrywise);
    }
    correlator_grid(d, bound)
}

fn is_normalized(s: &Scenario, t: &[Rational]) -> bool {
    let one = rational::int(1);
    t.iter().all(|v| !v.is_negative())
        && t.chunks(s.num_joint_outputs()).all(|row| row.iter().sum::<Rational>() == one)
}

/// Exact check that no party's input changes the joint distribution of the others.
pub fn is_exactly_no_signaling(s: &Scenario, t: &[Rational]) -> bool {
    let parties = s.parties();
    for (k, party) in parties.iter().enumerate() {
        if party.inputs < 2 {
            continue;
        }
        for x in 0..s.num_joint_inputs() {
            let xs = s.decode_inputs(x);
            if xs[k] != 0 {
                continue;
            }
            let reference = others_marginal(s, t, x, k);
            for alt in 1..party.inputs {
                let mut ys = xs.clone();
                ys[k] = alt;
                if others_marginal(s, t, s.encode_inputs(&ys), k) != reference {
                    return false;
                }
            }
        }
    }
    true
}

fn others_marginal(s: &Scenario, t: &[Rational], x: usize, k: usize) -> Vec<Rational> {
    let width = s.num_joint_outputs() / s.parties()[k].outputs;
    let mut out = vec![Rational::zero(); width];
    for o in 0..s.num_joint_outputs() {
        let mut os = s.decode_outputs(o);
        os.remove(k);
        let rest = os.iter().zip(s.parties().iter().enumerate().filter(|(i, _)| *i != k))
            .fold(0, |acc, (&v, (_, p))| acc * p.outputs + v);
        out[rest] += &t[s.index(x, o)];
    }
    out
}

fn correlator_grid(d: &ConditionalDistribution, bound: u64) -> Result<Vec<Rational>> {
    let s = d.scenario();
    let n = s.num_parties();
    if s.parties().iter().any(|p| p.outputs != 2) {
        return Err(domain("correlator rounding needs binary outputs for every party"));
    }
    let cells = 1u64 << n;
    let m = bound / cells;
    if m == 0 {
        return Err(domain(format!("denominator bound {bound} is below {cells}")));
    }
    let m_big = Rational::from_integer(m.into());

    // rounded[S][x] = round(M·E(S, x)) for the full setting x (averaged over inputs outside S)
    let subsets = 1usize << n;
    let mut rounded = vec![vec![0i64; s.num_joint_inputs()]; subsets];
    for (subset, row) in rounded.iter_mut().enumerate() {
        for x in 0..s.num_joint_inputs() {
            let xs = s.decode_inputs(x);
            let compatible: Vec<usize> = (0..s.num_joint_inputs())
                .filter(|&y| {
                    let ys = s.decode_inputs(y);
                    (0..n).all(|i| subset >> (n - 1 - i) & 1 == 0 || ys[i] == xs[i])
                })
                .collect();
            let mut e = 0.0;
            for &y in &compatible {
                for o in 0..s.num_joint_outputs() {
                    let parity = (subset & o).count_ones() % 2;
                    let sign = if parity == 0 { 1.0 } else { -1.0 };
                    e += sign * d.table()[s.index(y, o)];
                }
            }
            e /= compatible.len() as f64;
            *row.get_mut(x).expect("in range") = (e * m as f64).round() as i64;
        }
    }
    rounded[0].iter_mut().for_each(|v| *v = m as i64);

    // integer numerators over 2ⁿM
    let mut numer = vec![0i64; s.table_len()];
    for x in 0..s.num_joint_inputs() {
        for o in 0..s.num_joint_outputs() {
            numer[s.index(x, o)] = (0..subsets)
                .map(|subset| {
                    let sign = if (subset & o).count_ones() % 2 == 0 { 1 } else { -1 };
                    sign * rounded[subset][x]
                })
                .sum();
        }
    }
    let denom = Rational::from_integer((cells * m).into());
    let base: Vec<Rational> = numer.iter().map(|&v| Rational::from_integer(v.into()) / &denom).collect();
    let flat = rational::ratio(1, cells as i64);
    let mut step = 0u64;
    loop {
        let t = Rational::from_integer(step.into()) / &m_big;
        if t > rational::int(1) {
            return Err(domain("could not repair negative entries of the rounded table"));
        }
        let mixed: Vec<Rational> = base
            .iter()
            .map(|p| p * (rational::int(1) - &t) + &flat * &t)
            .collect();
        if mixed.iter().all(|v| !v.is_negative()) {
            if step > 0 {
                log::info!("mixed {} of the uniform table into the rounded target", rational::format(&t));
            }
            return Ok(mixed);
        }
        step = if step == 0 { 1 } else { step * 2 };
    }
}
