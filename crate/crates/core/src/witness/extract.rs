//! Witnesses read off Farkas certificates of the inflation LP.
//!
//! Only the marginal rows and the normalization rows have nonzero right-hand sides, so for
//! a certificate y the number yᵀb is an affine function of the target table:
//! W(d) = Σ y_marg · d + Σ y_norm. Any d whose LP is feasible has W(d) ≤ 0, and the
//! certified target has W > 0.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use super::{CorrelatorPolynomial, Symbol, Term};
use crate::dist::{ConditionalDistribution, Factor, Scenario};
use crate::error::{domain, structural, Result};
use crate::inflation::{InflationProblem, RowKind};
use crate::lpsolve::{rational, verify_certificate, FarkasCertificate, Rational};

/// Affine functional Σ w(o, x) p(o|x) + constant on star distributions.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityWitness {
    pub coefficients: Vec<Rational>,
    pub constant: Rational,
}

#[derive(Serialize, Deserialize)]
struct ProbabilityFile {
    constant: String,
    /// One entry per table index (joint input · 16 + joint output).
    coefficients: Vec<String>,
}

impl ProbabilityWitness {
    pub fn evaluate(&self, d: &ConditionalDistribution) -> Result<f64> {
        if d.scenario() != &Scenario::star() {
            return Err(structural("probability witnesses act on star distributions"));
        }
        let linear: f64 = self.coefficients.iter().zip(d.table()).map(|(w, p)| rational::to_f64(w) * p).sum();
        Ok(linear + rational::to_f64(&self.constant))
    }

    pub fn evaluate_exact(&self, table: &[Rational]) -> Result<Rational> {
        if table.len() != self.coefficients.len() {
            return Err(structural(format!("table has {} entries, expected {}", table.len(), self.coefficients.len())));
        }
        Ok(self.coefficients.iter().zip(table).map(|(w, p)| w * p).sum::<Rational>() + &self.constant)
    }

    pub fn scaled(&self, factor: &Rational) -> Self {
        Self {
            coefficients: self.coefficients.iter().map(|w| w * factor).collect(),
            constant: &self.constant * factor,
        }
    }

    /// Exact correlator coefficients: the constant, then one entry per nonempty party
    /// subset and setting of that subset. Agrees with the probability form on every
    /// no-signaling distribution.
    pub fn correlator_coefficients(&self) -> (Rational, Vec<(Symbol, Rational)>) {
        let s = Scenario::star();
        let n = s.num_parties();
        let cells = Rational::from_integer((1u32 << n).into());
        let mut constant = self.constant.clone();
        let mut out = Vec::new();
        for subset in 0..1usize << n {
            let members: Vec<usize> = (0..n).filter(|&i| subset >> (n - 1 - i) & 1 == 1).collect();
            // settings of the subset, enumerated through the joint inputs that fix the rest to 0
            let mut settings: Vec<Vec<usize>> = Vec::new();
            for x in 0..s.num_joint_inputs() {
                let xs = s.decode_inputs(x);
                if (0..n).all(|i| members.contains(&i) || xs[i] == 0) {
                    settings.push(xs);
                }
            }
            for fixed in settings {
                let mut c = Rational::zero();
                for x in 0..s.num_joint_inputs() {
                    let xs = s.decode_inputs(x);
                    if members.iter().any(|&i| xs[i] != fixed[i]) {
                        continue;
                    }
                    for o in 0..s.num_joint_outputs() {
                        let w = &self.coefficients[s.index(x, o)];
                        if w.is_zero() {
                            continue;
                        }
                        if (subset & o).count_ones() % 2 == 0 {
                            c += w;
                        } else {
                            c -= w;
                        }
                    }
                }
                c /= &cells;
                if c.is_zero() {
                    continue;
                }
                if members.is_empty() {
                    constant += c;
                } else {
                    out.push((members.iter().map(|&i| Factor::parity(i, fixed[i])).collect(), c));
                }
            }
        }
        (constant, out)
    }

    pub fn to_correlator_form(&self, name: &str) -> CorrelatorPolynomial {
        let (constant, coeffs) = self.correlator_coefficients();
        let terms = coeffs
            .into_iter()
            .map(|(symbol, c)| Term { coeff: rational::to_f64(&c), monomial: vec![symbol] })
            .collect();
        CorrelatorPolynomial::new(name, rational::to_f64(&constant), 0.0, terms)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ProbabilityFile {
            constant: rational::format(&self.constant),
            coefficients: self.coefficients.iter().map(rational::format).collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ProbabilityFile = serde_json::from_str(text)?;
        let parse = |s: &str| rational::parse(s).ok_or_else(|| structural(format!("bad rational {s:?}")));
        let coefficients = file.coefficients.iter().map(|s| parse(s)).collect::<Result<Vec<_>>>()?;
        if coefficients.len() != Scenario::star().table_len() {
            return Err(structural(format!("{} coefficients, expected {}", coefficients.len(), Scenario::star().table_len())));
        }
        Ok(Self { coefficients, constant: parse(&file.constant)? })
    }
}

/// A certificate turned into a witness, in both bases. Violation means value > 0.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtractedWitness {
    pub classical_source: usize,
    pub probability: ProbabilityWitness,
    pub correlator: CorrelatorPolynomial,
    /// Positive factor applied to yᵀb so that the correlator coefficients are coprime
    /// integers.
    pub scale: Rational,
}

pub fn from_certificate(cert: &FarkasCertificate, problem: &InflationProblem) -> Result<ExtractedWitness> {
    if !verify_certificate(problem.system(), cert) {
        return Err(domain("certificate does not verify against this inflation problem; refusing to extract"));
    }
    let base = Scenario::star();
    let map = base.permutation_index_map(&problem.relabel())?;
    let mut coefficients = vec![Rational::zero(); base.table_len()];
    let mut constant = Rational::zero();
    for (kind, y) in problem.row_kinds().iter().zip(&cert.y_eq) {
        match kind {
            RowKind::Marginal { base_index } => coefficients[map[*base_index]] += y,
            RowKind::Normalization { .. } => constant += y,
            RowKind::NoSignaling { .. } | RowKind::Symmetry { .. } => {}
        }
    }
    let raw = ProbabilityWitness { coefficients, constant };
    debug_assert_eq!(raw.evaluate_exact(problem.target()).ok(), Some(cert.objective(problem.system())));

    let (c0, terms) = raw.correlator_coefficients();
    let all: Vec<Rational> = std::iter::once(c0).chain(terms.into_iter().map(|(_, c)| c)).collect();
    let (_, scale) = rational::integerize(&all);
    if !scale.is_positive() {
        return Err(structural("certificate has an empty witness"));
    }
    let probability = raw.scaled(&scale);
    let name = format!("W{}", problem.classical_source());
    let correlator = probability.to_correlator_form(&name);
    Ok(ExtractedWitness { classical_source: problem.classical_source(), probability, correlator, scale })
}
