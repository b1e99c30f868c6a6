//! Witness inequalities: polynomials in correlators, evaluated against distributions.
//!
//! A correlator symbol is a set of factors (party, input, outcome signs). Its value on a
//! distribution is averaged over the inputs of parties it does not mention.

mod extract;

use serde::{Deserialize, Serialize};

use crate::dist::{ConditionalDistribution, Factor, Scenario, Signs};
use crate::error::{domain, structural, Result};

pub use extract::{from_certificate, ExtractedWitness, ProbabilityWitness};

/// Sorted by party, at most one factor per party. The empty symbol is the constant 1.
pub type Symbol = Vec<Factor>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: f64,
    pub monomial: Vec<Symbol>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorPolynomial {
    pub name: String,
    pub constant: f64,
    /// Violated when the value exceeds this.
    pub bound: f64,
    pub terms: Vec<Term>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TermValue {
    pub coeff: f64,
    pub factors: Vec<f64>,
    pub contribution: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Evaluation {
    pub value: f64,
    pub bound: f64,
    pub violated: bool,
    pub terms: Vec<TermValue>,
}

impl CorrelatorPolynomial {
    pub fn new(name: &str, constant: f64, bound: f64, terms: Vec<Term>) -> Self {
        Self { name: name.to_string(), constant, bound, terms }.canonicalize()
    }

    pub fn zero(name: &str) -> Self {
        Self::new(name, 0.0, 0.0, Vec::new())
    }

    /// Sorted factors and monomials, constant symbols folded into coefficients, equal
    /// monomials merged, zero terms dropped, empty monomials moved into the constant.
    pub fn canonicalize(&self) -> Self {
        let mut constant = self.constant;
        let mut merged: Vec<(Vec<Symbol>, f64)> = Vec::new();
        for t in &self.terms {
            let mut monomial: Vec<Symbol> = t
                .monomial
                .iter()
                .filter(|s| !s.is_empty())
                .map(|s| {
                    let mut s = s.clone();
                    s.sort();
                    s
                })
                .collect();
            monomial.sort();
            if monomial.is_empty() {
                constant += t.coeff;
                continue;
            }
            match merged.iter_mut().find(|(m, _)| *m == monomial) {
                Some((_, c)) => *c += t.coeff,
                None => merged.push((monomial, t.coeff)),
            }
        }
        let mut terms: Vec<Term> = merged
            .into_iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|(monomial, coeff)| Term { coeff, monomial })
            .collect();
        terms.sort_by(|a, b| {
            (a.monomial.len(), &a.monomial)
                .partial_cmp(&(b.monomial.len(), &b.monomial))
                .expect("symbols are totally ordered")
        });
        Self { name: self.name.clone(), constant, bound: self.bound, terms }
    }

    pub fn degree(&self) -> usize {
        self.terms.iter().map(|t| t.monomial.len()).max().unwrap_or(0)
    }

    /// Renames party p to `map[p]` in every symbol.
    pub fn relabel(&self, map: &[usize], name: &str) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| Term {
                coeff: t.coeff,
                monomial: t
                    .monomial
                    .iter()
                    .map(|s| s.iter().map(|f| Factor { party: map[f.party], ..f.clone() }).collect())
                    .collect(),
            })
            .collect();
        Self::new(name, self.constant, self.bound, terms)
    }

    pub fn evaluate(&self, d: &ConditionalDistribution) -> Result<Evaluation> {
        let mut value = self.constant;
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            let factors = t
                .monomial
                .iter()
                .map(|s| d.averaged_expectation(s))
                .collect::<Result<Vec<f64>>>()?;
            let contribution = t.coeff * factors.iter().product::<f64>();
            value += contribution;
            terms.push(TermValue { coeff: t.coeff, factors, contribution });
        }
        Ok(Evaluation { value, bound: self.bound, violated: value > self.bound, terms })
    }

    pub fn value(&self, d: &ConditionalDistribution) -> Result<f64> {
        Ok(self.evaluate(d)?.value)
    }

    /// Human-readable symbol, e.g. `<A1[0] A3[1] B>`.
    pub fn describe_symbol(symbol: &Symbol, scenario: &Scenario) -> String {
        let parts: Vec<String> = symbol
            .iter()
            .map(|f| {
                let p = &scenario.parties()[f.party];
                let mut s = p.name.clone();
                if p.inputs > 1 {
                    s.push_str(&format!("[{}]", f.input));
                }
                if let Signs::Weights(w) = &f.signs {
                    s.push_str(&format!("{w:?}"));
                }
                s
            })
            .collect();
        format!("<{}>", parts.join(" "))
    }

    pub fn describe_term(term: &Term, scenario: &Scenario) -> String {
        term.monomial.iter().map(|s| Self::describe_symbol(s, scenario)).collect::<Vec<_>>().join("")
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&WitnessFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: WitnessFile = serde_json::from_str(text)?;
        file.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct WitnessFile {
    name: String,
    constant: f64,
    bound: f64,
    terms: Vec<TermFile>,
}

#[derive(Serialize, Deserialize)]
struct TermFile {
    coeff: f64,
    monomial: Vec<SymbolFile>,
}

#[derive(Serialize, Deserialize)]
struct SymbolFile {
    parties: Vec<usize>,
    inputs: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    signs: Option<Vec<Signs>>,
}

impl From<&CorrelatorPolynomial> for WitnessFile {
    fn from(w: &CorrelatorPolynomial) -> Self {
        let terms = w
            .terms
            .iter()
            .map(|t| TermFile {
                coeff: t.coeff,
                monomial: t
                    .monomial
                    .iter()
                    .map(|s| SymbolFile {
                        parties: s.iter().map(|f| f.party).collect(),
                        inputs: s.iter().map(|f| f.input).collect(),
                        signs: s
                            .iter()
                            .any(|f| f.signs != Signs::Parity)
                            .then(|| s.iter().map(|f| f.signs.clone()).collect()),
                    })
                    .collect(),
            })
            .collect();
        Self { name: w.name.clone(), constant: w.constant, bound: w.bound, terms }
    }
}

impl TryFrom<WitnessFile> for CorrelatorPolynomial {
    type Error = crate::Error;

    fn try_from(file: WitnessFile) -> Result<Self> {
        let mut terms = Vec::new();
        for t in file.terms {
            let mut monomial = Vec::new();
            for s in t.monomial {
                let n = s.parties.len();
                if s.inputs.len() != n || s.signs.as_ref().is_some_and(|v| v.len() != n) {
                    return Err(structural("symbol parties, inputs and signs differ in length"));
                }
                let symbol: Symbol = (0..n)
                    .map(|i| Factor {
                        party: s.parties[i],
                        input: s.inputs[i],
                        signs: s.signs.as_ref().map_or(Signs::Parity, |v| v[i].clone()),
                    })
                    .collect();
                monomial.push(symbol);
            }
            terms.push(Term { coeff: t.coeff, monomial });
        }
        Ok(Self::new(&file.name, file.constant, file.bound, terms))
    }
}

fn parity_symbol(parties_inputs: &[(usize, usize)]) -> Symbol {
    parties_inputs.iter().map(|&(p, x)| Factor::parity(p, x)).collect()
}

const STAR_B: usize = 3;

/// I₁ and its cyclic images. Star party indices: A1=0, A2=1, A3=2, B=3.
pub fn builtin_fnn_star(i: usize) -> Result<CorrelatorPolynomial> {
    let base = star_i1();
    match i {
        1 => Ok(base),
        2 => Ok(base.relabel(&[1, 2, 0, 3], "I2")),
        3 => Ok(base.relabel(&[2, 0, 1, 3], "I3")),
        _ => Err(domain(format!("star witness index must be 1, 2 or 3, got {i}"))),
    }
}

fn star_i1() -> CorrelatorPolynomial {
    let mut terms = Vec::new();
    for (x1, x3, sign) in [(0, 0, -1.0), (1, 0, -1.0), (0, 1, -1.0), (1, 1, 1.0)] {
        let core = [(0, x1), (1, 0), (2, x3)];
        let outer = [(0, x1), (2, x3)];
        for parties in [&core[..], &outer[..]] {
            let mut with_b = parties.to_vec();
            with_b.push((STAR_B, 0));
            terms.push(Term { coeff: sign, monomial: vec![parity_symbol(&with_b)] });
            terms.push(Term { coeff: sign, monomial: vec![parity_symbol(parties)] });
        }
    }
    terms.push(Term { coeff: -2.0, monomial: vec![parity_symbol(&[(1, 0), (STAR_B, 0)])] });
    terms.push(Term { coeff: -2.0, monomial: vec![parity_symbol(&[(1, 0)])] });
    terms.push(Term { coeff: -2.0, monomial: vec![parity_symbol(&[(STAR_B, 0)])] });
    CorrelatorPolynomial::new("I1", -2.0, 0.0, terms)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BilocalWitness {
    /// Classical source between A and B.
    ClassicalNs,
    /// Classical source between B and C.
    NsClassical,
}

/// Bilocal-line witnesses with bound 3. Party indices: A=0, B=1, C=2.
pub fn builtin_fnn_bilocal(kind: BilocalWitness) -> CorrelatorPolynomial {
    let b0 = Signs::Weights(vec![1, 1, -1]);
    let b1 = Signs::Weights(vec![1, -1, 0]);
    let sym = |a: Option<usize>, b: Option<&Signs>, c: Option<usize>| -> Symbol {
        let mut s = Vec::new();
        if let Some(x) = a {
            s.push(Factor::parity(0, x));
        }
        if let Some(signs) = b {
            s.push(Factor { party: 1, input: 0, signs: signs.clone() });
        }
        if let Some(z) = c {
            s.push(Factor::parity(2, z));
        }
        s
    };
    let t = |coeff: f64, monomial: Vec<Symbol>| Term { coeff, monomial };
    let (w10, w11) = match kind {
        BilocalWitness::ClassicalNs => (2.0, 1.0),
        BilocalWitness::NsClassical => (1.0, 2.0),
    };
    let mut terms = vec![
        t(2.0, vec![sym(Some(0), Some(&b1), Some(0))]),
        t(-2.0, vec![sym(Some(0), Some(&b1), Some(1))]),
        t(w10, vec![sym(Some(1), Some(&b0), Some(0))]),
        t(w11, vec![sym(Some(1), Some(&b0), Some(1))]),
        t(-1.0, vec![sym(None, Some(&b0), None)]),
    ];
    let name = match kind {
        BilocalWitness::ClassicalNs => {
            let c1 = sym(None, None, Some(1));
            terms.push(t(1.0, vec![sym(Some(1), Some(&b0), None), c1.clone()]));
            terms.push(t(1.0, vec![sym(None, Some(&b0), Some(0)), c1.clone()]));
            terms.push(t(-1.0, vec![sym(None, None, Some(0)), c1]));
            "R_C-NS"
        }
        BilocalWitness::NsClassical => {
            let a1 = sym(Some(1), None, None);
            terms.push(t(1.0, vec![a1.clone(), sym(Some(1), Some(&b0), None)]));
            terms.push(t(1.0, vec![a1.clone(), sym(None, Some(&b0), Some(1))]));
            terms.push(t(1.0, vec![a1.clone(), sym(None, None, Some(0))]));
            terms.push(t(-1.0, vec![a1.clone(), sym(None, None, Some(1))]));
            terms.push(t(-1.0, vec![a1.clone(), a1]));
            "R_NS-C"
        }
    };
    CorrelatorPolynomial::new(name, 0.0, 3.0, terms)
}

/// A linear star witness rewritten over GHZ-success data only.
///
/// Requires every symbol S (over branches) to appear with the same coefficient as S·B,
/// and the constant to equal the coefficient of ⟨B⟩; then
/// ⟨S⟩ + ⟨S B⟩ = 2 Σ_a (−1)^{a_S} p(a, b=0|x) and c + c⟨B⟩ = 2c·p(b=0).
#[derive(Clone, Debug, PartialEq)]
pub struct B0Reduction {
    /// Coefficient of p(b=0).
    pub constant: f64,
    /// (coefficient, branch-only symbol) with the factor 2 already applied.
    pub terms: Vec<(f64, Symbol)>,
}

impl B0Reduction {
    pub fn new(w: &CorrelatorPolynomial) -> Result<Self> {
        let w = w.canonicalize();
        if w.degree() > 1 {
            return Err(domain("only linear witnesses reduce to GHZ-success data"));
        }
        let coeff_of = |symbol: &Symbol| -> f64 {
            w.terms.iter().find(|t| &t.monomial[0] == symbol).map_or(0.0, |t| t.coeff)
        };
        let b_symbol: Symbol = vec![Factor::parity(STAR_B, 0)];
        let cb = coeff_of(&b_symbol);
        if (cb - w.constant).abs() > 1e-12 {
            return Err(domain("constant must equal the <B> coefficient"));
        }
        let mut terms = Vec::new();
        for t in &w.terms {
            let s = &t.monomial[0];
            if s.iter().any(|f| f.signs != Signs::Parity) {
                return Err(domain("GHZ-success reduction needs parity correlators"));
            }
            let has_b = s.iter().any(|f| f.party == STAR_B);
            let branch: Symbol = s.iter().filter(|f| f.party != STAR_B).cloned().collect();
            if branch.is_empty() {
                continue;
            }
            let mut partner = branch.clone();
            if !has_b {
                partner.push(Factor::parity(STAR_B, 0));
            }
            let partner_coeff = if has_b { coeff_of(&branch) } else { coeff_of(&partner) };
            if (partner_coeff - t.coeff).abs() > 1e-12 {
                return Err(domain("each branch correlator must pair with its <..B> partner"));
            }
            if !has_b {
                terms.push((2.0 * t.coeff, branch));
            }
        }
        Ok(Self { constant: 2.0 * cb, terms })
    }

    /// `b0_table` is p(a | b=0, x) over the three branches.
    pub fn evaluate(&self, b0_table: &ConditionalDistribution, p_b0: f64) -> Result<f64> {
        if b0_table.scenario() != &Scenario::star_branches() {
            return Err(structural("GHZ-success data must be over the branches A1, A2, A3"));
        }
        if !(0.0..=1.0).contains(&p_b0) {
            return Err(domain(format!("p(b=0) = {p_b0} outside [0, 1]")));
        }
        let r = b0_table.validate();
        if r.normalization > crate::dist::NORMALIZATION_TOLERANCE || r.nonnegativity > 0.0 {
            return Err(domain("GHZ-success table is not normalized per setting"));
        }
        let mut value = self.constant * p_b0;
        for (c, s) in &self.terms {
            value += c * p_b0 * b0_table.averaged_expectation(s)?;
        }
        Ok(value)
    }
}

/// I_i from p(a | b=0, x) and p(b=0) alone.
pub fn evaluate_from_b0_data(i: usize, b0_table: &ConditionalDistribution, p_b0: f64) -> Result<f64> {
    B0Reduction::new(&builtin_fnn_star(i)?)?.evaluate(b0_table, p_b0)
}

/// p(a | b=0, x) and the setting-averaged p(b=0) of a full star distribution.
pub fn condition_on_ghz_success(d: &ConditionalDistribution) -> Result<(ConditionalDistribution, f64)> {
    if d.scenario() != &Scenario::star() {
        return Err(structural("expected the star scenario"));
    }
    let b0 = d.marginal(&[0, 1, 2], Some((STAR_B, 0)))?;
    let p = d.marginal(&[STAR_B], None)?.table()[0];
    Ok((b0, p))
}
