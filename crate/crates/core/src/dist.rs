//! Conditional probability tables p(outputs | inputs) over a network scenario.
//!
//! Tables are dense and row-major over (joint input, joint output). Joint indices are
//! mixed-radix with the first party most significant.
//!
//! Whenever a quantity leaves some party's input unspecified (a correlator over a
//! subset, a marginal, a pairwise entropy), it is averaged uniformly over every joint
//! setting compatible with the specified inputs. On no-signaling data the choice is
//! irrelevant; on finite-count data it uses all recorded settings.

use serde::{Deserialize, Serialize};

use crate::error::{domain, structural, Error, Result};

/// Entries this far below zero are treated as round-off and clamped.
pub const CLAMP_TOLERANCE: f64 = 1e-12;
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;
pub const NO_SIGNALING_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Party {
    pub name: String,
    pub inputs: usize,
    pub outputs: usize,
}

impl Party {
    pub fn new(name: &str, inputs: usize, outputs: usize) -> Self {
        Self { name: name.to_string(), inputs, outputs }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Scenario {
    parties: Vec<Party>,
    joint_inputs: usize,
    joint_outputs: usize,
}

impl Scenario {
    pub fn new(parties: Vec<Party>) -> Result<Self> {
        if parties.is_empty() {
            return Err(structural("scenario needs at least one party"));
        }
        for (i, p) in parties.iter().enumerate() {
            if p.inputs == 0 || p.outputs == 0 {
                return Err(structural(format!("party {} has a zero cardinality", p.name)));
            }
            if parties[..i].iter().any(|q| q.name == p.name) {
                return Err(structural(format!("duplicate party name {}", p.name)));
            }
        }
        let joint_inputs = parties.iter().map(|p| p.inputs).product();
        let joint_outputs = parties.iter().map(|p| p.outputs).product();
        Ok(Self { parties, joint_inputs, joint_outputs })
    }

    /// Branches A1, A2, A3 (binary in, binary out) and centre B (one input, binary out).
    pub fn star() -> Self {
        Self::new(vec![
            Party::new("A1", 2, 2),
            Party::new("A2", 2, 2),
            Party::new("A3", 2, 2),
            Party::new("B", 1, 2),
        ])
        .expect("static scenario")
    }

    /// The three star branches alone, as used for data conditioned on the centre's outcome.
    pub fn star_branches() -> Self {
        Self::new(vec![Party::new("A1", 2, 2), Party::new("A2", 2, 2), Party::new("A3", 2, 2)])
            .expect("static scenario")
    }

    /// A (inputs x), B (fixed input, three outcomes), C (inputs z).
    pub fn bilocal() -> Self {
        Self::new(vec![Party::new("A", 2, 2), Party::new("B", 1, 3), Party::new("C", 2, 2)])
            .expect("static scenario")
    }

    pub fn parties(&self) -> &[Party] {
        &self.parties
    }

    pub fn num_parties(&self) -> usize {
        self.parties.len()
    }

    pub fn party_index(&self, name: &str) -> Option<usize> {
        self.parties.iter().position(|p| p.name == name)
    }

    pub fn num_joint_inputs(&self) -> usize {
        self.joint_inputs
    }

    pub fn num_joint_outputs(&self) -> usize {
        self.joint_outputs
    }

    pub fn table_len(&self) -> usize {
        self.joint_inputs * self.joint_outputs
    }

    pub fn index(&self, joint_input: usize, joint_output: usize) -> usize {
        joint_input * self.joint_outputs + joint_output
    }

    fn encode(values: &[usize], radix: impl Iterator<Item = usize>) -> usize {
        values.iter().zip(radix).fold(0, |acc, (&v, r)| acc * r + v)
    }

    fn decode(mut idx: usize, radix: &[usize]) -> Vec<usize> {
        let mut out = vec![0; radix.len()];
        for (slot, &r) in out.iter_mut().zip(radix).rev() {
            *slot = idx % r;
            idx /= r;
        }
        out
    }

    pub fn encode_inputs(&self, inputs: &[usize]) -> usize {
        debug_assert_eq!(inputs.len(), self.parties.len());
        Self::encode(inputs, self.parties.iter().map(|p| p.inputs))
    }

    pub fn encode_outputs(&self, outputs: &[usize]) -> usize {
        debug_assert_eq!(outputs.len(), self.parties.len());
        Self::encode(outputs, self.parties.iter().map(|p| p.outputs))
    }

    pub fn decode_inputs(&self, idx: usize) -> Vec<usize> {
        Self::decode(idx, &self.parties.iter().map(|p| p.inputs).collect::<Vec<_>>())
    }

    pub fn decode_outputs(&self, idx: usize) -> Vec<usize> {
        Self::decode(idx, &self.parties.iter().map(|p| p.outputs).collect::<Vec<_>>())
    }

    pub fn check_inputs(&self, inputs: &[usize]) -> Result<()> {
        if inputs.len() != self.parties.len() {
            return Err(structural(format!(
                "expected {} inputs, got {}",
                self.parties.len(),
                inputs.len()
            )));
        }
        for (p, &x) in self.parties.iter().zip(inputs) {
            if x >= p.inputs {
                return Err(structural(format!("input {x} out of range for party {}", p.name)));
            }
        }
        Ok(())
    }

    fn check_party(&self, party: usize) -> Result<()> {
        if party >= self.parties.len() {
            return Err(structural(format!("party index {party} out of range")));
        }
        Ok(())
    }

    /// Joint input indices whose entries agree with every `(party, input)` in `fixed`.
    pub fn settings_matching(&self, fixed: &[(usize, usize)]) -> Vec<usize> {
        (0..self.joint_inputs)
            .filter(|&i| {
                let xs = self.decode_inputs(i);
                fixed.iter().all(|&(p, x)| xs[p] == x)
            })
            .collect()
    }

    /// `result[new_index] = old_index` for the relabeling where new party i is old party
    /// `perm[i]`. Requires matching cardinalities.
    pub fn permutation_index_map(&self, perm: &[usize]) -> Result<Vec<usize>> {
        let n = self.parties.len();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(structural(format!("{perm:?} is not a permutation of {n} parties")));
        }
        for (i, &p) in perm.iter().enumerate() {
            let (a, b) = (&self.parties[i], &self.parties[p]);
            if a.inputs != b.inputs || a.outputs != b.outputs {
                return Err(structural(format!(
                    "cannot relabel {} as {}: cardinalities differ",
                    b.name, a.name
                )));
            }
        }
        let mut map = vec![0; self.table_len()];
        for new_in in 0..self.joint_inputs {
            let xs = self.decode_inputs(new_in);
            let mut old_x = vec![0; n];
            for i in 0..n {
                old_x[perm[i]] = xs[i];
            }
            let old_in = self.encode_inputs(&old_x);
            for new_out in 0..self.joint_outputs {
                let os = self.decode_outputs(new_out);
                let mut old_o = vec![0; n];
                for i in 0..n {
                    old_o[perm[i]] = os[i];
                }
                map[self.index(new_in, new_out)] = self.index(old_in, self.encode_outputs(&old_o));
            }
        }
        Ok(map)
    }
}

/// Outcome weighting of one party inside a correlator.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signs {
    /// (−1)^outcome
    Parity,
    /// Explicit weight per outcome.
    Weights(Vec<i32>),
}

impl Signs {
    pub fn weight(&self, outcome: usize) -> f64 {
        match self {
            Signs::Parity => {
                if outcome % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            Signs::Weights(w) => w[outcome] as f64,
        }
    }

    fn check(&self, party: &Party) -> Result<()> {
        match self {
            Signs::Parity if party.outputs != 2 => Err(domain(format!(
                "party {} has {} outcomes; parity correlators need binary outcomes",
                party.name, party.outputs
            ))),
            Signs::Weights(w) if w.len() != party.outputs => Err(structural(format!(
                "party {} has {} outcomes but {} weights were given",
                party.name,
                party.outputs,
                w.len()
            ))),
            _ => Ok(()),
        }
    }
}

/// One party's contribution to a correlator: its input and outcome weighting.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Factor {
    pub party: usize,
    pub input: usize,
    pub signs: Signs,
}

impl Factor {
    pub fn parity(party: usize, input: usize) -> Self {
        Self { party, input, signs: Signs::Parity }
    }
}

/// Centre observables of the bilocal line, weighting b = 0, 1, 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BobObservable {
    /// (+1, +1, −1)
    B0,
    /// (+1, −1, 0)
    B1,
}

impl BobObservable {
    pub fn signs(self) -> Signs {
        match self {
            BobObservable::B0 => Signs::Weights(vec![1, 1, -1]),
            BobObservable::B1 => Signs::Weights(vec![1, -1, 0]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartySignaling {
    pub party: String,
    /// How much the other parties' joint marginal moves with this party's input.
    pub outgoing: f64,
    /// How much this party's marginal moves with the other parties' inputs.
    pub incoming: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    /// Magnitude of the most negative entry (0 when all are nonnegative).
    pub nonnegativity: f64,
    pub normalization: f64,
    pub no_signaling: Vec<PartySignaling>,
}

impl ValidationReport {
    pub fn no_signaling_residual(&self) -> f64 {
        self.no_signaling.iter().map(|s| s.outgoing.max(s.incoming)).fold(0.0, f64::max)
    }

    pub fn is_valid(&self) -> bool {
        self.nonnegativity <= CLAMP_TOLERANCE
            && self.normalization <= NORMALIZATION_TOLERANCE
            && self.no_signaling_residual() <= NO_SIGNALING_TOLERANCE
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalDistribution {
    scenario: Scenario,
    table: Vec<f64>,
}

impl ConditionalDistribution {
    /// Checked construction: clamps round-off negatives, rejects real negatives and
    /// unnormalized rows.
    pub fn new(scenario: Scenario, mut table: Vec<f64>) -> Result<Self> {
        check_shape(&scenario, &table)?;
        let mut clamped = 0usize;
        for p in table.iter_mut() {
            if *p < -CLAMP_TOLERANCE {
                return Err(domain(format!("negative probability {p}")));
            }
            if *p < 0.0 {
                *p = 0.0;
                clamped += 1;
            }
        }
        if clamped > 0 {
            log::warn!("clamped {clamped} round-off negative entries to zero");
        }
        let d = Self { scenario, table };
        let residual = d.normalization_residual();
        if residual > NORMALIZATION_TOLERANCE {
            return Err(domain(format!("rows not normalized (residual {residual:e})")));
        }
        Ok(d)
    }

    /// Shape-checked only; use for inspecting arbitrary tables with [`Self::validate`].
    pub fn from_raw(scenario: Scenario, table: Vec<f64>) -> Result<Self> {
        check_shape(&scenario, &table)?;
        Ok(Self { scenario, table })
    }

    pub fn uniform(scenario: Scenario) -> Self {
        let p = 1.0 / scenario.num_joint_outputs() as f64;
        let table = vec![p; scenario.table_len()];
        Self { scenario, table }
    }

    /// Deterministic table: `response(inputs)` gives the joint output.
    pub fn deterministic(
        scenario: Scenario,
        response: impl Fn(&[usize]) -> Vec<usize>,
    ) -> Result<Self> {
        let mut table = vec![0.0; scenario.table_len()];
        for i in 0..scenario.num_joint_inputs() {
            let out = response(&scenario.decode_inputs(i));
            for (o, p) in out.iter().zip(scenario.parties()) {
                if *o >= p.outputs {
                    return Err(structural(format!("output {o} out of range for {}", p.name)));
                }
            }
            table[scenario.index(i, scenario.encode_outputs(&out))] = 1.0;
        }
        Self::new(scenario, table)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn row(&self, joint_input: usize) -> &[f64] {
        let n = self.scenario.num_joint_outputs();
        &self.table[joint_input * n..(joint_input + 1) * n]
    }

    pub fn prob(&self, outputs: &[usize], inputs: &[usize]) -> f64 {
        let s = &self.scenario;
        self.table[s.index(s.encode_inputs(inputs), s.encode_outputs(outputs))]
    }

    fn normalization_residual(&self) -> f64 {
        (0..self.scenario.num_joint_inputs())
            .map(|i| (self.row(i).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> ValidationReport {
        let nonnegativity = self.table.iter().map(|&p| (-p).max(0.0)).fold(0.0, f64::max);
        let no_signaling = (0..self.scenario.num_parties())
            .map(|k| PartySignaling {
                party: self.scenario.parties[k].name.clone(),
                outgoing: self.outgoing_signaling(k),
                incoming: self.incoming_signaling(k),
            })
            .collect();
        ValidationReport { nonnegativity, normalization: self.normalization_residual(), no_signaling }
    }

    /// Max change of Σ_{o_k} p(o|x) when only x_k changes.
    fn outgoing_signaling(&self, k: usize) -> f64 {
        let s = &self.scenario;
        let nk = s.parties[k].inputs;
        let mut worst: f64 = 0.0;
        for i in 0..s.num_joint_inputs() {
            let xs = s.decode_inputs(i);
            if xs[k] != 0 {
                continue;
            }
            let reference = self.sum_out(k, i);
            for alt in 1..nk {
                let mut ys = xs.clone();
                ys[k] = alt;
                let other = self.sum_out(k, s.encode_inputs(&ys));
                for (a, b) in reference.iter().zip(&other) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
        worst
    }

    /// Joint marginal of every party except k.
    fn sum_out(&self, k: usize, joint_input: usize) -> Vec<f64> {
        let s = &self.scenario;
        let mut out = vec![0.0; s.num_joint_outputs() / s.parties[k].outputs];
        for (o, &p) in self.row(joint_input).iter().enumerate() {
            out[self.index_without(k, o)] += p;
        }
        out
    }

    fn index_without(&self, k: usize, joint_output: usize) -> usize {
        let s = &self.scenario;
        let os = s.decode_outputs(joint_output);
        s.parties
            .iter()
            .zip(&os)
            .enumerate()
            .filter(|(i, _)| *i != k)
            .fold(0, |acc, (_, (p, &o))| acc * p.outputs + o)
    }

    /// Max change of p(o_k | x) when inputs other than x_k change.
    fn incoming_signaling(&self, k: usize) -> f64 {
        let s = &self.scenario;
        let nk = s.parties[k].outputs;
        let mut worst: f64 = 0.0;
        for xk in 0..s.parties[k].inputs {
            let settings = s.settings_matching(&[(k, xk)]);
            let marg = |i: usize| {
                let mut m = vec![0.0; nk];
                for (o, &p) in self.row(i).iter().enumerate() {
                    m[s.decode_outputs(o)[k]] += p;
                }
                m
            };
            let reference = marg(settings[0]);
            for &i in &settings[1..] {
                for (a, b) in reference.iter().zip(marg(i)) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
        worst
    }

    /// Σ_o (−1)^{Σ_{i∈parties} o_i} p(o | inputs) at one joint input.
    pub fn correlator(&self, inputs: &[usize], parties: &[usize]) -> Result<f64> {
        let factors: Vec<Factor> = parties
            .iter()
            .map(|&p| Factor::parity(p, inputs.get(p).copied().unwrap_or(0)))
            .collect();
        self.scenario.check_inputs(inputs)?;
        self.expectation_at(self.scenario.encode_inputs(inputs), &factors)
    }

    /// Σ_o Π_f w_f(o_{party(f)}) p(o | x) at one joint input; factor inputs are ignored.
    pub fn expectation_at(&self, joint_input: usize, factors: &[Factor]) -> Result<f64> {
        self.check_factors(factors)?;
        Ok(self.expectation_unchecked(joint_input, factors))
    }

    fn expectation_unchecked(&self, joint_input: usize, factors: &[Factor]) -> f64 {
        let parties = &self.scenario.parties;
        // (stride, radix) of each factor's digit in the joint output index
        let digits: Vec<(usize, usize)> = factors
            .iter()
            .map(|f| (parties[f.party + 1..].iter().map(|p| p.outputs).product(), parties[f.party].outputs))
            .collect();
        self.row(joint_input)
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != 0.0)
            .map(|(o, &p)| {
                factors.iter().zip(&digits).map(|(f, &(stride, radix))| f.signs.weight(o / stride % radix)).product::<f64>()
                    * p
            })
            .sum()
    }

    fn check_factors(&self, factors: &[Factor]) -> Result<()> {
        for (i, f) in factors.iter().enumerate() {
            self.scenario.check_party(f.party)?;
            let party = &self.scenario.parties[f.party];
            if f.input >= party.inputs {
                return Err(structural(format!("input {} out of range for {}", f.input, party.name)));
            }
            if factors[..i].iter().any(|g| g.party == f.party) {
                return Err(structural(format!("party {} appears twice in a correlator", party.name)));
            }
            f.signs.check(party)?;
        }
        Ok(())
    }

    /// Correlator with the factors' own inputs, averaged over every setting of the
    /// remaining parties.
    pub fn averaged_expectation(&self, factors: &[Factor]) -> Result<f64> {
        self.check_factors(factors)?;
        let fixed: Vec<(usize, usize)> = factors.iter().map(|f| (f.party, f.input)).collect();
        let settings = self.scenario.settings_matching(&fixed);
        let total: f64 = settings.iter().map(|&i| self.expectation_unchecked(i, factors)).sum();
        Ok(total / settings.len() as f64)
    }

    /// Marginal over `keep` (in that order), optionally conditioned on
    /// `condition = (party, outcome)` for a party outside `keep`.
    pub fn marginal(&self, keep: &[usize], condition: Option<(usize, usize)>) -> Result<Self> {
        let s = &self.scenario;
        for (i, &k) in keep.iter().enumerate() {
            s.check_party(k)?;
            if keep[..i].contains(&k) {
                return Err(structural(format!("party {k} kept twice")));
            }
        }
        if let Some((c, o)) = condition {
            s.check_party(c)?;
            if keep.contains(&c) {
                return Err(structural("conditioning party must be marginalized"));
            }
            if o >= s.parties[c].outputs {
                return Err(structural(format!("outcome {o} out of range for {}", s.parties[c].name)));
            }
        }
        let sub = Scenario::new(keep.iter().map(|&k| s.parties[k].clone()).collect())?;
        let mut table = vec![0.0; sub.table_len()];
        for ki in 0..sub.num_joint_inputs() {
            let kx = sub.decode_inputs(ki);
            let fixed: Vec<(usize, usize)> = keep.iter().copied().zip(kx.iter().copied()).collect();
            let settings = s.settings_matching(&fixed);
            let mut acc = vec![0.0; sub.num_joint_outputs()];
            let mut cond_mass = 0.0;
            for &i in &settings {
                for (o, &p) in self.row(i).iter().enumerate() {
                    let os = s.decode_outputs(o);
                    if let Some((c, co)) = condition {
                        if os[c] != co {
                            continue;
                        }
                        cond_mass += p;
                    }
                    let ko: Vec<usize> = keep.iter().map(|&k| os[k]).collect();
                    acc[sub.encode_outputs(&ko)] += p;
                }
            }
            let norm = match condition {
                Some(_) => {
                    if cond_mass <= 1e-15 {
                        return Err(domain("conditioning event has zero probability"));
                    }
                    cond_mass
                }
                None => settings.len() as f64,
            };
            for (o, v) in acc.into_iter().enumerate() {
                table[sub.index(ki, o)] = v / norm;
            }
        }
        Self::from_raw(sub, table)
    }

    /// New party i is old party `perm[i]`; cardinalities must agree position by position.
    pub fn permute_parties(&self, perm: &[usize]) -> Result<Self> {
        let map = self.scenario.permutation_index_map(perm)?;
        let table = map.iter().map(|&old| self.table[old]).collect();
        Ok(Self { scenario: self.scenario.clone(), table })
    }

    /// Mutual information in bits between two parties' outcomes at the given inputs.
    pub fn mutual_information(&self, i: usize, j: usize, xi: usize, xj: usize) -> Result<f64> {
        self.mutual_information_base(i, j, xi, xj, 2.0)
    }

    pub fn mutual_information_base(
        &self,
        i: usize,
        j: usize,
        xi: usize,
        xj: usize,
        base: f64,
    ) -> Result<f64> {
        if i == j {
            return Err(structural("mutual information needs two distinct parties"));
        }
        let pair = self.marginal(&[i, j], None)?;
        let sc = pair.scenario();
        if xi >= sc.parties[0].inputs || xj >= sc.parties[1].inputs {
            return Err(structural("input out of range"));
        }
        let (ni, nj) = (sc.parties[0].outputs, sc.parties[1].outputs);
        let row = pair.row(sc.encode_inputs(&[xi, xj]));
        let mut pi = vec![0.0; ni];
        let mut pj = vec![0.0; nj];
        for a in 0..ni {
            for b in 0..nj {
                pi[a] += row[a * nj + b];
                pj[b] += row[a * nj + b];
            }
        }
        let mut mi = 0.0;
        for a in 0..ni {
            for b in 0..nj {
                let p = row[a * nj + b];
                if p > 0.0 {
                    mi += p * (p / (pi[a] * pj[b])).log(base);
                }
            }
        }
        // rounding can leave a tiny negative sum for independent outcomes
        Ok(mi.max(0.0))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DistributionFile = serde_json::from_str(text)?;
        let scenario = Scenario::new(file.scenario)?;
        let mut table = vec![f64::NAN; scenario.table_len()];
        for e in file.table {
            scenario.check_inputs(&e.input)?;
            if e.output.len() != scenario.num_parties()
                || e.output.iter().zip(scenario.parties()).any(|(&o, p)| o >= p.outputs)
            {
                return Err(structural(format!("bad output tuple {:?}", e.output)));
            }
            let idx = scenario.index(scenario.encode_inputs(&e.input), scenario.encode_outputs(&e.output));
            if !table[idx].is_nan() {
                return Err(structural(format!("duplicate entry {:?}|{:?}", e.output, e.input)));
            }
            table[idx] = e.p;
        }
        if table.iter().any(|p| p.is_nan()) {
            return Err(structural("distribution JSON is missing entries"));
        }
        Self::new(scenario, table)
    }

    fn to_file(&self) -> DistributionFile {
        let s = &self.scenario;
        let mut table = Vec::with_capacity(self.table.len());
        for i in 0..s.num_joint_inputs() {
            let input = s.decode_inputs(i);
            for o in 0..s.num_joint_outputs() {
                table.push(Entry { input: input.clone(), output: s.decode_outputs(o), p: self.table[s.index(i, o)] });
            }
        }
        DistributionFile { scenario: s.parties.clone(), table }
    }
}

fn check_shape(scenario: &Scenario, table: &[f64]) -> Result<()> {
    if table.len() != scenario.table_len() {
        return Err(structural(format!(
            "table has {} entries, scenario needs {}",
            table.len(),
            scenario.table_len()
        )));
    }
    if table.iter().any(|p| !p.is_finite()) {
        return Err(Error::Domain("probabilities must be finite".into()));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct DistributionFile {
    scenario: Vec<Party>,
    table: Vec<Entry>,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    input: Vec<usize>,
    output: Vec<usize>,
    p: f64,
}

/// Σ (−1)^{a+c} s(b) p(a,b,c|x,z) on the bilocal line.
pub fn bilocal_correlator(
    d: &ConditionalDistribution,
    x: usize,
    z: usize,
    kind: BobObservable,
) -> Result<f64> {
    if d.scenario() != &Scenario::bilocal() {
        return Err(structural("bilocal correlator needs the (A, B, C) line scenario"));
    }
    let factors =
        [Factor::parity(0, x), Factor { party: 1, input: 0, signs: kind.signs() }, Factor::parity(2, z)];
    d.expectation_at(d.scenario().encode_inputs(&[x, 0, z]), &factors)
}
