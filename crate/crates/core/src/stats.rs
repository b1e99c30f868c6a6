//! Coincidence-count ingestion, witness estimates, bootstrap uncertainties and p-values.
//!
//! Count files are CSV with one row per (setting, outcome):
//!
//! - star, conditioned on GHZ success: `x1,x2,x3,a1,a2,a3,count`
//! - bilocal line: `x,z,a,b,c,count`, with b ∈ {0, 1, 2}
//!
//! The header picks the table kind. A table may be split over several files (one per
//! setting, say); they are merged and checked for duplicate keys.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::dist::{ConditionalDistribution, Scenario};
use crate::error::{domain, structural, Error, Result};
use crate::witness::{
    builtin_fnn_bilocal, builtin_fnn_star, evaluate_from_b0_data, B0Reduction, BilocalWitness,
    CorrelatorPolynomial,
};

pub const DEFAULT_RESAMPLES: usize = 1000;
pub const MIN_RESAMPLES: usize = 100;
pub const DEFAULT_SEED: u64 = 20_240_917;

const STAR_HEADER: [&str; 7] = ["x1", "x2", "x3", "a1", "a2", "a3", "count"];
const BILOCAL_HEADER: [&str; 6] = ["x", "z", "a", "b", "c", "count"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountKind {
    /// Star branches A1, A2, A3 on runs where the centre reported GHZ success.
    StarB0,
    /// Bilocal line A, B, C.
    Bilocal,
}

impl CountKind {
    pub fn scenario(self) -> Scenario {
        match self {
            CountKind::StarB0 => Scenario::star_branches(),
            CountKind::Bilocal => Scenario::bilocal(),
        }
    }

    fn header(self) -> &'static [&'static str] {
        match self {
            CountKind::StarB0 => &STAR_HEADER,
            CountKind::Bilocal => &BILOCAL_HEADER,
        }
    }

    /// Table index of a CSV key (inputs then outputs, in header order).
    fn index(self, s: &Scenario, key: &[usize]) -> usize {
        match self {
            CountKind::StarB0 => s.index(s.encode_inputs(&key[..3]), s.encode_outputs(&key[3..])),
            CountKind::Bilocal => {
                s.index(s.encode_inputs(&[key[0], 0, key[1]]), s.encode_outputs(&key[2..]))
            }
        }
    }

    fn key_ranges(self) -> Vec<usize> {
        match self {
            CountKind::StarB0 => vec![2; 6],
            CountKind::Bilocal => vec![2, 2, 2, 3, 2],
        }
    }
}

/// Integer counts laid out like a [`ConditionalDistribution`] table of the kind's scenario.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountTable {
    kind: CountKind,
    counts: Vec<u64>,
    /// File name and SHA-256 of every source file, in the order read.
    sources: Vec<(String, String)>,
}

impl CountTable {
    pub fn new(kind: CountKind, counts: Vec<u64>) -> Result<Self> {
        let len = kind.scenario().table_len();
        if counts.len() != len {
            return Err(structural(format!("{} counts, expected {len}", counts.len())));
        }
        Ok(Self { kind, counts, sources: Vec::new() })
    }

    /// Counts `round(total · p)` for every entry of `d`.
    pub fn from_distribution(kind: CountKind, d: &ConditionalDistribution, total: f64) -> Result<Self> {
        if d.scenario() != &kind.scenario() {
            return Err(structural("distribution does not match the count table kind"));
        }
        Self::new(kind, d.table().iter().map(|&p| (p * total).round() as u64).collect())
    }

    pub fn kind(&self) -> CountKind {
        self.kind
    }

    pub fn scenario(&self) -> Scenario {
        self.kind.scenario()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn sources(&self) -> &[(String, String)] {
        &self.sources
    }

    fn row_len(&self) -> usize {
        self.scenario().num_joint_outputs()
    }

    /// Total count of every joint setting.
    pub fn totals(&self) -> Vec<u64> {
        self.counts.chunks(self.row_len()).map(|row| row.iter().sum()).collect()
    }

    pub fn total_at(&self, inputs: &[usize]) -> Result<u64> {
        let s = self.scenario();
        s.check_inputs(inputs)?;
        Ok(self.totals()[s.encode_inputs(inputs)])
    }

    pub fn scaled(&self, factor: u64) -> Self {
        Self { counts: self.counts.iter().map(|c| c * factor).collect(), ..self.clone() }
    }

    /// Per-setting relative frequencies; every setting needs a nonzero total.
    pub fn frequencies(&self) -> Result<ConditionalDistribution> {
        let s = self.scenario();
        let mut table = Vec::with_capacity(self.counts.len());
        for (x, row) in self.counts.chunks(self.row_len()).enumerate() {
            let total: u64 = row.iter().sum();
            if total == 0 {
                return Err(domain(format!("missing setting {:?}: no counts recorded", s.decode_inputs(x))));
            }
            table.extend(row.iter().map(|&c| c as f64 / total as f64));
        }
        ConditionalDistribution::new(s, table)
    }

    /// Bilocal tables with every b = 2 count doubled.
    pub fn with_b2_doubled(&self) -> Result<Self> {
        if self.kind != CountKind::Bilocal {
            return Err(structural("b = 2 doubling applies to bilocal counts only"));
        }
        let s = self.scenario();
        let counts = self
            .counts
            .iter()
            .enumerate()
            .map(|(i, &c)| if s.decode_outputs(i % self.row_len())[1] == 2 { 2 * c } else { c })
            .collect();
        Ok(Self { counts, ..self.clone() })
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ParseOptions {
    /// Treat absent outcome rows (and whole settings) as zero counts instead of failing.
    pub allow_missing: bool,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn parse_counts(path: &Path, opts: ParseOptions) -> Result<CountTable> {
    parse_count_files(&[path.to_path_buf()], opts)
}

/// Parses and merges several count files of the same kind.
pub fn parse_count_files(paths: &[PathBuf], opts: ParseOptions) -> Result<CountTable> {
    if paths.is_empty() {
        return Err(structural("no count files given"));
    }
    let mut merged: Option<(CountKind, Vec<Option<u64>>)> = None;
    let mut sources = Vec::new();
    for path in paths {
        let name = path.display().to_string();
        let bytes = std::fs::read(path)?;
        let (kind, rows) = parse_rows(&bytes, &name)?;
        let (merged_kind, slots) =
            merged.get_or_insert_with(|| (kind, vec![None; kind.scenario().table_len()]));
        if *merged_kind != kind {
            return Err(parse_error(&name, "file kind differs from the previous files"));
        }
        let s = kind.scenario();
        for (line, key, count) in rows {
            let slot = &mut slots[kind.index(&s, &key)];
            if slot.is_some() {
                return Err(parse_error(&name, format!("line {line}: duplicate key {key:?}")));
            }
            *slot = Some(count);
        }
        sources.push((name, sha256_hex(&bytes)));
    }
    let (kind, slots) = merged.expect("at least one file");
    let s = kind.scenario();
    if !opts.allow_missing {
        if let Some(i) = slots.iter().position(Option::is_none) {
            let (x, o) = (i / s.num_joint_outputs(), i % s.num_joint_outputs());
            return Err(Error::Parse {
                path: sources.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>().join(", "),
                message: format!(
                    "missing row for inputs {:?}, outputs {:?} (allow missing rows to count them as zero)",
                    s.decode_inputs(x),
                    s.decode_outputs(o)
                ),
            });
        }
    }
    Ok(CountTable { kind, counts: slots.into_iter().map(|c| c.unwrap_or(0)).collect(), sources })
}

fn parse_error(path: &str, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_string(), message: message.into() }
}

type Row = (u64, Vec<usize>, u64);

fn parse_rows(bytes: &[u8], name: &str) -> Result<(CountKind, Vec<Row>)> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(bytes);
    let header = reader.headers().map_err(|e| parse_error(name, e.to_string()))?.clone();
    if header.is_empty() {
        return Err(parse_error(name, "empty file"));
    }
    let fields: Vec<&str> = header.iter().collect();
    let kind = [CountKind::StarB0, CountKind::Bilocal]
        .into_iter()
        .find(|k| k.header() == fields.as_slice())
        .ok_or_else(|| {
            parse_error(
                name,
                format!("unrecognized header {fields:?}; expected x1,x2,x3,a1,a2,a3,count or x,z,a,b,c,count"),
            )
        })?;
    let ranges = kind.key_ranges();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_error(name, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != fields.len() {
            return Err(parse_error(name, format!("line {line}: expected {} fields, got {}", fields.len(), record.len())));
        }
        let mut key = Vec::with_capacity(ranges.len());
        for (field, (&range, label)) in record.iter().zip(ranges.iter().zip(&fields)) {
            match field.parse::<usize>() {
                Ok(v) if v < range => key.push(v),
                _ => return Err(parse_error(name, format!("line {line}: {label} = {field:?} is not in 0..{range}"))),
            }
        }
        let raw = &record[fields.len() - 1];
        let count = match raw.parse::<i64>() {
            Ok(c) if c < 0 => return Err(parse_error(name, format!("line {line}: negative count {c}"))),
            Ok(c) => c as u64,
            Err(_) => return Err(parse_error(name, format!("line {line}: count {raw:?} is not an integer"))),
        };
        rows.push((line, key, count));
    }
    if rows.is_empty() {
        return Err(parse_error(name, "no data rows"));
    }
    Ok((kind, rows))
}

/// Runs in which the centre's projection fired, out of all successful runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ProjectionRecord {
    pub successful_runs: u64,
    pub ghz_events: u64,
}

impl ProjectionRecord {
    pub fn new(successful_runs: u64, ghz_events: u64) -> Result<Self> {
        if successful_runs == 0 {
            return Err(domain("projection record needs at least one successful run"));
        }
        if ghz_events > successful_runs {
            return Err(domain(format!("{ghz_events} GHZ events out of only {successful_runs} runs")));
        }
        Ok(Self { successful_runs, ghz_events })
    }

    /// Parses `ghz/runs`, e.g. `2019/15562`.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || domain(format!("projection record {text:?} is not of the form ghz_events/successful_runs"));
        let (num, den) = text.split_once('/').ok_or_else(bad)?;
        let num = num.trim().parse().map_err(|_| bad())?;
        let den = den.trim().parse().map_err(|_| bad())?;
        Self::new(den, num)
    }

    pub fn fraction(&self) -> f64 {
        self.ghz_events as f64 / self.successful_runs as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Method {
    /// "binomial" for closed-form proportions, "bootstrap" for resampled witnesses.
    pub kind: String,
    pub bootstrap_n: Option<usize>,
    pub seed: Option<u64>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasurementResult {
    pub witness: String,
    pub value: f64,
    pub sigma: f64,
    pub bound: Option<f64>,
    /// One-sided Gaussian probability of a value at or below the bound; absent without a bound.
    pub p_value: Option<f64>,
    pub method: Method,
    /// SHA-256 of every input file, keyed by path.
    pub inputs: BTreeMap<String, String>,
}

impl MeasurementResult {
    /// Number of standard deviations above the bound.
    pub fn significance(&self) -> Option<f64> {
        self.bound.filter(|_| self.sigma > 0.0).map(|b| (self.value - b) / self.sigma)
    }
}

/// p(b=0) as the observed fraction, with the binomial standard error.
pub fn estimate_p_b0(rec: &ProjectionRecord) -> Result<MeasurementResult> {
    let rec = ProjectionRecord::new(rec.successful_runs, rec.ghz_events)?;
    let p = rec.fraction();
    Ok(MeasurementResult {
        witness: "p(b=0)".into(),
        value: p,
        sigma: (p * (1.0 - p) / rec.successful_runs as f64).sqrt(),
        bound: None,
        p_value: None,
        method: Method { kind: "binomial".into(), bootstrap_n: None, seed: None, notes: Vec::new() },
        inputs: BTreeMap::new(),
    })
}

/// One-sided Gaussian tail P(X ≤ bound) for X ~ N(value, sigma²).
pub fn p_value(value: f64, sigma: f64, bound: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(domain(format!("sigma must be positive, got {sigma}")));
    }
    Ok(0.5 * statrs::function::erf::erfc((value - bound) / (sigma * std::f64::consts::SQRT_2)))
}

#[derive(Clone, Debug)]
pub struct StarEstimate {
    /// p(a | b=0, x) over the three branches.
    pub conditional: ConditionalDistribution,
    pub p_b0: f64,
    /// p(a, b=0 | x) = p(a | b=0, x) · p(b=0), same layout as `conditional`.
    pub joint_b0: Vec<f64>,
    /// I₁, I₂, I₃.
    pub values: [f64; 3],
}

pub fn ingest_star(counts: &CountTable, p_b0: &MeasurementResult) -> Result<StarEstimate> {
    star_estimate(counts, p_b0.value)
}

fn star_estimate(counts: &CountTable, p_b0: f64) -> Result<StarEstimate> {
    if counts.kind() != CountKind::StarB0 {
        return Err(structural("star ingestion needs x1,x2,x3,a1,a2,a3 counts"));
    }
    let conditional = counts.frequencies()?;
    let values = star_values(&conditional, p_b0)?;
    let joint_b0 = conditional.table().iter().map(|p| p * p_b0).collect();
    Ok(StarEstimate { conditional, p_b0, joint_b0, values })
}

fn star_values(conditional: &ConditionalDistribution, p_b0: f64) -> Result<[f64; 3]> {
    Ok([
        evaluate_from_b0_data(1, conditional, p_b0)?,
        evaluate_from_b0_data(2, conditional, p_b0)?,
        evaluate_from_b0_data(3, conditional, p_b0)?,
    ])
}

#[derive(Clone, Debug)]
pub struct BilocalEstimate {
    /// p(a, b, c | x, z) after doubling the b = 2 counts.
    pub distribution: ConditionalDistribution,
    pub r_c_ns: f64,
    pub r_ns_c: f64,
}

pub fn ingest_bilocal(counts: &CountTable) -> Result<BilocalEstimate> {
    let distribution = counts.with_b2_doubled()?.frequencies()?;
    Ok(BilocalEstimate {
        r_c_ns: builtin_fnn_bilocal(BilocalWitness::ClassicalNs).value(&distribution)?,
        r_ns_c: builtin_fnn_bilocal(BilocalWitness::NsClassical).value(&distribution)?,
        distribution,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WitnessId {
    /// I₁, I₂ or I₃ on GHZ-success data.
    Star(usize),
    Bilocal(BilocalWitness),
}

impl WitnessId {
    pub fn name(self) -> String {
        match self {
            WitnessId::Star(i) => format!("I{i}"),
            WitnessId::Bilocal(BilocalWitness::ClassicalNs) => "R_C-NS".into(),
            WitnessId::Bilocal(BilocalWitness::NsClassical) => "R_NS-C".into(),
        }
    }

    pub fn bound(self) -> f64 {
        match self {
            WitnessId::Star(_) => 0.0,
            WitnessId::Bilocal(_) => 3.0,
        }
    }
}

/// How p(b=0) enters a star bootstrap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Projection {
    /// Resampled binomially alongside the counts.
    Record(ProjectionRecord),
    /// Held fixed.
    Fixed(f64),
}

enum Evaluator {
    Star(B0Reduction),
    Bilocal(CorrelatorPolynomial),
}

impl Evaluator {
    fn new(witness: WitnessId) -> Result<Self> {
        Ok(match witness {
            WitnessId::Star(i) => Evaluator::Star(B0Reduction::new(&builtin_fnn_star(i)?)?),
            WitnessId::Bilocal(kind) => Evaluator::Bilocal(builtin_fnn_bilocal(kind)),
        })
    }

    fn value(&self, counts: &CountTable, p_b0: Option<f64>) -> Result<f64> {
        match self {
            Evaluator::Star(r) => {
                let p = p_b0.ok_or_else(|| domain("star witnesses need p(b=0)"))?;
                if counts.kind() != CountKind::StarB0 {
                    return Err(structural("star witnesses need star counts"));
                }
                r.evaluate(&counts.frequencies()?, p)
            }
            Evaluator::Bilocal(w) => w.value(&counts.with_b2_doubled()?.frequencies()?),
        }
    }
}

/// Multinomial draw of `n` items with the given counts as weights.
fn multinomial(rng: &mut ChaCha20Rng, weights: &[u64], n: u64) -> Vec<u64> {
    let mut remaining_weight: u64 = weights.iter().sum();
    let mut remaining = n;
    weights
        .iter()
        .map(|&w| {
            if remaining == 0 || w == 0 {
                remaining_weight -= w;
                return 0;
            }
            let p = (w as f64 / remaining_weight as f64).min(1.0);
            let k = Binomial::new(remaining, p).expect("probability in [0, 1]").sample(rng);
            remaining -= k;
            remaining_weight -= w;
            k
        })
        .collect()
}

fn resample(counts: &CountTable, projection: Option<Projection>, seed: u64, index: u64) -> (CountTable, Option<f64>) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let row_len = counts.row_len();
    let mut drawn = Vec::with_capacity(counts.counts.len());
    for row in counts.counts.chunks(row_len) {
        drawn.extend(multinomial(&mut rng, row, row.iter().sum()));
    }
    let p_b0 = projection.map(|p| match p {
        Projection::Fixed(v) => v,
        Projection::Record(r) => {
            let k = Binomial::new(r.successful_runs, r.fraction()).expect("fraction in [0, 1]").sample(&mut rng);
            k as f64 / r.successful_runs as f64
        }
    });
    (CountTable { counts: drawn, ..counts.clone() }, p_b0)
}

/// Sample standard deviation of the witness over `n_resamples` parametric bootstrap
/// replicas: multinomial per setting, binomial for the projection record. Replica i draws
/// from ChaCha20 seeded with `seed` on stream i, so the result does not depend on scheduling.
pub fn bootstrap_uncertainty(
    counts: &CountTable,
    projection: Option<Projection>,
    witness: WitnessId,
    n_resamples: usize,
    seed: u64,
) -> Result<f64> {
    if n_resamples < MIN_RESAMPLES {
        return Err(domain(format!("at least {MIN_RESAMPLES} resamples are needed, got {n_resamples}")));
    }
    let evaluator = Evaluator::new(witness)?;
    // fail on bad input before spawning replicas
    evaluator.value(counts, projection.map(projection_value))?;
    let values: Vec<f64> = (0..n_resamples as u64)
        .into_par_iter()
        .map(|i| {
            let (table, p_b0) = resample(counts, projection, seed, i);
            evaluator.value(&table, p_b0)
        })
        .collect::<Result<_>>()?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Ok((values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

fn projection_value(p: Projection) -> f64 {
    match p {
        Projection::Fixed(v) => v,
        Projection::Record(r) => r.fraction(),
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BootstrapConfig {
    pub n_resamples: usize,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { n_resamples: DEFAULT_RESAMPLES, seed: DEFAULT_SEED }
    }
}

/// Witness value, bootstrap sigma and p-value, ready for serialization.
pub fn measure(
    counts: &CountTable,
    projection: Option<Projection>,
    witness: WitnessId,
    config: BootstrapConfig,
) -> Result<MeasurementResult> {
    let value = Evaluator::new(witness)?.value(counts, projection.map(projection_value))?;
    let sigma = bootstrap_uncertainty(counts, projection, witness, config.n_resamples, config.seed)?;
    let bound = witness.bound();
    let mut notes = Vec::new();
    if counts.kind() == CountKind::Bilocal {
        notes.push("b = 2 counts doubled before normalization".to_string());
    }
    if let Some(Projection::Record(r)) = projection {
        notes.push(format!("p(b=0) = {}/{} resampled binomially", r.ghz_events, r.successful_runs));
    }
    Ok(MeasurementResult {
        witness: witness.name(),
        value,
        sigma,
        bound: Some(bound),
        p_value: if sigma > 0.0 { Some(p_value(value, sigma, bound)?) } else { None },
        method: Method {
            kind: "bootstrap".into(),
            bootstrap_n: Some(config.n_resamples),
            seed: Some(config.seed),
            notes,
        },
        inputs: counts.sources().iter().cloned().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::{simulate_star, StarStrategy};
    use crate::witness::condition_on_ghz_success;
    use approx::assert_abs_diff_eq;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
        let path = dir.path().join(name);
        std::fs::File::create(&path).unwrap().write_all(text.as_bytes()).unwrap();
        path
    }

    fn full_star_csv() -> String {
        let mut text = STAR_HEADER.join(",") + "\n";
        for x in 0..8 {
            for a in 0..8 {
                text += &format!("{},{},{},{},{},{},{}\n", x >> 2, (x >> 1) & 1, x & 1, a >> 2, (a >> 1) & 1, a & 1, x + a);
            }
        }
        text
    }

    #[test]
    fn parses_and_merges() {
        let dir = tempfile::tempdir().unwrap();
        let text = full_star_csv();
        let mut lines: Vec<&str> = text.lines().collect();
        let header = lines.remove(0);
        let first = format!("{header}\n{}\n", lines[..32].join("\n"));
        let second = format!("{header}\n{}\n", lines[32..].join("\n"));
        let t = parse_count_files(
            &[write(&dir, "a.csv", &first), write(&dir, "b.csv", &second)],
            ParseOptions::default(),
        )
        .unwrap();
        assert_eq!(t.kind(), CountKind::StarB0);
        assert_eq!(t.total_at(&[1, 1, 1]).unwrap(), (0..8).map(|a| 7 + a).sum::<u64>());
        assert_eq!(t.sources().len(), 2);
        assert_eq!(t.sources()[0].1, sha256_hex(first.as_bytes()));
    }

    #[test]
    fn parse_errors() {
        let dir = tempfile::tempdir().unwrap();
        let opts = ParseOptions::default();
        let header = STAR_HEADER.join(",");
        let cases = [
            ("empty.csv", String::new(), "empty"),
            ("header.csv", format!("{header}\n"), "no data"),
            ("bad_header.csv", "x,y,count\n0,0,1\n".to_string(), "unrecognized header"),
            ("neg.csv", format!("{header}\n0,0,0,0,0,0,-4\n"), "negative"),
            ("float.csv", format!("{header}\n0,0,0,0,0,0,1.5\n"), "not an integer"),
            ("range.csv", format!("{header}\n0,0,2,0,0,0,1\n"), "x3"),
            ("short.csv", format!("{header}\n0,0,0,0,0\n"), "fields"),
            ("dup.csv", format!("{header}\n0,0,0,0,0,0,1\n0,0,0,0,0,0,2\n"), "duplicate"),
            ("missing.csv", format!("{header}\n0,0,0,0,0,0,1\n"), "missing row"),
        ];
        for (name, text, needle) in cases {
            let err = parse_counts(&write(&dir, name, &text), opts).unwrap_err();
            assert!(matches!(err, Error::Parse { .. }), "{name}: {err}");
            assert!(err.to_string().contains(needle), "{name}: {err}");
        }
        let sparse = parse_counts(
            &write(&dir, "sparse.csv", &format!("{header}\n0,0,0,0,0,0,5\n")),
            ParseOptions { allow_missing: true },
        )
        .unwrap();
        assert_eq!(sparse.counts().iter().sum::<u64>(), 5);
        let err = ingest_star(&sparse, &estimate_p_b0(&ProjectionRecord::new(8, 1).unwrap()).unwrap()).unwrap_err();
        assert!(err.to_string().contains("missing setting"));
    }

    #[test]
    fn projection_estimates() {
        let r = estimate_p_b0(&ProjectionRecord::new(15562, 2019).unwrap()).unwrap();
        assert_abs_diff_eq!(r.value, 0.1297, epsilon = 5e-5);
        assert_abs_diff_eq!(r.sigma, 0.0027, epsilon = 5e-5);
        for (n, k, v) in [(50, 0, 0.0), (50, 50, 1.0)] {
            let r = estimate_p_b0(&ProjectionRecord { successful_runs: n, ghz_events: k }).unwrap();
            assert_eq!((r.value, r.sigma), (v, 0.0));
        }
        assert!(estimate_p_b0(&ProjectionRecord { successful_runs: 0, ghz_events: 0 }).is_err());
        assert!(ProjectionRecord::new(3, 4).is_err());
        assert_eq!(ProjectionRecord::parse("2019/15562").unwrap(), ProjectionRecord::new(15562, 2019).unwrap());
        assert!(ProjectionRecord::parse("2019").is_err());
    }

    #[test]
    fn p_values() {
        assert_abs_diff_eq!(p_value(1.0, 0.3, 1.0).unwrap(), 0.5, epsilon = 1e-15);
        assert!(p_value(0.5, 0.3, 1.0).unwrap() > 0.5);
        assert!(p_value(1.0, 0.0, 0.0).is_err());
        assert!(p_value(1.0, -1.0, 0.0).is_err());
        // Mills-ratio continued fraction for the Gaussian tail, evaluated independently
        let z: f64 = 14.59;
        let mut cf = z;
        for k in (1..200).rev() {
            cf = z + k as f64 / cf;
        }
        let tail = (-z * z / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt() / cf;
        let p = p_value(z * 0.01, 0.01, 0.0).unwrap();
        assert!((p / tail - 1.0).abs() < 1e-10, "{p} vs {tail}");
        assert!((1.5e-48..1.7e-48).contains(&p));
    }

    #[test]
    fn synthetic_ideal_counts() {
        let d = simulate_star(&StarStrategy::new(-1.865, -0.415)).unwrap();
        let (b0, p) = condition_on_ghz_success(&d).unwrap();
        assert_abs_diff_eq!(p, 0.125, epsilon = 1e-12);
        let counts = CountTable::from_distribution(CountKind::StarB0, &b0, 1e6).unwrap();
        let p_b0 = estimate_p_b0(&ProjectionRecord::new(8, 1).unwrap()).unwrap();
        let est = ingest_star(&counts, &p_b0).unwrap();
        let w = crate::witness::builtin_fnn_star(1).unwrap();
        let exact = w.value(&d).unwrap();
        for v in est.values {
            assert_abs_diff_eq!(v, exact, epsilon = 2e-3);
            assert_abs_diff_eq!(v, 0.1859, epsilon = 2e-3);
        }
        assert_abs_diff_eq!(est.joint_b0.iter().sum::<f64>(), 8.0 * 0.125, epsilon = 1e-12);
    }

    #[test]
    fn doubling() {
        let s = Scenario::bilocal();
        let counts: Vec<u64> =
            (0..s.table_len()).map(|i| if s.decode_outputs(i % 12)[1] == 2 { 0 } else { 3 + i as u64 }).collect();
        let t = CountTable::new(CountKind::Bilocal, counts).unwrap();
        assert_eq!(t.with_b2_doubled().unwrap(), t);
        let a = ingest_bilocal(&t).unwrap();
        let b = ingest_bilocal(&t.scaled(2)).unwrap();
        assert_eq!(a.distribution.table(), b.distribution.table());
        assert_eq!((a.r_c_ns, a.r_ns_c), (b.r_c_ns, b.r_ns_c));
        assert!(CountTable::new(CountKind::StarB0, vec![1; 64]).unwrap().with_b2_doubled().is_err());
    }

    #[test]
    fn bootstrap_contracts() {
        // a point mass per setting has no sampling noise
        let s = Scenario::star_branches();
        let counts: Vec<u64> = (0..s.table_len()).map(|i| if i % 8 == (i / 8) % 8 { 500 } else { 0 }).collect();
        let t = CountTable::new(CountKind::StarB0, counts).unwrap();
        let sigma = bootstrap_uncertainty(&t, Some(Projection::Fixed(0.125)), WitnessId::Star(1), 200, 1).unwrap();
        assert_eq!(sigma, 0.0);

        let d = simulate_star(&StarStrategy::new(-1.865, -0.415).with_visibility(0.95)).unwrap();
        let (b0, _) = condition_on_ghz_success(&d).unwrap();
        let t = CountTable::from_distribution(CountKind::StarB0, &b0, 5000.0).unwrap();
        let proj = Some(Projection::Record(ProjectionRecord::new(16000, 2000).unwrap()));
        let a = bootstrap_uncertainty(&t, proj, WitnessId::Star(2), 150, 9).unwrap();
        let b = bootstrap_uncertainty(&t, proj, WitnessId::Star(2), 150, 9).unwrap();
        assert_eq!(a, b);
        assert!(a > 0.0);
        assert_ne!(a, bootstrap_uncertainty(&t, proj, WitnessId::Star(2), 150, 10).unwrap());
        assert!(bootstrap_uncertainty(&t, proj, WitnessId::Star(2), 99, 9).is_err());
        assert!(bootstrap_uncertainty(&t, None, WitnessId::Star(2), 100, 9).is_err());
    }

    #[test]
    fn multinomial_keeps_totals() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..50 {
            let draw = multinomial(&mut rng, &[5, 0, 17, 3, 0, 9], 34);
            assert_eq!(draw.iter().sum::<u64>(), 34);
            assert_eq!((draw[1], draw[4]), (0, 0));
        }
    }
}
