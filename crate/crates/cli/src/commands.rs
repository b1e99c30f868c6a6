use anyhow::{bail, Context, Result};
use serde_json::{json, Value};

use fnn_core::analysis::{
    self, critical_visibility, optimize_angles, visibility_grid, visibility_sweep, witness_value, Angles,
    Backend, OptimizerConfig,
};
use fnn_core::dist::ConditionalDistribution;
use fnn_core::inflation::{certify_fnn_with, FnnReport, InflationOptions};
use fnn_core::lpsolve::{rational, Feasibility, SolverOptions};
use fnn_core::qsim::{simulate_bilocal, simulate_star, StarStrategy};
use fnn_core::stats::{
    estimate_p_b0, ingest_bilocal, ingest_star, measure, parse_count_files, BootstrapConfig, MeasurementResult,
    ParseOptions, Projection, ProjectionRecord, WitnessId,
};
use fnn_core::witness::{
    builtin_fnn_bilocal, builtin_fnn_star, condition_on_ghz_success, from_certificate, BilocalWitness,
    CorrelatorPolynomial, ProbabilityWitness,
};

use crate::output::{num, Output};
use crate::{
    BackendArg, CertifyArgs, Cli, Command, EvaluateArgs, IngestArgs, IngestStarArgs, MutualInfoArgs, OptimizeArgs,
    Outcome, StarArgs, SweepArgs, TargetArgs,
};

pub fn run(cli: Cli) -> Result<Outcome> {
    let out = Output::new(&cli.output_dir)?;
    match cli.command {
        Command::SimulateStar(args) => simulate_star_cmd(&out, &args),
        Command::SimulateBilocal => simulate_bilocal_cmd(&out),
        Command::Certify(args) => certify(&out, &args),
        Command::ExtractWitness(args) => extract_witness(&out, &args),
        Command::Evaluate(args) => evaluate(&out, &args),
        Command::IngestStar(args) => ingest_star_cmd(&out, &args),
        Command::IngestBilocal(args) => ingest_bilocal_cmd(&out, &args),
        Command::Sweep(args) => sweep(&out, &args),
        Command::Optimize(args) => optimize(&out, &args),
        Command::MutualInfo(args) => mutual_info(&out, &args),
    }
}

fn outcome(positive: bool) -> Outcome {
    if positive {
        Outcome::Positive
    } else {
        Outcome::Negative
    }
}

impl StarArgs {
    fn strategy(&self) -> StarStrategy {
        let s = StarStrategy::new(self.theta0, self.theta1).with_phi(self.phi0, self.phi1);
        match &self.visibilities {
            Some(v) => s.with_visibilities([v[0], v[1], v[2]]),
            None => s.with_visibility(self.visibility),
        }
    }

    fn angles(&self) -> Angles {
        Angles::new(self.theta0, self.theta1).with_phi(self.phi0, self.phi1)
    }

    fn describe(&self) -> Value {
        let s = self.strategy();
        json!({
            "theta0": s.theta0, "theta1": s.theta1, "phi0": s.phi0, "phi1": s.phi1,
            "visibilities": s.visibility,
        })
    }
}

fn read_distribution(path: &std::path::Path) -> Result<ConditionalDistribution> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(ConditionalDistribution::from_json(&text).with_context(|| format!("parsing {}", path.display()))?)
}

impl TargetArgs {
    fn load(&self) -> Result<(ConditionalDistribution, Value)> {
        match &self.distribution {
            Some(path) => Ok((read_distribution(path)?, json!({ "distribution": path.display().to_string() }))),
            None => Ok((simulate_star(&self.star.strategy())?, json!({ "simulated": self.star.describe() }))),
        }
    }
}

fn simulate_star_cmd(out: &Output, args: &StarArgs) -> Result<Outcome> {
    let d = simulate_star(&args.strategy())?;
    let path = out.write_text("star_distribution.json", &(d.to_json()? + "\n"))?;
    let (_, p_b0) = condition_on_ghz_success(&d)?;
    println!("star distribution written to {}", path.display());
    println!("p(b=0) = {}", num(p_b0));
    for i in 1..=3 {
        println!("I{i} = {}", num(builtin_fnn_star(i)?.value(&d)?));
    }
    Ok(Outcome::Positive)
}

fn simulate_bilocal_cmd(out: &Output) -> Result<Outcome> {
    let d = simulate_bilocal()?;
    let path = out.write_text("bilocal_distribution.json", &(d.to_json()? + "\n"))?;
    println!("bilocal distribution written to {}", path.display());
    for kind in [BilocalWitness::ClassicalNs, BilocalWitness::NsClassical] {
        let w = builtin_fnn_bilocal(kind);
        println!("{} = {} (bound {})", w.name, num(w.value(&d)?), num(w.bound));
    }
    Ok(Outcome::Positive)
}

fn run_certification(args: &CertifyArgs) -> Result<(ConditionalDistribution, Value, FnnReport)> {
    let (d, source) = args.target.load()?;
    let solver = if args.exact { SolverOptions::exact() } else { SolverOptions::default() };
    let opts = InflationOptions { denominator_bound: args.denominator_bound, solver };
    let report = certify_fnn_with(&d, &opts)?;
    Ok((d, source, report))
}

fn certify(out: &Output, args: &CertifyArgs) -> Result<Outcome> {
    let (_, source, report) = run_certification(args)?;
    let mut placements = Vec::new();
    for p in &report.placements {
        let k = p.problem.classical_source();
        let entry = match &p.result {
            Feasibility::Feasible(_) => {
                println!("classical source {k}: feasible (no certificate)");
                json!({ "classical_source": k, "feasible": true })
            }
            Feasibility::Infeasible(cert) => {
                let cert = cert.integerized();
                let name = format!("certificate_{k}.json");
                out.write_text(&name, &(cert.to_json()? + "\n"))?;
                let objective = rational::format(&cert.objective(p.problem.system()));
                println!("classical source {k}: infeasible, certificate {name} (y.b = {objective})");
                json!({ "classical_source": k, "feasible": false, "certificate": name, "objective": objective })
            }
        };
        placements.push(entry);
    }
    let path = out.write_json(
        "certify.json",
        json!({
            "input": source,
            "denominator_bound": args.denominator_bound,
            "fnn": report.fnn,
            "agrees_with_symmetry": report.agrees_with_symmetry,
            "placements": placements,
        }),
    )?;
    println!("FNN: {}", report.fnn);
    println!("report written to {}", path.display());
    Ok(outcome(report.fnn))
}

fn extract_witness(out: &Output, args: &CertifyArgs) -> Result<Outcome> {
    let (d, source, report) = run_certification(args)?;
    let mut witnesses = Vec::new();
    for (problem, cert) in report.certificates() {
        let w = from_certificate(cert, problem)?;
        let name = w.correlator.name.clone();
        let correlator_file = format!("witness_{name}.json");
        let probability_file = format!("witness_{name}_probability.json");
        out.write_text(&correlator_file, &(w.correlator.to_json()? + "\n"))?;
        out.write_text(&probability_file, &(w.probability.to_json()? + "\n"))?;
        let value = w.correlator.value(&d)?;
        println!(
            "{name} (classical source {}): {} correlator terms, value on target {}",
            w.classical_source,
            w.correlator.terms.len(),
            num(value)
        );
        witnesses.push(json!({
            "name": name,
            "classical_source": w.classical_source,
            "scale": rational::format(&w.scale),
            "terms": w.correlator.terms.len(),
            "value_on_target": value,
            "correlator_file": correlator_file,
            "probability_file": probability_file,
        }));
    }
    if witnesses.is_empty() {
        println!("no placement is infeasible; nothing to extract");
    }
    out.write_json("extract_witness.json", json!({ "input": source, "fnn": report.fnn, "witnesses": witnesses }))?;
    Ok(outcome(report.fnn))
}

enum LoadedWitness {
    Correlator(CorrelatorPolynomial),
    Probability(ProbabilityWitness),
}

fn load_witness(spec: &str) -> Result<LoadedWitness> {
    let builtin = match spec {
        "I1" | "I2" | "I3" => Some(builtin_fnn_star(spec[1..].parse()?)?),
        "R_C-NS" => Some(builtin_fnn_bilocal(BilocalWitness::ClassicalNs)),
        "R_NS-C" => Some(builtin_fnn_bilocal(BilocalWitness::NsClassical)),
        _ => None,
    };
    if let Some(w) = builtin {
        return Ok(LoadedWitness::Correlator(w));
    }
    let text = std::fs::read_to_string(spec)
        .with_context(|| format!("{spec:?} is neither a built-in witness (I1, I2, I3, R_C-NS, R_NS-C) nor a readable file"))?;
    if let Ok(w) = CorrelatorPolynomial::from_json(&text) {
        return Ok(LoadedWitness::Correlator(w));
    }
    let w = ProbabilityWitness::from_json(&text).with_context(|| format!("parsing witness file {spec}"))?;
    Ok(LoadedWitness::Probability(w))
}

fn evaluate(out: &Output, args: &EvaluateArgs) -> Result<Outcome> {
    let d = read_distribution(&args.distribution)?;
    let report = match load_witness(&args.witness)? {
        LoadedWitness::Correlator(w) => {
            let e = w.evaluate(&d)?;
            json!({
                "witness": w.name, "value": e.value, "bound": e.bound, "violated": e.violated,
                "terms": serde_json::to_value(&e.terms)?,
            })
        }
        LoadedWitness::Probability(w) => {
            let value = w.evaluate(&d)?;
            json!({ "witness": args.witness, "value": value, "bound": 0.0, "violated": value > 0.0 })
        }
    };
    let violated = report["violated"].as_bool().unwrap_or(false);
    println!(
        "{} = {} (bound {}): {}",
        report["witness"].as_str().unwrap_or(&args.witness),
        num(report["value"].as_f64().unwrap_or(f64::NAN)),
        num(report["bound"].as_f64().unwrap_or(f64::NAN)),
        if violated { "violated" } else { "not violated" }
    );
    out.write_json("evaluation.json", json!({ "distribution": args.distribution.display().to_string(), "result": report }))?;
    Ok(outcome(violated))
}

fn print_measurement(m: &MeasurementResult) {
    let significance = m.significance().map_or(String::new(), |s| format!(", {:.1} sigma above the bound", s));
    let p = m.p_value.map_or(String::new(), |p| format!(", p = {p:.3e}"));
    println!("{} = {} ± {}{significance}{p}", m.witness, num(m.value), num(m.sigma));
}

fn bootstrap(args: &IngestArgs) -> BootstrapConfig {
    BootstrapConfig { n_resamples: args.resamples, seed: args.seed }
}

fn ingest_star_cmd(out: &Output, args: &IngestStarArgs) -> Result<Outcome> {
    let counts = parse_count_files(&args.ingest.files, ParseOptions { allow_missing: args.ingest.allow_missing })?;
    let record = ProjectionRecord::parse(&args.projection)?;
    let p_b0 = estimate_p_b0(&record)?;
    let estimate = ingest_star(&counts, &p_b0)?;
    println!("p(b=0) = {} ± {}", num(p_b0.value), num(p_b0.sigma));
    let mut results = Vec::new();
    for i in 1..=3 {
        let m = measure(&counts, Some(Projection::Record(record)), WitnessId::Star(i), bootstrap(&args.ingest))?;
        debug_assert_eq!(m.value, estimate.values[i - 1]);
        print_measurement(&m);
        results.push(m);
    }
    let violated = results.iter().all(|m| m.value > m.bound.unwrap_or(0.0));
    let path = out.write_json(
        "ingest_star.json",
        json!({ "p_b0": p_b0, "projection": record, "results": results, "fnn": violated }),
    )?;
    println!("all three violated: {violated}");
    println!("report written to {}", path.display());
    Ok(outcome(violated))
}

fn ingest_bilocal_cmd(out: &Output, args: &IngestArgs) -> Result<Outcome> {
    let counts = parse_count_files(&args.files, ParseOptions { allow_missing: args.allow_missing })?;
    ingest_bilocal(&counts)?;
    let mut results = Vec::new();
    for kind in [BilocalWitness::ClassicalNs, BilocalWitness::NsClassical] {
        let m = measure(&counts, None, WitnessId::Bilocal(kind), bootstrap(args))?;
        print_measurement(&m);
        results.push(m);
    }
    let violated = results.iter().all(|m| m.value > m.bound.unwrap_or(3.0));
    let path = out.write_json("ingest_bilocal.json", json!({ "results": results, "fnn": violated }))?;
    println!("both violated: {violated}");
    println!("report written to {}", path.display());
    Ok(outcome(violated))
}

fn backend(arg: BackendArg) -> Backend {
    match arg {
        BackendArg::ClosedForm => Backend::ClosedForm,
        BackendArg::Simulation => Backend::Simulation,
    }
}

fn sweep(out: &Output, args: &SweepArgs) -> Result<Outcome> {
    let backend = backend(args.backend);
    if args.star.visibilities.is_some() {
        bail!("sweep varies one common visibility; --visibilities does not apply");
    }
    let angles = args.star.angles();
    if backend == Backend::ClosedForm && (angles.phi0 != 0.0 || angles.phi1 != 0.0) {
        bail!("the closed form only covers phi0 = phi1 = 0; use --backend simulation");
    }
    let grid = args.grid.clone().unwrap_or_else(|| visibility_grid(args.points));
    let result = visibility_sweep(&angles, &grid, backend)?;
    let csv = out.write_text("sweep.csv", &result.to_csv())?;
    out.write_json("sweep.json", json!({ "backend": backend, "best": result.best, "v_crit": result.v_crit }))?;
    println!("{} points written to {}", result.points.len(), csv.display());
    println!("largest value {} at v = {}", num(result.best.value), num(result.best.v));
    match result.v_crit {
        Some(v) => println!("critical visibility {}", num(v)),
        None => println!("no violation at any visibility"),
    }
    Ok(outcome(result.v_crit.is_some()))
}

fn optimize(out: &Output, args: &OptimizeArgs) -> Result<Outcome> {
    let config = OptimizerConfig::new(args.resolution, args.tolerance, args.allow_phi)?;
    let report = optimize_angles(&config)?;
    let best = report.best;
    let v_crit = critical_visibility(&best.angles, report.backend, analysis::DEFAULT_BISECTION_TOLERANCE).ok();
    let a = best.angles;
    println!(
        "I1 = {} at theta0 = {}, theta1 = {}, phi0 = {}, phi1 = {}",
        num(best.value),
        num(a.theta0),
        num(a.theta1),
        num(a.phi0),
        num(a.phi1)
    );
    println!("{} equivalent optima within 1e-6", report.equivalent.len());
    if let Some(c) = v_crit {
        println!("critical visibility {}", num(c.v_crit));
    }
    // the closed form and the simulation agree at the optimum
    let check = witness_value(&best.angles, 1.0, Backend::Simulation)?;
    out.write_json(
        "optimize.json",
        json!({
            "best": best,
            "equivalent": report.equivalent,
            "best_grid_value": report.best_grid_value,
            "backend": report.backend,
            "simulated_value": check,
            "v_crit": v_crit.map(|c| c.v_crit),
        }),
    )?;
    Ok(outcome(best.value > 0.0))
}

fn mutual_info(out: &Output, args: &MutualInfoArgs) -> Result<Outcome> {
    let (d, source) = args.target.load()?;
    let parties: Vec<usize> =
        d.scenario().parties().iter().enumerate().filter(|(_, p)| p.inputs > 1).map(|(i, _)| i).collect();
    let mut entries = Vec::new();
    let mut worst: f64 = 0.0;
    for (n, &i) in parties.iter().enumerate() {
        for &j in &parties[n + 1..] {
            for xi in 0..d.scenario().parties()[i].inputs {
                for xj in 0..d.scenario().parties()[j].inputs {
                    let mi = d.mutual_information(i, j, xi, xj)?;
                    worst = worst.max(mi);
                    let names = (&d.scenario().parties()[i].name, &d.scenario().parties()[j].name);
                    println!("I({}[{xi}] : {}[{xj}]) = {}", names.0, names.1, num(mi));
                    entries.push(json!({ "parties": [names.0, names.1], "inputs": [xi, xj], "bits": mi }));
                }
            }
        }
    }
    let independent = worst <= args.tolerance;
    println!("largest {} bits; independent within {}: {independent}", num(worst), num(args.tolerance));
    out.write_json(
        "mutual_info.json",
        json!({ "input": source, "pairs": entries, "max": worst, "tolerance": args.tolerance, "independent": independent }),
    )?;
    Ok(outcome(independent))
}
