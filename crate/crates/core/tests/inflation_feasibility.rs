//! Distributions with a classical explanation at a placement pass that placement's LP.

use fnn_core::dist::{ConditionalDistribution, Scenario};
use fnn_core::inflation::{
    build_inflation_lp, build_inflation_lp_exact, certify_fnn, deterministic_strategies, rationalize,
    sample_rational_model,
};
use fnn_core::lpsolve::{verify_point, Feasibility, SolverOptions};
use fnn_core::qsim::{simulate_star, StarStrategy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn uniform_passes_every_placement() {
    let report = certify_fnn(&ConditionalDistribution::uniform(Scenario::star())).unwrap();
    assert!(!report.fnn);
    assert_eq!(report.agrees_with_symmetry, Some(true));
    for p in &report.placements {
        let Feasibility::Feasible(x) = &p.result else { panic!("uniform rejected") };
        assert!(verify_point(p.problem.system(), x));
    }
}

#[test]
fn sampled_deterministic_strategies_pass() {
    for d in deterministic_strategies().iter().step_by(13) {
        for k in 1..=3 {
            assert!(build_inflation_lp(d, k).unwrap().solve(&SolverOptions::default()).unwrap().is_feasible());
        }
    }
}

#[test]
fn dyadic_hybrid_models_pass_their_placement() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for k in 1..=3 {
        for _ in 0..4 {
            let m = sample_rational_model(k, &mut rng).unwrap();
            let exact = rationalize(&m.distribution().unwrap(), 1 << 20).unwrap();
            let p = build_inflation_lp_exact(&exact, k).unwrap();
            assert!(p.solve(&SolverOptions::default()).unwrap().is_feasible());
        }
    }
}

#[test]
fn noisy_star_is_not_certified() {
    // far below the critical visibility of the known witnesses
    let d = simulate_star(&StarStrategy::new(-1.865, -0.415).with_visibility(0.5)).unwrap();
    let report = certify_fnn(&d).unwrap();
    assert!(!report.fnn);
}
