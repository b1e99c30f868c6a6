use std::path::PathBuf;

use approx::assert_abs_diff_eq;
use fnn_core::qsim::{simulate_star, StarStrategy};
use fnn_core::stats::*;
use fnn_core::witness::{condition_on_ghz_success, BilocalWitness};

fn fixture_dir(kind: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(kind)
}

fn fixture_files(kind: &str) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(fixture_dir(kind))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    files
}

const CHECKSUMS: [(&str, &str); 12] = [
    ("bilocal/setting_00.csv", "0dfe7094033f0bd87a1ebeaf4169be5a7b3629475bc332aebdf9ec4899869037"),
    ("bilocal/setting_01.csv", "5579e01d597bc7f4b0e5d1b0d246d642a2cdd6881d3d1b5b772ef75fc5d3b2a4"),
    ("bilocal/setting_10.csv", "d12e37be6b43039ecba4af980f40a95a15753cef4ca8b3867e07f4e9d3529c34"),
    ("bilocal/setting_11.csv", "5e75ed56996f4f56e4c9b05dc4d3fdeff7362b01bdb7d69af81fc7a2dbf1e06c"),
    ("star/setting_000.csv", "5967b9241a344412156a465501b9d37d6c0871d993574f9b50c374e5f875336d"),
    ("star/setting_001.csv", "9096abed244c70de8eb284c944b9abf5ac2812d0fce1aee0d600f6501c3e7873"),
    ("star/setting_010.csv", "38437311f0222a1a03fcaa6c784afce60b39d002d91c4670c188f39b0fa46a03"),
    ("star/setting_011.csv", "76322b78e95a8633a14473170e89e747f2a046067d8d1f366a95763f51d248e8"),
    ("star/setting_100.csv", "d7a6e3db70b9943daf5230d7ad741734e19c7711c99c14ad614aa531abf21496"),
    ("star/setting_101.csv", "6e6bdce5d779bcb9d4ae5146f76640abc26ec71f0e41507f56a279f30d510526"),
    ("star/setting_110.csv", "b00e411ca87cae62192101cb79027b03e28226cbc29f053975fa08dc4611c32e"),
    ("star/setting_111.csv", "b91ecefec83bbd4e3cb23e07ef716b206f23e106e733ec043a22db5d6100c1aa"),
];

#[test]
fn fixtures_match_checksums() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    for (name, sum) in CHECKSUMS {
        let bytes = std::fs::read(root.join(name)).unwrap();
        assert_eq!(sha256_hex(&bytes), sum, "{name} changed");
    }
    assert_eq!(fixture_files("star").len() + fixture_files("bilocal").len(), CHECKSUMS.len());
}

#[test]
fn fixture_totals() {
    let star = parse_count_files(&fixture_files("star"), ParseOptions::default()).unwrap();
    assert_eq!(star.kind(), CountKind::StarB0);
    assert_eq!(star.total_at(&[0, 0, 0]).unwrap(), 19530);
    let bilocal = parse_count_files(&fixture_files("bilocal"), ParseOptions::default()).unwrap();
    assert_eq!(bilocal.kind(), CountKind::Bilocal);
    assert_eq!(bilocal.total_at(&[1, 0, 1]).unwrap(), 7848);
    let single = parse_counts(&fixture_files("star")[0], ParseOptions::default());
    assert!(single.is_err(), "one setting alone leaves the other rows missing");
}

#[test]
fn star_reproduction() {
    let star = parse_count_files(&fixture_files("star"), ParseOptions::default()).unwrap();
    let rec = ProjectionRecord::parse("2019/15562").unwrap();
    let est = ingest_star(&star, &estimate_p_b0(&rec).unwrap()).unwrap();
    for (v, paper) in est.values.iter().zip([0.0598, 0.0404, 0.0471]) {
        assert_abs_diff_eq!(*v, paper, epsilon = 1e-3);
    }
    for (i, paper_sigma) in [(1, 0.0041), (2, 0.0040), (3, 0.0041)] {
        let m = measure(&star, Some(Projection::Record(rec)), WitnessId::Star(i), BootstrapConfig::default()).unwrap();
        assert_eq!(m.value, est.values[i - 1]);
        assert!((m.sigma / paper_sigma - 1.0).abs() <= 0.25, "I{i}: sigma {}", m.sigma);
        assert!(m.significance().unwrap() > 10.0);
        assert!(m.p_value.unwrap() < 1e-20);
        assert_eq!(m.inputs.len(), 8);
    }
}

#[test]
fn bilocal_reproduction() {
    let counts = parse_count_files(&fixture_files("bilocal"), ParseOptions::default()).unwrap();
    let est = ingest_bilocal(&counts).unwrap();
    assert_abs_diff_eq!(est.r_c_ns, 3.4966, epsilon = 2e-3);
    assert_abs_diff_eq!(est.r_ns_c, 3.4166, epsilon = 2e-3);
    for kind in [BilocalWitness::ClassicalNs, BilocalWitness::NsClassical] {
        let m = measure(&counts, None, WitnessId::Bilocal(kind), BootstrapConfig::default()).unwrap();
        assert!(m.significance().unwrap() > 10.0);
        assert!(m.method.notes.iter().any(|n| n.contains("doubled")));
    }
}

#[test]
fn doubling_all_counts_changes_nothing() {
    let counts = parse_count_files(&fixture_files("bilocal"), ParseOptions::default()).unwrap();
    let a = ingest_bilocal(&counts).unwrap();
    let b = ingest_bilocal(&counts.scaled(2)).unwrap();
    assert_eq!((a.r_c_ns, a.r_ns_c), (b.r_c_ns, b.r_ns_c));
}

#[test]
fn sigma_shrinks_like_inverse_root_n() {
    let d = simulate_star(&StarStrategy::new(-1.865, -0.415).with_visibility(0.9)).unwrap();
    let (b0, _) = condition_on_ghz_success(&d).unwrap();
    let small = CountTable::from_distribution(CountKind::StarB0, &b0, 4000.0).unwrap();
    let fixed = Some(Projection::Fixed(0.125));
    for i in 1..=3 {
        let s1 = bootstrap_uncertainty(&small, fixed, WitnessId::Star(i), 1000, 5).unwrap();
        let s4 = bootstrap_uncertainty(&small.scaled(4), fixed, WitnessId::Star(i), 1000, 5).unwrap();
        assert!((s4 / s1 / 0.5 - 1.0).abs() < 0.15, "I{i}: {s1} -> {s4}");
    }
}

#[test]
fn result_json_shape() {
    let star = parse_count_files(&fixture_files("star"), ParseOptions::default()).unwrap();
    let rec = ProjectionRecord::new(15562, 2019).unwrap();
    let config = BootstrapConfig { n_resamples: 100, seed: 42 };
    let m = measure(&star, Some(Projection::Record(rec)), WitnessId::Star(1), config).unwrap();
    let v = serde_json::to_value(&m).unwrap();
    for key in ["witness", "value", "sigma", "p_value", "method", "inputs"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["method"]["bootstrap_n"], 100);
    assert_eq!(v["method"]["seed"], 42);
    let again = measure(&star, Some(Projection::Record(rec)), WitnessId::Star(1), config).unwrap();
    assert_eq!(serde_json::to_string(&m).unwrap(), serde_json::to_string(&again).unwrap());
}
