use std::fs;

use streetrisk_core::eval::{gini, ScoredPolicy};
use streetrisk_core::kappa::agreement_report;
use streetrisk_core::pipeline::{load_fixtures, prepare_dataset, Fixtures, PrepareOptions};
use streetrisk_core::schema::AnnotationSchema;
use streetrisk_core::synth::{export_fixtures, generate_portfolio, AnnotatorProfile, SynthConfig};

fn small(seed: u64) -> SynthConfig {
    SynthConfig {
        seed,
        n_policies: 5_000,
        n_foreign: 10,
        n_unresolved: 20,
        common_set_size: 200,
        ..SynthConfig::default()
    }
}

#[test]
fn same_seed_gives_byte_identical_fixtures() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    export_fixtures(&generate_portfolio(&small(3)).unwrap(), a.path()).unwrap();
    export_fixtures(&generate_portfolio(&small(3)).unwrap(), b.path()).unwrap();
    let mut names: Vec<_> = fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 7);
    for name in names {
        assert_eq!(
            fs::read(a.path().join(&name)).unwrap(),
            fs::read(b.path().join(&name)).unwrap(),
            "{name:?}"
        );
    }
}

#[test]
fn reingest_reproduces_generated_records() {
    let dir = tempfile::tempdir().unwrap();
    let generated = generate_portfolio(&small(4)).unwrap();
    export_fixtures(&generated, dir.path()).unwrap();
    let fx = load_fixtures(dir.path()).unwrap();
    assert_eq!(fx.policies.records, generated.policies);
    assert_eq!(fx.registry.entries(), generated.addresses.as_slice());
    assert_eq!(fx.annotations, generated.annotations);
}

#[test]
fn in_memory_fixtures_match_the_exported_directory() {
    let dir = tempfile::tempdir().unwrap();
    let generated = generate_portfolio(&small(6)).unwrap();
    export_fixtures(&generated, dir.path()).unwrap();
    let loaded = load_fixtures(dir.path()).unwrap();
    let direct = Fixtures::from_portfolio(&generated).unwrap();
    assert_eq!(direct.schema, loaded.schema);
    assert_eq!(direct.common_set, loaded.common_set);
    assert_eq!(direct.provenance, loaded.provenance);
    let options = PrepareOptions::default();
    let a = prepare_dataset(&direct, &options).unwrap();
    let b = prepare_dataset(&loaded, &options).unwrap();
    assert_eq!(a.dataset, b.dataset);
}

#[test]
fn realised_frequency_tracks_target() {
    let p = generate_portfolio(&SynthConfig::default()).unwrap();
    let claims: f64 = p.policies.iter().map(|r| f64::from(r.claim_count)).sum();
    let exposure: f64 = p.policies.iter().map(|r| r.exposure).sum();
    let latent: f64 = p.truth.policies.iter().map(|t| t.latent_frequency).sum::<f64>()
        / p.policies.len() as f64;
    assert!((latent - 0.05).abs() < 1e-12);
    // about 770 expected claims: four standard deviations is roughly 0.007
    assert!((claims / exposure - 0.05).abs() < 0.0075, "{}", claims / exposure);
    let b_mean: f64 = p.policies.iter().map(|r| r.model_b_frequency).sum::<f64>() / p.policies.len() as f64;
    assert!((b_mean - 0.05).abs() < 1e-12);
}

#[test]
fn noiseless_annotators_agree_perfectly() {
    let mut cfg = small(5);
    cfg.annotators = ["a", "b", "c"].iter().map(|id| AnnotatorProfile::exact(id)).collect();
    let p = generate_portfolio(&cfg).unwrap();
    let report = agreement_report(&p.annotations, &AnnotationSchema::standard(), &p.common_set, None).unwrap();
    assert_eq!(report.rows.len(), 7);
    for row in &report.rows {
        assert_eq!(row.kappa, Some(1.0), "{}", row.variable);
    }
}

#[test]
fn incumbent_quality_raises_its_gini_on_average() {
    let quality = [0.1, 0.5, 0.9];
    let mut means = Vec::new();
    for q in quality {
        let mut total = 0.0;
        for seed in 0..6 {
            let cfg = SynthConfig {
                model_b_quality: q,
                ..small(100 + seed)
            };
            let p = generate_portfolio(&cfg).unwrap();
            let scored: Vec<ScoredPolicy> = p
                .policies
                .iter()
                .map(|r| ScoredPolicy {
                    score: r.model_b_expected(),
                    weight: 1.0,
                    outcome: f64::from(r.claim_count),
                })
                .collect();
            total += gini(&scored).unwrap();
        }
        means.push(total / 6.0);
    }
    assert!(means.windows(2).all(|w| w[0] < w[1]), "{means:?}");
}
