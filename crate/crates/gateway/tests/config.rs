mod support;

use kgtriage_core::diagnosis::{AggregationMode, SpecialistRule};
use kgtriage_core::kg::Specialty;
use kgtriage_gateway::config::{ConfigError, ServiceConfig, DATA_DIR_ENV};
use support::seed_dir;

#[test]
fn seed_file_loads_with_paths_beside_it() {
    let cfg = ServiceConfig::load(&seed_dir().join("kgtriage.conf")).unwrap();
    assert_eq!(cfg.engine.tau, 0.7);
    assert_eq!(cfg.engine.top_k, 5);
    assert_eq!(cfg.engine.specialist_rule, SpecialistRule::SpecialtyNotGeneral);
    assert_eq!(cfg.engine.aggregation, AggregationMode::Uniform);
    assert_eq!(cfg.max_clarifying_questions, 3);
    assert_eq!(cfg.max_chunk_chars, 1000);
    let specialties: Vec<Specialty> = cfg.roster.iter().map(|r| r.specialty).collect();
    assert_eq!(
        specialties,
        [Specialty::Cardiology, Specialty::Neurology, Specialty::Endocrinology, Specialty::Rheumatology]
    );
    assert_eq!(cfg.roster.iter().map(|r| r.weight).sum::<f64>(), 1.0);
    assert_eq!(cfg.lexicon.as_deref(), Some(seed_dir().join("lexicon.tsv").as_path()));
    assert!(cfg.lexicon.unwrap().exists());
    assert!(cfg.patterns.unwrap().exists());
    assert!(cfg.data_dir.starts_with(seed_dir()));
}

#[test]
fn env_overrides_the_data_dir() {
    // the only test in this binary touching the variable
    std::env::set_var(DATA_DIR_ENV, "/tmp/kgtriage-env-dir");
    let cfg = ServiceConfig::parse("data_dir = /elsewhere").unwrap().with_env();
    std::env::remove_var(DATA_DIR_ENV);
    assert_eq!(cfg.data_dir, std::path::PathBuf::from("/tmp/kgtriage-env-dir"));
    let cfg = ServiceConfig::parse("data_dir = /elsewhere").unwrap().with_env();
    assert_eq!(cfg.data_dir, std::path::PathBuf::from("/elsewhere"));
}

#[test]
fn weighted_roster_must_sum_to_one() {
    let ok = ServiceConfig::parse("aggregation = weighted\nroster = cardiology:0.7, neurology:0.2, rheumatology:0.1").unwrap();
    let roster = ok.build_roster().unwrap();
    let weights: Vec<f64> = roster.consultants().map(|a| a.weight).collect();
    assert_eq!(weights, [0.7, 0.2, 0.1]);
    // uniform mode does not read the weights
    assert!(ServiceConfig::parse("roster = cardiology:0.7, neurology:0.7").is_ok());
    let err = ServiceConfig::parse("aggregation = weighted\nroster = cardiology:0.7, neurology:0.7").unwrap_err();
    assert!(matches!(err, ConfigError::Invalid(_)), "{err}");
}

#[test]
fn missing_file_is_reported() {
    let err = ServiceConfig::load(&seed_dir().join("absent.conf")).unwrap_err();
    assert!(err.to_string().contains("absent.conf"));
}
