//! Fixtures over the checked-in seed data.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use kgtriage_core::ingestion::Document;
use kgtriage_gateway::config::ServiceConfig;
use kgtriage_gateway::service::Service;

pub fn seed_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/seed")
}

pub fn seed_config(data_dir: &Path) -> ServiceConfig {
    let mut cfg = ServiceConfig::load(&seed_dir().join("kgtriage.conf")).expect("seed config parses");
    cfg.data_dir = data_dir.to_path_buf();
    cfg
}

pub fn seed_docs() -> Vec<Document> {
    let dir = seed_dir().join("corpus");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| Document::new(p.file_stem().unwrap().to_str().unwrap(), std::fs::read_to_string(p).unwrap()))
        .collect()
}

/// A service over `data_dir` with the seed corpus ingested.
pub fn seeded_service(data_dir: &Path) -> Service {
    let svc = Service::open(seed_config(data_dir)).unwrap();
    svc.ingest(&seed_docs()).unwrap();
    svc
}
