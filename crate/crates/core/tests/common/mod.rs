#![allow(dead_code)]

use std::path::PathBuf;

use hybridlink::e2e_metrics::E2EParams;
use hybridlink::rf_link::DiscriminantPolicy;
use hybridlink::scenario::{ScenarioConfig, User};

pub fn config_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../config/table2.json")
}

pub fn table2() -> ScenarioConfig {
    ScenarioConfig::load(&config_path()).expect("shipped config loads")
}

pub fn params(cfg: &ScenarioConfig, user: User, db: f64) -> E2EParams {
    E2EParams::derive(cfg, user, db, DiscriminantPolicy::ComplexModulus).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
