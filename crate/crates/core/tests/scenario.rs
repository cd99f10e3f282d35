mod common;

use common::{rel, table2};
use hybridlink::scenario::*;
use hybridlink::CoreError;
use proptest::prelude::*;

#[test]
fn table2_geometry() {
    let g = derive_geometry(&table2()).unwrap();
    assert!(rel(g.d_oh, 17950.0 / (std::f64::consts::PI / 6.0).cos()) < 1e-12);
    assert!((g.d_oh - 20726.87).abs() < 0.01);
    assert!((g.d_es - (500f64.powi(2) + 50f64.powi(2)).sqrt()).abs() < 1e-9);
    assert!((g.d_es - 502.49).abs() < 0.005);
    assert_eq!(g.d_st, 10.0);
    assert!((g.d_sr - 500f64.hypot(98.0)).abs() < 1e-9);
}

#[test]
fn vertical_path() {
    let mut cfg = table2();
    cfg.zenith_ogs = 0.0;
    let g = derive_geometry(&cfg).unwrap();
    assert_eq!(g.d_oh, 17950.0);
    assert!(g.d_oh >= cfg.h_hap - cfg.h_ogs);
}

#[test]
fn unit_budget() {
    assert_eq!(path_loss_db(1.0, 1e9), 0.0);
    let mut cfg = table2();
    cfg.tx_power_db = 0.0;
    cfg.gain_tx_db = 0.0;
    cfg.gain_rx_db = 0.0;
    cfg.rf_noise_power = 1.0;
    cfg.carrier_hz = 1e9;
    cfg.gamma_r_override_db = UserOverride::default();
    let geom = LinkGeometry { d_oh: 1.0, d_he: 1.0, d_es: 0.5, d_st: 0.5, d_sr: 0.5 };
    let b = rf_mean_snr(&cfg, &geom, User::T);
    assert!(rel(b.mean_snr, cfg.rho_trans.powi(2)) < 1e-12);
}

#[test]
fn doubling_distance_adds_12_db() {
    let d = 40.0 * 2f64.log10();
    assert!((path_loss_db(1000.0, 5e9) - path_loss_db(500.0, 5e9) - d).abs() < 1e-12);
    assert!((d - 12.04).abs() < 0.01);
}

#[test]
fn reflection_budget_golden() {
    let mut cfg = table2();
    cfg.gamma_r_override_db = UserOverride::default();
    let g = derive_geometry(&cfg).unwrap();
    let b = rf_mean_snr(&cfg, &g, User::R);
    let l = 40.0 * (g.d_es + g.d_sr).log10() + 20.0 * 5f64.log10();
    assert!((b.path_loss_db - l).abs() < 1e-12);
    assert!((b.path_loss_db - 134.1867).abs() < 1e-3);
    assert!((b.mean_snr_db - (-34.6237)).abs() < 1e-3);
    assert!(!b.overridden);
}

#[test]
fn override_pins_mean_snr() {
    let cfg = table2();
    let g = derive_geometry(&cfg).unwrap();
    let b = rf_mean_snr(&cfg, &g, User::R);
    assert!(b.overridden);
    assert_eq!(b.mean_snr_db, cfg.gamma_r_override_db.r.unwrap());
    assert!(rel(b.mean_snr, db_to_linear(b.mean_snr_db)) < 1e-15);
}

#[test]
fn power_split_must_be_normalized() {
    let mut cfg = table2();
    cfg.rho_trans = 0.8;
    cfg.rho_refl = 0.7;
    match cfg.validate() {
        Err(CoreError::Config { field, .. }) => assert!(field.starts_with("rho")),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn missing_field_is_named() {
    let mut v: serde_json::Value = serde_json::from_str(&table2().to_json()).unwrap();
    v.as_object_mut().unwrap().remove("aperture_radius");
    match ScenarioConfig::from_json(&v.to_string()) {
        Err(CoreError::Config { field, .. }) => assert_eq!(field, "aperture_radius"),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn unknown_key_is_rejected() {
    let mut v: serde_json::Value = serde_json::from_str(&table2().to_json()).unwrap();
    v["colour"] = serde_json::json!(3);
    assert!(matches!(ScenarioConfig::from_json(&v.to_string()), Err(CoreError::Config { .. })));
}

#[test]
fn invariant_violations() {
    let cases: Vec<Box<dyn Fn(&mut ScenarioConfig)>> = vec![
        Box::new(|c| c.h_ogs = c.h_hap + 1.0),
        Box::new(|c| c.h_es = c.h_hap),
        Box::new(|c| c.zenith_ogs = 0.0),
        Box::new(|c| c.zenith_es = std::f64::consts::FRAC_PI_2),
        Box::new(|c| c.d_es_star = -1.0),
    ];
    for f in cases {
        let mut cfg = table2();
        f(&mut cfg);
        assert!(cfg.validate().is_err());
    }
    let text = table2().to_json().replace("\"heterodyne\"", "\"coherent\"");
    assert!(ScenarioConfig::from_json(&text).is_err());
}

#[test]
fn json_round_trip() {
    let cfg = table2();
    assert_eq!(ScenarioConfig::from_json(&cfg.to_json()).unwrap(), cfg);
}

#[test]
fn db_conversions() {
    assert_eq!(db_to_linear(20.0), 100.0);
    assert!((linear_to_db(db_to_linear(-38.31)) + 38.31).abs() < 1e-12);
}

proptest! {
    #[test]
    fn mean_snr_decreases_with_distance_and_carrier(d in 10.0..5000.0f64, extra in 1.0..1000.0f64, f in 1e8..1e11f64) {
        let mut cfg = table2();
        cfg.gamma_r_override_db = UserOverride::default();
        let geom = |dsr: f64| LinkGeometry { d_oh: 1.0, d_he: 1.0, d_es: d, d_st: 10.0, d_sr: dsr };
        cfg.carrier_hz = f;
        let near = rf_mean_snr(&cfg, &geom(d), User::R).mean_snr;
        let far = rf_mean_snr(&cfg, &geom(d + extra), User::R).mean_snr;
        prop_assert!(far < near);
        cfg.carrier_hz = f * 1.5;
        prop_assert!(rf_mean_snr(&cfg, &geom(d), User::R).mean_snr < near);
    }

    #[test]
    fn equal_loss_gives_equal_normalized_budget(d in 10.0..2000.0f64) {
        let mut cfg = table2();
        cfg.gamma_r_override_db = UserOverride::default();
        let geom = LinkGeometry { d_oh: 1.0, d_he: 1.0, d_es: d, d_st: 100.0, d_sr: 100.0 };
        let t = rf_mean_snr(&cfg, &geom, User::T).mean_snr / cfg.rho_trans.powi(2);
        let r = rf_mean_snr(&cfg, &geom, User::R).mean_snr / cfg.rho_refl.powi(2);
        prop_assert!(rel(t, r) < 1e-12);
    }
}

#[test]
fn schema_lists_every_field() {
    let path = common::config_path().with_file_name("table2.schema.json");
    let schema: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let props = schema["properties"].as_object().unwrap();
    let cfg: serde_json::Value = serde_json::from_str(&table2().to_json()).unwrap();
    let fields = cfg.as_object().unwrap();
    for k in fields.keys() {
        assert!(props.contains_key(k), "schema misses {k}");
    }
    for k in props.keys() {
        assert!(fields.contains_key(k), "schema has unknown {k}");
    }
}
