//! Physical configuration of the link, geometry and the RF power budget.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

use crate::error::{config_err, CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum User {
    /// indoor user served through the surface
    T,
    /// outdoor user served by reflection
    R,
}

impl User {
    pub const BOTH: [User; 2] = [User::T, User::R];
}

impl std::fmt::Display for User {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            User::T => "T",
            User::R => "R",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detection {
    Heterodyne,
    Imdd,
}

impl Detection {
    /// exponent r in γ_F = γ̄_F h^r
    pub fn order(self) -> u32 {
        match self {
            Detection::Heterodyne => 1,
            Detection::Imdd => 2,
        }
    }

    /// capacity constant c₀
    pub fn capacity_constant(self) -> f64 {
        match self {
            Detection::Heterodyne => 1.0,
            Detection::Imdd => std::f64::consts::E / (2.0 * PI),
        }
    }
}

/// How the Gaussian beam width is specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BeamSpec {
    /// Beam width ω(d_OH, ω₀) at the HAP, taken as the width at the
    /// receive plane.
    WaistAtHap(f64),
    /// Initial waist ω₀ at the transmitter; widths follow from free-space
    /// propagation.
    InitialWaist(f64),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserOverride {
    #[serde(default, rename = "T")]
    pub t: Option<f64>,
    #[serde(default, rename = "R")]
    pub r: Option<f64>,
}

impl UserOverride {
    pub fn get(&self, user: User) -> Option<f64> {
        match user {
            User::T => self.t,
            User::R => self.r,
        }
    }
}

fn default_scale_height() -> f64 {
    1000.0
}

/// Every physical parameter of the scenario. Lengths in meters, angles in
/// radians, powers and gains in dB unless noted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub h_ogs: f64,
    pub h_hap: f64,
    pub h_es: f64,
    pub h_star: f64,
    pub h_trans: f64,
    pub h_refl: f64,
    pub d_es_star: f64,
    pub d_star_trans: f64,
    pub d_star_refl: f64,
    /// ζ₁ = θ_i
    pub zenith_ogs: f64,
    /// ζ₂ = θ_r
    pub zenith_es: f64,
    /// φ_r
    pub azimuth_reflect: f64,
    /// θ_rl
    pub lens_offset: f64,
    pub wavelength: f64,
    /// W₀, used by the uplink scintillation term
    pub beam_radius: f64,
    pub beam: BeamSpec,
    /// F₀; null is a collimated beam
    pub focal_length: Option<f64>,
    pub wind_rms: f64,
    /// A in m^{-2/3}
    pub hv_nominal: f64,
    #[serde(default = "default_scale_height")]
    pub hv_scale_height: f64,
    pub aperture_radius: f64,
    pub jitter_source: f64,
    pub jitter_oirs: f64,
    pub jitter_lens: f64,
    /// ζ_p
    pub reflection_efficiency: f64,
    /// κ in dB per meter
    pub absorption: f64,
    /// K_F
    pub series_terms: u32,
    /// C
    pub relay_constant: f64,
    /// m̃_A
    pub m_es_star: f64,
    pub m_trans: f64,
    pub m_refl: f64,
    /// Ω̃_A
    pub omega_es_star: f64,
    pub omega_trans: f64,
    pub omega_refl: f64,
    pub rho_trans: f64,
    pub rho_refl: f64,
    /// σ_R², linear
    pub rf_noise_power: f64,
    pub tx_power_db: f64,
    pub carrier_hz: f64,
    pub gain_tx_db: f64,
    pub gain_rx_db: f64,
    pub n_fso: u32,
    pub n_ris: u32,
    pub detection: Detection,
    pub threshold_db: f64,
    /// Pins γ̄_R,ℓ (dB) instead of the path-loss budget.
    #[serde(default)]
    pub gamma_r_override_db: UserOverride,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| config_err(&json_field(&e), e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err("<file>", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn detection_order(&self) -> u32 {
        self.detection.order()
    }

    pub fn threshold(&self) -> f64 {
        db_to_linear(self.threshold_db)
    }

    pub fn m_user(&self, user: User) -> f64 {
        match user {
            User::T => self.m_trans,
            User::R => self.m_refl,
        }
    }

    pub fn omega_user(&self, user: User) -> f64 {
        match user {
            User::T => self.omega_trans,
            User::R => self.omega_refl,
        }
    }

    pub fn rho(&self, user: User) -> f64 {
        match user {
            User::T => self.rho_trans,
            User::R => self.rho_refl,
        }
    }

    pub fn h_user(&self, user: User) -> f64 {
        match user {
            User::T => self.h_trans,
            User::R => self.h_refl,
        }
    }

    pub fn d_star_user(&self, user: User) -> f64 {
        match user {
            User::T => self.d_star_trans,
            User::R => self.d_star_refl,
        }
    }

    /// Checks every invariant; the first violation is reported by field.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("h_hap", self.h_hap),
            ("d_es_star", self.d_es_star),
            ("d_star_trans", self.d_star_trans),
            ("d_star_refl", self.d_star_refl),
            ("wavelength", self.wavelength),
            ("beam_radius", self.beam_radius),
            ("hv_scale_height", self.hv_scale_height),
            ("aperture_radius", self.aperture_radius),
            ("relay_constant", self.relay_constant),
            ("m_es_star", self.m_es_star),
            ("m_trans", self.m_trans),
            ("m_refl", self.m_refl),
            ("omega_es_star", self.omega_es_star),
            ("omega_trans", self.omega_trans),
            ("omega_refl", self.omega_refl),
            ("rf_noise_power", self.rf_noise_power),
            ("carrier_hz", self.carrier_hz),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(config_err(name, format!("must be positive and finite, got {v}")));
            }
        }
        let finite = [
            ("h_ogs", self.h_ogs),
            ("h_es", self.h_es),
            ("h_star", self.h_star),
            ("h_trans", self.h_trans),
            ("h_refl", self.h_refl),
            ("azimuth_reflect", self.azimuth_reflect),
            ("lens_offset", self.lens_offset),
            ("tx_power_db", self.tx_power_db),
            ("gain_tx_db", self.gain_tx_db),
            ("gain_rx_db", self.gain_rx_db),
            ("threshold_db", self.threshold_db),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(config_err(name, format!("must be finite, got {v}")));
            }
        }
        let nonneg = [
            ("wind_rms", self.wind_rms),
            ("hv_nominal", self.hv_nominal),
            ("jitter_source", self.jitter_source),
            ("jitter_oirs", self.jitter_oirs),
            ("jitter_lens", self.jitter_lens),
            ("absorption", self.absorption),
            ("rho_trans", self.rho_trans),
            ("rho_refl", self.rho_refl),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(config_err(name, format!("must be non-negative, got {v}")));
            }
        }
        if self.h_ogs >= self.h_hap {
            return Err(config_err("h_ogs", "ground station must be below the HAP"));
        }
        if self.h_es >= self.h_hap {
            return Err(config_err("h_es", "earth station must be below the HAP"));
        }
        for (name, z) in [("zenith_ogs", self.zenith_ogs), ("zenith_es", self.zenith_es)] {
            if !(z > 0.0 && z < 0.5 * PI) {
                return Err(config_err(name, format!("must lie in (0, π/2), got {z}")));
            }
        }
        if !(self.reflection_efficiency > 0.0 && self.reflection_efficiency <= 1.0) {
            return Err(config_err("reflection_efficiency", "must lie in (0, 1]"));
        }
        let split = self.rho_trans.powi(2) + self.rho_refl.powi(2);
        if (split - 1.0).abs() > 1e-9 {
            return Err(config_err(
                "rho_trans",
                format!("power split must satisfy rho_trans² + rho_refl² = 1, got {split}"),
            ));
        }
        match self.beam {
            BeamSpec::WaistAtHap(w) | BeamSpec::InitialWaist(w) => {
                if !(w > 0.0) || !w.is_finite() {
                    return Err(config_err("beam", format!("width must be positive, got {w}")));
                }
            }
        }
        if let Some(f) = self.focal_length {
            if f == 0.0 || !f.is_finite() {
                return Err(config_err("focal_length", "must be non-zero and finite, or null"));
            }
        }
        if self.n_fso == 0 {
            return Err(config_err("n_fso", "need at least one laser source"));
        }
        if self.n_ris == 0 {
            return Err(config_err("n_ris", "need at least one surface element"));
        }
        for u in User::BOTH {
            if let Some(v) = self.gamma_r_override_db.get(u) {
                if !v.is_finite() {
                    return Err(config_err("gamma_r_override_db", format!("{u}: must be finite")));
                }
            }
        }
        Ok(())
    }
}

/// Best-effort extraction of the offending key from a serde_json message.
fn json_field(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    for marker in ["unknown field `", "missing field `"] {
        if let Some(i) = msg.find(marker) {
            let rest = &msg[i + marker.len()..];
            if let Some(j) = rest.find('`') {
                return rest[..j].to_string();
            }
        }
    }
    "<json>".to_string()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    pub d_oh: f64,
    pub d_he: f64,
    pub d_es: f64,
    pub d_st: f64,
    pub d_sr: f64,
}

impl LinkGeometry {
    pub fn d_star_user(&self, user: User) -> f64 {
        match user {
            User::T => self.d_st,
            User::R => self.d_sr,
        }
    }
}

pub fn derive_geometry(cfg: &ScenarioConfig) -> Result<LinkGeometry> {
    let slant = |dh: f64, z: f64, what: &str| -> Result<f64> {
        let c = z.cos();
        if !(c > 1e-12) {
            return Err(CoreError::Geometry(format!("{what}: cos of zenith angle is {c}")));
        }
        if !(dh > 0.0) {
            return Err(CoreError::Geometry(format!("{what}: height difference {dh}")));
        }
        Ok(dh / c)
    };
    let d_oh = slant(cfg.h_hap - cfg.h_ogs, cfg.zenith_ogs, "OGS-HAP")?;
    let d_he = slant(cfg.h_hap - cfg.h_es, cfg.zenith_es, "HAP-ES")?;
    let d_es = cfg.d_es_star.hypot(cfg.h_star - cfg.h_es);
    let d_st = cfg.d_star_trans.hypot(cfg.h_star - cfg.h_trans);
    let d_sr = cfg.d_star_refl.hypot(cfg.h_star - cfg.h_refl);
    for (what, d) in [("ES-surface", d_es), ("surface-T", d_st), ("surface-R", d_sr)] {
        if !(d > 0.0) {
            return Err(CoreError::Geometry(format!("{what} distance is {d}")));
        }
    }
    Ok(LinkGeometry { d_oh, d_he, d_es, d_st, d_sr })
}

/// Mean RF SNR of one user with its budget terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfBudget {
    pub path_loss_db: f64,
    pub received_power_db: f64,
    /// from the budget, before any override
    pub budget_snr_db: f64,
    pub mean_snr_db: f64,
    pub mean_snr: f64,
    pub overridden: bool,
}

/// L = 40 log10(d_ES + d_Sℓ) + 20 log10(f / 1 GHz).
pub fn path_loss_db(distance: f64, carrier_hz: f64) -> f64 {
    40.0 * distance.log10() + 20.0 * (carrier_hz / 1e9).log10()
}

pub fn rf_mean_snr(cfg: &ScenarioConfig, geom: &LinkGeometry, user: User) -> RfBudget {
    let path_loss_db = path_loss_db(geom.d_es + geom.d_star_user(user), cfg.carrier_hz);
    let received_power_db = cfg.tx_power_db - path_loss_db + cfg.gain_tx_db + cfg.gain_rx_db;
    let budget = db_to_linear(received_power_db) * cfg.rho(user).powi(2) / cfg.rf_noise_power;
    let budget_snr_db = linear_to_db(budget);
    let (mean_snr_db, overridden) = match cfg.gamma_r_override_db.get(user) {
        Some(v) => (v, true),
        None => (budget_snr_db, false),
    };
    RfBudget {
        path_loss_db,
        received_power_db,
        budget_snr_db,
        mean_snr_db,
        mean_snr: if overridden { db_to_linear(mean_snr_db) } else { budget },
        overridden,
    }
}
