//! End-to-end statistics of the fixed-gain relay, γ = γ_F γ_R / (γ_R + C),
//! and the metrics built on them.
//!
//! Exact forms are bivariate Fox-H integrals in (s, t): s carries the FSO
//! hop through X = A^r γ̄_F / γ, t the RF hop through Y = C Ψ² / γ̄_R, and
//! Γ(s + t) couples them.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use specfun::{
    fox_h_bivariate_weighted, gamma, ln_gamma_real, meijer_g, mellin_barnes, BivariateFoxHSpec, GammaFactors, GammaTerm, MbOptions,
};

use crate::error::{CoreError, Result};
use crate::fso_link::{fso_snr_cdf, FsoParams};
use crate::rf_link::{DiscriminantPolicy, RfParams};
use crate::scenario::{db_to_linear, derive_geometry, Detection, ScenarioConfig, User};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationScheme {
    pub name: String,
    pub delta: f64,
    pub p: f64,
    pub q: Vec<f64>,
    pub detection: Detection,
}

impl ModulationScheme {
    pub fn ook() -> Self {
        ModulationScheme {
            name: "ook".into(),
            delta: 1.0,
            p: 0.5,
            q: vec![0.5],
            detection: Detection::Imdd,
        }
    }

    pub fn mpsk(order: u32) -> Result<Self> {
        if order < 2 || !order.is_power_of_two() {
            return Err(CoreError::Request(format!("M-PSK order must be a power of two, got {order}")));
        }
        let m = order as f64;
        let bits = m.log2();
        let n_b = (order / 4).max(1);
        Ok(ModulationScheme {
            name: if order == 2 { "bpsk".into() } else { format!("{order}psk") },
            delta: 2.0 / bits.max(2.0),
            p: 0.5,
            q: (1..=n_b)
                .map(|i| ((2 * i - 1) as f64 * PI / m).sin().powi(2) * bits)
                .collect(),
            detection: Detection::Heterodyne,
        })
    }

    pub fn mqam(order: u32) -> Result<Self> {
        let side = (order as f64).sqrt().round() as u32;
        if order < 4 || side * side != order || !side.is_power_of_two() {
            return Err(CoreError::Request(format!("M-QAM order must be an even power of two, got {order}")));
        }
        let m = order as f64;
        let bits = m.log2();
        Ok(ModulationScheme {
            name: format!("{order}qam"),
            delta: 4.0 / bits * (1.0 - 1.0 / m.sqrt()),
            p: 0.5,
            q: (1..=side / 2)
                .map(|i| 3.0 * ((2 * i - 1) as f64).powi(2) / (2.0 * (m - 1.0)) * bits)
                .collect(),
            detection: Detection::Heterodyne,
        })
    }

    /// "ook", "bpsk", "<M>psk", "qpsk" or "<M>qam", case-insensitive.
    pub fn parse(name: &str) -> Result<Self> {
        let n = name.trim().to_ascii_lowercase();
        let bad = || CoreError::Request(format!("unknown modulation '{name}'"));
        match n.as_str() {
            "ook" => Ok(Self::ook()),
            "bpsk" => Self::mpsk(2),
            "qpsk" => Self::mpsk(4),
            _ => {
                if let Some(m) = n.strip_suffix("psk") {
                    Self::mpsk(m.parse().map_err(|_| bad())?)
                } else if let Some(m) = n.strip_suffix("qam") {
                    Self::mqam(m.parse().map_err(|_| bad())?)
                } else {
                    Err(bad())
                }
            }
        }
    }

    pub fn n_b(&self) -> usize {
        self.q.len()
    }

    pub fn order(&self) -> u32 {
        self.detection.order()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct E2EParams {
    pub fso: FsoParams,
    pub rf: RfParams,
    pub relay_constant: f64,
    /// γ̄_F = γ̄_H, linear
    pub mean_h: f64,
    pub user: User,
}

impl E2EParams {
    pub fn new(fso: FsoParams, rf: RfParams, relay_constant: f64, mean_h: f64) -> Result<Self> {
        if !(relay_constant > 0.0) {
            return Err(CoreError::Config {
                field: "relay_constant".into(),
                message: format!("must be positive, got {relay_constant}"),
            });
        }
        if !(mean_h > 0.0) || !mean_h.is_finite() {
            return Err(CoreError::Request(format!("mean FSO SNR must be positive, got {mean_h}")));
        }
        let user = rf.user;
        Ok(E2EParams {
            fso,
            rf,
            relay_constant,
            mean_h,
            user,
        })
    }

    /// Validated config, one user, γ̄_H in dB.
    pub fn derive(cfg: &ScenarioConfig, user: User, mean_h_db: f64, policy: DiscriminantPolicy) -> Result<Self> {
        cfg.validate()?;
        let geom = derive_geometry(cfg)?;
        let fso = FsoParams::derive(cfg, &geom)?;
        let rf = RfParams::derive(cfg, &geom, user, policy)?;
        Self::new(fso, rf, cfg.relay_constant, db_to_linear(mean_h_db))
    }

    pub fn with_mean_h_db(&self, db: f64) -> Self {
        E2EParams {
            mean_h: db_to_linear(db),
            ..self.clone()
        }
    }

    pub fn with_order(&self, r: u32) -> Self {
        E2EParams {
            fso: self.fso.with_order(r),
            ..self.clone()
        }
    }

    pub fn r(&self) -> f64 {
        self.fso.r as f64
    }

    /// A^r γ̄_F
    fn x_scale(&self) -> f64 {
        self.fso.scale.powf(self.r()) * self.mean_h
    }

    /// C Ψ² / γ̄_R
    pub fn y_arg(&self) -> f64 {
        self.relay_constant * self.rf.psi * self.rf.psi / self.rf.mean_snr
    }

    fn ln_prefactor(&self) -> f64 {
        -self.fso.ln_gamma_ab() - self.rf.ln_gamma_km()
    }
}

/// Value of a contour-integral metric with its quadrature error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub nodes: usize,
}

/// Tolerances for the double integrals; the absolute floor keeps tail
/// probabilities formed as 1 - CCDF meaningful down to about 1e-10.
pub fn e2e_options() -> MbOptions {
    MbOptions {
        rel_tol: 1e-10,
        abs_tol: 1e-14,
        max_nodes: 200_000,
        ..MbOptions::default()
    }
}

/// Extra s-dependence layered on the CCDF kernel.
enum Transform {
    Ccdf,
    Pdf,
    /// ∫ γ^{p-1} e^{-qγ}: Γ(p - s)
    Ber(f64),
    /// ∫ c₀/(1 + c₀γ): Γ(s)Γ(1 - s)
    Capacity,
}

/// Γ(u) on Re u > 0, or on -1 < Re u < 0 as -Γ(1+u)Γ(-u)/Γ(1-u) with the
/// sign moved to the caller.
fn joint_kernel(shifted: bool) -> GammaFactors {
    if shifted {
        GammaFactors::new(
            vec![GammaTerm::new(1.0, 1.0), GammaTerm::new(0.0, -1.0)],
            vec![GammaTerm::new(1.0, -1.0)],
        )
    } else {
        GammaFactors::new(vec![GammaTerm::new(0.0, 1.0)], vec![])
    }
}

fn kernel_terms(p: &E2EParams, tr: &Transform, arg_x: f64, shifted: bool) -> Vec<(f64, BivariateFoxHSpec)> {
    let r = p.r();
    let f = &p.fso;
    let joint = joint_kernel(shifted);
    let y_terms = GammaFactors::new(
        vec![
            GammaTerm::new(0.0, -1.0),
            GammaTerm::new(p.rf.k, -1.0),
            GammaTerm::new(p.rf.m, -1.0),
        ],
        vec![],
    );
    let pref = p.ln_prefactor().exp();
    f.weights
        .iter()
        .enumerate()
        .filter(|(_, w)| **w != 0.0)
        .map(|(k, w)| {
            let n = 2 * k as u32 + 1;
            let mut numer = vec![
                GammaTerm::new(f.alpha, r),
                GammaTerm::new(f.beta, r),
                GammaTerm::pow(f.c, r, n),
            ];
            let mut denom = vec![GammaTerm::pow(f.c + 1.0, r, n)];
            match tr {
                Transform::Pdf => denom.push(GammaTerm::new(0.0, 1.0)),
                _ => denom.push(GammaTerm::new(1.0, 1.0)),
            }
            match tr {
                Transform::Ber(pb) => numer.push(GammaTerm::new(*pb, -1.0)),
                Transform::Capacity => {
                    numer.push(GammaTerm::new(0.0, 1.0));
                    numer.push(GammaTerm::new(1.0, -1.0));
                }
                _ => {}
            }
            (
                w * pref,
                BivariateFoxHSpec {
                    joint: joint.clone(),
                    x_terms: GammaFactors::new(numer, denom),
                    y_terms: y_terms.clone(),
                    arg_x,
                    arg_y: p.y_arg(),
                },
            )
        })
        .collect()
}

fn evaluate(p: &E2EParams, tr: Transform, arg_x: f64) -> Result<Estimate> {
    let terms = kernel_terms(p, &tr, arg_x, false);
    let ev = fox_h_bivariate_weighted(&terms, &e2e_options())?;
    Ok(Estimate {
        value: ev.value,
        error: ev.error_estimate,
        nodes: ev.contour.nodes,
    })
}

/// The left-tail form. Moving the s line across the pole of Γ(s + t) at
/// s = -t, then the t line of the resulting single integral across t = 0,
/// leaves
///   CDF   = I'(γ) + Σ_k w_k J_k(Y/X),  J_k with Γ(t)/Γ(1+t),
///   γ PDF = -I'(γ) + Σ_k w_k J_k(Y/X), J_k without it,
/// where I' has s + t in (-1, 0). Both pieces are small when the CDF is,
/// so there is no 1 - CCDF cancellation.
fn evaluate_left(p: &E2EParams, pdf: bool, arg_x: f64) -> Result<Estimate> {
    let tr = if pdf { Transform::Pdf } else { Transform::Ccdf };
    let terms = kernel_terms(p, &tr, arg_x, true);
    let ev = fox_h_bivariate_weighted(&terms, &e2e_options())?;
    let r = p.r();
    let f = &p.fso;
    let opts = e2e_options();
    let mut single = 0.0;
    let mut single_err = 0.0;
    let mut nodes = ev.contour.nodes;
    for (w, spec) in &terms {
        let n = spec.x_terms.numer[2].power;
        let mut numer = vec![
            GammaTerm::new(f.alpha, -r),
            GammaTerm::new(f.beta, -r),
            GammaTerm::pow(f.c, -r, n),
            GammaTerm::new(p.rf.k, -1.0),
            GammaTerm::new(p.rf.m, -1.0),
        ];
        let mut denom = vec![GammaTerm::pow(f.c + 1.0, -r, n)];
        if !pdf {
            numer.push(GammaTerm::new(0.0, 1.0));
            denom.push(GammaTerm::new(1.0, 1.0));
        }
        let j = mellin_barnes(&GammaFactors::new(numer, denom), p.y_arg() / arg_x, &opts)?;
        single += w * j.value;
        single_err += w * j.error_estimate;
        nodes += j.contour.nodes;
    }
    let sign = if pdf { -1.0 } else { 1.0 };
    Ok(Estimate {
        value: sign * ev.value + single,
        error: ev.error_estimate + single_err,
        nodes,
    })
}

/// Lower-tail values below this use the left-tail form as well.
const LEFT_TAIL: f64 = 1e-2;

/// Cheap guess of the CDF: the FSO marginal at the mean RF SNR.
fn in_left_tail(gamma: f64, p: &E2EParams) -> bool {
    let mean_r = p.rf.mean_snr * p.rf.m2;
    fso_snr_cdf(gamma * (1.0 + p.relay_constant / mean_r), p.mean_h, &p.fso)
        .map(|v| v < LEFT_TAIL)
        .unwrap_or(false)
}

/// Runs the preferred form first and falls back to the other when it fails
/// or misses the tolerance.
fn two_forms<A, B>(left_first: bool, standard: A, left: B, good: impl Fn(&Estimate) -> bool) -> Result<Estimate>
where
    A: Fn() -> Result<Estimate>,
    B: Fn() -> Result<Estimate>,
{
    let first = if left_first { left() } else { standard() };
    match &first {
        Ok(e) if good(e) => first,
        _ => better(first, if left_first { standard() } else { left() }),
    }
}

fn better(a: Result<Estimate>, b: Result<Estimate>) -> Result<Estimate> {
    match (a, b) {
        (Ok(x), Ok(y)) => Ok(if y.error < x.error { y } else { x }),
        (Ok(x), Err(_)) => Ok(x),
        (Err(_), Ok(y)) => Ok(y),
        (Err(e), Err(_)) => Err(e),
    }
}

const BAND: f64 = 1e-6;

fn check_band(what: &'static str, raw: f64) -> Result<f64> {
    if !(raw >= -BAND && raw <= 1.0 + BAND) {
        return Err(CoreError::OutOfBand { what, value: raw });
    }
    Ok(raw.clamp(0.0, 1.0))
}

/// P(γ > x) before clamping.
pub fn e2e_ccdf_raw(gamma: f64, p: &E2EParams) -> Result<Estimate> {
    evaluate(p, Transform::Ccdf, p.x_scale() / gamma)
}

pub fn e2e_cdf_detailed(gamma: f64, p: &E2EParams) -> Result<Estimate> {
    if gamma < 0.0 || gamma.is_nan() {
        return Err(CoreError::Request(format!("SNR must be non-negative, got {gamma}")));
    }
    if gamma == 0.0 {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            nodes: 0,
        });
    }
    if gamma.is_infinite() {
        return Ok(Estimate {
            value: 1.0,
            error: 0.0,
            nodes: 0,
        });
    }
    let arg_x = p.x_scale() / gamma;
    let left_first = in_left_tail(gamma, p);
    let est = two_forms(
        left_first,
        || {
            evaluate(p, Transform::Ccdf, arg_x).map(|e| Estimate {
                value: 1.0 - e.value,
                ..e
            })
        },
        || evaluate_left(p, false, arg_x),
        |e| {
            if left_first {
                e.value <= LEFT_TAIL && e.error <= 1e-6 * e.value.abs().max(1e-9)
            } else {
                e.value > LEFT_TAIL
            }
        },
    )?;
    Ok(Estimate {
        value: check_band("end-to-end CDF", est.value)?,
        ..est
    })
}

pub fn e2e_cdf(gamma: f64, p: &E2EParams) -> Result<f64> {
    Ok(e2e_cdf_detailed(gamma, p)?.value)
}

pub fn e2e_pdf(gamma: f64, p: &E2EParams) -> Result<f64> {
    if gamma < 0.0 || gamma.is_nan() {
        return Err(CoreError::Request(format!("SNR must be non-negative, got {gamma}")));
    }
    if gamma == 0.0 || gamma.is_infinite() {
        return Ok(0.0);
    }
    Ok(e2e_pdf_detailed(gamma, p)?.value)
}

/// Density with the error of the underlying integrals.
pub fn e2e_pdf_detailed(gamma: f64, p: &E2EParams) -> Result<Estimate> {
    if gamma <= 0.0 || !gamma.is_finite() {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            nodes: 0,
        });
    }
    let arg_x = p.x_scale() / gamma;
    let est = two_forms(
        in_left_tail(gamma, p),
        || evaluate(p, Transform::Pdf, arg_x),
        || evaluate_left(p, true, arg_x),
        |e| e.error <= 1e-6 * e.value.abs(),
    )?;
    Ok(Estimate {
        value: est.value.max(0.0) / gamma,
        error: est.error / gamma,
        nodes: est.nodes,
    })
}

pub fn outage_probability(gamma_th: f64, p: &E2EParams) -> Result<f64> {
    e2e_cdf(gamma_th, p)
}

/// E[(1 + C/γ_R)^v] = G^{3,1}_{1,3}[Y | 1+v; 0,k,m] / (Γ(-v) Γ(k) Γ(m)).
pub fn relay_factor(v: f64, p: &E2EParams) -> Result<f64> {
    if (v - v.round()).abs() < 1e-7 {
        // Γ(-v) and the G-function both blow up; the ratio is smooth
        let h = 1e-6;
        return Ok(0.5 * (relay_factor_at(v - h, p)? + relay_factor_at(v + h, p)?));
    }
    relay_factor_at(v, p)
}

fn relay_factor_at(v: f64, p: &E2EParams) -> Result<f64> {
    let g = meijer_g(3, 1, &[1.0 + v], &[0.0, p.rf.k, p.rf.m], p.y_arg(), &MbOptions::default())?;
    Ok(g.value / gamma(-v)? * (-p.rf.ln_gamma_km()).exp())
}

/// One residue term of the high-SNR CDF: coefficient · z^exponent with
/// z = (1/A)(γ/γ̄)^{1/r}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidueTerm {
    pub exponent: f64,
    pub coefficient: f64,
}

/// Leading residues at s = -α/r, -β/r and -c/r (first series term only for
/// the c pole).
pub fn asymptotic_terms(p: &E2EParams) -> Result<Vec<ResidueTerm>> {
    residue_terms(p, 0)
}

/// Residues of the CDF kernel left of the origin. The α and β families
/// contribute s = -(v + n)/r for n = 0..=extra, stopping short of the c
/// pole whose higher-order series terms are not expanded; the c pole keeps
/// its first series term. `extra = 0` is the three-term high-SNR form.
pub fn residue_terms(p: &E2EParams, extra: u32) -> Result<Vec<ResidueTerm>> {
    let f = &p.fso;
    let r = p.r();
    let e = (-f.ln_gamma_ab()).exp();
    let limit = p.rf.k.min(p.rf.m);
    let series = |v: f64| -> f64 {
        f.weights
            .iter()
            .enumerate()
            .map(|(k, w)| w * (f.c - v).powi(-(2 * k as i32 + 1)))
            .sum()
    };
    let mut out = Vec::new();
    for (v, other) in [(f.alpha, f.beta), (f.beta, f.alpha)] {
        let mut fact = 1.0;
        for n in 0..=extra {
            if n > 0 {
                fact *= n as f64;
            }
            let u = v + n as f64;
            if n > 0 && u > f.c - 0.5 {
                break;
            }
            if u / r >= limit {
                log::warn!("residue at s = -{} skipped: relay factor diverges", u / r);
                break;
            }
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let coef = sign / (fact * u) * gamma(other - u)? * series(u) * relay_factor(u / r, p)?;
            out.push(ResidueTerm {
                exponent: u,
                coefficient: coef * e,
            });
        }
    }
    if f.c / r < limit {
        let coef = relay_factor(f.c / r, p)? * gamma(f.alpha - f.c)? * gamma(f.beta - f.c)? * f.weights[0] / f.c;
        out.push(ResidueTerm {
            exponent: f.c,
            coefficient: coef * e,
        });
    }
    out.sort_by(|a, b| a.exponent.total_cmp(&b.exponent));
    Ok(out)
}

fn sum_terms(terms: &[ResidueTerm], ln_z: f64) -> f64 {
    terms.iter().map(|t| t.coefficient * (t.exponent * ln_z).exp()).sum()
}

/// ln of (1/A)(γ/γ̄)^{1/r}
fn ln_z(gamma: f64, p: &E2EParams) -> f64 {
    (gamma / p.mean_h).ln() / p.r() - p.fso.scale.ln()
}

pub fn e2e_cdf_asymptotic(gamma: f64, p: &E2EParams) -> Result<f64> {
    if gamma <= 0.0 {
        return Ok(0.0);
    }
    Ok(sum_terms(&asymptotic_terms(p)?, ln_z(gamma, p)))
}

/// High-SNR CDF with `extra` further residues of each Gamma-Gamma family.
pub fn e2e_cdf_residue_series(gamma: f64, p: &E2EParams, extra: u32) -> Result<f64> {
    if gamma <= 0.0 {
        return Ok(0.0);
    }
    Ok(sum_terms(&residue_terms(p, extra)?, ln_z(gamma, p)))
}

pub fn diversity_order(p: &E2EParams) -> f64 {
    p.fso.min_shape() / p.r()
}

fn check_scheme(scheme: &ModulationScheme, p: &E2EParams) -> Result<()> {
    if scheme.order() != p.fso.r {
        return Err(CoreError::Request(format!(
            "modulation {} needs detection order {}, link uses {}",
            scheme.name,
            scheme.order(),
            p.fso.r
        )));
    }
    Ok(())
}

/// δ Σ_m I_m with I_m = ∫ q^p/(2Γ(p)) γ^{p-1} e^{-qγ} F(γ) dγ.
pub fn avg_ber_detailed(scheme: &ModulationScheme, p: &E2EParams) -> Result<Estimate> {
    check_scheme(scheme, p)?;
    let lg = ln_gamma_real(scheme.p)?;
    let mut total = 0.0;
    let mut error = 0.0;
    let mut nodes = 0;
    for q in &scheme.q {
        let ev = evaluate(p, Transform::Ber(scheme.p), p.x_scale() * q)?;
        total += 0.5 - 0.5 * (-lg).exp() * ev.value;
        error += 0.5 * (-lg).exp() * ev.error;
        nodes += ev.nodes;
    }
    Ok(Estimate {
        value: (scheme.delta * total).max(0.0),
        error: scheme.delta * error,
        nodes,
    })
}

pub fn avg_ber(scheme: &ModulationScheme, p: &E2EParams) -> Result<f64> {
    Ok(avg_ber_detailed(scheme, p)?.value)
}

/// Residue terms integrated against the Gamma weight: each γ^{v/r} picks
/// up Γ(p + v/r) q^{-v/r} / Γ(p).
pub fn avg_ber_asymptotic(scheme: &ModulationScheme, p: &E2EParams) -> Result<f64> {
    check_scheme(scheme, p)?;
    let terms = asymptotic_terms(p)?;
    let r = p.r();
    let lg = ln_gamma_real(scheme.p)?;
    let mut total = 0.0;
    for q in &scheme.q {
        let lz = ln_z(1.0 / q, p);
        for t in &terms {
            let w = (ln_gamma_real(scheme.p + t.exponent / r)? - lg).exp();
            total += 0.5 * w * t.coefficient * (t.exponent * lz).exp();
        }
    }
    Ok(scheme.delta * total)
}

/// E[γⁿ] = γ̄ⁿ E[H^{rn}] E[(γ_R/(γ_R + C))ⁿ]; n need not be an integer.
pub fn snr_moment(n: f64, p: &E2EParams) -> Result<f64> {
    if !(n > 0.0) {
        return Err(CoreError::Request(format!("moment order must be positive, got {n}")));
    }
    let g = meijer_g(3, 1, &[1.0 - n], &[0.0, p.rf.k, p.rf.m], p.y_arg(), &MbOptions::default())?;
    let relay = g.value * (-ln_gamma_real(n)? - p.rf.ln_gamma_km()).exp();
    Ok(p.mean_h.powf(n) * p.fso.gain_moment(p.r() * n) * relay)
}

/// E[ln(1 + c₀γ)] in nats/s/Hz.
pub fn ergodic_capacity_detailed(p: &E2EParams, c0: f64) -> Result<Estimate> {
    if !(c0 > 0.0) {
        return Err(CoreError::Request(format!("capacity constant must be positive, got {c0}")));
    }
    evaluate(p, Transform::Capacity, p.x_scale() * c0)
}

pub fn ergodic_capacity(p: &E2EParams, c0: f64) -> Result<f64> {
    Ok(ergodic_capacity_detailed(p, c0)?.value)
}

/// Capacity constant of the detection order: 1 or e/(2π).
pub fn capacity_constant(p: &E2EParams) -> f64 {
    if p.fso.r == 1 {
        1.0
    } else {
        std::f64::consts::E / (2.0 * PI)
    }
}

/// Time-division alternative: the user gets the whole surface (ρ = 1) for
/// half the time.
pub fn tdm_baseline_capacity(p: &E2EParams) -> Result<f64> {
    let full = p.rf.mean_snr / (p.rf.rho * p.rf.rho);
    let q = E2EParams {
        rf: p.rf.with_mean_snr(full),
        ..p.clone()
    };
    Ok(0.5 * ergodic_capacity(&q, capacity_constant(&q))?)
}

pub mod oracle {
    //! Independent quadratures of the defining integrals, used to check the
    //! contour forms.

    use specfun::quad::integrate;

    use super::{e2e_cdf, e2e_pdf, E2EParams, ModulationScheme};
    use crate::error::Result;
    use crate::fso_link::{fso_snr_cdf, fso_snr_pdf};
    use crate::rf_link::RfParams;

    /// K_G density through the Bessel form 2 z^{(k+m)/2} K_{k-m}(2√z).
    pub fn kg_pdf(x: f64, p: &RfParams) -> f64 {
        let z = p.psi * p.psi * x / p.mean_snr;
        let kb = specfun::bessel_k(p.k - p.m, 2.0 * z.sqrt()).unwrap_or(0.0);
        if kb == 0.0 {
            return 0.0;
        }
        (std::f64::consts::LN_2 + 0.5 * (p.k + p.m) * z.ln() + kb.ln() - p.ln_gamma_km() - x.ln()).exp()
    }

    /// ∫ g(x) f_{γR}(x) dx over ln x around the RF mean.
    fn over_rf<G: Fn(f64) -> f64>(p: &E2EParams, g: G) -> Result<f64> {
        let x0 = p.rf.mean_snr * p.rf.m2;
        let spread = 1.0 / p.rf.k.min(p.rf.m).sqrt();
        let lo = -40.0 * spread.max(0.25);
        let hi = 12.0 * spread.max(0.25);
        let f = |u: f64| {
            let x = x0 * u.exp();
            let d = kg_pdf(x, &p.rf);
            if d == 0.0 {
                0.0
            } else {
                g(x) * d * x
            }
        };
        Ok(integrate(f, lo, hi, 1e-15, 1e-9)?.value)
    }

    /// F(γ) = ∫ F_{γF}(γ(1 + C/x)) f_{γR}(x) dx
    pub fn nested_cdf(gamma: f64, p: &E2EParams) -> Result<f64> {
        over_rf(p, |x| {
            fso_snr_cdf(gamma * (1.0 + p.relay_constant / x), p.mean_h, &p.fso).unwrap_or(f64::NAN)
        })
    }

    /// f(γ) = ∫ (1 + C/x) f_{γF}(γ(1 + C/x)) f_{γR}(x) dx
    pub fn nested_pdf(gamma: f64, p: &E2EParams) -> Result<f64> {
        over_rf(p, |x| {
            let a = 1.0 + p.relay_constant / x;
            a * fso_snr_pdf(gamma * a, p.mean_h, &p.fso).unwrap_or(f64::NAN)
        })
    }

    /// δ Σ_m ∫ q^p/(2Γ(p)) γ^{p-1} e^{-qγ} F(γ) dγ with γ = w^{1/p}.
    pub fn ber_quadrature(scheme: &ModulationScheme, p: &E2EParams) -> Result<f64> {
        let gp = specfun::gamma(scheme.p)?;
        let mut total = 0.0;
        for q in &scheme.q {
            // γ^{p-1} dγ = dw / p
            let wmax = (60.0 / q).powf(scheme.p);
            let f = |w: f64| {
                let g = w.powf(1.0 / scheme.p);
                let cdf = e2e_cdf(g, p).unwrap_or(f64::NAN);
                q.powf(scheme.p) / (2.0 * gp * scheme.p) * (-q * g).exp() * cdf
            };
            total += integrate(f, 0.0, wmax, 1e-14, 1e-7)?.value;
        }
        Ok(scheme.delta * total)
    }

    /// ∫ h(γ) f(γ) dγ over ln γ, for the capacity and moment checks.
    pub fn pdf_expectation<H: Fn(f64) -> f64>(p: &E2EParams, h: H) -> Result<f64> {
        let centre = (p.mean_h * p.fso.gain_moment(p.r())).ln();
        // the left tail falls like γ^D
        // and the contour forms lose accuracy once ln X passes about 11
        let lo = (centre - 37.0 / super::diversity_order(p)).max(p.x_scale().ln() - 11.0);
        let f = |u: f64| {
            let g = u.exp();
            h(g) * e2e_pdf(g, p).unwrap_or(f64::NAN) * g
        };
        Ok(integrate(f, lo, centre + 10.0, 1e-13, 1e-7)?.value)
    }

    pub fn capacity_quadrature(p: &E2EParams, c0: f64) -> Result<f64> {
        pdf_expectation(p, |g| (c0 * g).ln_1p())
    }

    pub fn moment_quadrature(n: f64, p: &E2EParams) -> Result<f64> {
        pdf_expectation(p, |g| g.powf(n))
    }
}
