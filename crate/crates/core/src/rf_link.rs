//! RF hop through the STAR surface: cascaded Nakagami products, the
//! moment-matched generalized-K approximation of their sum and the SNR law.

use serde::{Deserialize, Serialize};

use specfun::{ln_gamma_real, meijer_g, norm_cdf};

use crate::error::{CoreError, Result};
use crate::fso_link::tail_options;
use crate::scenario::{rf_mean_snr, LinkGeometry, RfBudget, ScenarioConfig, User};

/// E[R̃ⁿ] of one product of Nakagami amplitudes.
pub fn product_moment(m_a: f64, m_l: f64, psi_t: f64, n: u32) -> f64 {
    let h = 0.5 * n as f64;
    let lg = ln_gamma_real(m_a + h).unwrap() + ln_gamma_real(m_l + h).unwrap()
        - ln_gamma_real(m_a).unwrap()
        - ln_gamma_real(m_l).unwrap();
    (lg - n as f64 * psi_t.ln()).exp()
}

/// E[Rⁿ], n = 0..=max_n, for the sum of `n_r` i.i.d. products, by the
/// binomial recurrence over elements.
pub fn sum_moments(m_a: f64, m_l: f64, psi_t: f64, n_r: u32, max_n: u32) -> Vec<f64> {
    let single: Vec<f64> = (0..=max_n).map(|n| product_moment(m_a, m_l, psi_t, n)).collect();
    let mut acc = single.clone();
    for _ in 1..n_r {
        acc = (0..=max_n as usize)
            .map(|n| {
                let mut binom = 1.0;
                let mut s = 0.0;
                for j in 0..=n {
                    s += binom * acc[n - j] * single[j];
                    binom = binom * (n - j) as f64 / (j + 1) as f64;
                }
                s
            })
            .collect();
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscriminantPolicy {
    /// Fail when the quadratic has complex roots.
    Reject,
    /// Use the common modulus √(𝒞/𝒜) of the complex pair for both shapes.
    ComplexModulus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitBranch {
    Real,
    ComplexModulus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KgFit {
    pub k: f64,
    pub m: f64,
    pub psi: f64,
    pub discriminant: f64,
    pub branch: FitBranch,
}

/// Generalized-K shapes (k ≥ m) and scale matching E[R²], E[R⁴], E[R⁶].
pub fn moment_match(m2: f64, m4: f64, m6: f64, policy: DiscriminantPolicy) -> Result<KgFit> {
    let a = m6 * m2 + m2 * m2 * m4 - 2.0 * m4 * m4;
    let b = m6 * m2 - 4.0 * m4 * m4 + 3.0 * m2 * m2 * m4;
    let c = 2.0 * m2 * m2 * m4;
    let disc = b * b - 4.0 * a * c;
    let (k, m, branch) = if disc >= 0.0 {
        // stable quadratic roots
        let qv = -0.5 * (b + b.signum() * disc.sqrt());
        let r1 = (qv / a).abs();
        let r2 = (c / qv).abs();
        (r1.max(r2), r1.min(r2), FitBranch::Real)
    } else {
        match policy {
            DiscriminantPolicy::Reject => {
                return Err(CoreError::NegativeDiscriminant {
                    discriminant: disc,
                    m2,
                    m4,
                    m6,
                })
            }
            DiscriminantPolicy::ComplexModulus => {
                let r = (c / a).sqrt();
                (r, r, FitBranch::ComplexModulus)
            }
        }
    };
    Ok(KgFit {
        k,
        m,
        psi: (k * m / m2).sqrt(),
        discriminant: disc,
        branch,
    })
}

/// E[Rⁿ] of a generalized-K amplitude with shapes k, m and scale Ψ.
pub fn kg_moment(k: f64, m: f64, psi: f64, n: u32) -> f64 {
    product_moment(k, m, psi, n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfParams {
    pub user: User,
    pub m_a: f64,
    pub m_l: f64,
    pub omega_a: f64,
    pub omega_l: f64,
    pub psi_t: f64,
    pub n_r: u32,
    /// E[R], E[R²], E[R⁴], E[R⁶] of the exact sum
    pub m1: f64,
    pub m2: f64,
    pub m4: f64,
    pub m6: f64,
    pub k: f64,
    pub m: f64,
    pub psi: f64,
    pub branch: FitBranch,
    pub discriminant: f64,
    pub mean_snr: f64,
    pub rho: f64,
    pub budget: RfBudget,
}

impl RfParams {
    pub fn derive(cfg: &ScenarioConfig, geom: &LinkGeometry, user: User, policy: DiscriminantPolicy) -> Result<Self> {
        let budget = rf_mean_snr(cfg, geom, user);
        Self::build(
            user,
            cfg.m_es_star,
            cfg.m_user(user),
            cfg.omega_es_star,
            cfg.omega_user(user),
            cfg.n_ris,
            budget,
            cfg.rho(user),
            policy,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn build(
        user: User,
        m_a: f64,
        m_l: f64,
        omega_a: f64,
        omega_l: f64,
        n_r: u32,
        budget: RfBudget,
        rho: f64,
        policy: DiscriminantPolicy,
    ) -> Result<Self> {
        let psi_t = (m_a * m_l / (omega_a * omega_l)).sqrt();
        let mom = sum_moments(m_a, m_l, psi_t, n_r, 6);
        let fit = moment_match(mom[2], mom[4], mom[6], policy)?;
        if fit.branch == FitBranch::ComplexModulus {
            log::warn!(
                "user {user}: moment matching has complex roots (discriminant {:.3e}); using k = m = {:.4}",
                fit.discriminant,
                fit.k
            );
        }
        Ok(RfParams {
            user,
            m_a,
            m_l,
            omega_a,
            omega_l,
            psi_t,
            n_r,
            m1: mom[1],
            m2: mom[2],
            m4: mom[4],
            m6: mom[6],
            k: fit.k,
            m: fit.m,
            psi: fit.psi,
            branch: fit.branch,
            discriminant: fit.discriminant,
            mean_snr: budget.mean_snr,
            rho,
            budget,
        })
    }

    /// Same channel with a different mean SNR.
    pub fn with_mean_snr(&self, mean_snr: f64) -> Self {
        RfParams {
            mean_snr,
            ..self.clone()
        }
    }

    pub fn ln_gamma_km(&self) -> f64 {
        ln_gamma_real(self.k).unwrap() + ln_gamma_real(self.m).unwrap()
    }
}

pub fn rf_snr_pdf(gamma: f64, p: &RfParams) -> Result<f64> {
    if gamma <= 0.0 {
        return Ok(0.0);
    }
    let z = p.psi * p.psi * gamma / p.mean_snr;
    let g = meijer_g(2, 0, &[], &[p.k, p.m], z, &tail_options(p.ln_gamma_km()))?;
    Ok(g.value * (-p.ln_gamma_km()).exp() / gamma)
}

pub fn rf_snr_cdf(gamma: f64, p: &RfParams) -> Result<f64> {
    if gamma <= 0.0 {
        return Ok(0.0);
    }
    let z = p.psi * p.psi * gamma / p.mean_snr;
    let g = meijer_g(2, 1, &[1.0], &[p.k, p.m, 0.0], z, &tail_options(p.ln_gamma_km()))?;
    Ok((g.value * (-p.ln_gamma_km()).exp()).clamp(0.0, 1.0))
}

/// Gaussian approximation of R with the exact mean and variance.
pub fn clt_baseline_cdf(gamma: f64, p: &RfParams) -> f64 {
    if gamma <= 0.0 {
        return 0.0;
    }
    let mu = p.m1;
    let sd = (p.m2 - p.m1 * p.m1).sqrt();
    let x = (gamma / p.mean_snr).sqrt();
    (norm_cdf((x - mu) / sd) - norm_cdf((-x - mu) / sd)).clamp(0.0, 1.0)
}
