//! Monte Carlo simulation of the link from its physical factors: pointing
//! loss by inverse transform of its density, the N_F-aperture turbulence
//! sum as actual Gamma-Gamma draws and the RF gain as the exact Nakagami
//! cascade. None of the closed-form approximations are used.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use specfun::{erfc, gamma_q};

use crate::e2e_metrics::{E2EParams, ModulationScheme};
use crate::error::{CoreError, Result};
use crate::fso_link::{gml_pdf, FsoParams, GmlParams};
use crate::rf_link::RfParams;
use crate::scenario::db_to_linear;

pub const MIN_SAMPLES: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Op,
    Ber,
    Capacity,
    Moments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationPlan {
    pub samples: u64,
    pub seed: u64,
    /// number of independent RNG streams (sample blocks) per grid point
    pub streams: u32,
    pub metric: Metric,
    /// γ̄_H values in dB
    pub grid_db: Vec<f64>,
}

impl SimulationPlan {
    pub fn validate(&self) -> Result<()> {
        if self.samples < MIN_SAMPLES {
            return Err(CoreError::Request(format!(
                "at least {MIN_SAMPLES} samples are needed, got {}",
                self.samples
            )));
        }
        if self.streams == 0 || self.streams as u64 > self.samples {
            return Err(CoreError::Request(format!("stream count {} is out of range", self.streams)));
        }
        if self.grid_db.is_empty() {
            return Err(CoreError::Request("empty grid".into()));
        }
        if let Some(v) = self.grid_db.iter().find(|v| !v.is_finite()) {
            return Err(CoreError::Request(format!("non-finite grid value {v}")));
        }
        Ok(())
    }
}

/// What each sample contributes for the chosen metric.
#[derive(Debug, Clone, PartialEq)]
pub enum Estimator {
    /// indicator γ < threshold
    Outage { threshold: f64 },
    /// δ Σ_m Q(p, q_m γ) / 2 with Q the regularized upper incomplete gamma
    Ber(ModulationScheme),
    /// ln(1 + c₀ γ)
    Capacity { c0: f64 },
    /// γⁿ
    Moment { order: f64 },
}

impl Estimator {
    pub fn metric(&self) -> Metric {
        match self {
            Estimator::Outage { .. } => Metric::Op,
            Estimator::Ber(_) => Metric::Ber,
            Estimator::Capacity { .. } => Metric::Capacity,
            Estimator::Moment { .. } => Metric::Moments,
        }
    }

    pub fn value(&self, gamma: f64) -> f64 {
        match self {
            Estimator::Outage { threshold } => {
                if gamma < *threshold {
                    1.0
                } else {
                    0.0
                }
            }
            Estimator::Ber(s) => {
                let mut sum = 0.0;
                for q in &s.q {
                    let x = q * gamma;
                    sum += if s.p == 0.5 {
                        erfc(x.sqrt())
                    } else {
                        gamma_q(s.p, x).unwrap_or(f64::NAN)
                    };
                }
                0.5 * s.delta * sum
            }
            Estimator::Capacity { c0 } => (c0 * gamma).ln_1p(),
            Estimator::Moment { order } => gamma.powf(*order),
        }
    }
}

/// Unit-mean Gamma-Gamma irradiance: product of Gamma(α̃, 1/α̃) and
/// Gamma(β̃, 1/β̃) draws.
pub fn sample_gg<R: Rng + ?Sized>(alpha_t: f64, beta_t: f64, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    let gg = GgSampler::new(alpha_t, beta_t)?;
    Ok((0..n).map(|_| gg.draw(rng)).collect())
}

struct GgSampler {
    x: Gamma<f64>,
    y: Gamma<f64>,
}

impl GgSampler {
    fn new(alpha_t: f64, beta_t: f64) -> Result<Self> {
        let bad = |v: f64| CoreError::NonPositiveShape(v);
        Ok(GgSampler {
            x: Gamma::new(alpha_t, 1.0 / alpha_t).map_err(|_| bad(alpha_t))?,
            y: Gamma::new(beta_t, 1.0 / beta_t).map_err(|_| bad(beta_t))?,
        })
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.x.sample(rng) * self.y.sample(rng)
    }
}

/// Inverse CDF of the pointing loss, tabulated in L = ln(A₀/h), which is
/// log-spaced in h.
#[derive(Debug, Clone)]
pub struct GmlTable {
    a0: f64,
    l: Vec<f64>,
    cdf: Vec<f64>,
}

pub const GML_NODES: usize = 4096;

impl GmlTable {
    pub fn new(g: &GmlParams) -> Result<Self> {
        let (c, d) = (g.c(), g.d());
        if !(c > d && d >= 0.0 && g.a0 > 0.0) {
            return Err(CoreError::Tabulation(format!("invalid shape c = {c}, d = {d}")));
        }
        // the density in L falls like e^{-(c-d)L}
        let l_max = 45.0 / (c - d);
        let step = l_max / (GML_NODES - 1) as f64;
        let dens = |l: f64| gml_pdf(g.a0 * (-l).exp(), g) * g.a0 * (-l).exp();
        let (x, w) = specfun::quad::gauss_legendre(8);
        let mut cdf = Vec::with_capacity(GML_NODES);
        let mut acc = 0.0;
        cdf.push(0.0);
        for i in 1..GML_NODES {
            let (a, b) = ((i - 1) as f64 * step, i as f64 * step);
            let mut part = 0.0;
            for (xi, wi) in x.iter().zip(&w) {
                part += wi * dens(0.5 * (a + b) + 0.5 * (b - a) * xi);
            }
            acc += 0.5 * (b - a) * part;
            if !acc.is_finite() {
                return Err(CoreError::Tabulation(format!("density is not finite near L = {b}")));
            }
            cdf.push(acc);
        }
        if !(acc > 0.0) {
            return Err(CoreError::Tabulation("density integrates to zero".into()));
        }
        for v in &mut cdf {
            *v /= acc;
        }
        Ok(GmlTable {
            a0: g.a0,
            l: (0..GML_NODES).map(|i| i as f64 * step).collect(),
            cdf,
        })
    }

    /// h for a uniform u in [0, 1): piecewise-linear inverse of the
    /// tabulated CDF, monotone by construction.
    pub fn invert(&self, u: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c <= u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
        let l = self.l[i - 1] + t * (self.l[i] - self.l[i - 1]);
        self.a0 * (-l).exp()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.invert(rng.gen::<f64>())
    }
}

pub fn sample_gml<R: Rng + ?Sized>(p: &FsoParams, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    let t = GmlTable::new(&p.gml)?;
    Ok((0..n).map(|_| t.draw(rng)).collect())
}

struct RfSampler {
    a: Gamma<f64>,
    b: Gamma<f64>,
    n: u32,
}

impl RfSampler {
    fn new(p: &RfParams) -> Result<Self> {
        let bad = |v: f64| CoreError::NonPositiveShape(v);
        Ok(RfSampler {
            a: Gamma::new(p.m_a, p.omega_a / p.m_a).map_err(|_| bad(p.m_a))?,
            b: Gamma::new(p.m_l, p.omega_l / p.m_l).map_err(|_| bad(p.m_l))?,
            n: p.n_r,
        })
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        (0..self.n)
            .map(|_| (self.a.sample(rng) * self.b.sample(rng)).sqrt())
            .sum()
    }
}

/// R = Σ_i a_i b_i with Nakagami amplitudes a_i, b_i.
pub fn sample_rf_gain<R: Rng + ?Sized>(p: &RfParams, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    let s = RfSampler::new(p)?;
    Ok((0..n).map(|_| s.draw(rng)).collect())
}

/// Draws of the optical gain H = h_p h_g Σ h̃_a and of R².
pub struct ChannelSampler {
    h_p: f64,
    n_f: u32,
    gml: GmlTable,
    gg: GgSampler,
    rf: RfSampler,
}

impl ChannelSampler {
    pub fn new(p: &E2EParams) -> Result<Self> {
        Ok(ChannelSampler {
            h_p: p.fso.h_p,
            n_f: p.fso.n_f,
            gml: GmlTable::new(&p.fso.gml)?,
            gg: GgSampler::new(p.fso.alpha_t, p.fso.beta_t)?,
            rf: RfSampler::new(&p.rf)?,
        })
    }

    /// (H, R²)
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let hg = self.gml.draw(rng);
        let ha: f64 = (0..self.n_f).map(|_| self.gg.draw(rng)).sum();
        let r = self.rf.draw(rng);
        (self.h_p * hg * ha, r * r)
    }
}

/// γ = γ_F γ_R / (γ_R + C)
pub fn combine(gamma_f: f64, gamma_r: f64, c: f64) -> f64 {
    gamma_f * gamma_r / (gamma_r + c)
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// ChaCha stream for one block of one grid point; the key depends on
/// (seed, grid index) and the stream id on the block, so results do not
/// depend on scheduling.
pub fn block_rng(seed: u64, grid_index: usize, block: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(grid_index as u64 + 1)));
    rng.set_stream(block as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McPoint {
    pub gamma_h_db: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub samples: u64,
    /// set when fewer than 100 outage events were seen
    pub undersampled: bool,
}

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    s1: f64,
    s2: f64,
    n: u64,
}

fn block_sizes(plan: &SimulationPlan) -> Vec<u64> {
    let k = plan.streams as u64;
    let base = plan.samples / k;
    let extra = plan.samples % k;
    (0..k).map(|i| base + u64::from(i < extra)).collect()
}

/// Estimates the metric at every grid point with its standard error.
pub fn simulate_metric(plan: &SimulationPlan, p: &E2EParams, est: &Estimator) -> Result<Vec<McPoint>> {
    plan.validate()?;
    if est.metric() != plan.metric {
        return Err(CoreError::Request(format!(
            "plan asks for {:?} but the estimator computes {:?}",
            plan.metric,
            est.metric()
        )));
    }
    if let Estimator::Ber(s) = est {
        if s.order() != p.fso.r {
            return Err(CoreError::Request(format!(
                "modulation {} needs detection order {}",
                s.name,
                s.order()
            )));
        }
    }
    let sampler = ChannelSampler::new(p)?;
    let sizes = block_sizes(plan);
    let r = p.fso.r as i32;
    let c = p.relay_constant;
    let mean_r = p.rf.mean_snr;
    let jobs: Vec<(usize, u32)> = (0..plan.grid_db.len())
        .flat_map(|g| (0..plan.streams).map(move |b| (g, b)))
        .collect();
    let sums: Vec<Sums> = jobs
        .par_iter()
        .map(|&(g, b)| {
            let mean_h = db_to_linear(plan.grid_db[g]);
            let mut rng = block_rng(plan.seed, g, b);
            let mut acc = Sums::default();
            for _ in 0..sizes[b as usize] {
                let (h, r2) = sampler.draw(&mut rng);
                let v = est.value(combine(mean_h * h.powi(r), mean_r * r2, c));
                acc.s1 += v;
                acc.s2 += v * v;
                acc.n += 1;
            }
            acc
        })
        .collect();
    let mut out = Vec::with_capacity(plan.grid_db.len());
    for (g, chunk) in sums.chunks(plan.streams as usize).enumerate() {
        let tot = chunk.iter().fold(Sums::default(), |a, b| Sums {
            s1: a.s1 + b.s1,
            s2: a.s2 + b.s2,
            n: a.n + b.n,
        });
        let n = tot.n as f64;
        let mean = tot.s1 / n;
        let var = ((tot.s2 - n * mean * mean) / (n - 1.0)).max(0.0);
        let undersampled = matches!(est, Estimator::Outage { .. }) && mean * n < 100.0;
        if undersampled {
            log::warn!(
                "{} dB: only {} outage events in {} samples; the estimate is unreliable",
                plan.grid_db[g],
                tot.s1,
                tot.n
            );
        }
        out.push(McPoint {
            gamma_h_db: plan.grid_db[g],
            estimate: mean,
            stderr: (var / n).sqrt(),
            samples: tot.n,
            undersampled,
        });
    }
    Ok(out)
}
