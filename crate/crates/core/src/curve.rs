//! Sweeps over γ̄_H: one row per grid point with the exact, asymptotic and
//! Monte Carlo values of a metric. Evaluator failures are recorded in the
//! row instead of aborting the sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::e2e_metrics::{
    avg_ber_asymptotic, avg_ber_detailed, e2e_cdf_asymptotic, e2e_cdf_detailed, ergodic_capacity_detailed, snr_moment,
    E2EParams, ModulationScheme,
};
use crate::error::{CoreError, Result};
use crate::monte_carlo::{simulate_metric, Estimator, Metric, SimulationPlan};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricSpec {
    Op { threshold: f64 },
    Ber { scheme: ModulationScheme },
    Capacity { c0: f64 },
    Moment { order: f64 },
}

impl MetricSpec {
    pub fn metric(&self) -> Metric {
        self.estimator().metric()
    }

    pub fn estimator(&self) -> Estimator {
        match self {
            MetricSpec::Op { threshold } => Estimator::Outage { threshold: *threshold },
            MetricSpec::Ber { scheme } => Estimator::Ber(scheme.clone()),
            MetricSpec::Capacity { c0 } => Estimator::Capacity { c0: *c0 },
            MetricSpec::Moment { order } => Estimator::Moment { order: *order },
        }
    }

    pub fn unit(&self) -> &'static str {
        match self {
            MetricSpec::Op { .. } | MetricSpec::Ber { .. } => "probability",
            MetricSpec::Capacity { .. } => "nats/s/Hz",
            MetricSpec::Moment { .. } => "snr^n",
        }
    }

    fn has_asymptote(&self) -> bool {
        matches!(self, MetricSpec::Op { .. } | MetricSpec::Ber { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McSettings {
    pub samples: u64,
    pub seed: u64,
    pub streams: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluators {
    pub exact: bool,
    pub asymptotic: bool,
    pub mc: Option<McSettings>,
}

impl Evaluators {
    pub fn any(&self) -> bool {
        self.exact || self.asymptotic || self.mc.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    /// at least one evaluator failed or flagged its value
    Partial,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub gamma_h_db: f64,
    pub exact: Option<f64>,
    pub asymptotic: Option<f64>,
    pub mc_estimate: Option<f64>,
    pub mc_stderr: Option<f64>,
    pub status: RowStatus,
    /// `key=value` pairs separated by `;`
    pub metadata: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCurve {
    pub schema_version: u32,
    pub metric: MetricSpec,
    pub user: String,
    pub detection_order: u32,
    pub unit: String,
    pub rows: Vec<MetricRow>,
}

/// Grid `start:stop:step` in dB, stop included when it lies on the grid.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || CoreError::Request(format!("grid must be start:stop:step in dB, got {text:?}"));
    let parts: Vec<f64> = text
        .split(':')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    grid(start, stop, step)
}

pub fn grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 {
        return Err(CoreError::Request(format!("invalid grid {start}:{stop}:{step}")));
    }
    if stop < start {
        return Err(CoreError::Request(format!("empty grid {start}:{stop}:{step}")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

fn exact_value(spec: &MetricSpec, p: &E2EParams) -> Result<(f64, String)> {
    match spec {
        MetricSpec::Op { threshold } => {
            let e = e2e_cdf_detailed(*threshold, p)?;
            Ok((e.value, format!("exact_err={:e};exact_nodes={}", e.error, e.nodes)))
        }
        MetricSpec::Ber { scheme } => {
            let e = avg_ber_detailed(scheme, p)?;
            Ok((e.value, format!("exact_err={:e};exact_nodes={}", e.error, e.nodes)))
        }
        MetricSpec::Capacity { c0 } => {
            let e = ergodic_capacity_detailed(p, *c0)?;
            Ok((e.value, format!("exact_err={:e};exact_nodes={}", e.error, e.nodes)))
        }
        MetricSpec::Moment { order } => Ok((snr_moment(*order, p)?, String::new())),
    }
}

fn asymptotic_value(spec: &MetricSpec, p: &E2EParams) -> Result<f64> {
    match spec {
        MetricSpec::Op { threshold } => e2e_cdf_asymptotic(*threshold, p),
        MetricSpec::Ber { scheme } => avg_ber_asymptotic(scheme, p),
        _ => Err(CoreError::Request("no asymptotic form for this metric".into())),
    }
}

/// Evaluates the requested forms on every grid point of `base` (whose own
/// γ̄_H is ignored). Rows come back in grid order.
pub fn run_sweep(spec: &MetricSpec, base: &E2EParams, grid_db: &[f64], ev: &Evaluators) -> Result<MetricCurve> {
    if grid_db.is_empty() {
        return Err(CoreError::Request("empty grid".into()));
    }
    if !ev.any() {
        return Err(CoreError::Request("no evaluator selected".into()));
    }
    if let MetricSpec::Ber { scheme } = spec {
        if scheme.order() != base.fso.r {
            return Err(CoreError::Request(format!(
                "modulation {} needs detection order {}, link uses {}",
                scheme.name,
                scheme.order(),
                base.fso.r
            )));
        }
    }
    let mc = match ev.mc {
        Some(s) => {
            let plan = SimulationPlan {
                samples: s.samples,
                seed: s.seed,
                streams: s.streams,
                metric: spec.metric(),
                grid_db: grid_db.to_vec(),
            };
            Some(simulate_metric(&plan, base, &spec.estimator())?)
        }
        None => None,
    };
    let rows = grid_db
        .par_iter()
        .enumerate()
        .map(|(i, &db)| {
            let p = base.with_mean_h_db(db);
            let mut meta = Vec::new();
            let mut failures = 0;
            let mut attempted = 0;
            let exact = if ev.exact {
                attempted += 1;
                match exact_value(spec, &p) {
                    Ok((v, m)) => {
                        if !m.is_empty() {
                            meta.push(m);
                        }
                        Some(v)
                    }
                    Err(e) => {
                        failures += 1;
                        meta.push(format!("exact_error={}", sanitize(&e.to_string())));
                        None
                    }
                }
            } else {
                None
            };
            let asymptotic = if ev.asymptotic && spec.has_asymptote() {
                attempted += 1;
                match asymptotic_value(spec, &p) {
                    Ok(v) => {
                        // the leading residues alone can leave [0, 1] well
                        // below the high-SNR regime
                        if !(0.0..=1.0).contains(&v) {
                            failures += 1;
                            meta.push("asymptotic_warning=outside_unit_interval".into());
                        }
                        Some(v)
                    }
                    Err(e) => {
                        failures += 1;
                        meta.push(format!("asymptotic_error={}", sanitize(&e.to_string())));
                        None
                    }
                }
            } else {
                None
            };
            let (mc_estimate, mc_stderr) = match &mc {
                Some(points) => {
                    attempted += 1;
                    let pt = points[i];
                    meta.push(format!("mc_samples={}", pt.samples));
                    if pt.undersampled {
                        failures += 1;
                        meta.push("mc_warning=undersampled_tail".into());
                    }
                    (Some(pt.estimate), Some(pt.stderr))
                }
                None => (None, None),
            };
            let status = if failures == 0 {
                RowStatus::Ok
            } else if failures < attempted {
                RowStatus::Partial
            } else {
                RowStatus::Failed
            };
            MetricRow {
                gamma_h_db: db,
                exact,
                asymptotic,
                mc_estimate,
                mc_stderr,
                status,
                metadata: meta.join(";"),
            }
        })
        .collect();
    Ok(MetricCurve {
        schema_version: SCHEMA_VERSION,
        metric: spec.clone(),
        user: base.user.to_string(),
        detection_order: base.fso.r,
        unit: spec.unit().to_string(),
        rows,
    })
}

fn sanitize(s: &str) -> String {
    s.replace([';', ',', '\n', '"'], " ")
}
