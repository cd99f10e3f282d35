//! Bivariate Fox-H functions as double Mellin-Barnes integrals
//!
//! H = (1/(2πi)^2) ∫∫ J(s + t) X(s) Y(t) x^s y^t ds dt
//!
//! with J, X, Y gamma-ratio kernels. Both lines are discretised with the
//! same trapezoid step, so J is only needed on the one-dimensional lattice
//! of node sums.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::contour::{golden_min, inner_range, max_margin, outer_range, BivariateContour, QuadratureRule, Strip};
use crate::error::{Result, SpecfunError};
use crate::kernel::GammaFactors;
use crate::mellin::{MbOptions, TAIL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BivariateFoxHSpec {
    /// kernel in s + t
    pub joint: GammaFactors,
    /// kernel in s
    pub x_terms: GammaFactors,
    /// kernel in t
    pub y_terms: GammaFactors,
    pub arg_x: f64,
    pub arg_y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BivariateEvaluation {
    pub value: f64,
    pub error_estimate: f64,
    pub contour: BivariateContour,
}

pub fn fox_h_bivariate(spec: &BivariateFoxHSpec, opts: &MbOptions) -> Result<BivariateEvaluation> {
    fox_h_bivariate_weighted(&[(1.0, spec.clone())], opts)
}

/// ln of Σ_k w_k exp(l_k), with a complex result.
fn ln_weighted(ws: &[f64], ls: &[Complex64]) -> Complex64 {
    let m = ls.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Complex64::new(f64::NEG_INFINITY, 0.0);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (w, l) in ws.iter().zip(ls) {
        acc += *w * (*l - m).exp();
    }
    acc.ln() + m
}

struct Layout {
    weights: Vec<f64>,
    xs: Vec<GammaFactors>,
    joint: GammaFactors,
    y: GammaFactors,
    lnx: f64,
    lny: f64,
}

impl Layout {
    fn ln_a(&self, s: Complex64) -> Complex64 {
        let ls: Vec<Complex64> = self.xs.iter().map(|x| x.ln_eval(s) + s * self.lnx).collect();
        ln_weighted(&self.weights, &ls)
    }
    fn ln_b(&self, t: Complex64) -> Complex64 {
        self.y.ln_eval(t) + t * self.lny
    }
    fn ln_j(&self, u: Complex64) -> Complex64 {
        self.joint.ln_eval(u)
    }
    fn ln_k(&self, s: Complex64, t: Complex64) -> Complex64 {
        self.ln_a(s) + self.ln_b(t) + self.ln_j(s + t)
    }
}

/// Σ_k w_k H_k over specs that share the joint and y kernels and both
/// arguments; the shared factors are evaluated once.
pub fn fox_h_bivariate_weighted(
    terms: &[(f64, BivariateFoxHSpec)],
    opts: &MbOptions,
) -> Result<BivariateEvaluation> {
    let first = &terms
        .first()
        .ok_or_else(|| SpecfunError::InvalidParameters("empty term list".into()))?
        .1;
    for (_, s) in terms {
        if s.joint != first.joint || s.y_terms != first.y_terms || s.arg_x != first.arg_x || s.arg_y != first.arg_y {
            return Err(SpecfunError::InvalidParameters(
                "weighted terms must share joint kernel, y kernel and arguments".into(),
            ));
        }
    }
    for (what, v) in [("arg_x", first.arg_x), ("arg_y", first.arg_y)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(SpecfunError::Domain { what, value: v });
        }
    }
    let lay = Layout {
        weights: terms.iter().map(|t| t.0).collect(),
        xs: terms.iter().map(|t| t.1.x_terms.canonicalize()).collect(),
        joint: first.joint.canonicalize(),
        y: first.y_terms.canonicalize(),
        lnx: first.arg_x.ln(),
        lny: first.arg_y.ln(),
    };

    let rx = lay.xs.iter().map(|x| x.decay_rate()).fold(f64::INFINITY, f64::min);
    let ry = lay.y.decay_rate();
    let rj = lay.joint.decay_rate();
    if rx + rj <= 0.0 || ry + rj <= 0.0 || rx + ry <= 0.0 {
        return Err(SpecfunError::ContourPlanning(
            "kernel does not decay in every direction".into(),
        ));
    }

    let ss = lay.xs.iter().fold(Strip::ALL, |acc, x| acc.intersect(&Strip::of(x)));
    let ts = Strip::of(&lay.y);
    let js = Strip::of(&lay.joint);
    let m_star = max_margin(&ss, &ts, &js);
    if !(m_star > 0.005) {
        return Err(SpecfunError::ContourPlanning(format!(
            "no common strip for the two contours (margin {m_star})"
        )));
    }
    let kappa = (0.5 * m_star).min(0.3);

    // saddle of |K| on the real plane within the κ-shrunk region
    let f_inner = |cs: f64, ct: f64| lay.ln_k(Complex64::new(cs, 0.0), Complex64::new(ct, 0.0)).re;
    let best_ct = |cs: f64| {
        let (lo, hi) = inner_range(cs, &ts, &js, kappa).window(40.0);
        golden_min(|ct| f_inner(cs, ct), lo, hi, 1e-5 * (1.0 + hi - lo))
    };
    let (olo, ohi) = outer_range(&ss, &ts, &js, kappa).window(40.0);
    let cs = golden_min(|cs| f_inner(cs, best_ct(cs)), olo, ohi, 1e-5 * (1.0 + ohi - olo));
    let ct = best_ct(cs);
    let margin = [cs - ss.lo, ss.hi - cs, ct - ts.lo, ts.hi - ct, cs + ct - js.lo, js.hi - cs - ct]
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if !f_inner(cs, ct).is_finite() || !(margin > 0.0) {
        return Err(SpecfunError::ContourPlanning(format!(
            "saddle search left the admissible region at ({cs}, {ct})"
        )));
    }
    let dist = margin.min(1.0);

    let scan = |dir: (f64, f64)| -> Result<f64> {
        let mut peak = f64::NEG_INFINITY;
        let mut y = 0.0;
        let mut below = 0;
        while y < 2000.0 {
            let m = lay
                .ln_k(Complex64::new(cs, dir.0 * y), Complex64::new(ct, dir.1 * y))
                .re;
            if m.is_finite() {
                peak = peak.max(m);
                if m < peak - TAIL {
                    below += 1;
                    if below >= 4 {
                        return Ok(y);
                    }
                } else {
                    below = 0;
                }
            }
            y += 0.25;
        }
        Err(SpecfunError::ContourPlanning(
            "integrand does not decay along a contour axis".into(),
        ))
    };
    let mut t1 = scan((1.0, 0.0))?;
    let mut t2 = scan((0.0, 1.0))?;

    let omega = lay.lnx.abs().max(lay.lny.abs());
    let mut h = (4.0 * 2.0 * PI * dist / (TAIL + omega * dist)).min(0.5);
    let max_nodes = opts.max_nodes.max(1) * 100;
    let mut refine = opts.refine;

    loop {
        let n1 = (t1 / h).ceil() as usize;
        let n2 = (t2 / h).ceil() as usize;
        let nodes = (n1 + 1) * (2 * n2 + 1);
        if nodes > max_nodes {
            return Err(SpecfunError::NonConvergence {
                value: f64::NAN,
                error_estimate: f64::NAN,
                tolerance: opts.rel_tol,
            });
        }
        let la: Vec<Complex64> = (0..=n1).map(|i| lay.ln_a(Complex64::new(cs, i as f64 * h))).collect();
        let lb: Vec<Complex64> = (0..=2 * n2)
            .map(|j| lay.ln_b(Complex64::new(ct, (j as f64 - n2 as f64) * h)))
            .collect();
        // index k holds J at imaginary part (k - n2) h
        let lj: Vec<Complex64> = (0..=n1 + 2 * n2)
            .map(|k| lay.ln_j(Complex64::new(cs + ct, (k as f64 - n2 as f64) * h)))
            .collect();
        let norm = |v: &[Complex64]| -> (f64, Vec<Complex64>) {
            let m = v.iter().map(|z| z.re).filter(|r| r.is_finite()).fold(f64::NEG_INFINITY, f64::max);
            let m = if m.is_finite() { m } else { 0.0 };
            (m, v.iter().map(|z| (*z - m).exp()).collect())
        };
        let (ma, a) = norm(&la);
        let (mb, b) = norm(&lb);
        let (mj, e) = norm(&lj);

        let mut fine = Complex64::new(0.0, 0.0);
        let mut coarse = Complex64::new(0.0, 0.0);
        let mut mag = 0.0;
        let mut peak = 0.0f64;
        let mut edge = 0.0f64;
        for (i, ai) in a.iter().enumerate() {
            let wt = if i == 0 { 1.0 } else { 2.0 };
            let mut row = Complex64::new(0.0, 0.0);
            let mut row_c = Complex64::new(0.0, 0.0);
            let mut row_mag = 0.0;
            for (j, bj) in b.iter().enumerate() {
                let term = bj * e[i + j];
                row += term;
                row_mag += term.norm();
                if i % 2 == 0 && (j + n2) % 2 == 0 {
                    row_c += term;
                }
                let nrm = term.norm();
                if j == 0 || j == 2 * n2 || i == n1 {
                    edge = edge.max(nrm * ai.norm());
                }
                peak = peak.max(nrm * ai.norm());
            }
            fine += wt * ai * row;
            coarse += wt * ai * row_c;
            mag += wt * ai.norm() * row_mag;
        }
        let scale = h * h / (4.0 * PI * PI) * (ma + mb + mj).exp();
        let value = fine.re * scale;
        let value_c = 4.0 * coarse.re * scale;
        let floor = 64.0 * f64::EPSILON * mag * scale;
        let err = (value - value_c).abs().max(floor);

        if edge > peak * (-TAIL).exp() {
            // box too small in some direction: find which edge and grow it
            let mut edge_x = 0.0f64;
            let mut edge_y = 0.0f64;
            for (j, bj) in b.iter().enumerate() {
                edge_x = edge_x.max((a[n1] * bj * e[n1 + j]).norm());
            }
            for (i, ai) in a.iter().enumerate() {
                edge_y = edge_y.max((ai * b[0] * e[i]).norm()).max((ai * b[2 * n2] * e[i + 2 * n2]).norm());
            }
            let lim = peak * (-TAIL).exp();
            if edge_x > lim {
                t1 *= 1.5;
            }
            if edge_y > lim {
                t2 *= 1.5;
            }
            if t1 > 2000.0 || t2 > 2000.0 {
                return Err(SpecfunError::ContourPlanning(
                    "integrand does not decay inside the truncation box".into(),
                ));
            }
            continue;
        }

        if value.is_finite() && err <= opts.tolerance(value) && refine > 0 {
            refine -= 1;
            h *= 0.5;
            continue;
        }
        if value.is_finite() && err <= opts.tolerance(value) {
            return Ok(BivariateEvaluation {
                value,
                error_estimate: err,
                contour: BivariateContour {
                    shift_x: cs,
                    shift_y: ct,
                    step: h,
                    half_extent_x: n1 as f64 * h,
                    half_extent_y: n2 as f64 * h,
                    nodes,
                    rule: QuadratureRule::Trapezoid,
                    margin,
                },
            });
        }
        if h < 2e-3 {
            return Err(SpecfunError::NonConvergence {
                value,
                error_estimate: err,
                tolerance: opts.tolerance(value),
            });
        }
        h *= 0.5;
    }
}
