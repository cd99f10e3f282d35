//! Univariate Mellin-Barnes integrals (1/2πi) ∫ K(s) x^s ds and the
//! Meijer-G function built on them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::contour::{golden_min, ContourSpec, QuadratureRule, Strip};
use crate::error::{Result, SpecfunError};
use crate::kernel::{GammaFactors, GammaTerm};

/// Tail threshold: the line is cut where |integrand| < e^{-TAIL} · peak.
pub(crate) const TAIL: f64 = 41.5;
/// Gaps narrower than this are handled by moving the line and adding
/// residues instead of squeezing between the poles.
const NARROW_GAP: f64 = 0.05;
const CIRCLE_NODES: usize = 128;
const COINCIDENT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MbOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_nodes: usize,
    /// Extra step halvings after convergence.
    #[serde(default)]
    pub refine: u32,
}

impl Default for MbOptions {
    fn default() -> Self {
        MbOptions {
            rel_tol: 1e-10,
            abs_tol: 0.0,
            max_nodes: 400_000,
            refine: 0,
        }
    }
}

impl MbOptions {
    pub fn tolerance(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub value: f64,
    pub error_estimate: f64,
    pub contour: ContourSpec,
}

struct Node {
    s: Complex64,
    /// quadrature weight times K(s); x^s is applied at evaluation time
    wk: Complex64,
    /// member of the coarse (2h) sub-rule, with its own weight
    coarse: Complex64,
}

/// A kernel discretised on a fixed contour, evaluable for any x in the
/// range it was refined for.
pub struct MellinBarnesTable {
    nodes: Vec<Node>,
    contour: ContourSpec,
    /// common factor e^{ln_scale} pulled out of every node weight
    ln_scale: f64,
}

fn pole_list(kernel: &GammaFactors, left: bool, from: f64, to: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for t in kernel.pole_terms() {
        if t.is_left() != left {
            continue;
        }
        for n in 0..10_000u32 {
            let p = t.pole(n);
            if left && p < from || !left && p > to {
                break;
            }
            if p >= from && p <= to {
                out.push(p);
            }
        }
    }
    out.sort_by(|a, b| a.total_cmp(b));
    out
}

struct Placement {
    c: f64,
    kappa: f64,
    residues: Vec<f64>,
}

fn place(kernel: &GammaFactors, lnx: f64) -> Result<Placement> {
    let strip = Strip::of(kernel);
    if strip.width() > NARROW_GAP {
        let kappa = (0.15 * strip.width()).min(0.5);
        let (lo, hi) = strip.window(40.0);
        let (lo, hi) = (lo + kappa, hi - kappa);
        let f = |c: f64| kernel.ln_eval(Complex64::new(c, 0.0)).re + c * lnx;
        let mut c = golden_min(f, lo, hi, 1e-6 * (1.0 + hi - lo));
        if !f(c).is_finite() {
            c = 0.5 * (lo + hi);
        }
        let kappa = (c - strip.lo).min(strip.hi - c);
        return Ok(Placement {
            c,
            kappa,
            residues: Vec::new(),
        });
    }
    // Interleaved or nearly touching families: put the line left of every
    // right pole and pick up the left poles it leaves behind.
    let r = strip.hi;
    if !r.is_finite() {
        return Err(SpecfunError::ContourPlanning(
            "no right poles but left/right gap is empty".into(),
        ));
    }
    let left_near = pole_list(kernel, true, r - 1.0, r);
    let mut marks = vec![r - 1.0];
    marks.extend(left_near.iter().copied());
    marks.push(r);
    marks.sort_by(|a, b| a.total_cmp(b));
    let (mut best, mut c) = (0.0, r - 0.5);
    for w in marks.windows(2) {
        if w[1] - w[0] > best {
            best = w[1] - w[0];
            c = 0.5 * (w[0] + w[1]);
        }
    }
    let top = strip.lo;
    let residues = pole_list(kernel, true, c, top.max(c));
    let rights = pole_list(kernel, false, f64::NEG_INFINITY, top + 1.0);
    for &p in &residues {
        if let Some(q) = rights.iter().find(|&&q| (q - p).abs() <= COINCIDENT * (1.0 + p.abs())) {
            return Err(SpecfunError::ContourPlanning(format!(
                "left and right poles coincide at s = {q}"
            )));
        }
    }
    let mut kappa = f64::INFINITY;
    for p in pole_list(kernel, true, c - 2.0, c + 2.0)
        .into_iter()
        .chain(pole_list(kernel, false, c - 2.0, c + 2.0))
    {
        kappa = kappa.min((p - c).abs());
    }
    Ok(Placement {
        c,
        kappa: kappa.min(1.0),
        residues,
    })
}

/// Clusters of nearby poles share one residue circle.
fn clusters(poles: &[f64]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for &p in poles {
        match out.last_mut() {
            Some(last) if p - last[last.len() - 1] < 0.02 => last.push(p),
            _ => out.push(vec![p]),
        }
    }
    out
}

fn truncation(kernel: &GammaFactors, c: f64) -> Result<(f64, f64)> {
    let mut peak = f64::NEG_INFINITY;
    let dy = 0.25;
    let mut y = 0.0;
    let mut below = 0;
    while y < 5000.0 {
        let m = kernel.ln_eval(Complex64::new(c, y)).re;
        if m.is_finite() {
            peak = peak.max(m);
            if m < peak - TAIL {
                below += 1;
                if below >= 4 {
                    return Ok((y, peak));
                }
            } else {
                below = 0;
            }
        }
        y += dy;
    }
    Err(SpecfunError::ContourPlanning(
        "integrand does not decay along the contour".into(),
    ))
}

impl MellinBarnesTable {
    /// Discretise `kernel` for x with ln x in [lnx_lo, lnx_hi]; the contour
    /// is placed at the saddle for the midpoint.
    pub fn new(kernel: &GammaFactors, lnx_lo: f64, lnx_hi: f64, opts: &MbOptions) -> Result<Self> {
        let kernel = kernel.canonicalize();
        if kernel.decay_rate() <= 0.0 {
            return Err(SpecfunError::ContourPlanning(
                "kernel does not decay exponentially along vertical lines".into(),
            ));
        }
        if !(lnx_lo.is_finite() && lnx_hi.is_finite()) {
            return Err(SpecfunError::Domain {
                what: "Mellin-Barnes argument (log)",
                value: if lnx_lo.is_finite() { lnx_hi } else { lnx_lo },
            });
        }
        let lnx_mid = 0.5 * (lnx_lo + lnx_hi);
        let pl = place(&kernel, lnx_mid)?;
        let (t_max, _) = truncation(&kernel, pl.c)?;
        let omega = lnx_lo.abs().max(lnx_hi.abs());
        let mut h = 4.0 * 2.0 * PI * pl.kappa / (TAIL + omega * pl.kappa);
        h = h.min(0.5);

        let ln_scale = kernel.ln_eval(Complex64::new(pl.c, 0.0)).re;
        let ln_scale = if ln_scale.is_finite() { ln_scale } else { 0.0 };
        let circles = build_circles(&kernel, &pl.residues, ln_scale)?;
        let probes = [lnx_lo, lnx_mid, lnx_hi];
        let mut refine = opts.refine;
        loop {
            let n = (t_max / h).ceil() as usize + 1;
            if n > opts.max_nodes {
                return Err(SpecfunError::NonConvergence {
                    value: f64::NAN,
                    error_estimate: f64::NAN,
                    tolerance: opts.rel_tol,
                });
            }
            let mut nodes = Vec::with_capacity(n + circles.len());
            for k in 0..n {
                let s = Complex64::new(pl.c, k as f64 * h);
                let kv = (kernel.ln_eval(s) - ln_scale).exp();
                let half = if k == 0 { 0.5 } else { 1.0 };
                let wk = kv * (half * h / PI);
                let coarse = if k % 2 == 0 { wk * 2.0 } else { Complex64::new(0.0, 0.0) };
                nodes.push(Node { s, wk, coarse });
            }
            nodes.extend(circles.iter().map(|c| Node {
                s: c.s,
                wk: c.wk,
                coarse: c.coarse,
            }));
            let table = MellinBarnesTable {
                nodes,
                contour: ContourSpec {
                    shift: pl.c,
                    step: h,
                    half_extent: (n - 1) as f64 * h,
                    nodes: n,
                    rule: QuadratureRule::Trapezoid,
                    residue_poles: pl.residues.clone(),
                },
                ln_scale,
            };
            let ok = probes.iter().all(|&l| {
                let (v, e) = table.eval_ln(l);
                e <= opts.tolerance(v)
            });
            if ok && refine == 0 {
                return Ok(table);
            }
            if ok {
                refine -= 1;
                h *= 0.5;
                continue;
            }
            if h < 1e-4 {
                let (v, e) = table.eval_ln(lnx_mid);
                return Err(SpecfunError::NonConvergence {
                    value: v,
                    error_estimate: e,
                    tolerance: opts.tolerance(v),
                });
            }
            h *= 0.5;
        }
    }

    pub fn contour(&self) -> &ContourSpec {
        &self.contour
    }

    /// Value and error estimate at x = e^{lnx}.
    pub fn eval_ln(&self, lnx: f64) -> (f64, f64) {
        let mut fine = 0.0;
        let mut coarse = 0.0;
        let mut mag = 0.0;
        for n in &self.nodes {
            let z = (n.s * lnx).exp();
            let a = (n.wk * z).re;
            fine += a;
            coarse += (n.coarse * z).re;
            mag += a.abs();
        }
        let floor = 64.0 * f64::EPSILON * mag;
        let scale = self.ln_scale.exp();
        (fine * scale, (fine - coarse).abs().max(floor) * scale)
    }

    pub fn eval(&self, x: f64) -> (f64, f64) {
        self.eval_ln(x.ln())
    }
}

struct CircleNode {
    s: Complex64,
    wk: Complex64,
    coarse: Complex64,
}

fn build_circles(kernel: &GammaFactors, residues: &[f64], ln_scale: f64) -> Result<Vec<CircleNode>> {
    let mut out = Vec::new();
    if residues.is_empty() {
        return Ok(out);
    }
    let all_left = pole_list(kernel, true, residues[0] - 3.0, residues[residues.len() - 1] + 3.0);
    let all_right = pole_list(kernel, false, residues[0] - 3.0, residues[residues.len() - 1] + 3.0);
    for cl in clusters(residues) {
        let lo = cl[0];
        let hi = cl[cl.len() - 1];
        let center = 0.5 * (lo + hi);
        let inner = 0.5 * (hi - lo);
        let outer = all_left
            .iter()
            .chain(all_right.iter())
            .filter(|&&p| p < lo - 1e-12 || p > hi + 1e-12)
            .map(|&p| (p - center).abs())
            .fold(f64::INFINITY, f64::min);
        let rho = (0.5 * outer).min(inner + 0.25);
        if !(rho >= 2.0 * inner && rho > 0.0) {
            return Err(SpecfunError::ContourPlanning(format!(
                "pole cluster near s = {center} cannot be isolated"
            )));
        }
        for j in 0..CIRCLE_NODES {
            let th = 2.0 * PI * (j as f64 + 0.5) / CIRCLE_NODES as f64;
            let e = Complex64::from_polar(rho, th);
            let s = center + e;
            let kv = (kernel.ln_eval(s) - ln_scale).exp();
            let wk = kv * e / CIRCLE_NODES as f64;
            // every other node forms the half-resolution circle rule
            let coarse = if j % 2 == 0 { wk * 2.0 } else { Complex64::new(0.0, 0.0) };
            out.push(CircleNode { s, wk, coarse });
        }
    }
    Ok(out)
}

/// (1/2πi) ∫ K(s) x^s ds along a contour separating the left and right pole
/// families of `kernel` (with residue corrections when they interleave).
pub fn mellin_barnes(kernel: &GammaFactors, x: f64, opts: &MbOptions) -> Result<Evaluation> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(SpecfunError::Domain {
            what: "Mellin-Barnes argument",
            value: x,
        });
    }
    let lnx = x.ln();
    let table = MellinBarnesTable::new(kernel, lnx, lnx, opts)?;
    let (value, error_estimate) = table.eval_ln(lnx);
    if !value.is_finite() || error_estimate > opts.tolerance(value) {
        return Err(SpecfunError::NonConvergence {
            value,
            error_estimate,
            tolerance: opts.tolerance(value),
        });
    }
    Ok(Evaluation {
        value,
        error_estimate,
        contour: table.contour,
    })
}

/// Gamma-ratio kernel of G^{m,n}_{p,q}(x | a; b):
/// Π_{j≤m} Γ(b_j - s) Π_{j≤n} Γ(1 - a_j + s) / (Π_{j>m} Γ(1 - b_j + s) Π_{j>n} Γ(a_j - s)).
pub fn meijer_kernel(m: usize, n: usize, a: &[f64], b: &[f64]) -> Result<GammaFactors> {
    let (p, q) = (a.len(), b.len());
    if m > q || n > p {
        return Err(SpecfunError::InvalidParameters(format!(
            "need m <= q and n <= p, got m={m} n={n} p={p} q={q}"
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(SpecfunError::InvalidParameters("non-finite parameter".into()));
    }
    let mut numer = Vec::new();
    let mut denom = Vec::new();
    for (j, &bj) in b.iter().enumerate() {
        if j < m {
            numer.push(GammaTerm::new(bj, -1.0));
        } else {
            denom.push(GammaTerm::new(1.0 - bj, 1.0));
        }
    }
    for (j, &aj) in a.iter().enumerate() {
        if j < n {
            numer.push(GammaTerm::new(1.0 - aj, 1.0));
        } else {
            denom.push(GammaTerm::new(aj, -1.0));
        }
    }
    Ok(GammaFactors::new(numer, denom))
}

/// Meijer G^{m,n}_{p,q}(x | a; b) for x > 0 by contour integration, where
/// p = a.len() and q = b.len().
pub fn meijer_g(m: usize, n: usize, a: &[f64], b: &[f64], x: f64, opts: &MbOptions) -> Result<Evaluation> {
    let kernel = meijer_kernel(m, n, a, b)?;
    mellin_barnes(&kernel, x, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential() {
        // G^{1,0}_{0,1}(x | -; 0) = e^{-x}
        for &x in &[0.01, 0.5, 1.0, 3.0, 10.0] {
            let v = meijer_g(1, 0, &[], &[0.0], x, &MbOptions::default()).unwrap();
            assert!((v.value - (-x).exp()).abs() < 1e-10 * (-x).exp(), "x={x} {v:?}");
        }
    }

    #[test]
    fn interleaved_families_use_residues() {
        // G^{1,1}_{1,1}(x | 1 + v; 0) = Γ(-v) (1 + x)^v; the left poles
        // s = v - n straddle the right pole at s = 0
        let v = 0.4;
        let x = 0.7;
        let r = meijer_g(1, 1, &[1.0 + v], &[0.0], x, &MbOptions::default()).unwrap();
        let exact = crate::gamma::gamma(-v).unwrap() * (1.0 + x).powf(v);
        assert!((r.value - exact).abs() < 1e-10 * exact.abs(), "{r:?} {exact}");
        assert_eq!(r.contour.residue_poles.len(), 1);
    }
}
