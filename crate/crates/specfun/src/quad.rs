//! Quadrature rules: Gauss-Legendre, adaptive Gauss-Kronrod (7/15) and
//! tanh-sinh.

use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Result, SpecfunError};

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Cached 16-point rule used by the contour integrators.
pub fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(16))
}

/// Composite Gauss-Legendre nodes and weights on [a, b] with `panels`
/// equal panels of the cached 16-point rule.
pub fn composite_gl(a: f64, b: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gl16();
    let h = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * x.len());
    let mut weights = Vec::with_capacity(panels * x.len());
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(w) {
            nodes.push(mid + 0.5 * h * xi);
            weights.push(0.5 * h * wi);
        }
    }
    (nodes, weights)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss-Kronrod 7/15 on a finite interval. Stops when the
/// summed error estimate is below `max(abs_tol, rel_tol |I|)`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<QuadResult> {
    integrate_limited(f, a, b, abs_tol, rel_tol, 4000)
}

pub fn integrate_limited<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_segments: usize,
) -> Result<QuadResult> {
    let (v, e) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value: v, error: e });
    let mut total = v;
    let mut err = e;
    let mut evals = 15;
    while err > abs_tol.max(rel_tol * total.abs()) {
        if heap.len() >= max_segments || !err.is_finite() {
            return Err(SpecfunError::NonConvergence {
                value: total,
                error_estimate: err,
                tolerance: abs_tol.max(rel_tol * total.abs()),
            });
        }
        let s = heap.pop().expect("heap is never empty");
        let m = 0.5 * (s.a + s.b);
        let (v1, e1) = gk15(&f, s.a, m);
        let (v2, e2) = gk15(&f, m, s.b);
        evals += 30;
        total += v1 + v2 - s.value;
        err += e1 + e2 - s.error;
        heap.push(Segment { a: s.a, b: m, value: v1, error: e1 });
        heap.push(Segment { a: m, b: s.b, value: v2, error: e2 });
        if heap.len() % 64 == 0 {
            // refresh the running sums against drift
            total = heap.iter().map(|s| s.value).sum();
            err = heap.iter().map(|s| s.error).sum();
        }
    }
    Ok(QuadResult {
        value: total,
        error: err,
        evaluations: evals,
    })
}

/// Tanh-sinh quadrature on [a, b], halving the step until successive levels
/// agree to `tol` relative.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<QuadResult> {
    let c = 0.5 * (a + b);
    let h0 = 0.5 * (b - a);
    let t_max = 4.0;
    let mut h = 0.5;
    let mut sum = {
        let mut s = f(c) * PI / 2.0;
        let mut k = 1;
        loop {
            let t = k as f64 * h;
            if t > t_max {
                break;
            }
            s += pair(&f, c, h0, t);
            k += 1;
        }
        s
    };
    let mut prev = sum * h * h0;
    let mut evals = 0usize;
    for _level in 0..12 {
        h *= 0.5;
        let mut k = 1;
        loop {
            let t = k as f64 * h;
            if t > t_max {
                break;
            }
            sum += pair(&f, c, h0, t);
            evals += 2;
            k += 2;
        }
        let cur = sum * h * h0;
        let diff = (cur - prev).abs();
        if diff <= tol * cur.abs() {
            return Ok(QuadResult {
                value: cur,
                error: diff,
                evaluations: evals,
            });
        }
        prev = cur;
    }
    Err(SpecfunError::NonConvergence {
        value: prev,
        error_estimate: f64::NAN,
        tolerance: tol,
    })
}

fn pair<F: Fn(f64) -> f64>(f: &F, c: f64, h0: f64, t: f64) -> f64 {
    let u = 0.5 * PI * t.sinh();
    let ch = u.cosh();
    let w = 0.5 * PI * t.cosh() / (ch * ch);
    // 1 - tanh(u), computed without cancellation
    let d = 1.0 / (u.exp() * ch);
    let off = h0 * d;
    if off == 0.0 || !w.is_finite() {
        return 0.0;
    }
    w * (f(c - h0 + off) + f(c + h0 - off))
}
