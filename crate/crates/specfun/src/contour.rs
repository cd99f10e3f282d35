//! Contour placement for Mellin-Barnes integrals.

use serde::{Deserialize, Serialize};

use crate::kernel::GammaFactors;

/// Open interval (lo, hi) of admissible real parts; either end may be
/// infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Strip {
    pub lo: f64,
    pub hi: f64,
}

impl Strip {
    pub const ALL: Strip = Strip {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn intersect(&self, other: &Strip) -> Strip {
        Strip {
            lo: self.lo.max(other.lo),
            hi: self.hi.min(other.hi),
        }
    }

    /// Strip that separates all left and right pole families of `f`.
    pub fn of(f: &GammaFactors) -> Strip {
        let (lo, hi) = f.pole_gap();
        Strip { lo, hi }
    }

    /// Finite search window: infinite ends are replaced by `reach` beyond
    /// the finite one (or ±reach when both are infinite).
    pub fn window(&self, reach: f64) -> (f64, f64) {
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (true, true) => (self.lo, self.hi),
            (true, false) => (self.lo, self.lo + reach),
            (false, true) => (self.hi - reach, self.hi),
            (false, false) => (-reach, reach),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRule {
    /// Trapezoid rule on the vertical line, with the coarse rule on every
    /// other node for the error estimate.
    Trapezoid,
}

/// Straight-line contour Re s = shift, discretised by the trapezoid rule
/// with `step` on [-half_extent, half_extent]; `residue_poles` are left
/// poles to the right of the line whose residues are added.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub shift: f64,
    pub step: f64,
    pub half_extent: f64,
    pub nodes: usize,
    pub rule: QuadratureRule,
    pub residue_poles: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BivariateContour {
    pub shift_x: f64,
    pub shift_y: f64,
    pub step: f64,
    pub half_extent_x: f64,
    pub half_extent_y: f64,
    pub nodes: usize,
    pub rule: QuadratureRule,
    /// Smallest distance from the contour to any pole, in the variables'
    /// own units.
    pub margin: f64,
}

/// Golden-section minimisation of a unimodal function on [a, b].
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    const R: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - R * (b - a);
    let mut x2 = a + R * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a).abs() > tol {
        // NaN compares false and moves the bracket toward the finite side
        if f1 < f2 || f2.is_nan() {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - R * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + R * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

/// Largest κ such that some (cs, ct) keeps distance κ from every bound of
/// cs ∈ s, ct ∈ t, cs + ct ∈ j.
pub fn max_margin(s: &Strip, t: &Strip, j: &Strip) -> f64 {
    let cands = [
        s.width() / 2.0,
        t.width() / 2.0,
        j.width() / 2.0,
        (j.hi - s.lo - t.lo) / 3.0,
        (s.hi + t.hi - j.lo) / 3.0,
        (j.hi - j.lo + t.hi - t.lo) / 4.0,
    ];
    cands.iter().copied().filter(|v| !v.is_nan()).fold(f64::INFINITY, f64::min)
}

/// Range of cs for which some ct satisfies all three strips shrunk by κ.
pub fn outer_range(s: &Strip, t: &Strip, j: &Strip, kappa: f64) -> Strip {
    Strip {
        lo: (s.lo + kappa).max(j.lo - t.hi + 2.0 * kappa),
        hi: (s.hi - kappa).min(j.hi - t.lo - 2.0 * kappa),
    }
}

/// Admissible ct for a given cs.
pub fn inner_range(cs: f64, t: &Strip, j: &Strip, kappa: f64) -> Strip {
    Strip {
        lo: (t.lo + kappa).max(j.lo - cs + kappa),
        hi: (t.hi - kappa).min(j.hi - cs - kappa),
    }
}
