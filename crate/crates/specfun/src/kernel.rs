//! Gamma-ratio kernels of Mellin-Barnes integrals.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::gamma::ln_gamma_unchecked;

/// Γ(offset + scale·s) raised to `power`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaTerm {
    pub offset: f64,
    pub scale: f64,
    #[serde(default = "one")]
    pub power: u32,
}

fn one() -> u32 {
    1
}

impl GammaTerm {
    pub fn new(offset: f64, scale: f64) -> Self {
        GammaTerm {
            offset,
            scale,
            power: 1,
        }
    }

    pub fn pow(offset: f64, scale: f64, power: u32) -> Self {
        GammaTerm {
            offset,
            scale,
            power,
        }
    }

    /// Real part of the gamma argument at Re s = c.
    pub fn arg_re(&self, c: f64) -> f64 {
        self.offset + self.scale * c
    }

    /// Pole locations in s, nearest to the contour first.
    pub fn pole(&self, n: u32) -> f64 {
        -(self.offset + n as f64) / self.scale
    }

    /// True when the poles run off to -∞ (a left family).
    pub fn is_left(&self) -> bool {
        self.scale > 0.0
    }
}

/// Numerator and denominator gamma products, Π Γ(num) / Π Γ(den).
/// Equality is order independent.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GammaFactors {
    pub numer: Vec<GammaTerm>,
    pub denom: Vec<GammaTerm>,
}

impl PartialEq for GammaFactors {
    fn eq(&self, other: &Self) -> bool {
        self.canonical_lists() == other.canonical_lists()
    }
}

fn canonical(list: &[GammaTerm]) -> Vec<(u64, u64, u32)> {
    let mut v: Vec<(u64, u64, u32)> = Vec::new();
    for t in list {
        let key = (t.offset.to_bits(), t.scale.to_bits());
        match v.iter_mut().find(|e| (e.0, e.1) == key) {
            Some(e) => e.2 += t.power,
            None => v.push((key.0, key.1, t.power)),
        }
    }
    v.retain(|e| e.2 > 0);
    v.sort_unstable();
    v
}

impl GammaFactors {
    pub fn new(numer: Vec<GammaTerm>, denom: Vec<GammaTerm>) -> Self {
        GammaFactors { numer, denom }
    }

    fn canonical_lists(&self) -> (Vec<(u64, u64, u32)>, Vec<(u64, u64, u32)>) {
        (canonical(&self.numer), canonical(&self.denom))
    }

    /// Merge duplicate terms and cancel identical numerator/denominator
    /// pairs.
    pub fn canonicalize(&self) -> GammaFactors {
        let mut num = canonical(&self.numer);
        let mut den = canonical(&self.denom);
        for n in num.iter_mut() {
            if let Some(d) = den.iter_mut().find(|d| (d.0, d.1) == (n.0, n.1)) {
                let c = n.2.min(d.2);
                n.2 -= c;
                d.2 -= c;
            }
        }
        let back = |v: Vec<(u64, u64, u32)>| {
            v.into_iter()
                .filter(|e| e.2 > 0)
                .map(|e| GammaTerm::pow(f64::from_bits(e.0), f64::from_bits(e.1), e.2))
                .collect()
        };
        GammaFactors {
            numer: back(num),
            denom: back(den),
        }
    }

    pub fn extend(&mut self, other: &GammaFactors) {
        self.numer.extend_from_slice(&other.numer);
        self.denom.extend_from_slice(&other.denom);
    }

    /// ln of the gamma ratio at s.
    pub fn ln_eval(&self, s: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for t in &self.numer {
            acc += t.power as f64 * ln_gamma_unchecked(t.offset + t.scale * s);
        }
        for t in &self.denom {
            acc -= t.power as f64 * ln_gamma_unchecked(t.offset + t.scale * s);
        }
        acc
    }

    /// Exponential decay rate of |kernel(c + iy)| in |y|, i.e.
    /// (π/2)(Σ_num |scale| - Σ_den |scale|).
    pub fn decay_rate(&self) -> f64 {
        let sum = |l: &[GammaTerm]| l.iter().map(|t| t.power as f64 * t.scale.abs()).sum::<f64>();
        0.5 * std::f64::consts::PI * (sum(&self.numer) - sum(&self.denom))
    }

    /// Numerator terms that carry poles (scale ≠ 0).
    pub fn pole_terms(&self) -> impl Iterator<Item = &GammaTerm> {
        self.numer.iter().filter(|t| t.scale != 0.0)
    }

    /// Largest left-family pole and smallest right-family pole.
    pub fn pole_gap(&self) -> (f64, f64) {
        let mut left = f64::NEG_INFINITY;
        let mut right = f64::INFINITY;
        for t in self.pole_terms() {
            let p = t.pole(0);
            if t.is_left() {
                left = left.max(p);
            } else {
                right = right.min(p);
            }
        }
        (left, right)
    }
}
