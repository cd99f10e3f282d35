//! Principal-branch complex log-gamma.
//!
//! Lanczos (g = 607/128, 15 terms) for moderate arguments, the Stirling series
//! once |z| >= 10, and the reflection formula left of Re z = 1/2.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Result, SpecfunError};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const LN_PI: f64 = 1.144_729_885_849_400_2;

const LANCZOS_G: f64 = 607.0 / 128.0;
const LANCZOS: [f64; 15] = [
    0.999_999_999_999_997_1,
    57.156_235_665_862_92,
    -59.597_960_355_475_49,
    14.136_097_974_741_747,
    -0.491_913_816_097_620_2,
    0.339_946_499_848_118_9e-4,
    0.465_236_289_270_485_8e-4,
    -0.983_744_753_048_795_6e-4,
    0.158_088_703_224_912_5e-3,
    -0.210_264_441_724_104_9e-3,
    0.217_439_618_115_212_6e-3,
    -0.164_318_106_536_763_9e-3,
    0.844_182_239_838_527_4e-4,
    -0.261_908_384_015_814_1e-4,
    0.368_991_826_595_316_2e-5,
];

// B_{2k} / (2k (2k - 1)) for k = 1..=10
const STIRLING: [f64; 10] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
    43_867.0 / 244_188.0,
    -174_611.0 / 125_400.0,
];

/// Principal branch of ln Γ(z): continuous on C minus the non-positive real
/// axis, with ln Γ(z + 1) = ln Γ(z) + ln z.
pub fn ln_gamma(z: Complex64) -> Result<Complex64> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(SpecfunError::Domain {
            what: "ln_gamma argument",
            value: if z.re.is_finite() { z.im } else { z.re },
        });
    }
    if z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round() {
        return Err(SpecfunError::Pole { re: z.re, im: z.im });
    }
    Ok(ln_gamma_unchecked(z))
}

/// ln Γ(z) without the pole check. Returns non-finite values at poles.
pub fn ln_gamma_unchecked(z: Complex64) -> Complex64 {
    if z.re < 0.5 && z.im.abs() <= 20.0 {
        reflect(z)
    } else if z.norm_sqr() >= 100.0 {
        stirling(z)
    } else {
        lanczos(z)
    }
}

fn lanczos(z: Complex64) -> Complex64 {
    let zm = z - 1.0;
    let mut sum = Complex64::new(LANCZOS[0], 0.0);
    for (k, &c) in LANCZOS.iter().enumerate().skip(1) {
        sum += c / (zm + k as f64);
    }
    let t = zm + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (zm + 0.5) * t.ln() - t + sum.ln()
}

fn stirling(z: Complex64) -> Complex64 {
    let inv = z.inv();
    let inv2 = inv * inv;
    let mut series = Complex64::new(0.0, 0.0);
    for &c in STIRLING.iter().rev() {
        series = series * inv2 + c;
    }
    (z - 0.5) * z.ln() - z + LN_SQRT_2PI + series * inv
}

fn reflect(z: Complex64) -> Complex64 {
    // The 2πi multiple keeps the result on the branch continuous from the
    // positive real axis.
    let turn = (2.0 * PI).copysign(z.im) * (0.5 * z.re + 0.25).floor();
    Complex64::new(LN_PI, turn) - sin_pi(z).ln() - ln_gamma_unchecked(1.0 - z)
}

/// sin(πz) with argument reduction on the real part.
fn sin_pi(z: Complex64) -> Complex64 {
    let x = z.re;
    let n = (2.0 * x).round();
    let r = x - 0.5 * n;
    let (s, c) = (PI * r).sin_cos();
    let (sh, ch) = ((PI * z.im).sinh(), (PI * z.im).cosh());
    let (sr, cr) = (s * ch, c * sh);
    // sin(π(r + n/2) + iπy)
    let q = (n as i64).rem_euclid(4);
    let (re, im) = match q {
        0 => (sr, cr),
        1 => (c * ch, -s * sh),
        2 => (-sr, -cr),
        _ => (-c * ch, s * sh),
    };
    Complex64::new(re, im)
}

/// ln Γ(x) for real x > 0.
pub fn ln_gamma_real(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(SpecfunError::Domain {
            what: "ln_gamma_real argument",
            value: x,
        });
    }
    Ok(ln_gamma_unchecked(Complex64::new(x, 0.0)).re)
}

/// Γ(x) for real x that is not a non-positive integer.
pub fn gamma(x: f64) -> Result<f64> {
    if x <= 0.0 && x == x.round() {
        return Err(SpecfunError::Pole { re: x, im: 0.0 });
    }
    if x > 0.0 {
        return Ok(ln_gamma_real(x)?.exp());
    }
    // Γ(x) = π / (sin(πx) Γ(1 - x))
    let s = sin_pi(Complex64::new(x, 0.0)).re;
    Ok(PI / (s * ln_gamma_real(1.0 - x)?.exp()))
}

/// ln n! from a lookup for small n.
pub fn ln_factorial(n: u32) -> f64 {
    if n < 2 {
        return 0.0;
    }
    ln_gamma_unchecked(Complex64::new(n as f64 + 1.0, 0.0)).re
}
