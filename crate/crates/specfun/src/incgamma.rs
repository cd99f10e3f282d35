//! Regularized incomplete gamma functions.

use crate::error::{Result, SpecfunError};
use crate::gamma::ln_gamma_real;

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 100_000;

fn check(a: f64, x: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(SpecfunError::Domain {
            what: "incomplete gamma shape",
            value: a,
        });
    }
    if !(x >= 0.0) {
        return Err(SpecfunError::Domain {
            what: "incomplete gamma argument",
            value: x,
        });
    }
    Ok(())
}

fn prefactor(a: f64, x: f64) -> Result<f64> {
    Ok((a * x.ln() - x - ln_gamma_real(a)?).exp())
}

fn series_p(a: f64, x: f64) -> Result<f64> {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * EPS {
            return Ok(sum * prefactor(a, x)?);
        }
    }
    Err(SpecfunError::NonConvergence {
        value: sum,
        error_estimate: del,
        tolerance: EPS,
    })
}

fn continued_fraction_q(a: f64, x: f64) -> Result<f64> {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            return Ok(h * prefactor(a, x)?);
        }
    }
    Err(SpecfunError::NonConvergence {
        value: h,
        error_estimate: f64::NAN,
        tolerance: EPS,
    })
}

/// Regularized lower incomplete gamma P(a, x).
pub fn gamma_p(a: f64, x: f64) -> Result<f64> {
    check(a, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x < a + 1.0 {
        series_p(a, x)
    } else {
        Ok(1.0 - continued_fraction_q(a, x)?)
    }
}

/// Regularized upper incomplete gamma Q(a, x) = Γ(a, x) / Γ(a).
pub fn gamma_q(a: f64, x: f64) -> Result<f64> {
    check(a, x)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    if x < a + 1.0 {
        Ok(1.0 - series_p(a, x)?)
    } else {
        continued_fraction_q(a, x)
    }
}
