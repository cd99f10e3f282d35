//! Special functions for fading-channel analysis: complex log-gamma,
//! modified Bessel functions, incomplete gamma, quadrature, and
//! Mellin-Barnes evaluation of Meijer-G and bivariate Fox-H functions.

pub mod bessel;
pub mod contour;
pub mod error;
pub mod foxh;
pub mod gamma;
pub mod incgamma;
pub mod kernel;
pub mod mellin;
pub mod quad;

pub use bessel::{bessel_i0, bessel_i0e, bessel_k, erf, erfc, norm_cdf};
pub use contour::{BivariateContour, ContourSpec, QuadratureRule, Strip};
pub use error::{Result, SpecfunError};
pub use foxh::{fox_h_bivariate, fox_h_bivariate_weighted, BivariateEvaluation, BivariateFoxHSpec};
pub use gamma::{gamma, ln_gamma, ln_gamma_real, ln_gamma_unchecked};
pub use incgamma::{gamma_p, gamma_q};
pub use kernel::{GammaFactors, GammaTerm};
pub use mellin::{meijer_g, meijer_kernel, mellin_barnes, Evaluation, MbOptions, MellinBarnesTable};
