//! Link models, end-to-end metrics and Monte Carlo validation for a
//! hybrid FSO/RF relay link: ground station to HAP over an optical IRS,
//! then HAP to two users through a STAR surface.

pub mod error;
pub mod scenario;
pub mod fso_link;
pub mod rf_link;
pub mod e2e_metrics;
pub mod monte_carlo;
pub mod curve;

pub use error::{CoreError, Result};
