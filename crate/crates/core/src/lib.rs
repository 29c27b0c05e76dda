pub mod catalog;
pub mod certificates;
pub mod cli;
pub mod error;
pub mod ledger;
pub mod lift;
pub mod methods;
pub mod problems;
pub mod report;
pub mod schedules;
pub mod structure;

pub use error::{Error, Result};

/// Default relative tolerance for identity checks.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Relative tolerance for identity checks, overridable through the
/// `PEPLIFT_TOL` environment variable.
pub fn global_tol() -> f64 {
    std::env::var("PEPLIFT_TOL")
        .ok()
        .and_then(|v| v.trim().parse::<f64>().ok())
        .filter(|v| v.is_finite() && *v > 0.0)
        .unwrap_or(DEFAULT_TOL)
}
