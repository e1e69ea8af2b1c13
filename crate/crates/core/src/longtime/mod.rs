//! Long-time experiments on hinged trajectories: multiplier identities,
//! absorbing balls, contraction fits and differences of two solutions.

mod absorbing;
mod difference;
mod multiplier;

pub use absorbing::{
    absorbing_ball_experiment, default_window, fit_contraction, scale_to_hat_energy,
    AbsorbingOptions, AbsorbingReport, ContractionFit, RunSummary,
};
pub use difference::{
    difference_decomposition_audit, difference_energy_decay, energy_distance,
    hausdorff_semidistance, observability_constant, observability_constants, DifferenceAudit,
    KeyInequality, ObservabilityReport, DEFAULT_PROXY_ETA,
};
pub use multiplier::{
    multiplier_audit, MultiplierAuditReport, MultiplierIdentity, Term, TraceNorms,
};

use crate::error::{Error, Result};
use crate::geometry::Configuration;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "BERGER_LAB_THREADS";

/// Thread pool sized by `BERGER_LAB_THREADS` when set, else by rayon's
/// default.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(value) = std::env::var(THREADS_ENV) {
        let threads: usize = value.trim().parse().map_err(|_| {
            Error::Config(format!(
                "{THREADS_ENV} must be a positive integer, got {value:?}"
            ))
        })?;
        if threads == 0 {
            return Err(Error::Config(format!("{THREADS_ENV} must be >= 1")));
        }
        builder = builder.num_threads(threads);
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker threads: {e}")))
}

fn require_hinged(configuration: Configuration, dim: usize) -> Result<()> {
    if configuration.is_hinged() {
        Ok(())
    } else {
        Err(Error::WrongConfiguration {
            expected: if dim == 2 {
                Configuration::Hd2d
            } else {
                Configuration::Hd1d
            },
            got: configuration,
        })
    }
}

/// Trapezoid rule on possibly uneven nodes.
fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}
