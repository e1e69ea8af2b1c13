use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::damping::{
    verify_damping_assumption, DampingLaw, DEFAULT_SAMPLES, DEFAULT_SAMPLE_RANGE,
};
use crate::dynamics::{run_with, PlateState, Stepper, StepperConfig, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::operators::{smallest_eigenvalue_with, EigenOptions, PhysicsParams};

use super::{require_hinged, worker_pool};

/// Least-squares fit of `y[m+1] ≈ η·y[m] + K̄`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionFit {
    pub eta: f64,
    pub offset: f64,
    /// `‖y[m+1] - η·y[m] - K̄‖ / ‖y[m+1]‖`.
    pub residual: f64,
    pub pairs: usize,
}

impl ContractionFit {
    /// `K̄ / (1 - η)`, the fixed point of the fitted map.
    pub fn floor(&self) -> f64 {
        self.offset / (1.0 - self.eta)
    }
}

/// Fits the contraction on the dimensionless sequence `𝓔_M(mT)`. Needs at
/// least three values.
pub fn fit_contraction(series: &[f64]) -> Result<ContractionFit> {
    if series.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "need at least 3 window values to fit, got {}",
            series.len()
        )));
    }
    let x = &series[..series.len() - 1];
    let y = &series[1..];
    let n = x.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let (mx, my) = (sx / n, sy / n);
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let (eta, offset) = if sxx > 0.0 {
        let eta = sxy / sxx;
        (eta, my - eta * mx)
    } else {
        (0.0, my)
    };
    let r2: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - eta * a - offset).powi(2))
        .sum();
    let y2: f64 = y.iter().map(|b| b * b).sum();
    Ok(ContractionFit {
        eta,
        offset,
        residual: if y2 > 0.0 { (r2 / y2).sqrt() } else { 0.0 },
        pairs: x.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsorbingOptions {
    /// Window length `T`; defaults to 20 periods of the lowest linear mode.
    pub window: Option<f64>,
    /// Fits with a larger relative residual are not reported.
    pub fit_threshold: f64,
    pub record_stride: usize,
    pub max_rejections: usize,
}

impl Default for AbsorbingOptions {
    fn default() -> Self {
        Self {
            window: None,
            fit_threshold: 0.05,
            record_stride: 1,
            max_rejections: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub initial_hat_e: f64,
    pub entry_time: Option<f64>,
    pub post_entry_sup: Option<f64>,
    /// `𝓔_M(mT)` for `m = 0, 1, …`.
    pub window_energies: Vec<f64>,
    /// Present only when the fit residual is below the threshold.
    pub fit: Option<ContractionFit>,
    pub raw_fit: Option<ContractionFit>,
    pub contraction_detected: bool,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorbingReport {
    pub window: f64,
    pub horizon: f64,
    pub runs: Vec<RunSummary>,
    /// Candidate radius that every run entered and never left.
    pub candidate_radius: f64,
    pub rejected_radii: Vec<f64>,
    /// Supremum of post-entry `Ê` over the family.
    pub ball_radius: f64,
}

impl AbsorbingReport {
    pub fn all_entered(&self) -> bool {
        self.runs.iter().all(|r| r.entry_time.is_some())
    }
}

/// 20 periods of the lowest mode of the linear plate.
pub fn default_window(stepper: &Stepper) -> Result<f64> {
    let lambda = smallest_eigenvalue_with(stepper.system(), EigenOptions::default())?;
    Ok(20.0 * 2.0 * std::f64::consts::PI / lambda.sqrt())
}

/// Scales `shape` (both components) so that the prepared state has
/// `Ê = target`, by bisection on the amplitude.
pub fn scale_to_hat_energy(
    stepper: &Stepper,
    shape: &PlateState,
    target: f64,
) -> Result<PlateState> {
    if !(target >= 0.0 && target.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "target energy must be >= 0, got {target}"
        )));
    }
    let at = |s: f64| -> Result<(PlateState, f64)> {
        let state = PlateState {
            u: shape.u.scaled(s),
            v: shape.v.scaled(s),
            t: shape.t,
        };
        let prepared = stepper.prepare(&state)?;
        let e = stepper.energies(&prepared, 0.0)?.hat_e;
        Ok((prepared, e))
    };
    if target == 0.0 {
        return Ok(at(0.0)?.0);
    }
    let mut hi = 1.0;
    while at(hi)?.1 < target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::InvalidParameter("shape carries no energy".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid)?.1 < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(at(0.5 * (lo + hi))?.0)
}

/// First index from which `Ê` stays at or below `radius` for the rest of
/// the record, and whether `Ê` came back above `radius` after first
/// dipping below it.
fn entry(hat: &[f64], radius: f64) -> (Option<usize>, bool) {
    let first_below = hat.iter().position(|&e| e <= radius);
    let last_above = hat.iter().rposition(|&e| e > radius);
    let stays = match last_above {
        None => Some(0),
        Some(k) if k + 1 < hat.len() => Some(k + 1),
        Some(_) => None,
    };
    let flapped = matches!((first_below, stays), (Some(a), Some(b)) if a < b)
        || (first_below.is_some() && stays.is_none());
    (stays, flapped)
}

fn window_energies(record: &TrajectoryRecord, window: f64) -> Vec<f64> {
    let dt = record.dt();
    (0..)
        .map(|m| ((m as f64 * window) / dt).round() as usize)
        .take_while(|&k| k < record.energies.len())
        .map(|k| record.energies[k].script_em)
        .collect()
}

/// Runs every initial datum to `horizon`, detects entry into a common ball
/// and fits the window-to-window contraction of `𝓔_M`.
///
/// The candidate radius starts at twice the largest `Ê` seen over the last
/// window of any run. A candidate is rejected and doubled when a run dips
/// below it and comes back out, or enters less than one window before the
/// horizon.
pub fn absorbing_ball_experiment(
    family: &[PlateState],
    params: &PhysicsParams,
    law: &DampingLaw,
    cfg: &StepperConfig,
    horizon: f64,
    options: AbsorbingOptions,
) -> Result<AbsorbingReport> {
    let Some(first) = family.first() else {
        return Err(Error::InvalidParameter("empty initial family".into()));
    };
    let mesh = first.mesh();
    require_hinged(mesh.configuration(), mesh.dim())?;
    let check = verify_damping_assumption(law, DEFAULT_SAMPLE_RANGE, DEFAULT_SAMPLES)?;
    if !check.passed {
        return Err(Error::InvalidParameter(format!(
            "damping law {} fails {:?}",
            law.name(),
            check.failed_checks()
        )));
    }
    let stepper = Stepper::new(mesh, params.clone(), law.clone(), *cfg)?;
    let window = match options.window {
        Some(t) if t > 0.0 => t,
        Some(t) => {
            return Err(Error::InvalidParameter(format!(
                "window must be positive, got {t}"
            )))
        }
        None => default_window(&stepper)?,
    };
    if window > horizon {
        return Err(Error::InvalidParameter(format!(
            "window {window} exceeds horizon {horizon}"
        )));
    }
    let pool = worker_pool()?;
    let records: Vec<TrajectoryRecord> = pool.install(|| {
        family
            .par_iter()
            .map(|initial| run_with(&stepper, initial, horizon, options.record_stride))
            .collect::<Result<Vec<_>>>()
    })?;

    let hats: Vec<Vec<f64>> = records
        .iter()
        .map(|r| r.energies.iter().map(|e| e.hat_e).collect())
        .collect();
    let steps_per_window = (window / cfg.dt).round() as usize;
    let tail_sup = hats
        .iter()
        .map(|h| {
            h[h.len().saturating_sub(steps_per_window + 1)..]
                .iter()
                .copied()
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    let mut radius = 2.0 * tail_sup;
    let mut rejected = Vec::new();
    let mut entries;
    loop {
        entries = Vec::with_capacity(hats.len());
        let mut ok = true;
        for (h, record) in hats.iter().zip(&records) {
            let (stays, flapped) = entry(h, radius);
            let late = match stays {
                Some(k) => record.times.last().unwrap() - record.times[k] < window - 1e-9,
                None => true,
            };
            if flapped || late {
                ok = false;
            }
            entries.push(stays);
        }
        if ok || radius == 0.0 {
            break;
        }
        rejected.push(radius);
        if rejected.len() >= options.max_rejections {
            break;
        }
        radius *= 2.0;
    }

    let mut ball = 0.0f64;
    let runs = records
        .iter()
        .zip(&hats)
        .zip(&entries)
        .map(|((record, hat), &stays)| {
            let post = stays.map(|k| hat[k..].iter().copied().fold(0.0, f64::max));
            if let Some(p) = post {
                ball = ball.max(p);
            }
            let series = window_energies(record, window);
            let raw_fit = fit_contraction(&series).ok();
            let fit = raw_fit.filter(|f| f.residual < options.fit_threshold);
            RunSummary {
                initial_hat_e: hat[0],
                entry_time: stays.map(|k| record.times[k]),
                post_entry_sup: post,
                window_energies: series,
                contraction_detected: fit.is_some_and(|f| f.eta > 0.0 && f.eta < 1.0),
                fit,
                raw_fit,
                failure: record.failure.as_ref().map(|f| f.message.clone()),
            }
        })
        .collect();
    Ok(AbsorbingReport {
        window,
        horizon,
        runs,
        candidate_radius: radius,
        rejected_radii: rejected,
        ball_radius: ball,
    })
}
