use serde::{Deserialize, Serialize};

use crate::dynamics::{PlateState, TrajectoryRecord};
use crate::energetics::interpolation_proxy;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::operators::{
    bilinear_a, edge_gradient_norm_sq, laplacian, norm_sq, normal_derivative_trace, DiscreteSystem,
    PhysicsParams,
};

use super::{require_hinged, trapezoid};

/// Default `η` of the interpolation proxy `‖z‖^{2(1-θ)}a(z,z)^θ`, `θ = 1 - η/2`.
pub const DEFAULT_PROXY_ETA: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyInequality {
    pub epsilon: f64,
    pub eta: f64,
    /// Smallest `C` making `|∫ₜᵀ(𝓕(z),zₜ)| ≤ ε∫ₜᵀE_z + C·sup‖z‖²_{2-η}` hold
    /// for every start time `t` of the window.
    pub constant: f64,
    /// Smallest slack over start times with that constant.
    pub min_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferenceAudit {
    pub window: (f64, f64),
    pub times: Vec<f64>,
    /// `E_z = ½(a(z,z) + ‖zₜ‖²)` at every snapshot of the window.
    pub energy_z: Vec<f64>,
    /// `∫(𝓕(z), zₜ)`.
    pub lhs: f64,
    /// Bracket difference plus the two time integrals.
    pub rhs: f64,
    pub bracket_start: f64,
    pub bracket_end: f64,
    /// `-∫(‖∇u‖² - ‖∇w‖²)(Δw, zₜ)`.
    pub mixed_integral: f64,
    /// `∫(Δu, uₜ)‖∇z‖²`.
    pub transport_integral: f64,
    pub residual: f64,
    pub key_inequality: KeyInequality,
}

/// Per-snapshot pieces of the decomposition, all on the unknown vectors of
/// the hinged system so that `(Δ_h z, z) = -‖∇z‖²` holds exactly.
struct Pieces {
    lhs: f64,
    bracket: f64,
    mixed: f64,
    transport: f64,
    energy_z: f64,
    proxy: f64,
}

fn pieces(
    system: &DiscreteSystem,
    params: &PhysicsParams,
    u: &PlateState,
    w: &PlateState,
    eta: f64,
) -> Result<Pieces> {
    let lap = system.laplace();
    let (xu, vu) = (system.gather(&u.u), system.gather(&u.v));
    let (xw, vw) = (system.gather(&w.u), system.gather(&w.v));
    let z: Vec<f64> = xu.iter().zip(&xw).map(|(a, b)| a - b).collect();
    let zt: Vec<f64> = vu.iter().zip(&vw).map(|(a, b)| a - b).collect();
    let (lu, lw) = (lap.mul_vec(&xu), lap.mul_vec(&xw));
    let gu = edge_gradient_norm_sq(&u.u);
    let gw = edge_gradient_norm_sq(&w.u);
    let gz = edge_gradient_norm_sq(&system.scatter(&z));
    let gamma = params.gamma;
    let f: Vec<f64> = lu
        .iter()
        .zip(&lw)
        .map(|(a, b)| (gamma - gu) * a - (gamma - gw) * b)
        .collect();
    let dot = |a: &[f64], b: &[f64]| system.dot(a, b);
    let zf = u.u.combine(1.0, &w.u, -1.0)?;
    let ztf = u.v.combine(1.0, &w.v, -1.0)?;
    Ok(Pieces {
        lhs: dot(&f, &zt),
        bracket: dot(&f, &z) + 0.5 * gamma * gz - 0.5 * gu * gz + (gu - gw) * dot(&lw, &z),
        mixed: -(gu - gw) * dot(&lw, &zt),
        transport: dot(&lu, &vu) * gz,
        energy_z: 0.5 * (bilinear_a(&zf, &zf, params)? + norm_sq(&ztf)),
        proxy: interpolation_proxy(&zf, params, eta)?,
    })
}

fn paired<'a>(
    record_u: &'a TrajectoryRecord,
    record_w: &'a TrajectoryRecord,
    window: (f64, f64),
) -> Result<Vec<(&'a PlateState, &'a PlateState)>> {
    record_u.check_compatible(record_w)?;
    let a = record_u.snapshots_in(window)?;
    let b = record_w.snapshots_in(window)?;
    if a.len() != b.len()
        || a.iter()
            .zip(&b)
            .any(|(x, y)| (x.t - y.t).abs() > 1e-9 * (1.0 + x.t.abs()))
    {
        return Err(Error::RecordMismatch("snapshot times differ".into()));
    }
    Ok(a.into_iter().zip(b).collect())
}

/// Both sides of the decomposition of the Berger term for `z = u - w`:
///
/// ```text
/// ∫ₜᵀ(𝓕(z), zₜ) = [(𝓕(z),z) + ½γ‖∇z‖² - ½‖∇u‖²‖∇z‖² + (‖∇u‖² - ‖∇w‖²)(Δw,z)]ₜᵀ
///                 - ∫ₜᵀ(‖∇u‖² - ‖∇w‖²)(Δw,zₜ) + ∫ₜᵀ(Δu,uₜ)‖∇z‖²
/// ```
///
/// with `𝓕(z) = f(u) - f(w)`, `f(u) = (γ - ‖∇u‖²)Δu`, plus the slack of the
/// key inequality for the given `ε`.
pub fn difference_decomposition_audit(
    record_u: &TrajectoryRecord,
    record_w: &TrajectoryRecord,
    window: (f64, f64),
    epsilon: f64,
) -> Result<DifferenceAudit> {
    require_hinged(record_u.configuration(), record_u.mesh.dim())?;
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let pairs = paired(record_u, record_w, window)?;
    let system = DiscreteSystem::new(&record_u.mesh, record_u.params.mu1)?;
    let eta = DEFAULT_PROXY_ETA;
    let values: Vec<Pieces> = pairs
        .iter()
        .map(|(u, w)| pieces(&system, &record_u.params, u, w, eta))
        .collect::<Result<_>>()?;
    let times: Vec<f64> = pairs.iter().map(|(u, _)| u.t).collect();
    let series = |f: fn(&Pieces) -> f64| values.iter().map(f).collect::<Vec<f64>>();
    let lhs_series = series(|p| p.lhs);
    let energy = series(|p| p.energy_z);
    let proxy = series(|p| p.proxy);
    let lhs = trapezoid(&times, &lhs_series);
    let mixed = trapezoid(&times, &series(|p| p.mixed));
    let transport = trapezoid(&times, &series(|p| p.transport));
    let bracket_start = values.first().map_or(0.0, |p| p.bracket);
    let bracket_end = values.last().map_or(0.0, |p| p.bracket);
    let rhs = bracket_end - bracket_start + mixed + transport;

    // Tail integrals over [t_k, T] for every start k.
    let n = times.len();
    let mut tail_lhs = vec![0.0; n];
    let mut tail_energy = vec![0.0; n];
    let mut tail_sup = vec![0.0f64; n];
    for k in (0..n).rev() {
        if k + 1 < n {
            let dt = times[k + 1] - times[k];
            tail_lhs[k] = tail_lhs[k + 1] + 0.5 * dt * (lhs_series[k] + lhs_series[k + 1]);
            tail_energy[k] = tail_energy[k + 1] + 0.5 * dt * (energy[k] + energy[k + 1]);
            tail_sup[k] = tail_sup[k + 1].max(proxy[k]);
        } else {
            tail_sup[k] = proxy[k];
        }
    }
    let mut constant = 0.0f64;
    for k in 0..n {
        let need = tail_lhs[k].abs() - epsilon * tail_energy[k];
        if need > 0.0 && tail_sup[k] > 0.0 {
            constant = constant.max(need / tail_sup[k]);
        }
    }
    let min_slack = (0..n)
        .map(|k| epsilon * tail_energy[k] + constant * tail_sup[k] - tail_lhs[k].abs())
        .fold(f64::INFINITY, f64::min);
    Ok(DifferenceAudit {
        window,
        times,
        energy_z: energy,
        lhs,
        rhs,
        bracket_start,
        bracket_end,
        mixed_integral: mixed,
        transport_integral: transport,
        residual: (lhs - rhs).abs(),
        key_inequality: KeyInequality {
            epsilon,
            eta,
            constant,
            min_slack: if n == 0 { 0.0 } else { min_slack },
        },
    })
}

/// `E_z(t) = ½(a(z,z) + ‖zₜ‖²)` at every shared snapshot, `z = u - w`.
pub fn difference_energy_decay(
    record_u: &TrajectoryRecord,
    record_w: &TrajectoryRecord,
) -> Result<Vec<(f64, f64)>> {
    let first = record_u.times.first().copied().unwrap_or(0.0);
    let last = record_u.times.last().copied().unwrap_or(0.0);
    paired(record_u, record_w, (first, last))?
        .into_iter()
        .map(|(u, w)| {
            let z = u.u.combine(1.0, &w.u, -1.0)?;
            let zt = u.v.combine(1.0, &w.v, -1.0)?;
            Ok((
                u.t,
                0.5 * (bilinear_a(&z, &z, &record_u.params)? + norm_sq(&zt)),
            ))
        })
        .collect()
}

/// One-window check of the observability estimate
/// `(T - 2α)Ê(T) ≤ C·[Ê(0) + ‖D‖²∫Ê² + ‖D‖² + ‖∂νuₜ‖² + 1]`, where the
/// norms are `L²(0,T; L²(Γ))`. Reports the smallest `C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityReport {
    pub window: (f64, f64),
    pub alpha: f64,
    pub lhs: f64,
    pub initial_hat_e: f64,
    pub damping_sq: f64,
    pub trace_sq: f64,
    pub hat_e_sq_integral: f64,
    pub constant: f64,
}

pub fn observability_constant(
    record: &TrajectoryRecord,
    window: (f64, f64),
    alpha: Option<f64>,
) -> Result<ObservabilityReport> {
    require_hinged(record.configuration(), record.mesh.dim())?;
    let (i, j) = record.window_indices(window)?;
    let span = window.1 - window.0;
    let alpha = alpha.unwrap_or(span / 10.0);
    if !(alpha > 0.0 && alpha < 0.5 * span) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, T/2), got {alpha}"
        )));
    }
    let snapshots = record.snapshots_in(window)?;
    let mesh = &record.mesh;
    let mut times = Vec::new();
    let mut damping = Vec::new();
    let mut trace = Vec::new();
    for s in &snapshots {
        let lap = laplacian(&s.u)?;
        let (mut d2, mut t2) = (0.0, 0.0);
        for &segment in mesh.segments() {
            let nodes = mesh.segment_nodes(segment)?;
            let weights = mesh.segment_weights(segment)?;
            let sigma = normal_derivative_trace(&s.v, segment)?;
            for ((&(a, b), w), sg) in nodes.iter().zip(weights).zip(sigma) {
                let d = lap.get(a, b);
                d2 += w * d * d;
                t2 += w * sg * sg;
            }
        }
        times.push(s.t);
        damping.push(d2);
        trace.push(t2);
    }
    let hat: Vec<f64> = record.energies[i..=j].iter().map(|e| e.hat_e).collect();
    let hat_times = &record.times[i..=j];
    let hat_sq: Vec<f64> = hat.iter().map(|e| e * e).collect();
    let damping_sq = trapezoid(&times, &damping);
    let trace_sq = trapezoid(&times, &trace);
    let hat_e_sq_integral = trapezoid(hat_times, &hat_sq);
    let lhs = (span - 2.0 * alpha) * hat[hat.len() - 1];
    let base = hat[0] + damping_sq * hat_e_sq_integral + damping_sq + trace_sq + 1.0;
    Ok(ObservabilityReport {
        window,
        alpha,
        lhs,
        initial_hat_e: hat[0],
        damping_sq,
        trace_sq,
        hat_e_sq_integral,
        constant: lhs / base,
    })
}

/// [`observability_constant`] over consecutive windows of length `span`.
pub fn observability_constants(
    record: &TrajectoryRecord,
    span: f64,
) -> Result<Vec<ObservabilityReport>> {
    let first = record.times[0];
    let last = *record.times.last().unwrap();
    let steps = (span / record.dt()).round() as usize;
    if steps == 0 {
        return Err(Error::InvalidParameter(
            "window shorter than one step".into(),
        ));
    }
    let mut out = Vec::new();
    let mut k = 0;
    while k + steps < record.times.len() {
        let window = (record.times[k], record.times[k + steps]);
        if window.1 > last + 1e-9 || window.0 < first - 1e-9 {
            break;
        }
        out.push(observability_constant(record, window, None)?);
        k += steps;
    }
    Ok(out)
}

/// Energy-norm distance `(a(u,u) + ‖v‖²)^{1/2}` between two states.
pub fn energy_distance(a: &PlateState, b: &PlateState, params: &PhysicsParams) -> Result<f64> {
    let du: Field = a.u.combine(1.0, &b.u, -1.0)?;
    let dv = a.v.combine(1.0, &b.v, -1.0)?;
    Ok((bilinear_a(&du, &du, params)?.max(0.0) + norm_sq(&dv)).sqrt())
}

/// `sup_{a∈A} inf_{b∈B} ‖a - b‖` in the energy norm.
pub fn hausdorff_semidistance(
    a: &[&PlateState],
    b: &[&PlateState],
    params: &PhysicsParams,
) -> Result<f64> {
    if b.is_empty() {
        return Ok(if a.is_empty() { 0.0 } else { f64::INFINITY });
    }
    let mut sup = 0.0f64;
    for x in a {
        let mut inf = f64::INFINITY;
        for y in b {
            inf = inf.min(energy_distance(x, y, params)?);
        }
        sup = sup.max(inf);
    }
    Ok(sup)
}
