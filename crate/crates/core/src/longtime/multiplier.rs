use serde::{Deserialize, Serialize};

use crate::dynamics::{PlateState, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::geometry::{check_star_shaped, FluxField};
use crate::operators::{
    bilinear_a, gradient, gradient_norm_sq, inner, laplacian, norm_sq, normal_derivative_trace,
    second_normal_trace, tangential_derivative, PhysicsParams,
};

use super::{require_hinged, trapezoid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiplierIdentity {
    /// Multiplier `u`.
    Equipartition,
    /// Multiplier `h·∇u`.
    Flux,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub name: String,
    pub value: f64,
}

fn term(name: &str, value: f64) -> Term {
    Term {
        name: name.to_string(),
        value,
    }
}

/// Sizes of the second-order boundary traces `∂ννu` and `∂τ∂νu` over a window.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceNorms {
    pub normal_normal_sup: f64,
    pub tangential_normal_sup: f64,
    /// `L²(s,t; L²(Γ))` norms.
    pub normal_normal_l2: f64,
    pub tangential_normal_l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierAuditReport {
    pub identity: MultiplierIdentity,
    pub window: (f64, f64),
    pub lhs: Vec<Term>,
    pub rhs: Vec<Term>,
    pub lhs_total: f64,
    pub rhs_total: f64,
    pub residual: f64,
    pub boundary_trace_norms: TraceNorms,
    /// `-∫‖∇u‖²∮(h·ν)|∂νu|²`, flux identity only.
    pub dropped_term: Option<f64>,
    pub star_shaped: Option<bool>,
    /// Largest `|h·∇u - (h·ν)∂νu|` over boundary nodes and snapshots.
    pub flux_trace_defect: f64,
    pub warnings: Vec<String>,
}

impl MultiplierAuditReport {
    /// Dropped term is `≤ 0`, or not applicable.
    pub fn dropped_term_nonpositive(&self) -> bool {
        self.dropped_term.is_none_or(|d| d <= 0.0)
    }
}

/// Instantaneous integrands of both identities at one snapshot.
#[derive(Debug, Clone, Copy, Default)]
struct Integrands {
    bending: f64,
    gradient: f64,
    kinetic: f64,
    damping_pairing: f64,
    load_u: f64,
    velocity_u: f64,
    boundary_bending: f64,
    boundary_flux: f64,
    dropped: f64,
    load_flux: f64,
    velocity_flux: f64,
    nn_sup: f64,
    tn_sup: f64,
    nn_sq: f64,
    tn_sq: f64,
    flux_defect: f64,
}

fn integrands(
    state: &PlateState,
    params: &PhysicsParams,
    flux: Option<&FluxField>,
) -> Result<Integrands> {
    let mesh = state.mesh();
    let u = &state.u;
    u.require_layers(2)?;
    let lap = laplacian(u)?;
    let mut out = Integrands {
        bending: bilinear_a(u, u, params)?,
        gradient: gradient_norm_sq(u),
        kinetic: norm_sq(&state.v),
        load_u: inner(&params.load_field(mesh), u)?,
        velocity_u: inner(&state.v, u)?,
        ..Integrands::default()
    };
    let load = &params.load;
    let grads = flux.map(|_| gradient(u));
    if let (Some(flux), Some(grads)) = (flux, &grads) {
        let weights = mesh.area_weights();
        for n in 0..mesh.len() {
            let h = flux.at(n);
            let hg = h[0] * grads[n][0] + h[1] * grads[n][1];
            out.load_flux += weights[n] * load[n] * hg;
            out.velocity_flux += weights[n] * state.v.at(n) * hg;
        }
    }
    for &segment in mesh.segments() {
        let nodes = mesh.segment_nodes(segment)?;
        let weights = mesh.segment_weights(segment)?;
        let du = normal_derivative_trace(u, segment)?;
        let dnn = second_normal_trace(u, segment)?;
        let normal = segment.outward_normal();
        let along = 1 - segment.normal_axis();
        let (dtn, dtu) = if mesh.dim() == 2 {
            let ht = mesh.spacing()[along];
            let boundary_values: Vec<f64> = nodes.iter().map(|&(i, j)| u.get(i, j)).collect();
            (
                tangential_derivative(&du, ht),
                tangential_derivative(&boundary_values, ht),
            )
        } else {
            (vec![0.0; nodes.len()], vec![0.0; nodes.len()])
        };
        let dlap = normal_derivative_trace(&lap, segment)?;
        for (k, &(i, j)) in nodes.iter().enumerate() {
            let w = weights[k];
            let lap_b = lap.get(i, j);
            // Δu = -D(∂ν uₜ) on a hinged edge.
            out.damping_pairing += w * (-lap_b) * du[k];
            if w > 0.0 {
                out.nn_sup = out.nn_sup.max(dnn[k].abs());
                out.tn_sup = out.tn_sup.max(dtn[k].abs());
            }
            out.nn_sq += w * dnn[k] * dnn[k];
            out.tn_sq += w * dtn[k] * dtn[k];
            let Some(flux) = flux else { continue };
            let h = flux.at(mesh.index(i, j));
            let h_nu = h[0] * normal[0] + h[1] * normal[1];
            let h_along = if mesh.dim() == 2 { h[along] } else { 0.0 };
            let h_grad = h_nu * du[k] + h_along * dtu[k];
            out.flux_defect = out.flux_defect.max((h_grad - h_nu * du[k]).abs());
            let d_nu_flux = du[k] + h_nu * dnn[k] + h_along * dtn[k];
            out.boundary_bending +=
                w * (0.5 * lap_b * lap_b * h_nu + dlap[k] * h_grad - lap_b * d_nu_flux);
            out.boundary_flux += w * h_nu * du[k] * du[k];
        }
    }
    out.dropped = -out.gradient * out.boundary_flux;
    Ok(out)
}

/// Evaluates every term of the equipartition (`u`) or flux (`h·∇u`)
/// multiplier identity over `window` and reports `|lhs - rhs|`.
///
/// Equipartition:
/// `∫{‖Δu‖² + ‖∇u‖⁴ - ‖uₜ‖²} + ∫∮D(∂νuₜ)∂νu = -(uₜ,u)|ₛᵗ + ∫{(p,u) + γ‖∇u‖²}`.
///
/// Flux, in dimension `d` with `c = γ - ‖∇u‖²`:
/// `∫{(2-d/2)‖Δu‖² + (d/2)‖uₜ‖²} + ∫∮{½|Δu|²(h·ν) + ∂ν(Δu)(h·∇u) - Δu∂ν(h·∇u)}
///  + ∫c{½∮(h·ν)|∂νu|² - (1-d/2)‖∇u‖²} = -(uₜ,h·∇u)|ₛᵗ + ∫(p,h·∇u)`.
///
/// Time integrals use the trapezoid rule over the record's snapshots. The
/// damping values come from the closed ghosts, `D(∂νuₜ) = -Δu` on the edge.
pub fn multiplier_audit(
    record: &TrajectoryRecord,
    identity: MultiplierIdentity,
    flux: Option<&FluxField>,
    window: (f64, f64),
) -> Result<MultiplierAuditReport> {
    require_hinged(record.configuration(), record.mesh.dim())?;
    let snapshots = record.snapshots_in(window)?;
    if snapshots.len() < 2 && window.1 > window.0 {
        return Err(Error::InvalidParameter(
            "window holds fewer than two snapshots; lower the record stride".into(),
        ));
    }
    let mesh = &record.mesh;
    let params = &record.params;
    let mut warnings = Vec::new();
    let (flux, star_shaped) = match identity {
        MultiplierIdentity::Equipartition => (None, None),
        MultiplierIdentity::Flux => {
            let flux = flux.ok_or_else(|| {
                Error::InvalidParameter("flux identity needs a flux field".into())
            })?;
            if flux.values.len() != mesh.len() {
                return Err(Error::MeshMismatch);
            }
            let report = check_star_shaped(&mesh.domain_spec(), flux.anchor);
            if !report.satisfied {
                warnings.push(format!(
                    "anchor {:?} is not star-shaped for this domain (min (h·ν) = {:.3e})",
                    flux.anchor, report.min_over_boundary
                ));
            }
            (Some(flux), Some(report.satisfied))
        }
    };
    let values: Vec<Integrands> = snapshots
        .iter()
        .map(|s| integrands(s, params, flux))
        .collect::<Result<_>>()?;
    let times: Vec<f64> = snapshots.iter().map(|s| s.t).collect();
    let integral = |f: &dyn Fn(&Integrands) -> f64| {
        trapezoid(&times, &values.iter().map(f).collect::<Vec<_>>())
    };
    let first = values.first().copied().unwrap_or_default();
    let last = values.last().copied().unwrap_or_default();
    let gamma = params.gamma;
    let d = mesh.dim() as f64;

    let (lhs, rhs, dropped_term) = match identity {
        MultiplierIdentity::Equipartition => (
            vec![
                term("bending", integral(&|x| x.bending)),
                term("quartic", integral(&|x| x.gradient * x.gradient)),
                term("kinetic", -integral(&|x| x.kinetic)),
                term("boundary_damping", integral(&|x| x.damping_pairing)),
            ],
            vec![
                term("endpoint", -(last.velocity_u - first.velocity_u)),
                term("load", integral(&|x| x.load_u)),
                term("gamma", gamma * integral(&|x| x.gradient)),
            ],
            None,
        ),
        MultiplierIdentity::Flux => (
            vec![
                term("bending", (2.0 - 0.5 * d) * integral(&|x| x.bending)),
                term("kinetic", 0.5 * d * integral(&|x| x.kinetic)),
                term("boundary_bending", integral(&|x| x.boundary_bending)),
                term(
                    "berger_flux",
                    integral(&|x| {
                        (gamma - x.gradient)
                            * (0.5 * x.boundary_flux - (1.0 - 0.5 * d) * x.gradient)
                    }),
                ),
            ],
            vec![
                term("endpoint", -(last.velocity_flux - first.velocity_flux)),
                term("load", integral(&|x| x.load_flux)),
            ],
            Some(integral(&|x| x.dropped)),
        ),
    };
    let lhs_total: f64 = lhs.iter().map(|t| t.value).sum();
    let rhs_total: f64 = rhs.iter().map(|t| t.value).sum();
    let span = (window.1 - window.0).max(0.0);
    let trace = TraceNorms {
        normal_normal_sup: values.iter().map(|x| x.nn_sup).fold(0.0, f64::max),
        tangential_normal_sup: values.iter().map(|x| x.tn_sup).fold(0.0, f64::max),
        normal_normal_l2: if span > 0.0 {
            integral(&|x| x.nn_sq).sqrt()
        } else {
            0.0
        },
        tangential_normal_l2: if span > 0.0 {
            integral(&|x| x.tn_sq).sqrt()
        } else {
            0.0
        },
    };
    Ok(MultiplierAuditReport {
        identity,
        window,
        lhs,
        rhs,
        lhs_total,
        rhs_total,
        residual: (lhs_total - rhs_total).abs(),
        boundary_trace_norms: trace,
        dropped_term,
        star_shaped,
        flux_trace_defect: values.iter().map(|x| x.flux_defect).fold(0.0, f64::max),
        warnings,
    })
}
