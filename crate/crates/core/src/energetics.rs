//! Energy functionals, balance audits and the potential-energy bound.
//!
//! ```text
//! E  = ½‖v‖² + ½a(u,u)
//! Π  = ¼(‖∇u‖⁴ - 2γ‖∇u‖² - 4(p,u))
//! 𝓔  = E + Π        Ê = E + ¼‖∇u‖⁴        𝓔_M = 𝓔 + M
//! ```
//!
//! `M` is the offset of the potential bound
//! `|½γ‖∇u‖² + (p,u)| ≤ ε[a(u,u) + ½‖∇u‖⁴] + M(ε)`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{PlateState, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::geometry::{Configuration, Mesh};
use crate::operators::{
    bilinear_a, dirichlet_laplace_eigenvalue, edge_gradient_norm_sq, gradient_norm_sq, inner,
    norm_sq, smallest_eigenvalue_with, DiscreteSystem, EigenOptions, PhysicsParams,
};

/// Energies of one state. The last three fields describe the step that
/// ended at `time` and are zero for an initial state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub time: f64,
    pub kinetic: f64,
    pub bending: f64,
    pub pi: f64,
    pub script_e: f64,
    pub hat_e: f64,
    pub script_em: f64,
    pub boundary_dissipation: f64,
    pub non_dissipative_term: f64,
    pub balance_residual: f64,
}

impl EnergyReport {
    pub const CSV_HEADER: &'static str = "time,kinetic,bending,pi,script_e,hat_e,script_em,boundary_dissipation,non_dissipative_term,balance_residual";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            self.time,
            self.kinetic,
            self.bending,
            self.pi,
            self.script_e,
            self.hat_e,
            self.script_em,
            self.boundary_dissipation,
            self.non_dissipative_term,
            self.balance_residual
        )
    }
}

/// `Π(u)` from `‖∇u‖²` and `(p, u)`.
pub fn potential_pi(gradient_sq: f64, gamma: f64, load_pairing: f64) -> f64 {
    0.25 * (gradient_sq * gradient_sq - 2.0 * gamma * gradient_sq - 4.0 * load_pairing)
}

/// All energies of `state`. `u` must have closed ghosts.
pub fn compute_energies(
    state: &PlateState,
    params: &PhysicsParams,
    potential_offset: f64,
) -> Result<EnergyReport> {
    let mesh = state.mesh();
    params.check_mesh(mesh)?;
    let kinetic = 0.5 * norm_sq(&state.v);
    let bending = 0.5 * bilinear_a(&state.u, &state.u, params)?;
    let g = gradient_norm_sq(&state.u);
    let pairing = inner(&params.load_field(mesh), &state.u)?;
    let pi = potential_pi(g, params.gamma, pairing);
    let script_e = kinetic + bending + pi;
    Ok(EnergyReport {
        time: state.t,
        kinetic,
        bending,
        pi,
        script_e,
        hat_e: kinetic + bending + 0.25 * g * g,
        script_em: script_e + potential_offset,
        ..EnergyReport::default()
    })
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    Ok(())
}

/// `M(ε) = γ²/(8ε) + ‖p‖²/(4ελ)` with `λ` the smallest eigenvalue of the
/// discrete biharmonic, so that `‖u‖² ≤ a(u,u)/λ`.
pub fn potential_bound_m(params: &PhysicsParams, epsilon: f64, mesh: &Arc<Mesh>) -> Result<f64> {
    check_epsilon(epsilon)?;
    params.check_mesh(mesh)?;
    let lambda = if params.load_norm_sq(mesh) > 0.0 {
        let system = DiscreteSystem::new(mesh, params.mu1)?;
        smallest_eigenvalue_with(&system, EigenOptions::default())?
    } else {
        f64::INFINITY
    };
    potential_bound_m_with(params, epsilon, mesh, lambda)
}

/// [`potential_bound_m`] with a precomputed eigenvalue.
pub fn potential_bound_m_with(
    params: &PhysicsParams,
    epsilon: f64,
    mesh: &Mesh,
    lambda: f64,
) -> Result<f64> {
    check_epsilon(epsilon)?;
    let gamma = params.gamma;
    let load = params.load_norm_sq(mesh);
    let mut m = gamma * gamma / (8.0 * epsilon);
    if load > 0.0 {
        m += load / (4.0 * epsilon * lambda);
    }
    Ok(m)
}

/// `c₀Ê - C ≤ 𝓔 ≤ c₁Ê + C` with `c₀ = ½`, `c₁ = 2`, `C = 2M(¼)`.
pub fn energetic_equivalence_holds(report: &EnergyReport, potential_offset_quarter: f64) -> bool {
    let c = 2.0 * potential_offset_quarter;
    let slack = 1e-12 * (1.0 + report.hat_e.abs() + c);
    report.script_e >= 0.5 * report.hat_e - c - slack
        && report.script_e <= 2.0 * report.hat_e + c + slack
}

/// Per-step and window sums of an energy balance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BalanceResidual {
    /// `𝓔(t) - 𝓔(s)` plus the accumulated boundary terms.
    pub residual: f64,
    /// Accumulated `∫(γ - ‖∇u‖²)(∂ν u)uₜ` at the free end; zero when hinged.
    pub non_dissipative_integral: f64,
    pub dissipation_integral: f64,
}

fn window_sum(record: &TrajectoryRecord, window: (f64, f64)) -> Result<BalanceResidual> {
    let (i, j) = record.window_indices(window)?;
    let mut out = BalanceResidual {
        residual: record.energies[j].script_e - record.energies[i].script_e,
        ..BalanceResidual::default()
    };
    for report in &record.energies[i + 1..=j] {
        out.dissipation_integral += report.boundary_dissipation;
        out.non_dissipative_integral += report.non_dissipative_term;
    }
    out.residual += out.dissipation_integral + out.non_dissipative_integral;
    Ok(out)
}

/// `𝓔(t) + ∫ₛᵗ∮D(∂ν uₜ)∂ν uₜ - 𝓔(s)` on a hinged record.
pub fn energy_balance_residual_hd(
    record: &TrajectoryRecord,
    law: &crate::damping::DampingLaw,
    window: (f64, f64),
) -> Result<f64> {
    let configuration = record.configuration();
    if !configuration.is_hinged() {
        return Err(Error::WrongConfiguration {
            expected: if record.mesh.dim() == 2 {
                Configuration::Hd2d
            } else {
                Configuration::Hd1d
            },
            got: configuration,
        });
    }
    let expected = if record.stepper.linearized {
        record.law.as_str()
    } else {
        law.name()
    };
    if record.law != expected {
        return Err(Error::RecordMismatch(format!(
            "record was run with law {}, audit asked for {}",
            record.law,
            law.name()
        )));
    }
    Ok(window_sum(record, window)?.residual)
}

/// `𝓔(t) + ∫|uₜ|⁸ + ∫(γ - ‖∇u‖²)(∂ν u)uₜ - 𝓔(s)` at the free end of a
/// cantilever record, with the non-dissipative integral reported on its own.
pub fn energy_balance_residual_fcd(
    record: &TrajectoryRecord,
    window: (f64, f64),
) -> Result<BalanceResidual> {
    if record.configuration() != Configuration::Fcd1d {
        return Err(Error::WrongConfiguration {
            expected: Configuration::Fcd1d,
            got: record.configuration(),
        });
    }
    window_sum(record, window)
}

/// `true` if every snapshot energy of the record satisfies the energetic
/// equivalence with its own `M(¼)`.
pub fn equivalence_on_record(record: &TrajectoryRecord) -> bool {
    record
        .energies
        .iter()
        .all(|r| energetic_equivalence_holds(r, record.potential_offset))
}

/// Smooth random states compatible with the essential boundary conditions.
#[derive(Debug, Clone)]
pub struct RandomStates {
    mesh: Arc<Mesh>,
    system: DiscreteSystem,
    rng: ChaCha8Rng,
    modes: usize,
}

impl RandomStates {
    pub fn new(mesh: &Arc<Mesh>, mu1: f64, seed: u64) -> Result<Self> {
        Ok(Self {
            mesh: Arc::clone(mesh),
            system: DiscreteSystem::new(mesh, mu1)?,
            rng: ChaCha8Rng::seed_from_u64(seed),
            modes: 4,
        })
    }

    pub fn system(&self) -> &DiscreteSystem {
        &self.system
    }

    /// A few low modes with random amplitudes and an overall scale spread
    /// over five decades. Ghosts use the homogeneous closure.
    pub fn sample(&mut self) -> Result<Field> {
        let modes = self.modes;
        let amps: Vec<f64> = (0..modes * modes)
            .map(|_| self.rng.gen_range(-1.0..1.0))
            .collect();
        let scale = 10f64.powf(self.rng.gen_range(-3.0..2.0));
        let [lx, ly] = self.mesh.extents();
        let pi = std::f64::consts::PI;
        let field = match self.mesh.configuration() {
            Configuration::Fcd1d => Field::from_fn(&self.mesh, |[x, _]| {
                (0..modes)
                    .map(|k| amps[k] * (1.0 - ((k + 1) as f64 * pi * x / (2.0 * lx)).cos()))
                    .sum::<f64>()
                    * scale
            }),
            Configuration::Hd1d => Field::from_fn(&self.mesh, |[x, _]| {
                (0..modes)
                    .map(|k| amps[k] * ((k + 1) as f64 * pi * x / lx).sin())
                    .sum::<f64>()
                    * scale
            }),
            Configuration::Hd2d => Field::from_fn(&self.mesh, |[x, y]| {
                let mut s = 0.0;
                for a in 0..modes {
                    for b in 0..modes {
                        s += amps[a * modes + b] / ((a + b + 1) as f64)
                            * ((a + 1) as f64 * pi * x / lx).sin()
                            * ((b + 1) as f64 * pi * y / ly).sin();
                    }
                }
                s * scale
            }),
        };
        self.system
            .scatter(&self.system.gather(&field))
            .closed(&self.system.homogeneous_closure())
    }
}

/// Outcome of a randomized inequality audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundAudit {
    pub epsilon: f64,
    pub offset: f64,
    pub samples: usize,
    pub violations: usize,
    /// Largest `lhs / rhs` seen.
    pub worst_ratio: f64,
}

/// Checks `|½γ‖∇u‖² + (p,u)| ≤ ε[a(u,u) + ½‖∇u‖⁴] + M(ε)` on random states.
pub fn audit_potential_bound(
    mesh: &Arc<Mesh>,
    params: &PhysicsParams,
    epsilon: f64,
    samples: usize,
    seed: u64,
) -> Result<BoundAudit> {
    let offset = potential_bound_m(params, epsilon, mesh)?;
    let mut states = RandomStates::new(mesh, params.mu1, seed)?;
    let load = params.load_field(mesh);
    let mut audit = BoundAudit {
        epsilon,
        offset,
        samples,
        violations: 0,
        worst_ratio: 0.0,
    };
    for _ in 0..samples {
        let u = states.sample()?;
        let g = gradient_norm_sq(&u);
        let lhs = (0.5 * params.gamma * g + inner(&load, &u)?).abs();
        let rhs = epsilon * (bilinear_a(&u, &u, params)? + 0.5 * g * g) + offset;
        record_sample(&mut audit, lhs, rhs);
    }
    Ok(audit)
}

fn record_sample(audit: &mut BoundAudit, lhs: f64, rhs: f64) {
    if lhs > rhs * (1.0 + 1e-12) + 1e-300 {
        audit.violations += 1;
    }
    if rhs > 0.0 {
        audit.worst_ratio = audit.worst_ratio.max(lhs / rhs);
    }
}

/// Interpolation proxy `‖u‖^{2(1-θ)}·a(u,u)^θ` for `‖u‖²_{2-η}`, `θ = 1 - η/2`.
pub fn interpolation_proxy(u: &Field, params: &PhysicsParams, eta: f64) -> Result<f64> {
    let theta = 1.0 - 0.5 * eta;
    let l2 = norm_sq(u);
    let a = bilinear_a(u, u, params)?.max(0.0);
    Ok(l2.powf(1.0 - theta) * a.powf(theta))
}

/// Offset of the lower-order bound on a hinged mesh:
/// `‖u‖^{2(1-θ)}a^θ ≤ εa + c‖u‖²` with `c = (1-θ)(θ/ε)^{θ/(1-θ)}`, then
/// `c‖u‖² ≤ c‖∇u‖²/λ ≤ ½ε‖∇u‖⁴ + c²/(2ελ²)` with `λ` the Dirichlet
/// eigenvalue of `-Δ_h` and the edge gradient norm.
pub fn lower_order_offset(system: &DiscreteSystem, epsilon: f64, eta: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    if !(eta > 0.0 && eta < 2.0) {
        return Err(Error::InvalidParameter(format!(
            "eta must lie in (0, 2), got {eta}"
        )));
    }
    let configuration = system.mesh().configuration();
    if !configuration.is_hinged() {
        return Err(Error::WrongConfiguration {
            expected: Configuration::Hd2d,
            got: configuration,
        });
    }
    let theta = 1.0 - 0.5 * eta;
    let c = (1.0 - theta) * (theta / epsilon).powf(theta / (1.0 - theta));
    let lambda = dirichlet_laplace_eigenvalue(system, EigenOptions::default())?;
    Ok(c * c / (2.0 * epsilon * lambda * lambda))
}

/// Randomized audit of `‖u‖²_{2-η} ≤ ε[a(u,u) + ½‖∇u‖⁴] + M(ε)` through the
/// interpolation proxy. Hinged meshes only.
pub fn audit_lower_order_bound(
    mesh: &Arc<Mesh>,
    params: &PhysicsParams,
    epsilon: f64,
    eta: f64,
    samples: usize,
    seed: u64,
) -> Result<BoundAudit> {
    let mut states = RandomStates::new(mesh, params.mu1, seed)?;
    let offset = lower_order_offset(states.system(), epsilon, eta)?;
    let mut audit = BoundAudit {
        epsilon,
        offset,
        samples,
        violations: 0,
        worst_ratio: 0.0,
    };
    for _ in 0..samples {
        let u = states.sample()?;
        let g = edge_gradient_norm_sq(&u);
        let lhs = interpolation_proxy(&u, params, eta)?;
        let rhs = epsilon * (bilinear_a(&u, &u, params)? + 0.5 * g * g) + offset;
        record_sample(&mut audit, lhs, rhs);
    }
    Ok(audit)
}

/// Checks the energetic equivalence on random position/velocity pairs.
pub fn audit_energetic_equivalence(
    mesh: &Arc<Mesh>,
    params: &PhysicsParams,
    samples: usize,
    seed: u64,
) -> Result<usize> {
    let offset = potential_bound_m(params, 0.25, mesh)?;
    let mut states = RandomStates::new(mesh, params.mu1, seed)?;
    let mut failures = 0;
    for _ in 0..samples {
        let u = states.sample()?;
        let v = states.sample()?;
        let report = compute_energies(&PlateState { u, v, t: 0.0 }, params, offset)?;
        if !energetic_equivalence_holds(&report, offset) {
            failures += 1;
        }
    }
    Ok(failures)
}
