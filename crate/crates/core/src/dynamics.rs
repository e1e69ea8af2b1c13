//! Implicit-midpoint time stepping for the hinged and cantilever problems.
//!
//! With `w = uⁿ⁺¹` one step solves
//!
//! ```text
//! [I + ¼dt²(K_B + γK_L) - ½dt·B] w
//!     = uⁿ + dt·vⁿ - ¼dt²(K_B + γK_L)uⁿ - ½dt·B uⁿ + ½dt²·R(w)
//! vⁿ⁺¹ = 2(w - uⁿ)/dt - vⁿ
//! ```
//!
//! where `K_B`, `K_L` are the assembled biharmonic and Laplacian, `B` the
//! constant-slope part of the boundary feedback and `R` collects the load,
//! the Berger term `Ĝ·K_L(uⁿ + w)/2` with `Ĝ = ½(‖∇uⁿ‖² + ‖∇w‖²)`, and the
//! nonlinear remainder of the boundary feedback evaluated at the midpoint
//! velocity `(w - uⁿ)/dt`. `R` is resolved by Picard iteration; the matrix
//! is factored once per stepper.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::banded::{BandedLu, BandedMatrix};
use crate::damping::{septic_boundary_damping, DampingLaw};
use crate::energetics::{compute_energies, potential_bound_m_with, EnergyReport};
use crate::error::{Error, Result};
use crate::field::{Closure, EdgeClosure, Field};
use crate::geometry::{Configuration, Mesh, Segment};
use crate::operators::{
    edge_gradient_norm_sq, gradient_norm_sq, normal_derivative_trace, smallest_eigenvalue_with,
    DiscreteSystem, EigenOptions, PhysicsParams,
};

/// Displacement, velocity and time. `u` carries ghosts closed with the
/// boundary feedback of `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateState {
    pub u: Field,
    pub v: Field,
    pub t: f64,
}

impl PlateState {
    pub fn zero(mesh: &Arc<Mesh>) -> Self {
        Self {
            u: Field::zeros(mesh),
            v: Field::zeros(mesh),
            t: 0.0,
        }
    }

    /// Sample initial data. Essential boundary values are imposed later by
    /// [`Stepper::prepare`].
    pub fn from_fns(
        mesh: &Arc<Mesh>,
        u0: impl Fn([f64; 2]) -> f64,
        v0: impl Fn([f64; 2]) -> f64,
    ) -> Self {
        Self {
            u: Field::from_fn(mesh, u0),
            v: Field::from_fn(mesh, v0),
            t: 0.0,
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.u.mesh()
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite() && self.t.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    MidpointImplicit,
}

pub const DEFAULT_PICARD_ITERATIONS: usize = 8;
pub const DEFAULT_PICARD_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperConfig {
    pub dt: f64,
    #[serde(default = "default_picard_iterations")]
    pub picard_iterations: usize,
    #[serde(default = "default_picard_tolerance")]
    pub picard_tolerance: f64,
    #[serde(default)]
    pub scheme: Scheme,
    /// Drop the Berger term and all boundary damping.
    #[serde(default)]
    pub linearized: bool,
}

fn default_picard_iterations() -> usize {
    DEFAULT_PICARD_ITERATIONS
}

fn default_picard_tolerance() -> f64 {
    DEFAULT_PICARD_TOLERANCE
}

impl StepperConfig {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            picard_iterations: DEFAULT_PICARD_ITERATIONS,
            picard_tolerance: DEFAULT_PICARD_TOLERANCE,
            scheme: Scheme::MidpointImplicit,
            linearized: false,
        }
    }

    pub fn linearized(mut self) -> Self {
        self.linearized = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.picard_iterations == 0 {
            return Err(Error::InvalidParameter(
                "picard_iterations must be >= 1".into(),
            ));
        }
        if !(self.picard_tolerance > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "picard_tolerance must be positive, got {}",
                self.picard_tolerance
            )));
        }
        Ok(())
    }
}

/// A hinged boundary node that carries a bending moment, with the two
/// inward neighbours used by the one-sided normal derivative.
#[derive(Debug, Clone, Copy)]
struct MomentNode {
    first: usize,
    second: usize,
    h: f64,
}

#[derive(Debug, Clone)]
enum Feedback {
    /// `Δu = -D(∂ν v)` on every hinged edge.
    Moments {
        law: DampingLaw,
        slope: f64,
        nodes: Vec<MomentNode>,
    },
    /// `∂ν uₓₓ - μ₁u = |v|⁶v` at the free end. `response` is the solution
    /// of the step matrix against the unit vector of the free end, so the
    /// scalar nonlinearity can be solved exactly inside each Picard sweep.
    Shear {
        slot: usize,
        h: f64,
        response: Vec<f64>,
    },
}

/// Per-step outcome with Picard diagnostics.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: PlateState,
    pub picard_iterations: usize,
    /// Scaled max-norm change of the last Picard update.
    pub picard_residual: f64,
    /// Residual after each Picard update.
    pub picard_history: Vec<f64>,
}

/// Boundary integrands at one instant.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPower {
    /// `∮D(∂ν v)∂ν v` (hinged) or `|v|⁸` at the free end.
    pub dissipation: f64,
    /// `(γ - ‖∇u‖²)(∂ν u)v` at the free end; zero for hinged problems.
    pub non_dissipative: f64,
}

/// Factored time stepper for one mesh, parameter set, law and step size.
#[derive(Debug, Clone)]
pub struct Stepper {
    system: DiscreteSystem,
    params: PhysicsParams,
    cfg: StepperConfig,
    feedback: Feedback,
    law_name: String,
    stiffness: BandedMatrix,
    stabilization: Vec<(usize, [(usize, f64); 2])>,
    lu: BandedLu,
    load: Vec<f64>,
}

impl Stepper {
    /// `law` is the hinged damping law; the cantilever uses the septic
    /// shear feedback and ignores it.
    pub fn new(
        mesh: &Arc<Mesh>,
        params: PhysicsParams,
        law: DampingLaw,
        cfg: StepperConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        params.validate()?;
        params.check_mesh(mesh)?;
        let system = DiscreteSystem::new(mesh, params.mu1)?;
        let n = system.len();
        let bw = system.bandwidth();
        let dt = cfg.dt;
        let law_name;
        let feedback = match mesh.configuration() {
            Configuration::Fcd1d => {
                law_name = "septic".to_string();
                let last = mesh.nx() - 1;
                Feedback::Shear {
                    slot: system
                        .slot(mesh.index(last, 0))
                        .expect("free end is an unknown"),
                    h: mesh.spacing()[0],
                    response: Vec::new(),
                }
            }
            _ => {
                law_name = law.name().to_string();
                let mut nodes = Vec::new();
                for &segment in mesh.segments() {
                    let seg_nodes = mesh.segment_nodes(segment)?;
                    let last = seg_nodes.len() - 1;
                    for (index, &(i, j)) in seg_nodes.iter().enumerate() {
                        if mesh.dim() == 2 && (index == 0 || index == last) {
                            continue;
                        }
                        let step = |k: isize| {
                            let (a, b) = mesh.step_normal(segment, i as isize, j as isize, k);
                            system
                                .slot(mesh.index(a as usize, b as usize))
                                .expect("inward neighbours of a hinged edge are unknowns")
                        };
                        nodes.push(MomentNode {
                            first: step(-1),
                            second: step(-2),
                            h: mesh.normal_spacing(segment),
                        });
                    }
                }
                let slope = if cfg.linearized {
                    0.0
                } else {
                    law.implicit_slope()
                };
                Feedback::Moments { law, slope, nodes }
            }
        };
        let stiffness = system.bending().add_scaled(params.gamma, system.laplace());
        let mut matrix = BandedMatrix::identity(n, bw, bw).add_scaled(0.25 * dt * dt, &stiffness);
        let mut stabilization = Vec::new();
        if let Feedback::Moments { slope, nodes, .. } = &feedback {
            if *slope != 0.0 {
                // B = Σ (k/h²) e_q S_bᵀ with S_b v = (-4v_q + v_q2)/(2h).
                for node in nodes {
                    let scale = slope / (node.h * node.h);
                    let row = [
                        (node.first, -4.0 * scale / (2.0 * node.h)),
                        (node.second, scale / (2.0 * node.h)),
                    ];
                    for (c, value) in row {
                        matrix.add(node.first, c, -0.5 * dt * value);
                    }
                    stabilization.push((node.first, row));
                }
            }
        }
        let lu = matrix.factor()?;
        let mut feedback = feedback;
        if let Feedback::Shear { slot, response, .. } = &mut feedback {
            let mut unit = vec![0.0; n];
            unit[*slot] = 1.0;
            *response = lu.solve(&unit);
        }
        let load = system.gather_slice(&params.load);
        Ok(Self {
            system,
            params,
            cfg,
            feedback,
            law_name,
            stiffness,
            stabilization,
            lu,
            load,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.system.mesh()
    }

    pub fn system(&self) -> &DiscreteSystem {
        &self.system
    }

    pub fn params(&self) -> &PhysicsParams {
        &self.params
    }

    pub fn config(&self) -> &StepperConfig {
        &self.cfg
    }

    pub fn law_name(&self) -> &str {
        &self.law_name
    }

    pub fn configuration(&self) -> Configuration {
        self.mesh().configuration()
    }

    fn apply_stabilization(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for (row, entries) in &self.stabilization {
            for &(c, value) in entries {
                out[*row] += value * x[c];
            }
        }
        out
    }

    /// Nonlinear part of the boundary forcing on the unknowns, evaluated at
    /// velocity `v` (unknown vector), with the implicit constant slope
    /// removed. Enters the right side with a plus sign.
    fn boundary_remainder(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        if self.cfg.linearized {
            return out;
        }
        match &self.feedback {
            Feedback::Moments { law, slope, nodes } => {
                if law.is_zero() {
                    return out;
                }
                for node in nodes {
                    let sigma = (-4.0 * v[node.first] + v[node.second]) / (2.0 * node.h);
                    let remainder = law.value(sigma) - slope * sigma;
                    out[node.first] += remainder / (node.h * node.h);
                }
            }
            Feedback::Shear { .. } => {}
        }
        out
    }

    /// Ghost closure of `u` carrying the feedback of velocity `v`.
    pub fn closure_for(&self, v: &Field) -> Result<Closure> {
        let mesh = self.mesh();
        let mut closure = self.system.homogeneous_closure();
        if self.cfg.linearized {
            return Ok(closure);
        }
        match &self.feedback {
            Feedback::Moments { law, .. } => {
                for (segment, edge) in closure.edges.iter_mut() {
                    let trace = normal_derivative_trace(v, *segment)?;
                    let interior_edge = mesh.dim() == 2;
                    let last = trace.len() - 1;
                    let moments = trace
                        .iter()
                        .enumerate()
                        .map(|(k, &s)| {
                            if interior_edge && (k == 0 || k == last) {
                                0.0
                            } else {
                                -law.value(s)
                            }
                        })
                        .collect();
                    *edge = EdgeClosure::Hinged { moments };
                }
            }
            Feedback::Shear { .. } => {
                let last = mesh.nx() - 1;
                let shear = septic_boundary_damping(v.get(last, 0));
                for (segment, edge) in closure.edges.iter_mut() {
                    if *segment == Segment::Right {
                        *edge = EdgeClosure::Free {
                            mu1: self.params.mu1,
                            shear,
                        };
                    }
                }
            }
        }
        Ok(closure)
    }

    /// Impose essential boundary values and close the ghosts of `u`.
    pub fn prepare(&self, state: &PlateState) -> Result<PlateState> {
        if **state.mesh() != **self.mesh() || !state.v.same_mesh(&state.u) {
            return Err(Error::MeshMismatch);
        }
        let u = self.system.scatter(&self.system.gather(&state.u));
        let v = self.system.scatter(&self.system.gather(&state.v));
        self.finish(u, v, state.t)
    }

    fn finish(&self, u: Field, v: Field, t: f64) -> Result<PlateState> {
        let closure = self.closure_for(&v)?;
        let u = u.closed(&closure)?;
        let v = v.closed(&self.system.homogeneous_closure())?;
        Ok(PlateState { u, v, t })
    }

    /// One implicit-midpoint step.
    pub fn step(&self, state: &PlateState) -> Result<StepOutcome> {
        let dt = self.cfg.dt;
        let x = self.system.gather(&state.u);
        let y = self.system.gather(&state.v);
        let kx = self.stiffness.mul_vec(&x);
        let bx = self.apply_stabilization(&x);
        let base: Vec<f64> = (0..x.len())
            .map(|k| x[k] + dt * y[k] - 0.25 * dt * dt * kx[k] - 0.5 * dt * bx[k])
            .collect();
        let berger = !self.cfg.linearized;
        let g_old = if berger {
            edge_gradient_norm_sq(&state.u)
        } else {
            0.0
        };
        let scale = y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let t_next = state.t + dt;

        let mut w: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + dt * b).collect();
        let mut history = Vec::new();
        let cap = if self.cfg.linearized {
            1
        } else {
            self.cfg.picard_iterations.max(2)
        };
        let mut converged = false;
        for _ in 0..cap {
            let mut rhs = base.clone();
            let half = 0.5 * dt * dt;
            for (r, p) in rhs.iter_mut().zip(&self.load) {
                *r += half * p;
            }
            if berger {
                let g_new = edge_gradient_norm_sq(&self.system.scatter(&w));
                let g_hat = 0.5 * (g_old + g_new);
                let mid: Vec<f64> = x.iter().zip(&w).map(|(a, b)| 0.5 * (a + b)).collect();
                let lap_mid = self.system.laplace().mul_vec(&mid);
                let v_mid: Vec<f64> = x.iter().zip(&w).map(|(a, b)| (b - a) / dt).collect();
                let remainder = self.boundary_remainder(&v_mid);
                for k in 0..rhs.len() {
                    rhs[k] += half * (g_hat * lap_mid[k] + remainder[k]);
                }
            }
            self.lu.solve_in_place(&mut rhs);
            if berger {
                self.resolve_shear(&mut rhs, &x, t_next)?;
            }
            if rhs.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { time: t_next });
            }
            let change = rhs
                .iter()
                .zip(&w)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
                / dt;
            let residual = change / scale;
            history.push(residual);
            w = rhs;
            if self.cfg.linearized || residual <= self.cfg.picard_tolerance {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::PicardNonConvergence {
                time: t_next,
                iterations: history.len(),
                residual: *history.last().unwrap_or(&f64::NAN),
            });
        }
        let v_new: Vec<f64> = (0..w.len())
            .map(|k| 2.0 * (w[k] - x[k]) / dt - y[k])
            .collect();
        let state = self.finish(self.system.scatter(&w), self.system.scatter(&v_new), t_next)?;
        Ok(StepOutcome {
            state,
            picard_iterations: history.len(),
            picard_residual: *history.last().unwrap(),
            picard_history: history,
        })
    }

    /// Adds the free-end shear `-2|v|⁶v/h` at the midpoint velocity,
    /// solving the scalar equation for the free-end displacement exactly.
    fn resolve_shear(&self, w: &mut [f64], x: &[f64], time: f64) -> Result<()> {
        let Feedback::Shear { slot, h, response } = &self.feedback else {
            return Ok(());
        };
        let dt = self.cfg.dt;
        let gain = dt * dt / h * response[*slot];
        let (a, x_end) = (w[*slot], x[*slot]);
        // s + gain·g((s - x)/dt) = a, increasing in s.
        let residual = |s: f64| s - a + gain * septic_boundary_damping((s - x_end) / dt);
        let slope = |s: f64| {
            1.0 + gain / dt * crate::damping::septic_boundary_damping_derivative((s - x_end) / dt)
        };
        let s = solve_increasing(residual, slope, a).ok_or(Error::NonFinite { time })?;
        let force = -dt * dt / h * septic_boundary_damping((s - x_end) / dt);
        for (wk, zk) in w.iter_mut().zip(response) {
            *wk += force * zk;
        }
        w[*slot] = s;
        Ok(())
    }

    /// Boundary integrands of the energy identity at `state`.
    pub fn boundary_power(&self, state: &PlateState) -> Result<BoundaryPower> {
        let mesh = self.mesh();
        if self.cfg.linearized {
            return Ok(BoundaryPower::default());
        }
        match &self.feedback {
            Feedback::Moments { law, .. } => {
                let mut dissipation = 0.0;
                for &segment in mesh.segments() {
                    let trace = normal_derivative_trace(&state.v, segment)?;
                    let weights = mesh.segment_weights(segment)?;
                    for (s, w) in trace.into_iter().zip(weights) {
                        dissipation += w * law.value(s) * s;
                    }
                }
                Ok(BoundaryPower {
                    dissipation,
                    non_dissipative: 0.0,
                })
            }
            Feedback::Shear { .. } => {
                let last = mesh.nx() - 1;
                let v_end = state.v.get(last, 0);
                let du = normal_derivative_trace(&state.u, Segment::Right)?[0];
                let coefficient = self.params.gamma - gradient_norm_sq(&state.u);
                Ok(BoundaryPower {
                    dissipation: v_end * septic_boundary_damping(v_end),
                    non_dissipative: coefficient * du * v_end,
                })
            }
        }
    }

    /// `M` of the potential bound for this stepper's parameters.
    pub fn potential_offset(&self, epsilon: f64) -> Result<f64> {
        let load = self.params.load_norm_sq(self.mesh());
        let lambda = if load > 0.0 {
            smallest_eigenvalue_with(&self.system, EigenOptions::default())?
        } else {
            f64::INFINITY
        };
        potential_bound_m_with(&self.params, epsilon, self.mesh(), lambda)
    }

    pub fn energies(&self, state: &PlateState, potential_offset: f64) -> Result<EnergyReport> {
        compute_energies(state, &self.params, potential_offset)
    }
}

/// Root of an increasing scalar function by Newton steps kept inside a
/// shrinking bracket.
fn solve_increasing(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, guess: f64) -> Option<f64> {
    let f0 = f(guess);
    if f0 == 0.0 {
        return Some(guess);
    }
    let mut step = guess.abs().max(1e-12);
    let (mut lo, mut hi) = (guess, guess);
    if f0 > 0.0 {
        while f(lo) > 0.0 {
            lo -= step;
            step *= 2.0;
            if !lo.is_finite() {
                return None;
            }
        }
    } else {
        while f(hi) < 0.0 {
            hi += step;
            step *= 2.0;
            if !hi.is_finite() {
                return None;
            }
        }
    }
    let mut s = guess.clamp(lo, hi);
    for _ in 0..200 {
        let value = f(s);
        if value == 0.0 {
            return Some(s);
        }
        if value > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let newton = s - value / df(s);
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - s).abs() <= 4.0 * f64::EPSILON * s.abs().max(f64::MIN_POSITIVE)
            || hi - lo <= 4.0 * f64::EPSILON * hi.abs()
        {
            return Some(next);
        }
        s = next;
    }
    Some(s)
}

/// One step under hinged-dissipative conditions. Builds and factors a
/// [`Stepper`]; use one directly when stepping repeatedly.
pub fn step_hd(
    state: &PlateState,
    params: &PhysicsParams,
    law: &DampingLaw,
    cfg: &StepperConfig,
) -> Result<PlateState> {
    let mesh = state.mesh();
    if !mesh.configuration().is_hinged() {
        return Err(Error::WrongConfiguration {
            expected: if mesh.dim() == 2 {
                Configuration::Hd2d
            } else {
                Configuration::Hd1d
            },
            got: mesh.configuration(),
        });
    }
    let stepper = Stepper::new(mesh, params.clone(), law.clone(), *cfg)?;
    let prepared = stepper.prepare(state)?;
    Ok(stepper.step(&prepared)?.state)
}

/// One step of the clamped-free beam with septic shear feedback.
pub fn step_fcd_1d(
    state: &PlateState,
    params: &PhysicsParams,
    cfg: &StepperConfig,
) -> Result<PlateState> {
    let mesh = state.mesh();
    if mesh.configuration() != Configuration::Fcd1d {
        return Err(Error::WrongConfiguration {
            expected: Configuration::Fcd1d,
            got: mesh.configuration(),
        });
    }
    let stepper = Stepper::new(mesh, params.clone(), DampingLaw::zero(), *cfg)?;
    let prepared = stepper.prepare(state)?;
    Ok(stepper.step(&prepared)?.state)
}

/// Why a trajectory stopped early.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub time: f64,
    pub message: String,
}

/// Time series of one run. `energies[n]` and `boundary[n]` belong to
/// `times[n]`; `snapshots` are stored every `stride` steps.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub mesh: Arc<Mesh>,
    pub params: PhysicsParams,
    pub law: String,
    pub stepper: StepperConfig,
    /// `M` of the potential bound at `ε = ¼`, used for `𝓔_M`.
    pub potential_offset: f64,
    pub stride: usize,
    pub times: Vec<f64>,
    pub energies: Vec<EnergyReport>,
    pub boundary: Vec<BoundaryPower>,
    pub picard_iterations: Vec<usize>,
    pub snapshots: Vec<PlateState>,
    pub failure: Option<Failure>,
}

impl TrajectoryRecord {
    pub fn configuration(&self) -> Configuration {
        self.mesh.configuration()
    }

    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }

    pub fn dt(&self) -> f64 {
        self.stepper.dt
    }

    pub fn final_state(&self) -> Option<&PlateState> {
        self.snapshots.last()
    }

    /// Step index of time `t`, which must lie on the record's grid up to
    /// rounding.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let first = *self.times.first()?;
        let k = ((t - first) / self.stepper.dt).round();
        if k < 0.0 || k as usize >= self.times.len() {
            return None;
        }
        let k = k as usize;
        ((self.times[k] - t).abs() <= 1e-9 * (1.0 + t.abs())).then_some(k)
    }

    /// Step indices `(i, j)` of a window, validated against the record.
    pub fn window_indices(&self, window: (f64, f64)) -> Result<(usize, usize)> {
        let (s, t) = window;
        let (first, last) = (
            self.times.first().copied().unwrap_or(f64::NAN),
            self.times.last().copied().unwrap_or(f64::NAN),
        );
        let outside = Error::WindowOutsideRecord {
            start: s,
            end: t,
            first,
            last,
        };
        if !(s <= t) {
            return Err(outside);
        }
        match (self.index_of(s), self.index_of(t)) {
            (Some(i), Some(j)) => Ok((i, j)),
            _ => Err(outside),
        }
    }

    /// Snapshots whose times fall inside the window, in order.
    pub fn snapshots_in(&self, window: (f64, f64)) -> Result<Vec<&PlateState>> {
        self.window_indices(window)?;
        let tol = 1e-9 * (1.0 + window.1.abs());
        Ok(self
            .snapshots
            .iter()
            .filter(|s| s.t >= window.0 - tol && s.t <= window.1 + tol)
            .collect())
    }

    pub fn check_compatible(&self, other: &TrajectoryRecord) -> Result<()> {
        if *self.mesh != *other.mesh {
            return Err(Error::RecordMismatch("meshes differ".into()));
        }
        if self.params != other.params {
            return Err(Error::RecordMismatch("physical parameters differ".into()));
        }
        if self.law != other.law {
            return Err(Error::RecordMismatch(format!(
                "damping laws differ: {} vs {}",
                self.law, other.law
            )));
        }
        if self.stepper != other.stepper {
            return Err(Error::RecordMismatch(
                "stepper configurations differ".into(),
            ));
        }
        if self.stride != other.stride || self.times.len() != other.times.len() {
            return Err(Error::RecordMismatch("record layouts differ".into()));
        }
        Ok(())
    }
}

/// Integrate from `initial` for `horizon` time units, storing a snapshot
/// every `record_stride` steps. A failing step ends the run; the partial
/// record is returned with [`TrajectoryRecord::failure`] set.
pub fn run_trajectory(
    initial: &PlateState,
    horizon: f64,
    params: &PhysicsParams,
    law: &DampingLaw,
    cfg: &StepperConfig,
    record_stride: usize,
) -> Result<TrajectoryRecord> {
    let stepper = Stepper::new(initial.mesh(), params.clone(), law.clone(), *cfg)?;
    run_with(&stepper, initial, horizon, record_stride)
}

/// [`run_trajectory`] with a prebuilt stepper.
pub fn run_with(
    stepper: &Stepper,
    initial: &PlateState,
    horizon: f64,
    record_stride: usize,
) -> Result<TrajectoryRecord> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if record_stride == 0 {
        return Err(Error::InvalidParameter("record stride must be >= 1".into()));
    }
    let dt = stepper.config().dt;
    let steps = (horizon / dt - 1e-9).ceil().max(1.0) as usize;
    let offset = stepper.potential_offset(0.25)?;
    let mut state = stepper.prepare(initial)?;
    let t0 = state.t;
    let mut record = TrajectoryRecord {
        mesh: Arc::clone(stepper.mesh()),
        params: stepper.params().clone(),
        law: stepper.law_name().to_string(),
        stepper: *stepper.config(),
        potential_offset: offset,
        stride: record_stride,
        times: vec![t0],
        energies: vec![stepper.energies(&state, offset)?],
        boundary: vec![stepper.boundary_power(&state)?],
        picard_iterations: vec![0],
        snapshots: vec![state.clone()],
        failure: None,
    };
    for n in 1..=steps {
        let outcome = match stepper.step(&state) {
            Ok(outcome) => outcome,
            Err(err) => {
                record.failure = Some(Failure {
                    time: state.t + dt,
                    message: err.to_string(),
                });
                break;
            }
        };
        state = outcome.state;
        state.t = t0 + n as f64 * dt;
        let power = stepper.boundary_power(&state)?;
        let previous = *record.boundary.last().unwrap();
        let mut report = stepper.energies(&state, offset)?;
        let before = record.energies.last().unwrap().script_e;
        report.boundary_dissipation = 0.5 * dt * (previous.dissipation + power.dissipation);
        report.non_dissipative_term = 0.5 * dt * (previous.non_dissipative + power.non_dissipative);
        report.balance_residual =
            report.script_e - before + report.boundary_dissipation + report.non_dissipative_term;
        record.times.push(state.t);
        record.energies.push(report);
        record.boundary.push(power);
        record.picard_iterations.push(outcome.picard_iterations);
        if n % record_stride == 0 || n == steps {
            record.snapshots.push(state.clone());
        }
    }
    Ok(record)
}

#[cfg(test)]
mod tests;
