use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::damping::{DampingLaw, LawSpec};
use crate::dynamics::{PlateState, StepperConfig};
use crate::error::{Error, Result};
use crate::geometry::{Configuration, DomainKind, DomainSpec, Mesh};
use crate::operators::PhysicsParams;

/// Nodes per axis when the document gives no resolution.
pub const DEFAULT_RESOLUTION: usize = 33;

/// Steps per period of the lowest mode used by the `dt` default.
pub const STEPS_PER_PERIOD: f64 = 200.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub kind: DomainKind,
    pub extents: Vec<f64>,
    /// Nodes per axis, boundary included.
    #[serde(default)]
    pub resolution: Option<Vec<usize>>,
}

/// Named analytic profile on `[0, Lx] × [0, Ly]`, written in coordinates
/// scaled to the unit box (`ξ = x/Lx`, `ζ = y/Ly`).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    /// `A sin(kx πξ) sin(ky πζ)`.
    Mode {
        amplitude: f64,
        #[serde(default = "one")]
        kx: u32,
        #[serde(default = "one")]
        ky: u32,
    },
    /// `A (sin πξ sin πζ)²`, flat at the hinged edges.
    Bump {
        amplitude: f64,
    },
    /// `A ξ ζ`.
    Ramp {
        amplitude: f64,
    },
    /// `A ξ²(6 - 4ξ + ξ²)/3`, moment- and shear-free at the tip of a beam.
    Tip {
        amplitude: f64,
    },
    /// Seeded combination of the first `modes` hinged modes with coefficients
    /// uniform in `[-A, A]` scaled by `2/(k² + l²)`. On a cantilever it is the
    /// tip shape with a seeded amplitude.
    Random {
        amplitude: f64,
        #[serde(default = "four")]
        modes: u32,
    },
}

fn one() -> u32 {
    1
}

fn four() -> u32 {
    4
}

impl Profile {
    fn validate(&self, name: &str) -> Result<()> {
        let finite = |a: f64| {
            if a.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name}: amplitude must be finite")))
            }
        };
        match *self {
            Profile::Zero => Ok(()),
            Profile::Constant { value } => finite(value),
            Profile::Mode { amplitude, kx, ky } => {
                if kx == 0 || ky == 0 {
                    return Err(Error::Config(format!("{name}: mode numbers must be >= 1")));
                }
                finite(amplitude)
            }
            Profile::Bump { amplitude }
            | Profile::Ramp { amplitude }
            | Profile::Tip { amplitude } => finite(amplitude),
            Profile::Random { amplitude, modes } => {
                if modes == 0 {
                    return Err(Error::Config(format!(
                        "{name}: random profile needs modes >= 1"
                    )));
                }
                finite(amplitude)
            }
        }
    }

    /// Evaluator on physical coordinates. `seed` only matters for
    /// [`Profile::Random`].
    pub fn evaluator(
        &self,
        extents: [f64; 2],
        configuration: Configuration,
        seed: u64,
    ) -> Box<dyn Fn([f64; 2]) -> f64 + Send + Sync> {
        let [lx, ly] = extents;
        let dim = if configuration == Configuration::Hd2d {
            2
        } else {
            1
        };
        let scale = move |[x, y]: [f64; 2]| (x / lx, if dim == 2 { y / ly } else { 0.5 });
        match *self {
            Profile::Zero => Box::new(|_| 0.0),
            Profile::Constant { value } => Box::new(move |_| value),
            Profile::Mode { amplitude, kx, ky } => Box::new(move |p| {
                let (s, t) = scale(p);
                let y_part = if dim == 2 {
                    (ky as f64 * PI * t).sin()
                } else {
                    1.0
                };
                amplitude * (kx as f64 * PI * s).sin() * y_part
            }),
            Profile::Bump { amplitude } => Box::new(move |p| {
                let (s, t) = scale(p);
                let y_part = if dim == 2 { (PI * t).sin() } else { 1.0 };
                amplitude * ((PI * s).sin() * y_part).powi(2)
            }),
            Profile::Ramp { amplitude } => Box::new(move |p| {
                let (s, t) = scale(p);
                amplitude * s * if dim == 2 { t } else { 1.0 }
            }),
            Profile::Tip { amplitude } => Box::new(move |p| {
                let (s, _) = scale(p);
                amplitude * s * s * (6.0 - 4.0 * s + s * s) / 3.0
            }),
            Profile::Random { amplitude, modes } if configuration == Configuration::Fcd1d => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let c: f64 = (0..modes)
                    .map(|k| rng.gen_range(-1.0..=1.0) / (k + 1) as f64)
                    .sum();
                Profile::Tip {
                    amplitude: amplitude * c,
                }
                .evaluator(extents, configuration, seed)
            }
            Profile::Random { amplitude, modes } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut terms = Vec::new();
                for k in 1..=modes {
                    let ly_modes = if dim == 2 { modes } else { 1 };
                    for l in 1..=ly_modes {
                        let c: f64 = rng.gen_range(-1.0..=1.0);
                        terms.push((
                            k as f64,
                            l as f64,
                            2.0 * amplitude * c / (k * k + l * l) as f64,
                        ));
                    }
                }
                Box::new(move |p| {
                    let (s, t) = scale(p);
                    terms
                        .iter()
                        .map(|&(k, l, c)| {
                            if dim == 2 {
                                c * (k * PI * s).sin() * (l * PI * t).sin()
                            } else {
                                c * (k * PI * s).sin()
                            }
                        })
                        .sum()
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "unit")]
    pub mu: f64,
    #[serde(default)]
    pub mu1: f64,
    #[serde(default)]
    pub load: Profile,
}

fn unit() -> f64 {
    1.0
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            gamma: 0.0,
            mu: 1.0,
            mu1: 0.0,
            load: Profile::Zero,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    #[serde(default)]
    pub displacement: Profile,
    #[serde(default)]
    pub velocity: Profile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperSection {
    /// Defaults to a 1-2-5 value below `period / 200` of the lowest mode.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_picard_iterations")]
    pub picard_iterations: usize,
    #[serde(default = "default_picard_tolerance")]
    pub picard_tolerance: f64,
    #[serde(default)]
    pub linearized: bool,
}

fn default_picard_iterations() -> usize {
    crate::dynamics::DEFAULT_PICARD_ITERATIONS
}

fn default_picard_tolerance() -> f64 {
    crate::dynamics::DEFAULT_PICARD_TOLERANCE
}

impl Default for StepperSection {
    fn default() -> Self {
        Self {
            dt: None,
            picard_iterations: default_picard_iterations(),
            picard_tolerance: default_picard_tolerance(),
            linearized: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    /// Number of equal windows the multiplier audits split the run into.
    #[serde(default = "one_usize")]
    pub windows: usize,
    /// Anchor `x₀` of the flux multiplier; the domain centre when absent.
    #[serde(default)]
    pub anchor: Option<[f64; 2]>,
    /// `ε` of the key inequality.
    #[serde(default = "half")]
    pub epsilon: f64,
}

fn one_usize() -> usize {
    1
}

fn half() -> f64 {
    0.5
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            windows: 1,
            anchor: None,
            epsilon: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsorbConfig {
    /// Target `Ê(0)` of each family member; the initial data give the shape.
    #[serde(default = "default_family")]
    pub energies: Vec<f64>,
    #[serde(default)]
    pub window: Option<f64>,
    #[serde(default = "default_fit_threshold")]
    pub fit_threshold: f64,
}

fn default_family() -> Vec<f64> {
    vec![1.0, 10.0, 100.0]
}

fn default_fit_threshold() -> f64 {
    0.05
}

impl Default for AbsorbConfig {
    fn default() -> Self {
        Self {
            energies: default_family(),
            window: None,
            fit_threshold: default_fit_threshold(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffConfig {
    /// Added to the primary initial data to form the second trajectory.
    #[serde(default = "default_perturbation")]
    pub perturbation: InitialData,
}

fn default_perturbation() -> InitialData {
    InitialData {
        displacement: Profile::Mode {
            amplitude: 0.01,
            kx: 3,
            ky: 2,
        },
        velocity: Profile::Zero,
    }
}

impl Default for DiffConfig {
    fn default() -> Self {
        Self {
            perturbation: default_perturbation(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    /// Levels of simultaneous `dt` and spacing halving, starting from the
    /// configured resolution and step.
    #[serde(default = "three")]
    pub levels: usize,
}

fn three() -> usize {
    3
}

impl Default for ConvergeConfig {
    fn default() -> Self {
        Self { levels: 3 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub audit: AuditConfig,
    #[serde(default)]
    pub absorb: AbsorbConfig,
    #[serde(default)]
    pub diff: DiffConfig,
    #[serde(default)]
    pub converge: ConvergeConfig,
}

/// A fully resolved run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Inferred from the domain kind (hinged) when absent.
    #[serde(default)]
    pub configuration: Option<Configuration>,
    pub domain: DomainConfig,
    #[serde(default)]
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub damping: LawSpec,
    #[serde(default)]
    pub stepper: StepperSection,
    pub horizon: f64,
    #[serde(default)]
    pub initial: InitialData,
    /// Steps between stored snapshots.
    #[serde(default = "one_usize")]
    pub record_stride: usize,
    /// Every this many stored snapshots is written as a binary file; the
    /// first and last are always written.
    #[serde(default)]
    pub snapshot_every: Option<usize>,
    #[serde(default)]
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

/// Parses a JSON document, rejects unknown keys, checks every invariant and
/// fills the derived defaults (configuration, resolution, `dt`).
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::Config(if path == "." || path.is_empty() {
            inner.to_string()
        } else {
            format!("at {path}: {inner}")
        })
    })?;
    cfg.resolve()?;
    Ok(cfg)
}

fn nice_step(limit: f64) -> f64 {
    let exp = limit.log10().floor();
    let base = 10f64.powf(exp);
    let mantissa = limit / base;
    let pick = if mantissa >= 5.0 {
        5.0
    } else if mantissa >= 2.0 {
        2.0
    } else {
        1.0
    };
    pick * base
}

impl RunConfig {
    fn resolve(&mut self) -> Result<()> {
        let configuration = match self.configuration {
            Some(c) => c,
            None => match self.domain.kind {
                DomainKind::Interval => Configuration::Hd1d,
                DomainKind::Rectangle => Configuration::Hd2d,
            },
        };
        if configuration.domain_kind() != self.domain.kind {
            return Err(Error::Config(format!(
                "configuration/domain mismatch: {configuration:?} needs {:?}, got {:?}",
                configuration.domain_kind(),
                self.domain.kind
            )));
        }
        self.configuration = Some(configuration);
        let spec = self.domain_spec();
        spec.validate_extents()
            .map_err(|e| Error::Config(e.to_string()))?;
        let dim = spec.dim();
        let resolution = self
            .domain
            .resolution
            .clone()
            .unwrap_or_else(|| vec![DEFAULT_RESOLUTION; dim]);
        if resolution.len() != dim {
            return Err(Error::Config(format!(
                "resolution needs {dim} value(s), got {}",
                resolution.len()
            )));
        }
        self.domain.resolution = Some(resolution);
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::Config("record_stride must be >= 1".into()));
        }
        if self.snapshot_every == Some(0) {
            return Err(Error::Config("snapshot_every must be >= 1".into()));
        }
        let physics = &self.physics;
        PhysicsParams::new(physics.gamma, physics.mu, physics.mu1, Vec::new())
            .map_err(|e| Error::Config(e.to_string()))?;
        if configuration.is_hinged() && physics.mu != 1.0 {
            return Err(Error::Config("hinged configurations need mu = 1".into()));
        }
        physics.load.validate("physics.load")?;
        self.initial.displacement.validate("initial.displacement")?;
        self.initial.velocity.validate("initial.velocity")?;
        self.damping
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.stepper.dt.is_none() {
            self.stepper.dt = Some(nice_step(self.lowest_period() / STEPS_PER_PERIOD));
        }
        self.stepper_config()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        let exp = &self.experiment;
        if exp.audit.windows == 0 {
            return Err(Error::Config(
                "experiment.audit.windows must be >= 1".into(),
            ));
        }
        if !(exp.audit.epsilon > 0.0) {
            return Err(Error::Config(
                "experiment.audit.epsilon must be positive".into(),
            ));
        }
        if exp.absorb.energies.is_empty()
            || exp
                .absorb
                .energies
                .iter()
                .any(|e| !(*e >= 0.0 && e.is_finite()))
        {
            return Err(Error::Config(
                "experiment.absorb.energies must be a non-empty list of values >= 0".into(),
            ));
        }
        if exp.absorb.window.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::Config(
                "experiment.absorb.window must be positive".into(),
            ));
        }
        if !(exp.absorb.fit_threshold > 0.0) {
            return Err(Error::Config(
                "experiment.absorb.fit_threshold must be positive".into(),
            ));
        }
        exp.diff
            .perturbation
            .displacement
            .validate("experiment.diff.perturbation.displacement")?;
        exp.diff
            .perturbation
            .velocity
            .validate("experiment.diff.perturbation.velocity")?;
        if exp.converge.levels < 2 {
            return Err(Error::Config(
                "experiment.converge.levels must be >= 2".into(),
            ));
        }
        self.mesh()?;
        Ok(())
    }

    /// Period of the lowest mode of the continuous linear problem.
    fn lowest_period(&self) -> f64 {
        let e = &self.domain.extents;
        let omega = match self.configuration() {
            Configuration::Fcd1d => 1.875_f64.powi(2) / (e[0] * e[0]),
            c => {
                let k2 = PI
                    * PI
                    * (1.0 / (e[0] * e[0])
                        + if c == Configuration::Hd2d {
                            1.0 / (e[1] * e[1])
                        } else {
                            0.0
                        });
                (k2 * k2 + self.physics.gamma.max(0.0) * k2).sqrt().max(k2)
            }
        };
        2.0 * PI / omega
    }

    pub fn configuration(&self) -> Configuration {
        self.configuration.unwrap_or(match self.domain.kind {
            DomainKind::Interval => Configuration::Hd1d,
            DomainKind::Rectangle => Configuration::Hd2d,
        })
    }

    pub fn domain_spec(&self) -> DomainSpec {
        DomainSpec::for_configuration(self.configuration(), self.domain.extents.clone())
    }

    pub fn resolution(&self) -> Vec<usize> {
        self.domain
            .resolution
            .clone()
            .unwrap_or_else(|| vec![DEFAULT_RESOLUTION; self.domain_spec().dim()])
    }

    pub fn mesh(&self) -> Result<Arc<Mesh>> {
        self.mesh_at(&self.resolution())
    }

    pub fn mesh_at(&self, resolution: &[usize]) -> Result<Arc<Mesh>> {
        Mesh::build(&self.domain_spec(), resolution)
            .map(Arc::new)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn dt(&self) -> f64 {
        self.stepper
            .dt
            .unwrap_or_else(|| nice_step(self.lowest_period() / STEPS_PER_PERIOD))
    }

    pub fn stepper_config(&self) -> StepperConfig {
        StepperConfig {
            dt: self.dt(),
            picard_iterations: self.stepper.picard_iterations,
            picard_tolerance: self.stepper.picard_tolerance,
            scheme: Default::default(),
            linearized: self.stepper.linearized,
        }
    }

    pub fn law(&self) -> Result<DampingLaw> {
        self.damping.build()
    }

    fn extents2(&self) -> [f64; 2] {
        let e = &self.domain.extents;
        [e[0], e.get(1).copied().unwrap_or(1.0)]
    }

    pub fn params(&self, mesh: &Mesh) -> Result<PhysicsParams> {
        let load = self
            .physics
            .load
            .evaluator(self.extents2(), self.configuration(), self.seed);
        let params = PhysicsParams::unloaded(mesh, self.physics.gamma).with_load(mesh, load);
        PhysicsParams::new(params.gamma, self.physics.mu, self.physics.mu1, params.load)
    }

    /// Initial state on `mesh`; `extra` is added when given.
    pub fn initial_state(&self, mesh: &Arc<Mesh>, extra: Option<&InitialData>) -> PlateState {
        let dim = self.configuration();
        let ext = self.extents2();
        let seed = self.seed;
        let u0 = self.initial.displacement.evaluator(ext, dim, seed);
        let v0 = self
            .initial
            .velocity
            .evaluator(ext, dim, seed.wrapping_add(1));
        match extra {
            None => PlateState::from_fns(mesh, u0, v0),
            Some(extra) => {
                let du = extra.displacement.evaluator(ext, dim, seed.wrapping_add(2));
                let dv = extra.velocity.evaluator(ext, dim, seed.wrapping_add(3));
                PlateState::from_fns(mesh, |p| u0(p) + du(p), |p| v0(p) + dv(p))
            }
        }
    }
}
