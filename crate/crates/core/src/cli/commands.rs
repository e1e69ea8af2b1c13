use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{Profile, RunConfig};
use super::manifest::{now, sha256_hex, FileEntry, RunManifest, RunStatus, MANIFEST_FILE};
use super::snapshot::Snapshot;
use super::Command;
use crate::dynamics::{run_trajectory, Failure, PlateState, Stepper, TrajectoryRecord};
use crate::energetics::{
    energy_balance_residual_fcd, energy_balance_residual_hd, equivalence_on_record,
    BalanceResidual, EnergyReport,
};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::geometry::{Configuration, FluxField, Mesh};
use crate::longtime::{
    absorbing_ball_experiment, difference_decomposition_audit, difference_energy_decay,
    hausdorff_semidistance, multiplier_audit, observability_constants, scale_to_hat_energy,
    worker_pool, AbsorbingOptions, AbsorbingReport, DifferenceAudit, MultiplierAuditReport,
    MultiplierIdentity, ObservabilityReport,
};
use crate::operators::norm_sq;

/// Output directory used when neither the document nor `--out` sets one.
pub const DEFAULT_OUTPUT: &str = "berger-lab-out";

/// Collects emitted files and their digests.
struct Output {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl Output {
    fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, bytes)?;
        self.files.push(FileEntry {
            path: rel.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    /// Writes serializable rows as CSV with a header taken from the field
    /// names.
    fn csv<T: Serialize>(&mut self, rel: &str, rows: impl IntoIterator<Item = T>) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in rows {
            w.serialize(row).map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        self.write(rel, &bytes)
    }

    fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }
}

/// Result of one invocation: the manifest plus whether a numerical failure
/// cut any trajectory short.
#[derive(Debug, Clone)]
pub struct Execution {
    pub manifest: RunManifest,
    pub output_dir: PathBuf,
}

impl Execution {
    pub fn numerical_failure(&self) -> bool {
        self.manifest.status == RunStatus::Partial
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv output: {other:?}")),
    }
}

#[derive(Serialize)]
struct EnergyRow {
    time: f64,
    kinetic: f64,
    bending: f64,
    pi: f64,
    script_e: f64,
    hat_e: f64,
    script_em: f64,
    boundary_dissipation: f64,
    non_dissipative_term: f64,
    balance_residual: f64,
    picard_iterations: usize,
}

fn write_energies(out: &mut Output, record: &TrajectoryRecord) -> Result<()> {
    let rows = record
        .energies
        .iter()
        .zip(&record.picard_iterations)
        .map(|(e, &it)| EnergyRow {
            time: e.time,
            kinetic: e.kinetic,
            bending: e.bending,
            pi: e.pi,
            script_e: e.script_e,
            hat_e: e.hat_e,
            script_em: e.script_em,
            boundary_dissipation: e.boundary_dissipation,
            non_dissipative_term: e.non_dissipative_term,
            balance_residual: e.balance_residual,
            picard_iterations: it,
        });
    out.csv("energies.csv", rows)
}

fn write_snapshots(
    out: &mut Output,
    prefix: &str,
    record: &TrajectoryRecord,
    every: Option<usize>,
) -> Result<()> {
    let n = record.snapshots.len();
    for (k, state) in record.snapshots.iter().enumerate() {
        let keep = k == 0 || k + 1 == n || every.is_some_and(|e| k % e == 0);
        if keep {
            out.write(
                &format!("{prefix}/snap_{k:06}.bplt"),
                &Snapshot::of(state).to_bytes(),
            )?;
        }
    }
    Ok(())
}

fn failure_message(label: &str, failure: &Option<Failure>) -> Option<String> {
    failure
        .as_ref()
        .map(|f| format!("{label}: {} (t = {})", f.message, f.time))
}

fn run(cfg: &RunConfig, mesh: &Arc<Mesh>, initial: &PlateState) -> Result<TrajectoryRecord> {
    let params = cfg.params(mesh)?;
    run_trajectory(
        initial,
        cfg.horizon,
        &params,
        &cfg.law()?,
        &cfg.stepper_config(),
        cfg.record_stride,
    )
}

/// Full recorded span `[first, last]`.
fn span(record: &TrajectoryRecord) -> (f64, f64) {
    (record.times[0], *record.times.last().unwrap())
}

/// Last time that carries a stored snapshot.
fn snapshot_span(record: &TrajectoryRecord) -> (f64, f64) {
    (record.snapshots[0].t, record.snapshots.last().unwrap().t)
}

#[derive(Debug, Serialize)]
struct SimulateSummary {
    configuration: Configuration,
    nodes: [usize; 2],
    dt: f64,
    steps: usize,
    final_time: f64,
    complete: bool,
    failure: Option<Failure>,
    max_picard_iterations: usize,
    equivalence_holds: bool,
    initial: EnergyReport,
    last: EnergyReport,
}

fn simulate(cfg: &RunConfig, out: &mut Output, failures: &mut Vec<String>) -> Result<()> {
    let mesh = cfg.mesh()?;
    let record = run(cfg, &mesh, &cfg.initial_state(&mesh, None))?;
    failures.extend(failure_message("trajectory", &record.failure));
    write_energies(out, &record)?;
    write_snapshots(out, "snapshots", &record, cfg.snapshot_every)?;
    out.json(
        "summary.json",
        &SimulateSummary {
            configuration: cfg.configuration(),
            nodes: mesh.nodes(),
            dt: record.dt(),
            steps: record.times.len() - 1,
            final_time: span(&record).1,
            complete: record.is_complete(),
            failure: record.failure.clone(),
            max_picard_iterations: record.picard_iterations.iter().copied().max().unwrap_or(0),
            equivalence_holds: equivalence_on_record(&record),
            initial: record.energies[0],
            last: *record.energies.last().unwrap(),
        },
    )
}

#[derive(Debug, Serialize)]
struct Balance {
    window: (f64, f64),
    residual: f64,
    residual_per_unit_time: f64,
    non_dissipative_integral: Option<f64>,
    dissipation_integral: Option<f64>,
}

fn balance(cfg: &RunConfig, record: &TrajectoryRecord) -> Result<Balance> {
    let window = span(record);
    let length = (window.1 - window.0).max(f64::MIN_POSITIVE);
    let (residual, parts) = if cfg.configuration().is_hinged() {
        (
            energy_balance_residual_hd(record, &cfg.law()?, window)?,
            None,
        )
    } else {
        let BalanceResidual {
            residual,
            non_dissipative_integral,
            dissipation_integral,
        } = energy_balance_residual_fcd(record, window)?;
        (
            residual,
            Some((non_dissipative_integral, dissipation_integral)),
        )
    };
    Ok(Balance {
        window,
        residual,
        residual_per_unit_time: residual.abs() / length,
        non_dissipative_integral: parts.map(|p| p.0),
        dissipation_integral: parts.map(|p| p.1),
    })
}

#[derive(Debug, Serialize)]
struct AuditReport {
    balance: Balance,
    equivalence_holds: bool,
    multiplier: Vec<MultiplierAuditReport>,
    observability: Vec<ObservabilityReport>,
    decomposition: Option<DifferenceAudit>,
    skipped: Vec<String>,
}

fn anchor(cfg: &RunConfig) -> [f64; 2] {
    cfg.experiment.audit.anchor.unwrap_or_else(|| {
        let e = &cfg.domain.extents;
        [0.5 * e[0], 0.5 * e.get(1).copied().unwrap_or(0.0)]
    })
}

/// Splits the snapshot span into `count` windows aligned to snapshots.
fn windows(record: &TrajectoryRecord, count: usize) -> Vec<(f64, f64)> {
    let n = record.snapshots.len();
    if n < 2 {
        return Vec::new();
    }
    let per = ((n - 1) / count).max(1);
    (0..count)
        .map(|k| (k * per, ((k + 1) * per).min(n - 1)))
        .filter(|(a, b)| b > a)
        .map(|(a, b)| (record.snapshots[a].t, record.snapshots[b].t))
        .collect()
}

#[derive(Serialize)]
struct MultiplierRow {
    window_start: f64,
    window_end: f64,
    identity: MultiplierIdentity,
    lhs: f64,
    rhs: f64,
    residual: f64,
    dropped_term: Option<f64>,
}

fn audit(cfg: &RunConfig, out: &mut Output, failures: &mut Vec<String>) -> Result<()> {
    let mesh = cfg.mesh()?;
    let record = run(cfg, &mesh, &cfg.initial_state(&mesh, None))?;
    failures.extend(failure_message("trajectory", &record.failure));
    write_energies(out, &record)?;
    let mut report = AuditReport {
        balance: balance(cfg, &record)?,
        equivalence_holds: equivalence_on_record(&record),
        multiplier: Vec::new(),
        observability: Vec::new(),
        decomposition: None,
        skipped: Vec::new(),
    };
    if cfg.configuration().is_hinged() {
        let flux = FluxField::new(&mesh, anchor(cfg));
        let mut rows = Vec::new();
        for window in windows(&record, cfg.experiment.audit.windows) {
            for (identity, field) in [
                (MultiplierIdentity::Equipartition, None),
                (MultiplierIdentity::Flux, Some(&flux)),
            ] {
                let m = multiplier_audit(&record, identity, field, window)?;
                rows.push(MultiplierRow {
                    window_start: window.0,
                    window_end: window.1,
                    identity,
                    lhs: m.lhs_total,
                    rhs: m.rhs_total,
                    residual: m.residual,
                    dropped_term: m.dropped_term,
                });
                report.multiplier.push(m);
            }
        }
        out.csv("multiplier.csv", rows)?;
        let (first, last) = span(&record);
        let count = cfg.experiment.audit.windows;
        report.observability =
            observability_constants(&record, (last - first) / count as f64).unwrap_or_default();

        let other = run(
            cfg,
            &mesh,
            &cfg.initial_state(&mesh, Some(&cfg.experiment.diff.perturbation)),
        )?;
        failures.extend(failure_message("perturbed trajectory", &other.failure));
        let (a, b) = (snapshot_span(&record), snapshot_span(&other));
        let shared = (a.0.max(b.0), a.1.min(b.1));
        report.decomposition = Some(difference_decomposition_audit(
            &record,
            &other,
            shared,
            cfg.experiment.audit.epsilon,
        )?);
    } else {
        report.skipped.push(
            "multiplier, observability and decomposition audits need a hinged configuration".into(),
        );
    }
    out.json("audit.json", &report)
}

#[derive(Serialize)]
struct WindowRow {
    run: usize,
    m: usize,
    time: f64,
    script_em: f64,
}

fn absorb(cfg: &RunConfig, out: &mut Output, failures: &mut Vec<String>) -> Result<()> {
    let mesh = cfg.mesh()?;
    let params = cfg.params(&mesh)?;
    let law = cfg.law()?;
    let stepper_cfg = cfg.stepper_config();
    let stepper = Stepper::new(&mesh, params.clone(), law.clone(), stepper_cfg)?;
    let shape = cfg.initial_state(&mesh, None);
    let family = cfg
        .experiment
        .absorb
        .energies
        .iter()
        .map(|&e| scale_to_hat_energy(&stepper, &shape, e))
        .collect::<Result<Vec<_>>>()?;
    let options = AbsorbingOptions {
        window: cfg.experiment.absorb.window,
        fit_threshold: cfg.experiment.absorb.fit_threshold,
        record_stride: cfg.record_stride,
        ..AbsorbingOptions::default()
    };
    let report: AbsorbingReport =
        absorbing_ball_experiment(&family, &params, &law, &stepper_cfg, cfg.horizon, options)?;
    let mut rows = Vec::new();
    for (run_id, r) in report.runs.iter().enumerate() {
        failures.extend(r.failure.as_ref().map(|f| format!("run {run_id}: {f}")));
        for (m, e) in r.window_energies.iter().enumerate() {
            rows.push(WindowRow {
                run: run_id,
                m,
                time: m as f64 * report.window,
                script_em: *e,
            });
        }
    }
    out.csv("absorb_windows.csv", rows)?;
    out.json("absorb.json", &report)
}

#[derive(Debug, Serialize)]
struct DiffReport {
    initial_energy_z: f64,
    final_energy_z: f64,
    decay_ratio: f64,
    decomposition: Option<DifferenceAudit>,
    /// Semidistances between the snapshot clouds of the second half of
    /// each run, in both directions.
    hausdorff_uw: f64,
    hausdorff_wu: f64,
}

#[derive(Serialize)]
struct DiffRow {
    time: f64,
    energy_z: f64,
}

fn diff(cfg: &RunConfig, out: &mut Output, failures: &mut Vec<String>) -> Result<()> {
    let mesh = cfg.mesh()?;
    let u = run(cfg, &mesh, &cfg.initial_state(&mesh, None))?;
    let w = run(
        cfg,
        &mesh,
        &cfg.initial_state(&mesh, Some(&cfg.experiment.diff.perturbation)),
    )?;
    failures.extend(failure_message("first trajectory", &u.failure));
    failures.extend(failure_message("second trajectory", &w.failure));
    let (u, w) = if u.times.len() == w.times.len() {
        (u, w)
    } else {
        let keep = u.times.len().min(w.times.len());
        (truncate(u, keep), truncate(w, keep))
    };
    let series = difference_energy_decay(&u, &w)?;
    out.csv(
        "diff_energy.csv",
        series
            .iter()
            .map(|&(time, energy_z)| DiffRow { time, energy_z }),
    )?;
    let decomposition = if cfg.configuration().is_hinged() {
        Some(difference_decomposition_audit(
            &u,
            &w,
            snapshot_span(&u),
            cfg.experiment.audit.epsilon,
        )?)
    } else {
        None
    };
    let tail =
        |r: &TrajectoryRecord| -> Vec<PlateState> { r.snapshots[r.snapshots.len() / 2..].to_vec() };
    let (tu, tw) = (tail(&u), tail(&w));
    let (ru, rw): (Vec<&PlateState>, Vec<&PlateState>) = (tu.iter().collect(), tw.iter().collect());
    let e0 = series.first().map_or(0.0, |p| p.1);
    let e1 = series.last().map_or(0.0, |p| p.1);
    out.json(
        "diff.json",
        &DiffReport {
            initial_energy_z: e0,
            final_energy_z: e1,
            decay_ratio: if e0 > 0.0 { e1 / e0 } else { 0.0 },
            decomposition,
            hausdorff_uw: hausdorff_semidistance(&ru, &rw, &u.params)?,
            hausdorff_wu: hausdorff_semidistance(&rw, &ru, &u.params)?,
        },
    )
}

fn truncate(mut r: TrajectoryRecord, keep: usize) -> TrajectoryRecord {
    r.times.truncate(keep);
    r.energies.truncate(keep);
    r.boundary.truncate(keep);
    r.picard_iterations.truncate(keep);
    let last = r.times[keep - 1];
    r.snapshots
        .retain(|s| s.t <= last + 1e-9 * (1.0 + last.abs()));
    r
}

#[derive(Debug, Clone, Serialize)]
struct ConvergeLevel {
    level: usize,
    nodes: [usize; 2],
    dt: f64,
    spacing: f64,
    balance_residual_rate: f64,
    oracle_error: Option<f64>,
    observed_order: Option<f64>,
}

#[derive(Serialize)]
struct ConvergeRow {
    level: usize,
    nx: usize,
    ny: usize,
    dt: f64,
    spacing: f64,
    balance_residual_rate: f64,
    oracle_error: Option<f64>,
    observed_order: Option<f64>,
}

#[derive(Debug, Serialize)]
struct ConvergeReport {
    /// `oracle_error` when the run has an exact solution, else the balance
    /// residual per unit time.
    metric: &'static str,
    levels: Vec<ConvergeLevel>,
}

/// Exact standing wave `A cos(ωt)·mode` for a linearized undamped run
/// started at rest from a single mode on a hinged domain.
fn exact_mode(cfg: &RunConfig) -> Option<(Profile, f64)> {
    let (amplitude, kx, ky) = match cfg.initial.displacement {
        Profile::Mode { amplitude, kx, ky } => (amplitude, kx, ky),
        _ => return None,
    };
    let unloaded = matches!(cfg.physics.load, Profile::Zero)
        || matches!(cfg.physics.load, Profile::Constant { value } if value == 0.0);
    if !(cfg.stepper.linearized && unloaded && cfg.initial.velocity == Profile::Zero) {
        return None;
    }
    let e = &cfg.domain.extents;
    let k2 = match cfg.configuration() {
        Configuration::Hd1d => (kx as f64 * std::f64::consts::PI / e[0]).powi(2),
        Configuration::Hd2d => {
            let pi = std::f64::consts::PI;
            (kx as f64 * pi / e[0]).powi(2) + (ky as f64 * pi / e[1]).powi(2)
        }
        Configuration::Fcd1d => return None,
    };
    let omega2 = k2 * k2 - cfg.physics.gamma * k2;
    (omega2 > 0.0).then(|| (Profile::Mode { amplitude, kx, ky }, omega2.sqrt()))
}

fn converge(cfg: &RunConfig, out: &mut Output, failures: &mut Vec<String>) -> Result<()> {
    let base = cfg.resolution();
    let oracle = exact_mode(cfg);
    let solve = |level: usize| -> Result<(ConvergeLevel, Option<String>)> {
        let factor = 1usize << level;
        let resolution: Vec<usize> = base.iter().map(|&n| (n - 1) * factor + 1).collect();
        let mut level_cfg = cfg.clone();
        level_cfg.domain.resolution = Some(resolution.clone());
        level_cfg.stepper.dt = Some(cfg.dt() / factor as f64);
        let mesh = level_cfg.mesh_at(&resolution)?;
        let record = run(&level_cfg, &mesh, &level_cfg.initial_state(&mesh, None))?;
        let failure = failure_message(&format!("level {level}"), &record.failure);
        let rate = balance(&level_cfg, &record)?.residual_per_unit_time;
        let oracle_error = match (&oracle, record.final_state()) {
            (Some((profile, omega)), Some(last)) if record.is_complete() => {
                let f = profile.evaluator(
                    [
                        cfg.domain.extents[0],
                        cfg.domain.extents.get(1).copied().unwrap_or(1.0),
                    ],
                    cfg.configuration(),
                    cfg.seed,
                );
                let exact = Field::from_fn(&mesh, |p| f(p) * (omega * last.t).cos());
                let reference = Field::from_fn(&mesh, &f);
                let err = last.u.combine(1.0, &exact, -1.0)?;
                Some((norm_sq(&err) / norm_sq(&reference)).sqrt())
            }
            _ => None,
        };
        let level = ConvergeLevel {
            level,
            nodes: mesh.nodes(),
            dt: level_cfg.dt(),
            spacing: mesh.spacing()[0],
            balance_residual_rate: rate,
            oracle_error,
            observed_order: None,
        };
        Ok((level, failure))
    };
    let solved: Vec<(ConvergeLevel, Option<String>)> = worker_pool()?.install(|| {
        (0..cfg.experiment.converge.levels)
            .into_par_iter()
            .map(solve)
            .collect::<Result<_>>()
    })?;
    let metric = |l: &ConvergeLevel| l.oracle_error.unwrap_or(l.balance_residual_rate);
    let mut levels: Vec<ConvergeLevel> = Vec::with_capacity(solved.len());
    for (current, failure) in solved {
        failures.extend(failure);
        let observed_order = levels
            .last()
            .map(|prev| (metric(prev) / metric(&current)).log2());
        levels.push(ConvergeLevel {
            observed_order,
            ..current
        });
    }
    out.csv(
        "converge.csv",
        levels.iter().map(|l| ConvergeRow {
            level: l.level,
            nx: l.nodes[0],
            ny: l.nodes[1],
            dt: l.dt,
            spacing: l.spacing,
            balance_residual_rate: l.balance_residual_rate,
            oracle_error: l.oracle_error,
            observed_order: l.observed_order,
        }),
    )?;
    out.json(
        "converge.json",
        &ConvergeReport {
            metric: if oracle.is_some() {
                "oracle_error"
            } else {
                "balance_residual_rate"
            },
            levels,
        },
    )
}

/// Runs one subcommand and writes its outputs plus `manifest.json` under
/// the configured output directory.
pub fn execute(command: Command, cfg: &RunConfig) -> Result<Execution> {
    let started = now();
    let dir = cfg
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT));
    let mut out = Output::create(&dir)?;
    out.json("config.json", cfg)?;
    let mut failures = Vec::new();
    match command {
        Command::Simulate => simulate(cfg, &mut out, &mut failures)?,
        Command::Audit => audit(cfg, &mut out, &mut failures)?,
        Command::Absorb => absorb(cfg, &mut out, &mut failures)?,
        Command::Diff => diff(cfg, &mut out, &mut failures)?,
        Command::Converge => converge(cfg, &mut out, &mut failures)?,
    }
    let manifest = RunManifest {
        command: command.name().to_string(),
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        started,
        finished: now(),
        status: if failures.is_empty() {
            RunStatus::Complete
        } else {
            RunStatus::Partial
        },
        failures,
        files: out.files.clone(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(Execution {
        manifest,
        output_dir: dir,
    })
}
