//! End-to-end acceptance checks. Each criterion prints one `PASS`/`FAIL`
//! line; the test fails if any criterion fails.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use berger_lab::damping::{
    verify_damping_assumption, DampingCheck, DampingLaw, DEFAULT_SAMPLES, DEFAULT_SAMPLE_RANGE,
};
use berger_lab::dynamics::{run_trajectory, PlateState, Stepper, StepperConfig, TrajectoryRecord};
use berger_lab::energetics::{
    audit_potential_bound, energy_balance_residual_fcd, energy_balance_residual_hd,
    equivalence_on_record,
};
use berger_lab::field::Field;
use berger_lab::geometry::{check_star_shaped, DomainSpec, FluxField, Mesh};
use berger_lab::longtime::{
    absorbing_ball_experiment, difference_decomposition_audit, multiplier_audit,
    scale_to_hat_energy, AbsorbingOptions, MultiplierIdentity,
};
use berger_lab::operators::{norm_sq, PhysicsParams};

fn square(n: usize) -> Arc<Mesh> {
    Arc::new(Mesh::build(&DomainSpec::hinged_rectangle(1.0, 1.0), &[n, n]).unwrap())
}

fn beam(n: usize) -> Arc<Mesh> {
    Arc::new(Mesh::build(&DomainSpec::cantilever(1.0), &[n]).unwrap())
}

fn orders(r: &[f64]) -> Vec<f64> {
    r.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn sci(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Trajectories collected for the equivalence check of criterion 8.
#[derive(Default)]
struct Runs(Vec<TrajectoryRecord>);

fn linear_oracle() -> Outcome {
    let mesh = square(65);
    let params = PhysicsParams::unloaded(&mesh, 0.0);
    let mode = |[x, y]: [f64; 2]| (PI * x).sin() * (PI * y).sin();
    let initial = PlateState::from_fns(&mesh, mode, |_| 0.0);
    let cfg = StepperConfig::new(1e-3).linearized();
    let start = Instant::now();
    let record = run_trajectory(&initial, 1.0, &params, &DampingLaw::zero(), &cfg, 1000).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let last = record.final_state().unwrap();
    let exact = Field::from_fn(&mesh, |p| mode(p) * (2.0 * PI * PI * last.t).cos());
    let err = last.u.combine(1.0, &exact, -1.0).unwrap();
    let rel = (norm_sq(&err) / norm_sq(&Field::from_fn(&mesh, mode))).sqrt();
    outcome(
        rel < 1e-3 && elapsed < 60.0 && (last.t - 1.0).abs() < 1e-9,
        format!(
            "relative L2 error {rel:.3e} at t = {} (tolerance 1e-3), runtime {elapsed:.1} s",
            last.t
        ),
    )
}

fn hd_energy_equality(runs: &mut Runs) -> Outcome {
    let law = DampingLaw::linear(1.0);
    let mut rates = Vec::new();
    for (n, dt) in [(17, 2e-3), (33, 1e-3), (65, 5e-4)] {
        let mesh = square(n);
        let params = PhysicsParams::unloaded(&mesh, 2.0).with_load(&mesh, |[x, y]| x * y);
        let initial = PlateState::from_fns(
            &mesh,
            |[x, y]| (PI * x).sin() * (PI * y).sin() + 0.5 * (2.0 * PI * x).sin() * (PI * y).sin(),
            |[x, y]| 3.0 * ((PI * x).sin() * (PI * y).sin()).powi(2),
        );
        let record =
            run_trajectory(&initial, 0.2, &params, &law, &StepperConfig::new(dt), 10).unwrap();
        let end = *record.times.last().unwrap();
        rates.push(
            energy_balance_residual_hd(&record, &law, (0.0, end))
                .unwrap()
                .abs()
                / end,
        );
        runs.0.push(record);
    }
    let p = orders(&rates);
    outcome(
        p.iter().all(|&p| p >= 1.8),
        format!(
            "residual per unit time {}, observed orders {p:.2?} (need >= 1.8)",
            sci(&rates)
        ),
    )
}

/// Moment- and shear-free tip profile of the cantilever.
fn tip(x: f64) -> f64 {
    x * x * (6.0 - 4.0 * x + x * x) / 3.0
}

fn fcd_run(n: usize, dt: f64, shifted: bool) -> TrajectoryRecord {
    let mesh = beam(n);
    let params = PhysicsParams::unloaded(&mesh, 1.0);
    let omega = 1.875_f64.powi(2);
    let initial = if shifted {
        PlateState::from_fns(&mesh, |_| 0.0, |[x, _]| 0.15 * omega * tip(x))
    } else {
        PlateState::from_fns(&mesh, |[x, _]| 0.15 * tip(x), |_| 0.0)
    };
    run_trajectory(
        &initial,
        0.5,
        &params,
        &DampingLaw::zero(),
        &StepperConfig::new(dt),
        1,
    )
    .unwrap()
}

fn fcd_energy_identity(runs: &mut Runs) -> Outcome {
    let mut rates = Vec::new();
    for (n, dt) in [(17, 4e-3), (33, 2e-3), (65, 1e-3)] {
        let record = fcd_run(n, dt, false);
        let end = *record.times.last().unwrap();
        rates.push(
            energy_balance_residual_fcd(&record, (0.0, end))
                .unwrap()
                .residual
                .abs()
                / end,
        );
        runs.0.push(record);
    }
    let p = orders(&rates);
    let a = fcd_run(33, 2e-3, false);
    let b = fcd_run(33, 2e-3, true);
    let ia = energy_balance_residual_fcd(&a, (0.0, 0.5))
        .unwrap()
        .non_dissipative_integral;
    let ib = energy_balance_residual_fcd(&b, (0.0, 0.5))
        .unwrap()
        .non_dissipative_integral;
    runs.0.push(a);
    runs.0.push(b);
    outcome(
        p.iter().all(|&p| p >= 1.8) && ia * ib < 0.0,
        format!(
            "residual per unit time {}, orders {p:.2?}; non-dissipative integrals {ia:.3e} and {ib:.3e}",
            sci(&rates)
        ),
    )
}

fn dissipativity() -> Outcome {
    let mesh = square(17);
    let params = PhysicsParams::unloaded(&mesh, 0.0).with_load(&mesh, |[x, y]| 10.0 * x * y);
    let law = DampingLaw::linear(1.0);
    let cfg = StepperConfig::new(2e-3);
    let stepper = Stepper::new(&mesh, params.clone(), law.clone(), cfg).unwrap();
    let shape = PlateState::from_fns(
        &mesh,
        |[x, y]| (PI * x).sin() * (PI * y).sin() + 0.3 * (2.0 * PI * x).sin() * (PI * y).sin(),
        |[x, y]| ((PI * x).sin() * (PI * y).sin()).powi(2),
    );
    let family: Vec<PlateState> = [1.0, 10.0, 100.0]
        .iter()
        .map(|&e| scale_to_hat_energy(&stepper, &shape, e).unwrap())
        .collect();
    let options = AbsorbingOptions {
        window: Some(0.4),
        ..AbsorbingOptions::default()
    };
    let report = absorbing_ball_experiment(&family, &params, &law, &cfg, 4.0, options).unwrap();
    let entries: Vec<Option<f64>> = report.runs.iter().map(|r| r.entry_time).collect();
    let increasing = entries
        .windows(2)
        .all(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if a < b));
    let fits: Vec<(f64, f64)> = report
        .runs
        .iter()
        .filter_map(|r| r.raw_fit.map(|f| (f.eta, f.residual)))
        .collect();
    let fits_ok = fits.len() == 3 && fits.iter().all(|&(eta, res)| eta < 1.0 && res < 0.05);
    let inside = report.runs.iter().all(|r| {
        r.post_entry_sup
            .is_some_and(|s| s <= report.candidate_radius)
    });
    outcome(
        report.all_entered() && increasing && fits_ok && inside,
        format!(
            "radius {:.4e}, entry times {entries:.3?}, eta {}, fit residuals {}",
            report.candidate_radius,
            sci(&fits.iter().map(|f| f.0).collect::<Vec<_>>()),
            sci(&fits.iter().map(|f| f.1).collect::<Vec<_>>())
        ),
    )
}

fn static_record(n: usize) -> TrajectoryRecord {
    let mesh = square(n);
    let (amp, gamma) = (0.5, 2.0);
    let g = amp * amp * PI * PI / 2.0;
    let mode = |[x, y]: [f64; 2]| amp * (PI * x).sin() * (PI * y).sin();
    let params = PhysicsParams::unloaded(&mesh, gamma).with_load(&mesh, |p| {
        (4.0 * PI.powi(4) - 2.0 * PI * PI * (gamma - g)) * mode(p)
    });
    let initial = PlateState::from_fns(&mesh, mode, |_| 0.0);
    let mut record = run_trajectory(
        &initial,
        0.1,
        &params,
        &DampingLaw::linear(1.0),
        &StepperConfig::new(0.01),
        1,
    )
    .unwrap();
    // Hold the manufactured standing state fixed in time.
    let first = record.snapshots[0].clone();
    for s in &mut record.snapshots {
        *s = PlateState {
            t: s.t,
            ..first.clone()
        };
    }
    record
}

fn multiplier_audits(runs: &mut Runs) -> Outcome {
    let mut constants = Vec::new();
    let mut flux_residuals = Vec::new();
    for n in [17, 33, 65] {
        let record = static_record(n);
        let h = 1.0 / (n - 1) as f64;
        let eq =
            multiplier_audit(&record, MultiplierIdentity::Equipartition, None, (0.0, 0.1)).unwrap();
        constants.push(eq.residual / (h * h));
        let flux = FluxField::new(&record.mesh, [0.5, 0.5]);
        flux_residuals.push(
            multiplier_audit(&record, MultiplierIdentity::Flux, Some(&flux), (0.0, 0.1))
                .unwrap()
                .residual,
        );
    }
    let stable = constants
        .windows(2)
        .all(|w| (w[1] / w[0] - 1.0).abs() <= 0.1);
    let p = orders(&flux_residuals);

    let mesh = square(17);
    let params = PhysicsParams::unloaded(&mesh, 1.0).with_load(&mesh, |[x, y]| x * y);
    let initial = PlateState::from_fns(
        &mesh,
        |[x, y]| 0.5 * (PI * x).sin() * (PI * y).sin(),
        |_| 0.0,
    );
    let record = run_trajectory(
        &initial,
        0.4,
        &params,
        &DampingLaw::linear(1.0),
        &StepperConfig::new(2e-3),
        5,
    )
    .unwrap();
    let (mut audited, mut nonpositive) = (0, 0);
    for anchor in [[0.5, 0.5], [0.0, 0.0], [1.0, 0.3], [0.2, 0.9]] {
        let flux = FluxField::new(&mesh, anchor);
        for k in 0..8 {
            let window = (0.05 * k as f64, 0.05 * (k + 1) as f64);
            let report =
                multiplier_audit(&record, MultiplierIdentity::Flux, Some(&flux), window).unwrap();
            if report.star_shaped == Some(true) {
                audited += 1;
                nonpositive += usize::from(report.dropped_term_nonpositive());
            }
        }
    }
    runs.0.push(record);
    outcome(
        stable && p.iter().all(|&p| p >= 1.5) && audited > 0 && nonpositive == audited,
        format!(
            "equipartition residual/h^2 {constants:.3?}; flux residuals {} orders {p:.2?}; dropped term <= 0 on {nonpositive}/{audited} windows",
            sci(&flux_residuals)
        ),
    )
}

fn damping_suite() -> Outcome {
    let verify = |law: &DampingLaw| {
        verify_damping_assumption(law, DEFAULT_SAMPLE_RANGE, DEFAULT_SAMPLES).unwrap()
    };
    let shipped = [
        DampingLaw::linear(1.0),
        DampingLaw::saturating(),
        DampingLaw::piecewise_linear(1.0, 3.0),
    ];
    let failing: Vec<String> = shipped
        .iter()
        .filter(|l| !verify(l).passed)
        .map(|l| l.name().to_string())
        .collect();
    let cubic = verify(&DampingLaw::cubic_counterexample()).failed_checks();
    let arctan = verify(&DampingLaw::arctan_counterexample()).failed_checks();
    outcome(
        failing.is_empty()
            && cubic == BTreeSet::from([DampingCheck::UpperSlope])
            && arctan == BTreeSet::from([DampingCheck::LowerSlope]),
        format!(
            "shipped laws failing: {failing:?}; cubic fails {cubic:?}; arctan fails {arctan:?}"
        ),
    )
}

fn decomposition(runs: &mut Runs) -> Outcome {
    let mut residuals = Vec::new();
    let mut identical = f64::NAN;
    for (n, dt) in [(9, 4e-3), (17, 2e-3), (33, 1e-3)] {
        let mesh = square(n);
        let params = PhysicsParams::unloaded(&mesh, 2.0).with_load(&mesh, |[x, y]| x * y);
        let law = DampingLaw::linear(1.0);
        let cfg = StepperConfig::new(dt);
        let a = PlateState::from_fns(
            &mesh,
            |[x, y]| 0.4 * (PI * x).sin() * (PI * y).sin(),
            |_| 0.0,
        );
        let b = PlateState::from_fns(
            &mesh,
            |[x, y]| 0.2 * (PI * x).sin() * (2.0 * PI * y).sin(),
            |_| 0.0,
        );
        let ra = run_trajectory(&a, 0.2, &params, &law, &cfg, 1).unwrap();
        let rb = run_trajectory(&b, 0.2, &params, &law, &cfg, 1).unwrap();
        residuals.push(
            difference_decomposition_audit(&ra, &rb, (0.0, 0.2), 0.5)
                .unwrap()
                .residual,
        );
        if n == 9 {
            let same = difference_decomposition_audit(&ra, &ra, (0.0, 0.2), 0.5).unwrap();
            identical = same.residual.max(same.lhs.abs()).max(same.rhs.abs());
        }
        runs.0.push(ra);
        runs.0.push(rb);
    }
    let p = orders(&residuals);
    outcome(
        p.iter().all(|&p| p >= 1.8) && identical == 0.0,
        format!(
            "residuals {}, orders {p:.2?}; u = w gives {identical:e}",
            sci(&residuals)
        ),
    )
}

fn potential_bound(runs: &Runs) -> Outcome {
    let mut violations = Vec::new();
    let square = square(17);
    let square_params =
        PhysicsParams::unloaded(&square, 3.0).with_load(&square, |[x, y]| 20.0 * x * (1.0 - y));
    let beam = beam(33);
    let mut beam_params = PhysicsParams::unloaded(&beam, 3.0).with_load(&beam, |[x, _]| 5.0 * x);
    beam_params.mu = 0.5;
    beam_params.mu1 = 0.3;
    for eps in [0.1, 0.25, 0.5] {
        for (mesh, params) in [(&square, &square_params), (&beam, &beam_params)] {
            violations.push(
                audit_potential_bound(mesh, params, eps, 10_000, 2024)
                    .unwrap()
                    .violations,
            );
        }
    }
    let bad_runs = runs.0.iter().filter(|r| !equivalence_on_record(r)).count();
    let snapshots: usize = runs.0.iter().map(|r| r.energies.len()).sum();
    outcome(
        violations.iter().all(|&v| v == 0) && bad_runs == 0,
        format!(
            "violations per (eps, mesh) {violations:?} over 10^4 states each; equivalence fails on {bad_runs} of {} runs ({snapshots} time levels)",
            runs.0.len()
        ),
    )
}

fn geometry() -> Outcome {
    let spec = DomainSpec::hinged_rectangle(1.0, 1.0);
    // Deterministic low-discrepancy interior anchors.
    let interior = (1..=100).all(|k| {
        let x = (k as f64 * 0.618_033_988_749_895).fract();
        let y = (k as f64 * 0.754_877_666_246_692_7).fract();
        check_star_shaped(&spec, [x, y]).satisfied
    });
    let exterior = [
        [1.5, 0.5],
        [-0.5, 0.5],
        [0.5, 1.5],
        [0.5, -0.5],
        [2.0, 2.0],
        [-1.0, -1.0],
        [1.0001, 0.5],
        [0.5, -1e-4],
        [3.0, -2.0],
        [-0.2, 1.7],
    ];
    let rejected = exterior
        .iter()
        .filter(|&&a| !check_star_shaped(&spec, a).satisfied)
        .count();
    outcome(
        interior && rejected == exterior.len(),
        format!(
            "100 interior anchors satisfied: {interior}; exterior anchors rejected: {rejected}/10"
        ),
    )
}

#[test]
fn acceptance() {
    let mut runs = Runs::default();
    let mut results: Vec<(&str, Outcome)> = vec![("linear oracle", linear_oracle())];
    results.push(("hinged energy equality", hd_energy_equality(&mut runs)));
    results.push(("cantilever energy identity", fcd_energy_identity(&mut runs)));
    results.push(("dissipativity", dissipativity()));
    results.push(("multiplier audits", multiplier_audits(&mut runs)));
    results.push(("damping suite", damping_suite()));
    results.push(("decomposition", decomposition(&mut runs)));
    results.push(("potential bound", potential_bound(&runs)));
    results.push(("geometry", geometry()));
    for (k, (name, o)) in results.iter().enumerate() {
        println!(
            "criterion {}: {} {name}: {}",
            k + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    let failed: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, (_, o))| !o.pass)
        .map(|(k, _)| k + 1)
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
