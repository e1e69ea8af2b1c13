use super::*;
use crate::energetics::{energy_balance_residual_fcd, energy_balance_residual_hd};
use crate::geometry::DomainSpec;
use crate::operators::norm_sq;
use std::f64::consts::PI;

fn square(n: usize) -> Arc<Mesh> {
    Arc::new(Mesh::build(&DomainSpec::hinged_rectangle(1.0, 1.0), &[n, n]).unwrap())
}

fn interval(n: usize) -> Arc<Mesh> {
    Arc::new(Mesh::build(&DomainSpec::hinged_interval(1.0), &[n]).unwrap())
}

fn beam(n: usize) -> Arc<Mesh> {
    Arc::new(Mesh::build(&DomainSpec::cantilever(1.0), &[n]).unwrap())
}

#[test]
fn zero_state_stays_zero() {
    let mesh = square(9);
    let params = PhysicsParams::unloaded(&mesh, 1.0);
    let record = run_trajectory(
        &PlateState::zero(&mesh),
        0.05,
        &params,
        &DampingLaw::linear(1.0),
        &StepperConfig::new(0.01),
        1,
    )
    .unwrap();
    assert!(record.is_complete());
    assert_eq!(record.times.len(), 6);
    for s in &record.snapshots {
        assert_eq!(s.u.max_abs(), 0.0);
        assert_eq!(s.v.max_abs(), 0.0);
    }
    assert_eq!(
        energy_balance_residual_hd(&record, &DampingLaw::linear(1.0), (0.0, 0.05)).unwrap(),
        0.0
    );
}

#[test]
fn linearized_mode_follows_cosine() {
    let mesh = square(33);
    let params = PhysicsParams::unloaded(&mesh, 0.0);
    let mode = |[x, y]: [f64; 2]| (PI * x).sin() * (PI * y).sin();
    let initial = PlateState::from_fns(&mesh, mode, |_| 0.0);
    let cfg = StepperConfig::new(2e-3).linearized();
    let record = run_trajectory(&initial, 0.2, &params, &DampingLaw::zero(), &cfg, 100).unwrap();
    let last = record.final_state().unwrap();
    let exact = Field::from_fn(&mesh, |p| mode(p) * (2.0 * PI * PI * last.t).cos());
    let err = last.u.combine(1.0, &exact, -1.0).unwrap();
    let rel = (norm_sq(&err) / norm_sq(&Field::from_fn(&mesh, mode))).sqrt();
    assert!(rel < 2e-2, "relative error {rel}");
}

#[test]
fn linearized_energy_is_conserved() {
    for mesh in [square(17), beam(33)] {
        let params = PhysicsParams::unloaded(&mesh, 0.0);
        let initial = PlateState::from_fns(
            &mesh,
            |[x, y]| x * x * (1.0 - x) * (1.0 + y),
            |[x, _]| x * x,
        );
        let cfg = StepperConfig::new(5e-3).linearized();
        let record = run_trajectory(&initial, 0.2, &params, &DampingLaw::zero(), &cfg, 10).unwrap();
        let e0 = record.energies[0].kinetic + record.energies[0].bending;
        for r in &record.energies {
            let e = r.kinetic + r.bending;
            assert!((e - e0).abs() <= 1e-9 * e0, "{e} vs {e0}");
        }
    }
}

#[test]
fn damped_energy_decreases() {
    let mesh = square(17);
    let params = PhysicsParams::unloaded(&mesh, 0.0);
    let initial = PlateState::from_fns(
        &mesh,
        |[x, y]| {
            0.3 * (PI * x).sin() * (PI * y).sin() + 0.1 * (2.0 * PI * x).sin() * (PI * y).sin()
        },
        |_| 0.0,
    );
    let law = DampingLaw::linear(1.0);
    let record =
        run_trajectory(&initial, 0.5, &params, &law, &StepperConfig::new(2e-3), 1).unwrap();
    assert!(record.is_complete());
    let e = &record.energies;
    assert!(e.last().unwrap().script_e < 0.999 * e[0].script_e);
    assert!(e.iter().all(|r| r.boundary_dissipation >= 0.0));
    let coarse: Vec<f64> = e.iter().step_by(25).map(|r| r.script_e).collect();
    assert!(coarse.windows(2).all(|w| w[1] < w[0]), "{coarse:?}");
}

fn hd_residual(n: usize, dt: f64, horizon: f64) -> f64 {
    let mesh = interval(n);
    let params = PhysicsParams::unloaded(&mesh, 2.0).with_load(&mesh, |[x, _]| x);
    let initial = PlateState::from_fns(
        &mesh,
        |[x, _]| (PI * x).sin() + 0.5 * (2.0 * PI * x).sin(),
        |[x, _]| 3.0 * (PI * x).sin().powi(2),
    );
    let law = DampingLaw::linear(1.0);
    let record =
        run_trajectory(&initial, horizon, &params, &law, &StepperConfig::new(dt), 1).unwrap();
    energy_balance_residual_hd(&record, &law, (0.0, *record.times.last().unwrap()))
        .unwrap()
        .abs()
}

#[test]
fn hinged_balance_converges_at_second_order() {
    let r: Vec<f64> = [(33, 2e-3), (65, 1e-3), (129, 5e-4)]
        .into_iter()
        .map(|(n, dt)| hd_residual(n, dt, 0.2))
        .collect();
    let orders: Vec<f64> = r.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    assert!(
        orders.iter().all(|&p| p > 1.8),
        "residuals {r:?} orders {orders:?}"
    );
}

/// Static cantilever profile: moment- and shear-free at the tip.
fn tip_loaded(x: f64) -> f64 {
    x * x * (6.0 - 4.0 * x + x * x) / 3.0
}

/// Starts at rest from the tip profile, or a quarter period later.
fn fcd_run(n: usize, dt: f64, shifted: bool) -> TrajectoryRecord {
    let mesh = beam(n);
    let params = PhysicsParams::unloaded(&mesh, 1.0);
    let omega = 1.875_f64.powi(2);
    let initial = if shifted {
        PlateState::from_fns(&mesh, |_| 0.0, |[x, _]| 0.15 * omega * tip_loaded(x))
    } else {
        PlateState::from_fns(&mesh, |[x, _]| 0.15 * tip_loaded(x), |_| 0.0)
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

#[test]
fn cantilever_balance_converges() {
    let r: Vec<f64> = [(17, 4e-3), (33, 2e-3), (65, 1e-3)]
        .into_iter()
        .map(|(n, dt)| {
            let record = fcd_run(n, dt, false);
            energy_balance_residual_fcd(&record, (0.0, *record.times.last().unwrap()))
                .unwrap()
                .residual
                .abs()
        })
        .collect();
    let orders: Vec<f64> = r.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    assert!(
        orders.iter().all(|&p| p > 1.8),
        "residuals {r:?} orders {orders:?}"
    );
}

#[test]
fn runs_are_deterministic() {
    let a = fcd_run(17, 4e-3, false);
    let b = fcd_run(17, 4e-3, false);
    assert_eq!(a.energies, b.energies);
    assert_eq!(a.snapshots, b.snapshots);
}

#[test]
fn wrong_configuration_is_rejected() {
    let mesh = square(9);
    let state = PlateState::zero(&mesh);
    let params = PhysicsParams::unloaded(&mesh, 0.0);
    assert!(matches!(
        step_fcd_1d(&state, &params, &StepperConfig::new(0.01)),
        Err(Error::WrongConfiguration { .. })
    ));
    let record = fcd_run(9, 0.01, false);
    assert!(matches!(
        energy_balance_residual_hd(&record, &DampingLaw::zero(), (0.0, 0.1)),
        Err(Error::WrongConfiguration { .. })
    ));
    assert!(matches!(
        energy_balance_residual_fcd(&record, (0.0, 5.0)),
        Err(Error::WrongConfiguration { .. }) | Err(Error::WindowOutsideRecord { .. })
    ));
}

#[test]
fn single_step_helpers_agree_with_stepper() {
    let mesh = interval(17);
    let params = PhysicsParams::unloaded(&mesh, 1.0);
    let initial = PlateState::from_fns(&mesh, |[x, _]| (PI * x).sin(), |_| 0.0);
    let law = DampingLaw::linear(2.0);
    let cfg = StepperConfig::new(1e-3);
    let one = step_hd(&initial, &params, &law, &cfg).unwrap();
    let stepper = Stepper::new(&mesh, params, law, cfg).unwrap();
    let two = stepper
        .step(&stepper.prepare(&initial).unwrap())
        .unwrap()
        .state;
    assert_eq!(one, two);
    assert!((one.t - 1e-3).abs() < 1e-15);
}

#[test]
fn picard_failure_is_reported() {
    let mesh = interval(33);
    let params = PhysicsParams::unloaded(&mesh, 0.0);
    let initial = PlateState::from_fns(
        &mesh,
        |[x, _]| 5.0 * (PI * x).sin(),
        |[x, _]| 50.0 * (PI * x).sin(),
    );
    let mut cfg = StepperConfig::new(0.05);
    cfg.picard_iterations = 2;
    cfg.picard_tolerance = 1e-14;
    let record =
        run_trajectory(&initial, 0.5, &params, &DampingLaw::saturating(), &cfg, 1).unwrap();
    let failure = record.failure.as_ref().expect("run should stop");
    assert!(failure.message.contains("Picard"), "{}", failure.message);
    assert!(!record.is_complete());
}

#[test]
fn cantilever_non_dissipative_term_takes_both_signs() {
    let a = fcd_run(33, 2e-3, false);
    let b = fcd_run(33, 2e-3, true);
    let ia = energy_balance_residual_fcd(&a, (0.0, 0.5))
        .unwrap()
        .non_dissipative_integral;
    let ib = energy_balance_residual_fcd(&b, (0.0, 0.5))
        .unwrap()
        .non_dissipative_integral;
    assert!(ia * ib < 0.0, "{ia} {ib}");
}
