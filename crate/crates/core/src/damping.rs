//! Boundary damping laws and sampled checks of their growth conditions.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A monotone damping function `D` with its derivative and the declared
/// slope bounds `m ≤ D′(s) ≤ M` for `|s| ≥ 1`.
#[derive(Clone)]
pub struct DampingLaw {
    name: String,
    value: ScalarFn,
    derivative: ScalarFn,
    slope_min: f64,
    slope_max: f64,
}

impl fmt::Debug for DampingLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DampingLaw")
            .field("name", &self.name)
            .field("slope_min", &self.slope_min)
            .field("slope_max", &self.slope_max)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampingValue {
    pub value: f64,
    pub derivative: f64,
}

impl DampingLaw {
    pub fn custom(
        name: impl Into<String>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
        slope_min: f64,
        slope_max: f64,
    ) -> Self {
        Self {
            name: name.into(),
            value: Arc::new(value),
            derivative: Arc::new(derivative),
            slope_min,
            slope_max,
        }
    }

    /// `D(s) = ks`.
    pub fn linear(k: f64) -> Self {
        Self::custom(format!("linear({k})"), move |s| k * s, move |_| k, k, k)
    }

    /// `D(s) = s + ½ sin s`, slopes in `[½, 3/2]`.
    pub fn saturating() -> Self {
        Self::custom(
            "saturating",
            |s| s + 0.5 * s.sin(),
            |s| 1.0 + 0.5 * s.cos(),
            0.5,
            1.5,
        )
    }

    /// Slope `inner` on `[-1, 1]` and `slope` outside.
    pub fn piecewise_linear(slope: f64, inner: f64) -> Self {
        Self::custom(
            format!("piecewise_linear({slope}, {inner})"),
            move |s| {
                if s.abs() <= 1.0 {
                    inner * s
                } else {
                    s.signum() * (inner + slope * (s.abs() - 1.0))
                }
            },
            move |s| if s.abs() < 1.0 { inner } else { slope },
            slope,
            slope,
        )
    }

    /// No damping.
    pub fn zero() -> Self {
        Self::custom("zero", |_| 0.0, |_| 0.0, 0.0, 0.0)
    }

    /// `D(s) = s³` declared with `m = 1`, `M = 500`. Its slope `3s²` passes
    /// `M` for `|s| > 12.9`.
    pub fn cubic_counterexample() -> Self {
        Self::custom("cubic", |s| s * s * s, |s| 3.0 * s * s, 1.0, 500.0)
    }

    /// `D(s) = arctan s` declared with `m = 0.1`, `M = 1`. Its slope
    /// `1/(1+s²)` drops below `m` for `|s| > 3`.
    pub fn arctan_counterexample() -> Self {
        Self::custom("arctan", f64::atan, |s| 1.0 / (1.0 + s * s), 0.1, 1.0)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn slope_min(&self) -> f64 {
        self.slope_min
    }

    pub fn slope_max(&self) -> f64 {
        self.slope_max
    }

    #[inline]
    pub fn value(&self, s: f64) -> f64 {
        (self.value)(s)
    }

    #[inline]
    pub fn derivative(&self, s: f64) -> f64 {
        (self.derivative)(s)
    }

    pub fn evaluate(&self, s: f64) -> DampingValue {
        DampingValue {
            value: self.value(s),
            derivative: self.derivative(s),
        }
    }

    /// Constant slope the time stepper treats implicitly: the midpoint of
    /// the declared slope range.
    pub fn implicit_slope(&self) -> f64 {
        0.5 * (self.slope_min + self.slope_max)
    }

    pub fn is_zero(&self) -> bool {
        self.name == "zero"
    }
}

/// `|v|⁶v`, the free-end shear feedback of the cantilever.
#[inline]
pub fn septic_boundary_damping(v: f64) -> f64 {
    let v2 = v * v;
    v2 * v2 * v2 * v
}

#[inline]
pub fn septic_boundary_damping_derivative(v: f64) -> f64 {
    let v2 = v * v;
    7.0 * v2 * v2 * v2
}

/// The individual conditions tested by [`verify_damping_assumption`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DampingCheck {
    /// `0 < m ≤ M < ∞`.
    DeclaredBounds,
    /// `D′(s) ≥ m` for `|s| ≥ 1`.
    LowerSlope,
    /// `D′(s) ≤ M` for `|s| ≥ 1`.
    UpperSlope,
    /// `D(s)s ≥ (m/2)s²` for `|s| ≥ 2`.
    Coercivity,
    /// `D(s)² ≤ D(s)s · max{sup_{|ξ|≤1} D′(ξ), M}`.
    QuadraticGrowth,
    /// `D` nondecreasing, `D′ ≥ 0`.
    Monotonicity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub check: DampingCheck,
    pub s: f64,
    /// Amount by which the inequality fails.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DampingReport {
    pub law: String,
    pub passed: bool,
    pub violations: Vec<Violation>,
    /// `sup_{|ξ|≤1} D′(ξ)` on the sample grid.
    pub inner_slope_sup: f64,
}

impl DampingReport {
    pub fn failed_checks(&self) -> BTreeSet<DampingCheck> {
        self.violations.iter().map(|v| v.check).collect()
    }
}

pub const DEFAULT_SAMPLE_RANGE: f64 = 20.0;
pub const DEFAULT_SAMPLES: usize = 10_000;

const REL_TOL: f64 = 1e-12;

fn sample_grid(range: f64, samples: usize) -> impl Iterator<Item = f64> {
    (0..samples).map(move |k| -range + 2.0 * range * k as f64 / (samples - 1) as f64)
}

fn inner_slope_sup(law: &DampingLaw, range: f64, samples: usize) -> f64 {
    let mut sup = sample_grid(range, samples)
        .filter(|s| s.abs() <= 1.0)
        .map(|s| law.derivative(s))
        .fold(f64::NEG_INFINITY, f64::max);
    for s in [-1.0, 0.0, 1.0] {
        sup = sup.max(law.derivative(s));
    }
    sup
}

/// Check the growth assumptions on a uniform grid over
/// `[-sample_range, sample_range]`. Only the first violation of each check is
/// recorded.
pub fn verify_damping_assumption(
    law: &DampingLaw,
    sample_range: f64,
    samples: usize,
) -> Result<DampingReport> {
    if !(sample_range >= 4.0) {
        return Err(Error::InvalidParameter(format!(
            "sample range must be >= 4, got {sample_range}"
        )));
    }
    if samples < 100 {
        return Err(Error::InvalidParameter(format!(
            "need at least 100 samples, got {samples}"
        )));
    }
    let (m, big_m) = (law.slope_min, law.slope_max);
    let sup_inner = inner_slope_sup(law, sample_range, samples);
    let growth = sup_inner.max(big_m);
    let mut violations = Vec::new();
    let mut seen = BTreeSet::new();
    let mut record = |check: DampingCheck, s: f64, excess: f64| {
        if seen.insert(check) {
            violations.push(Violation { check, s, excess });
        }
    };
    if !(m > 0.0 && m <= big_m && big_m.is_finite()) {
        record(DampingCheck::DeclaredBounds, 0.0, m.min(0.0).abs());
    }
    let mut previous: Option<f64> = None;
    for s in sample_grid(sample_range, samples) {
        let DampingValue {
            value: d,
            derivative: dp,
        } = law.evaluate(s);
        let tol = |x: f64| REL_TOL * (1.0 + x.abs());
        if s.abs() >= 1.0 {
            if dp < m - tol(m) {
                record(DampingCheck::LowerSlope, s, m - dp);
            }
            if dp > big_m + tol(big_m) {
                record(DampingCheck::UpperSlope, s, dp - big_m);
            }
        }
        if s.abs() >= 2.0 && d * s < 0.5 * m * s * s - tol(s * s) {
            record(DampingCheck::Coercivity, s, 0.5 * m * s * s - d * s);
        }
        if d * d > d * s * growth + tol(d * d) {
            record(DampingCheck::QuadraticGrowth, s, d * d - d * s * growth);
        }
        let decreasing = previous.is_some_and(|p| d < p - tol(p));
        if dp < 0.0 || decreasing {
            record(DampingCheck::Monotonicity, s, dp.min(0.0).abs());
        }
        previous = Some(d);
    }
    Ok(DampingReport {
        law: law.name.clone(),
        passed: violations.is_empty(),
        violations,
        inner_slope_sup: sup_inner,
    })
}

/// Constants of the combined bound `D(s)² + s² ≤ C₀ + C₁·D(s)s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticBound {
    pub c0: f64,
    pub c1: f64,
    /// Sample where `C₀` is attained.
    pub attained_at: f64,
}

/// `C₁ = max{2/m, sup_{|ξ|≤1}D′, M}` and the smallest `C₀ ≥ 0` making the
/// bound hold on the sample grid.
pub fn quadratic_bound(
    law: &DampingLaw,
    sample_range: f64,
    samples: usize,
) -> Result<QuadraticBound> {
    if !(law.slope_min > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "{}: lower slope must be positive",
            law.name
        )));
    }
    let sup_inner = inner_slope_sup(law, sample_range, samples);
    let c1 = (2.0 / law.slope_min).max(sup_inner).max(law.slope_max);
    let mut c0 = 0.0;
    let mut attained_at = 0.0;
    for s in sample_grid(sample_range, samples) {
        let d = law.value(s);
        let gap = d * d + s * s - c1 * d * s;
        if gap > c0 {
            c0 = gap;
            attained_at = s;
        }
    }
    Ok(QuadraticBound {
        c0,
        c1,
        attained_at,
    })
}

/// Damping law selected by name in a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawSpec {
    Linear { k: f64 },
    Saturating,
    PiecewiseLinear { slope: f64, inner_slope: f64 },
    Zero,
    Cubic,
    Arctan,
}

impl Default for LawSpec {
    fn default() -> Self {
        LawSpec::Linear { k: 1.0 }
    }
}

impl LawSpec {
    pub fn build(&self) -> Result<DampingLaw> {
        Ok(match *self {
            LawSpec::Linear { k } => {
                if !(k >= 0.0 && k.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "linear damping needs k >= 0, got {k}"
                    )));
                }
                DampingLaw::linear(k)
            }
            LawSpec::Saturating => DampingLaw::saturating(),
            LawSpec::PiecewiseLinear { slope, inner_slope } => {
                if !(slope > 0.0 && inner_slope >= slope) {
                    return Err(Error::InvalidParameter(format!(
                        "piecewise linear damping needs 0 < slope <= inner_slope, got {slope}, {inner_slope}"
                    )));
                }
                DampingLaw::piecewise_linear(slope, inner_slope)
            }
            LawSpec::Zero => DampingLaw::zero(),
            LawSpec::Cubic => DampingLaw::cubic_counterexample(),
            LawSpec::Arctan => DampingLaw::arctan_counterexample(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn verify(law: &DampingLaw) -> DampingReport {
        verify_damping_assumption(law, DEFAULT_SAMPLE_RANGE, DEFAULT_SAMPLES).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(
            DampingLaw::linear(1.0).evaluate(2.0),
            DampingValue {
                value: 2.0,
                derivative: 1.0
            }
        );
        let sat = DampingLaw::saturating().evaluate(PI);
        assert!((sat.value - PI).abs() < 1e-15);
        assert!((sat.derivative - 0.5).abs() < 1e-15);
        for law in [
            DampingLaw::linear(3.0),
            DampingLaw::saturating(),
            DampingLaw::piecewise_linear(1.0, 4.0),
            DampingLaw::zero(),
            DampingLaw::cubic_counterexample(),
            DampingLaw::arctan_counterexample(),
        ] {
            assert_eq!(law.value(0.0), 0.0);
        }
    }

    #[test]
    fn shipped_laws_pass() {
        for law in [
            DampingLaw::linear(1.0),
            DampingLaw::linear(2.5),
            DampingLaw::saturating(),
            DampingLaw::piecewise_linear(1.0, 3.0),
        ] {
            let report = verify(&law);
            assert!(report.passed, "{}: {:?}", law.name(), report.violations);
        }
    }

    #[test]
    fn counterexamples_fail_only_their_check() {
        let cubic = verify(&DampingLaw::cubic_counterexample());
        assert_eq!(
            cubic.failed_checks(),
            BTreeSet::from([DampingCheck::UpperSlope])
        );
        let first = &cubic.violations[0];
        assert!(first.s.abs() > 12.0);
        let arctan = verify(&DampingLaw::arctan_counterexample());
        assert_eq!(
            arctan.failed_checks(),
            BTreeSet::from([DampingCheck::LowerSlope])
        );
        assert!((DampingLaw::arctan_counterexample().derivative(10.0) - 1.0 / 101.0).abs() < 1e-15);
        assert_eq!(DampingLaw::cubic_counterexample().derivative(10.0), 300.0);
    }

    #[test]
    fn zero_law_fails_declaration_only() {
        let report = verify(&DampingLaw::zero());
        assert_eq!(
            report.failed_checks(),
            BTreeSet::from([DampingCheck::DeclaredBounds])
        );
    }

    #[test]
    fn verification_preconditions() {
        let law = DampingLaw::linear(1.0);
        assert!(verify_damping_assumption(&law, 3.0, 1000).is_err());
        assert!(verify_damping_assumption(&law, 5.0, 50).is_err());
    }

    #[test]
    fn septic_examples() {
        assert_eq!(septic_boundary_damping(0.0), 0.0);
        assert_eq!(septic_boundary_damping(2.0), 128.0);
        assert_eq!(septic_boundary_damping(-1.0), -1.0);
        assert_eq!(septic_boundary_damping_derivative(1.0), 7.0);
    }

    #[test]
    fn quadratic_bound_holds_and_is_attained_near_origin() {
        for law in [
            DampingLaw::linear(1.0),
            DampingLaw::saturating(),
            DampingLaw::piecewise_linear(0.5, 2.0),
        ] {
            let bound = quadratic_bound(&law, DEFAULT_SAMPLE_RANGE, DEFAULT_SAMPLES).unwrap();
            assert!(bound.c0.is_finite() && bound.c0 >= 0.0);
            assert!(
                bound.attained_at.abs() < 2.0,
                "{}: {}",
                law.name(),
                bound.attained_at
            );
            for s in sample_grid(20.0, 10_000) {
                let d = law.value(s);
                assert!(d * d + s * s <= bound.c0 + bound.c1 * d * s + 1e-9);
            }
        }
    }

    #[test]
    fn law_spec_round_trip() {
        for spec in [
            LawSpec::Linear { k: 2.0 },
            LawSpec::Saturating,
            LawSpec::PiecewiseLinear {
                slope: 1.0,
                inner_slope: 2.0,
            },
            LawSpec::Zero,
        ] {
            let text = serde_json::to_string(&spec).unwrap();
            assert_eq!(serde_json::from_str::<LawSpec>(&text).unwrap(), spec);
        }
        assert!(serde_json::from_str::<LawSpec>(r#"{"name":"linear","k":1,"extra":2}"#).is_err());
        assert!(serde_json::from_str::<LawSpec>(r#"{"name":"quintic"}"#).is_err());
        assert!(LawSpec::PiecewiseLinear {
            slope: 2.0,
            inner_slope: 1.0
        }
        .build()
        .is_err());
    }

    proptest! {
        #[test]
        fn septic_monotone_and_odd(a in -3.0f64..3.0, b in -3.0f64..3.0) {
            prop_assert!((septic_boundary_damping(a) - septic_boundary_damping(b)) * (a - b) >= 0.0);
            prop_assert_eq!(septic_boundary_damping(-a), -septic_boundary_damping(a));
        }

        #[test]
        fn shipped_laws_monotone(a in -30.0f64..30.0, b in -30.0f64..30.0) {
            for law in [DampingLaw::linear(1.0), DampingLaw::saturating(), DampingLaw::piecewise_linear(1.0, 3.0)] {
                prop_assert!((law.value(a) - law.value(b)) * (a - b) >= 0.0);
            }
        }
    }
}
