//! Static 1+1D line element `ds² = −c²(x) dt² + dx²` and its null geodesics.
//!
//! Positions are dimensionless (`x̂ = x / a` for the cubic profile) and speeds
//! are in units of the background propagation speed, so coordinate times come
//! out in units of `a / c̃₀`. A right-moving null ray from `x₁` to `x₂` takes
//! `∫ dx̂ / c̃(x̂)`; the round trip is twice that. Where `c̃ < 0` the integral
//! is negative and the ray returns before it left.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::quadrature::{self, QuadratureConfig, QuadratureError};
use crate::roots;

/// Samples taken across an interval before integrating, in addition to the
/// endpoints.
pub const HORIZON_GUARD_SAMPLES: usize = 256;
/// `|c̃|` below this counts as touching a horizon.
pub const HORIZON_SPEED_FLOOR: f64 = 1e-12;
/// Required relative agreement between quadrature and the cubic closed form.
pub const CLOSED_FORM_TOLERANCE: f64 = 1e-8;

const HORIZON_TOL: f64 = 1e-12;
const CLASSIFY_GRID_POINTS: usize = 1025;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpacetimeError {
    #[error("x = {x} outside the tabulated domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },
    #[error("coordinate time diverges at the horizon x = 0")]
    HorizonSingularity,
    #[error("horizon at x = {at} lies on the path between {x1} and {x2}")]
    HorizonInPath { x1: f64, x2: f64, at: f64 },
    #[error("invalid speed profile: {0}")]
    InvalidProfile(String),
    #[error("quadrature {quadrature} and closed form {closed_form} disagree")]
    ClosedFormMismatch { quadrature: f64, closed_form: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Piecewise-linear speed profile through strictly increasing samples.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedProfile {
    xs: Vec<f64>,
    speeds: Vec<f64>,
}

impl TabulatedProfile {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self, SpacetimeError> {
        if samples.len() < 2 {
            return Err(SpacetimeError::InvalidProfile(
                "tabulated profile needs at least two samples".into(),
            ));
        }
        if samples.iter().any(|(x, c)| !x.is_finite() || !c.is_finite()) {
            return Err(SpacetimeError::InvalidProfile("non-finite sample".into()));
        }
        if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(SpacetimeError::InvalidProfile(
                "sample positions must be strictly increasing".into(),
            ));
        }
        let (xs, speeds) = samples.into_iter().unzip();
        Ok(Self { xs, speeds })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.speeds.iter().copied())
    }

    fn eval(&self, x: f64) -> Result<f64, SpacetimeError> {
        let (lo, hi) = self.domain();
        if !(lo..=hi).contains(&x) {
            return Err(SpacetimeError::OutOfDomain { x, lo, hi });
        }
        let i = match self.xs.partition_point(|&xi| xi <= x) {
            0 => 0,
            n if n >= self.xs.len() => self.xs.len() - 2,
            n => n - 1,
        };
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let (c0, c1) = (self.speeds[i], self.speeds[i + 1]);
        let t = (x - x0) / (x1 - x0);
        Ok(c0 + t * (c1 - c0))
    }
}

/// Closed-form speed profile given as a deterministic function.
#[derive(Clone)]
pub struct AnalyticProfile {
    pub name: String,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl AnalyticProfile {
    pub fn new(name: impl Into<String>, eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
        }
    }
}

impl fmt::Debug for AnalyticProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticProfile").field("name", &self.name).finish()
    }
}

/// Signed metric function `c̃(x̂)` in units of the background speed.
#[derive(Debug, Clone)]
pub enum SpeedProfile {
    /// `c̃(x̂) = −x̂³ / 2` with `x̂ = x / a`; `scale_a` is `a` in meters.
    Cubic { scale_a: f64 },
    Tabulated(TabulatedProfile),
    Analytic(AnalyticProfile),
}

impl SpeedProfile {
    pub fn cubic(scale_a: f64) -> Result<Self, SpacetimeError> {
        if !(scale_a.is_finite() && scale_a > 0.0) {
            return Err(SpacetimeError::InvalidProfile(format!(
                "cubic scale a = {scale_a} must be positive"
            )));
        }
        Ok(SpeedProfile::Cubic { scale_a })
    }

    /// Flat profile `c̃ = value` everywhere.
    pub fn constant(value: f64) -> Self {
        SpeedProfile::Analytic(AnalyticProfile::new(format!("constant {value}"), move |_| value))
    }

    /// Domain limits, `None` when the profile is defined everywhere.
    pub fn domain(&self) -> Option<(f64, f64)> {
        match self {
            SpeedProfile::Tabulated(t) => Some(t.domain()),
            _ => None,
        }
    }

    pub fn is_cubic(&self) -> bool {
        matches!(self, SpeedProfile::Cubic { .. })
    }

    /// Clip a window to the profile domain; `None` if they do not overlap.
    pub fn clip(&self, (lo, hi): (f64, f64)) -> Option<(f64, f64)> {
        let (lo, hi) = match self.domain() {
            Some((dlo, dhi)) => (lo.max(dlo), hi.min(dhi)),
            None => (lo, hi),
        };
        (lo <= hi).then_some((lo, hi))
    }

    pub fn speed(&self, x: f64) -> Result<f64, SpacetimeError> {
        metric_speed(self, x)
    }
}

pub fn metric_speed(profile: &SpeedProfile, x: f64) -> Result<f64, SpacetimeError> {
    match profile {
        SpeedProfile::Cubic { .. } => Ok(-0.5 * x * x * x),
        SpeedProfile::Tabulated(t) => t.eval(x),
        SpeedProfile::Analytic(a) => Ok((a.eval)(x)),
    }
}

/// Antiderivative `T(x̂) = 1 / x̂²` of `1 / c̃` for the cubic profile.
pub fn coordinate_time_cubic(x: f64) -> Result<f64, SpacetimeError> {
    if x == 0.0 {
        return Err(SpacetimeError::HorizonSingularity);
    }
    Ok(1.0 / (x * x))
}

fn horizon_guard(profile: &SpeedProfile, x1: f64, x2: f64) -> Result<(), SpacetimeError> {
    let (lo, hi) = (x1.min(x2), x1.max(x2));
    let xs = roots::grid(lo, hi, HORIZON_GUARD_SAMPLES + 2);
    let mut prev: Option<(f64, f64)> = None;
    for x in xs {
        let c = metric_speed(profile, x)?;
        if c.abs() < HORIZON_SPEED_FLOOR {
            return Err(SpacetimeError::HorizonInPath { x1, x2, at: x });
        }
        if let Some((xp, cp)) = prev {
            if cp.signum() != c.signum() {
                let at = roots::bisect(
                    |t| metric_speed(profile, t).unwrap_or(f64::NAN),
                    xp,
                    x,
                    HORIZON_TOL,
                )
                .unwrap_or(0.5 * (xp + x));
                return Err(SpacetimeError::HorizonInPath { x1, x2, at });
            }
        }
        prev = Some((x, c));
    }
    Ok(())
}

/// Coordinate time `∫_{x1}^{x2} dx̂ / c̃(x̂)` of a null ray, by adaptive quadrature.
pub fn elapsed_time(profile: &SpeedProfile, x1: f64, x2: f64) -> Result<f64, SpacetimeError> {
    elapsed_time_with(profile, x1, x2, &QuadratureConfig::default())
}

pub fn elapsed_time_with(
    profile: &SpeedProfile,
    x1: f64,
    x2: f64,
    config: &QuadratureConfig,
) -> Result<f64, SpacetimeError> {
    if x1 == x2 {
        metric_speed(profile, x1)?;
        return Ok(0.0);
    }
    horizon_guard(profile, x1, x2)?;
    let (lo, hi) = (x1.min(x2), x1.max(x2));
    let q = quadrature::integrate(
        |x| 1.0 / metric_speed(profile, x).unwrap_or(f64::NAN),
        lo,
        hi,
        config,
    )?;
    Ok(if x1 <= x2 { q.value } else { -q.value })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TripMethod {
    ClosedForm,
    Quadrature,
}

/// Out-and-back null trip between two positions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TripReport {
    pub x1: f64,
    pub x2: f64,
    pub one_way_time: f64,
    pub round_trip_time: f64,
    /// `round_trip_time > 0`.
    pub causal: bool,
    pub method: TripMethod,
    /// Cubic closed form `2 (1/x̂₂² − 1/x̂₁²)`, when it applies.
    pub closed_form_round_trip: Option<f64>,
}

fn cubic_round_trip(x1: f64, x2: f64) -> Result<f64, SpacetimeError> {
    if x1 == x2 {
        return Ok(0.0);
    }
    Ok(2.0 * (coordinate_time_cubic(x2)? - coordinate_time_cubic(x1)?))
}

/// Round trip by quadrature. For the cubic profile the closed form is also
/// evaluated and must agree to [`CLOSED_FORM_TOLERANCE`]; the reported times
/// and the causal flag come from the quadrature.
pub fn round_trip_time(
    profile: &SpeedProfile,
    x1: f64,
    x2: f64,
) -> Result<TripReport, SpacetimeError> {
    let one_way = elapsed_time(profile, x1, x2)?;
    let round_trip = 2.0 * one_way;
    let closed_form_round_trip = if profile.is_cubic() {
        let closed = cubic_round_trip(x1, x2)?;
        let scale = closed.abs().max(f64::MIN_POSITIVE);
        if (round_trip - closed).abs() > CLOSED_FORM_TOLERANCE * scale {
            return Err(SpacetimeError::ClosedFormMismatch {
                quadrature: round_trip,
                closed_form: closed,
            });
        }
        Some(closed)
    } else {
        None
    };
    Ok(TripReport {
        x1,
        x2,
        one_way_time: one_way,
        round_trip_time: round_trip,
        causal: round_trip > 0.0,
        method: TripMethod::Quadrature,
        closed_form_round_trip,
    })
}

/// Cubic round trip from the antiderivative alone, no quadrature. The path
/// must not contain the horizon.
pub fn round_trip_time_closed_form(x1: f64, x2: f64) -> Result<TripReport, SpacetimeError> {
    if x1 != x2 && x1.min(x2) <= 0.0 && x1.max(x2) >= 0.0 {
        return Err(SpacetimeError::HorizonInPath { x1, x2, at: 0.0 });
    }
    let round_trip = cubic_round_trip(x1, x2)?;
    Ok(TripReport {
        x1,
        x2,
        one_way_time: 0.5 * round_trip,
        round_trip_time: round_trip,
        causal: round_trip > 0.0,
        method: TripMethod::ClosedForm,
        closed_form_round_trip: Some(round_trip),
    })
}

/// Zeros of `c̃` inside `window`, sorted ascending.
pub fn find_horizons(profile: &SpeedProfile, window: (f64, f64), grid_points: usize) -> Vec<f64> {
    let Some((lo, hi)) = profile.clip(window) else {
        return Vec::new();
    };
    if lo == hi {
        return match metric_speed(profile, lo) {
            Ok(0.0) => vec![lo],
            _ => Vec::new(),
        };
    }
    roots::scan_zeros(
        |x| metric_speed(profile, x).unwrap_or(f64::NAN),
        lo,
        hi,
        grid_points.max(2),
        HORIZON_TOL,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Positive,
    Negative,
    Zero,
}

impl Sign {
    fn of(v: f64) -> Self {
        if v > 0.0 {
            Sign::Positive
        } else if v < 0.0 {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }
}

/// Whether right-moving null rays advance or rewind coordinate time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Advances,
    Rewinds,
    Frozen,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CausalRegion {
    pub lo: f64,
    pub hi: f64,
    pub speed_sign: Sign,
    pub orientation: Orientation,
}

/// Split `window` at its horizons and classify each piece by the sign of `c̃`
/// (equivalently of `1 / c̃`).
pub fn classify_regions(profile: &SpeedProfile, window: (f64, f64)) -> Vec<CausalRegion> {
    let Some((lo, hi)) = profile.clip(window) else {
        return Vec::new();
    };
    let mut cuts = vec![lo];
    cuts.extend(find_horizons(profile, (lo, hi), CLASSIFY_GRID_POINTS));
    cuts.push(hi);
    cuts.dedup();
    cuts.windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let sign = Sign::of(metric_speed(profile, mid).unwrap_or(0.0));
            let orientation = match sign {
                Sign::Positive => Orientation::Advances,
                Sign::Negative => Orientation::Rewinds,
                Sign::Zero => Orientation::Frozen,
            };
            CausalRegion {
                lo: w[0],
                hi: w[1],
                speed_sign: sign,
                orientation,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic() -> SpeedProfile {
        SpeedProfile::cubic(1.0).unwrap()
    }

    const CBRT2: f64 = 1.2599210498948732;

    #[test]
    fn cubic_speed_examples() {
        let p = cubic();
        assert_eq!(metric_speed(&p, -1.0).unwrap(), 0.5);
        assert!((metric_speed(&p, -CBRT2).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(metric_speed(&p, 0.0).unwrap(), 0.0);
        assert!(metric_speed(&p, 0.3).unwrap() < 0.0);
    }

    #[test]
    fn tabulated_interpolates_and_bounds() {
        let t = TabulatedProfile::new(vec![(0.0, 1.0), (1.0, 0.5), (2.0, 0.5)]).unwrap();
        let p = SpeedProfile::Tabulated(t);
        assert_eq!(metric_speed(&p, 0.5).unwrap(), 0.75);
        assert_eq!(metric_speed(&p, 2.0).unwrap(), 0.5);
        assert!(matches!(
            metric_speed(&p, 2.5),
            Err(SpacetimeError::OutOfDomain { .. })
        ));
        assert!(TabulatedProfile::new(vec![(0.0, 1.0), (0.0, 2.0)]).is_err());
        assert!(TabulatedProfile::new(vec![(0.0, 1.0)]).is_err());
    }

    #[test]
    fn coordinate_time_examples() {
        assert_eq!(coordinate_time_cubic(-1.0).unwrap(), 1.0);
        assert_eq!(coordinate_time_cubic(-2.0).unwrap(), 0.25);
        assert_eq!(
            coordinate_time_cubic(0.0),
            Err(SpacetimeError::HorizonSingularity)
        );
    }

    #[test]
    fn elapsed_time_examples() {
        let p = cubic();
        let t = elapsed_time(&p, -CBRT2, -1.0).unwrap();
        assert!((t - 0.3700394750525634).abs() < 1e-8);
        assert_eq!(elapsed_time(&p, -0.7, -0.7).unwrap(), 0.0);
        let err = elapsed_time(&p, -1.0, 0.5).unwrap_err();
        match err {
            SpacetimeError::HorizonInPath { at, .. } => assert!(at.abs() < 1e-9),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn guard_catches_endpoint_on_horizon() {
        assert!(matches!(
            elapsed_time(&cubic(), -1.0, 0.0),
            Err(SpacetimeError::HorizonInPath { .. })
        ));
    }

    #[test]
    fn tabulated_elapsed_time() {
        // c̃ = 1 on [0,1], then 1/2 on [1,2]: T = 1 + 2
        let t = TabulatedProfile::new(vec![(0.0, 1.0), (1.0, 1.0), (1.0 + 1e-9, 0.5), (2.0, 0.5)])
            .unwrap();
        let p = SpeedProfile::Tabulated(t);
        let v = elapsed_time(&p, 0.0, 2.0).unwrap();
        assert!((v - 3.0).abs() < 1e-8, "{v}");
        assert!(elapsed_time(&p, 0.0, 3.0).is_err());
    }

    #[test]
    fn round_trip_examples() {
        let p = cubic();
        let r = round_trip_time(&p, -1.2, -1.0).unwrap();
        assert!((r.round_trip_time - 0.6111111111111112).abs() < 1e-9);
        assert!(r.causal);
        assert_eq!(r.method, TripMethod::Quadrature);
        let r = round_trip_time(&p, -2.0, -1.0).unwrap();
        assert!((r.round_trip_time - 1.5).abs() < 1e-9);
        assert_eq!(r.round_trip_time, 2.0 * r.one_way_time);
        let r = round_trip_time(&p, -1.1, -1.1).unwrap();
        assert_eq!(r.round_trip_time, 0.0);
        assert!(!r.causal);
    }

    #[test]
    fn negative_speed_region_rewinds() {
        let r = round_trip_time(&cubic(), 0.5, 1.0).unwrap();
        assert!(r.round_trip_time < 0.0);
        assert!(!r.causal);
    }

    #[test]
    fn closed_form_report() {
        let r = round_trip_time_closed_form(-2.0, -1.0).unwrap();
        assert_eq!(r.round_trip_time, 1.5);
        assert_eq!(r.method, TripMethod::ClosedForm);
        assert!(round_trip_time_closed_form(-1.0, 1.0).is_err());
    }

    #[test]
    fn horizons() {
        let p = cubic();
        let h = find_horizons(&p, (-2.0, 2.0), 101);
        assert_eq!(h.len(), 1);
        assert!(h[0].abs() < 1e-12);
        let h = find_horizons(&p, (-2.0, 1.7), 64);
        assert_eq!(h.len(), 1);
        assert!(h[0].abs() < 1e-12);
        assert!(find_horizons(&p, (-2.0, -0.1), 101).is_empty());
        assert!(find_horizons(&SpeedProfile::constant(1.0), (-5.0, 5.0), 11).is_empty());
    }

    #[test]
    fn regions() {
        let p = cubic();
        let r = classify_regions(&p, (-1.26, 1.26));
        assert_eq!(r.len(), 2);
        assert!(r[0].hi.abs() < 1e-12);
        assert_eq!(r[0].speed_sign, Sign::Positive);
        assert_eq!(r[0].orientation, Orientation::Advances);
        assert_eq!(r[1].speed_sign, Sign::Negative);
        assert_eq!(r[1].orientation, Orientation::Rewinds);

        let r = classify_regions(&SpeedProfile::constant(1.0), (0.0, 3.0));
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].speed_sign, Sign::Positive);

        let r = classify_regions(&p, (-1.26, -0.1));
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].speed_sign, Sign::Positive);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn antisymmetric(a in -3.0f64..-0.2, b in -3.0f64..-0.2) {
                let p = cubic();
                let fwd = elapsed_time(&p, a, b).unwrap();
                let bwd = elapsed_time(&p, b, a).unwrap();
                prop_assert!((fwd + bwd).abs() <= 1e-12);
            }

            #[test]
            fn additive(a in -3.0f64..-0.2, b in -3.0f64..-0.2, c in -3.0f64..-0.2) {
                let mut v = [a, b, c];
                v.sort_by(f64::total_cmp);
                let p = cubic();
                let whole = elapsed_time(&p, v[0], v[2]).unwrap();
                let parts = elapsed_time(&p, v[0], v[1]).unwrap() + elapsed_time(&p, v[1], v[2]).unwrap();
                prop_assert!((whole - parts).abs() <= 1e-9);
            }

            #[test]
            fn positive_speed_positive_time(a in -3.0f64..-0.2, b in -3.0f64..-0.2) {
                prop_assume!(a < b);
                prop_assert!(elapsed_time(&cubic(), a, b).unwrap() > 0.0);
            }

            #[test]
            fn horizon_exact(lo in -5.0f64..-0.01, hi in 0.01f64..5.0, n in 2usize..500) {
                let h = find_horizons(&cubic(), (lo, hi), n);
                prop_assert_eq!(h.len(), 1);
                prop_assert!(h[0].abs() <= 1e-12);
            }
        }
    }
}
