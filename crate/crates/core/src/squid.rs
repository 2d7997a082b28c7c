//! Flux/speed algebra of a dc-SQUID array transmission line.
//!
//! A single SQUID behaves as a flux-tunable inductor
//!
//! ```text
//! L_s(f) = φ₀ / (4π I_c |cos(π f)| cos ψ),    f = φ_ext / φ₀
//! ```
//!
//! so the propagation speed along the array is `c(f) = c₀ √|cos(π f)|`, where
//! `c₀ = ε √(4π I_c / (φ₀ C_s))` is the zero-flux speed. Squaring the speed
//! relation to invert it admits a negative-speed root, so every inversion
//! carries an explicit [`Branch`] (the sign of `cos(π f)`) and only ever
//! returns the physical, non-negative speed.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Magnetic flux quantum h/2e in webers.
pub const FLUX_QUANTUM: f64 = 2.067_833_848e-15;

/// `|cos(π f)|` at or below this value is treated as the critical flux.
pub const CRITICAL_COS_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SquidError {
    #[error("invalid SQUID parameter {name} = {value} (must be finite and > 0)")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("flux ratio {0} outside the principal window [0, 1]")]
    FluxOutOfRange(f64),
    #[error("cos(psi) = {0} outside (0, 1]")]
    InvalidPhase(f64),
    #[error("critical flux f = {flux}: |cos(pi f)| = {cos_abs:e} is at the divergence (infinite inductance)")]
    CriticalFlux { flux: f64, cos_abs: f64 },
    #[error("speed not realizable: {0}")]
    Domain(String),
}

/// Physical constants of one SQUID cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SquidParams {
    /// Critical current I_c in amperes.
    pub critical_current: f64,
    /// Cell capacitance C_s in farads.
    pub cell_capacitance: f64,
    /// Cell length ε in meters.
    pub cell_length: f64,
    /// φ₀ in webers.
    pub flux_quantum: f64,
}

impl SquidParams {
    pub fn new(
        critical_current: f64,
        cell_capacitance: f64,
        cell_length: f64,
    ) -> Result<Self, SquidError> {
        let params = Self {
            critical_current,
            cell_capacitance,
            cell_length,
            flux_quantum: FLUX_QUANTUM,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), SquidError> {
        for (name, value) in [
            ("critical_current", self.critical_current),
            ("cell_capacitance", self.cell_capacitance),
            ("cell_length", self.cell_length),
            ("flux_quantum", self.flux_quantum),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(SquidError::InvalidParameter { name, value });
            }
        }
        Ok(())
    }

    /// Inductance of one cell with no external flux and `cos ψ = 1`.
    pub fn zero_flux_inductance(&self) -> f64 {
        self.flux_quantum / (4.0 * PI * self.critical_current)
    }

    /// Capacitance per unit length, C_s / ε.
    pub fn capacitance_per_length(&self) -> f64 {
        self.cell_capacitance / self.cell_length
    }

    /// Zero-flux propagation speed c₀ in m/s.
    pub fn base_speed(&self) -> f64 {
        base_speed(self)
    }
}

/// Dimensionless external flux `φ_ext / φ₀`, restricted to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FluxRatio(f64);

impl FluxRatio {
    pub const ZERO: FluxRatio = FluxRatio(0.0);
    pub const HALF: FluxRatio = FluxRatio(0.5);
    pub const ONE: FluxRatio = FluxRatio(1.0);

    pub fn new(value: f64) -> Result<Self, SquidError> {
        if (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(SquidError::FluxOutOfRange(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `|cos(π f)|`, the quantity every speed and inductance depends on.
    ///
    /// Evaluated as `sin(π (u − 1/2))` with `u` the member of `{f, 1 − f}` in
    /// `[1/2, 1]`, so that `f` and `1 − f` give bit-identical results and
    /// `f = 1/2` gives exactly zero.
    pub fn cos_abs(self) -> f64 {
        let u = if self.0 <= 0.5 { 1.0 - self.0 } else { self.0 };
        (PI * (u - 0.5)).sin()
    }

    /// Branch the flux sits on, or `None` at exactly `f = 1/2`.
    pub fn branch(self) -> Option<Branch> {
        branch_of(self)
    }
}

impl TryFrom<f64> for FluxRatio {
    type Error = SquidError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<FluxRatio> for f64 {
    fn from(f: FluxRatio) -> f64 {
        f.0
    }
}

/// Sign of `cos(π f)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    /// `f ∈ [0, 1/2)`
    CosPositive,
    /// `f ∈ (1/2, 1]`
    CosNegative,
}

impl Branch {
    fn sign(self) -> f64 {
        match self {
            Branch::CosPositive => 1.0,
            Branch::CosNegative => -1.0,
        }
    }
}

pub fn branch_of(f: FluxRatio) -> Option<Branch> {
    if f.0 < 0.5 {
        Some(Branch::CosPositive)
    } else if f.0 > 0.5 {
        Some(Branch::CosNegative)
    } else {
        None
    }
}

/// Weak-signal assumption on the SQUID phase, carried as `cos ψ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseAssumption {
    cos_psi: f64,
}

impl PhaseAssumption {
    pub fn new(cos_psi: f64) -> Result<Self, SquidError> {
        if cos_psi > 0.0 && cos_psi <= 1.0 {
            Ok(Self { cos_psi })
        } else {
            Err(SquidError::InvalidPhase(cos_psi))
        }
    }

    pub fn cos_psi(self) -> f64 {
        self.cos_psi
    }

    /// True when the default `cos ψ = 1` is in force.
    pub fn is_weak_signal(self) -> bool {
        self.cos_psi == 1.0
    }
}

impl Default for PhaseAssumption {
    fn default() -> Self {
        Self { cos_psi: 1.0 }
    }
}

/// Inductance of a single SQUID in henries.
pub fn squid_inductance(
    params: &SquidParams,
    f: FluxRatio,
    phase: PhaseAssumption,
) -> Result<f64, SquidError> {
    squid_inductance_with_floor(params, f, phase, CRITICAL_COS_FLOOR)
}

/// As [`squid_inductance`] with an explicit critical floor on `|cos(π f)|`.
pub fn squid_inductance_with_floor(
    params: &SquidParams,
    f: FluxRatio,
    phase: PhaseAssumption,
    cos_floor: f64,
) -> Result<f64, SquidError> {
    let cos_abs = f.cos_abs();
    if cos_abs <= cos_floor {
        return Err(SquidError::CriticalFlux {
            flux: f.0,
            cos_abs,
        });
    }
    Ok(params.flux_quantum / (4.0 * PI * params.critical_current * cos_abs * phase.cos_psi()))
}

/// Zero-flux speed `c₀ = ε √(4π I_c / (φ₀ C_s))` in m/s.
pub fn base_speed(params: &SquidParams) -> f64 {
    params.cell_length
        * (4.0 * PI * params.critical_current / (params.flux_quantum * params.cell_capacitance))
            .sqrt()
}

/// Speed in units of c₀ with no DC bias: `√|cos(π f)|`.
pub fn effective_speed(f: FluxRatio) -> f64 {
    f.cos_abs().sqrt()
}

/// Reduced background speed `c̃₀(f_dc) / c₀ = √|cos(π f_dc)|`.
pub fn background_speed(f_dc: FluxRatio) -> f64 {
    effective_speed(f_dc)
}

/// Speed in units of the DC-reduced background speed:
/// `√(|sec(π f_dc)| |cos(π f_total)|)`.
pub fn speed_with_dc(f_dc: FluxRatio, f_total: FluxRatio) -> Result<f64, SquidError> {
    let dc_cos = f_dc.cos_abs();
    if dc_cos <= CRITICAL_COS_FLOOR {
        return Err(SquidError::CriticalFlux {
            flux: f_dc.0,
            cos_abs: dc_cos,
        });
    }
    Ok((f_total.cos_abs() / dc_cos).sqrt())
}

/// Invert `c̃² = |cos(π f)|` on the requested branch (no DC bias).
pub fn flux_for_speed(c_tilde_sq: f64, branch: Branch) -> Result<FluxRatio, SquidError> {
    if !(0.0..=1.0).contains(&c_tilde_sq) {
        return Err(SquidError::Domain(format!(
            "squared speed {c_tilde_sq} outside [0, 1]"
        )));
    }
    let f = (branch.sign() * c_tilde_sq).acos() / PI;
    FluxRatio::new(f.clamp(0.0, 1.0))
}

/// AC flux that, on top of the bias `f_dc`, yields squared speed `c_tilde_sq`
/// in units of the reduced background speed.
///
/// The returned ratio is signed: on `CosPositive` with `c_tilde_sq > 1` the
/// total flux sits below the bias. The branch always names the sign of
/// `cos(π (f_dc + f_ac))`.
pub fn ac_flux_for_speed(
    f_dc: FluxRatio,
    c_tilde_sq: f64,
    branch: Branch,
) -> Result<f64, SquidError> {
    let dc_cos = f_dc.cos_abs();
    if dc_cos <= CRITICAL_COS_FLOOR {
        return Err(SquidError::CriticalFlux {
            flux: f_dc.0,
            cos_abs: dc_cos,
        });
    }
    if c_tilde_sq < 0.0 {
        return Err(SquidError::Domain(format!(
            "squared speed {c_tilde_sq} is negative"
        )));
    }
    let argument = branch.sign() * dc_cos * c_tilde_sq;
    if !(-1.0..=1.0).contains(&argument) {
        return Err(SquidError::Domain(format!(
            "squared speed {c_tilde_sq} exceeds the branch reach {:.6} for f_dc = {}",
            1.0 / dc_cos,
            f_dc.0
        )));
    }
    Ok(argument.acos() / PI - f_dc.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(ic: f64) -> SquidParams {
        SquidParams::new(ic, 90e-15, 10e-6).unwrap()
    }

    fn flux(v: f64) -> FluxRatio {
        FluxRatio::new(v).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn inductance_at_zero_flux() {
        let l0 = squid_inductance(&params(1e-6), FluxRatio::ZERO, Default::default()).unwrap();
        // φ₀ / (4π · 1 µA)
        assert!(rel(l0, 1.6455298920096751e-10) < 1e-12);
        assert!(rel(l0, params(1e-6).zero_flux_inductance()) < 1e-15);
    }

    #[test]
    fn inductance_doubles_at_one_third() {
        let p = params(1e-6);
        let l0 = squid_inductance(&p, FluxRatio::ZERO, Default::default()).unwrap();
        let l3 = squid_inductance(&p, flux(1.0 / 3.0), Default::default()).unwrap();
        assert!(rel(l3, 2.0 * l0) < 1e-12);
    }

    #[test]
    fn inductance_diverges_at_half() {
        let err = squid_inductance(&params(1e-6), FluxRatio::HALF, Default::default());
        assert!(matches!(err, Err(SquidError::CriticalFlux { .. })));
        let err = squid_inductance_with_floor(&params(1e-6), flux(0.4999), Default::default(), 1e-3);
        assert!(matches!(err, Err(SquidError::CriticalFlux { .. })));
    }

    #[test]
    fn inductance_scales_with_phase() {
        let p = params(1e-6);
        let full = squid_inductance(&p, flux(0.2), Default::default()).unwrap();
        let half = squid_inductance(&p, flux(0.2), PhaseAssumption::new(0.5).unwrap()).unwrap();
        assert!(rel(half, 2.0 * full) < 1e-14);
        assert!(PhaseAssumption::new(0.0).is_err());
        assert!(PhaseAssumption::new(1.1).is_err());
    }

    #[test]
    fn base_speed_values() {
        let p = SquidParams::new(1.25e-6, 90e-15, 10e-6).unwrap();
        assert!(rel(base_speed(&p), 2.905232299201269e6) < 1e-12);
        let via_lc = p.cell_length / (p.cell_capacitance * p.zero_flux_inductance()).sqrt();
        assert!(rel(base_speed(&p), via_lc) < 1e-12);
        let doubled = SquidParams::new(1.25e-6, 90e-15, 20e-6).unwrap();
        assert!(rel(base_speed(&doubled), 2.0 * base_speed(&p)) < 1e-14);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(SquidParams::new(0.0, 1e-15, 1e-6).is_err());
        assert!(SquidParams::new(1e-6, -1e-15, 1e-6).is_err());
        assert!(SquidParams::new(1e-6, 1e-15, f64::NAN).is_err());
        assert!(FluxRatio::new(1.01).is_err());
        assert!(FluxRatio::new(-0.01).is_err());
    }

    #[test]
    fn effective_speed_examples() {
        assert_eq!(effective_speed(FluxRatio::ZERO), 1.0);
        assert!(effective_speed(FluxRatio::HALF) < 1e-8);
        assert!((effective_speed(flux(1.0 / 3.0)) - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn speed_with_dc_examples() {
        let quarter = flux(0.25);
        assert!((speed_with_dc(quarter, quarter).unwrap() - 1.0).abs() < 1e-15);
        for f in [0.0, 0.1, 0.3, 0.7, 0.95] {
            let reduced = speed_with_dc(FluxRatio::ZERO, flux(f)).unwrap();
            assert!((reduced - effective_speed(flux(f))).abs() < 1e-15);
        }
        // total flux 1/4 + arccos(cos(π/4)/2)/π - 1/4
        let s = speed_with_dc(quarter, flux(0.38497)).unwrap();
        assert!((s - 0.707116396259986).abs() < 1e-12);
        assert!(matches!(
            speed_with_dc(FluxRatio::HALF, quarter),
            Err(SquidError::CriticalFlux { .. })
        ));
    }

    #[test]
    fn flux_for_speed_examples() {
        assert_eq!(flux_for_speed(1.0, Branch::CosPositive).unwrap().value(), 0.0);
        assert_eq!(flux_for_speed(1.0, Branch::CosNegative).unwrap().value(), 1.0);
        let f = flux_for_speed(0.5, Branch::CosNegative).unwrap().value();
        assert!((f - 2.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            flux_for_speed(1.2, Branch::CosPositive),
            Err(SquidError::Domain(_))
        ));
        assert!(flux_for_speed(-0.1, Branch::CosNegative).is_err());
    }

    #[test]
    fn ac_flux_examples() {
        let quarter = flux(0.25);
        assert!(ac_flux_for_speed(quarter, 1.0, Branch::CosPositive).unwrap().abs() < 1e-15);
        for s in [0.0, 0.2, 0.5, 1.0] {
            for b in [Branch::CosPositive, Branch::CosNegative] {
                let ac = ac_flux_for_speed(FluxRatio::ZERO, s, b).unwrap();
                assert!((ac - flux_for_speed(s, b).unwrap().value()).abs() < 1e-15);
            }
        }
        let ac = ac_flux_for_speed(quarter, 0.5, Branch::CosPositive).unwrap();
        assert!((ac - 0.13497327191869207).abs() < 1e-12);
        let total = flux(0.25 + ac);
        let s = speed_with_dc(quarter, total).unwrap();
        assert!((s * s - 0.5).abs() < 1e-10);
    }

    #[test]
    fn ac_flux_beyond_reach() {
        // reach is |sec(π/4)| = √2
        let quarter = flux(0.25);
        assert!(ac_flux_for_speed(quarter, 1.41, Branch::CosPositive).is_ok());
        assert!(matches!(
            ac_flux_for_speed(quarter, 1.42, Branch::CosPositive),
            Err(SquidError::Domain(_))
        ));
        assert!(ac_flux_for_speed(FluxRatio::HALF, 0.5, Branch::CosPositive).is_err());
    }

    #[test]
    fn branch_of_partitions_window() {
        assert_eq!(branch_of(flux(0.0)), Some(Branch::CosPositive));
        assert_eq!(branch_of(flux(0.4999)), Some(Branch::CosPositive));
        assert_eq!(branch_of(FluxRatio::HALF), None);
        assert_eq!(branch_of(flux(0.5001)), Some(Branch::CosNegative));
        assert_eq!(branch_of(FluxRatio::ONE), Some(Branch::CosNegative));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn round_trip(f in 0.0f64..=1.0) {
                prop_assume!((f - 0.5).abs() > 1e-6);
                // c̃² near 1 cannot resolve flux offsets below ~1e-8 from 0 or 1
                prop_assume!(f > 1e-4 && f < 1.0 - 1e-4);
                let f = flux(f);
                let back = flux_for_speed(effective_speed(f).powi(2), branch_of(f).unwrap()).unwrap();
                prop_assert!((back.value() - f.value()).abs() < 1e-12);
            }

            #[test]
            fn symmetric(f in 0.0f64..=1.0) {
                prop_assert_eq!(effective_speed(flux(f)), effective_speed(flux(1.0 - f)));
            }

            #[test]
            fn decreasing_to_half(a in 0.0f64..0.5, b in 0.0f64..0.5) {
                prop_assume!(a < b);
                prop_assert!(effective_speed(flux(a)) > effective_speed(flux(b)));
            }

            #[test]
            fn inductance_law(f in 0.0f64..=1.0) {
                let f = flux(f);
                prop_assume!(f.cos_abs() > 1e-6);
                let p = params(1.25e-6);
                let l = squid_inductance(&p, f, Default::default()).unwrap();
                let l0 = squid_inductance(&p, FluxRatio::ZERO, Default::default()).unwrap();
                prop_assert!(rel(l * f.cos_abs(), l0) < 1e-12);
            }

            #[test]
            fn dc_split_identity(f_dc in 0.0f64..0.49, f in 0.0f64..=1.0) {
                let (f_dc, f) = (flux(f_dc), flux(f));
                prop_assume!(f.cos_abs() > 1e-12);
                let composed = background_speed(f_dc) * speed_with_dc(f_dc, f).unwrap();
                prop_assert!(rel(composed, effective_speed(f)) < 1e-12);
            }
        }
    }
}
