//! High-thrust transfer costs between circular orbits.
//!
//! A transfer between two debris is priced as three impulsive legs:
//!
//! 1. a plane change of `|Δi|`, performed on the higher of the two circular
//!    orbits (where it is cheapest and the price does not depend on the
//!    direction of travel),
//! 2. a two-burn Hohmann transfer between the circular radii,
//! 3. a fuel-free phasing coast that closes the in-plane phase gap
//!    `u = ω + ν`.
//!
//! All angles are radians and all distances kilometres.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Earth gravitational parameter, km³/s².
pub const MU_EARTH: f64 = 398_600.4418;
/// Earth equatorial radius, km.
pub const R_EARTH: f64 = 6_378.137;
/// Mean motions closer than this (rad/s) are treated as equal when phasing.
pub const MEAN_MOTION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrbitError {
    #[error("semi-major axis {0} km must exceed the Earth radius ({R_EARTH} km)")]
    BelowSurface(f64),
    #[error("radius must be positive, got {0} km")]
    NonPositiveRadius(f64),
    #[error("gravitational parameter must be positive, got {0}")]
    NonPositiveMu(f64),
    #[error("speed must be non-negative, got {0} km/s")]
    NegativeSpeed(f64),
    #[error("plane change angle {0} rad outside [0, pi]")]
    PlaneChangeAngle(f64),
    #[error("non-finite orbital element")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GravConstants {
    /// km³/s²
    pub mu: f64,
    /// km
    pub r_earth: f64,
}

impl Default for GravConstants {
    fn default() -> Self {
        Self {
            mu: MU_EARTH,
            r_earth: R_EARTH,
        }
    }
}

impl GravConstants {
    pub fn new(mu: f64, r_earth: f64) -> Result<Self, OrbitError> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(OrbitError::NonPositiveMu(mu));
        }
        if !(r_earth > 0.0) || !r_earth.is_finite() {
            return Err(OrbitError::NonPositiveRadius(r_earth));
        }
        Ok(Self { mu, r_earth })
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn normalize_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    // rem_euclid rounds tiny negatives up to exactly TAU
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Folds an inclination into `[0, π]`.
pub fn normalize_inclination(x: f64) -> f64 {
    let r = normalize_angle(x);
    if r > PI {
        TAU - r
    } else {
        r
    }
}

/// Circular-orbit element set of one object.
///
/// Construction normalizes the angles, so every value of this type satisfies
/// `a > R_EARTH`, `i ∈ [0, π]`, `ω, ν ∈ [0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawElements", into = "RawElements")]
pub struct OrbitalElements {
    a: f64,
    i: f64,
    omega: f64,
    nu: f64,
}

#[derive(Serialize, Deserialize)]
struct RawElements {
    a_km: f64,
    i_rad: f64,
    omega_rad: f64,
    nu_rad: f64,
}

impl TryFrom<RawElements> for OrbitalElements {
    type Error = OrbitError;

    fn try_from(r: RawElements) -> Result<Self, Self::Error> {
        OrbitalElements::new(r.a_km, r.i_rad, r.omega_rad, r.nu_rad)
    }
}

impl From<OrbitalElements> for RawElements {
    fn from(e: OrbitalElements) -> Self {
        RawElements {
            a_km: e.a,
            i_rad: e.i,
            omega_rad: e.omega,
            nu_rad: e.nu,
        }
    }
}

impl OrbitalElements {
    /// Angles in radians.
    pub fn new(a: f64, i: f64, omega: f64, nu: f64) -> Result<Self, OrbitError> {
        if ![a, i, omega, nu].iter().all(|v| v.is_finite()) {
            return Err(OrbitError::NonFinite);
        }
        if !(a > R_EARTH) {
            return Err(OrbitError::BelowSurface(a));
        }
        Ok(Self {
            a,
            i: normalize_inclination(i),
            omega: normalize_angle(omega),
            nu: normalize_angle(nu),
        })
    }

    /// Angles in degrees.
    pub fn from_degrees(a: f64, i: f64, omega: f64, nu: f64) -> Result<Self, OrbitError> {
        Self::new(a, i.to_radians(), omega.to_radians(), nu.to_radians())
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn i(&self) -> f64 {
        self.i
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// In-plane phase `u = ω + ν`, wrapped into `[0, 2π)`.
    pub fn phase(&self) -> f64 {
        normalize_angle(self.omega + self.nu)
    }
}

/// Fuel and time consumed by one transfer.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TransferCost {
    /// km/s
    pub delta_v: f64,
    /// s
    pub delta_t: f64,
}

impl TransferCost {
    pub const ZERO: TransferCost = TransferCost {
        delta_v: 0.0,
        delta_t: 0.0,
    };

    pub fn new(delta_v: f64, delta_t: f64) -> Self {
        Self { delta_v, delta_t }
    }
}

pub fn circular_speed(a: f64, mu: f64) -> Result<f64, OrbitError> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(OrbitError::NonPositiveRadius(a));
    }
    if !(mu > 0.0) {
        return Err(OrbitError::NonPositiveMu(mu));
    }
    Ok((mu / a).sqrt())
}

/// Impulsive plane change `2·v·sin(Δi/2)`.
pub fn plane_change_dv(v: f64, delta_i: f64) -> Result<f64, OrbitError> {
    if !(v >= 0.0) {
        return Err(OrbitError::NegativeSpeed(v));
    }
    if !(0.0..=PI).contains(&delta_i) {
        return Err(OrbitError::PlaneChangeAngle(delta_i));
    }
    Ok(2.0 * v * (delta_i / 2.0).sin())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HohmannTransfer {
    /// km/s
    pub dv_depart: f64,
    /// km/s
    pub dv_arrive: f64,
    /// Half-period of the transfer ellipse, s.
    pub time: f64,
}

impl HohmannTransfer {
    pub fn total_dv(&self) -> f64 {
        self.dv_depart + self.dv_arrive
    }
}

pub fn hohmann(a1: f64, a2: f64, consts: &GravConstants) -> Result<HohmannTransfer, OrbitError> {
    for a in [a1, a2] {
        if !a.is_finite() {
            return Err(OrbitError::NonFinite);
        }
        if !(a > consts.r_earth) {
            return Err(OrbitError::BelowSurface(a));
        }
    }
    let mu = consts.mu;
    let sum = a1 + a2;
    let dv_depart = (mu / a1).sqrt() * ((2.0 * a2 / sum).sqrt() - 1.0).abs();
    let dv_arrive = (mu / a2).sqrt() * (1.0 - (2.0 * a1 / sum).sqrt()).abs();
    let half_major = sum / 2.0;
    let time = PI * (half_major.powi(3) / mu).sqrt();
    Ok(HohmannTransfer {
        dv_depart,
        dv_arrive,
        time,
    })
}

/// Coast time needed for the chaser on `a_from` to gain (or lose) `phase_gap`
/// on a target on `a_to`. The gap is measured from chaser to target in the
/// direction of motion.
///
/// When the mean motions coincide the gap never closes; one full period of the
/// departure orbit is charged instead.
pub fn phasing_time(a_from: f64, a_to: f64, phase_gap: f64, mu: f64) -> f64 {
    let n_from = (mu / a_from.powi(3)).sqrt();
    let n_to = (mu / a_to.powi(3)).sqrt();
    let rate = n_from - n_to;
    if rate.abs() < MEAN_MOTION_TOLERANCE {
        return TAU / n_from;
    }
    let gap = normalize_angle(phase_gap);
    if rate > 0.0 {
        // chaser is faster and catches up on the target
        gap / rate
    } else {
        normalize_angle(TAU - gap) / -rate
    }
}

/// Prices the three-leg transfer `from → to`.
pub fn transfer_cost(
    from: &OrbitalElements,
    to: &OrbitalElements,
    consts: &GravConstants,
) -> Result<TransferCost, OrbitError> {
    let plane_speed = circular_speed(from.a.max(to.a), consts.mu)?;
    let plane = plane_change_dv(plane_speed, (to.i - from.i).abs())?;
    let transfer = hohmann(from.a, to.a, consts)?;
    let gap = normalize_angle(to.phase() - from.phase());
    let coast = phasing_time(from.a, to.a, gap, consts.mu);
    Ok(TransferCost {
        delta_v: plane + transfer.total_dv(),
        delta_t: coast + transfer.time,
    })
}

/// Prices an ordered pair of element sets.
///
/// The environment and the oracle only see costs through this trait, so tests
/// can substitute hand-built cost tables.
pub trait CostProvider {
    fn cost(
        &self,
        from: &OrbitalElements,
        to: &OrbitalElements,
    ) -> Result<TransferCost, OrbitError>;
}

impl<F> CostProvider for F
where
    F: Fn(&OrbitalElements, &OrbitalElements) -> Result<TransferCost, OrbitError>,
{
    fn cost(
        &self,
        from: &OrbitalElements,
        to: &OrbitalElements,
    ) -> Result<TransferCost, OrbitError> {
        self(from, to)
    }
}

/// The three-maneuver high-thrust simulator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HighThrust {
    pub consts: GravConstants,
}

impl HighThrust {
    pub fn new(consts: GravConstants) -> Self {
        Self { consts }
    }
}

impl CostProvider for HighThrust {
    fn cost(
        &self,
        from: &OrbitalElements,
        to: &OrbitalElements,
    ) -> Result<TransferCost, OrbitError> {
        transfer_cost(from, to, &self.consts)
    }
}
