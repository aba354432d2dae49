//! Gyroscopic spinner attached to a lattice junction.
//!
//! The spinner axis is normal to the lattice plane. A small in-plane junction
//! displacement tilts the axis by the nutation angle `θ`; with constant spin rate
//! `Ω` and constant precession rate `φ̇` the induced moment about the axis acts on the
//! junction as a force proportional to `i ω² U`, with constant `α = I / h²`.
//!
//! Only the constant-spin, constant-precession, small-nutation regime is modelled.
//! Gravity is absent.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GyroError {
    #[error("degenerate spinner: 2·I0 = I = {i} admits no finite precession rate")]
    DegenerateInertia { i: f64 },
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

/// Choice of the `±` root of the compatibility condition.
///
/// Flipping the branch flips the sign of the induced force, i.e. the sign of `α`
/// entering the chiral inertia matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignBranch {
    #[default]
    Plus,
    Minus,
}

impl SignBranch {
    pub fn sign(self) -> f64 {
        match self {
            SignBranch::Plus => 1.0,
            SignBranch::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinnerBody {
    /// Transverse moment of inertia `I_xx = I_yy`.
    pub i0: f64,
    /// Axial moment of inertia `I_zz`.
    pub i: f64,
    /// Characteristic length from the pivot to the junction.
    pub h: f64,
    pub branch: SignBranch,
}

impl SpinnerBody {
    pub fn new(i0: f64, i: f64, h: f64, branch: SignBranch) -> Result<Self, GyroError> {
        for (name, value) in [("I0", i0), ("I", i), ("h", h)] {
            if !(value > 0.0) {
                return Err(GyroError::NonPositive { name, value });
            }
        }
        Ok(SpinnerBody { i0, i, h, branch })
    }
}

/// Euler-angle state of the spinner: nutation `θ`, precession `φ`, spin rate `ψ̇ = Ω`.
///
/// The small-angle regime is the caller's responsibility.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GyroState {
    pub theta: f64,
    pub theta_dot: f64,
    pub theta_ddot: f64,
    pub phi: f64,
    pub phi_dot: f64,
    pub phi_ddot: f64,
    pub psi_dot: f64,
}

/// Moments `(Mx, My, Mz)` required to sustain `s`, for constant spin rate.
pub fn gyro_moments(s: &GyroState, b: &SpinnerBody) -> (f64, f64, f64) {
    let (sin, cos) = s.theta.sin_cos();
    // Axial angular velocity of the body.
    let axial = s.phi_dot * cos + s.psi_dot;
    let mx =
        b.i0 * (s.theta_ddot - s.phi_dot * s.phi_dot * sin * cos) + b.i * s.phi_dot * sin * axial;
    let my = sin
        * (b.i0 * (s.phi_ddot * sin + 2.0 * s.phi_dot * s.theta_dot * cos)
            - b.i * s.theta_dot * axial);
    let mz = b.i * (s.phi_ddot * cos - s.phi_dot * s.theta_dot * sin);
    (mx, my, mz)
}

/// Constant precession rate `φ̇ = I Ω / (2 I0 − I)` compatible with `Mx = My = 0`.
pub fn precession_rate(b: &SpinnerBody, omega_spin: f64) -> Result<f64, GyroError> {
    let denom = 2.0 * b.i0 - b.i;
    if denom == 0.0 || denom.abs() <= 1e-14 * (2.0 * b.i0).max(b.i) {
        return Err(GyroError::DegenerateInertia { i: b.i });
    }
    Ok(b.i * omega_spin / denom)
}

/// Spin rate `Ω = ±ω (2 I0 − I) / I` making the spinner follow nutation at frequency `ω`.
pub fn compatible_spin_rate(b: &SpinnerBody, omega: f64) -> f64 {
    b.branch.sign() * omega * (2.0 * b.i0 - b.i) / b.i
}

/// Residual of `(I − I0) φ̇² + I Ω φ̇ − I0 ω² = 0`.
pub fn nutation_residual(b: &SpinnerBody, phi_dot: f64, omega_spin: f64, omega: f64) -> f64 {
    (b.i - b.i0) * phi_dot * phi_dot + b.i * omega_spin * phi_dot - b.i0 * omega * omega
}

/// Spinner constant `α = I / h²` (mass units).
pub fn spinner_constant(b: &SpinnerBody) -> f64 {
    b.i / (b.h * b.h)
}

/// Signed spinner constant as it enters the chiral inertia matrix.
pub fn signed_spinner_constant(b: &SpinnerBody) -> f64 {
    b.branch.sign() * spinner_constant(b)
}

/// Spinner rates compatible with nutation at frequency `ω`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpinnerRates {
    pub phi_dot: f64,
    pub omega_spin: f64,
    pub alpha: f64,
}

pub fn spinner_rates(b: &SpinnerBody, omega: f64) -> Result<SpinnerRates, GyroError> {
    let omega_spin = compatible_spin_rate(b, omega);
    Ok(SpinnerRates {
        phi_dot: precession_rate(b, omega_spin)?,
        omega_spin,
        alpha: spinner_constant(b),
    })
}

/// State at time `t` for real nutation `θ(t) = Θ cos(ωt)` under compatible rates.
pub fn compatible_state(
    b: &SpinnerBody,
    amplitude: f64,
    omega: f64,
    t: f64,
) -> Result<GyroState, GyroError> {
    let rates = spinner_rates(b, omega)?;
    let (sin, cos) = (omega * t).sin_cos();
    Ok(GyroState {
        theta: amplitude * cos,
        theta_dot: -amplitude * omega * sin,
        theta_ddot: -amplitude * omega * omega * cos,
        phi: rates.phi_dot * t,
        phi_dot: rates.phi_dot,
        phi_ddot: 0.0,
        psi_dot: rates.omega_spin,
    })
}

/// Small-nutation induced axial moment `∓ I ω θ̇ θ`.
pub fn induced_axial_moment(b: &SpinnerBody, omega: f64, theta: f64, theta_dot: f64) -> f64 {
    -b.branch.sign() * b.i * omega * theta_dot * theta
}
