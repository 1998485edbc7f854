//! Closed-form free-induction-decay signal and the Gaussian-validity horizon.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputAxis {
    Y,
    Z,
}

/// Faraday angle `G1 ⟨F_z(t)⟩` for a spin prepared along `y` or `z` with
/// `⟨F_axis(0)⟩ = f0`, precessing in `b` with transverse decay time `t2`
/// and no tensor light shift.
///
/// The rotation sense is that of `dλ/dt = −γ|B|𝒜λ`: the closed form is
/// evaluated at `ω = −γ|B|`.
pub fn analytic_fid(t: f64, b: &Vector3<f64>, t2: f64, g1: f64, f0: f64, axis: InputAxis, gamma: f64) -> Result<f64> {
    let b2 = b.norm_squared();
    if b2 == 0.0 {
        return Err(Error::ZeroField);
    }
    let norm = b2.sqrt();
    let w = -gamma * norm;
    let decay = if t2.is_finite() { (-t / t2).exp() } else { 1.0 };
    let (c, s) = ((w * t).cos() * decay, (w * t).sin() * decay);
    let shape = match axis {
        InputAxis::Y => b.y * b.z * (1.0 - c) + b.x * norm * s,
        InputAxis::Z => b.z * b.z + (b.x * b.x + b.y * b.y) * c,
    };
    Ok(g1 / b2 * shape * f0)
}

/// `π / (|γ| ΔB_∥)` with `ΔB_∥² = b̂ᵀ Γ_B b̂`; infinite when the parallel
/// field is certain or the field vanishes.
pub fn tau_gauss(gamma_b: &Matrix3<f64>, b_mean: &Vector3<f64>, gamma: f64) -> f64 {
    let norm = b_mean.norm();
    if norm == 0.0 {
        return f64::INFINITY;
    }
    let b = b_mean / norm;
    let var = (b.transpose() * gamma_b * b)[(0, 0)];
    if !(var > 0.0) || gamma == 0.0 {
        return f64::INFINITY;
    }
    std::f64::consts::PI / (gamma.abs() * var.sqrt())
}
