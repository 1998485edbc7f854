//! Balanced-polarimetry readout of one Stokes component.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lightmatter::symmetrize;
use crate::state::{Axis, GaussianState};

const UNIT_TOL: f64 = 1e-12;
/// Relative singular-value cutoff for the pseudo-inverse.
pub const PINV_RTOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSpec {
    pulse_id: u64,
    projection: DVector<f64>,
    pub condition: bool,
}

impl MeasurementSpec {
    /// Detects `S_axis` of the given pulse.
    pub fn stokes(state: &GaussianState, pulse_id: u64, axis: Axis, condition: bool) -> Result<Self> {
        let off = state.pulse_offset_by_id(pulse_id)?;
        let mut p = DVector::zeros(state.dim());
        p[off + axis.index()] = 1.0;
        Ok(Self {
            pulse_id,
            projection: p,
            condition,
        })
    }

    /// The usual `S_y` polarimeter.
    pub fn s_y(state: &GaussianState, pulse_id: u64, condition: bool) -> Result<Self> {
        Self::stokes(state, pulse_id, Axis::Y, condition)
    }

    /// An arbitrary unit projection that must live inside one pulse block.
    pub fn from_projection(state: &GaussianState, projection: DVector<f64>, condition: bool) -> Result<Self> {
        if projection.len() != state.dim() {
            return Err(Error::Dimension {
                expected: state.dim(),
                got: projection.len(),
            });
        }
        let norm = projection.norm();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::NotUnitVector { norm });
        }
        let mut owner = None;
        for (index, block) in state.pulses().iter().enumerate() {
            let off = state.pulse_offset(index)?;
            if projection.rows(off, 3).amax() > 0.0 {
                if owner.is_some() {
                    return Err(Error::InvalidParameter("projection spans several pulse blocks".into()));
                }
                owner = Some((block.id, off));
            }
        }
        let Some((pulse_id, off)) = owner else {
            return Err(Error::InvalidParameter("projection touches no pulse block".into()));
        };
        let outside = projection
            .iter()
            .enumerate()
            .filter(|(i, _)| !(off..off + 3).contains(i))
            .any(|(_, v)| *v != 0.0);
        if outside {
            return Err(Error::InvalidParameter("projection leaks outside its pulse block".into()));
        }
        Ok(Self {
            pulse_id,
            projection,
            condition,
        })
    }

    pub fn pulse_id(&self) -> u64 {
        self.pulse_id
    }

    pub fn projection(&self) -> &DVector<f64> {
        &self.projection
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasurementRecord {
    pub time: f64,
    pub pulse_id: u64,
    /// Input `S_x`, `±n_L/2`.
    pub s_x_in: f64,
    pub mean: f64,
    pub variance: f64,
    /// `φ = S_det / S_x^in`.
    pub phi: f64,
    pub phi_var: f64,
    /// Polarization rotation `atan2` of the output `(S_x, S_y)` relative to
    /// the input direction, with its linearized variance.
    pub angle: f64,
    pub angle_var: f64,
    pub conditioned: bool,
    /// Conditioning was requested but the detected quantity had no variance.
    pub conditioning_skipped: bool,
}

/// Moments of the detected quantity without touching the state.
pub fn predict(state: &GaussianState, spec: &MeasurementSpec, time: f64) -> Result<MeasurementRecord> {
    let index = state.pulse_index(spec.pulse_id)?;
    let light = state.pulses()[index].light;
    let off = state.pulse_offset(index)?;
    let p = &spec.projection;
    let mean = p.dot(&state.mean);
    let variance = (p.transpose() * &state.cov * p)[(0, 0)].max(0.0);
    let s_x_in = light.polarization.sign() * light.photons / 2.0;
    let (phi, phi_var) = if s_x_in != 0.0 {
        (mean / s_x_in, variance / (s_x_in * s_x_in))
    } else {
        (f64::NAN, f64::NAN)
    };

    let sx = state.mean[off];
    let sy = state.mean[off + 1];
    let sign = if s_x_in < 0.0 { -1.0 } else { 1.0 };
    let angle = (sign * sy).atan2(sign * sx);
    let r2 = sx * sx + sy * sy;
    let angle_var = if r2 > 0.0 {
        let g = [-sy / r2, sx / r2];
        let c = state.cov.view((off, off), (2, 2));
        (g[0] * g[0] * c[(0, 0)] + 2.0 * g[0] * g[1] * c[(0, 1)] + g[1] * g[1] * c[(1, 1)]).max(0.0)
    } else {
        f64::NAN
    };

    Ok(MeasurementRecord {
        time,
        pulse_id: spec.pulse_id,
        s_x_in,
        mean,
        variance,
        phi,
        phi_var,
        angle,
        angle_var,
        conditioned: false,
        conditioning_skipped: false,
    })
}

/// Records the measurement, optionally applies back-action to `Γ`, and
/// retires the pulse block.
pub fn read_out(state: &mut GaussianState, spec: &MeasurementSpec, time: f64) -> Result<MeasurementRecord> {
    let mut record = predict(state, spec, time)?;
    if spec.condition {
        match condition_on(&state.cov, &spec.projection) {
            Some(post) => {
                state.cov = post;
                record.conditioned = true;
            }
            None => {
                log::debug!("pulse {}: detected variance is zero, conditioning skipped", spec.pulse_id);
                record.conditioning_skipped = true;
            }
        }
    }
    state.drop_pulse_by_id(spec.pulse_id)?;
    Ok(record)
}

/// `Γ − (Γp)(Γp)ᵀ / pΓp`, or `None` when `pΓp` vanishes.
pub fn condition_on(cov: &DMatrix<f64>, p: &DVector<f64>) -> Option<DMatrix<f64>> {
    let gp = cov * p;
    let var = p.dot(&gp);
    let scale = cov.diagonal().amax();
    if !(var > PINV_RTOL * scale) {
        return None;
    }
    let mut post = cov - &gp * gp.transpose() / var;
    symmetrize(&mut post);
    Some(post)
}

/// `Γ − Γ Pᵀ (P Γ Pᵀ)⁺ P Γ` for the measured rows `P`.
pub fn condition_pinv(cov: &DMatrix<f64>, rows: &DMatrix<f64>) -> DMatrix<f64> {
    let gp = cov * rows.transpose();
    let inner = rows * &gp;
    let pinv = pseudo_inverse(&inner);
    let mut post = cov - &gp * pinv * gp.transpose();
    symmetrize(&mut post);
    post
}

/// Moore-Penrose inverse with singular values below `PINV_RTOL·σ_max`
/// dropped.
pub fn pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cut = PINV_RTOL * smax;
    let inv = svd.singular_values.map(|s| if s > cut && s > 0.0 { 1.0 / s } else { 0.0 });
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V");
    v_t.transpose() * DMatrix::from_diagonal(&inv) * u.transpose()
}
