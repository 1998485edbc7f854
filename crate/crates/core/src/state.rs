//! Phase-space vector and covariance matrix over `B ⊕ Λ ⊕ S⁽¹⁾ ⊕ S⁽²⁾ …`.
//!
//! Layout: the classical field `B` (mG) occupies coordinates `0..3`, the
//! eight collective atomic operators (atom-count units) `3..11`, and each
//! live pulse a three-coordinate Stokes block `(S_x, S_y, S_z)` (photon
//! units) appended after that, in creation order.

use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::algebra::{Mat8, SpinAlgebra, Vec8};
use crate::error::{Error, Result};

pub const B_OFFSET: usize = 0;
pub const ATOM_OFFSET: usize = 3;
pub const BASE_DIM: usize = 11;

/// Relative tolerance on the minimum covariance eigenvalue.
pub const PSD_TOL: f64 = 1e-8;
/// Relative tolerance for the Robertson-Schrödinger check.
pub const UNCERTAINTY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn unit(self) -> Vector3<f64> {
        let mut v = Vector3::zeros();
        v[self.index()] = 1.0;
        v
    }
}

/// A signed axis such as `+y` or `-x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SignedAxis {
    pub axis: Axis,
    pub negative: bool,
}

impl SignedAxis {
    pub fn sign(self) -> f64 {
        if self.negative {
            -1.0
        } else {
            1.0
        }
    }
}

impl FromStr for SignedAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (negative, rest) = match s.as_bytes().first() {
            Some(b'-') => (true, &s[1..]),
            Some(b'+') => (false, &s[1..]),
            _ => (false, s),
        };
        let axis = match rest.to_ascii_lowercase().as_str() {
            "x" => Axis::X,
            "y" => Axis::Y,
            "z" => Axis::Z,
            _ => return Err(Error::InvalidParameter(format!("unknown axis '{s}'"))),
        };
        Ok(SignedAxis { axis, negative })
    }
}

impl std::fmt::Display for SignedAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sign = if self.negative { '-' } else { '+' };
        let axis = ['x', 'y', 'z'][self.axis.index()];
        write!(f, "{sign}{axis}")
    }
}

impl Serialize for SignedAxis {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SignedAxis {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// How each atom is prepared before the ensemble is assembled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PumpState {
    /// The `m = ±1` state along a spin axis, e.g. `"+y"`.
    Axis(SignedAxis),
    /// An explicit single-atom mean vector `λ̄`.
    Vector([f64; 8]),
}

impl PumpState {
    pub fn single_atom_mean(&self) -> Vec8 {
        match self {
            PumpState::Axis(a) => SpinAlgebra::shared()
                .basis
                .polarized_along(&a.axis.unit(), a.sign()),
            PumpState::Vector(v) => Vec8::from_column_slice(v),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n_atoms_mean: f64,
    /// `δN_A²`, the shot-to-shot variance of the atom number.
    pub n_atoms_var: f64,
    pub pump: PumpState,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.n_atoms_mean >= 0.0) || !(self.n_atoms_var >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "atom number mean {} and variance {} must be non-negative",
                self.n_atoms_mean, self.n_atoms_var
            )));
        }
        Ok(())
    }
}

/// Coherent input light for one pulse.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LightSpec {
    pub photons: f64,
    /// Stokes axis of the input polarization; `+x` is h, `-x` is v.
    pub polarization: SignedAxis,
}

impl LightSpec {
    pub fn h(photons: f64) -> Self {
        Self {
            photons,
            polarization: SignedAxis {
                axis: Axis::X,
                negative: false,
            },
        }
    }

    pub fn v(photons: f64) -> Self {
        Self {
            photons,
            polarization: SignedAxis {
                axis: Axis::X,
                negative: true,
            },
        }
    }

    pub fn mean(&self) -> Vector3<f64> {
        self.polarization.axis.unit() * (self.polarization.sign() * self.photons / 2.0)
    }
}

/// Bookkeeping for a live Stokes block.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseBlock {
    pub id: u64,
    pub light: LightSpec,
}

#[derive(Clone, Debug)]
pub struct GaussianState {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// Current mean atom number; decreases only under lossy decoherence.
    pub n_atoms: f64,
    pulses: Vec<PulseBlock>,
    next_id: u64,
}

/// `Λ̄ = N̄ λ̄` and `Γ_Λ = N̄ Γ_λ + δN² λ̄λ̄ᵀ`.
pub fn initial_atomic_state(spec: &EnsembleSpec) -> Result<(Vec8, Mat8)> {
    spec.validate()?;
    let alg = SpinAlgebra::shared();
    let lambda = spec.pump.single_atom_mean();
    let gamma = alg.single_atom_covariance(&lambda)?;
    let mean = lambda * spec.n_atoms_mean;
    let cov = gamma * spec.n_atoms_mean + lambda * lambda.transpose() * spec.n_atoms_var;
    Ok((mean, cov))
}

pub fn initial_full_state(
    ensemble: &EnsembleSpec,
    light: Option<&LightSpec>,
    b_mean: &Vector3<f64>,
    gamma_b: &Matrix3<f64>,
) -> Result<GaussianState> {
    check_symmetric_psd("field covariance", &DMatrix::from_column_slice(3, 3, gamma_b.as_slice()))?;
    let (atom_mean, atom_cov) = initial_atomic_state(ensemble)?;

    let mut mean = DVector::zeros(BASE_DIM);
    mean.fixed_rows_mut::<3>(B_OFFSET).copy_from(b_mean);
    mean.fixed_rows_mut::<8>(ATOM_OFFSET).copy_from(&atom_mean);

    let mut cov = DMatrix::zeros(BASE_DIM, BASE_DIM);
    cov.fixed_view_mut::<3, 3>(B_OFFSET, B_OFFSET).copy_from(gamma_b);
    cov.fixed_view_mut::<8, 8>(ATOM_OFFSET, ATOM_OFFSET)
        .copy_from(&atom_cov);

    let mut state = GaussianState {
        mean,
        cov,
        n_atoms: ensemble.n_atoms_mean,
        pulses: Vec::new(),
        next_id: 0,
    };
    if let Some(light) = light {
        state.append_pulse(light);
    }
    Ok(state)
}

impl GaussianState {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn b_mean(&self) -> Vector3<f64> {
        self.mean.fixed_rows::<3>(B_OFFSET).into_owned()
    }

    pub fn atomic_mean(&self) -> Vec8 {
        self.mean.fixed_rows::<8>(ATOM_OFFSET).into_owned()
    }

    pub fn set_atomic_mean(&mut self, v: &Vec8) {
        self.mean.fixed_rows_mut::<8>(ATOM_OFFSET).copy_from(v);
    }

    pub fn atomic_cov(&self) -> Mat8 {
        self.cov
            .fixed_view::<8, 8>(ATOM_OFFSET, ATOM_OFFSET)
            .into_owned()
    }

    /// Mean single-atom vector `Λ̄ / N`.
    pub fn single_atom_mean(&self) -> Vec8 {
        if self.n_atoms > 0.0 {
            self.atomic_mean() / self.n_atoms
        } else {
            Vec8::zeros()
        }
    }

    pub fn pulses(&self) -> &[PulseBlock] {
        &self.pulses
    }

    pub fn pulse_offset(&self, index: usize) -> Result<usize> {
        if index >= self.pulses.len() {
            return Err(Error::PulseIndex {
                index,
                live: self.pulses.len(),
            });
        }
        Ok(BASE_DIM + 3 * index)
    }

    pub fn pulse_index(&self, id: u64) -> Result<usize> {
        self.pulses
            .iter()
            .position(|p| p.id == id)
            .ok_or(Error::UnknownPulse(id))
    }

    pub fn pulse_offset_by_id(&self, id: u64) -> Result<usize> {
        self.pulse_offset(self.pulse_index(id)?)
    }

    pub fn stokes_mean(&self, id: u64) -> Result<Vector3<f64>> {
        let off = self.pulse_offset_by_id(id)?;
        Ok(self.mean.fixed_rows::<3>(off).into_owned())
    }

    /// Appends an uncorrelated coherent-state Stokes block and returns its id.
    pub fn append_pulse(&mut self, light: &LightSpec) -> u64 {
        let n = self.dim();
        let mut mean = DVector::zeros(n + 3);
        mean.rows_mut(0, n).copy_from(&self.mean);
        mean.fixed_rows_mut::<3>(n).copy_from(&light.mean());

        let mut cov = DMatrix::zeros(n + 3, n + 3);
        cov.view_mut((0, 0), (n, n)).copy_from(&self.cov);
        for k in 0..3 {
            cov[(n + k, n + k)] = light.photons / 4.0;
        }
        self.mean = mean;
        self.cov = cov;

        let id = self.next_id;
        self.next_id += 1;
        self.pulses.push(PulseBlock { id, light: *light });
        id
    }

    /// Removes a Stokes block together with all its correlations.
    pub fn drop_pulse(&mut self, index: usize) -> Result<PulseBlock> {
        let off = self.pulse_offset(index)?;
        self.mean = self.mean.clone().remove_rows(off, 3);
        self.cov = self.cov.clone().remove_rows(off, 3).remove_columns(off, 3);
        Ok(self.pulses.remove(index))
    }

    pub fn drop_pulse_by_id(&mut self, id: u64) -> Result<PulseBlock> {
        let index = self.pulse_index(id)?;
        self.drop_pulse(index)
    }

    /// `Σ_ij = Σ_k f_ijk V̄_k` over the whole phase-space vector.
    pub fn commutation_matrix(&self) -> DMatrix<f64> {
        let alg = SpinAlgebra::shared();
        let n = self.dim();
        let mut sigma = DMatrix::zeros(n, n);
        let atoms = crate::algebra::commutation_matrix(&self.atomic_mean(), &alg.structure);
        sigma
            .fixed_view_mut::<8, 8>(ATOM_OFFSET, ATOM_OFFSET)
            .copy_from(&atoms);
        for index in 0..self.pulses.len() {
            let off = BASE_DIM + 3 * index;
            for a in 0..3 {
                for b in 0..3 {
                    sigma[(off + a, off + b)] = (0..3)
                        .map(|c| alg.structure.stokes(a, b, c) * self.mean[off + c])
                        .sum();
                }
            }
        }
        sigma
    }

    pub fn check_uncertainty(&self, a: &DVector<f64>, b: &DVector<f64>) -> Result<UncertaintyCheck> {
        let n = self.dim();
        for v in [a, b] {
            if v.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: v.len(),
                });
            }
        }
        let sigma = self.commutation_matrix();
        let floor = self.roundoff_floor();
        let var_a = clamp_roundoff((a.transpose() * &self.cov * a)[(0, 0)], floor * a.norm_squared());
        let var_b = clamp_roundoff((b.transpose() * &self.cov * b)[(0, 0)], floor * b.norm_squared());
        let comm = (a.transpose() * &sigma * b)[(0, 0)];
        Ok(UncertaintyCheck::new(var_a, var_b, comm))
    }

    /// The tightest Robertson-Schrödinger check over all pairs of
    /// coordinate axes.
    pub fn worst_axis_pair(&self) -> UncertaintyCheck {
        let sigma = self.commutation_matrix();
        let n = self.dim();
        let floor = self.roundoff_floor();
        let var = |i: usize| clamp_roundoff(self.cov[(i, i)], floor);
        let mut worst = UncertaintyCheck::new(1.0, 1.0, 0.0);
        for i in 0..n {
            for j in (i + 1)..n {
                let c = UncertaintyCheck::new(var(i), var(j), sigma[(i, j)]);
                if c.relative < worst.relative {
                    worst = c;
                }
            }
        }
        worst
    }

    pub fn validate(&self) -> Result<()> {
        check_symmetric_psd("state covariance", &self.cov)
    }

    fn roundoff_floor(&self) -> f64 {
        PSD_TOL * self.cov.diagonal().amax()
    }
}

/// Variances that are negative only by accumulated rounding count as zero.
fn clamp_roundoff(var: f64, floor: f64) -> f64 {
    if var < 0.0 && var > -floor {
        0.0
    } else {
        var
    }
}

/// `(aᵀΓa)(bᵀΓb) − ¼|aᵀΣb|²` and its size relative to the larger side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UncertaintyCheck {
    pub margin: f64,
    pub relative: f64,
    pub holds: bool,
}

impl UncertaintyCheck {
    fn new(var_a: f64, var_b: f64, comm: f64) -> Self {
        let product = var_a * var_b;
        let bound = 0.25 * comm * comm;
        let margin = product - bound;
        let scale = product.abs().max(bound);
        let relative = if scale > 0.0 { margin / scale } else { 0.0 };
        Self {
            margin,
            relative,
            holds: relative >= -UNCERTAINTY_TOL,
        }
    }
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min()
}

pub fn check_symmetric_psd(what: &'static str, m: &DMatrix<f64>) -> Result<()> {
    let scale = m.amax();
    if scale == 0.0 {
        return Ok(());
    }
    let asymmetry = (m - m.transpose()).amax();
    if asymmetry > 1e-12 * scale {
        return Err(Error::NotSymmetric { what, asymmetry });
    }
    let min = min_eigenvalue(m);
    if min < -PSD_TOL * m.norm() {
        return Err(Error::NotPsd {
            what,
            min_eigenvalue: min,
        });
    }
    Ok(())
}
