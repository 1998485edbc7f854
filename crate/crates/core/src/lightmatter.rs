//! Pulse–ensemble interaction.
//!
//! During a pulse the effective Hamiltonian
//! `H = G1 S_z F_z + G2 (S_x J_x + S_y J_y)` (couplings per whole pulse)
//! drives the bilinear mean-field flow `dV/ds = V·H·V` for `s ∈ [0, 1]`.
//! The pulse is split into substeps; each substep advances the mean with
//! an explicit-midpoint step and propagates the covariance with the exact
//! Jacobian of that step, followed by scattering decoherence for the
//! photons that passed during the substep.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::algebra::{SpinAlgebra, FZ, JX, JY};
use crate::error::{Error, Result};
use crate::state::{GaussianState, LightSpec, ATOM_OFFSET};

/// Coupling constants and scattering parameters shared by all pulses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Couplings {
    /// Faraday coupling, radians of Stokes rotation per atom of `F_z`.
    pub g1: f64,
    /// Tensor light-shift coupling.
    pub g2: f64,
    /// Probability per photon that a given atom scatters it.
    pub eta_gamma: f64,
    /// Fraction `p` of scattered atoms returned in a random state.
    pub readd_fraction: f64,
    /// Apply photon-loss decoherence to the pulse (`ε = exp(−η N_A)`).
    /// Off means `ε = 1`.
    pub photon_loss: bool,
}

impl Default for Couplings {
    fn default() -> Self {
        Self {
            g1: 0.0,
            g2: 0.0,
            eta_gamma: 0.0,
            readd_fraction: 1.0,
            photon_loss: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbePulse {
    /// Arrival time at the ensemble (s).
    pub start: f64,
    /// Duration `τ` (s).
    pub duration: f64,
    pub light: LightSpec,
    pub couplings: Couplings,
}

impl ProbePulse {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "pulse duration {} must be positive",
                self.duration
            )));
        }
        if !(self.light.photons >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "photon number {} must be non-negative",
                self.light.photons
            )));
        }
        let p = self.couplings.readd_fraction;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "re-addition fraction {p} outside [0, 1]"
            )));
        }
        Ok(())
    }

    /// Atomic survival fraction `X = exp(−η n_L)` over the whole pulse.
    pub fn survival(&self) -> f64 {
        (-self.couplings.eta_gamma * self.light.photons).exp()
    }

    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
}

/// Sparse bilinear tensor: `(V·H·V)_i = Σ_jk V_j H^i_jk V_k`.
#[derive(Clone, Debug)]
pub struct EvolutionTensor {
    dim: usize,
    entries: Vec<(usize, usize, usize, f64)>,
}

/// Builds `H` for the pulse whose Stokes block starts at `stokes_offset`.
///
/// Atomic rows carry the Stokes component as the first (control) factor,
/// Stokes rows carry the atomic operator as the control factor, so that the
/// contraction reproduces both the atomic and the light Heisenberg updates.
pub fn build_h(couplings: &Couplings, dim: usize, stokes_offset: usize) -> EvolutionTensor {
    let f = &SpinAlgebra::shared().structure;
    let channels = [
        (couplings.g1, 2usize, FZ),
        (couplings.g2, 0, JX),
        (couplings.g2, 1, JY),
    ];
    let mut entries = Vec::new();
    for &(g, s, atom) in &channels {
        if g == 0.0 {
            continue;
        }
        for i in 0..8 {
            for k in 0..8 {
                let v = f.atomic(i, atom, k);
                if v != 0.0 {
                    entries.push((ATOM_OFFSET + i, stokes_offset + s, ATOM_OFFSET + k, g * v));
                }
            }
        }
        for a in 0..3 {
            for c in 0..3 {
                let v = f.stokes(a, s, c);
                if v != 0.0 {
                    entries.push((stokes_offset + a, ATOM_OFFSET + atom, stokes_offset + c, g * v));
                }
            }
        }
    }
    EvolutionTensor { dim, entries }
}

impl EvolutionTensor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, usize, usize, f64)] {
        &self.entries
    }

    /// `V·H·V`
    pub fn contract(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for &(i, j, k, h) in &self.entries {
            out[i] += v[j] * h * v[k];
        }
        out
    }

    /// Mean drift matrix `U_ik = Σ_j V_j H^i_jk`, so that `V·H·V = U·V`.
    pub fn drift(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let mut u = DMatrix::zeros(self.dim, self.dim);
        for &(i, j, k, h) in &self.entries {
            u[(i, k)] += v[j] * h;
        }
        u
    }

    /// `J_ik = Σ_j V_j (H^i_jk + H^i_kj)`, the derivative of `V·H·V`.
    pub fn jacobian(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.dim, self.dim);
        for &(i, j, k, h) in &self.entries {
            jac[(i, k)] += v[j] * h;
            jac[(i, j)] += v[k] * h;
        }
        jac
    }
}

/// One coherent substep covering a fraction `h` of the pulse.
pub fn coherent_substep(state: &mut GaussianState, tensor: &EvolutionTensor, h: f64) {
    let v0 = state.mean.clone();
    let k0 = tensor.contract(&v0) * h;
    let v_mid = &v0 + &k0 * 0.5;
    let k1 = tensor.contract(&v_mid) * h;

    let n = state.dim();
    let j0 = tensor.jacobian(&v0) * h;
    let j1 = tensor.jacobian(&v_mid) * h;
    let inner = DMatrix::identity(n, n) + j0 * 0.5;
    let t = DMatrix::identity(n, n) + j1 * inner;

    state.mean = v0 + k1;
    state.cov = &t * &state.cov * t.transpose();
    symmetrize(&mut state.cov);
}

/// Removal of a fraction `1 − X` of the atoms and re-addition of a fraction
/// `p` of them in the fully mixed state.
pub fn atomic_decoherence(state: &mut GaussianState, survival: f64, readd_fraction: f64) -> Result<()> {
    if !(survival > 0.0 && survival <= 1.0) {
        return Err(Error::SurvivalFraction(survival));
    }
    if survival == 1.0 {
        return Ok(());
    }
    let x = survival;
    let n_atoms = state.n_atoms;
    let alg = SpinAlgebra::shared();
    let gamma_single = alg.kernel.covariance_unchecked(&state.single_atom_mean());

    let dim = state.dim();
    let a = ATOM_OFFSET..ATOM_OFFSET + 8;
    for r in a.clone() {
        state.mean[r] *= x;
        for c in 0..dim {
            if !a.contains(&c) {
                state.cov[(r, c)] *= x;
                state.cov[(c, r)] *= x;
            }
        }
    }
    let mut block = state.cov.fixed_view_mut::<8, 8>(ATOM_OFFSET, ATOM_OFFSET);
    let noise = gamma_single * (x * (1.0 - x) * n_atoms);
    block *= x * x;
    block += noise;
    let thermal = readd_fraction * (1.0 - x) * (2.0 / 3.0) * n_atoms;
    for k in 0..8 {
        block[(k, k)] += thermal;
    }
    state.n_atoms = n_atoms * (x + readd_fraction * (1.0 - x));
    Ok(())
}

/// Photon-loss decoherence of one Stokes block: `ε = exp(−η N_A)`.
pub fn photon_loss(state: &mut GaussianState, pulse_id: u64, eta_gamma: f64) -> Result<()> {
    let eps = (-eta_gamma * state.n_atoms).exp();
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::SurvivalFraction(eps));
    }
    let off = state.pulse_offset_by_id(pulse_id)?;
    let photons = state.pulses()[state.pulse_index(pulse_id)?].light.photons;
    let dim = state.dim();
    for r in off..off + 3 {
        state.mean[r] *= eps;
        for c in 0..dim {
            state.cov[(r, c)] *= eps;
            state.cov[(c, r)] *= eps;
        }
    }
    for k in 0..3 {
        state.cov[(off + k, off + k)] += eps * (1.0 - eps) * photons / 4.0;
    }
    Ok(())
}

/// Full-pulse decoherence: atoms by `X = exp(−η n_L)`, the pulse by `ε`
/// when photon loss is enabled.
pub fn optical_decoherence(state: &mut GaussianState, pulse: &ProbePulse, pulse_id: u64) -> Result<()> {
    atomic_decoherence(state, pulse.survival(), pulse.couplings.readd_fraction)?;
    if pulse.couplings.photon_loss {
        photon_loss(state, pulse_id, pulse.couplings.eta_gamma)?;
    }
    Ok(())
}

/// Coherent evolution for a fraction `h` of the pulse, symmetrically
/// wrapped in two half-substeps of atomic decoherence. Photon loss is applied separately by [`finish_pulse`].
pub fn light_substep(state: &mut GaussianState, pulse: &ProbePulse, pulse_id: u64, h: f64) -> Result<()> {
    let off = state.pulse_offset_by_id(pulse_id)?;
    let tensor = build_h(&pulse.couplings, state.dim(), off);
    let half = (-0.5 * pulse.couplings.eta_gamma * pulse.light.photons * h).exp();
    atomic_decoherence(state, half, pulse.couplings.readd_fraction)?;
    coherent_substep(state, &tensor, h);
    atomic_decoherence(state, half, pulse.couplings.readd_fraction)
}

pub fn finish_pulse(state: &mut GaussianState, pulse: &ProbePulse, pulse_id: u64) -> Result<()> {
    if pulse.couplings.photon_loss {
        photon_loss(state, pulse_id, pulse.couplings.eta_gamma)?;
    }
    Ok(())
}

/// Interaction of one pulse with the ensemble in `n_substeps` substeps,
/// without magnetic evolution.
pub fn pulse_step(state: &mut GaussianState, pulse: &ProbePulse, pulse_id: u64, n_substeps: usize) -> Result<()> {
    pulse.validate()?;
    if n_substeps == 0 {
        return Err(Error::InvalidParameter("n_substeps must be at least 1".into()));
    }
    let h = 1.0 / n_substeps as f64;
    for _ in 0..n_substeps {
        light_substep(state, pulse, pulse_id, h)?;
    }
    finish_pulse(state, pulse, pulse_id)
}

/// Largest change between two states, relative to the size of each part.
pub fn relative_change(a: &GaussianState, b: &GaussianState) -> f64 {
    let dm = (&a.mean - &b.mean).amax() / a.mean.amax().max(f64::MIN_POSITIVE);
    let dc = (&a.cov - &b.cov).amax() / a.cov.amax().max(f64::MIN_POSITIVE);
    dm.max(dc)
}

/// Doubles the substep count from `initial` until two consecutive results
/// differ by less than `tolerance`. Returns the substep count used.
pub fn pulse_step_converged(
    state: &mut GaussianState,
    pulse: &ProbePulse,
    pulse_id: u64,
    initial: usize,
    tolerance: f64,
    max_doublings: u32,
) -> Result<usize> {
    let mut n = initial.max(1);
    let mut prev = state.clone();
    pulse_step(&mut prev, pulse, pulse_id, n)?;
    let mut change = f64::INFINITY;
    for _ in 0..max_doublings {
        n *= 2;
        let mut next = state.clone();
        pulse_step(&mut next, pulse, pulse_id, n)?;
        change = relative_change(&next, &prev);
        prev = next;
        if change < tolerance {
            *state = prev;
            return Ok(n);
        }
    }
    Err(Error::Divergence {
        doublings: max_doublings,
        substeps: n,
        change,
        tolerance,
    })
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}
