//! Larmor precession in a static field with gradient dephasing.
//!
//! A single atom obeys `dλ/dt = −γ|B| 𝒜(b̂) λ` with `𝒜_ik = Σ_c b̂_c f_ick`.
//! `𝒜` is real antisymmetric with eigenvalues `i m`, `m ∈ {−2,…,2}`, so the
//! propagator is `Σ_m e^{−iω₀ m t} P_m`. A Lorentzian cloud in a parallel
//! gradient damps each sector by `e^{−|m| t/T}`.

use nalgebra::{DMatrix, Matrix3, SMatrix, SymmetricEigen, Vector3};

use crate::algebra::{commutation_matrix, Mat8, SpinAlgebra, Vec8, C64};
use crate::error::{Error, Result};
use crate::lightmatter::symmetrize;
use crate::state::{check_symmetric_psd, GaussianState, ATOM_OFFSET, B_OFFSET};

type Mat8c = SMatrix<C64, 8, 8>;

/// `μ_B/ħ` in rad·s⁻¹·mG⁻¹.
pub const MU_B_OVER_HBAR: f64 = 8_794.100_78;
pub const DEFAULT_G_F: f64 = -0.5;
/// Largest accepted `|ω₀|τ` for one covariance step.
pub const MAX_OMEGA_TAU: f64 = 0.1;
const UNIT_TOL: f64 = 1e-12;
const INTEGER_TOL: f64 = 1e-10;

/// `γ = g_F μ_B/ħ` (rad·s⁻¹·mG⁻¹, signed).
pub fn gyromagnetic_ratio(g_f: f64) -> f64 {
    g_f * MU_B_OVER_HBAR
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldModel {
    /// Mean field over the cloud (mG).
    pub b_mean: Vector3<f64>,
    /// `∂|B|/∂z` along the trap axis (mG/mm).
    pub grad_parallel: f64,
    /// Magnitude of the perpendicular gradient (mG/mm); not modelled.
    pub grad_perp: f64,
    /// Lorentzian width `w` of the cloud along `z` (mm).
    pub cloud_width: f64,
    /// Gyromagnetic ratio, sign included (rad·s⁻¹·mG⁻¹).
    pub gamma: f64,
    /// Shot-to-shot field covariance (mG²).
    pub gamma_b: Matrix3<f64>,
}

impl FieldModel {
    pub fn uniform(b_mean: Vector3<f64>, gamma: f64) -> Self {
        Self {
            b_mean,
            grad_parallel: 0.0,
            grad_perp: 0.0,
            cloud_width: 0.0,
            gamma,
            gamma_b: Matrix3::zeros(),
        }
    }

    /// Sets the parallel gradient that gives coherence time `t` for the
    /// current cloud width (unit width if none is set).
    pub fn with_coherence_time(mut self, t: f64) -> Self {
        if self.cloud_width <= 0.0 {
            self.cloud_width = 1.0;
        }
        self.grad_parallel = if t.is_finite() {
            1.0 / (t * self.cloud_width * self.gamma.abs())
        } else {
            0.0
        };
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cloud_width >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cloud width {} must be non-negative",
                self.cloud_width
            )));
        }
        if !self.b_mean.iter().all(|b| b.is_finite()) || !self.gamma.is_finite() {
            return Err(Error::InvalidParameter("field and gyromagnetic ratio must be finite".into()));
        }
        check_symmetric_psd("Γ_B", &DMatrix::from_iterator(3, 3, self.gamma_b.iter().copied()))
    }

    /// Signed Larmor frequency `ω₀ = γ|B̄|` (rad/s).
    pub fn larmor(&self) -> f64 {
        self.gamma * self.b_mean.norm()
    }

    /// `1/T = w |γ| |∂B_∥/∂z|`, the decay rate of the `|m| = 1` sectors.
    pub fn dephasing_rate(&self) -> f64 {
        self.cloud_width * self.gamma.abs() * self.grad_parallel.abs()
    }

    pub fn coherence_time(&self) -> f64 {
        1.0 / self.dephasing_rate()
    }

    pub fn propagator(&self) -> Result<FieldPropagator> {
        self.validate()?;
        if self.grad_perp != 0.0 {
            log::warn!(
                "perpendicular gradient {} mG/mm ignored; only the parallel gradient dephases",
                self.grad_perp
            );
        }
        let norm = self.b_mean.norm();
        let generator = if norm > 0.0 {
            Some(build_generator(&(self.b_mean / norm))?)
        } else {
            if self.grad_parallel != 0.0 {
                log::warn!("parallel gradient ignored at zero mean field");
            }
            None
        };
        Ok(FieldPropagator {
            omega: self.larmor(),
            rate: if generator.is_some() { self.dephasing_rate() } else { 0.0 },
            gamma: self.gamma,
            generator,
        })
    }
}

/// `𝒜(b̂)` and its spectral decomposition.
#[derive(Clone, Debug)]
pub struct FieldGenerator {
    b_hat: Vector3<f64>,
    matrix: Mat8,
    /// `m` for each eigenvector, ascending.
    orders: [i32; 8],
    /// One projector per distinct `m`, `m = −2..=2`.
    sectors: Vec<(i32, Mat8c)>,
}

pub fn build_generator(b_hat: &Vector3<f64>) -> Result<FieldGenerator> {
    let norm = b_hat.norm();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::NotUnitVector { norm });
    }
    let f = &SpinAlgebra::shared().structure;
    let matrix = (0..3).fold(Mat8::zeros(), |acc, c| acc + f.adjoint(c) * b_hat[c]);

    // i𝒜 is Hermitian; 𝒜v = i m v ⇔ (i𝒜)v = −m v.
    let herm: Mat8c = matrix.map(|x| C64::new(0.0, x));
    let eig = SymmetricEigen::new(herm);
    let mut orders = [0i32; 8];
    let mut sectors: Vec<(i32, Mat8c)> = (-2..=2).map(|m| (m, Mat8c::zeros())).collect();
    for (idx, &h) in eig.eigenvalues.iter().enumerate() {
        let m = -h;
        let rounded = m.round();
        if (m - rounded).abs() > INTEGER_TOL || rounded.abs() > 2.0 {
            return Err(Error::InvalidParameter(format!(
                "field generator eigenvalue {m} is not an integer in [-2, 2]"
            )));
        }
        orders[idx] = rounded as i32;
        let v = eig.eigenvectors.column(idx);
        sectors[(rounded as i32 + 2) as usize].1 += v * v.adjoint();
    }
    orders.sort_unstable();
    if orders != [-2, -1, -1, 0, 0, 1, 1, 2] {
        return Err(Error::InvalidParameter(format!(
            "field generator spectrum {orders:?} differs from i{{-2,-1,-1,0,0,1,1,2}}"
        )));
    }
    Ok(FieldGenerator {
        b_hat: *b_hat,
        matrix,
        orders,
        sectors,
    })
}

impl FieldGenerator {
    pub fn b_hat(&self) -> &Vector3<f64> {
        &self.b_hat
    }

    pub fn matrix(&self) -> &Mat8 {
        &self.matrix
    }

    /// Eigenvalues `a_i = i m_i` of `𝒜`.
    pub fn eigenvalues(&self) -> [C64; 8] {
        self.orders.map(|m| C64::new(0.0, m as f64))
    }

    /// `(m, P_m)` for each distinct eigenvalue `i m`.
    pub fn projectors(&self) -> &[(i32, Mat8c)] {
        &self.sectors
    }

    /// `Re Σ_m c(m) P_m`.
    fn spectral(&self, coeff: impl Fn(i32) -> C64) -> Mat8 {
        let mut acc = Mat8c::zeros();
        for (m, p) in &self.sectors {
            acc += p * coeff(*m);
        }
        acc.map(|z| z.re)
    }

    /// `T_B(t) = Σ e^{−ω a_i t} P_i`.
    pub fn rotation(&self, omega: f64, t: f64) -> Mat8 {
        self.spectral(|m| C64::from_polar(1.0, -omega * m as f64 * t))
    }

    /// `D_B(t) = Σ e^{−|m| t/T} P_m` with `rate = 1/T`.
    pub fn dephasing(&self, rate: f64, t: f64) -> Mat8 {
        self.spectral(|m| C64::new((-(m.abs() as f64) * rate * t).exp(), 0.0))
    }

    /// `D_B(t) T_B(t)`.
    pub fn evolution(&self, omega: f64, rate: f64, t: f64) -> Mat8 {
        self.spectral(|m| {
            let m = m as f64;
            C64::from_polar((-m.abs() * rate * t).exp(), -omega * m * t)
        })
    }
}

/// Everything needed to advance the state in the dark.
#[derive(Clone, Debug)]
pub struct FieldPropagator {
    pub omega: f64,
    /// `1/T` (s⁻¹).
    pub rate: f64,
    pub gamma: f64,
    /// `None` at zero mean field.
    pub generator: Option<FieldGenerator>,
}

impl FieldPropagator {
    pub fn rotation(&self, t: f64) -> Mat8 {
        self.generator
            .as_ref()
            .map_or_else(Mat8::identity, |g| g.rotation(self.omega, t))
    }

    pub fn dephasing(&self, t: f64) -> Mat8 {
        self.generator
            .as_ref()
            .map_or_else(Mat8::identity, |g| g.dephasing(self.rate, t))
    }

    pub fn evolution(&self, t: f64) -> Mat8 {
        self.generator
            .as_ref()
            .map_or_else(Mat8::identity, |g| g.evolution(self.omega, self.rate, t))
    }
}

pub fn coherent_rotation(lambda: &Vec8, t: f64, prop: &FieldPropagator) -> Vec8 {
    prop.rotation(t) * lambda
}

pub fn dephasing_factors(t: f64, prop: &FieldPropagator) -> Mat8 {
    prop.dephasing(t)
}

/// `N = |Σ(MΛ̄) − M Σ(Λ̄) Mᵀ|`, the noise that keeps `Γ + iΣ ≥ 0` after the
/// mean map `M`.
pub fn dephasing_noise(before: &Vec8, map: &Mat8) -> Mat8 {
    let f = &SpinAlgebra::shared().structure;
    let sigma = commutation_matrix(before, f);
    let sigma_after = commutation_matrix(&(map * before), f);
    let deficit = sigma_after - map * sigma * map.transpose();
    matrix_abs(&deficit)
}

/// `√(AᵀA)` from the singular-value decomposition `A = U S Vᵀ`.
pub fn matrix_abs(a: &Mat8) -> Mat8 {
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let mut out = v_t.transpose() * Mat8::from_diagonal(&svd.singular_values) * v_t;
    out = (out + out.transpose()) * 0.5;
    out
}

/// `𝓕_ic = Σ_k f_ick Λ̄_k`: derivative of the precession drift with respect
/// to the field, up to `−γ`.
pub fn field_coupling(lambda: &Vec8) -> SMatrix<f64, 8, 3> {
    let f = &SpinAlgebra::shared().structure;
    SMatrix::<f64, 8, 3>::from_fn(|i, c| (0..8).map(|k| f.atomic(i, c, k) * lambda[k]).sum())
}

const GL4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];

/// Atom-row, field-column block of the step map:
/// `−γ ∫₀^τ M(τ−s) 𝓕(M(s)Λ̄) ds` with `M = D_B T_B`.
pub fn coupling_block(lambda: &Vec8, tau: f64, prop: &FieldPropagator) -> SMatrix<f64, 8, 3> {
    let half = 0.5 * tau;
    let mut acc = SMatrix::<f64, 8, 3>::zeros();
    for &(x, w) in &GL4 {
        let s = half * (1.0 + x);
        let lam_s = prop.evolution(s) * lambda;
        acc += prop.evolution(tau - s) * field_coupling(&lam_s) * (w * half);
    }
    acc * -prop.gamma
}

/// Advances the state by `τ` in the dark: precession, dephasing, field
/// correlations and dephasing noise. Field and light blocks are unchanged.
pub fn field_step(state: &mut GaussianState, prop: &FieldPropagator, tau: f64) -> Result<()> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidParameter(format!("field step {tau} must be non-negative")));
    }
    let omega_tau = prop.omega.abs() * tau;
    if omega_tau > MAX_OMEGA_TAU {
        return Err(Error::StepTooLarge {
            omega_tau,
            limit: MAX_OMEGA_TAU,
        });
    }
    if tau == 0.0 {
        return Ok(());
    }
    let lambda = state.atomic_mean();
    let m = prop.evolution(tau);
    let c = coupling_block(&lambda, tau, prop);
    let noise = dephasing_noise(&lambda, &m);

    let n = state.dim();
    let mut phi = DMatrix::<f64>::identity(n, n);
    phi.fixed_view_mut::<8, 8>(ATOM_OFFSET, ATOM_OFFSET).copy_from(&m);
    phi.fixed_view_mut::<8, 3>(ATOM_OFFSET, B_OFFSET).copy_from(&c);

    state.set_atomic_mean(&(m * lambda));
    state.cov = &phi * &state.cov * phi.transpose();
    let mut block = state.cov.fixed_view_mut::<8, 8>(ATOM_OFFSET, ATOM_OFFSET);
    block += noise;
    symmetrize(&mut state.cov);
    Ok(())
}

/// Splits `duration` into `n` equal field steps.
pub fn evolve_dark(state: &mut GaussianState, prop: &FieldPropagator, duration: f64, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("dark interval needs at least one substep".into()));
    }
    let tau = duration / n as f64;
    for _ in 0..n {
        field_step(state, prop, tau)?;
    }
    Ok(())
}
