//! Exact single-atom references for checking the Gaussian engine.
//!
//! These work directly with 3×3 density matrices and the Heisenberg
//! equations rather than with the engine's linearized maps.

use nalgebra::Vector3;

use crate::algebra::{Mat3c, SpinAlgebra, Vec8, C64, FX, FY, FZ, JX, JY};
use crate::error::{Error, Result};

const DENSITY_TOL: f64 = 1e-10;

/// A validated spin-1 density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix3(Mat3c);

impl DensityMatrix3 {
    pub fn new(rho: Mat3c) -> Result<Self> {
        let herm = (rho - rho.adjoint()).norm();
        if herm > DENSITY_TOL {
            return Err(Error::NotSymmetric {
                what: "density matrix",
                asymmetry: herm,
            });
        }
        let tr = rho.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > DENSITY_TOL {
            return Err(Error::InvalidParameter(format!("density matrix trace {tr} is not 1")));
        }
        let min = rho.symmetric_eigenvalues().min();
        if min < -DENSITY_TOL {
            return Err(Error::Unphysical { min_eigenvalue: min });
        }
        Ok(Self(rho))
    }

    pub fn matrix(&self) -> &Mat3c {
        &self.0
    }

    /// `Tr(ρ A)`
    pub fn expect(&self, a: &Mat3c) -> C64 {
        (self.0 * a).trace()
    }
}

/// `ρ = 𝟙/3 + ½ Σ λ̄_i λ_i`, rejecting vectors with no physical state.
pub fn rho_from_lambda(lambda: &Vec8) -> Result<DensityMatrix3> {
    let basis = &SpinAlgebra::shared().basis;
    let mut rho = Mat3c::identity() / C64::new(3.0, 0.0);
    for (k, m) in basis.iter().enumerate() {
        rho += m * C64::new(0.5 * lambda[k], 0.0);
    }
    DensityMatrix3::new(rho)
}

/// `λ̄_i = Tr(ρ λ_i)`
pub fn lambda_from_rho(rho: &DensityMatrix3) -> Vec8 {
    let basis = &SpinAlgebra::shared().basis;
    Vec8::from_fn(|k, _| rho.expect(basis.get(k)).re)
}

/// Spin component along `n` (not necessarily unit).
fn spin_along(n: &Vector3<f64>) -> Mat3c {
    let b = &SpinAlgebra::shared().basis;
    b.get(FX) * C64::new(n.x, 0.0) + b.get(FY) * C64::new(n.y, 0.0) + b.get(FZ) * C64::new(n.z, 0.0)
}

/// `ρ(t) = U ρ U†` with `U = exp(iγ|B|t f_B) = 𝟙 + i f_B sin θ + f_B² (cos θ − 1)`.
pub fn exact_field_evolution(rho: &DensityMatrix3, b: &Vector3<f64>, gamma: f64, t: f64) -> DensityMatrix3 {
    let norm = b.norm();
    if norm == 0.0 {
        return rho.clone();
    }
    let theta = gamma * norm * t;
    let f_b = spin_along(&(b / norm));
    let u = Mat3c::identity() + f_b * C64::new(0.0, theta.sin()) + f_b * f_b * C64::new(theta.cos() - 1.0, 0.0);
    DensityMatrix3(u * rho.0 * u.adjoint())
}

/// Mean-field state during a pulse: single-atom `ρ` and the Stokes vector.
#[derive(Clone, Debug)]
struct PulseState {
    rho: Mat3c,
    s: Vector3<f64>,
}

impl PulseState {
    fn axpy(&self, h: f64, d: &PulseState) -> PulseState {
        PulseState {
            rho: self.rho + d.rho * C64::new(h, 0.0),
            s: self.s + d.s * h,
        }
    }
}

/// Interaction strengths for [`heisenberg_pulse_oracle`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseCouplings {
    pub g1: f64,
    pub g2: f64,
    pub n_atoms: f64,
}

fn pulse_rhs(st: &PulseState, c: &PulseCouplings) -> PulseState {
    let basis = &SpinAlgebra::shared().basis;
    let h_atom = basis.get(FZ) * C64::new(c.g1 * st.s.z, 0.0)
        + basis.get(JX) * C64::new(c.g2 * st.s.x, 0.0)
        + basis.get(JY) * C64::new(c.g2 * st.s.y, 0.0);
    let i = C64::new(0.0, 1.0);
    let d_rho = (h_atom * st.rho - st.rho * h_atom) * -i;

    // i[H, S] = Ω × S with Ω = (G2 J_x, G2 J_y, G1 F_z), from [S_a, S_b] = iε_abc S_c.
    let expect = |k: usize| c.n_atoms * (st.rho * basis.get(k)).trace().re;
    let omega = Vector3::new(c.g2 * expect(JX), c.g2 * expect(JY), c.g1 * expect(FZ));
    PulseState {
        rho: d_rho,
        s: omega.cross(&st.s),
    }
}

/// Integrates the mean-field Heisenberg equations of one pulse with
/// classical RK4 in `fine_steps` steps. Returns the single-atom vector and
/// the output Stokes vector.
pub fn heisenberg_pulse_oracle(
    lambda: &Vec8,
    stokes: &Vector3<f64>,
    couplings: &PulseCouplings,
    fine_steps: usize,
) -> Result<(Vec8, Vector3<f64>)> {
    if fine_steps == 0 {
        return Err(Error::InvalidParameter("fine_steps must be positive".into()));
    }
    let rho0 = rho_from_lambda(lambda)?;
    let mut st = PulseState {
        rho: rho0.0,
        s: *stokes,
    };
    let h = 1.0 / fine_steps as f64;
    for _ in 0..fine_steps {
        let k1 = pulse_rhs(&st, couplings);
        let k2 = pulse_rhs(&st.axpy(0.5 * h, &k1), couplings);
        let k3 = pulse_rhs(&st.axpy(0.5 * h, &k2), couplings);
        let k4 = pulse_rhs(&st.axpy(h, &k3), couplings);
        st.rho += (k1.rho + k2.rho * C64::new(2.0, 0.0) + k3.rho * C64::new(2.0, 0.0) + k4.rho) * C64::new(h / 6.0, 0.0);
        st.s += (k1.s + k2.s * 2.0 + k3.s * 2.0 + k4.s) * (h / 6.0);
    }
    let rho = DensityMatrix3::new((st.rho + st.rho.adjoint()) * C64::new(0.5, 0.0))?;
    Ok((lambda_from_rho(&rho), st.s))
}

const GL16: [(f64, f64); 8] = [
    (0.095_012_509_837_637_44, 0.189_450_610_455_068_5),
    (0.281_603_550_779_258_9, 0.182_603_415_044_923_6),
    (0.458_016_777_657_227_4, 0.169_156_519_395_002_5),
    (0.617_876_244_402_643_7, 0.149_595_988_816_576_7),
    (0.755_404_408_355_003_0, 0.124_628_971_255_533_9),
    (0.865_631_202_387_831_8, 0.095_158_511_682_492_78),
    (0.944_575_023_073_232_6, 0.062_253_523_938_647_89),
    (0.989_400_934_991_649_9, 0.027_152_459_411_754_09),
];

fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    GL16.iter()
        .map(|&(x, w)| w * (f(mid - half * x) + f(mid + half * x)))
        .sum::<f64>()
        * half
}

/// `(2/π) ∫₀^∞ cos(κu)/(1+u²) du` by piecewise quadrature.
///
/// This is the ensemble average of `e^{−iκu}` over a unit-width Lorentzian
/// and should equal `e^{−|κ|}`.
pub fn lorentzian_phase_integral(kappa: f64) -> f64 {
    let k = kappa.abs();
    let g = |u: f64| (k * u).cos() / (1.0 + u * u);
    if k == 0.0 {
        // u = tan θ
        return gauss_legendre(|_| 1.0, 0.0, std::f64::consts::FRAC_PI_2) * 2.0 / std::f64::consts::PI;
    }
    let half_period = std::f64::consts::PI / k;
    let step = half_period.min(0.5);
    let reach = (400.0f64).max(50.0 / k).min(2e5);
    let end = (reach / half_period).ceil() * half_period;
    let n = (end / step).ceil() as usize;
    let step = end / n as f64;
    let mut sum = 0.0;
    for i in 0..n {
        sum += gauss_legendre(g, i as f64 * step, (i + 1) as f64 * step);
    }
    // ∫_U^∞ cos(κu) h(u) du ≈ −cos(κU) h′(U)/κ² at sin(κU) = 0
    let dh = -2.0 * end / (1.0 + end * end).powi(2);
    sum += -(k * end).cos() * dh / (k * k);
    sum * 2.0 / std::f64::consts::PI
}

/// Collective spin under uniform precession with Lorentzian gradient
/// dephasing, written with the rotation generator `A_B` of the field
/// direction and `ω_F = −γ|B|`:
/// `F(t) = (𝟙 + A²)F(0) + e^{−t/T}(A sin ω_F t − A² cos ω_F t)F(0)`.
pub fn collective_spin_dephased(
    f0: &Vector3<f64>,
    b: &Vector3<f64>,
    gamma: f64,
    coherence_time: f64,
    t: f64,
) -> Vector3<f64> {
    let n = b.normalize();
    let a = nalgebra::Matrix3::new(0.0, -n.z, n.y, n.z, 0.0, -n.x, -n.y, n.x, 0.0);
    let a2 = a * a;
    let w = -gamma * b.norm();
    let decay = (-t / coherence_time).exp();
    (nalgebra::Matrix3::identity() + a2) * f0 + (a * (w * t).sin() - a2 * (w * t).cos()) * f0 * decay
}
