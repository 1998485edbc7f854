//! Spin-1 operator basis and the Lie-algebra data derived from it.
//!
//! The eight single-atom operators are ordered
//! `(f_x, f_y, f_z, j_x, j_y, j_k, j_l, j_m)`, indices `0..8`. The `f` are
//! the spin vector, the `j` the rank-2 alignment tensor components:
//!
//! ```text
//! j_x = f_x² − f_y²        j_y = f_x f_y + f_y f_x
//! j_k = f_x f_z + f_z f_x  j_l = f_y f_z + f_z f_y
//! j_m = (2 f_z² − f_x² − f_y²) / √3
//! ```
//!
//! Commutators close on the basis, `[λ_a, λ_b] = i f_abc λ_c`, with a
//! completely antisymmetric real tensor `f_abc`. Collective operators
//! `Λ = Σ_atoms λ` inherit the same algebra.

use std::sync::OnceLock;

use nalgebra::{Complex, Matrix3, SMatrix, SVector, Vector3};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type Mat3c = Matrix3<C64>;
pub type Vec8 = SVector<f64, 8>;
pub type Mat8 = SMatrix<f64, 8, 8>;

pub const FX: usize = 0;
pub const FY: usize = 1;
pub const FZ: usize = 2;
pub const JX: usize = 3;
pub const JY: usize = 4;
pub const JK: usize = 5;
pub const JL: usize = 6;
pub const JM: usize = 7;

pub const NAMES: [&str; 8] = ["f_x", "f_y", "f_z", "j_x", "j_y", "j_k", "j_l", "j_m"];

/// Eigenvalue tolerance for accepting a single-atom density matrix.
pub const PHYSICALITY_TOL: f64 = 1e-9;

/// Tolerance used when validating stored structure constants and
/// commutator expansions against the matrix representation.
pub const ALGEBRA_TOL: f64 = 1e-12;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Independent nonzero atomic structure constants; every other nonzero
/// entry follows by antisymmetry.
const ATOMIC_ENTRIES: [(usize, usize, usize, f64); 9] = [
    (FX, FY, FZ, 1.0),
    (JX, JY, FZ, 2.0),
    (FX, JL, JM, SQRT3),
    (FY, JM, JK, SQRT3),
    (FX, JY, JK, 1.0),
    (FX, JL, JX, 1.0),
    (FY, JK, JX, 1.0),
    (FZ, JK, JL, 1.0),
    (FY, JL, JY, 1.0),
];

/// The eight spin-1 basis matrices in the `|m = +1, 0, −1⟩` basis.
#[derive(Clone, Debug)]
pub struct LambdaBasis {
    mats: [Mat3c; 8],
}

pub fn build_basis() -> LambdaBasis {
    let r = |x: f64| C64::new(x, 0.0);
    let i = |x: f64| C64::new(0.0, x);
    let z = C64::new(0.0, 0.0);
    let h = std::f64::consts::FRAC_1_SQRT_2;

    let fx = Mat3c::new(z, r(h), z, r(h), z, r(h), z, r(h), z);
    let fy = Mat3c::new(z, i(-h), z, i(h), z, i(-h), z, i(h), z);
    let fz = Mat3c::new(r(1.0), z, z, z, z, z, z, z, r(-1.0));

    let jx = fx * fx - fy * fy;
    let jy = fx * fy + fy * fx;
    let jk = fx * fz + fz * fx;
    let jl = fy * fz + fz * fy;
    let jm = (fz * fz * r(2.0) - fx * fx - fy * fy) / r(SQRT3);

    LambdaBasis {
        mats: [fx, fy, fz, jx, jy, jk, jl, jm],
    }
}

impl LambdaBasis {
    pub fn get(&self, i: usize) -> &Mat3c {
        &self.mats[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Mat3c> {
        self.mats.iter()
    }

    /// `Tr(A λ_i) / 2` for each basis element: the expansion coefficients of
    /// a traceless matrix `A`.
    pub fn expand(&self, a: &Mat3c) -> [C64; 8] {
        std::array::from_fn(|k| (a * self.mats[k]).trace() * 0.5)
    }

    /// `ρ = 𝟙/3 + ½ Σ λ̄_i λ_i`
    pub fn rho_from_lambda(&self, lambda: &Vec8) -> Mat3c {
        let mut rho = Mat3c::identity() / C64::new(3.0, 0.0);
        for (k, m) in self.mats.iter().enumerate() {
            rho += m * C64::new(0.5 * lambda[k], 0.0);
        }
        rho
    }

    /// `λ̄_i = Tr(ρ λ_i)`
    pub fn lambda_from_rho(&self, rho: &Mat3c) -> Vec8 {
        Vec8::from_fn(|k, _| (rho * self.mats[k]).trace().re)
    }

    /// Smallest eigenvalue of the density matrix implied by `λ̄`.
    pub fn min_rho_eigenvalue(&self, lambda: &Vec8) -> f64 {
        hermitian_eigenvalues(&self.rho_from_lambda(lambda)).min()
    }

    /// Single-atom vector of the `m = ±1` eigenstate of the spin component
    /// along `axis` (a unit 3-vector).
    pub fn polarized_along(&self, axis: &Vector3<f64>, sign: f64) -> Vec8 {
        let f_axis = self.mats[FX] * C64::new(axis.x, 0.0)
            + self.mats[FY] * C64::new(axis.y, 0.0)
            + self.mats[FZ] * C64::new(axis.z, 0.0);
        let eig = f_axis.symmetric_eigen();
        let target = sign.signum();
        let (col, _) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
            .expect("3x3 matrix has eigenvalues");
        let psi = eig.eigenvectors.column(col).into_owned();
        let rho = psi * psi.adjoint();
        self.lambda_from_rho(&rho)
    }
}

pub(crate) fn hermitian_eigenvalues(m: &Mat3c) -> Vector3<f64> {
    m.symmetric_eigenvalues()
}

/// Completely antisymmetric structure constants of the atomic algebra and
/// of the Stokes operators.
#[derive(Clone, Debug)]
pub struct StructureConstants {
    entries: Vec<(usize, usize, usize, f64)>,
    dense: [[[f64; 8]; 8]; 8],
}

impl StructureConstants {
    /// Builds the tensor from the stored sparse entries without validation.
    pub fn from_table() -> Self {
        let mut dense = [[[0.0; 8]; 8]; 8];
        for &(a, b, c, v) in &ATOMIC_ENTRIES {
            for (p, q, r, s) in [
                (a, b, c, 1.0),
                (b, c, a, 1.0),
                (c, a, b, 1.0),
                (b, a, c, -1.0),
                (a, c, b, -1.0),
                (c, b, a, -1.0),
            ] {
                dense[p][q][r] = s * v;
            }
        }
        Self {
            entries: ATOMIC_ENTRIES.to_vec(),
            dense,
        }
    }

    /// Builds the tensor and checks every one of the 512 entries against
    /// `Tr([λ_a, λ_b] λ_c) / 2i` in the matrix representation.
    pub fn validated(basis: &LambdaBasis) -> Result<Self> {
        let f = Self::from_table();
        for a in 0..8 {
            for b in 0..8 {
                let comm = basis.get(a) * basis.get(b) - basis.get(b) * basis.get(a);
                for c in 0..8 {
                    let computed = ((comm * basis.get(c)).trace() / C64::new(0.0, 2.0)).re;
                    if (computed - f.dense[a][b][c]).abs() > ALGEBRA_TOL {
                        return Err(Error::StructureMismatch {
                            a,
                            b,
                            c,
                            stored: f.dense[a][b][c],
                            computed,
                        });
                    }
                }
            }
        }
        Ok(f)
    }

    pub fn entries(&self) -> &[(usize, usize, usize, f64)] {
        &self.entries
    }

    #[inline]
    pub fn atomic(&self, a: usize, b: usize, c: usize) -> f64 {
        self.dense[a][b][c]
    }

    /// `f(S_a, S_b, S_c)`: the Levi-Civita symbol, `f(S_x, S_y, S_z) = 1`.
    #[inline]
    pub fn stokes(&self, a: usize, b: usize, c: usize) -> f64 {
        levi_civita(a, b, c)
    }

    /// `(𝒜_c)_ik = f(i, c, k)`: the generator contracted on its middle index.
    pub fn adjoint(&self, c: usize) -> Mat8 {
        Mat8::from_fn(|i, k| self.dense[i][c][k])
    }
}

#[inline]
pub fn levi_civita(a: usize, b: usize, c: usize) -> f64 {
    match (a, b, c) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Entry `(a, b)` is the expansion of `−i[λ_a, λ_b]` in the basis.
pub type CommutatorTable = [[[f64; 8]; 8]; 8];

pub fn commutator_table(basis: &LambdaBasis) -> Result<CommutatorTable> {
    let mut table = [[[0.0; 8]; 8]; 8];
    let minus_i = C64::new(0.0, -1.0);
    for a in 0..8 {
        for b in 0..8 {
            let comm = (basis.get(a) * basis.get(b) - basis.get(b) * basis.get(a)) * minus_i;
            let coeffs = basis.expand(&comm);
            let mut rebuilt = Mat3c::zeros();
            for (k, c) in coeffs.iter().enumerate() {
                rebuilt += basis.get(k) * *c;
            }
            let residual = (rebuilt - comm).norm();
            let imag = coeffs.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
            if residual > ALGEBRA_TOL || imag > ALGEBRA_TOL {
                return Err(Error::NotInSpan {
                    a,
                    b,
                    residual: residual.max(imag),
                });
            }
            for (k, c) in coeffs.iter().enumerate() {
                table[a][b][k] = c.re;
            }
        }
    }
    Ok(table)
}

/// `Σ_ij = Σ_k f_ijk Λ̄_k`, so that `iΣ_ij = ⟨[Λ_i, Λ_j]⟩`.
pub fn commutation_matrix(mean: &Vec8, f: &StructureConstants) -> Mat8 {
    Mat8::from_fn(|i, j| (0..8).map(|k| f.atomic(i, j, k) * mean[k]).sum())
}

/// Precomputed `M^(k)_ij = ¼ Tr(λ_k {λ_i, λ_j})` for the single-atom
/// covariance `Γ_λ = ⅔𝟙 − λ̄λ̄ᵀ + Σ_k λ̄_k M^(k)`.
#[derive(Clone, Debug)]
pub struct CovarianceKernel {
    m: [Mat8; 8],
}

impl CovarianceKernel {
    pub fn new(basis: &LambdaBasis) -> Self {
        let m = std::array::from_fn(|k| {
            Mat8::from_fn(|i, j| {
                let anti = basis.get(i) * basis.get(j) + basis.get(j) * basis.get(i);
                0.25 * (basis.get(k) * anti).trace().re
            })
        });
        Self { m }
    }

    pub fn m(&self, k: usize) -> &Mat8 {
        &self.m[k]
    }

    /// Covariance of the eight operators in the single-atom state `λ̄`,
    /// without a physicality check.
    pub fn covariance_unchecked(&self, lambda: &Vec8) -> Mat8 {
        let mut g = Mat8::identity() * (2.0 / 3.0) - lambda * lambda.transpose();
        for k in 0..8 {
            if lambda[k] != 0.0 {
                g += self.m[k] * lambda[k];
            }
        }
        g
    }
}

/// Shared, validated algebra data.
#[derive(Clone, Debug)]
pub struct SpinAlgebra {
    pub basis: LambdaBasis,
    pub structure: StructureConstants,
    pub kernel: CovarianceKernel,
}

impl SpinAlgebra {
    pub fn new() -> Result<Self> {
        let basis = build_basis();
        let structure = StructureConstants::validated(&basis)?;
        let kernel = CovarianceKernel::new(&basis);
        Ok(Self {
            basis,
            structure,
            kernel,
        })
    }

    pub fn shared() -> &'static SpinAlgebra {
        static ALGEBRA: OnceLock<SpinAlgebra> = OnceLock::new();
        ALGEBRA.get_or_init(|| SpinAlgebra::new().expect("spin-1 structure constants validate"))
    }

    pub fn check_physical(&self, lambda: &Vec8) -> Result<()> {
        let min = self.basis.min_rho_eigenvalue(lambda);
        if min < -PHYSICALITY_TOL {
            return Err(Error::Unphysical {
                min_eigenvalue: min,
            });
        }
        Ok(())
    }

    /// Single-atom covariance matrix `Γ_λ` of a physical state `λ̄`.
    pub fn single_atom_covariance(&self, lambda: &Vec8) -> Result<Mat8> {
        self.check_physical(lambda)?;
        Ok(self.kernel.covariance_unchecked(lambda))
    }
}

pub fn single_atom_covariance(lambda: &Vec8) -> Result<Mat8> {
    SpinAlgebra::shared().single_atom_covariance(lambda)
}
