//! Property tests for the algebraic, dynamical and measurement invariants.

use nalgebra::{Complex, DMatrix, DVector, Matrix3, Vector3};
use proptest::prelude::*;

use spin1_cov::algebra::{single_atom_covariance, Mat3c, SpinAlgebra, Vec8, FZ, JX, JY};
use spin1_cov::lightmatter::{atomic_decoherence, pulse_step, Couplings, ProbePulse};
use spin1_cov::magnetics::{
    evolve_dark, field_step, gyromagnetic_ratio, FieldModel, DEFAULT_G_F, MAX_OMEGA_TAU,
};
use spin1_cov::measurement::{condition_on, condition_pinv};
use spin1_cov::oracle::{collective_spin_dephased, exact_field_evolution, lambda_from_rho, DensityMatrix3};
use spin1_cov::state::{
    check_symmetric_psd, initial_atomic_state, initial_full_state, min_eigenvalue, EnsembleSpec, GaussianState,
    LightSpec, PumpState, ATOM_OFFSET,
};

type C64 = Complex<f64>;

fn gamma() -> f64 {
    gyromagnetic_ratio(DEFAULT_G_F)
}

/// `AA†/Tr` for an arbitrary complex 3×3 `A`.
fn density(entries: &[f64]) -> DensityMatrix3 {
    let a = Mat3c::from_fn(|i, j| C64::new(entries[2 * (3 * i + j)], entries[2 * (3 * i + j) + 1]));
    let rho = a * a.adjoint();
    let tr = rho.trace();
    DensityMatrix3::new(rho / tr).expect("density matrix")
}

fn rho_strategy() -> impl Strategy<Value = DensityMatrix3> {
    prop::collection::vec(-1.0f64..1.0, 18)
        .prop_filter("non-degenerate", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-2)
        .prop_map(|v| density(&v))
}

fn unit_vector() -> impl Strategy<Value = Vector3<f64>> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_filter("not tiny", |(x, y, z)| x * x + y * y + z * z > 0.05)
        .prop_map(|(x, y, z)| Vector3::new(x, y, z).normalize())
}

fn psd(dim: usize, entries: &[f64]) -> DMatrix<f64> {
    let a = DMatrix::from_column_slice(dim, dim, &entries[..dim * dim]);
    &a * a.transpose()
}

fn atom_state(rho: &DensityMatrix3, n: f64, dn2: f64, light: Option<&LightSpec>) -> GaussianState {
    let lam = lambda_from_rho(rho);
    let spec = EnsembleSpec {
        n_atoms_mean: n,
        n_atoms_var: dn2,
        pump: PumpState::Vector(lam.as_slice().try_into().unwrap()),
    };
    initial_full_state(&spec, light, &Vector3::new(11.98, -4.38, -4.01), &(Matrix3::identity() * 0.05)).unwrap()
}

/// `½⟨{a, b}⟩` for one atom.
fn sym_moment(rho: &Mat3c, a: &Mat3c, b: &Mat3c) -> f64 {
    (rho * (a * b + b * a)).trace().re * 0.5
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn single_atom_covariance_matches_brute_force(rho in rho_strategy()) {
        let basis = &SpinAlgebra::shared().basis;
        let lam = lambda_from_rho(&rho);
        let gamma = single_atom_covariance(&lam).unwrap();
        let r = rho.matrix();
        for i in 0..8 {
            for j in 0..8 {
                let brute = sym_moment(r, basis.get(i), basis.get(j))
                    - (r * basis.get(i)).trace().re * (r * basis.get(j)).trace().re;
                prop_assert!((gamma[(i, j)] - brute).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn number_noise_matches_explicit_mixture(
        rho in rho_strategy(),
        w in prop::array::uniform3(0.05f64..1.0),
    ) {
        let basis = &SpinAlgebra::shared().basis;
        let r = rho.matrix();
        let lam = lambda_from_rho(&rho);
        let total: f64 = w.iter().sum();
        let p: Vec<f64> = w.iter().map(|x| x / total).collect();
        let ns = [2.0, 3.0, 4.0];
        let mean_n: f64 = p.iter().zip(ns).map(|(p, n)| p * n).sum();
        let var_n: f64 = p.iter().zip(ns).map(|(p, n)| p * n * n).sum::<f64>() - mean_n * mean_n;

        let (mean, cov) = initial_atomic_state(&EnsembleSpec {
            n_atoms_mean: mean_n,
            n_atoms_var: var_n,
            pump: PumpState::Vector(lam.as_slice().try_into().unwrap()),
        })
        .unwrap();
        prop_assert!((mean - lam * mean_n).amax() < 1e-12);

        // product state of N atoms: ⟨Λ_iΛ_j⟩ = N⟨λ_iλ_j⟩ + N(N−1)λ̄_iλ̄_j
        for i in 0..8 {
            for j in 0..8 {
                let second: f64 = p
                    .iter()
                    .zip(ns)
                    .map(|(p, n)| p * (n * sym_moment(r, basis.get(i), basis.get(j)) + n * (n - 1.0) * lam[i] * lam[j]))
                    .sum();
                let mixture = second - mean_n * mean_n * lam[i] * lam[j];
                prop_assert!((cov[(i, j)] - mixture).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn initial_state_is_symmetric_psd(rho in rho_strategy(), n in 1.0f64..1e7, k in 0.0f64..20.0) {
        let s = atom_state(&rho, n, k * n, Some(&LightSpec::h(1e6)));
        prop_assert!(check_symmetric_psd("Γ", &s.cov).is_ok());
    }

    #[test]
    fn structure_constants_antisymmetric(_x in 0..1u8) {
        let f = &SpinAlgebra::shared().structure;
        for &(a, b, c, v) in f.entries() {
            prop_assert!((f.atomic(b, a, c) + v).abs() < 1e-15);
            prop_assert!((f.atomic(a, c, b) + v).abs() < 1e-15);
        }
    }

    #[test]
    fn decoherence_preserves_uncertainty(
        rho in rho_strategy(),
        n in 10.0f64..1e7,
        survival in 0.5f64..1.0,
        readd in 0.0f64..1.0,
    ) {
        let mut s = atom_state(&rho, n, 3.0 * n, None);
        atomic_decoherence(&mut s, survival, readd).unwrap();
        prop_assert!(s.worst_axis_pair().relative >= -1e-8);
    }

    #[test]
    fn rotation_is_orthogonal_semigroup(
        b in unit_vector(),
        size in 1.0f64..20.0,
        t in 0.0f64..1e-3,
        u in 0.0f64..1e-3,
        x in prop::array::uniform8(-1.0f64..1.0),
    ) {
        let prop = FieldModel::uniform(b * size, gamma()).with_coherence_time(300e-6).propagator().unwrap();
        let x = Vec8::from_column_slice(&x);
        let r = prop.rotation(t);
        prop_assert!(((r * x).norm() - x.norm()).abs() < 1e-12);
        prop_assert!((prop.rotation(t + u) - prop.rotation(t) * prop.rotation(u)).amax() < 1e-10);
        prop_assert!((prop.evolution(t + u) - prop.evolution(t) * prop.evolution(u)).amax() < 1e-10);
    }

    #[test]
    fn field_step_keeps_covariance_psd(
        rho in rho_strategy(),
        n in 1.0f64..1e7,
        b in unit_vector(),
        frac in 0.01f64..1.0,
        t2 in 50e-6f64..1e-2,
    ) {
        let mut s = atom_state(&rho, n, 5.0 * n, None);
        let field = FieldModel { gamma_b: Matrix3::identity() * 0.05, ..FieldModel::uniform(b * 13.0, gamma()) }
            .with_coherence_time(t2);
        let prop = field.propagator().unwrap();
        let tau = frac * MAX_OMEGA_TAU / prop.omega.abs();
        for _ in 0..5 {
            field_step(&mut s, &prop, tau).unwrap();
            let scale = s.cov.norm();
            prop_assert!(min_eigenvalue(&s.cov) >= -1e-8 * scale);
            prop_assert!((&s.cov - s.cov.transpose()).amax() <= 1e-12 * scale);
        }
    }

    #[test]
    fn collective_formula_matches_engine(
        axis in unit_vector(),
        b in unit_vector(),
        t in 0.0f64..1e-3,
        t2 in 100e-6f64..1e-3,
    ) {
        let n = 1e6;
        let lam = SpinAlgebra::shared().basis.polarized_along(&axis, 1.0);
        let spec = EnsembleSpec { n_atoms_mean: n, n_atoms_var: 0.0, pump: PumpState::Vector(lam.as_slice().try_into().unwrap()) };
        let field = FieldModel::uniform(b * 13.37, gamma()).with_coherence_time(t2);
        let mut s = initial_full_state(&spec, None, &field.b_mean, &Matrix3::zeros()).unwrap();
        let prop = field.propagator().unwrap();
        let steps = ((prop.omega.abs() * t / (0.5 * MAX_OMEGA_TAU)).ceil() as usize).max(1);
        evolve_dark(&mut s, &prop, t, steps).unwrap();
        let f0 = axis * n;
        let want = collective_spin_dephased(&f0, &field.b_mean, gamma(), t2, t);
        let got = s.mean.fixed_rows::<3>(ATOM_OFFSET).into_owned();
        prop_assert!((got - want).amax() / n < 1e-8, "{} vs {}", got, want);
    }

    #[test]
    fn conditioning_is_monotone_and_exact(
        entries in prop::collection::vec(-1.0f64..1.0, 49),
        p in prop::collection::vec(-1.0f64..1.0, 7),
    ) {
        let cov = psd(7, &entries);
        let p = DVector::from_vec(p);
        prop_assume!(p.norm() > 0.1);
        let p = p.normalize();
        let prior_var = p.dot(&(&cov * &p));
        prop_assume!(prior_var > 1e-6 * cov.diagonal().amax());
        let post = condition_on(&cov, &p).unwrap();
        for k in 0..7 {
            prop_assert!(post[(k, k)] <= cov[(k, k)] + 1e-12 * cov[(k, k)].abs().max(1.0));
        }
        prop_assert!(min_eigenvalue(&post) >= -1e-8 * cov.norm());
        prop_assert!(p.dot(&(&post * &p)).abs() <= 1e-12 * prior_var.max(1.0));
        let rows = DMatrix::from_row_slice(1, 7, p.as_slice());
        prop_assert!((condition_pinv(&cov, &rows) - &post).amax() <= 1e-10 * cov.norm());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn oracle_propagation_stays_physical(rho in rho_strategy(), b in unit_vector(), t in 0.0f64..2e-3) {
        let out = exact_field_evolution(&rho, &(b * 13.0), gamma(), t);
        let m = out.matrix();
        prop_assert!((m.trace() - C64::new(1.0, 0.0)).norm() < 1e-10);
        prop_assert!((m - m.adjoint()).norm() < 1e-10);
        let eig = nalgebra::SymmetricEigen::new(*m).eigenvalues;
        prop_assert!(eig.min() >= -1e-10);
    }

    #[test]
    fn engine_follows_oracle_under_static_field(
        rho in rho_strategy(),
        b in unit_vector(),
        size in 1.0f64..20.0,
    ) {
        let field = FieldModel::uniform(b * size, gamma());
        let prop = field.propagator().unwrap();
        let lam = lambda_from_rho(&rho);
        let spec = EnsembleSpec { n_atoms_mean: 1.0, n_atoms_var: 0.0, pump: PumpState::Vector(lam.as_slice().try_into().unwrap()) };
        let mut s = initial_full_state(&spec, None, &field.b_mean, &Matrix3::zeros()).unwrap();
        let total = 1e-3;
        let steps = (prop.omega.abs() * total / (0.5 * MAX_OMEGA_TAU)).ceil() as usize;
        evolve_dark(&mut s, &prop, total, steps).unwrap();
        let want = lambda_from_rho(&exact_field_evolution(&rho, &field.b_mean, gamma(), total));
        prop_assert!((s.single_atom_mean() - want).amax() < 1e-8);
    }
}

/// `|a − b|` between a field step of `τ` and two of `τ/2`, over the
/// covariance.
fn split_difference(tau: f64) -> f64 {
    let rho = density(&[0.3, 0.1, -0.2, 0.5, 0.7, -0.1, 0.2, 0.0, 0.9, 0.3, -0.4, 0.2, 0.1, 0.1, 0.5, -0.6, 0.2, 0.8]);
    let s = atom_state(&rho, 1e6, 5e6, None);
    let field = FieldModel { gamma_b: Matrix3::identity() * 0.05, ..FieldModel::uniform(Vector3::new(11.98, -4.38, -4.01), gamma()) }
        .with_coherence_time(200e-6);
    let prop = field.propagator().unwrap();
    let mut one = s.clone();
    field_step(&mut one, &prop, tau).unwrap();
    let mut two = s;
    field_step(&mut two, &prop, tau / 2.0).unwrap();
    field_step(&mut two, &prop, tau / 2.0).unwrap();
    (one.cov - two.cov).amax().max((one.mean - two.mean).amax())
}

#[test]
fn field_step_splitting_converges_at_second_order() {
    let omega = gyromagnetic_ratio(DEFAULT_G_F).abs() * 13.37;
    let taus: Vec<f64> = (0..4).map(|k| 0.9 * MAX_OMEGA_TAU / omega / 2f64.powi(k)).collect();
    let d: Vec<f64> = taus.iter().map(|&t| split_difference(t)).collect();
    for w in d.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 2.0 - 0.05, "order {order}, differences {d:?}");
    }
}

/// First-order Heisenberg update of one atom and the light for a pulse of
/// unit duration, from commutators in the 3×3 representation.
fn first_order(rho: &Mat3c, s: &Vector3<f64>, g1: f64, g2: f64, n: f64) -> (Vec8, Vector3<f64>) {
    let basis = &SpinAlgebra::shared().basis;
    let h = basis.get(FZ) * C64::new(g1 * s.z, 0.0) + basis.get(JX) * C64::new(g2 * s.x, 0.0) + basis.get(JY) * C64::new(g2 * s.y, 0.0);
    let lam = Vec8::from_fn(|k, _| {
        let l = basis.get(k);
        // d⟨λ⟩/dt = ⟨i[H, λ]⟩
        -(rho * (h * l - l * h)).trace().im + (rho * l).trace().re
    });
    let expect = |k: usize| n * (rho * basis.get(k)).trace().re;
    let omega = Vector3::new(g2 * expect(JX), g2 * expect(JY), g1 * expect(FZ));
    (lam, s + omega.cross(s))
}

#[test]
fn small_coupling_matches_first_order_commutators() {
    let rho = density(&[0.9, 0.1, 0.2, -0.3, 0.1, 0.4, -0.2, 0.1, 0.3, 0.6, 0.2, -0.1, 0.5, 0.0, 0.1, 0.2, 0.7, -0.3]);
    let lam = lambda_from_rho(&rho);
    let n = 1e3;
    let photons = 1e6;
    let light = LightSpec::h(photons);
    let spec = EnsembleSpec { n_atoms_mean: n, n_atoms_var: 0.0, pump: PumpState::Vector(lam.as_slice().try_into().unwrap()) };
    let s0 = initial_full_state(&spec, Some(&light), &Vector3::zeros(), &Matrix3::zeros()).unwrap();
    let id = s0.pulses()[0].id;
    let scales = [1.0, 0.5, 0.25, 0.125];
    let errors: Vec<f64> = scales
        .iter()
        .map(|&k| {
            let (g1, g2) = (2e-5 * k, 1e-8 * k);
            let pulse = ProbePulse { start: 0.0, duration: 1e-6, light, couplings: Couplings { g1, g2, ..Default::default() } };
            let mut st = s0.clone();
            pulse_step(&mut st, &pulse, id, 200).unwrap();
            let (want_lam, want_s) = first_order(rho.matrix(), &light.mean(), g1, g2, n);
            let dl = (st.single_atom_mean() - want_lam).amax();
            let ds = (st.stokes_mean(id).unwrap() - want_s).amax() / photons;
            dl.max(ds)
        })
        .collect();
    let x: Vec<f64> = scales.iter().map(|s| s.ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let (mx, my) = (x.iter().sum::<f64>() / 4.0, y.iter().sum::<f64>() / 4.0);
    let slope = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>()
        / x.iter().map(|a| (a - mx).powi(2)).sum::<f64>();
    assert!((slope - 2.0).abs() <= 0.1, "slope {slope}, errors {errors:?}");
}

/// Covariance of the first `k` atoms of a permutation-symmetric ensemble
/// with single-atom block `c11` and pair block `c12`, summed explicitly.
fn explicit_sum(k: usize, c11: &DMatrix<f64>, c12: &DMatrix<f64>) -> DMatrix<f64> {
    let mut acc = DMatrix::zeros(8, 8);
    for i in 0..k {
        for j in 0..k {
            acc += if i == j { c11 } else { c12 };
        }
    }
    acc
}

#[test]
fn removal_identity() {
    let rho = density(&[0.5, 0.2, 0.1, -0.4, 0.3, 0.3, -0.1, 0.2, 0.8, 0.1, 0.0, -0.2, 0.4, 0.6, 0.2, 0.1, 0.3, -0.5]);
    let lam = lambda_from_rho(&rho);
    let c11 = DMatrix::from_iterator(8, 8, single_atom_covariance(&lam).unwrap().iter().copied());
    let pair = DMatrix::from_fn(8, 8, |i, j| 1e-3 * ((i * 3 + j * 5) % 7) as f64);
    let c12 = (&pair + pair.transpose()) * 0.5;

    for (n, x) in [(3usize, 1.0 / 3.0), (10, 0.5), (6, 1.0 / 3.0), (6, 0.5), (10, 0.3)] {
        let kept = (x * n as f64).round() as usize;
        let nf = n as f64;
        let full = explicit_sum(n, &c11, &c12);
        let remaining = explicit_sum(kept, &c11, &c12);
        let exact = &full * (x * (x * nf - 1.0) / (nf - 1.0)) + &c11 * (x * (1.0 - x) * nf * nf / (nf - 1.0));
        assert!((&remaining - &exact).amax() < 1e-10, "N = {n}, X = {x}");
    }

    // engine against the truncated form, and the truncation error at large N
    for x in [1.0 / 3.0, 0.5] {
        let n = 1e6;
        let mut s = atom_state(&rho, n, 0.0, None);
        let mut block = s.cov.view_mut((ATOM_OFFSET, ATOM_OFFSET), (8, 8));
        block += &c12 * (n * (n - 1.0));
        let before = s.cov.view((ATOM_OFFSET, ATOM_OFFSET), (8, 8)).into_owned();
        atomic_decoherence(&mut s, x, 0.0).unwrap();
        let after = s.cov.view((ATOM_OFFSET, ATOM_OFFSET), (8, 8)).into_owned();
        let truncated = &before * (x * x) + &c11 * (x * (1.0 - x) * n);
        let scale = before.amax();
        assert!((&after - &truncated).amax() < 1e-10 * scale, "X = {x}");
        let exact = &before * (x * (x * n - 1.0) / (n - 1.0)) + &c11 * (x * (1.0 - x) * n * n / (n - 1.0));
        assert!((&exact - &truncated).amax() < 2.0 / n * scale);
    }
}
