//! Signal-fitting helpers shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

use spin1_cov::harness::{run_experiment, ExperimentConfig, PulseRecord, RunResult};

pub fn run(cfg: &ExperimentConfig) -> RunResult {
    run_experiment(cfg).expect("run failed")
}

/// `(t, ⟨φ⟩)` of the h-polarized readouts.
pub fn h_series(r: &RunResult) -> (Vec<f64>, Vec<f64>) {
    r.h_records().map(|p| (p.t, p.phi_mean)).unzip()
}

/// `(t, θ)` of the h-polarized readouts, where `θ` is the polarization
/// rotation angle (linear in `F_z`, unlike `φ = sin θ`).
pub fn angle_series(r: &RunResult) -> (Vec<f64>, Vec<f64>) {
    r.h_records().map(|p| (p.t, p.angle_mean)).unzip()
}

pub fn var_series(r: &RunResult) -> (Vec<f64>, Vec<f64>) {
    r.h_records().map(|p| (p.t, p.phi_var)).unzip()
}

/// Linear least squares with columns `cols(t)`; returns coefficients and
/// the residual sum of squares.
pub fn lstsq(t: &[f64], y: &[f64], cols: impl Fn(f64) -> Vec<f64>) -> (Vec<f64>, f64) {
    let rows: Vec<Vec<f64>> = t.iter().map(|&x| cols(x)).collect();
    let k = rows[0].len();
    let a = DMatrix::from_fn(t.len(), k, |i, j| rows[i][j]);
    let b = DVector::from_column_slice(y);
    let svd = a.clone().svd(true, true);
    let c = svd.solve(&b, 1e-14).expect("least squares");
    let rss = (a * &c - b).norm_squared();
    (c.iter().copied().collect(), rss)
}

/// Best `ω` for `c + e^{−t/T}(a cos ωt + b sin ωt)`, scanning `ω` on a grid
/// and then refining by golden section. `decay` may be infinite.
pub fn fit_frequency(t: &[f64], y: &[f64], lo: f64, hi: f64, decay: f64) -> f64 {
    let rss = |w: f64| {
        lstsq(t, y, |x| {
            let e = (-x / decay).exp();
            vec![1.0, e * (w * x).cos(), e * (w * x).sin()]
        })
        .1
    };
    let n = 400;
    let grid: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let best = grid
        .iter()
        .copied()
        .min_by(|a, b| rss(*a).total_cmp(&rss(*b)))
        .unwrap();
    let step = (hi - lo) / n as f64;
    golden(rss, best - step, best + step)
}

/// Best `T` for `c + e^{−t/T}(a cos ωt + b sin ωt)` at fixed `ω`.
pub fn fit_decay(t: &[f64], y: &[f64], omega: f64, lo: f64, hi: f64) -> f64 {
    let rss = |tc: f64| {
        lstsq(t, y, |x| {
            let e = (-x / tc).exp();
            vec![1.0, e * (omega * x).cos(), e * (omega * x).sin()]
        })
        .1
    };
    let n = 400;
    let grid: Vec<f64> = (0..=n).map(|i| lo * (hi / lo).powf(i as f64 / n as f64)).collect();
    let i = (0..grid.len()).min_by(|&a, &b| rss(grid[a]).total_cmp(&rss(grid[b]))).unwrap();
    golden(rss, grid[i.saturating_sub(1)], grid[(i + 1).min(n)])
}

fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

/// Complex oscillation amplitude `a − ib` of `c + a cos ωt + b sin ωt` fitted
/// in windows of `width` centred on each sample that has a full window.
pub fn windowed_amplitude(t: &[f64], y: &[f64], omega: f64, width: f64) -> Vec<(f64, f64, f64)> {
    let (first, last) = (t[0], t[t.len() - 1]);
    let mut out = Vec::new();
    for &c in t {
        if c - width / 2.0 < first || c + width / 2.0 > last {
            continue;
        }
        let idx: Vec<usize> = (0..t.len()).filter(|&i| (t[i] - c).abs() <= width / 2.0).collect();
        let tw: Vec<f64> = idx.iter().map(|&i| t[i]).collect();
        let yw: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
        let (coef, _) = lstsq(&tw, &yw, |x| vec![1.0, (omega * x).cos(), (omega * x).sin()]);
        out.push((c, coef[1], -coef[2]));
    }
    out
}

/// Amplitude of a run relative to a reference run, as `(t, |r|, arg r)`.
pub fn amplitude_ratio(
    run: &RunResult,
    reference: &RunResult,
    series: fn(&RunResult) -> (Vec<f64>, Vec<f64>),
    omega: f64,
    width: f64,
) -> Vec<(f64, f64, f64)> {
    let (t, y) = series(run);
    let (tr, yr) = series(reference);
    let a = windowed_amplitude(&t, &y, omega, width);
    let b = windowed_amplitude(&tr, &yr, omega, width);
    a.iter()
        .zip(&b)
        .map(|(&(tc, ar, ai), &(_, br, bi))| {
            let den = br * br + bi * bi;
            let re = (ar * br + ai * bi) / den;
            let im = (ai * br - ar * bi) / den;
            (tc, re.hypot(im), im.atan2(re))
        })
        .collect()
}

/// Mean of `f` over records whose time is within `half` of `centre`.
pub fn window_mean(records: &[PulseRecord], centre: f64, half: f64, f: fn(&PulseRecord) -> f64) -> f64 {
    let v: Vec<f64> = records.iter().filter(|r| (r.t - centre).abs() <= half).map(f).collect();
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn wrap(phase: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    (phase + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI
}
