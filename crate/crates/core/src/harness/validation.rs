//! Engine-versus-oracle traces for a configuration.

use nalgebra::Matrix3;

use crate::algebra::Vec8;
use crate::error::Result;
use crate::lightmatter::{pulse_step, ProbePulse};
use crate::magnetics::{field_step, FieldModel, MAX_OMEGA_TAU};
use crate::oracle::{exact_field_evolution, heisenberg_pulse_oracle, lambda_from_rho, rho_from_lambda, PulseCouplings};
use crate::state::{initial_full_state, EnsembleSpec};

use super::config::ExperimentConfig;

#[derive(Clone, Debug)]
pub struct TracePoint {
    pub t: f64,
    pub engine: Vec8,
    pub oracle: Vec8,
}

#[derive(Clone, Debug)]
pub struct OracleCheck {
    pub field_trace: Vec<TracePoint>,
    pub max_field_error: f64,
    /// Largest single-atom or Stokes (per photon) deviation after one pulse.
    pub pulse_error: f64,
    pub pulse_substeps: usize,
}

/// Single-atom mean under the configured uniform field, sampled `samples`
/// times over the run, and one probe pulse against the Heisenberg oracle.
pub fn oracle_check(cfg: &ExperimentConfig, samples: usize, fine_steps: usize) -> Result<OracleCheck> {
    cfg.validate()?;
    let gamma = cfg.gamma();
    let mut uniform = cfg.field();
    uniform = FieldModel::uniform(uniform.b_mean, gamma);
    let prop = uniform.propagator()?;

    let single = EnsembleSpec {
        n_atoms_mean: 1.0,
        n_atoms_var: 0.0,
        pump: cfg.pump.clone(),
    };
    let mut state = initial_full_state(&single, None, &uniform.b_mean, &Matrix3::zeros())?;
    let lam0 = state.single_atom_mean();
    let rho0 = rho_from_lambda(&lam0)?;

    let total = cfg.duration();
    let samples = samples.max(1);
    let interval = total / samples as f64;
    let max_step = 0.5 * MAX_OMEGA_TAU / prop.omega.abs().max(f64::MIN_POSITIVE);
    let n = ((interval / max_step).ceil() as usize).max(1);
    let tau = interval / n as f64;

    let mut trace = Vec::with_capacity(samples);
    let mut worst: f64 = 0.0;
    for k in 1..=samples {
        for _ in 0..n {
            field_step(&mut state, &prop, tau)?;
        }
        let t = k as f64 * interval;
        let oracle = lambda_from_rho(&exact_field_evolution(&rho0, &uniform.b_mean, gamma, t));
        let engine = state.single_atom_mean();
        worst = worst.max((engine - oracle).amax());
        trace.push(TracePoint { t, engine, oracle });
    }

    let pulses = cfg.pulses()?;
    let mut pulse_error = 0.0;
    if let Some(first) = pulses.first() {
        let ens = cfg.ensemble();
        let mut s = initial_full_state(&ens, Some(&first.light), &uniform.b_mean, &Matrix3::zeros())?;
        let id = s.pulses()[0].id;
        let lam = s.single_atom_mean();
        let probe = ProbePulse {
            start: first.start,
            duration: first.duration,
            light: first.light,
            couplings: crate::lightmatter::Couplings {
                eta_gamma: 0.0,
                photon_loss: false,
                ..cfg.couplings()
            },
        };
        pulse_step(&mut s, &probe, id, cfg.substeps.pulse)?;
        let c = PulseCouplings {
            g1: probe.couplings.g1,
            g2: probe.couplings.g2,
            n_atoms: ens.n_atoms_mean,
        };
        let (lam_o, s_o) = heisenberg_pulse_oracle(&lam, &first.light.mean(), &c, fine_steps)?;
        let dl = (s.single_atom_mean() - lam_o).amax();
        let scale = first.light.photons.max(1.0);
        let ds = (s.stokes_mean(id)? - s_o).amax() / scale;
        pulse_error = dl.max(ds);
    }

    Ok(OracleCheck {
        field_trace: trace,
        max_field_error: worst,
        pulse_error,
        pulse_substeps: cfg.substeps.pulse,
    })
}
