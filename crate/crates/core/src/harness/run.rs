//! The stepping loop: dark precession, probe pulses, readout.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lightmatter::{finish_pulse, light_substep, ProbePulse};
use crate::magnetics::{field_step, FieldPropagator};
use crate::measurement::{read_out, MeasurementSpec};
use crate::state::{initial_full_state, GaussianState};

use super::config::{ExperimentConfig, ScheduledPulse};
use super::fid::tau_gauss;

/// One readout, time-stamped at the pulse centre.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PulseRecord {
    pub t: f64,
    pub v_polarized: bool,
    pub phi_mean: f64,
    pub phi_var: f64,
    pub angle_mean: f64,
    pub angle_var: f64,
    pub conditioned: bool,
    pub conditioning_skipped: bool,
    pub beyond_tau_gauss: bool,
    /// Covariance diagonal right after the readout, when requested.
    #[serde(skip)]
    pub gamma_diagonal: Option<Vec<f64>>,
}

impl PulseRecord {
    pub fn flags(&self) -> String {
        let mut f = Vec::new();
        if self.v_polarized {
            f.push("v");
        }
        if self.beyond_tau_gauss {
            f.push("beyond_tau_gauss");
        }
        if self.conditioned {
            f.push("conditioned");
        }
        if self.conditioning_skipped {
            f.push("conditioning_skipped");
        }
        f.join("|")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunMetadata {
    pub config_hash: String,
    pub pulse_substeps: usize,
    pub dark_substeps: usize,
    pub tau_gauss: f64,
    pub larmor_hz: f64,
    pub coherence_time: f64,
    /// Smallest relative Robertson-Schrödinger margin over all
    /// coordinate-axis pairs, checked after every substep.
    pub min_uncertainty_margin: f64,
    /// Largest relative change from the last refinement doubling, if any.
    pub refinement_change: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub records: Vec<PulseRecord>,
    pub final_state: GaussianState,
    pub metadata: RunMetadata,
}

impl RunResult {
    /// Records of h-polarized pulses only.
    pub fn h_records(&self) -> impl Iterator<Item = &PulseRecord> {
        self.records.iter().filter(|r| !r.v_polarized)
    }
}

/// Runs the configured experiment, refining substeps if the policy asks.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunResult> {
    cfg.validate()?;
    let policy = &cfg.substeps;
    let (mut kp, mut kd) = (policy.pulse, policy.dark);
    let mut result = run_fixed(cfg, kp, kd)?;
    if !policy.refine {
        return Ok(result);
    }
    let mut change = f64::INFINITY;
    for _ in 0..policy.max_doublings {
        kp *= 2;
        kd *= 2;
        let finer = run_fixed(cfg, kp, kd)?;
        change = max_relative_change(&result.records, &finer.records);
        result = finer;
        result.metadata.refinement_change = Some(change);
        if change < policy.tolerance {
            return Ok(result);
        }
    }
    Err(Error::Divergence {
        doublings: policy.max_doublings,
        substeps: kp,
        change,
        tolerance: policy.tolerance,
    })
}

/// Largest change of `⟨φ⟩` and `var φ` between two runs, each relative to
/// the largest magnitude of that series.
pub fn max_relative_change(a: &[PulseRecord], b: &[PulseRecord]) -> f64 {
    let series = |rs: &[PulseRecord], f: fn(&PulseRecord) -> f64| rs.iter().map(f).collect::<Vec<_>>();
    let mut worst: f64 = 0.0;
    for f in [|r: &PulseRecord| r.phi_mean, |r: &PulseRecord| r.phi_var] {
        let (x, y) = (series(a, f), series(b, f));
        let scale = x.iter().chain(&y).fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            continue;
        }
        for (u, v) in x.iter().zip(&y) {
            worst = worst.max((u - v).abs() / scale);
        }
    }
    worst
}

struct Tracker {
    min_margin: f64,
}

impl Tracker {
    fn check(&mut self, state: &GaussianState) {
        self.min_margin = self.min_margin.min(state.worst_axis_pair().relative);
    }
}

/// Runs with fixed substep counts.
pub fn run_fixed(cfg: &ExperimentConfig, pulse_substeps: usize, dark_substeps: usize) -> Result<RunResult> {
    let field = cfg.field();
    let prop = field.propagator()?;
    let couplings = cfg.couplings();
    let horizon = tau_gauss(&field.gamma_b, &field.b_mean, field.gamma);
    let mut state = initial_full_state(&cfg.ensemble(), None, &field.b_mean, &field.gamma_b)?;
    let max_dark_step = cfg.substeps.max_dark_step_us * 1e-6 * dark_substeps_scale(cfg, dark_substeps);

    let mut tracker = Tracker { min_margin: 0.0 };
    tracker.check(&state);
    let mut records = Vec::new();
    let mut t = 0.0;
    for (index, pulse) in cfg.pulses()?.iter().enumerate() {
        let gap = pulse.start - t;
        if gap > 0.0 {
            let n = dark_substeps.max((gap / max_dark_step).ceil() as usize);
            dark_interval(&mut state, &prop, gap, n, &mut tracker).map_err(|e| e.at_step(index, t))?;
        }
        let probe = ProbePulse {
            start: pulse.start,
            duration: pulse.duration,
            light: pulse.light,
            couplings,
        };
        let mut rec = probe_and_read(&mut state, &prop, &probe, pulse, pulse_substeps, cfg.toggles.condition, &mut tracker)
            .map_err(|e| e.at_step(index, pulse.start))?;
        if cfg.toggles.gamma_diagonal {
            rec.gamma_diagonal = Some(state.cov.diagonal().iter().copied().collect());
        }
        rec.beyond_tau_gauss = rec.t > horizon;
        records.push(rec);
        t = pulse.end();
    }

    Ok(RunResult {
        records,
        final_state: state,
        metadata: RunMetadata {
            config_hash: cfg.hash(),
            pulse_substeps,
            dark_substeps,
            tau_gauss: horizon,
            larmor_hz: prop.omega.abs() / (2.0 * std::f64::consts::PI),
            coherence_time: field.coherence_time(),
            min_uncertainty_margin: tracker.min_margin,
            refinement_change: None,
        },
    })
}

/// Dark-step refinement shrinks the maximum step along with the count.
fn dark_substeps_scale(cfg: &ExperimentConfig, dark_substeps: usize) -> f64 {
    cfg.substeps.dark as f64 / dark_substeps as f64
}

fn dark_interval(
    state: &mut GaussianState,
    prop: &FieldPropagator,
    gap: f64,
    n: usize,
    tracker: &mut Tracker,
) -> Result<()> {
    let tau = gap / n as f64;
    for _ in 0..n {
        field_step(state, prop, tau)?;
        tracker.check(state);
    }
    Ok(())
}

/// A pulse with precession running underneath: each substep is a half
/// field step, the light substep, and another half field step.
fn probe_and_read(
    state: &mut GaussianState,
    prop: &FieldPropagator,
    probe: &ProbePulse,
    pulse: &ScheduledPulse,
    substeps: usize,
    condition: bool,
    tracker: &mut Tracker,
) -> Result<PulseRecord> {
    probe.validate()?;
    let id = state.append_pulse(&probe.light);
    let h = 1.0 / substeps as f64;
    let half = 0.5 * probe.duration * h;
    for _ in 0..substeps {
        field_step(state, prop, half)?;
        light_substep(state, probe, id, h)?;
        field_step(state, prop, half)?;
        tracker.check(state);
    }
    finish_pulse(state, probe, id)?;
    let spec = MeasurementSpec::s_y(state, id, condition)?;
    let m = read_out(state, &spec, pulse.center())?;
    tracker.check(state);
    Ok(PulseRecord {
        t: m.time,
        v_polarized: probe.light.polarization.negative,
        phi_mean: m.phi,
        phi_var: m.phi_var,
        angle_mean: m.angle,
        angle_var: m.angle_var,
        conditioned: m.conditioned,
        conditioning_skipped: m.conditioning_skipped,
        beyond_tau_gauss: false,
        gamma_diagonal: None,
    })
}
