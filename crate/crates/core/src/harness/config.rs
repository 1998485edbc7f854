//! Experiment configuration. Field names carry their units.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lightmatter::Couplings;
use crate::magnetics::{FieldModel, MU_B_OVER_HBAR};
use crate::state::{Axis, EnsembleSpec, LightSpec, PumpState, SignedAxis};

const US: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_atoms: f64,
    /// Shot-to-shot atom-number variance `δN²`.
    pub n_atoms_var: f64,
    pub pump: PumpState,

    pub photons_per_pulse: f64,
    pub pulse_duration_us: f64,
    pub schedule: Schedule,
    pub duration_us: f64,

    #[serde(rename = "b_mean_mG")]
    pub b_mean_mg: [f64; 3],
    #[serde(rename = "gamma_b_mG2")]
    pub gamma_b_mg2: [[f64; 3]; 3],
    /// When set, the parallel gradient is derived from it and the cloud width.
    pub coherence_time_us: Option<f64>,
    #[serde(rename = "grad_parallel_mG_per_mm")]
    pub grad_parallel_mg_per_mm: f64,
    #[serde(rename = "grad_perp_mG_per_mm")]
    pub grad_perp_mg_per_mm: f64,
    pub cloud_width_mm: f64,
    pub g_f: f64,
    #[serde(rename = "mu_b_over_hbar_rad_per_s_per_mG")]
    pub mu_b_over_hbar_rad_per_s_per_mg: f64,

    pub g1_rad_per_atom: f64,
    pub g2_rad_per_atom: f64,
    pub eta_gamma: f64,
    pub readd_fraction: f64,
    pub photon_loss: bool,

    pub substeps: SubstepPolicy,
    pub toggles: Toggles,
}

/// Probe timing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    /// One polarization every `period_us`.
    Single {
        period_us: f64,
        #[serde(default = "h_polarization")]
        polarization: SignedAxis,
    },
    /// An h pulse then a v pulse `pair_gap_us` later (start to start),
    /// repeated every `period_us`.
    Alternating { pair_gap_us: f64, period_us: f64 },
}

fn h_polarization() -> SignedAxis {
    SignedAxis {
        axis: Axis::X,
        negative: false,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubstepPolicy {
    /// Substeps per probe pulse.
    pub pulse: usize,
    /// Minimum substeps per dark interval.
    pub dark: usize,
    /// Upper bound on a dark substep, so long gaps get more steps.
    pub max_dark_step_us: f64,
    /// Double both counts until reported values settle.
    pub refine: bool,
    pub tolerance: f64,
    pub max_doublings: u32,
}

impl Default for SubstepPolicy {
    fn default() -> Self {
        Self {
            pulse: 50,
            dark: 100,
            max_dark_step_us: 0.09,
            refine: false,
            tolerance: 1e-4,
            max_doublings: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Toggles {
    pub g2: bool,
    pub gamma_b: bool,
    pub atom_number_noise: bool,
    pub condition: bool,
    /// Emit the full covariance diagonal after each readout.
    pub gamma_diagonal: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Self {
            g2: true,
            gamma_b: true,
            atom_number_noise: true,
            condition: false,
            gamma_diagonal: false,
        }
    }
}

impl Default for ExperimentConfig {
    /// The Δ = −700 MHz, F_y-input dataset with h-polarized probing.
    fn default() -> Self {
        let n_atoms = 6.17e6;
        Self {
            n_atoms,
            n_atoms_var: 11.15 * n_atoms,
            pump: PumpState::Axis(SignedAxis {
                axis: Axis::Y,
                negative: false,
            }),
            photons_per_pulse: 7.2e6,
            pulse_duration_us: 1.0,
            schedule: Schedule::Single {
                period_us: 10.0,
                polarization: h_polarization(),
            },
            duration_us: 1000.0,
            b_mean_mg: [11.98, -4.38, -4.01],
            gamma_b_mg2: [
                [0.202, 0.0373, -0.048],
                [0.0373, 0.201, 0.016],
                [-0.048, 0.016, 0.019],
            ],
            coherence_time_us: Some(360.0),
            grad_parallel_mg_per_mm: 0.0,
            grad_perp_mg_per_mm: 0.0,
            cloud_width_mm: 48.0,
            g_f: -0.5,
            mu_b_over_hbar_rad_per_s_per_mg: MU_B_OVER_HBAR,
            g1_rad_per_atom: 1.7e-7,
            g2_rad_per_atom: -7.5e-9,
            eta_gamma: 1.1e-9,
            readd_fraction: 1.0,
            photon_loss: false,
            substeps: SubstepPolicy::default(),
            toggles: Toggles::default(),
        }
    }
}

/// One probe pulse on the timeline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduledPulse {
    pub start: f64,
    pub duration: f64,
    pub light: LightSpec,
}

impl ScheduledPulse {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    /// Time stamp of the readout: the pulse centre.
    pub fn center(&self) -> f64 {
        self.start + 0.5 * self.duration
    }
}

impl ExperimentConfig {
    /// The preset with the pair strategy at equal photon flux.
    pub fn alternating() -> Self {
        Self {
            schedule: Schedule::Alternating {
                pair_gap_us: 3.0,
                period_us: 20.0,
            },
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::InvalidParameter(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn gamma(&self) -> f64 {
        self.g_f * self.mu_b_over_hbar_rad_per_s_per_mg
    }

    pub fn ensemble(&self) -> EnsembleSpec {
        EnsembleSpec {
            n_atoms_mean: self.n_atoms,
            n_atoms_var: if self.toggles.atom_number_noise { self.n_atoms_var } else { 0.0 },
            pump: self.pump.clone(),
        }
    }

    pub fn gamma_b(&self) -> Matrix3<f64> {
        if self.toggles.gamma_b {
            Matrix3::from_fn(|i, j| self.gamma_b_mg2[i][j])
        } else {
            Matrix3::zeros()
        }
    }

    pub fn field(&self) -> FieldModel {
        let mut f = FieldModel {
            b_mean: Vector3::from(self.b_mean_mg),
            grad_parallel: self.grad_parallel_mg_per_mm,
            grad_perp: self.grad_perp_mg_per_mm,
            cloud_width: self.cloud_width_mm,
            gamma: self.gamma(),
            gamma_b: self.gamma_b(),
        };
        if let Some(t) = self.coherence_time_us {
            f = f.with_coherence_time(t * US);
        }
        f
    }

    pub fn couplings(&self) -> Couplings {
        Couplings {
            g1: self.g1_rad_per_atom,
            g2: if self.toggles.g2 { self.g2_rad_per_atom } else { 0.0 },
            eta_gamma: self.eta_gamma,
            readd_fraction: self.readd_fraction,
            photon_loss: self.photon_loss,
        }
    }

    pub fn duration(&self) -> f64 {
        self.duration_us * US
    }

    /// All pulses that end within the run, in time order.
    pub fn pulses(&self) -> Result<Vec<ScheduledPulse>> {
        let tau = self.pulse_duration_us * US;
        let total = self.duration();
        let light = |axis: SignedAxis| LightSpec {
            photons: self.photons_per_pulse,
            polarization: axis,
        };
        let (period, offsets): (f64, Vec<(f64, SignedAxis)>) = match &self.schedule {
            Schedule::Single { period_us, polarization } => (*period_us * US, vec![(0.0, *polarization)]),
            Schedule::Alternating { pair_gap_us, period_us } => (
                *period_us * US,
                vec![
                    (0.0, h_polarization()),
                    (
                        *pair_gap_us * US,
                        SignedAxis {
                            axis: Axis::X,
                            negative: true,
                        },
                    ),
                ],
            ),
        };
        if !(period > 0.0) {
            return Err(Error::InvalidParameter("pulse period must be positive".into()));
        }
        let mut out = Vec::new();
        let mut k = 0usize;
        // Times are built from integer multiples so they do not drift.
        loop {
            let base = k as f64 * period;
            if base + tau > total * (1.0 + 1e-12) {
                break;
            }
            for &(off, pol) in &offsets {
                let p = ScheduledPulse {
                    start: base + off,
                    duration: tau,
                    light: light(pol),
                };
                if p.end() <= total * (1.0 + 1e-12) {
                    out.push(p);
                }
            }
            k += 1;
        }
        for w in out.windows(2) {
            if w[1].start < w[0].end() - 1e-15 {
                return Err(Error::InvalidParameter(format!(
                    "pulses at {:.3e} s and {:.3e} s overlap",
                    w[0].start, w[1].start
                )));
            }
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_atoms", self.n_atoms),
            ("pulse_duration_us", self.pulse_duration_us),
            ("duration_us", self.duration_us),
            ("max_dark_step_us", self.substeps.max_dark_step_us),
            ("tolerance", self.substeps.tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.photons_per_pulse >= 0.0) {
            return Err(Error::InvalidParameter("photons_per_pulse must be non-negative".into()));
        }
        if let Some(t) = self.coherence_time_us {
            if !(t > 0.0) {
                return Err(Error::InvalidParameter(format!("coherence_time_us = {t} must be positive")));
            }
        }
        if self.substeps.pulse == 0 || self.substeps.dark == 0 {
            return Err(Error::InvalidParameter("substep counts must be at least 1".into()));
        }
        if let Schedule::Single { polarization, .. } = &self.schedule {
            if polarization.axis != Axis::X {
                return Err(Error::InvalidParameter(
                    "probe light must be linearly polarized along ±S_x".into(),
                ));
            }
        }
        self.ensemble().validate()?;
        self.field().validate()?;
        self.pulses()?;
        Ok(())
    }
}
