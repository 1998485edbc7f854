//! Experiment configuration, the combined stepping loop, and output.

mod config;
mod fid;
mod output;
mod run;
mod sweep;
pub mod validation;

pub use config::{ExperimentConfig, Schedule, ScheduledPulse, SubstepPolicy, Toggles};
pub use fid::{analytic_fid, tau_gauss, InputAxis};
pub use output::{write_gamma_diagonal, write_results};
pub use run::{max_relative_change, run_experiment, run_fixed, PulseRecord, RunMetadata, RunResult};
pub use sweep::{run_sweep, SweepSpec};
