//! Gaussian (covariance-matrix) simulation of optically probed spin-1
//! atomic ensembles in static magnetic fields.
//!
//! The engine tracks the mean and covariance of the phase-space vector
//! `B ⊕ F ⊕ J ⊕ S⁽¹⁾ ⊕ …` through Faraday/tensor light-shift pulses,
//! scattering decoherence, Larmor precession with gradient dephasing, and
//! polarimetric readout. [`oracle`] holds exact single-atom references.

pub mod algebra;
pub mod error;
pub mod harness;
pub mod lightmatter;
pub mod magnetics;
pub mod measurement;
pub mod oracle;
pub mod state;

pub use error::{Error, Result};
