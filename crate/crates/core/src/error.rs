use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("commutator [{a}, {b}] is not in the span of the basis (residual {residual:.3e})")]
    NotInSpan { a: usize, b: usize, residual: f64 },

    #[error("structure constant mismatch at ({a}, {b}, {c}): stored {stored}, computed {computed}")]
    StructureMismatch {
        a: usize,
        b: usize,
        c: usize,
        stored: f64,
        computed: f64,
    },

    #[error("single-atom vector is not physical: density matrix eigenvalue {min_eigenvalue:.3e}")]
    Unphysical { min_eigenvalue: f64 },

    #[error("{what} is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { what: &'static str, min_eigenvalue: f64 },

    #[error("{what} is not symmetric (max asymmetry {asymmetry:.3e})")]
    NotSymmetric { what: &'static str, asymmetry: f64 },

    #[error("expected a unit vector, got norm {norm}")]
    NotUnitVector { norm: f64 },

    #[error("pulse index {index} out of range ({live} live pulses)")]
    PulseIndex { index: usize, live: usize },

    #[error("no live pulse with id {0}")]
    UnknownPulse(u64),

    #[error("survival fraction {0} outside (0, 1]")]
    SurvivalFraction(f64),

    #[error("field step too large: omega0 * tau = {omega_tau:.3e} exceeds {limit}")]
    StepTooLarge { omega_tau: f64, limit: f64 },

    #[error(
        "substepping did not converge after {doublings} doublings \
         ({substeps} substeps, last relative change {change:.3e}, tolerance {tolerance:.1e})"
    )]
    Divergence {
        doublings: u32,
        substeps: usize,
        change: f64,
        tolerance: f64,
    },

    #[error("magnetic field magnitude is zero")]
    ZeroField,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("step {step} (t = {time:.3e} s): {source}")]
    Step {
        step: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_step(self, step: usize, time: f64) -> Self {
        Error::Step {
            step,
            time,
            source: Box::new(self),
        }
    }
}
