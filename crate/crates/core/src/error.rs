use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised anywhere in the pipeline. Every variant carries the name of
/// the module that produced it so messages read `gpe: ...`, `modes: ...`.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{module}: invalid configuration: {msg}")]
    Config { module: &'static str, msg: String },

    #[error("{module}: validation failed: {msg}")]
    Validation { module: &'static str, msg: String },

    #[error("{module}: argument outside domain: {msg}")]
    Domain { module: &'static str, msg: String },

    #[error("{module}: no convergence after {iterations} iterations (residual {residual:.3e})")]
    Convergence {
        module: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("{module}: dynamical instability at t = {t:.6} s: {msg}")]
    Unstable {
        module: &'static str,
        t: f64,
        msg: String,
    },

    #[error("ode: step size underflow at t = {t:.6} s (h = {h:.3e})")]
    Stiffness { t: f64, h: f64 },

    #[error("fock: occupation {occupation:.2} reached 80% of the cutoff {cutoff}")]
    Truncation { occupation: f64, cutoff: usize },

    #[error("{module}: unphysical moments: {msg}")]
    Physicality { module: &'static str, msg: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(module: &'static str, msg: impl Into<String>) -> Self {
        Error::Config {
            module,
            msg: msg.into(),
        }
    }

    pub fn validation(module: &'static str, msg: impl Into<String>) -> Self {
        Error::Validation {
            module,
            msg: msg.into(),
        }
    }

    pub fn domain(module: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain {
            module,
            msg: msg.into(),
        }
    }

    /// True for bad input (configuration, validation, domain); false for
    /// failures of the numerics themselves.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::Validation { .. } | Error::Domain { .. }
        )
    }
}
