use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{quantity} is undefined at {value}: {reason}")]
    Domain {
        quantity: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("roots coincide (mu = {re} + {im}i); use the confluent branch")]
    DegenerateRoots { re: f64, im: f64 },

    #[error("root with non-negative real part (mu = {re} + {im}i)")]
    UnstableRoot { re: f64, im: f64 },

    #[error("Green function vanishes at t = {t}")]
    GreenZeroCrossing { t: f64 },

    #[error("quadrature missed its tolerance ({what}: error {error:e} > target {target:e})")]
    QuadratureFailure {
        what: &'static str,
        error: f64,
        target: f64,
    },

    #[error("decay rate too small to form N(t) at t = {t} (gamma = {gamma:e})")]
    SingularGamma { t: f64, gamma: f64 },

    #[error("integrator step size collapsed at t = {t} (h = {h:e})")]
    StepCollapse { t: f64, h: f64 },

    #[error("no steady state reached before t_max = {t_max}")]
    NoConvergence { t_max: f64 },

    #[error("{stage}: {source}")]
    Phase {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn in_phase(self, stage: &'static str) -> Self {
        Error::Phase {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
