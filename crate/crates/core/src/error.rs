use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("Bloch vector ({x}, {y}, {z}) lies outside the unit ball (|r|^2 = {norm_sq})")]
    OutsideBall { x: f64, y: f64, z: f64, norm_sq: f64 },

    #[error("density matrix is not physical: {0}")]
    NonPhysical(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("generator is singular at the pole ({0})")]
    SingularGenerator(&'static str),

    #[error("integration produced a non-finite state at step {step} (t = {time})")]
    Blowup { step: usize, time: f64 },

    #[error("exponent fit needs at least 3 usable samples in the window, found {0}")]
    TooFewSamples(usize),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
