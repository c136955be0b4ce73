use thiserror::Error;

/// Failures raised by the solvers.
///
/// Verdicts (an inadmissible velocity, a nonrestraining shock) are not errors;
/// they are ordinary return values.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A configuration parameter is outside its documented range.
    #[error("invalid parameter `{key}`: {reason}")]
    Config { key: String, reason: String },

    /// An iterative method failed to converge; indicates a defect for the shipped models.
    #[error("numerical failure in {stage}: {detail}")]
    NumericalFailure { stage: &'static str, detail: String },

    /// The variational minimum sits on the boundary of the search box even after widening.
    #[error("search box truncation at t = {t}, x = {x:?}: minimizer on boundary of radius {radius}")]
    SearchBoxTruncated { t: f64, x: Vec<f64>, radius: f64 },

    /// The admissible-velocity solver could not certify optimality.
    #[error("admissible velocity not certified: best iterate {best:?}, hull distance {hull_distance:e}")]
    NotCertified { best: Vec<f64>, hull_distance: f64 },

    /// A non-finite value appeared while time stepping.
    #[error("non-finite value at step {step} (t = {t})")]
    NonFinite { step: usize, t: f64 },

    /// A particle velocity exceeded the a-priori speed bound.
    #[error("step rejected at t = {t}: |v| = {speed} exceeds bound {bound}")]
    StepRejected { t: f64, speed: f64, bound: f64 },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { key: key.into(), reason: reason.into() }
    }

    pub(crate) fn numerical(stage: &'static str, detail: impl Into<String>) -> Self {
        Error::NumericalFailure { stage, detail: detail.into() }
    }

    /// True for errors caused by user input rather than solver behaviour.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
