use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("LFT is not well-posed: I - D_qp·Δ is singular (Δ = {delta:?})")]
    WellPosedness { delta: Vec<f64> },

    #[error("unbounded norm: system matrix is not Hurwitz (spectral abscissa {abscissa:.3e})")]
    UnboundedNorm { abscissa: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("SDP backend failure: {0}")]
    Solver(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("integration failure: {0}")]
    Integration(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("eigenvalue computation did not converge")]
    EigenFailure,
}

impl Error {
    pub(crate) fn dims(
        context: &'static str,
        expected: impl Into<String>,
        found: impl Into<String>,
    ) -> Self {
        Error::DimensionMismatch {
            context,
            expected: expected.into(),
            found: found.into(),
        }
    }
}
