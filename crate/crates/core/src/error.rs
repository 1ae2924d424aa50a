use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{name} has {got} entries but there are {expected} channels")]
    LengthMismatch {
        name: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("blocklength range [{min}, {max}] is empty")]
    EmptyRange { min: u64, max: u64 },

    #[error("every blocklength in [{min}, {max}] yields a divergent average AoI")]
    AllDivergent { min: u64, max: u64 },

    #[error("linear system is singular")]
    Singular,

    #[error("simulation produced no data: {0}")]
    NoData(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
