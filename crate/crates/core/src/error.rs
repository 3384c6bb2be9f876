use std::fmt;

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument was outside its documented domain.
    InvalidArgument(String),
    /// The coin oracle ran out of fresh users. Each user answers at most one
    /// query, so protocols must budget flips ahead of time; recycling users
    /// would break the ε-LDP accounting.
    UsersExhausted { requested: u64, remaining: u64 },
    /// The protocol cannot run on the given (n, B, ε, δ) combination.
    ProtocolInfeasible(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Self::UsersExhausted {
                requested,
                remaining,
            } => write!(
                f,
                "user budget exhausted: requested {requested} flips, {remaining} users remain"
            ),
            Self::ProtocolInfeasible(msg) => write!(f, "protocol infeasible: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
