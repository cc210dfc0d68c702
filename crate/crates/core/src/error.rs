use thiserror::Error;

/// Errors raised by the selection library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("invalid grid configuration: {0}")]
    InvalidConfig(String),

    /// A table entry left the admissible range `[0, sqrt(2k)]`. This always
    /// points to a bug in the recursion kernels.
    #[error("arithmetic failure at k={k}, node={node}: value {value} outside [0, {limit}]")]
    Arithmetic {
        k: usize,
        node: usize,
        value: f64,
        limit: f64,
    },

    #[error("row k={k} is not retained by this table (retained rows {first}..={last})")]
    RowUnavailable { k: usize, first: usize, last: usize },

    #[error("expected a table of kind {expected}, got {actual}")]
    KindMismatch {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("tables were built on different grid configurations")]
    ConfigMismatch,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_unit(what: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain { what, value })
    }
}

pub(crate) fn check_horizon(k: usize) -> Result<()> {
    if k == 0 {
        Err(Error::Domain {
            what: "horizon k",
            value: 0.0,
        })
    } else {
        Ok(())
    }
}
