use thiserror::Error;

/// Errors produced by the moment engine, the combinatorial layer and the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A partition-based computation was asked for an order outside `1..=cap`.
    #[error("order {n} is outside the supported range 1..={cap}")]
    SizeLimit { n: usize, cap: usize },

    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Cluster simulation needs a strictly subcritical kernel (a < b).
    #[error("cluster simulation requires a < b, got a = {a}, b = {b}")]
    Supercritical { a: f64, b: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
