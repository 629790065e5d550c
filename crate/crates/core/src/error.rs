use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must lie strictly between 0 and 1, got {value}")]
    OutOfUnitInterval { name: &'static str, value: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid topology: {0}")]
    InvalidTopology(&'static str),
    #[error("no busy intermediate user to defer on")]
    NoBusyIu,
    #[error("mode carries no data, transfer is impossible")]
    Untransmittable,
    #[error("availability set is empty")]
    EmptyAvailability,
    #[error("hop span overshoot: consumed hops {psi_i} must stay below {psi}")]
    Overshoot { psi_i: u32, psi: u32 },
    #[error("hop index {index} needs {needed} recorded hops, have {have}")]
    MissingHistory { index: usize, needed: usize, have: usize },
    #[error("route did not reach the destination")]
    UnsuccessfulRoute,
    #[error("hop {0} carries zero rate")]
    ZeroRateHop(usize),
    #[error("net energy consumption is not positive: {0} J")]
    NetNegativeEnergy(f64),
}

pub(crate) fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonPositive { name, value })
    }
}

pub(crate) fn unit_open(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value < 1.0 {
        Ok(value)
    } else {
        Err(Error::OutOfUnitInterval { name, value })
    }
}
