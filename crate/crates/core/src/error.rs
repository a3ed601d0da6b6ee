//! Error type shared by all modules.

use alloc::string::String;
use core::fmt;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

/// Failure modes of the numerical machinery.
///
/// Variants mirror the failure vocabulary of the operation contracts:
/// configuration and alignment problems are caller errors, the solver
/// variants (`Convergence`, `Divergence`, `CertificationMismatch`) report
/// runtime breakdowns together with what was observed.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Invalid construction parameters (degenerate grid, bad exponents, ...).
    Config(String),
    /// A time argument does not lie on the discretization grid.
    Alignment(String),
    /// The noise window does not cover the requested computation.
    Coverage(String),
    /// Argument outside the mathematical domain of the operation.
    Domain(String),
    /// Scalar magnitude outside a safe floating-point range.
    Range(String),
    /// Resolvent parameter too close to (or inside) the spectrum.
    SpectrumProximity(String),
    /// Linear algebra breakdown (singular solve, non-finite values).
    Numerical(String),
    /// An iteration or a Yosida ladder failed to converge.
    Convergence(String),
    /// A solve was requested without a passing spectral-gap certificate.
    Admission(String),
    /// A required capability (e.g. a Jacobian) is missing.
    Capability(String),
    /// A trajectory left the guarded norm ball.
    Divergence(String),
    /// Observed contraction worse than the certified factor.
    CertificationMismatch(String),
    /// The independent oracle itself failed.
    Oracle(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(m) => write!(f, "configuration error: {m}"),
            Error::Alignment(m) => write!(f, "alignment error: {m}"),
            Error::Coverage(m) => write!(f, "coverage error: {m}"),
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::Range(m) => write!(f, "range error: {m}"),
            Error::SpectrumProximity(m) => write!(f, "spectrum proximity error: {m}"),
            Error::Numerical(m) => write!(f, "numerical error: {m}"),
            Error::Convergence(m) => write!(f, "convergence error: {m}"),
            Error::Admission(m) => write!(f, "admission error: {m}"),
            Error::Capability(m) => write!(f, "capability error: {m}"),
            Error::Divergence(m) => write!(f, "divergence error: {m}"),
            Error::CertificationMismatch(m) => write!(f, "certification mismatch: {m}"),
            Error::Oracle(m) => write!(f, "oracle error: {m}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
