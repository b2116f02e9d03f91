//! Truncated-Fock-space simulator for heralded non-Gaussian state generation
//! on an OPA-based source.
//!
//! The library is organized around a handful of small, pure modules:
//!
//! - [`fock`]: value types for one- and two-mode states on a truncated Fock
//!   basis, tensor products, partial traces, and truncation-health checks.
//! - [`operators`]: dense mode operators, structure-exploiting matrix
//!   exponentials for every Gaussian unitary, the cubic-phase unitary, and
//!   the closed-form heralded OPA Kraus operator.
//! - [`measurement`]: PNRD and x-homodyne heralding maps plus quadrature
//!   distributions.
//! - [`channels`]: pure-loss and thermal-loss channels (Kraus route and an
//!   ancilla-dilation oracle) and the dark-count detector model.
//! - [`targets`]: ideal reference states (squeezed vacuum, coherent,
//!   photon-added squeezed, cubic-phase, squeezed cats, approximate GKP).
//! - [`protocols`]: the generation pipelines composed from the above, each
//!   returning a [`protocols::ProtocolReport`].
//! - [`metrics`]: fidelity, Wigner functions, parity, stabilizer
//!   expectations, effective GKP squeezing, and dB conversions.
//! - [`optimize`]: multi-start Nelder-Mead maximization over boxed
//!   parameters, used for all fidelity optimizations.
//! - [`scenario`]: declarative scenario files and the bundled scenarios run
//!   by the `simulate` binary.
//!
//! Everything is deterministic: there is no randomness anywhere in the
//! library (heralding is projective, not sampled), so identical inputs give
//! bit-identical outputs.

pub mod channels;
pub mod fock;
pub mod measurement;
pub mod metrics;
pub mod operators;
pub mod optimize;
pub mod protocols;
pub mod scenario;
pub mod targets;

use thiserror::Error;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex<f64>;

/// Errors shared by every module.
#[derive(Debug, Error)]
pub enum SimError {
    /// A herald outcome has exactly zero probability (or density); the
    /// conditional state does not exist.
    #[error("zero-probability herald: {0}")]
    ZeroProbabilityHerald(String),

    /// Operands live on incompatible truncations or mode counts.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Dark counts cannot be represented at unit efficiency: the thermal
    /// port of the detector model vanishes as eta -> 1.
    #[error("dark counts unrepresentable at unit efficiency")]
    DarkCountsAtUnitEfficiency,

    /// Guard for reference implementations that materialize large tensors.
    #[error("dimension {dim} exceeds the {limit} limit of this reference path")]
    DimensionGuard { dim: usize, limit: usize },

    /// Scenario file failed validation.
    #[error("scenario validation: {0}")]
    ScenarioValidation(String),

    /// Truncation health failed in strict mode.
    #[error("truncation health: {0}")]
    TruncationHealth(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, SimError>;
