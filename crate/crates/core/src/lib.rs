//! Finite-blocklength capacity bounds for lossy bosonic fibres with memory.
//!
//! The crate evaluates the channel's Toeplitz coefficients and closed-form
//! symbol, extracts singular spectra of finite Toeplitz corners, computes
//! explicit Avram–Parter error bounds, and turns them into non-asymptotic
//! lower bounds on the quantum, two-way quantum and secret-key capacities.

// `!(x > 0.0)` is used deliberately so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod avram_parter;
pub mod capacities;
pub mod cli;
pub mod error;
pub mod output;
pub mod quadrature;
pub mod symbol;
pub mod toeplitz;
pub mod verify;

pub use capacities::{CapacityKind, ErrorBudget, NShotBound};
pub use error::{Error, Result};
pub use symbol::{ChannelParams, CoefficientSequence};
pub use toeplitz::SingularSpectrum;
