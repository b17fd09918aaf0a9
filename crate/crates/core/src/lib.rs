//! Link-level simulator and phase-shift optimizer for an uplink where a
//! cluster of spreading-based NOMA users reaches a massive-MIMO base
//! station through a reconfigurable intelligent surface (RIS).
//!
//! The crate is organized bottom-up:
//!
//! - [`numerics`]: complex Hermitian linear algebra (dominant eigenpair,
//!   PSD projection, positive-definite solves).
//! - [`channel`]: per-cluster channel realizations and the post-MRC
//!   effective-channel model.
//! - [`codebook`]: Grassmannian and orthogonal spreading codebooks.
//! - [`receiver`]: MMSE successive interference cancellation, per-stage
//!   SINRs, threshold detection, and the cluster sum-rate.
//! - [`risopt`]: phase-shift strategies, including the SDP-relaxed
//!   feasibility program and its rank-1 extraction.
//! - [`harness`]: Monte Carlo sweeps, confidence intervals, and CSV output.

pub mod channel;
pub mod codebook;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod receiver;
pub mod risopt;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
