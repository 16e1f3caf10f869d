//! Joint user association and multi-BS transmit beamforming for networks
//! of dual-function radar-communication base stations.
//!
//! The crate alternates between a user-association phase (classical solvers
//! or a prompt-driven language-model loop) and per-BS beamforming solved by
//! fractional programming, majorization-minimization and ADMM.

// `!(x > 0.0)` is the NaN-rejecting form used by every validator; index
// loops mirror the math subscripts.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod beamform;
pub mod channel;
pub mod driver;
pub mod error;
pub mod llm;
pub mod metrics;
pub mod scene;
pub mod ua;

pub use error::{IsacError, Result};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CVec = DVector<Complex64>;
pub type CMat = DMatrix<Complex64>;
