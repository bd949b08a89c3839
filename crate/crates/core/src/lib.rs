//! Digital self-interference cancellation for a full-duplex massive-MIMO
//! OFDM node with oscillator phase noise.
//!
//! The crate is organised bottom-up:
//!
//! - [`ofdm`]: DFT matrix, BPSK symbols, CP-OFDM modulation.
//! - [`impairments`]: Wiener phase noise, ICI coefficients, the analytic
//!   phase-noise covariance, multipath SI channels and the received-signal
//!   synthesis (frequency domain, plus a time-domain reference path).
//! - [`estimator`]: SI covariance assembly, the per-subcarrier real
//!   quadratic programs and the optimal weighted linear estimator, plus the
//!   least-squares baseline.
//! - [`cancellation`]: SI reconstruction and subtraction, residual power and
//!   cancellation-ability metrics.
//! - [`sim`]: configuration, seeded Monte Carlo trials, sweeps and reporting.
//! - [`validation`]: Monte Carlo and brute-force cross-checks of the
//!   analytic models, shared by the test suites and the `validate` command.

// `!(x > 0.0)` is used on purpose so NaN fails parameter checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cancellation;
pub mod error;
pub mod estimator;
pub mod impairments;
pub mod linalg;
pub mod ofdm;
pub mod sim;
pub mod validation;

pub use error::{Error, Result};

/// Complex sample type used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;
