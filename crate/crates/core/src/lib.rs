//! Blind estimation of multipath radio-channel parameters.
//!
//! A single transmitter with an unknown spectrum `s` illuminates a polarimetric
//! receive array through `P` specular paths. Each path carries an azimuth and
//! elevation of arrival, a relative delay and a pair of complex H/V weights.
//! The receiver observes, per frequency bin `k`,
//!
//! ```text
//! y(k) = B(phi, theta) * Gamma * e(tau, k) * s(k) + n(k)
//! ```
//!
//! and the crate recovers the path parameters without ever knowing `s`, using
//! one of two cost functions:
//!
//! * [`cost_cml`]: constrained maximum likelihood. The spectrum is replaced by
//!   its best linear unbiased estimate, leaving a per-bin projection residual.
//! * [`cost_ccr`]: channel cross relation. Pairwise relations
//!   `x_i h_j - x_j h_i = 0` between receiver ports eliminate `s` altogether;
//!   the path weights enter linearly and are solved by a generalized
//!   eigenproblem for every candidate of the nonlinear parameters.
//!
//! Both costs are minimized over a gauge-reduced parameter vector by the
//! Levenberg-Marquardt solver in [`optimizer`], and [`montecarlo`] runs the
//! SNR sweep that compares them.
//!
//! The runnable programs under `examples/` walk through each stage.

pub mod antenna;
pub mod channel_model;
pub mod cli;
pub mod config;
pub mod cost_ccr;
pub mod cost_cml;
pub mod error;
pub mod estimator;
pub mod gauge;
pub mod init;
pub mod montecarlo;
pub mod obsfile;
pub mod optimizer;
pub mod plot;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Dense complex matrix used throughout the crate.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<Complex64>;
