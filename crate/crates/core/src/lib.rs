//! Behavioral modeling of nonlinear RF power amplifiers.
//!
//! The crate covers the whole desk-scale loop: synthetic multi-carrier OFDM
//! stimulus and a Wiener–Hammerstein PA oracle ([`signals`]), the per-carrier
//! I/Q + envelope feature tensors ([`features`]), a small exact-gradient
//! neural engine ([`neuralcore`]), the convolutional attention network with
//! its two-stage training plus the GMP / ARVTDNN / DNN baselines
//! ([`models`]), and NMSE / error-spectrum evaluation ([`eval`]).
//! [`pipeline`] ties these together behind a JSON experiment config.

pub mod error;
pub mod eval;
pub mod exec;
pub mod features;
pub mod models;
pub mod neuralcore;
pub mod pipeline;
pub mod seed;
pub mod signals;

pub use error::{Error, Result};
pub use exec::Exec;
pub use num_complex::Complex64;
