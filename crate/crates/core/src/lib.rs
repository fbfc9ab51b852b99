//! Flexural-wave simulation and sign-of-TDOA localization for impulsive
//! sources on a damped, dispersive thin plate (a concrete floor slab).
//!
//! The crate is organised bottom-up:
//!
//! * [`plate`] closed-form plate physics: dispersion, attenuation, the
//!   stationary-phase envelope and the perceived-velocity law.
//! * [`synth`] discrete-sum synthesis of the propagated packet, free field
//!   and bounded plate (image sources).
//! * [`arrival`] threshold TOA picking, TDOA/sign vectors, STFT.
//! * [`regions`] the bisector-region codebook and Hamming decoding.
//! * [`localize`] SO-TDOA estimators and the hyperbolic grid baseline.
//! * [`harness`] velocity-profile worlds and the Monte Carlo RMSE study.
//! * [`io`] CSV and binary persistence for everything above.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arrival;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod localize;
pub mod plate;
pub mod regions;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::{Point, RoomGeometry};
