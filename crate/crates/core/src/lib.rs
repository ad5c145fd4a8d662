//! Full counting statistics of the atom maser.
//!
//! The photon number of the maser cavity, restricted to diagonal states, is a
//! birth-death chain. Ground-state atoms leaving the cavity are counted; the
//! count `Λ_t` has a scaled cumulant generating function `λ(s)` equal to the
//! spectral bound of the tilted generator. This crate computes the stationary
//! law, `λ(s)` and the spectral gap, limiting cumulants, the rate function,
//! and Monte Carlo trajectories used to cross-check the exact results.

pub mod cli;
pub mod error;
pub mod generator;
pub mod ldp;
pub mod linalg;
pub mod model;
pub mod spectral;
pub mod trajectories;
pub mod validation;

pub use error::{MaserError, Result};
pub use model::MaserParams;
