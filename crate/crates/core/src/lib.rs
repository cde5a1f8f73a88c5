//! Contact detection and localization along a planar robot leg.
//!
//! The crate combines a generalized-momentum residual observer driven by
//! joint torque sensing with a base force/torque sensor to find which link
//! was hit, where, and how hard. A fixed-step simulator reproduces fixed-base
//! and floating-base collision experiments and the configuration sweep.

pub mod dynamics;
pub mod error;
pub mod io;
pub mod observer;
pub mod contact;
pub mod sensors;
pub mod sim;

pub use error::{Error, Result};
