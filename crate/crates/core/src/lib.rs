//! Forced waves of a three-species predator-prey system (two competing preys
//! and one predator) in an environment shifting at constant speed.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: parameters, steady states, critical speeds, hypothesis checks
//! - [`shift`]: the shifting heterogeneity and its translation normalisation
//! - [`profile`]: piecewise closed-form and sampled profiles with exact derivatives
//! - [`bounds`]: generalized upper/lower solution pairs and their verification
//! - [`wave`]: scalar and full-system forced-wave solvers
//! - [`sim`]: co-moving-frame Cauchy simulation
//! - [`export`]: CSV writers shared by the command line tool

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bounds;
pub mod export;
pub mod linalg;
pub mod model;
pub mod profile;
pub mod shift;
pub mod sim;
pub mod wave;

pub use bounds::{BoundPair, BoundScenario};
pub use model::{ModelParams, Scenario};
pub use shift::ShiftProfile;
