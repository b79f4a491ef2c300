//! Tracking, localization and path planning for sparse ground targets seen
//! from a simulated aerial camera.
//!
//! - [`geometry`]: pinhole projection, back-projection and cone tests.
//! - [`tracker`]: bounding-box Kalman tracker with IoU registration.
//! - [`localizer`]: particle clouds refined across views, with PCA, KL and
//!   entropy convergence metrics.
//! - [`view_planner`]: lawn-mower search and next-best-view circle paths.
//! - [`mapping`]: cylinder fit, stacked scan circles and coverage checks.
//! - [`sim`]: deterministic world, detector and feature-tracker emulation.
//! - [`mission`]: the search / localize / map state machine and run logs.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod exec;
pub mod geometry;
pub mod localizer;
pub mod mapping;
pub mod mission;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod tracker;
pub mod view_planner;

pub use exec::Exec;
