//! Passive target tracking by a mobile receiver whose transmitter position is
//! unknown.
//!
//! A receiver with a known pose measures the angle of arrival (AOA) of the
//! direct path plus, for every scattered path, a bistatic relative distance and
//! an AOA. From these it jointly estimates the transmitter position and the
//! positions of an unknown, time-varying number of scatterers, resolving false
//! alarms, missed detections and measurement-to-scatterer association with
//! particle-based belief propagation.
//!
//! Module map:
//!
//! - [`geometry`]: bistatic measurement functions and their inversions.
//! - [`scenario`]: ground truth and noisy measurement synthesis.
//! - [`factors`]: pointwise factor evaluations of the posterior.
//! - [`association`]: scalar loopy BP for PS/measurement association.
//! - [`tracker`]: the particle tracker itself.
//! - [`metrics`]: OSPA, localization error, target identification.
//! - [`experiment`]: one seeded simulation run producing metrics.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod association;
pub mod error;
pub mod experiment;
pub mod factors;
pub mod geometry;
pub mod metrics;
pub mod scenario;
pub mod tracker;

pub use error::{Error, Result};
pub use geometry::{Pose, Position};
