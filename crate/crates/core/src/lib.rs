//! Center-of-inertia frequency response simulation for power systems.
//!
//! A [`model::SystemCase`] describes the fleet: synchronous units with
//! optional TGOV1 governors, constant-power renewables, load and load
//! damping. [`simulator::simulate`] integrates the aggregate swing equation
//! after a [`model::TripEvent`], [`metrics::compute_metrics`] reduces the
//! resulting trace to ROCOF, nadir, settling time and settling frequency,
//! [`calibration::calibrate`] fits governor capacity, reheater time and
//! inertia to measured metrics, and [`scenario`] displaces synchronous
//! generation with wind and PV to study low-inertia operation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod cli;
pub mod governor;
pub mod metrics;
pub mod model;
pub mod reference;
pub mod scenario;
pub mod simulator;
pub mod trace;
