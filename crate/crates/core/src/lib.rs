//! Aided inertial navigation for autonomous underwater vehicles.
//!
//! An unscented Kalman filter on manifolds fuses a strapdown IMU with DVL,
//! depth, GPS and one-way-travel-time acoustic ranges. The crate also contains
//! a kinematic mission simulator and the log/report plumbing used by the
//! `auvnav` command-line tool.

pub mod config;
pub mod error;
pub mod geodesy;
pub mod navigator;
pub mod records;
pub mod replay;
pub mod report;
pub mod sensors;
pub mod sim;
pub mod so3;
pub mod strapdown;
pub mod ukfm;

pub use error::{NavError, Result};
