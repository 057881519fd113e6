//! Simulation and control for dual-arm grasping, lifting and connector
//! insertion of flat panels.
//!
//! The crate is organized bottom-up: [`geometry`] and [`scene`] describe
//! frames and panels, [`perception`] turns synthetic detections into grasp
//! poses, [`impedance`], [`wrench_control`] and [`nmpc`] are the controllers,
//! [`simworld`] is the contact simulator, and [`pipeline`] sequences a trial.

pub mod config;
pub mod error;
pub mod geometry;
pub mod impedance;
pub mod nmpc;
pub mod perception;
pub mod pipeline;
pub mod runlog;
pub mod scene;
pub mod simworld;
pub mod wrench_control;

pub use error::{Error, Result};
