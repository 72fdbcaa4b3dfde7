//! A 3D multi-object tracker in bird's-eye view.
//!
//! The filter maintains a Poisson point process over undetected objects and
//! one Bernoulli component per detected potential object, keeps the single
//! best global association hypothesis per step, and manages track birth
//! through a hybrid of the Poisson birth model and score-driven adaptive
//! birth. Box extents, height, and confidence scores live outside the
//! Bayesian recursion in a lightweight per-track filter.
//!
//! The crate also ships a scenario simulator, CLEAR/AMOTA evaluation, and a
//! line-oriented file format for detections and tracks, wired together by
//! the `pmbtrack` command-line binary.

pub mod association;
pub mod config;
pub mod density;
pub mod error;
pub mod filter;
pub mod io;
pub mod metrics;
pub mod motion;
pub mod preprocess;
pub mod sim;
pub mod tracker;
pub mod tracks;

pub use error::{Error, Result};
