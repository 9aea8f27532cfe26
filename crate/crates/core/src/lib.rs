//! Address-level claim frequency modeling.
//!
//! The crate covers the whole desk-side pipeline: policy and address
//! ingestion, house-image annotation statistics (Fleiss' kappa, annotator
//! calibration, binary simplification), a Poisson log-link GLM with offsets
//! fitted by IRLS, Lorenz/Gini lift evaluation over repeated train/test
//! splits, and a seeded synthetic portfolio generator that plants known
//! house-feature effects.

pub mod annotation;
pub mod calibration;
pub mod campaign;
pub mod error;
pub mod eval;
pub mod features;
pub mod glm;
pub mod kappa;
pub mod pipeline;
pub mod portfolio;
pub mod schema;
pub mod synth;

pub use error::{Error, Result};
