//! Lorenz curves, Gini coefficients and the repeated train/test comparison
//! of the null, incumbent and feature-augmented models.

mod bootstrap;
mod lorenz;

pub use bootstrap::{
    bootstrap_evaluate, improvement_summary, BootstrapOptions, GiniReport, ImprovementSummary,
    LorenzAxis, Resampling, TrialRecord,
};
pub use lorenz::{gini, gini_from_curve, lorenz_curve, ScoredPolicy};
