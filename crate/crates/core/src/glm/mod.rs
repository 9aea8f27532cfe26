//! Poisson log-link GLM with offsets.
//!
//! `log E[y_i] = x_i·β + log o_i`, fitted by iteratively reweighted least
//! squares on a rank-revealing Householder QR of the weighted design.

mod design;
mod fit;
mod inference;
mod qr;

pub use design::{build_design, DesignMatrix, DropReason, DroppedColumn, INTERCEPT};
pub use fit::{deviance, fit_poisson, log_likelihood, predict, FitOptions, FittedModel};
pub use inference::{format_wald_table, normal_cdf, two_sided_p_value, wald_tests, WaldRow};
pub use qr::PivotedQr;
