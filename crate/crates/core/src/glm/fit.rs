use serde::{Deserialize, Serialize};

use super::design::{DesignMatrix, DropReason, DroppedColumn, INTERCEPT};
use super::qr::PivotedQr;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// IRLS stops once both the relative deviance change `|ΔD| / (|D| + 0.1)`
    /// and the largest coefficient step fall below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Step halvings allowed per iteration when the deviance goes up.
    pub max_halvings: usize,
    /// Any `|β_k|` above this aborts the fit as quasi-separated.
    pub coefficient_cap: f64,
    /// Relative residual norm under which a column counts as aliased.
    pub alias_tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 100,
            max_halvings: 10,
            coefficient_cap: 15.0,
            alias_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub column_names: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Inverse Fisher information at the final coefficients.
    pub covariance: Vec<Vec<f64>>,
    pub deviance: f64,
    pub null_deviance: f64,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub dropped_columns: Vec<DroppedColumn>,
    pub n_obs: usize,
    /// Deviance after each iteration, starting with the initial value.
    pub deviance_trace: Vec<f64>,
    pub options: FitOptions,
}

impl FittedModel {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.column_names
            .iter()
            .position(|n| n == name)
            .map(|j| self.coefficients[j])
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.column_names
            .iter()
            .position(|n| n == name)
            .map(|j| self.covariance[j][j].sqrt())
    }
}

/// Poisson deviance `2 Σ [y log(y/μ) − (y − μ)]`, with `y log(y/μ) = 0` at `y = 0`.
pub fn deviance(y: &[f64], mu: &[f64]) -> f64 {
    debug_assert_eq!(y.len(), mu.len());
    2.0 * y
        .iter()
        .zip(mu)
        .map(|(&y, &m)| {
            let ylog = if y > 0.0 { y * (y / m).ln() } else { 0.0 };
            ylog - (y - m)
        })
        .sum::<f64>()
}

fn ln_factorial(k: u32) -> f64 {
    (2..=k).map(|i| f64::from(i).ln()).sum()
}

/// Poisson log-likelihood `Σ [y log μ − μ − log y!]`.
pub fn log_likelihood(y: &[u32], mu: &[f64]) -> f64 {
    y.iter()
        .zip(mu)
        .map(|(&y, &m)| {
            let yl = if y > 0 { f64::from(y) * m.ln() } else { 0.0 };
            yl - m - ln_factorial(y)
        })
        .sum()
}

fn linear_predictor(design: &DesignMatrix, cols: &[usize], beta: &[f64], log_offset: &[f64]) -> Vec<f64> {
    (0..design.n_rows())
        .map(|i| {
            let row = design.row(i);
            cols.iter().zip(beta).map(|(&j, b)| row[j] * b).sum::<f64>() + log_offset[i]
        })
        .collect()
}

fn weighted_columns(design: &DesignMatrix, cols: &[usize], sqrt_w: &[f64]) -> Vec<Vec<f64>> {
    cols.iter()
        .map(|&j| {
            (0..design.n_rows())
                .map(|i| design.get(i, j) * sqrt_w[i])
                .collect()
        })
        .collect()
}

/// Maximum-likelihood fit of `log μ_i = x_i·β + log o_i` by IRLS.
///
/// Numerically aliased columns are dropped (the earliest column of a
/// collinear group is kept) and the fit restarts without them. A fit that
/// exhausts `max_iterations` is returned with `converged = false`.
pub fn fit_poisson(
    design: &DesignMatrix,
    claim_counts: &[u32],
    offsets: &[f64],
    options: &FitOptions,
) -> Result<FittedModel> {
    let n = design.n_rows();
    if claim_counts.len() != n || offsets.len() != n {
        return Err(Error::Dimension(format!(
            "design has {n} rows, {} claim counts, {} offsets",
            claim_counts.len(),
            offsets.len()
        )));
    }
    if n == 0 {
        return Err(Error::Empty("no observations".into()));
    }
    if let Some(i) = offsets.iter().position(|o| !(o.is_finite() && *o > 0.0)) {
        return Err(Error::NonPositiveOffset(i));
    }
    let y: Vec<f64> = claim_counts.iter().map(|&c| f64::from(c)).collect();
    let log_offset: Vec<f64> = offsets.iter().map(|o| o.ln()).collect();
    let total_y: f64 = y.iter().sum();
    let total_o: f64 = offsets.iter().sum();

    let mut dropped: Vec<DroppedColumn> = design.dropped_columns().to_vec();
    let mut active: Vec<usize> = (0..design.n_cols()).collect();
    let names = design.column_names();

    'restart: loop {
        let intercept = active.iter().position(|&j| names[j] == INTERCEPT);
        let mut beta = vec![0.0; active.len()];
        if let Some(k) = intercept {
            beta[k] = ((total_y + 0.5) / total_o).ln();
        }
        let mut eta = linear_predictor(design, &active, &beta, &log_offset);
        let mut mu: Vec<f64> = eta.iter().map(|e| e.exp()).collect();
        let mut dev = deviance(&y, &mu);
        let mut trace = vec![dev];
        let mut converged = false;
        let mut iterations = 0;

        while iterations < options.max_iterations {
            iterations += 1;
            let sqrt_w: Vec<f64> = mu.iter().map(|m| m.sqrt()).collect();
            let rhs: Vec<f64> = (0..n)
                .map(|i| sqrt_w[i] * (eta[i] - log_offset[i] + (y[i] - mu[i]) / mu[i]))
                .collect();
            let qr = PivotedQr::new(
                weighted_columns(design, &active, &sqrt_w),
                options.alias_tolerance,
            );
            if !qr.aliased().is_empty() {
                let gone: Vec<usize> = qr.aliased().iter().map(|&k| active[k]).collect();
                for &j in &gone {
                    dropped.push(DroppedColumn {
                        name: names[j].clone(),
                        reason: DropReason::Aliased,
                    });
                }
                active.retain(|j| !gone.contains(j));
                continue 'restart;
            }
            let mut candidate = qr.solve(&rhs);
            let mut new_eta = linear_predictor(design, &active, &candidate, &log_offset);
            let mut new_mu: Vec<f64> = new_eta.iter().map(|e| e.exp()).collect();
            let mut new_dev = deviance(&y, &new_mu);
            let mut halvings = 0;
            // slack for rounding noise in the deviance sum near the optimum
            let ceiling = dev + 1e-11 * (dev.abs() + 0.1);
            while (!new_dev.is_finite() || new_dev > ceiling) && halvings < options.max_halvings {
                for (c, b) in candidate.iter_mut().zip(&beta) {
                    *c = 0.5 * (*c + b);
                }
                new_eta = linear_predictor(design, &active, &candidate, &log_offset);
                new_mu = new_eta.iter().map(|e| e.exp()).collect();
                new_dev = deviance(&y, &new_mu);
                halvings += 1;
            }
            if let Some(k) = candidate
                .iter()
                .position(|b| !b.is_finite() || b.abs() > options.coefficient_cap)
            {
                return Err(Error::QuasiSeparation {
                    column: names[active[k]].clone(),
                    value: candidate[k],
                });
            }
            let change = (new_dev - dev).abs() / (new_dev.abs() + 0.1);
            let step = candidate
                .iter()
                .zip(&beta)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            beta = candidate;
            eta = new_eta;
            mu = new_mu;
            dev = new_dev;
            trace.push(dev);
            if change < options.tolerance && step < options.tolerance {
                converged = true;
                break;
            }
        }

        let sqrt_w: Vec<f64> = mu.iter().map(|m| m.sqrt()).collect();
        let qr = PivotedQr::new(
            weighted_columns(design, &active, &sqrt_w),
            options.alias_tolerance,
        );
        let covariance = if qr.aliased().is_empty() {
            qr.inverse_gram()
        } else {
            vec![vec![f64::NAN; active.len()]; active.len()]
        };
        let null_mu: Vec<f64> = offsets.iter().map(|o| o * total_y / total_o).collect();
        return Ok(FittedModel {
            column_names: active.iter().map(|&j| names[j].clone()).collect(),
            coefficients: beta,
            covariance,
            deviance: dev,
            null_deviance: deviance(&y, &null_mu),
            log_likelihood: log_likelihood(claim_counts, &mu),
            iterations,
            converged,
            dropped_columns: dropped,
            n_obs: n,
            deviance_trace: trace,
            options: *options,
        });
    }
}

/// Expected counts `exp(x_i·β̂) · o_i`. Design columns are matched to the
/// model by name; columns the model dropped are ignored.
pub fn predict(model: &FittedModel, design: &DesignMatrix, offsets: &[f64]) -> Result<Vec<f64>> {
    if offsets.len() != design.n_rows() {
        return Err(Error::Dimension(format!(
            "{} offsets for {} rows",
            offsets.len(),
            design.n_rows()
        )));
    }
    let mut missing = Vec::new();
    let mut cols = Vec::with_capacity(model.column_names.len());
    for name in &model.column_names {
        match design.column_index(name) {
            Some(j) => cols.push(j),
            None => missing.push(name.clone()),
        }
    }
    let unexpected: Vec<String> = design
        .column_names()
        .iter()
        .filter(|n| {
            !model.column_names.contains(n) && !model.dropped_columns.iter().any(|d| &d.name == *n)
        })
        .cloned()
        .collect();
    if !missing.is_empty() || !unexpected.is_empty() {
        return Err(Error::ColumnMismatch {
            missing,
            unexpected,
        });
    }
    Ok((0..design.n_rows())
        .map(|i| {
            let row = design.row(i);
            let eta: f64 = cols
                .iter()
                .zip(&model.coefficients)
                .map(|(&j, b)| row[j] * b)
                .sum();
            eta.exp() * offsets[i]
        })
        .collect())
}
