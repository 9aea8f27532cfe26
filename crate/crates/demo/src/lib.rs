//! Browser demo over `streetrisk-core`.
//!
//! Three operations, each a plain Rust function with a JSON-returning
//! `wasm_bindgen` wrapper: Fleiss' kappa from pasted ratings, a Lorenz
//! curve and Gini coefficient from pasted scored policies, and a small
//! seeded synthetic portfolio run through the train/test comparison.

use std::collections::BTreeMap;

use serde::Serialize;
use streetrisk_core::eval::{bootstrap_evaluate, gini, lorenz_curve, BootstrapOptions, ScoredPolicy};
use streetrisk_core::kappa::{fleiss_kappa, interpret_kappa};
use streetrisk_core::pipeline::{prepare_dataset, Fixtures, PrepareOptions};
use streetrisk_core::synth::{generate_portfolio, SynthConfig};
use thiserror::Error;
use wasm_bindgen::prelude::*;

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] streetrisk_core::Error),
}

pub type Result<T, E = DemoError> = std::result::Result<T, E>;

fn parse_err(line: usize, message: impl Into<String>) -> DemoError {
    DemoError::Parse {
        line,
        message: message.into(),
    }
}

/// Non-empty, non-comment lines with their 1-based numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn tokens(line: &str) -> Vec<&str> {
    line.split(|c: char| c == ',' || c == ';' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaResult {
    pub kappa: f64,
    pub band: String,
    pub items: usize,
    pub raters: usize,
    pub categories: Vec<String>,
    /// Per category, in `categories` order.
    pub category_shares: Vec<f64>,
}

/// One item per line, one label per rater; every line needs the same
/// number of labels.
pub fn kappa_from_text(text: &str) -> Result<KappaResult> {
    let mut rows: Vec<Vec<&str>> = Vec::new();
    for (line, content) in content_lines(text) {
        let labels = tokens(content);
        if let Some(first) = rows.first() {
            if labels.len() != first.len() {
                return Err(parse_err(
                    line,
                    format!("{} labels, expected {}", labels.len(), first.len()),
                ));
            }
        } else if labels.len() < 2 {
            return Err(parse_err(line, "each item needs at least two raters"));
        }
        rows.push(labels);
    }
    if rows.is_empty() {
        return Err(DemoError::Input("no ratings".into()));
    }
    let index: BTreeMap<&str, usize> = rows
        .iter()
        .flatten()
        .copied()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(k, c)| (c, k))
        .collect();
    if index.len() < 2 {
        return Err(DemoError::Input("all labels identical; kappa is undefined".into()));
    }
    let raters = rows[0].len();
    let mut totals = vec![0u64; index.len()];
    let counts: Vec<Vec<u64>> = rows
        .iter()
        .map(|row| {
            let mut c = vec![0u64; index.len()];
            for label in row {
                c[index[label]] += 1;
                totals[index[label]] += 1;
            }
            c
        })
        .collect();
    let kappa = fleiss_kappa(&counts, raters as u64)?;
    let all = (rows.len() * raters) as f64;
    Ok(KappaResult {
        kappa,
        band: interpret_kappa(kappa)?.label().to_string(),
        items: rows.len(),
        raters,
        categories: index.keys().map(|c| c.to_string()).collect(),
        category_shares: totals.iter().map(|&t| t as f64 / all).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GiniResult {
    pub gini: f64,
    /// Gini of the same policies ordered by realised claim rate.
    pub max_gini: f64,
    pub policies: usize,
    /// Lorenz curve (cumulative exposure share, cumulative claim share),
    /// thinned to at most `MAX_POINTS` points for plotting.
    pub curve: Vec<(f64, f64)>,
}

const MAX_POINTS: usize = 400;

/// Lines of `score,exposure,claims`; a non-numeric first line is a header.
pub fn gini_from_text(text: &str) -> Result<GiniResult> {
    let mut policies = Vec::new();
    for (k, (line, content)) in content_lines(text).enumerate() {
        let cells = tokens(content);
        let parsed: Option<Vec<f64>> = cells.iter().map(|c| c.parse().ok()).collect();
        let Some(v) = parsed else {
            if k == 0 {
                continue;
            }
            return Err(parse_err(line, "expected numbers"));
        };
        if v.len() != 3 {
            return Err(parse_err(line, "expected score, exposure, claims"));
        }
        policies.push(ScoredPolicy {
            score: v[0],
            weight: v[1],
            outcome: v[2],
        });
    }
    gini_summary(&policies)
}

pub fn gini_summary(policies: &[ScoredPolicy]) -> Result<GiniResult> {
    if policies.is_empty() {
        return Err(DemoError::Input("no policies".into()));
    }
    let g = gini(policies)?;
    let oracle: Vec<ScoredPolicy> = policies
        .iter()
        .map(|p| ScoredPolicy {
            score: p.outcome / p.weight,
            ..*p
        })
        .collect();
    let curve = lorenz_curve(policies)?;
    let step = curve.len().div_ceil(MAX_POINTS).max(1);
    let mut thinned: Vec<(f64, f64)> = curve.iter().step_by(step).copied().collect();
    if thinned.last() != curve.last() {
        thinned.push(*curve.last().unwrap());
    }
    Ok(GiniResult {
        gini: g,
        max_gini: gini(&oracle)?,
        policies: policies.len(),
        curve: thinned,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialGini {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationResult {
    pub policies: usize,
    pub variables: Vec<String>,
    pub trials: Vec<TrialGini>,
    pub failed_trials: usize,
    pub mean_gini_a: f64,
    pub mean_gini_b: f64,
    pub mean_gini_c: f64,
    pub win_count: usize,
}

/// Generates a seeded portfolio (optionally with every house effect set
/// to 1) and runs the repeated train/test comparison on it.
pub fn mini_evaluation(n_policies: usize, seed: u64, trials: usize, null_effects: bool) -> Result<EvaluationResult> {
    if !(500..=50_000).contains(&n_policies) {
        return Err(DemoError::Input("policies must be between 500 and 50000".into()));
    }
    if !(1..=50).contains(&trials) {
        return Err(DemoError::Input("trials must be between 1 and 50".into()));
    }
    let base = if null_effects {
        SynthConfig::null_effects()
    } else {
        SynthConfig::default()
    };
    let config = SynthConfig {
        n_policies,
        n_foreign: n_policies / 500,
        n_unresolved: n_policies / 200,
        common_set_size: (n_policies / 40).clamp(50, 500),
        ..base.with_seed(seed)
    };
    let fixtures = Fixtures::from_portfolio(&generate_portfolio(&config)?)?;
    let prepared = prepare_dataset(&fixtures, &PrepareOptions::default())?;
    let options = BootstrapOptions {
        trials,
        base_seed: seed,
        ..BootstrapOptions::default()
    };
    let report = bootstrap_evaluate(&prepared.dataset, &prepared.variables, &options)?;
    let summary = report
        .summary
        .ok_or_else(|| DemoError::Input("every trial failed".into()))?;
    let trials = report
        .trials
        .iter()
        .filter_map(|t| {
            Some(TrialGini {
                a: t.test_gini_a?,
                b: t.test_gini_b?,
                c: t.test_gini_c?,
            })
        })
        .collect();
    Ok(EvaluationResult {
        policies: report.n_policies,
        variables: report.variables,
        trials,
        failed_trials: report.failed_trials,
        mean_gini_a: summary.mean_gini_a,
        mean_gini_b: summary.mean_gini_b,
        mean_gini_c: summary.mean_gini_c,
        win_count: summary.win_count,
    })
}

fn to_js<T: Serialize>(result: Result<T>) -> Result<String, JsValue> {
    result
        .map_err(|e| JsValue::from_str(&e.to_string()))
        .and_then(|v| serde_json::to_string(&v).map_err(|e| JsValue::from_str(&e.to_string())))
}

#[wasm_bindgen]
pub fn kappa(text: &str) -> Result<String, JsValue> {
    to_js(kappa_from_text(text))
}

#[wasm_bindgen(js_name = giniCurve)]
pub fn gini_curve(text: &str) -> Result<String, JsValue> {
    to_js(gini_from_text(text))
}

#[wasm_bindgen(js_name = miniEvaluation)]
pub fn mini_evaluation_js(n_policies: u32, seed: u32, trials: u32, null_effects: bool) -> Result<String, JsValue> {
    to_js(mini_evaluation(n_policies as usize, u64::from(seed), trials as usize, null_effects))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_accept_mixed_separators() {
        assert_eq!(tokens("a, b;c  d"), vec!["a", "b", "c", "d"]);
    }

    #[test]
    fn ragged_rows_name_the_line() {
        let err = kappa_from_text("a a\n\nb b b").unwrap_err();
        assert_eq!(err.to_string(), "line 3: 3 labels, expected 2");
    }

    #[test]
    fn header_only_first_line() {
        assert!(gini_from_text("score,exposure,claims\n1,1,0\n2,1,1").is_ok());
        assert!(gini_from_text("1,1,0\nx,1,1").is_err());
    }
}
