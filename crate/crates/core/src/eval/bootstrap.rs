use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lorenz::{gini, ScoredPolicy};
use crate::error::{Error, Result};
use crate::glm::{build_design, fit_poisson, predict, DesignMatrix, FitOptions, INTERCEPT};
use crate::portfolio::Dataset;

/// What the Lorenz x-axis accumulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LorenzAxis {
    /// Each policy counts once.
    #[default]
    PolicyCount,
    /// Policies count by their exposure.
    Exposure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resampling {
    /// Random partition without replacement; `split_fraction` of the
    /// policies form the test set.
    #[default]
    Split,
    /// Training set drawn with replacement (same size as the non-test share);
    /// never-drawn policies form the test set.
    WithReplacement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOptions {
    pub trials: usize,
    pub split_fraction: f64,
    pub base_seed: u64,
    pub resampling: Resampling,
    pub axis: LorenzAxis,
    pub fit: FitOptions,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            trials: 20,
            split_fraction: 0.2,
            base_seed: 0,
            resampling: Resampling::Split,
            axis: LorenzAxis::PolicyCount,
            fit: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: usize,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub test_gini_a: Option<f64>,
    pub test_gini_b: Option<f64>,
    pub test_gini_c: Option<f64>,
    pub train_gini_a: Option<f64>,
    pub train_gini_b: Option<f64>,
    pub train_gini_c: Option<f64>,
    /// Set when the trial failed; the Gini fields are then empty.
    pub error: Option<String>,
}

impl TrialRecord {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }

    fn test_ginis(&self) -> Option<(f64, f64, f64)> {
        Some((self.test_gini_a?, self.test_gini_b?, self.test_gini_c?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImprovementSummary {
    pub successful_trials: usize,
    pub mean_gini_a: f64,
    pub mean_gini_b: f64,
    pub mean_gini_c: f64,
    /// Mean of `gini_C − gini_B` over successful trials.
    pub mean_delta_c_minus_b: f64,
    /// Trials with `gini_C > gini_B`.
    pub win_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GiniReport {
    pub options: BootstrapOptions,
    pub variables: Vec<String>,
    pub n_policies: usize,
    pub trials: Vec<TrialRecord>,
    pub failed_trials: usize,
    pub summary: Option<ImprovementSummary>,
}

impl GiniReport {
    /// `trial_index,gini_A,gini_B,gini_C` with one row per trial; failed
    /// trials leave the Gini cells empty.
    pub fn to_plot_csv(&self) -> String {
        let mut out = String::from("trial_index,gini_A,gini_B,gini_C\n");
        let cell = |g: Option<f64>| g.map_or(String::new(), |g| g.to_string());
        for t in &self.trials {
            out.push_str(&format!(
                "{},{},{},{}\n",
                t.trial_index,
                cell(t.test_gini_a),
                cell(t.test_gini_b),
                cell(t.test_gini_c)
            ));
        }
        out
    }
}

pub fn improvement_summary(report: &GiniReport) -> Result<ImprovementSummary> {
    let ok: Vec<(f64, f64, f64)> = report.trials.iter().filter_map(TrialRecord::test_ginis).collect();
    if ok.is_empty() {
        return Err(Error::NoSuccessfulTrials);
    }
    let n = ok.len() as f64;
    let mean = |f: fn(&(f64, f64, f64)) -> f64| ok.iter().map(f).sum::<f64>() / n;
    Ok(ImprovementSummary {
        successful_trials: ok.len(),
        mean_gini_a: mean(|t| t.0),
        mean_gini_b: mean(|t| t.1),
        mean_gini_c: mean(|t| t.2),
        mean_delta_c_minus_b: mean(|t| t.2 - t.1),
        win_count: ok.iter().filter(|t| t.2 > t.1).count(),
    })
}

/// Train and test row indices for one trial, both ascending.
fn partition(n: usize, options: &BootstrapOptions, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_test = ((options.split_fraction * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    match options.resampling {
        Resampling::Split => {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let mut test = perm[..n_test].to_vec();
            let mut train = perm[n_test..].to_vec();
            test.sort_unstable();
            train.sort_unstable();
            (train, test)
        }
        Resampling::WithReplacement => {
            let mut drawn = vec![false; n];
            let mut train: Vec<usize> = (0..n - n_test)
                .map(|_| {
                    let i = rng.random_range(0..n);
                    drawn[i] = true;
                    i
                })
                .collect();
            train.sort_unstable();
            let test = (0..n).filter(|&i| !drawn[i]).collect();
            (train, test)
        }
    }
}

struct Columns<'a> {
    design_c: &'a DesignMatrix,
    design_a: &'a DesignMatrix,
    y: Vec<u32>,
    exposure: Vec<f64>,
    offset_b: Vec<f64>,
    axis: LorenzAxis,
}

impl Columns<'_> {
    fn scored(&self, rows: &[usize], scores: &[f64]) -> Vec<ScoredPolicy> {
        rows.iter()
            .zip(scores)
            .map(|(&i, &score)| ScoredPolicy {
                score,
                weight: match self.axis {
                    LorenzAxis::PolicyCount => 1.0,
                    LorenzAxis::Exposure => self.exposure[i],
                },
                outcome: f64::from(self.y[i]),
            })
            .collect()
    }

    fn pick<T: Copy>(v: &[T], rows: &[usize]) -> Vec<T> {
        rows.iter().map(|&i| v[i]).collect()
    }

    /// Ginis of models A, B and C on `eval_rows` after fitting on `train`.
    fn run(&self, train: &[usize], test: &[usize], fit: &FitOptions) -> Result<[f64; 6]> {
        let y_train = Self::pick(&self.y, train);
        let model_a = fit_poisson(
            &self.design_a.select_rows(train),
            &y_train,
            &Self::pick(&self.exposure, train),
            fit,
        )?;
        let model_c = fit_poisson(
            &self.design_c.select_rows(train),
            &y_train,
            &Self::pick(&self.offset_b, train),
            fit,
        )?;
        let mut out = [0.0; 6];
        for (slot, rows) in [(0, test), (3, train)] {
            let exposure = Self::pick(&self.exposure, rows);
            let offset_b = Self::pick(&self.offset_b, rows);
            let score_a = predict(&model_a, &self.design_a.select_rows(rows), &exposure)?;
            let score_c = predict(&model_c, &self.design_c.select_rows(rows), &offset_b)?;
            out[slot] = gini(&self.scored(rows, &score_a))?;
            out[slot + 1] = gini(&self.scored(rows, &offset_b))?;
            out[slot + 2] = gini(&self.scored(rows, &score_c))?;
        }
        Ok(out)
    }
}

/// Repeated train/test comparison. Trial `t` uses seed `base_seed + t`; on
/// its training part the null model (intercept, exposure offset) and the
/// feature model (retained features, incumbent offset) are fitted, and all
/// three models are scored on the held-out part. Trials that fail are
/// recorded and excluded from the summary.
pub fn bootstrap_evaluate(
    dataset: &Dataset,
    retained: &[String],
    options: &BootstrapOptions,
) -> Result<GiniReport> {
    if options.trials == 0 {
        return Err(Error::Config("at least one trial required".into()));
    }
    if !(options.split_fraction > 0.0 && options.split_fraction < 1.0) {
        return Err(Error::Config(format!(
            "split fraction {} outside (0, 1)",
            options.split_fraction
        )));
    }
    if dataset.len() < 2 {
        return Err(Error::Empty("need at least two policies".into()));
    }
    let design_c = build_design(&dataset.features, retained)?;
    let design_a = DesignMatrix::from_columns(vec![INTERCEPT.into()], vec![vec![1.0; dataset.len()]])?;
    let cols = Columns {
        design_c: &design_c,
        design_a: &design_a,
        y: dataset.claim_counts(),
        exposure: dataset.exposures(),
        offset_b: dataset.model_b_offsets(),
        axis: options.axis,
    };
    let n = dataset.len();
    let run_trial = |t: usize| -> TrialRecord {
        let seed = options.base_seed.wrapping_add(t as u64);
        let (train, test) = partition(n, options, seed);
        let mut rec = TrialRecord {
            trial_index: t,
            seed,
            n_train: train.len(),
            n_test: test.len(),
            test_gini_a: None,
            test_gini_b: None,
            test_gini_c: None,
            train_gini_a: None,
            train_gini_b: None,
            train_gini_c: None,
            error: None,
        };
        match cols.run(&train, &test, &options.fit) {
            Ok(g) => {
                rec.test_gini_a = Some(g[0]);
                rec.test_gini_b = Some(g[1]);
                rec.test_gini_c = Some(g[2]);
                rec.train_gini_a = Some(g[3]);
                rec.train_gini_b = Some(g[4]);
                rec.train_gini_c = Some(g[5]);
            }
            Err(e) => rec.error = Some(e.to_string()),
        }
        rec
    };

    #[cfg(feature = "parallel")]
    let trials: Vec<TrialRecord> = {
        use rayon::prelude::*;
        (0..options.trials).into_par_iter().map(run_trial).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let trials: Vec<TrialRecord> = (0..options.trials).map(run_trial).collect();

    let mut report = GiniReport {
        options: *options,
        variables: retained.to_vec(),
        n_policies: n,
        failed_trials: trials.iter().filter(|t| !t.succeeded()).count(),
        trials,
        summary: None,
    };
    report.summary = improvement_summary(&report).ok();
    Ok(report)
}
