//! End-to-end orchestration over a fixture directory.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::annotation::{read_annotations, AnnotationRecord};
use crate::calibration::CalibrationMap;
use crate::error::{Error, Result};
use crate::eval::{bootstrap_evaluate, BootstrapOptions, GiniReport};
use crate::features::simplify_features;
use crate::glm::{build_design, fit_poisson, format_wald_table, wald_tests, FitOptions, FittedModel, WaldRow};
use crate::kappa::{agreement_report, KappaReport};
use crate::portfolio::{
    ingest_addresses, ingest_policies, AddressRegistry, Dataset, ExclusionSummary, PolicyBatch,
    Provenance,
};
use crate::schema::AnnotationSchema;
use crate::synth::{SyntheticPortfolio, ADDRESSES_FILE, ANNOTATIONS_FILE, COMMON_FILE, POLICIES_FILE, SCHEMA_FILE};

/// Raw inputs read from a fixture directory.
#[derive(Debug, Clone)]
pub struct Fixtures {
    pub schema: AnnotationSchema,
    pub policies: PolicyBatch,
    pub registry: AddressRegistry,
    pub annotations: Vec<AnnotationRecord>,
    pub common_set: Vec<String>,
    pub provenance: Provenance,
}

fn open(dir: &Path, name: &str) -> Result<fs::File> {
    let path = dir.join(name);
    fs::File::open(&path).map_err(|e| Error::io(path, e))
}

pub fn read_common_set(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

impl Fixtures {
    /// In-memory equivalent of exporting `generated` and loading it back.
    pub fn from_portfolio(generated: &SyntheticPortfolio) -> Result<Self> {
        Ok(Self {
            schema: AnnotationSchema::standard(),
            policies: PolicyBatch {
                records: generated.policies.clone(),
                rejections: Vec::new(),
            },
            registry: AddressRegistry::new(generated.addresses.clone())?,
            annotations: generated.annotations.clone(),
            common_set: generated.common_set.clone(),
            provenance: Provenance::Synthetic,
        })
    }
}

/// Reads `policies.csv`, `addresses.csv` and `annotations.csv`, plus
/// `common.txt` and `schema.json` when present. A `truth.json` marks the
/// directory as synthetic.
pub fn load_fixtures(dir: &Path) -> Result<Fixtures> {
    let schema_path = dir.join(SCHEMA_FILE);
    let schema = if schema_path.exists() {
        AnnotationSchema::load(&schema_path)?
    } else {
        AnnotationSchema::standard()
    };
    let policies = ingest_policies(open(dir, POLICIES_FILE)?)?;
    let registry = ingest_addresses(open(dir, ADDRESSES_FILE)?)?;
    let annotations = read_annotations(open(dir, ANNOTATIONS_FILE)?, &schema, true)?;
    let common_path = dir.join(COMMON_FILE);
    let common_set = if common_path.exists() {
        read_common_set(&common_path)?
    } else {
        Vec::new()
    };
    let provenance = if dir.join(crate::synth::TRUTH_FILE).exists() {
        Provenance::Synthetic
    } else {
        Provenance::RealIngest
    };
    Ok(Fixtures {
        schema,
        policies,
        registry,
        annotations,
        common_set,
        provenance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrepareOptions {
    pub calibrate: bool,
    /// Annotators whose labels feed the features. Empty means everyone with
    /// annotations outside the common set (or everyone, without a common set).
    pub annotators: Vec<String>,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        Self {
            calibrate: true,
            annotators: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset: Dataset,
    /// Binary feature names entering the model.
    pub variables: Vec<String>,
    pub annotators: Vec<String>,
    pub exclusion: ExclusionSummary,
    pub calibration: Option<CalibrationMap>,
    pub warnings: Vec<String>,
}

pub fn retained_annotators(records: &[AnnotationRecord], common_set: &[String]) -> Vec<String> {
    let common: BTreeSet<&str> = common_set.iter().map(String::as_str).collect();
    let all: BTreeSet<&str> = records.iter().map(|r| r.annotator_id.as_str()).collect();
    let disjoint: BTreeSet<&str> = records
        .iter()
        .filter(|r| !common.contains(r.address_id.as_str()))
        .map(|r| r.annotator_id.as_str())
        .collect();
    let chosen = if disjoint.is_empty() { all } else { disjoint };
    chosen.into_iter().map(String::from).collect()
}

/// Excludes unresolved and foreign addresses, calibrates the retained
/// annotators (maps fitted on their disjoint-phase labels), simplifies to
/// binary features and joins them to the policies.
pub fn prepare_dataset(fixtures: &Fixtures, options: &PrepareOptions) -> Result<Prepared> {
    let mut registry = fixtures.registry.clone();
    let exclusion = registry.exclude_non_resolved()?;
    let annotators = if options.annotators.is_empty() {
        retained_annotators(&fixtures.annotations, &fixtures.common_set)
    } else {
        options.annotators.clone()
    };
    let keep: BTreeSet<&str> = annotators.iter().map(String::as_str).collect();
    let records: Vec<AnnotationRecord> = fixtures
        .annotations
        .iter()
        .filter(|r| keep.contains(r.annotator_id.as_str()))
        .filter(|r| registry.get(&r.address_id).is_some_and(|e| e.is_included()))
        .cloned()
        .collect();
    if records.is_empty() {
        return Err(Error::Empty("no annotations from retained annotators".into()));
    }

    let mut warnings = Vec::new();
    let (records, calibration) = if options.calibrate {
        let common: BTreeSet<&str> = fixtures.common_set.iter().map(String::as_str).collect();
        let disjoint: Vec<AnnotationRecord> = records
            .iter()
            .filter(|r| !common.contains(r.address_id.as_str()))
            .cloned()
            .collect();
        let basis = if disjoint.is_empty() { &records } else { &disjoint };
        let (map, w) = CalibrationMap::fit(basis, &fixtures.schema);
        warnings.extend(w);
        (map.apply(&records), Some(map))
    } else {
        (records, None)
    };

    let simplified = simplify_features(&records, &fixtures.schema)?;
    let dataset = Dataset::join(
        &fixtures.policies.records,
        &registry,
        &simplified.features,
        fixtures.provenance,
    )?;
    Ok(Prepared {
        dataset,
        variables: fixtures.schema.retained_names(),
        annotators,
        exclusion,
        calibration,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureFit {
    pub model: FittedModel,
    pub wald: Vec<WaldRow>,
}

/// Model C on the full dataset: retained features with the incumbent offset.
pub fn fit_feature_model(dataset: &Dataset, variables: &[String], options: &FitOptions) -> Result<FeatureFit> {
    let design = build_design(&dataset.features, variables)?;
    let model = fit_poisson(&design, &dataset.claim_counts(), &dataset.model_b_offsets(), options)?;
    let wald = wald_tests(&model)?;
    Ok(FeatureFit { model, wald })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineOptions {
    pub prepare: PrepareOptions,
    pub bootstrap: BootstrapOptions,
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    /// `None` without a common set.
    pub kappa: Option<KappaReport>,
    pub prepared: Prepared,
    pub fit: FeatureFit,
    pub gini: GiniReport,
}

pub fn run_pipeline(fixtures: &Fixtures, options: &PipelineOptions) -> Result<PipelineRun> {
    let kappa = if fixtures.common_set.is_empty() {
        None
    } else {
        Some(agreement_report(
            &fixtures.annotations,
            &fixtures.schema,
            &fixtures.common_set,
            None,
        )?)
    };
    let prepared = prepare_dataset(fixtures, &options.prepare)?;
    let fit = fit_feature_model(&prepared.dataset, &prepared.variables, &options.bootstrap.fit)?;
    let gini = bootstrap_evaluate(&prepared.dataset, &prepared.variables, &options.bootstrap)?;
    Ok(PipelineRun {
        kappa,
        prepared,
        fit,
        gini,
    })
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

/// Markdown summary of a run.
pub fn render_report(run: &PipelineRun) -> String {
    let mut md = String::from("# Street-view risk model report\n\n");
    let p = &run.prepared;
    let _ = writeln!(md, "## Data\n");
    let _ = writeln!(md, "- policies modelled: {}", p.dataset.len());
    let _ = writeln!(md, "- policies dropped at excluded addresses: {}", p.dataset.dropped_policies);
    let _ = writeln!(
        md,
        "- addresses excluded: {} (remaining {})",
        p.exclusion.total_excluded, p.exclusion.remaining
    );
    let _ = writeln!(md, "- annotators used for features: {}", p.annotators.join(", "));
    let _ = writeln!(
        md,
        "- annotator calibration: {}\n",
        if p.calibration.is_some() { "on" } else { "off" }
    );
    for w in &p.warnings {
        let _ = writeln!(md, "> warning: {w}");
    }

    if let Some(k) = &run.kappa {
        let _ = writeln!(md, "## Inter-annotator agreement\n");
        let _ = writeln!(md, "{} raters, {} items\n", k.raters.len(), k.item_count);
        let _ = writeln!(md, "| variable | kappa | band |\n|---|---|---|");
        for row in &k.rows {
            let kappa = row.kappa.map_or("degenerate".into(), |x| format!("{x:.3}"));
            let band = row.band.map_or("", |b| b.label());
            let _ = writeln!(md, "| {} | {} | {} |", row.variable, kappa, band);
        }
        md.push('\n');
    }

    let _ = writeln!(md, "## Feature model (incumbent offset)\n");
    let _ = writeln!(
        md,
        "converged in {} iterations, deviance {:.4}\n",
        run.fit.model.iterations, run.fit.model.deviance
    );
    md.push_str("```\n");
    md.push_str(&format_wald_table(&run.fit.wald));
    md.push_str("```\n\n");
    for d in &run.fit.model.dropped_columns {
        let _ = writeln!(md, "- dropped `{}`: {:?}", d.name, d.reason);
    }

    let g = &run.gini;
    let _ = writeln!(md, "## Gini comparison\n");
    let _ = writeln!(
        md,
        "{} trials, test fraction {}, {} failed\n",
        g.trials.len(),
        g.options.split_fraction,
        g.failed_trials
    );
    if let Some(s) = &g.summary {
        let _ = writeln!(md, "| model | mean test Gini |\n|---|---|");
        let _ = writeln!(md, "| A (null) | {} |", pct(s.mean_gini_a));
        let _ = writeln!(md, "| B (incumbent) | {} |", pct(s.mean_gini_b));
        let _ = writeln!(md, "| C (incumbent + features) | {} |\n", pct(s.mean_gini_c));
        let _ = writeln!(
            md,
            "C beats B in {}/{} trials; mean improvement {:.2} points.",
            s.win_count,
            s.successful_trials,
            100.0 * s.mean_delta_c_minus_b
        );
    }
    md
}
