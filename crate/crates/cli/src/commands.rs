use std::collections::BTreeSet;
use std::fs::{self, File};
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use streetrisk_core::annotation::{read_annotations, write_annotations, AnnotationRecord};
use streetrisk_core::calibration::CalibrationMap;
use streetrisk_core::eval::{bootstrap_evaluate, BootstrapOptions, LorenzAxis, Resampling};
use streetrisk_core::glm::FitOptions;
use streetrisk_core::kappa::agreement_report;
use streetrisk_core::pipeline::{
    fit_feature_model, load_fixtures, prepare_dataset, read_common_set, render_report, retained_annotators,
    PipelineRun, PrepareOptions, Prepared,
};
use streetrisk_core::portfolio::{ingest_addresses, write_addresses, AddressRegistry};
use streetrisk_core::schema::AnnotationSchema;
use streetrisk_core::synth::{export_fixtures, generate_portfolio, SynthConfig, ADDRESSES_FILE, SCHEMA_FILE};
use streetrisk_imagery::{
    geocode_registry, write_placeholder_fixtures, FetchOutcome, FixtureProvider, GeocodeConfig, Geocoder,
    ImageCache, ImageProvider, ImageRequest, ImageryClient, LiveConfig, LiveProvider, RateLimiter, SystemClock,
    View,
};
use streetrisk_service::{CampaignConfig, Service};

use crate::error::{CliError, Result};
use crate::{
    Axis, CalibrateArgs, Command, DatasetArgs, EvalArgs, EvaluateArgs, FetchArgs, FitArgs, Format, GeocodeArgs,
    ImageScope, KappaArgs, ProviderArgs, ReportArgs, Sampling, ServeArgs, SynthArgs,
};

/// Imagery fixtures written next to synthetic data.
const IMAGERY_DIR: &str = "imagery";

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Geocode(a) => geocode(a),
        Command::FetchImages(a) => fetch_images(a),
        Command::Serve(a) => serve(a),
        Command::Kappa(a) => kappa(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Fit(a) => fit(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Report(a) => report(a),
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| CliError::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

fn print_json<T: Serialize>(value: &T) {
    print!("{}", pretty(value));
}

fn load_schema(path: Option<&Path>) -> Result<AnnotationSchema> {
    Ok(match path {
        Some(p) => AnnotationSchema::load(p)?,
        None => AnnotationSchema::standard(),
    })
}

fn synth(args: SynthArgs) -> Result<()> {
    let mut config = match (&args.config, args.null) {
        (Some(path), _) => SynthConfig::load(path)?,
        (None, true) => SynthConfig::null_effects(),
        (None, false) => SynthConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let generated = generate_portfolio(&config)?;
    export_fixtures(&generated, &args.out)?;

    let with_images: Vec<&str> = match args.images {
        ImageScope::None => Vec::new(),
        ImageScope::Common => generated.common_set.iter().map(String::as_str).collect(),
        ImageScope::All => generated
            .addresses
            .iter()
            .filter(|a| a.location.is_some())
            .map(|a| a.address_id.as_str())
            .collect(),
    };
    let street_missing: BTreeSet<&str> = generated
        .truth
        .addresses
        .iter()
        .filter(|a| a.street_view_missing)
        .map(|a| a.address_id.as_str())
        .collect();
    write_placeholder_fixtures(
        &args.out.join(IMAGERY_DIR),
        &generated.addresses,
        "PL",
        "DE",
        &with_images,
        |id| street_missing.contains(id),
    )?;
    print_json(&json!({
        "out": args.out,
        "seed": config.seed,
        "policies": generated.policies.len(),
        "addresses": generated.addresses.len(),
        "annotations": generated.annotations.len(),
        "common_set": generated.common_set.len(),
        "imagery_fixtures": args.out.join(IMAGERY_DIR),
        "placeholder_images": with_images.len(),
    }));
    Ok(())
}

struct Backend {
    geocoder: Arc<dyn Geocoder>,
    images: Arc<dyn ImageProvider>,
}

fn backend(args: &ProviderArgs) -> Result<Backend> {
    if args.live {
        let config = match &args.live_config {
            Some(p) => read_json(p)?,
            None => LiveConfig::default(),
        };
        let live = Arc::new(LiveProvider::from_env(config)?);
        return Ok(Backend {
            geocoder: live.clone(),
            images: live,
        });
    }
    let dir = args
        .fixtures
        .as_ref()
        .ok_or_else(|| CliError::Usage("pass --fixtures DIR or --live".into()))?;
    let fx = Arc::new(FixtureProvider::open(dir)?);
    Ok(Backend {
        geocoder: fx.clone(),
        images: fx,
    })
}

fn read_registry(path: &Path) -> Result<AddressRegistry> {
    Ok(ingest_addresses(open(path)?)?)
}

fn geocode(args: GeocodeArgs) -> Result<()> {
    let backend = backend(&args.provider)?;
    let mut registry = read_registry(&args.addresses)?;
    let config = GeocodeConfig {
        domestic_country: args.domestic.to_ascii_uppercase(),
    };
    let summary = geocode_registry(backend.geocoder.as_ref(), &mut registry, &config);
    let out = args.out.as_ref().unwrap_or(&args.addresses);
    let mut buf = Vec::new();
    write_addresses(&mut buf, registry.entries())?;
    write(out, buf)?;
    print_json(&json!({ "out": out, "summary": summary }));
    Ok(())
}

fn fetch_images(args: FetchArgs) -> Result<()> {
    let backend = backend(&args.provider)?;
    let registry = read_registry(&args.addresses)?;
    let views = args
        .views
        .iter()
        .map(|v| v.trim().parse::<View>())
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let only: Option<BTreeSet<String>> = match &args.only {
        Some(p) => Some(read_common_set(p)?.into_iter().collect()),
        None => None,
    };
    let mut jobs = Vec::new();
    let mut skipped = 0usize;
    for entry in registry.entries() {
        if only.as_ref().is_some_and(|o| !o.contains(&entry.address_id)) {
            continue;
        }
        if entry.status != streetrisk_core::portfolio::AddressStatus::Resolved {
            skipped += 1;
            continue;
        }
        for &view in &views {
            jobs.push((ImageRequest::new(entry.address_id.as_str(), view), entry.clone()));
        }
    }
    let rate = (args.rate > 0.0).then_some(args.rate);
    let client = ImageryClient::new(
        backend.images,
        ImageCache::open(&args.cache)?,
        RateLimiter::new(rate, Arc::new(SystemClock::default())),
    )
    .with_retries(args.retries, Duration::from_millis(500));
    let results = client.fetch_all(&jobs, args.parallelism);
    let (mut images, mut missing) = (0usize, 0usize);
    let mut failures = Vec::new();
    for ((req, _), r) in jobs.iter().zip(&results) {
        match r {
            Ok(FetchOutcome::Image(_)) => images += 1,
            Ok(FetchOutcome::Missing) => missing += 1,
            Err(e) => failures.push(json!({
                "address_id": req.address_id, "view": req.view, "error": e.to_string()
            })),
        }
    }
    print_json(&json!({
        "cache": args.cache,
        "requests": jobs.len(),
        "images": images,
        "missing_imagery": missing,
        "skipped_unresolved": skipped,
        "failures": failures,
    }));
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::FetchFailures {
            failed: failures.len(),
            total: jobs.len(),
        })
    }
}

fn serve(args: ServeArgs) -> Result<()> {
    let schema_path = args.data.join(SCHEMA_FILE);
    let schema = load_schema(schema_path.exists().then_some(schema_path.as_path()))?;
    let mut registry = read_registry(&args.data.join(ADDRESSES_FILE))?;
    registry.exclude_non_resolved()?;
    let addresses: Vec<String> = registry.included().map(|e| e.address_id.clone()).collect();
    let mut config = match &args.config {
        Some(p) => CampaignConfig::load(p)?,
        None => CampaignConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let cache = args.cache.as_ref().map(ImageCache::open).transpose()?;
    let service = Arc::new(Service::open(&args.state, schema, &addresses, &config, cache)?);
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .map_err(|e| CliError::Usage(format!("bad listen address: {e}")))?;
    eprintln!(
        "{}",
        json!({ "listening": addr.to_string(), "annotators": service.campaign().annotators.len(),
                "common_set": service.campaign().common_set.len() })
    );
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::io("<tokio runtime>", e))?;
    rt.block_on(streetrisk_service::serve(service, addr, args.assets))
        .map_err(|e| CliError::io(addr.to_string(), e))
}

fn read_raw_annotations(path: &Path, schema: &AnnotationSchema) -> Result<Vec<AnnotationRecord>> {
    Ok(read_annotations(open(path)?, schema, true)?)
}

fn kappa(args: KappaArgs) -> Result<()> {
    let schema = load_schema(args.schema.schema.as_deref())?;
    let records = read_raw_annotations(&args.annotations, &schema)?;
    let common = read_common_set(&args.common)?;
    let raters = (!args.raters.is_empty()).then_some(args.raters.as_slice());
    let report = agreement_report(&records, &schema, &common, raters)?;
    let text = match args.format {
        Format::Csv => report.to_csv(),
        Format::Json => pretty(&report),
    };
    match &args.out {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn calibrate(args: CalibrateArgs) -> Result<()> {
    let schema = load_schema(args.schema.schema.as_deref())?;
    let records = read_raw_annotations(&args.annotations, &schema)?;
    let common = match &args.common {
        Some(p) => read_common_set(p)?,
        None => Vec::new(),
    };
    let annotators: BTreeSet<String> = if args.annotators.is_empty() {
        retained_annotators(&records, &common).into_iter().collect()
    } else {
        args.annotators.iter().cloned().collect()
    };
    let chosen: Vec<AnnotationRecord> = records
        .into_iter()
        .filter(|r| annotators.contains(&r.annotator_id))
        .collect();
    let common: BTreeSet<&str> = common.iter().map(String::as_str).collect();
    let basis: Vec<AnnotationRecord> = chosen
        .iter()
        .filter(|r| !common.contains(r.address_id.as_str()))
        .cloned()
        .collect();
    let basis = if basis.is_empty() { &chosen } else { &basis };
    let (map, warnings) = CalibrationMap::fit(basis, &schema);
    let calibrated = map.apply(&chosen);
    let mut buf = Vec::new();
    write_annotations(&mut buf, &calibrated, &schema)?;
    write(&args.out, buf)?;
    if let Some(p) = &args.map {
        write(p, pretty(&map))?;
    }
    print_json(&json!({
        "out": args.out,
        "annotators": annotators,
        "records": calibrated.len(),
        "fitted_on": basis.len(),
        "warnings": warnings,
    }));
    Ok(())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum VariableList {
    Plain(Vec<String>),
    Wrapped { variables: Vec<String> },
}

fn prepare(args: &DatasetArgs) -> Result<Prepared> {
    let mut fixtures = load_fixtures(&args.dataset)?;
    if let Some(p) = &args.annotations {
        // calibrated files carry fractional ordinals
        fixtures.annotations = read_annotations(open(p)?, &fixtures.schema, false)?;
    }
    let options = PrepareOptions {
        calibrate: !args.no_calibrate,
        annotators: args.annotators.clone(),
    };
    let mut prepared = prepare_dataset(&fixtures, &options)?;
    if let Some(p) = &args.variables {
        prepared.variables = match read_json::<VariableList>(p)? {
            VariableList::Plain(v) | VariableList::Wrapped { variables: v } => v,
        };
    }
    Ok(prepared)
}

fn bootstrap_options(args: &EvalArgs) -> BootstrapOptions {
    BootstrapOptions {
        trials: args.trials,
        split_fraction: args.split,
        base_seed: args.seed,
        resampling: match args.resampling {
            Sampling::Split => Resampling::Split,
            Sampling::WithReplacement => Resampling::WithReplacement,
        },
        axis: match args.axis {
            Axis::PolicyCount => LorenzAxis::PolicyCount,
            Axis::Exposure => LorenzAxis::Exposure,
        },
        fit: FitOptions::default(),
    }
}

fn fit(args: FitArgs) -> Result<()> {
    let prepared = prepare(&args.data)?;
    let fit = fit_feature_model(&prepared.dataset, &prepared.variables, &FitOptions::default())?;
    if let Some(p) = &args.wald {
        let mut csv = String::from("term,estimate,std_error,z,p_value\n");
        for r in &fit.wald {
            let p = r.p_value.map_or(String::new(), |p| p.to_string());
            csv.push_str(&format!("{},{},{},{},{}\n", r.name, r.estimate, r.std_error, r.z, p));
        }
        write(p, csv)?;
    }
    match &args.out {
        Some(p) => {
            write(p, pretty(&fit))?;
            print!("{}", streetrisk_core::glm::format_wald_table(&fit.wald));
        }
        None => print_json(&fit),
    }
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let prepared = prepare(&args.data)?;
    let report = bootstrap_evaluate(&prepared.dataset, &prepared.variables, &bootstrap_options(&args.eval))?;
    write(&args.out, pretty(&report))?;
    write(&args.plot, report.to_plot_csv())?;
    print_json(&json!({
        "out": args.out,
        "plot": args.plot,
        "trials": report.trials.len(),
        "failed_trials": report.failed_trials,
        "summary": report.summary,
    }));
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let fixtures = load_fixtures(&args.data.dataset)?;
    let kappa = if fixtures.common_set.is_empty() {
        None
    } else {
        Some(agreement_report(&fixtures.annotations, &fixtures.schema, &fixtures.common_set, None)?)
    };
    let prepared = prepare(&args.data)?;
    let options = bootstrap_options(&args.eval);
    let fit = fit_feature_model(&prepared.dataset, &prepared.variables, &options.fit)?;
    let gini = bootstrap_evaluate(&prepared.dataset, &prepared.variables, &options)?;
    let md = render_report(&PipelineRun {
        kappa,
        prepared,
        fit,
        gini,
    });
    match &args.out {
        Some(p) => write(p, md),
        None => {
            print!("{md}");
            Ok(())
        }
    }
}
