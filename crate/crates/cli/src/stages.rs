//! One function per pipeline stage. Stages communicate only through files
//! in the output directory, so each can be re-run on its own.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use readmit_core::data::{
    generate_synthetic, load_csv, split_stratified, CsvOptions, DataTable, Dataset, Schema,
    SyntheticConfig,
};
use readmit_core::diagnostics::{
    calibration_report, default_threshold_grid, lr_sweep, write_calibration_csv, write_lr_csv,
    CalibrationReport, LrCurve,
};
use readmit_core::evaluation::{
    cross_validate_raw, full_metrics, greedy_forward_select, pr_curve, project, roc_curve,
    write_pr_csv, write_roc_csv, CvConfig, FoldReport, MetricsReport, SelectionSettings,
    SelectionTrace,
};
use readmit_core::explain::{
    beeswarm_points, forest_shap, summary_ranking, write_beeswarm_csv, FeatureRanking,
};
use readmit_core::learner::{fit_forest, ForestParams, RandomForest};
use readmit_core::preprocess::{
    self, apply_filters, clinical_preset, undersample_indices, FilterReport, FilterRule,
    FittedPreprocessor,
};
use readmit_core::stats::{cohort_table, format_cohort_text, write_cohort_csv};
use readmit_core::{plot, Matrix};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};

/// Evaluation sets, in reporting order.
pub const SETS: [&str; 3] = ["cv", "blind", "external"];

pub struct Context {
    pub config: PipelineConfig,
    pub seed: u64,
    pub out: PathBuf,
    pub record_timings: bool,
}

impl Context {
    /// `config` must already carry the effective seed and output directory.
    pub fn new(config: PipelineConfig, record_timings: bool) -> CliResult<Self> {
        config.validate()?;
        let seed = config.seed.expect("validated");
        let out = config
            .out
            .clone()
            .ok_or_else(|| CliError::Config("no output directory".into()))?;
        Ok(Self {
            config,
            seed,
            out,
            record_timings,
        })
    }

    pub fn stage_dir(&self, stage: &str) -> CliResult<PathBuf> {
        let dir = self.out.join(stage);
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(dir)
    }

    fn artifact(&self, stage: &str, name: &str) -> PathBuf {
        self.out.join(stage).join(name)
    }

    pub fn train_path(&self) -> PathBuf {
        self.config
            .paths
            .train
            .clone()
            .unwrap_or_else(|| self.artifact("data", "train.csv"))
    }

    pub fn schema_path(&self) -> PathBuf {
        self.config
            .paths
            .schema
            .clone()
            .unwrap_or_else(|| self.artifact("data", "schema.json"))
    }

    /// Optional evaluation input: a configured path that does not exist is
    /// reported and treated as absent.
    fn optional_input(&self, set: &str) -> Option<PathBuf> {
        let configured = match set {
            "blind" => self.config.paths.blind.clone(),
            "external" => self.config.paths.external.clone(),
            _ => None,
        };
        match configured {
            Some(p) if p.exists() => Some(p),
            Some(p) => {
                log::warn!("{set} dataset {} not found; section marked absent", p.display());
                None
            }
            None => Some(self.artifact("data", &format!("{set}.csv"))).filter(|p| p.exists()),
        }
    }

    fn forest_params(&self) -> ForestParams {
        ForestParams {
            seed: self.seed,
            ..self.config.forest.clone()
        }
    }

    fn cv_config(&self, k: usize) -> CvConfig {
        CvConfig {
            k,
            seed: self.seed,
            undersample_ratio: self.config.preprocess.undersample_ratio,
            threshold: self.config.cv.threshold,
        }
    }

    fn schema(&self) -> CliResult<Schema> {
        let path = require("preprocess", self.schema_path())?;
        Ok(Schema::load(path)?)
    }

    fn preprocessor(&self, stage: &'static str) -> CliResult<FittedPreprocessor> {
        let path = require(stage, self.artifact("preprocess", "preprocessor.json"))?;
        Ok(FittedPreprocessor::load(path)?)
    }

    fn model(&self, stage: &'static str) -> CliResult<RandomForest> {
        let path = require(stage, self.artifact("train", "model.json"))?;
        Ok(RandomForest::load(path)?)
    }
}

fn require(stage: &'static str, path: PathBuf) -> CliResult<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::MissingInput { stage, path })
    }
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn write_with(
    path: &Path,
    f: impl FnOnce(&mut Vec<u8>) -> readmit_core::Result<()>,
) -> CliResult<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    write_bytes(path, &buf)
}

fn load_table(path: &Path, schema: &Schema) -> CliResult<DataTable> {
    let (table, report) = load_csv(path, schema, &CsvOptions::default())?;
    for (col, n) in &report.unparseable {
        log::warn!("{}: {n} unparseable value(s) in '{col}' read as missing", path.display());
    }
    Ok(table)
}

/// Runs a stage, optionally recording its wall time.
pub fn timed(ctx: &Context, stage: &str, f: impl FnOnce(&Context) -> CliResult<()>) -> CliResult<()> {
    let start = Instant::now();
    log::info!("stage {stage}: start");
    f(ctx)?;
    let seconds = start.elapsed().as_secs_f64();
    log::info!("stage {stage}: done in {seconds:.2}s");
    if ctx.record_timings {
        write_json(
            &ctx.out.join("timings").join(format!("{stage}.json")),
            &serde_json::json!({ "stage": stage, "seconds": seconds }),
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// synth

fn synth_config(ctx: &Context, preset: &str, n_rows: usize, seed: u64) -> CliResult<SyntheticConfig> {
    Ok(match &ctx.config.synth.custom {
        Some(custom) => SyntheticConfig {
            n_rows,
            seed,
            ..custom.clone()
        },
        None => SyntheticConfig::preset(preset, n_rows, seed)?,
    })
}

pub fn synth(ctx: &Context) -> CliResult<()> {
    let s = &ctx.config.synth;
    let dir = ctx.stage_dir("data")?;
    let n_rows = s.custom.as_ref().map_or(s.n_rows, |c| c.n_rows);
    let cfg = synth_config(ctx, &s.preset, n_rows, ctx.seed)?;
    let (table, truth) = generate_synthetic(&cfg)?;
    let (train, blind) = split_stratified(&table, s.blind_fraction, ctx.seed)?;
    train.save_csv(dir.join("train.csv"))?;
    blind.save_csv(dir.join("blind.csv"))?;
    table.schema().save(dir.join("schema.json"))?;
    write_json(&dir.join("ground_truth.json"), &truth)?;
    log::info!(
        "synth: {} rows ({} positive), {} train / {} blind",
        truth.n_rows,
        truth.n_positive,
        train.n_rows(),
        blind.n_rows()
    );
    if s.external_rows > 0 {
        let cfg = synth_config(ctx, &s.external_preset, s.external_rows, ctx.seed.wrapping_add(1))?;
        let (external, truth) = generate_synthetic(&cfg)?;
        if external.schema() != table.schema() {
            return Err(CliError::Config(format!(
                "external preset '{}' does not share the training schema",
                s.external_preset
            )));
        }
        external.save_csv(dir.join("external.csv"))?;
        write_json(&dir.join("external_ground_truth.json"), &truth)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// preprocess

#[derive(Debug, Serialize)]
struct FilterSummary {
    rules: Vec<String>,
    skipped_rules: Vec<String>,
    train: FilterReport,
    blind: Option<FilterReport>,
    external: Option<FilterReport>,
}

/// Configured filters, or the clinical preset restricted to columns the
/// schema has. Skipped preset rules are returned as text.
fn filter_rules(ctx: &Context, schema: &Schema) -> (Vec<FilterRule>, Vec<String>) {
    if let Some(rules) = &ctx.config.filters {
        return (rules.clone(), Vec::new());
    }
    let (kept, skipped): (Vec<_>, Vec<_>) = clinical_preset()
        .into_iter()
        .partition(|r| schema.index_of(&r.column).is_some());
    for r in &skipped {
        log::warn!("preset filter '{r}' skipped: column not in schema");
    }
    (kept, skipped.iter().map(ToString::to_string).collect())
}

pub fn preprocess(ctx: &Context) -> CliResult<()> {
    let schema = ctx.schema()?;
    let dir = ctx.stage_dir("preprocess")?;
    let train_raw = load_table(&require("preprocess", ctx.train_path())?, &schema)?;
    let (rules, skipped_rules) = filter_rules(ctx, &schema);
    let (train, train_report) = apply_filters(&train_raw, &rules)?;
    let pre = preprocess::fit(&train, &ctx.config.preprocess)?;
    for d in &pre.dropped_columns {
        log::info!("dropped '{}' ({:.1}% missing)", d.name, 100.0 * d.missing_fraction);
    }
    train.save_csv(dir.join("train_filtered.csv"))?;
    pre.transform(&train)?.save_csv(dir.join("train_processed.csv"))?;
    pre.save(dir.join("preprocessor.json"))?;

    let mut summary = FilterSummary {
        rules: rules.iter().map(ToString::to_string).collect(),
        skipped_rules,
        train: train_report,
        blind: None,
        external: None,
    };
    for set in ["blind", "external"] {
        let Some(path) = ctx.optional_input(set) else {
            continue;
        };
        let raw = load_table(&path, &schema)?;
        let (filtered, report) = apply_filters(&raw, &rules)?;
        filtered.save_csv(dir.join(format!("{set}_filtered.csv")))?;
        pre.transform(&filtered)?
            .save_csv(dir.join(format!("{set}_processed.csv")))?;
        if set == "blind" {
            summary.blind = Some(report);
        } else {
            summary.external = Some(report);
        }
    }
    write_json(&dir.join("filter_report.json"), &summary)?;

    let characteristics: Vec<String> = schema
        .feature_indices()
        .into_iter()
        .map(|j| schema.columns()[j].name.clone())
        .collect();
    let cohort = cohort_table(&train, &schema.label().name, &characteristics)?;
    write_with(&dir.join("cohort.csv"), |w| write_cohort_csv(&cohort, w))?;
    write_bytes(&dir.join("cohort.txt"), format_cohort_text(&cohort).as_bytes())
}

fn processed_dataset(ctx: &Context, stage: &'static str, set: &str) -> CliResult<Option<Dataset>> {
    let path = ctx.artifact("preprocess", &format!("{set}_processed.csv"));
    if !path.exists() {
        if set == "train" {
            return Err(CliError::MissingInput { stage, path });
        }
        return Ok(None);
    }
    let schema = ctx.preprocessor(stage)?.output_schema()?;
    Ok(Some(load_table(&path, &schema)?.to_dataset()?))
}

// ---------------------------------------------------------------------------
// select

#[derive(Debug, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub selected: Vec<String>,
    pub trace: Option<SelectionTrace>,
}

pub fn select(ctx: &Context) -> CliResult<()> {
    let data = processed_dataset(ctx, "select", "train")?.expect("train is required");
    let dir = ctx.stage_dir("select")?;
    let sel = &ctx.config.selection;
    let summary = if sel.enabled {
        let params = ForestParams {
            n_trees: sel.n_trees,
            ..ctx.forest_params()
        };
        let cv = ctx.cv_config(sel.k);
        let settings = SelectionSettings {
            max_features: sel.max_features,
            min_gain: sel.min_gain,
        };
        let trace = greedy_forward_select(&data, &params, &cv, &settings)?;
        write_with(&dir.join("selection_trace.csv"), |w| trace.write_csv(w))?;
        log::info!("selected {} feature(s), stop: {:?}", trace.picks.len(), trace.stop_reason);
        SelectionSummary {
            selected: trace.selected(),
            trace: Some(trace),
        }
    } else {
        SelectionSummary {
            selected: data.feature_names.clone(),
            trace: None,
        }
    };
    if summary.selected.is_empty() {
        return Err(CliError::Core(readmit_core::Error::Numeric(
            "selection accepted no feature; every candidate failed to improve the score".into(),
        )));
    }
    write_json(&dir.join("selection.json"), &summary)
}

/// Selected features, or every processed feature when selection has not run.
fn selected_features(ctx: &Context, data: &Dataset) -> CliResult<Vec<String>> {
    let path = ctx.artifact("select", "selection.json");
    if path.exists() {
        Ok(read_json::<SelectionSummary>(&path)?.selected)
    } else {
        log::info!("no selection found; using all {} features", data.feature_names.len());
        Ok(data.feature_names.clone())
    }
}

// ---------------------------------------------------------------------------
// train

#[derive(Debug, Serialize)]
struct TrainingSummary {
    n_rows: usize,
    n_positive: usize,
    features: Vec<String>,
    params: ForestParams,
    undersample_ratio: Option<f64>,
    warning: Option<String>,
}

pub fn train(ctx: &Context) -> CliResult<()> {
    let data = processed_dataset(ctx, "train", "train")?.expect("train is required");
    let features = selected_features(ctx, &data)?;
    let mut data = project(&data, &features);
    let mut warning = None;
    if let Some(r) = ctx.config.preprocess.undersample_ratio {
        let sample = undersample_indices(&data.y, r, ctx.seed)?;
        if let Some(w) = &sample.warning {
            log::warn!("{w}");
        }
        warning = sample.warning;
        data = data.select_rows(&sample.rows);
    }
    let params = ctx.forest_params();
    let model = fit_forest(&data, &params)?;
    let dir = ctx.stage_dir("train")?;
    model.save(dir.join("model.json"))?;
    write_json(
        &dir.join("training_summary.json"),
        &TrainingSummary {
            n_rows: data.n_rows(),
            n_positive: data.y.iter().filter(|&&v| v == 1).count(),
            features,
            params,
            undersample_ratio: ctx.config.preprocess.undersample_ratio,
            warning,
        },
    )
}

// ---------------------------------------------------------------------------
// evaluate

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SetSummary {
    pub n: usize,
    pub n_positive: usize,
    pub metrics: Option<MetricsReport>,
    pub note: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CvSummary {
    pub k: usize,
    #[serde(flatten)]
    pub summary: SetSummary,
    pub pooled: MetricsReport,
    pub folds: Vec<FoldReport>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub threshold: f64,
    pub features: Vec<String>,
    pub cv: CvSummary,
    pub blind: Option<SetSummary>,
    pub external: Option<SetSummary>,
    pub absent: Vec<String>,
    pub cv_blind_auc_gap: Option<f64>,
}

fn write_predictions(path: &Path, y: &[u8], p: &[f64]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Core(e.into());
    w.write_record(["row", "label", "probability"]).map_err(err)?;
    for (i, (label, prob)) in y.iter().zip(p).enumerate() {
        w.write_record([
            i.to_string(),
            label.to_string(),
            readmit_core::data::format_number(*prob),
        ])
        .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::io(path, e.into_error()))?;
    write_bytes(path, &bytes)
}

pub fn read_predictions(path: &Path) -> CliResult<(Vec<u8>, Vec<f64>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Core(e.into()))?;
    let (mut y, mut p) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::Core(e.into()))?;
        let bad = || CliError::Core(readmit_core::Error::Data(format!("malformed prediction row in {}", path.display())));
        y.push(rec.get(1).and_then(|v| v.parse().ok()).ok_or_else(bad)?);
        p.push(rec.get(2).and_then(|v| v.parse().ok()).ok_or_else(bad)?);
    }
    Ok((y, p))
}

fn summarize(dir: &Path, set: &str, y: &[u8], p: &[f64], threshold: f64) -> CliResult<SetSummary> {
    write_predictions(&dir.join(format!("predictions_{set}.csv")), y, p)?;
    let n_positive = y.iter().filter(|&&v| v == 1).count();
    let (metrics, note) = match full_metrics(y, p, threshold) {
        Ok(m) => {
            let roc = roc_curve(y, p)?;
            write_with(&dir.join(format!("roc_{set}.csv")), |w| write_roc_csv(&roc, w))?;
            let pr = pr_curve(y, p)?;
            write_with(&dir.join(format!("pr_{set}.csv")), |w| write_pr_csv(&pr, w))?;
            (Some(m), None)
        }
        Err(e) => {
            log::warn!("{set}: metrics undefined: {e}");
            (None, Some(e.to_string()))
        }
    };
    Ok(SetSummary {
        n: y.len(),
        n_positive,
        metrics,
        note,
    })
}

pub fn evaluate(ctx: &Context) -> CliResult<()> {
    let model = ctx.model("evaluate")?;
    let features = model.feature_names().to_vec();
    let schema = ctx.schema()?;
    let dir = ctx.stage_dir("evaluate")?;
    let threshold = ctx.config.cv.threshold;

    let train = load_table(
        &require("evaluate", ctx.artifact("preprocess", "train_filtered.csv"))?,
        &schema,
    )?;
    let cv = ctx.cv_config(ctx.config.cv.k);
    let result = cross_validate_raw(
        &train,
        &ctx.config.preprocess,
        Some(&features),
        &ctx.forest_params(),
        &cv,
    )?;
    let y = train.labels();
    write_predictions(&dir.join("predictions_cv.csv"), &y, &result.oof)?;
    let roc = roc_curve(&y, &result.oof)?;
    write_with(&dir.join("roc_cv.csv"), |w| write_roc_csv(&roc, w))?;
    let pr = pr_curve(&y, &result.oof)?;
    write_with(&dir.join("pr_cv.csv"), |w| write_pr_csv(&pr, w))?;
    let cv_summary = CvSummary {
        k: cv.k,
        summary: SetSummary {
            n: y.len(),
            n_positive: y.iter().filter(|&&v| v == 1).count(),
            metrics: Some(result.mean),
            note: (!result.complete()).then(|| "some folds held a single class".to_string()),
        },
        pooled: result.pooled,
        folds: result.folds,
    };

    let mut sets: [Option<SetSummary>; 2] = [None, None];
    let mut absent = Vec::new();
    for (slot, set) in sets.iter_mut().zip(["blind", "external"]) {
        match processed_dataset(ctx, "evaluate", set)? {
            Some(data) => {
                let data = project(&data, &features);
                let p = model.predict_proba(&data.x)?;
                *slot = Some(summarize(&dir, set, &data.y, &p, threshold)?);
            }
            None => {
                log::warn!("{set} set absent");
                absent.push(set.to_string());
            }
        }
    }
    let [blind, external] = sets;
    let cv_blind_auc_gap = match (&cv_summary.summary.metrics, blind.as_ref().and_then(|b| b.metrics)) {
        (Some(c), Some(b)) => Some((c.auc - b.auc).abs()),
        _ => None,
    };
    write_json(
        &dir.join("metrics.json"),
        &EvaluationReport {
            threshold,
            features,
            cv: cv_summary,
            blind,
            external,
            absent,
            cv_blind_auc_gap,
        },
    )
}

/// Labels and probabilities of one evaluation set.
type Predictions = (&'static str, Vec<u8>, Vec<f64>);

fn prediction_sets(ctx: &Context, stage: &'static str) -> CliResult<Vec<Predictions>> {
    let mut out = Vec::new();
    for set in SETS {
        let path = ctx.artifact("evaluate", &format!("predictions_{set}.csv"));
        if path.exists() {
            let (y, p) = read_predictions(&path)?;
            out.push((set, y, p));
        } else if set == "cv" {
            return Err(CliError::MissingInput { stage, path });
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// calibrate

#[derive(Debug, Serialize, Deserialize)]
pub struct SetOutcome<T> {
    pub set: String,
    pub result: Option<T>,
    pub error: Option<String>,
}

pub fn calibrate(ctx: &Context) -> CliResult<()> {
    let sets = prediction_sets(ctx, "calibrate")?;
    let dir = ctx.stage_dir("calibrate")?;
    let mut outcomes: Vec<SetOutcome<CalibrationReport>> = Vec::new();
    for (set, y, p) in sets {
        match calibration_report(&y, &p, ctx.config.diagnostics.calibration_bins) {
            Ok(report) => {
                write_with(&dir.join(format!("calibration_{set}.csv")), |w| {
                    write_calibration_csv(&report.curve, w)
                })?;
                write_bytes(
                    &dir.join(format!("calibration_{set}.svg")),
                    plot::calibration_svg(&report.curve).as_bytes(),
                )?;
                outcomes.push(SetOutcome {
                    set: set.into(),
                    result: Some(report),
                    error: None,
                });
            }
            Err(e) => {
                log::warn!("{set}: calibration failed: {e}");
                outcomes.push(SetOutcome {
                    set: set.into(),
                    result: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    write_json(&dir.join("calibration.json"), &outcomes)
}

// ---------------------------------------------------------------------------
// lr

pub fn lr(ctx: &Context) -> CliResult<()> {
    let sets = prediction_sets(ctx, "lr")?;
    let dir = ctx.stage_dir("lr")?;
    let grid = ctx
        .config
        .diagnostics
        .thresholds
        .clone()
        .unwrap_or_else(default_threshold_grid);
    let pretest = match ctx.config.diagnostics.pretest {
        Some(q) => q,
        None => {
            let y = &sets[0].1;
            y.iter().filter(|&&v| v == 1).count() as f64 / y.len() as f64
        }
    };
    let mut outcomes: Vec<SetOutcome<LrCurve>> = Vec::new();
    for (set, y, p) in &sets {
        match lr_sweep(y, p, &grid, pretest) {
            Ok(curve) => {
                write_with(&dir.join(format!("lr_{set}.csv")), |w| write_lr_csv(&curve, w))?;
                write_bytes(&dir.join(format!("lr_{set}.svg")), plot::lr_svg(&curve).as_bytes())?;
                outcomes.push(SetOutcome {
                    set: set.to_string(),
                    result: Some(curve),
                    error: None,
                });
            }
            Err(e) => {
                log::warn!("{set}: likelihood-ratio sweep failed: {e}");
                outcomes.push(SetOutcome {
                    set: set.to_string(),
                    result: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    write_json(&dir.join("lr.json"), &outcomes)
}

// ---------------------------------------------------------------------------
// explain

#[derive(Debug, Serialize, Deserialize)]
pub struct ExplainSummary {
    pub set: String,
    pub n_rows: usize,
    pub base_value: f64,
    /// Largest `|base + sum(attributions) - prediction|` over explained rows.
    pub local_accuracy_max_error: f64,
    pub ranking: FeatureRanking,
}

pub fn explain(ctx: &Context) -> CliResult<()> {
    let model = ctx.model("explain")?;
    let (set, data) = match processed_dataset(ctx, "explain", "blind")? {
        Some(d) => ("blind", d),
        None => (
            "train",
            processed_dataset(ctx, "explain", "train")?.expect("train is required"),
        ),
    };
    let data = project(&data, model.feature_names());
    let max_rows = ctx.config.explain.max_rows;
    let n = if max_rows == 0 { data.n_rows() } else { data.n_rows().min(max_rows) };
    let rows: Vec<usize> = (0..n).collect();
    let x: Matrix = data.x.select_rows(&rows);
    let shap = forest_shap(&model, &x)?;
    let predictions = model.predict_proba(&x)?;
    let local_accuracy_max_error = shap
        .reconstructed()
        .iter()
        .zip(&predictions)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let ranking = summary_ranking(&shap, ctx.config.explain.top_k);

    let raw_path = ctx.artifact("preprocess", &format!("{set}_filtered.csv"));
    let raw = if raw_path.exists() {
        Some(load_table(&raw_path, &ctx.schema()?)?.select_rows(&rows))
    } else {
        None
    };
    let points = beeswarm_points(&shap, &x, &ranking, raw.as_ref())?;

    let dir = ctx.stage_dir("explain")?;
    write_with(&dir.join("shap.csv"), |w| shap.write_csv(w))?;
    write_with(&dir.join("beeswarm.csv"), |w| write_beeswarm_csv(&points, w))?;
    write_bytes(
        &dir.join("beeswarm.svg"),
        plot::beeswarm_svg(&points, &ranking).as_bytes(),
    )?;
    write_json(
        &dir.join("explain.json"),
        &ExplainSummary {
            set: set.into(),
            n_rows: n,
            base_value: shap.base_value,
            local_accuracy_max_error,
            ranking,
        },
    )
}
