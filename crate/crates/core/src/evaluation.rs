//! Threshold and ranking metrics, stratified k-fold cross-validation and
//! greedy forward feature selection.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{format_number, DataTable, Dataset};
use crate::error::{Error, Result};
use crate::learner::{fit_forest, ForestParams};
use crate::matrix::Matrix;
use crate::preprocess::{self, undersample_indices, PreprocessConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// tp / (tp + fn); 0 when there are no positives.
    pub fn sensitivity(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// tn / (tn + fp); 0 when there are no negatives.
    pub fn specificity(&self) -> f64 {
        ratio(self.tn, self.tn + self.fp)
    }

    /// tp / (tp + fp); 0 when nothing is predicted positive.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn check_lengths(y: &[u8], p: &[f64]) -> Result<()> {
    if y.len() != p.len() {
        return Err(Error::invalid(format!(
            "{} labels but {} scores",
            y.len(),
            p.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::invalid("metrics need at least one row"));
    }
    Ok(())
}

/// Counts outcomes when predicting positive iff `p >= threshold`.
pub fn confusion(y: &[u8], p: &[f64], threshold: f64) -> Result<ConfusionMatrix> {
    check_lengths(y, p)?;
    let mut cm = ConfusionMatrix::default();
    for (&label, &score) in y.iter().zip(p) {
        match (label == 1, score >= threshold) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fn_ += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// Matthews correlation coefficient; 0 when any marginal is empty.
pub fn mcc(cm: &ConfusionMatrix) -> f64 {
    let (tp, fp, tn, fn_) = (cm.tp as f64, cm.fp as f64, cm.tn as f64, cm.fn_ as f64);
    let den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if den == 0.0 {
        return 0.0;
    }
    (tp * tn - fp * fn_) / den.sqrt()
}

/// Average 1-based ranks, ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i+1 ..= j share the same rank
        let rank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

/// Area under the ROC curve via the Mann-Whitney statistic with average
/// ranks: the probability that a random positive outscores a random
/// negative, ties counting one half.
pub fn auc(y: &[u8], scores: &[f64]) -> Result<f64> {
    check_lengths(y, scores)?;
    let n_pos = y.iter().filter(|&&v| v == 1).count();
    let n_neg = y.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Numeric("AUC undefined: only one class present".into()));
    }
    let ranks = average_ranks(scores);
    let rank_sum: f64 = y
        .iter()
        .zip(&ranks)
        .filter(|(&label, _)| label == 1)
        .map(|(_, &r)| r)
        .sum();
    let np = n_pos as f64;
    let u = rank_sum - np * (np + 1.0) / 2.0;
    Ok(u / (np * n_neg as f64))
}

/// Rows ordered by descending score; ties keep input order.
fn descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Step-sum average precision: `sum_k (R_k - R_{k-1}) * P_k` over the
/// descending-score ranking.
pub fn average_precision(y: &[u8], scores: &[f64]) -> Result<f64> {
    check_lengths(y, scores)?;
    let n_pos = y.iter().filter(|&&v| v == 1).count();
    if n_pos == 0 {
        return Err(Error::Numeric("average precision undefined: no positives".into()));
    }
    let mut tp = 0usize;
    let mut ap = 0.0;
    for (k, &i) in descending(scores).iter().enumerate() {
        if y[i] == 1 {
            tp += 1;
            ap += (tp as f64 / (k + 1) as f64) / n_pos as f64;
        }
    }
    Ok(ap)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub auc: f64,
    pub apr: f64,
    pub mcc: f64,
    pub balanced_accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f1: f64,
    pub threshold: f64,
}

impl MetricsReport {
    /// Field-wise mean.
    pub fn mean(reports: &[MetricsReport]) -> Option<MetricsReport> {
        if reports.is_empty() {
            return None;
        }
        let n = reports.len() as f64;
        let avg = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        Some(MetricsReport {
            auc: avg(|r| r.auc),
            apr: avg(|r| r.apr),
            mcc: avg(|r| r.mcc),
            balanced_accuracy: avg(|r| r.balanced_accuracy),
            precision: avg(|r| r.precision),
            recall: avg(|r| r.recall),
            specificity: avg(|r| r.specificity),
            f1: avg(|r| r.f1),
            threshold: reports[0].threshold,
        })
    }
}

pub fn metrics_from_confusion(cm: &ConfusionMatrix) -> (f64, f64, f64, f64, f64) {
    let precision = cm.precision();
    let recall = cm.sensitivity();
    let specificity = cm.specificity();
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, specificity, (recall + specificity) / 2.0, f1)
}

pub fn full_metrics(y: &[u8], p: &[f64], threshold: f64) -> Result<MetricsReport> {
    let cm = confusion(y, p, threshold)?;
    let (precision, recall, specificity, balanced_accuracy, f1) = metrics_from_confusion(&cm);
    Ok(MetricsReport {
        auc: auc(y, p)?,
        apr: average_precision(y, p)?,
        mcc: mcc(&cm),
        balanced_accuracy,
        precision,
        recall,
        specificity,
        f1,
        threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

/// ROC points at every distinct score, from (0, 0) at `+inf` down to (1, 1).
pub fn roc_curve(y: &[u8], scores: &[f64]) -> Result<Vec<RocPoint>> {
    check_lengths(y, scores)?;
    let n_pos = y.iter().filter(|&&v| v == 1).count() as f64;
    let n_neg = y.len() as f64 - n_pos;
    if n_pos == 0.0 || n_neg == 0.0 {
        return Err(Error::Numeric("ROC curve undefined: only one class present".into()));
    }
    let order = descending(scores);
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0.0, 0.0);
    for (k, &i) in order.iter().enumerate() {
        if y[i] == 1 {
            tp += 1.0;
        } else {
            fp += 1.0;
        }
        let last_of_tie = order.get(k + 1).is_none_or(|&j| scores[j] != scores[i]);
        if last_of_tie {
            points.push(RocPoint {
                threshold: scores[i],
                fpr: fp / n_neg,
                tpr: tp / n_pos,
            });
        }
    }
    Ok(points)
}

/// Precision-recall points at every distinct score, highest threshold first.
pub fn pr_curve(y: &[u8], scores: &[f64]) -> Result<Vec<PrPoint>> {
    check_lengths(y, scores)?;
    let n_pos = y.iter().filter(|&&v| v == 1).count() as f64;
    if n_pos == 0.0 {
        return Err(Error::Numeric("PR curve undefined: no positives".into()));
    }
    let order = descending(scores);
    let mut points = Vec::new();
    let mut tp = 0.0;
    for (k, &i) in order.iter().enumerate() {
        if y[i] == 1 {
            tp += 1.0;
        }
        let last_of_tie = order.get(k + 1).is_none_or(|&j| scores[j] != scores[i]);
        if last_of_tie {
            points.push(PrPoint {
                threshold: scores[i],
                recall: tp / n_pos,
                precision: tp / (k + 1) as f64,
            });
        }
    }
    Ok(points)
}

pub fn write_roc_csv<W: Write>(points: &[RocPoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["threshold", "fpr", "tpr"])?;
    for p in points {
        w.write_record([format_number(p.threshold), format_number(p.fpr), format_number(p.tpr)])?;
    }
    w.flush().map_err(|e| Error::io("<roc csv>", e))
}

pub fn write_pr_csv<W: Write>(points: &[PrPoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["threshold", "recall", "precision"])?;
    for p in points {
        w.write_record([
            format_number(p.threshold),
            format_number(p.recall),
            format_number(p.precision),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<pr csv>", e))
}

// ---------------------------------------------------------------------------
// Cross-validation

/// Fold index per row. Each class is shuffled and dealt round-robin, so
/// per-fold class counts differ by at most one.
pub fn stratified_kfold(y: &[u8], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::invalid(format!("k must be at least 2, got {k}")));
    }
    let n_pos = y.iter().filter(|&&v| v == 1).count();
    let minority = n_pos.min(y.len() - n_pos);
    if k > minority {
        return Err(Error::invalid(format!(
            "k = {k} exceeds the minority class count {minority}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0usize; y.len()];
    let mut next = 0usize;
    for class in [1u8, 0] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            folds[i] = next % k;
            next += 1;
        }
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvConfig {
    pub k: usize,
    pub seed: u64,
    /// Undersampling applied to each training portion only.
    pub undersample_ratio: Option<f64>,
    pub threshold: f64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            k: 10,
            seed: 0,
            undersample_ratio: None,
            threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub n_test: usize,
    pub n_test_positive: usize,
    /// `None` when the test fold holds a single class.
    pub metrics: Option<MetricsReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub folds: Vec<FoldReport>,
    /// Mean over folds with defined metrics; for leave-one-out, where no
    /// fold can define AUC, the metrics of the pooled out-of-fold scores.
    pub mean: MetricsReport,
    /// Metrics of the pooled out-of-fold predictions.
    pub pooled: MetricsReport,
    #[serde(skip)]
    pub oof: Vec<f64>,
}

impl CvResult {
    /// Whether every fold produced metrics.
    pub fn complete(&self) -> bool {
        self.folds.iter().all(|f| f.metrics.is_some())
    }
}

/// Fold assignment: stratified for k < n, one row per fold for k = n.
pub fn fold_assignment(y: &[u8], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k == y.len() && k >= 2 {
        return Ok((0..k).collect());
    }
    stratified_kfold(y, k, seed)
}

fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed.wrapping_add((fold as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn assemble(y: &[u8], folds: &[usize], k: usize, oof: Vec<f64>, threshold: f64) -> Result<CvResult> {
    let reports: Vec<FoldReport> = (0..k)
        .map(|f| {
            let rows: Vec<usize> = (0..y.len()).filter(|&i| folds[i] == f).collect();
            let yt: Vec<u8> = rows.iter().map(|&i| y[i]).collect();
            let pt: Vec<f64> = rows.iter().map(|&i| oof[i]).collect();
            let n_pos = yt.iter().filter(|&&v| v == 1).count();
            let metrics = if n_pos > 0 && n_pos < yt.len() {
                Some(full_metrics(&yt, &pt, threshold)?)
            } else {
                None
            };
            Ok(FoldReport {
                fold: f,
                n_test: rows.len(),
                n_test_positive: n_pos,
                metrics,
            })
        })
        .collect::<Result<_>>()?;
    let pooled = full_metrics(y, &oof, threshold)?;
    let defined: Vec<MetricsReport> = reports.iter().filter_map(|r| r.metrics).collect();
    let mean = MetricsReport::mean(&defined).unwrap_or(pooled);
    Ok(CvResult {
        folds: reports,
        mean,
        pooled,
        oof,
    })
}

/// k-fold cross-validation of a random forest on preprocessed data.
pub fn cross_validate(data: &Dataset, params: &ForestParams, cv: &CvConfig) -> Result<CvResult> {
    let folds = fold_assignment(&data.y, cv.k, cv.seed)?;
    cross_validate_with_folds(data, params, cv, &folds)
}

fn train_rows(labels: &[u8], rows: Vec<usize>, cv: &CvConfig, fold: usize) -> Result<Vec<usize>> {
    match cv.undersample_ratio {
        None => Ok(rows),
        Some(r) => {
            let sub: Vec<u8> = rows.iter().map(|&i| labels[i]).collect();
            let sample = undersample_indices(&sub, r, fold_seed(cv.seed, fold))?;
            Ok(sample.rows.into_iter().map(|i| rows[i]).collect())
        }
    }
}

pub fn cross_validate_with_folds(
    data: &Dataset,
    params: &ForestParams,
    cv: &CvConfig,
    folds: &[usize],
) -> Result<CvResult> {
    let k = cv.k;
    let per_fold: Vec<Vec<(usize, f64)>> = (0..k)
        .into_par_iter()
        .map(|f| {
            let test: Vec<usize> = (0..data.n_rows()).filter(|&i| folds[i] == f).collect();
            let train: Vec<usize> = (0..data.n_rows()).filter(|&i| folds[i] != f).collect();
            let train = train_rows(&data.y, train, cv, f)?;
            let model = fit_forest(&data.select_rows(&train), params)?;
            let preds = model.predict_proba(&data.x.select_rows(&test))?;
            Ok(test.into_iter().zip(preds).collect())
        })
        .collect::<Result<_>>()?;
    let mut oof = vec![0.0; data.n_rows()];
    for (i, p) in per_fold.into_iter().flatten() {
        oof[i] = p;
    }
    assemble(&data.y, folds, k, oof, cv.threshold)
}

/// Picks named columns from `data`; names it lacks become zero columns
/// (an indicator level absent from this fold's training rows).
/// Columns `names` of `data` in that order; names absent from `data` become
/// all-zero columns (an indicator for a level never seen).
pub fn project(data: &Dataset, names: &[String]) -> Dataset {
    let n = data.n_rows();
    let cols: Vec<Option<usize>> = names.iter().map(|name| data.feature_index(name)).collect();
    let mut values = Vec::with_capacity(n * names.len());
    for i in 0..n {
        let row = data.x.row(i);
        values.extend(cols.iter().map(|c| c.map_or(0.0, |j| row[j])));
    }
    Dataset {
        x: Matrix::new(n, names.len(), values).expect("shape"),
        y: data.y.clone(),
        feature_names: names.to_vec(),
    }
}

/// Cross-validation on a raw (filtered, unprocessed) table: imputation,
/// encoding and standardisation are re-fitted on each training portion so
/// no test row influences any fold model.
///
/// `features` restricts the model to the named post-encoding columns.
pub fn cross_validate_raw(
    table: &DataTable,
    preprocess_config: &PreprocessConfig,
    features: Option<&[String]>,
    params: &ForestParams,
    cv: &CvConfig,
) -> Result<CvResult> {
    let y = table.labels();
    let folds = fold_assignment(&y, cv.k, cv.seed)?;
    let per_fold: Vec<Vec<(usize, f64)>> = (0..cv.k)
        .into_par_iter()
        .map(|f| {
            let test: Vec<usize> = (0..y.len()).filter(|&i| folds[i] == f).collect();
            let train: Vec<usize> = (0..y.len()).filter(|&i| folds[i] != f).collect();
            let train_table = table.select_rows(&train);
            let pre = preprocess::fit(&train_table, preprocess_config)?;
            let mut train_data = pre.transform(&train_table)?.to_dataset()?;
            let mut test_data = pre.transform(&table.select_rows(&test))?.to_dataset()?;
            if let Some(names) = features {
                train_data = project(&train_data, names);
                test_data = project(&test_data, names);
            }
            let rows = train_rows(&train_data.y, (0..train_data.n_rows()).collect(), cv, f)?;
            let model = fit_forest(&train_data.select_rows(&rows), params)?;
            let preds = model.predict_proba(&test_data.x)?;
            Ok(test.into_iter().zip(preds).collect())
        })
        .collect::<Result<_>>()?;
    let mut oof = vec![0.0; y.len()];
    for (i, p) in per_fold.into_iter().flatten() {
        oof[i] = p;
    }
    assemble(&y, &folds, cv.k, oof, cv.threshold)
}

// ---------------------------------------------------------------------------
// Greedy forward selection

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionSettings {
    pub max_features: Option<usize>,
    /// A round's winner is added only if it improves the score by more than
    /// zero and by at least this much.
    pub min_gain: f64,
}

impl Default for SelectionSettings {
    fn default() -> Self {
        Self {
            max_features: None,
            min_gain: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxFeatures,
    NoImprovement,
    Exhausted,
    AllCandidatesFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pick {
    pub feature: String,
    pub score: f64,
}

/// Winning candidate of one round, whether or not it was added.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRound {
    pub round: usize,
    pub feature: String,
    pub score: f64,
    pub gain: f64,
    pub accepted: bool,
    pub candidates: usize,
    /// Per-fold MCC at the CV threshold and AUC of the winning candidate.
    pub fold_mcc: Vec<f64>,
    pub fold_auc: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub picks: Vec<Pick>,
    pub rounds: Vec<SelectionRound>,
    pub stop_reason: StopReason,
}

impl SelectionTrace {
    pub fn selected(&self) -> Vec<String> {
        self.picks.iter().map(|p| p.feature.clone()).collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["round", "feature", "score", "gain", "accepted", "candidates"])?;
        for r in &self.rounds {
            w.write_record([
                r.round.to_string(),
                r.feature.clone(),
                format_number(r.score),
                format_number(r.gain),
                r.accepted.to_string(),
                r.candidates.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<selection csv>", e))
    }
}

/// Score of the empty bucket: a constant predictor has MCC 0 and AUC 0.5.
pub const EMPTY_BUCKET_SCORE: f64 = 0.25;

/// Selection score: mean of fold MCCs and fold AUCs, averaged together.
pub fn selection_score(fold_mcc: &[f64], fold_auc: &[f64]) -> f64 {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    (mean(fold_mcc) + mean(fold_auc)) / 2.0
}

struct Candidate {
    feature: usize,
    score: f64,
    fold_mcc: Vec<f64>,
    fold_auc: Vec<f64>,
}

fn evaluate_candidate(
    data: &Dataset,
    bucket: &[usize],
    feature: usize,
    params: &ForestParams,
    cv: &CvConfig,
    folds: &[usize],
) -> Candidate {
    let mut cols = bucket.to_vec();
    cols.push(feature);
    let failed = Candidate {
        feature,
        score: f64::NEG_INFINITY,
        fold_mcc: Vec::new(),
        fold_auc: Vec::new(),
    };
    match cross_validate_with_folds(&data.select_features(&cols), params, cv, folds) {
        Ok(res) if res.complete() => {
            let metrics: Vec<MetricsReport> = res.folds.iter().filter_map(|f| f.metrics).collect();
            let fold_mcc: Vec<f64> = metrics.iter().map(|m| m.mcc).collect();
            let fold_auc: Vec<f64> = metrics.iter().map(|m| m.auc).collect();
            Candidate {
                feature,
                score: selection_score(&fold_mcc, &fold_auc),
                fold_mcc,
                fold_auc,
            }
        }
        Ok(_) => failed,
        Err(e) => {
            log::debug!("candidate {} failed: {e}", data.feature_names[feature]);
            failed
        }
    }
}

/// Bottom-up greedy selection: start from an empty bucket and, each round,
/// add the feature whose cross-validated score `(MCC + AUC) / 2` is highest.
pub fn greedy_forward_select(
    data: &Dataset,
    params: &ForestParams,
    cv: &CvConfig,
    settings: &SelectionSettings,
) -> Result<SelectionTrace> {
    let p = data.feature_names.len();
    if p == 0 {
        return Err(Error::invalid("greedy selection needs at least one feature"));
    }
    let folds = fold_assignment(&data.y, cv.k, cv.seed)?;
    let cap = settings.max_features.unwrap_or(p).min(p);
    let mut bucket: Vec<usize> = Vec::new();
    let mut picks = Vec::new();
    let mut rounds = Vec::new();
    let mut current = EMPTY_BUCKET_SCORE;
    let stop_reason = loop {
        if bucket.len() >= cap {
            break if cap < p {
                StopReason::MaxFeatures
            } else {
                StopReason::Exhausted
            };
        }
        let remaining: Vec<usize> = (0..p).filter(|f| !bucket.contains(f)).collect();
        let results: Vec<Candidate> = remaining
            .par_iter()
            .map(|&f| evaluate_candidate(data, &bucket, f, params, cv, &folds))
            .collect();
        let mut best: Option<&Candidate> = None;
        for c in &results {
            if best.is_none_or(|b| c.score > b.score) {
                best = Some(c);
            }
        }
        let best = best.expect("at least one candidate");
        if best.score == f64::NEG_INFINITY {
            break StopReason::AllCandidatesFailed;
        }
        let gain = best.score - current;
        let accepted = gain > 0.0 && gain >= settings.min_gain;
        rounds.push(SelectionRound {
            round: rounds.len() + 1,
            feature: data.feature_names[best.feature].clone(),
            score: best.score,
            gain,
            accepted,
            candidates: results.len(),
            fold_mcc: best.fold_mcc.clone(),
            fold_auc: best.fold_auc.clone(),
        });
        if !accepted {
            break StopReason::NoImprovement;
        }
        log::info!(
            "round {}: added '{}' (score {:.4})",
            rounds.len(),
            data.feature_names[best.feature],
            best.score
        );
        bucket.push(best.feature);
        picks.push(Pick {
            feature: data.feature_names[best.feature].clone(),
            score: best.score,
        });
        current = best.score;
    };
    Ok(SelectionTrace {
        picks,
        rounds,
        stop_reason,
    })
}
