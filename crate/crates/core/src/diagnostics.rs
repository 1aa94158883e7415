//! Calibration assessment and positive likelihood-ratio analysis.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::format_number;
use crate::error::{Error, Result};
use crate::evaluation::{confusion, ConfusionMatrix};

/// Probabilities are clamped to `[CLAMP, 1 - CLAMP]` before taking logits.
pub const CLAMP: f64 = 1e-6;
/// Loess span used by the ICI smoother.
pub const LOESS_SPAN: f64 = 0.75;
pub const MAX_IRLS_ITERATIONS: usize = 100;
pub const GRADIENT_TOLERANCE: f64 = 1e-10;

fn check_inputs(y: &[u8], p: &[f64]) -> Result<()> {
    if y.len() != p.len() {
        return Err(Error::invalid(format!(
            "{} labels but {} probabilities",
            y.len(),
            p.len()
        )));
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("probabilities must be finite"));
    }
    Ok(())
}

pub fn logit(p: f64) -> f64 {
    let p = p.clamp(CLAMP, 1.0 - CLAMP);
    (p / (1.0 - p)).ln()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

// ---------------------------------------------------------------------------
// Calibration curve

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub mean_predicted: f64,
    pub observed_rate: f64,
    pub count: usize,
}

/// Equal-count (quantile) bins over the sorted predictions. Tied
/// predictions never straddle a bin edge, so heavily tied inputs yield fewer
/// than `n_bins` bins; no bin is ever empty.
pub fn calibration_curve(y: &[u8], p: &[f64], n_bins: usize) -> Result<Vec<CalibrationBin>> {
    check_inputs(y, p)?;
    if n_bins < 2 {
        return Err(Error::invalid("calibration curve needs at least 2 bins"));
    }
    let n = y.len();
    if n < n_bins {
        return Err(Error::invalid(format!(
            "{n} rows cannot fill {n_bins} calibration bins"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let mut cuts = vec![0usize];
    for b in 1..n_bins {
        let mut c = b * n / n_bins;
        while c < n && c > 0 && p[order[c]] == p[order[c - 1]] {
            c += 1;
        }
        if c > *cuts.last().unwrap() && c < n {
            cuts.push(c);
        }
    }
    cuts.push(n);
    Ok(cuts
        .windows(2)
        .map(|w| {
            let rows = &order[w[0]..w[1]];
            let count = rows.len();
            let mean_predicted = rows.iter().map(|&i| p[i]).sum::<f64>() / count as f64;
            let observed_rate = rows.iter().filter(|&&i| y[i] == 1).count() as f64 / count as f64;
            CalibrationBin {
                mean_predicted,
                observed_rate,
                count,
            }
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Slope and intercept

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFit {
    /// Coefficient of `logit(p)` in `y ~ a + b * logit(p)`; `None` when the
    /// predictions have no spread.
    pub slope: Option<f64>,
    /// Intercept `a` of the same two-parameter model.
    pub slope_model_intercept: Option<f64>,
    /// Calibration-in-the-large: intercept of `y ~ a + offset(logit(p))`.
    pub intercept: f64,
}

fn both_classes(y: &[u8]) -> Result<()> {
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::Numeric(
            "calibration fit needs both outcome classes".into(),
        ));
    }
    Ok(())
}

/// Newton-Raphson (IRLS) fit of `y ~ b0 + b1 * x`.
fn irls_two(y: &[u8], x: &[f64]) -> Result<(f64, f64)> {
    let mut beta = [0.0f64, 0.0];
    let mut grad_norm = f64::INFINITY;
    for iter in 0..MAX_IRLS_ITERATIONS {
        let (mut g0, mut g1, mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&yi, &xi) in y.iter().zip(x) {
            let mu = sigmoid(beta[0] + beta[1] * xi);
            let r = f64::from(yi) - mu;
            let w = mu * (1.0 - mu);
            g0 += r;
            g1 += r * xi;
            h00 += w;
            h01 += w * xi;
            h11 += w * xi * xi;
        }
        grad_norm = g0.hypot(g1);
        if grad_norm < GRADIENT_TOLERANCE {
            return Ok((beta[0], beta[1]));
        }
        let det = h00 * h11 - h01 * h01;
        if !(det.is_finite() && det > 0.0) {
            break;
        }
        let d0 = (h11 * g0 - h01 * g1) / det;
        let d1 = (h00 * g1 - h01 * g0) / det;
        beta[0] += d0;
        beta[1] += d1;
        // Rounding floor: the step no longer moves the estimate.
        if d0.hypot(d1) <= 1e-15 * (1.0 + beta[0].hypot(beta[1])) {
            log::debug!("IRLS stopped at the rounding floor after {iter} iterations");
            return Ok((beta[0], beta[1]));
        }
    }
    Err(Error::Numeric(format!(
        "logistic calibration fit did not converge in {MAX_IRLS_ITERATIONS} iterations \
         (gradient norm {grad_norm:.3e}, intercept {:.4}, slope {:.4}); \
         the outcome may be perfectly separated by the predictions",
        beta[0], beta[1]
    )))
}

/// Newton fit of `y ~ a + offset(x)`.
fn irls_offset(y: &[u8], x: &[f64]) -> Result<f64> {
    let mut a = 0.0f64;
    let mut g = f64::INFINITY;
    for _ in 0..MAX_IRLS_ITERATIONS {
        let (mut grad, mut h) = (0.0, 0.0);
        for (&yi, &xi) in y.iter().zip(x) {
            let mu = sigmoid(a + xi);
            grad += f64::from(yi) - mu;
            h += mu * (1.0 - mu);
        }
        g = grad.abs();
        if g < GRADIENT_TOLERANCE {
            return Ok(a);
        }
        if !(h.is_finite() && h > 0.0) {
            break;
        }
        let step = grad / h;
        a += step;
        if step.abs() <= 1e-15 * (1.0 + a.abs()) {
            return Ok(a);
        }
    }
    Err(Error::Numeric(format!(
        "calibration-in-the-large fit did not converge (gradient {g:.3e}, intercept {a:.4})"
    )))
}

/// Logistic recalibration of outcomes on `logit(p)`.
pub fn calibration_slope_intercept(y: &[u8], p: &[f64]) -> Result<CalibrationFit> {
    check_inputs(y, p)?;
    if y.is_empty() {
        return Err(Error::invalid("calibration fit needs data"));
    }
    both_classes(y)?;
    let x: Vec<f64> = p.iter().map(|&v| logit(v)).collect();
    let constant = x.iter().all(|&v| v == x[0]);
    let top_negative = y.iter().zip(&x).filter(|(&c, _)| c == 0).map(|(_, &v)| v).fold(f64::NEG_INFINITY, f64::max);
    let bottom_positive = y.iter().zip(&x).filter(|(&c, _)| c == 1).map(|(_, &v)| v).fold(f64::INFINITY, f64::min);
    if top_negative < bottom_positive {
        return Err(Error::Numeric(format!(
            "logistic calibration fit did not converge: outcomes are perfectly separated \
             by the predictions (all negatives have logit <= {top_negative:.4}, all positives >= {bottom_positive:.4})"
        )));
    }
    let (slope, slope_model_intercept) = if constant {
        (None, None)
    } else {
        let (b0, b1) = irls_two(y, &x)?;
        (Some(b1), Some(b0))
    };
    Ok(CalibrationFit {
        slope,
        slope_model_intercept,
        intercept: irls_offset(y, &x)?,
    })
}

// ---------------------------------------------------------------------------
// ICI family

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IciFamily {
    pub ici: f64,
    pub e50: f64,
    pub e90: f64,
    pub emax: f64,
}

/// Sample quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Local linear regression with a tricube kernel over the `span * n`
/// nearest neighbours, evaluated at every distinct `x`.
///
/// `x` must be sorted ascending; returns the fitted value per input point.
pub fn loess_fit(x: &[f64], y: &[f64], span: f64) -> Vec<f64> {
    let n = x.len();
    let q = ((span * n as f64).floor() as usize).clamp(2.min(n), n);
    let mut distinct: Vec<usize> = Vec::new();
    for i in 0..n {
        if i == 0 || x[i] != x[i - 1] {
            distinct.push(i);
        }
    }
    // left edge of the q-nearest window for each distinct point (monotone)
    let mut windows = Vec::with_capacity(distinct.len());
    let mut lo = 0usize;
    for &i in &distinct {
        let x0 = x[i];
        while lo + q < n && x0 - x[lo] > x[lo + q] - x0 {
            lo += 1;
        }
        windows.push(lo);
    }
    let fitted: Vec<f64> = distinct
        .par_iter()
        .zip(windows.par_iter())
        .map(|(&i, &lo)| {
            let x0 = x[i];
            let hi = lo + q;
            let h = (x0 - x[lo]).max(x[hi - 1] - x0);
            let (mut sw, mut swx, mut swy) = (0.0, 0.0, 0.0);
            let weights: Vec<f64> = (lo..hi)
                .map(|j| {
                    let d = (x[j] - x0).abs();
                    if h == 0.0 {
                        1.0
                    } else if d < h {
                        let u = d / h;
                        let t = 1.0 - u * u * u;
                        t * t * t
                    } else {
                        0.0
                    }
                })
                .collect();
            for (w, j) in weights.iter().zip(lo..hi) {
                sw += w;
                swx += w * x[j];
                swy += w * y[j];
            }
            let xm = swx / sw;
            let ym = swy / sw;
            let (mut sxx, mut sxy) = (0.0, 0.0);
            for (w, j) in weights.iter().zip(lo..hi) {
                let dx = x[j] - xm;
                sxx += w * dx * dx;
                sxy += w * dx * (y[j] - ym);
            }
            if sxx <= f64::EPSILON * sw * (1.0 + xm * xm) {
                ym
            } else {
                ym + sxy / sxx * (x0 - xm)
            }
        })
        .collect();
    let mut out = vec![0.0; n];
    for (k, &start) in distinct.iter().enumerate() {
        let end = distinct.get(k + 1).copied().unwrap_or(n);
        out[start..end].fill(fitted[k]);
    }
    out
}

/// ICI, E50, E90 and Emax: mean, median, 90th percentile and maximum of
/// `|smoothed observed rate - predicted probability|` over the sample.
pub fn ici_family(y: &[u8], p: &[f64]) -> Result<IciFamily> {
    check_inputs(y, p)?;
    if y.len() < 50 {
        return Err(Error::invalid(format!(
            "ICI needs at least 50 rows for the smoother, got {}",
            y.len()
        )));
    }
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let xs: Vec<f64> = order.iter().map(|&i| p[i]).collect();
    let ys: Vec<f64> = order.iter().map(|&i| f64::from(y[i])).collect();
    let smooth = loess_fit(&xs, &ys, LOESS_SPAN);
    let mut d: Vec<f64> = smooth.iter().zip(&xs).map(|(c, x)| (c - x).abs()).collect();
    let ici = d.iter().sum::<f64>() / d.len() as f64;
    d.sort_by(f64::total_cmp);
    Ok(IciFamily {
        ici,
        e50: quantile(&d, 0.5),
        e90: quantile(&d, 0.9),
        emax: *d.last().unwrap(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub n: usize,
    pub slope: Option<f64>,
    pub slope_model_intercept: Option<f64>,
    pub intercept: f64,
    pub ici: f64,
    pub e50: f64,
    pub e90: f64,
    pub emax: f64,
    pub curve: Vec<CalibrationBin>,
}

pub fn calibration_report(y: &[u8], p: &[f64], n_bins: usize) -> Result<CalibrationReport> {
    let fit = calibration_slope_intercept(y, p)?;
    let ici = ici_family(y, p)?;
    Ok(CalibrationReport {
        n: y.len(),
        slope: fit.slope,
        slope_model_intercept: fit.slope_model_intercept,
        intercept: fit.intercept,
        ici: ici.ici,
        e50: ici.e50,
        e90: ici.e90,
        emax: ici.emax,
        curve: calibration_curve(y, p, n_bins)?,
    })
}

pub fn write_calibration_csv<W: Write>(bins: &[CalibrationBin], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["bin", "mean_predicted", "observed_rate", "count"])?;
    for (i, b) in bins.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            format_number(b.mean_predicted),
            format_number(b.observed_rate),
            b.count.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<calibration csv>", e))
}

// ---------------------------------------------------------------------------
// Likelihood ratios

/// Positive likelihood ratio `sensitivity / (1 - specificity)`; `+inf` when
/// no negative is predicted positive.
pub fn lr_positive(cm: &ConfusionMatrix) -> f64 {
    if cm.fp == 0 {
        return f64::INFINITY;
    }
    cm.sensitivity() / (1.0 - cm.specificity())
}

/// Change from pretest to post-test probability given a likelihood ratio.
pub fn post_test_delta(lr: f64, pretest: f64) -> Result<f64> {
    if !(pretest > 0.0 && pretest < 1.0) {
        return Err(Error::invalid(format!(
            "pretest probability must lie in (0, 1), got {pretest}"
        )));
    }
    if lr.is_nan() || lr < 0.0 {
        return Err(Error::invalid(format!("likelihood ratio must be >= 0, got {lr}")));
    }
    if lr.is_infinite() {
        return Ok(1.0 - pretest);
    }
    let odds = pretest / (1.0 - pretest) * lr;
    Ok(odds / (1.0 + odds) - pretest)
}

mod lr_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad likelihood ratio '{t}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrPoint {
    pub threshold: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    #[serde(with = "lr_serde")]
    pub lr_positive: f64,
    pub post_test_delta: f64,
    pub infinite: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrCurve {
    pub pretest: f64,
    pub points: Vec<LrPoint>,
    /// Threshold with the largest finite LR (lowest on ties).
    pub argmax_threshold: Option<f64>,
    pub max_lr: Option<f64>,
}

/// Thresholds 0.01, 0.02, ..., 0.99.
pub fn default_threshold_grid() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 100.0).collect()
}

pub fn lr_sweep(y: &[u8], p: &[f64], thresholds: &[f64], pretest: f64) -> Result<LrCurve> {
    check_inputs(y, p)?;
    if thresholds.is_empty() {
        return Err(Error::invalid("threshold grid is empty"));
    }
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("thresholds must be strictly increasing"));
    }
    both_classes(y)?;
    let points = thresholds
        .iter()
        .map(|&t| {
            let cm = confusion(y, p, t)?;
            let lr = lr_positive(&cm);
            Ok(LrPoint {
                threshold: t,
                sensitivity: cm.sensitivity(),
                specificity: cm.specificity(),
                lr_positive: lr,
                post_test_delta: post_test_delta(lr, pretest)?,
                infinite: lr.is_infinite(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<&LrPoint> = None;
    for pt in points.iter().filter(|pt| !pt.infinite) {
        if best.is_none_or(|b| pt.lr_positive > b.lr_positive) {
            best = Some(pt);
        }
    }
    Ok(LrCurve {
        pretest,
        argmax_threshold: best.map(|b| b.threshold),
        max_lr: best.map(|b| b.lr_positive),
        points,
    })
}

pub fn write_lr_csv<W: Write>(curve: &LrCurve, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "threshold",
        "sensitivity",
        "specificity",
        "lr_positive",
        "post_test_delta",
    ])?;
    for pt in &curve.points {
        w.write_record([
            format_number(pt.threshold),
            format_number(pt.sensitivity),
            format_number(pt.specificity),
            format_number(pt.lr_positive),
            format_number(pt.post_test_delta),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<lr csv>", e))
}
