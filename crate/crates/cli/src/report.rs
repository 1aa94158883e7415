//! Final summary and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use readmit_core::diagnostics::{CalibrationReport, LrCurve};
use readmit_core::evaluation::MetricsReport;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};
use crate::stages::{
    write_bytes, write_json, Context, EvaluationReport, ExplainSummary, SelectionSummary,
    SetOutcome, SetSummary,
};

pub const MANIFEST: &str = "manifest.json";
pub const REPORT: &str = "report.md";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Path relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub artifacts: Vec<Artifact>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timings: Option<serde_json::Value>,
}

fn walk(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> CliResult<()> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.is_dir() {
            walk(root, &path, out)?;
        } else {
            out.push(path.strip_prefix(root).expect("under root").to_path_buf());
        }
    }
    Ok(())
}

fn relative_name(path: &Path) -> String {
    path.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Every file under `out` except the manifest and timing records, sorted.
pub fn collect_artifacts(out: &Path) -> CliResult<Vec<Artifact>> {
    let mut files = Vec::new();
    walk(out, out, &mut files)?;
    let mut artifacts = Vec::new();
    for rel in files {
        let name = relative_name(&rel);
        if name == MANIFEST || name.starts_with("timings/") {
            continue;
        }
        let path = out.join(&rel);
        let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        artifacts.push(Artifact {
            path: name,
            sha256: hex::encode(Sha256::digest(&bytes)),
            bytes: bytes.len() as u64,
        });
    }
    artifacts.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(artifacts)
}

fn read_optional<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<Option<T>> {
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(Some(serde_json::from_str(&text)?))
}

fn f3(x: f64) -> String {
    format!("{x:.3}")
}

fn metrics_row(out: &mut String, set: &str, s: &SetSummary) {
    match &s.metrics {
        Some(MetricsReport { auc, apr, mcc, balanced_accuracy, precision, recall, specificity, f1, .. }) => {
            let _ = writeln!(
                out,
                "| {set} | {} | {} | {} | {} | {} | {} | {} | {} | {} |",
                s.n,
                f3(*auc),
                f3(*apr),
                f3(*mcc),
                f3(*balanced_accuracy),
                f3(*precision),
                f3(*recall),
                f3(*specificity),
                f3(*f1)
            );
        }
        None => {
            let note = s.note.as_deref().unwrap_or("metrics undefined");
            let _ = writeln!(out, "| {set} | {} | {note} | | | | | | | |", s.n);
        }
    }
}

fn render(ctx: &Context, artifacts: &[Artifact]) -> CliResult<String> {
    let out_dir = &ctx.out;
    let mut md = String::new();
    let _ = writeln!(md, "# ICU readmission risk model report\n");
    let _ = writeln!(md, "Seed: {}\n", ctx.seed);

    if let Some(sel) = read_optional::<SelectionSummary>(&out_dir.join("select/selection.json"))? {
        let _ = writeln!(md, "## Feature selection\n");
        match &sel.trace {
            Some(trace) => {
                let _ = writeln!(md, "| round | best candidate | score | gain | accepted |\n|---|---|---|---|---|");
                for r in &trace.rounds {
                    let _ = writeln!(
                        md,
                        "| {} | {} | {} | {} | {} |",
                        r.round,
                        r.feature,
                        f3(r.score),
                        f3(r.gain),
                        if r.accepted { "yes" } else { "no" }
                    );
                }
                let _ = writeln!(md, "\nStopped: {:?}.\n", trace.stop_reason);
            }
            None => {
                let _ = writeln!(md, "Selection disabled; {} features used.\n", sel.selected.len());
            }
        }
    }

    if let Some(eval) = read_optional::<EvaluationReport>(&out_dir.join("evaluate/metrics.json"))? {
        let _ = writeln!(md, "## Discrimination\n");
        let _ = writeln!(md, "Decision threshold {}; cross-validation with {} folds (fold mean).\n", eval.threshold, eval.cv.k);
        let _ = writeln!(
            md,
            "| set | n | AUC | APR | MCC | balanced acc. | precision | recall | specificity | F1 |\n|---|---|---|---|---|---|---|---|---|---|"
        );
        metrics_row(&mut md, "cv", &eval.cv.summary);
        for (set, s) in [("blind", &eval.blind), ("external", &eval.external)] {
            if let Some(s) = s {
                metrics_row(&mut md, set, s);
            }
        }
        if let Some(gap) = eval.cv_blind_auc_gap {
            let _ = writeln!(md, "\nCV to blind AUC gap: {}.", f3(gap));
        }
        for set in &eval.absent {
            let _ = writeln!(md, "\nThe {set} set was not provided; its section is absent.");
        }
        md.push('\n');
    }

    if let Some(cal) = read_optional::<Vec<SetOutcome<CalibrationReport>>>(&out_dir.join("calibrate/calibration.json"))? {
        let _ = writeln!(md, "## Calibration\n");
        let _ = writeln!(md, "| set | slope | intercept | ICI | E50 | E90 | Emax |\n|---|---|---|---|---|---|---|");
        for o in &cal {
            match (&o.result, &o.error) {
                (Some(r), _) => {
                    let slope = r.slope.map_or("undefined".to_string(), f3);
                    let _ = writeln!(
                        md,
                        "| {} | {slope} | {} | {} | {} | {} | {} |",
                        o.set,
                        f3(r.intercept),
                        f3(r.ici),
                        f3(r.e50),
                        f3(r.e90),
                        f3(r.emax)
                    );
                }
                (None, e) => {
                    let _ = writeln!(md, "| {} | {} | | | | | |", o.set, e.as_deref().unwrap_or("failed"));
                }
            }
        }
        md.push('\n');
    }

    if let Some(lr) = read_optional::<Vec<SetOutcome<LrCurve>>>(&out_dir.join("lr/lr.json"))? {
        let _ = writeln!(md, "## Positive likelihood ratio\n");
        let _ = writeln!(md, "| set | pretest | max finite LR+ | at threshold |\n|---|---|---|---|");
        for o in &lr {
            match &o.result {
                Some(c) => {
                    let _ = writeln!(
                        md,
                        "| {} | {} | {} | {} |",
                        o.set,
                        f3(c.pretest),
                        c.max_lr.map_or("none".to_string(), f3),
                        c.argmax_threshold.map_or("none".to_string(), |t| format!("{t:.2}"))
                    );
                }
                None => {
                    let _ = writeln!(md, "| {} | {} | | |", o.set, o.error.as_deref().unwrap_or("failed"));
                }
            }
        }
        md.push('\n');
    }

    if let Some(ex) = read_optional::<ExplainSummary>(&out_dir.join("explain/explain.json"))? {
        let _ = writeln!(md, "## Attributions\n");
        let _ = writeln!(
            md,
            "{} rows of the {} set; local accuracy error at most {:.1e}.\n",
            ex.n_rows, ex.set, ex.local_accuracy_max_error
        );
        let _ = writeln!(md, "| rank | feature | mean abs. attribution |\n|---|---|---|");
        for (i, f) in ex.ranking.features.iter().enumerate() {
            let _ = writeln!(md, "| {} | {} | {:.4} |", i + 1, f.feature, f.mean_abs);
        }
        md.push('\n');
    }

    let _ = writeln!(md, "## Artifacts\n");
    for a in artifacts {
        let _ = writeln!(md, "- `{}`", a.path);
    }
    Ok(md)
}

fn config_snapshot(ctx: &Context) -> CliResult<serde_json::Value> {
    let mut value = serde_json::to_value(&ctx.config)?;
    if let Some(map) = value.as_object_mut() {
        map.remove("out");
    }
    Ok(value)
}

fn timings(ctx: &Context) -> CliResult<Option<serde_json::Value>> {
    if !ctx.record_timings {
        return Ok(None);
    }
    let dir = ctx.out.join("timings");
    let mut stages = serde_json::Map::new();
    if dir.exists() {
        let mut files = Vec::new();
        walk(&dir, &dir, &mut files)?;
        files.sort();
        for f in files {
            if let Some(v) = read_optional::<serde_json::Value>(&dir.join(&f))? {
                let stage = v["stage"].as_str().unwrap_or_default().to_string();
                stages.insert(stage, v["seconds"].clone());
            }
        }
    }
    Ok(Some(serde_json::Value::Object(stages)))
}

/// Writes `report.md`, then `manifest.json` covering every artifact
/// including the report.
pub fn report(ctx: &Context) -> CliResult<()> {
    let before = collect_artifacts(&ctx.out)?;
    let before: Vec<Artifact> = before.into_iter().filter(|a| a.path != REPORT).collect();
    let md = render(ctx, &before)?;
    write_bytes(&ctx.out.join(REPORT), md.as_bytes())?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: ctx.seed,
        config: config_snapshot(ctx)?,
        artifacts: collect_artifacts(&ctx.out)?,
        timings: timings(ctx)?,
    };
    write_json(&ctx.out.join(MANIFEST), &manifest)
}
