//! Pipeline configuration: a TOML file, overridable from the command line.

use std::path::{Path, PathBuf};

use readmit_core::data::SyntheticConfig;
use readmit_core::learner::ForestParams;
use readmit_core::preprocess::{FilterRule, PreprocessConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Environment variable that overrides the output directory.
pub const OUT_ENV: &str = "READMIT_OUT";
pub const DEFAULT_OUT: &str = "readmit_out";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub train: Option<PathBuf>,
    pub blind: Option<PathBuf>,
    pub external: Option<PathBuf>,
    pub schema: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSettings {
    pub preset: String,
    pub n_rows: usize,
    /// Share of generated rows held out as the blind test set.
    pub blind_fraction: f64,
    pub external_preset: String,
    /// Rows in the external cohort; 0 skips it.
    pub external_rows: usize,
    /// Full generator settings, used instead of `preset` when present.
    pub custom: Option<SyntheticConfig>,
}

impl Default for SynthSettings {
    fn default() -> Self {
        Self {
            preset: "eicu-like".into(),
            n_rows: 20_000,
            blind_fraction: 0.1,
            external_preset: "mimic-like".into(),
            external_rows: 5_000,
            custom: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvSettings {
    pub k: usize,
    pub threshold: f64,
}

impl Default for CvSettings {
    fn default() -> Self {
        Self { k: 10, threshold: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub enabled: bool,
    pub max_features: Option<usize>,
    pub min_gain: f64,
    /// Folds used while scoring candidates.
    pub k: usize,
    /// Trees per candidate forest.
    pub n_trees: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            max_features: None,
            min_gain: 0.0,
            k: 5,
            n_trees: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSettings {
    /// Likelihood-ratio threshold grid; defaults to 0.01..=0.99.
    pub thresholds: Option<Vec<f64>>,
    /// Pretest probability for post-test deltas; defaults to the training
    /// prevalence.
    pub pretest: Option<f64>,
    pub calibration_bins: usize,
}

impl Default for DiagnosticsSettings {
    fn default() -> Self {
        Self {
            thresholds: None,
            pretest: None,
            calibration_bins: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainSettings {
    pub top_k: usize,
    /// Rows explained (the first ones of the set); 0 means all.
    pub max_rows: usize,
}

impl Default for ExplainSettings {
    fn default() -> Self {
        Self {
            top_k: 20,
            max_rows: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub paths: Paths,
    pub synth: SynthSettings,
    /// Exclusion rules; the clinical preset when absent.
    pub filters: Option<Vec<FilterRule>>,
    pub preprocess: PreprocessConfig,
    pub forest: ForestParams,
    pub cv: CvSettings,
    pub selection: SelectionConfig,
    pub diagnostics: DiagnosticsSettings,
    pub explain: ExplainSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: None,
            out: None,
            paths: Paths::default(),
            synth: SynthSettings::default(),
            filters: None,
            // training on a 1:1 undersample is the pipeline's standard mode
            preprocess: PreprocessConfig {
                undersample_ratio: Some(1.0),
                ..PreprocessConfig::default()
            },
            forest: ForestParams::default(),
            cv: CvSettings::default(),
            selection: SelectionConfig::default(),
            diagnostics: DiagnosticsSettings::default(),
            explain: ExplainSettings::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut config = Self::from_toml(&text)?;
        // relative paths in the file are relative to the file itself
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut config.paths.train,
            &mut config.paths.blind,
            &mut config.paths.external,
            &mut config.paths.schema,
            &mut config.out,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.seed.is_none() {
            return bad("a seed is required (set `seed` in the config or pass --seed)".into());
        }
        if self.cv.k < 2 {
            return bad(format!("cv.k must be at least 2, got {}", self.cv.k));
        }
        if self.selection.k < 2 {
            return bad("selection.k must be at least 2".into());
        }
        if self.selection.n_trees == 0 || self.forest.n_trees == 0 {
            return bad("forests need at least one tree".into());
        }
        if !(0.0..=1.0).contains(&self.cv.threshold) {
            return bad(format!("cv.threshold {} outside [0, 1]", self.cv.threshold));
        }
        if self.diagnostics.calibration_bins < 2 {
            return bad("diagnostics.calibration_bins must be at least 2".into());
        }
        if let Some(q) = self.diagnostics.pretest {
            if !(q > 0.0 && q < 1.0) {
                return bad(format!("diagnostics.pretest must lie in (0, 1), got {q}"));
            }
        }
        if let Some(grid) = &self.diagnostics.thresholds {
            if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) {
                return bad("diagnostics.thresholds must be non-empty and strictly increasing".into());
            }
        }
        if !(self.synth.blind_fraction > 0.0 && self.synth.blind_fraction < 1.0) {
            return bad(format!(
                "synth.blind_fraction must lie in (0, 1), got {}",
                self.synth.blind_fraction
            ));
        }
        if let Some(r) = self.preprocess.undersample_ratio {
            if !(r > 0.0 && r.is_finite()) {
                return bad(format!("preprocess.undersample_ratio must be positive, got {r}"));
            }
        }
        let t = self.preprocess.missingness_threshold;
        if !(t > 0.0 && t <= 1.0) {
            return bad(format!("preprocess.missingness_threshold must lie in (0, 1], got {t}"));
        }
        if self.explain.top_k == 0 {
            return bad("explain.top_k must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = PipelineConfig::from_toml("").unwrap();
        assert_eq!(c, PipelineConfig::default());
        assert_eq!(c.forest.n_trees, 80);
        assert_eq!(c.cv.k, 10);
        assert_eq!(c.preprocess.undersample_ratio, Some(1.0));
        assert!(c.validate().is_err(), "seed is mandatory");
    }

    #[test]
    fn parses_sections() {
        let c = PipelineConfig::from_toml(
            r#"
seed = 7
[forest]
n_trees = 12
features_per_split = { count = 3 }
[preprocess]
undersample_ratio = 3.0
[[filters]]
column = "age"
comparator = "<"
bound = 18
[diagnostics]
thresholds = [0.2, 0.4]
"#,
        )
        .unwrap();
        c.validate().unwrap();
        assert_eq!(c.forest.n_trees, 12);
        assert_eq!(c.preprocess.undersample_ratio, Some(3.0));
        assert_eq!(c.filters.as_ref().unwrap()[0].to_string(), "age < 18");
        let again = PipelineConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(PipelineConfig::from_toml("sede = 1").is_err());
        let c = PipelineConfig::from_toml("seed = 1\n[cv]\nk = 1").unwrap();
        assert!(c.validate().is_err());
        let c = PipelineConfig::from_toml("seed = 1\n[diagnostics]\nthresholds = [0.5, 0.5]").unwrap();
        assert!(c.validate().is_err());
    }
}
