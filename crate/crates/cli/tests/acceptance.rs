//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use readmit::config::PipelineConfig;
use readmit::{execute_with_threads, Command, Context};
use readmit_core::data::{
    generate_synthetic, split_stratified, InformativeFeature, SyntheticConfig, EICU_PREVALENCE,
};
use readmit_core::diagnostics::{calibration_slope_intercept, ici_family};
use readmit_core::evaluation::{
    auc, confusion, cross_validate_raw, greedy_forward_select, mcc, metrics_from_confusion,
    project, stratified_kfold, ConfusionMatrix, CvConfig, SelectionSettings,
};
use readmit_core::explain::{brute_shapley, forest_shap, random_tree, tree_shap};
use readmit_core::learner::{fit_forest, ForestParams};
use readmit_core::preprocess::{self, undersample_indices, PreprocessConfig};
use readmit_core::stats::{chi2_2x2, rank_sum, spearman};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(start: Instant, budget: Duration) -> (bool, String) {
    let t = start.elapsed();
    (t < budget, format!("{:.1}s of {}s", t.as_secs_f64(), budget.as_secs()))
}

// 1 -------------------------------------------------------------------------

fn treeshap_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let depth = rng.random_range(1..=4);
        let p = rng.random_range(1..=8);
        let tree = random_tree(&mut rng, depth, p);
        for _ in 0..10 {
            let x: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fast = tree_shap(&tree, &x);
            let slow = brute_shapley(&tree, &x).expect("at most 8 features");
            for (a, b) in fast.iter().zip(&slow) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    let (in_time, t) = within(start, Duration::from_secs(60));
    outcome(worst < 1e-9 && in_time, format!("max |fast - oracle| = {worst:.2e} (< 1e-9), {t}"))
}

// 2 -------------------------------------------------------------------------

fn local_accuracy() -> Outcome {
    let cfg = SyntheticConfig {
        n_rows: 500,
        informative: vec![
            InformativeFeature::continuous("a", 1.2),
            InformativeFeature::continuous("b", -0.8),
            InformativeFeature::continuous("c", 0.5),
        ],
        noise_count: 4,
        seed: 2,
        ..SyntheticConfig::default()
    };
    let data = generate_synthetic(&cfg).unwrap().0.to_dataset().unwrap();
    let params = ForestParams {
        n_trees: 80,
        seed: 2,
        ..ForestParams::default()
    };
    let model = fit_forest(&data, &params).unwrap();
    let shap = forest_shap(&model, &data.x).unwrap();
    let pred = model.predict_proba(&data.x).unwrap();
    let worst = shap
        .reconstructed()
        .iter()
        .zip(&pred)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    outcome(worst < 1e-9, format!("max |base + sum(phi) - f(x)| = {worst:.2e} (< 1e-9)"))
}

// 3 -------------------------------------------------------------------------

fn pairwise_auc(y: &[u8], s: &[f64]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (yi, si) in y.iter().zip(s) {
        for (yj, sj) in y.iter().zip(s) {
            if *yi == 1 && *yj == 0 {
                pairs += 1.0;
                wins += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

fn auc_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut sets = 0;
    while sets < 1000 {
        let n = rng.random_range(2..=50);
        let y: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.4))).collect();
        if y.iter().all(|&v| v == y[0]) {
            continue;
        }
        // a coarse grid injects ties
        let levels = rng.random_range(2..=10);
        let s: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..levels)) / 7.0).collect();
        worst = worst.max((auc(&y, &s).unwrap() - pairwise_auc(&y, &s)).abs());
        sets += 1;
    }
    outcome(worst < 1e-12, format!("1000 sets, max |rank - pairwise| = {worst:.2e} (< 1e-12)"))
}

// 4 -------------------------------------------------------------------------

/// Labels and scores realizing a confusion matrix at threshold 0.5.
fn realize(tp: usize, fp: usize, tn: usize, fn_: usize) -> (Vec<u8>, Vec<f64>) {
    let mut y = Vec::new();
    let mut p = Vec::new();
    for (label, score, count) in [(1, 0.9, tp), (0, 0.8, fp), (0, 0.1, tn), (1, 0.2, fn_)] {
        y.extend(std::iter::repeat_n(label, count));
        p.extend(std::iter::repeat_n(score, count));
    }
    (y, p)
}

type Counts = (usize, usize, usize, usize);

fn metric_fixtures() -> Outcome {
    // (tp, fp, tn, fn) with hand-computed MCC, precision, recall, specificity
    let fixtures: [(Counts, [f64; 4]); 6] = [
        // (5*3 - 2*1) / sqrt(7*6*5*4) = 13 / sqrt(840)
        ((5, 2, 3, 1), [13.0 / 840f64.sqrt(), 5.0 / 7.0, 5.0 / 6.0, 3.0 / 5.0]),
        ((10, 0, 10, 0), [1.0, 1.0, 1.0, 1.0]),
        ((0, 10, 0, 10), [-1.0, 0.0, 0.0, 0.0]),
        // (1*1 - 1*1) / ... = 0
        ((1, 1, 1, 1), [0.0, 0.5, 0.5, 0.5]),
        // a single class present: MCC convention 0
        ((4, 0, 0, 0), [0.0, 1.0, 1.0, 0.0]),
        ((0, 0, 6, 0), [0.0, 0.0, 0.0, 1.0]),
    ];
    let mut worst = 0.0f64;
    let mut counts_ok = true;
    for ((tp, fp, tn, fn_), expected) in fixtures {
        let (y, p) = realize(tp, fp, tn, fn_);
        let cm = confusion(&y, &p, 0.5).unwrap();
        counts_ok &= cm
            == ConfusionMatrix {
                tp: tp as u64,
                fp: fp as u64,
                tn: tn as u64,
                fn_: fn_ as u64,
            };
        let (precision, recall, specificity, _, _) = metrics_from_confusion(&cm);
        for (got, want) in [mcc(&cm), precision, recall, specificity].iter().zip(expected) {
            worst = worst.max((got - want).abs());
        }
    }
    outcome(
        counts_ok && worst < 1e-12,
        format!("6 fixtures, counts match: {counts_ok}, max metric error {worst:.2e} (< 1e-12)"),
    )
}

// 5 -------------------------------------------------------------------------

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn calibration_recovery() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_slope = 0.0f64;
    let mut worst_citl = 0.0f64;
    let mut worst_joint = 0.0f64;
    for a in [0.6, 0.8, 1.0, 1.25] {
        for b in [-0.3, 0.0, 0.3] {
            let n = 50_000;
            let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let p: Vec<f64> = z.iter().map(|&v| sigmoid(v)).collect();
            let y: Vec<u8> = z
                .iter()
                .map(|&v| u8::from(rng.random::<f64>() < sigmoid(a * v + b)))
                .collect();
            let fit = calibration_slope_intercept(&y, &p).unwrap();
            worst_slope = worst_slope.max((fit.slope.unwrap() - a).abs());
            worst_citl = worst_citl.max((fit.intercept - b).abs());
            worst_joint = worst_joint.max((fit.slope_model_intercept.unwrap() - b).abs());
        }
    }
    let n = 20_000;
    let p: Vec<f64> = (0..n).map(|_| rng.random_range(0.02..0.98)).collect();
    let y: Vec<u8> = p.iter().map(|&q| u8::from(rng.random::<f64>() < q)).collect();
    let ici = ici_family(&y, &p).unwrap();
    let (in_time, t) = within(start, Duration::from_secs(120));
    let pass = worst_slope <= 0.05
        && worst_citl <= 0.05
        && worst_joint <= 0.05
        && ici.ici < 0.01
        && ici.emax < 0.05
        && in_time;
    outcome(
        pass,
        format!(
            "12-point grid: max slope err {worst_slope:.3}, intercept err {worst_citl:.3} (joint {worst_joint:.3}) (<= 0.05); ICI {:.4} (< 0.01), Emax {:.4} (< 0.05); {t}",
            ici.ici, ici.emax
        ),
    )
}

// 6 -------------------------------------------------------------------------

fn imbalance_machinery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let labels: Vec<u8> = (0..5000).map(|_| u8::from(rng.random_bool(0.04))).collect();
    let minority = labels.iter().filter(|&&v| v == 1).count();
    let mut ladder_ok = true;
    for r in 1..=9 {
        let s = undersample_indices(&labels, r as f64, 6).unwrap();
        let majority = s.rows.iter().filter(|&&i| labels[i] == 0).count();
        let positives = s.rows.iter().filter(|&&i| labels[i] == 1).count();
        ladder_ok &= majority == r * minority && positives == minority && s.warning.is_none();
    }
    let folds = stratified_kfold(&labels, 10, 6).unwrap();
    let mut per_fold = [[0usize; 2]; 10];
    for (&f, &y) in folds.iter().zip(&labels) {
        per_fold[f][y as usize] += 1;
    }
    let spread = |c: usize| {
        let v: Vec<usize> = per_fold.iter().map(|f| f[c]).collect();
        v.iter().max().unwrap() - v.iter().min().unwrap()
    };
    let folds_ok = spread(0) <= 1 && spread(1) <= 1;
    outcome(
        ladder_ok && folds_ok,
        format!(
            "ratios 1..9 give floor(r * {minority}) majority rows: {ladder_ok}; 10-fold class-count spread {} / {} (<= 1)",
            spread(0),
            spread(1)
        ),
    )
}

// 7 -------------------------------------------------------------------------

fn selection_recovery() -> Outcome {
    let start = Instant::now();
    let mut hits = 0;
    for seed in 0..10u64 {
        let cfg = SyntheticConfig {
            n_rows: 3000,
            informative: vec![
                InformativeFeature::continuous("s1", 1.5),
                InformativeFeature::continuous("s2", -1.5),
                InformativeFeature::continuous("s3", 1.5),
            ],
            noise_count: 17,
            seed,
            ..SyntheticConfig::default()
        };
        let data = generate_synthetic(&cfg).unwrap().0.to_dataset().unwrap();
        let params = ForestParams {
            n_trees: 30,
            seed,
            ..ForestParams::default()
        };
        let cv = CvConfig {
            k: 5,
            seed,
            ..CvConfig::default()
        };
        let settings = SelectionSettings {
            max_features: Some(3),
            min_gain: 0.0,
        };
        let trace = greedy_forward_select(&data, &params, &cv, &settings).unwrap();
        let mut picks = trace.selected();
        picks.truncate(3);
        picks.sort();
        if picks == ["s1", "s2", "s3"] {
            hits += 1;
        }
    }
    let (in_time, t) = within(start, Duration::from_secs(300));
    outcome(hits >= 9 && in_time, format!("planted features are the first 3 picks in {hits}/10 seeds (>= 9); {t}"))
}

// 8 -------------------------------------------------------------------------

fn generalization() -> Outcome {
    let seed = 8;
    let cfg = SyntheticConfig::preset("eicu-like", 20_000, seed).unwrap();
    let (table, truth) = generate_synthetic(&cfg).unwrap();
    let prevalence = truth.n_positive as f64 / truth.n_rows as f64;
    // a quarter held out keeps the held-out AUC standard error near 0.012
    let (train, blind) = split_stratified(&table, 0.25, seed).unwrap();
    let pcfg = PreprocessConfig {
        undersample_ratio: Some(1.0),
        ..PreprocessConfig::default()
    };
    let params = ForestParams {
        n_trees: 80,
        seed,
        ..ForestParams::default()
    };
    let cv = CvConfig {
        k: 10,
        seed,
        undersample_ratio: Some(1.0),
        threshold: 0.5,
    };
    let result = cross_validate_raw(&train, &pcfg, None, &params, &cv).unwrap();
    let cv_auc = result.mean.auc;

    let pre = preprocess::fit(&train, &pcfg).unwrap();
    let train_set = pre.transform(&train).unwrap().to_dataset().unwrap();
    let sample = undersample_indices(&train_set.y, 1.0, seed).unwrap();
    let model = fit_forest(&train_set.select_rows(&sample.rows), &params).unwrap();
    let blind_set = project(&pre.transform(&blind).unwrap().to_dataset().unwrap(), &train_set.feature_names);
    let blind_auc = auc(&blind_set.y, &model.predict_proba(&blind_set.x).unwrap()).unwrap();
    let gap = (cv_auc - blind_auc).abs();
    outcome(
        cv_auc >= 0.80 && gap <= 0.05 && (prevalence - EICU_PREVALENCE).abs() < 0.001,
        format!("prevalence {prevalence:.4}; CV AUC {cv_auc:.3} (>= 0.80), held-out AUC {blind_auc:.3}, gap {gap:.3} (<= 0.05)"),
    )
}

// 9 -------------------------------------------------------------------------

fn shap_directionality() -> Outcome {
    let cfg = SyntheticConfig {
        n_rows: 2000,
        informative: vec![
            InformativeFeature::continuous("risk_up", 1.5),
            InformativeFeature::continuous("risk_down", -1.5),
        ],
        noise_count: 4,
        seed: 9,
        ..SyntheticConfig::default()
    };
    let data = generate_synthetic(&cfg).unwrap().0.to_dataset().unwrap();
    let params = ForestParams {
        n_trees: 80,
        seed: 9,
        ..ForestParams::default()
    };
    let model = fit_forest(&data, &params).unwrap();
    let shap = forest_shap(&model, &data.x).unwrap();
    let rho = |name: &str| {
        let j = data.feature_index(name).unwrap();
        spearman(&data.x.column(j), &shap.values.column(j)).unwrap()
    };
    let (up, down) = (rho("risk_up"), rho("risk_down"));
    outcome(
        up > 0.5 && down < -0.5,
        format!("Spearman(value, attribution): positive feature {up:.3} (> 0.5), negative feature {down:.3} (< -0.5)"),
    )
}

// 10 ------------------------------------------------------------------------

fn statistics_fixtures() -> Outcome {
    let (stat, p) = chi2_2x2([[10, 20], [20, 10]]).unwrap();
    let chi_ok = (stat - 6.6667).abs() <= 1e-4 && (p - 0.00983).abs() <= 1e-5;
    // disjoint samples: every a above every b, so U counts all pairs
    let a: Vec<f64> = (0..12).map(|i| 100.0 + f64::from(i)).collect();
    let b: Vec<f64> = (0..9).map(|i| f64::from(i) * 3.0).collect();
    let mut pairs = 0.0;
    for x in &a {
        for y in &b {
            pairs += if x > y {
                1.0
            } else if x == y {
                0.5
            } else {
                0.0
            };
        }
    }
    let rs = rank_sum(&a, &b).unwrap();
    let reverse = rank_sum(&b, &a).unwrap();
    let rank_ok = rs.u == pairs && reverse.u == 0.0;
    outcome(
        chi_ok && rank_ok,
        format!(
            "chi2 = {stat:.4} (6.6667 +/- 1e-4), p = {p:.5} (0.00983 +/- 1e-5); rank-sum U = {} vs pair count {pairs}",
            rs.u
        ),
    )
}

// 11 ------------------------------------------------------------------------

fn small_pipeline_config(out: &Path) -> PipelineConfig {
    let mut config = PipelineConfig::from_toml(
        r#"
seed = 11
[synth]
n_rows = 3000
external_rows = 1000
[forest]
n_trees = 20
[cv]
k = 5
[selection]
k = 3
n_trees = 10
max_features = 4
[explain]
max_rows = 200
"#,
    )
    .unwrap();
    config.out = Some(out.to_path_buf());
    config
}

fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn go(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                go(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    go(root, root, &mut out);
    out
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut trees = Vec::new();
    for threads in [1, 4] {
        let out = dir.path().join(format!("threads_{threads}"));
        let ctx = Context::new(small_pipeline_config(&out), false).unwrap();
        if let Err(e) = execute_with_threads(&ctx, Command::Run, Some(threads)) {
            return outcome(false, format!("pipeline failed with {threads} thread(s): {e}"));
        }
        trees.push(read_tree(&out));
    }
    let (a, b) = (&trees[0], &trees[1]);
    let differing: Vec<&String> = a
        .keys()
        .chain(b.keys())
        .filter(|k| a.get(*k) != b.get(*k))
        .collect();
    outcome(
        differing.is_empty() && a.len() > 20,
        format!(
            "{} artifacts compared between --threads 1 and 4; {} differ{}",
            a.len(),
            differing.len(),
            differing.first().map_or(String::new(), |k| format!(" (first: {k})"))
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("TreeSHAP oracle equivalence", treeshap_oracle),
        ("local accuracy", local_accuracy),
        ("AUC oracle", auc_oracle),
        ("MCC/metrics fixtures", metric_fixtures),
        ("calibration recovery", calibration_recovery),
        ("imbalance machinery", imbalance_machinery),
        ("greedy selection recovery", selection_recovery),
        ("generalization consistency", generalization),
        ("SHAP directionality", shap_directionality),
        ("statistics fixtures", statistics_fixtures),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {} [{:.1}s]",
            if result.pass { "PASS" } else { "FAIL" },
            i + 1,
            result.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
