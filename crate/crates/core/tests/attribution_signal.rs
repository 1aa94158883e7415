//! Attributions recover the direction and importance of planted effects.

use readmit_core::data::{generate_synthetic, InformativeFeature, SyntheticConfig};
use readmit_core::explain::{forest_shap, summary_ranking};
use readmit_core::learner::{fit_forest, ForestParams};
use readmit_core::stats::spearman;

fn planted(seed: u64, n_rows: usize) -> readmit_core::data::Dataset {
    let cfg = SyntheticConfig {
        n_rows,
        informative: vec![
            InformativeFeature::continuous("up", 1.5),
            InformativeFeature::continuous("down", -1.5),
            InformativeFeature::continuous("mild", 0.8),
        ],
        noise_count: 5,
        seed,
        ..SyntheticConfig::default()
    };
    generate_synthetic(&cfg).unwrap().0.to_dataset().unwrap()
}

#[test]
fn attribution_tracks_feature_value_with_coefficient_sign() {
    let data = planted(5, 2000);
    let params = ForestParams {
        n_trees: 40,
        seed: 5,
        ..ForestParams::default()
    };
    let model = fit_forest(&data, &params).unwrap();
    let shap = forest_shap(&model, &data.x).unwrap();
    for (name, positive) in [("up", true), ("down", false)] {
        let j = data.feature_index(name).unwrap();
        let rho = spearman(&data.x.column(j), &shap.values.column(j)).unwrap();
        if positive {
            assert!(rho > 0.5, "{name}: {rho}");
        } else {
            assert!(rho < -0.5, "{name}: {rho}");
        }
    }
}

#[test]
fn planted_features_lead_the_ranking() {
    let mut hits = 0;
    for seed in 0..10 {
        let data = planted(100 + seed, 1500);
        let params = ForestParams {
            n_trees: 30,
            seed,
            ..ForestParams::default()
        };
        let model = fit_forest(&data, &params).unwrap();
        let shap = forest_shap(&model, &data.x).unwrap();
        let ranking = summary_ranking(&shap, 3);
        let mut top = ranking.names();
        top.sort();
        if top == ["down", "mild", "up"] {
            hits += 1;
        }
    }
    assert!(hits >= 9, "planted features ranked top-3 in {hits}/10 seeds");
}
