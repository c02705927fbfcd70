//! Train on randomly posed meshes and test on a translated copy of the test
//! split, once with FPFH features and once with raw positions.
//!
//! cargo run --release --example pose_robustness -- [samples] [epochs]

use std::collections::BTreeMap;

use meshgnn::features::{FeatureConfig, FeatureMode};
use meshgnn::graph::{assemble_sample, Sample};
use meshgnn::nn::ConvKind;
use meshgnn::pipeline::synthetic::{sample_meshes, SyntheticConfig};
use meshgnn::pipeline::{evaluate_samples, split_indices, train_samples, DomainShift, PoseMode, TrainConfig};

fn build(data: &SyntheticConfig, ids: &[usize], features: &FeatureConfig) -> meshgnn::Result<Vec<Sample>> {
    ids.iter()
        .map(|&i| {
            let meshes = sample_meshes(data, i, i % 2);
            assemble_sample(format!("s{i}"), &meshes, data.n_structures, i % 2, BTreeMap::new(), features)
        })
        .collect()
}

fn main() -> meshgnn::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(200);
    let epochs = args.get(1).copied().unwrap_or(10);

    let posed = SyntheticConfig {
        pose: PoseMode::Random,
        ..SyntheticConfig::new(n, 4, 0.3, 7)
    };
    let shifted = SyntheticConfig {
        shift: DomainShift::Translate,
        ..posed
    };
    let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();

    for mode in [FeatureMode::Fpfh, FeatureMode::Positional] {
        let features = FeatureConfig::new(mode);
        let mut config = TrainConfig::new(ConvKind::Spline, features, 4);
        config.max_epochs = epochs;
        config.aug_offset = 0.1;
        let [tr, va, te] = split_indices(&labels, config.fractions, config.seed)?;
        let outcome = train_samples(&config, &build(&posed, &tr, &features)?, &build(&posed, &va, &features)?)?;
        let ckpt = &outcome.checkpoint;
        let same = evaluate_samples(&ckpt.params, &ckpt.model, &build(&posed, &te, &features)?, 128)?;
        let moved = evaluate_samples(&ckpt.params, &ckpt.model, &build(&shifted, &te, &features)?, 128)?;
        println!(
            "{:<10} test auc {:.4}, translated test auc {:.4}",
            mode.as_str(),
            same.auc().unwrap_or(f64::NAN),
            moved.auc().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
