//! Train a spline-conv classifier on an in-memory synthetic dataset and
//! report the test AUC.
//!
//! cargo run --release --example train_synthetic -- [samples] [epochs]

use std::collections::BTreeMap;
use std::time::Instant;

use meshgnn::features::{FeatureConfig, FeatureMode};
use meshgnn::graph::{assemble_sample, Sample};
use meshgnn::nn::ConvKind;
use meshgnn::pipeline::synthetic::{sample_meshes, SyntheticConfig};
use meshgnn::pipeline::{evaluate_samples, split_indices, train_samples, TrainConfig};

fn main() -> meshgnn::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n_samples = args.first().copied().unwrap_or(200);
    let epochs = args.get(1).copied().unwrap_or(10);

    let data = SyntheticConfig::new(n_samples, 4, 0.3, 1);
    let features = FeatureConfig::new(FeatureMode::Fpfh);
    let t0 = Instant::now();
    let samples: Vec<Sample> = (0..n_samples)
        .map(|i| {
            let label = i % 2;
            let meshes = sample_meshes(&data, i, label);
            assemble_sample(format!("s{i}"), &meshes, 4, label, BTreeMap::new(), &features)
        })
        .collect::<meshgnn::Result<_>>()?;
    println!("built {n_samples} samples in {:.1?}", t0.elapsed());

    let mut config = TrainConfig::new(ConvKind::Spline, features, 4);
    config.max_epochs = epochs;
    config.aug_offset = 0.1;
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let [tr, va, te] = split_indices(&labels, config.fractions, config.seed)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| samples[i].clone()).collect::<Vec<_>>();

    let t1 = Instant::now();
    let outcome = train_samples(&config, &pick(&tr), &pick(&va))?;
    println!("trained {epochs} epochs in {:.1?}", t1.elapsed());
    let ckpt = &outcome.checkpoint;
    let test = evaluate_samples(&ckpt.params, &ckpt.model, &pick(&te), 128)?;
    println!(
        "best epoch {} test auc {:.4} accuracy {:.4}",
        ckpt.epoch,
        test.auc().unwrap_or(f64::NAN),
        test.accuracy
    );
    Ok(())
}
