//! Mini-batch Adam training with node-jitter augmentation, best-validation
//! checkpointing, and evaluation.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::manifest::{load_samples, Manifest};
use super::metrics::{age_group, stratified_metrics, Metrics};
use super::split::{split, SplitFractions};
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::graph::{augment, augmentation_seed, batch_refs, Sample};
use crate::nn::checkpoint::Checkpoint;
use crate::nn::{
    adam_step, loss_and_gradients, model_forward, softmax_rows, AdamConfig, AdamState, ConvKind,
    ModelConfig, ModelParameters,
};

pub const CHECKPOINT_FILE: &str = "checkpoint.txt";
pub const EPOCH_LOG_FILE: &str = "epochs.csv";

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub seed: u64,
    pub batch_size: usize,
    pub lr: f64,
    pub max_epochs: usize,
    /// Maximum per-coordinate node jitter, mm.
    pub aug_offset: f64,
    pub fractions: SplitFractions,
    pub features: FeatureConfig,
    pub model: ModelConfig,
    /// End training once validation AUC reaches 1. The retained checkpoint
    /// is the same as with the full epoch budget, since later epochs cannot
    /// strictly improve on it; only the epoch log is shorter.
    pub stop_at_perfect_val: bool,
}

impl TrainConfig {
    pub fn new(conv_kind: ConvKind, features: FeatureConfig, n_structures: usize) -> Self {
        TrainConfig {
            seed: 0,
            batch_size: 128,
            lr: 1e-3,
            max_epochs: 50,
            aug_offset: 0.0,
            fractions: SplitFractions::default(),
            features,
            model: ModelConfig::new(conv_kind, features.dim(), n_structures),
            stop_at_perfect_val: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be ≥ 1"));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::config("lr", "must be > 0"));
        }
        if !(self.aug_offset >= 0.0) || !self.aug_offset.is_finite() {
            return Err(Error::config("aug_offset", "aug must be ≥ 0"));
        }
        self.fractions.validate()?;
        self.features.validate()?;
        self.model.validate()?;
        if self.model.input_dim != self.features.dim() {
            return Err(Error::config(
                "input_dim",
                format!(
                    "features give {} dims, model expects {}",
                    self.features.dim(),
                    self.model.input_dim
                ),
            ));
        }
        Ok(())
    }

    fn checkpoint(&self, params: ModelParameters, epoch: usize) -> Checkpoint {
        Checkpoint {
            model: self.model.clone(),
            features: self.features,
            aug_offset: self.aug_offset,
            seed: self.seed,
            epoch,
            params,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean cross entropy over the epoch's training samples.
    pub train_loss: f64,
    pub val_auc: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters of the best-validation epoch.
    pub checkpoint: Checkpoint,
    pub epochs: Vec<EpochRecord>,
}

impl TrainOutcome {
    pub fn best_epoch(&self) -> usize {
        self.checkpoint.epoch
    }

    /// `epoch,train_loss,val_auc` CSV.
    pub fn epoch_log_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_auc\n");
        for e in &self.epochs {
            let _ = writeln!(s, "{},{},{}", e.epoch, e.train_loss, e.val_auc);
        }
        s
    }
}

fn shuffle_seed(seed: u64, epoch: usize) -> u64 {
    seed.rotate_left(17) ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn check_samples(config: &TrainConfig, samples: &[Sample], what: &str) -> Result<()> {
    for s in samples {
        if s.n_structures() != config.model.n_structures {
            return Err(Error::config(
                "n_structures",
                format!(
                    "{what} sample '{}' has {} structures, model expects {}",
                    s.sample_id,
                    s.n_structures(),
                    config.model.n_structures
                ),
            ));
        }
        if let Some(g) = s.graphs.iter().find(|g| g.features != config.features) {
            return Err(Error::config(
                "features",
                format!(
                    "{what} sample '{}' has {} features, config asks for {}",
                    s.sample_id, g.features.mode, config.features.mode
                ),
            ));
        }
    }
    Ok(())
}

/// Train on in-memory samples whose graphs were built with `config.features`.
pub fn train_samples(config: &TrainConfig, train: &[Sample], val: &[Sample]) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidArgument("empty training split".into()));
    }
    if val.is_empty() {
        return Err(Error::InvalidArgument("empty validation split".into()));
    }
    check_samples(config, train, "training")?;
    check_samples(config, val, "validation")?;

    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ModelParameters::init(&config.model, &mut init_rng);
    let mut state = AdamState::new(&params);
    let adam = AdamConfig {
        lr: config.lr,
        ..AdamConfig::default()
    };

    let mut best = config.checkpoint(params.clone(), 0);
    let mut best_auc = f64::NEG_INFINITY;
    let mut epochs = Vec::with_capacity(config.max_epochs);
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=config.max_epochs {
        order.sort_unstable();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed(config.seed, epoch)));
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let augmented = chunk
                .par_iter()
                .map(|&i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(augmentation_seed(config.seed, i, epoch));
                    augment(&train[i], config.aug_offset, &mut rng)
                })
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&Sample> = augmented.iter().collect();
            let b = batch_refs(&refs)?;
            let (loss, grads) = loss_and_gradients(&params, &config.model, &b)?;
            loss_sum += loss * chunk.len() as f64;
            adam_step(&mut params, &grads, &mut state, &adam)?;
        }
        let train_loss = loss_sum / train.len() as f64;
        let val_metrics = evaluate_samples(&params, &config.model, val, config.batch_size)?;
        let val_auc = val_metrics.auc().ok_or(Error::DegenerateLabels)?;
        log::info!("epoch {epoch}: train_loss {train_loss:.6} val_auc {val_auc:.6}");
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_auc,
        });
        if val_auc > best_auc {
            best_auc = val_auc;
            best = config.checkpoint(params.clone(), epoch);
        }
        if config.stop_at_perfect_val && best_auc >= 1.0 {
            log::info!("validation AUC is 1 after epoch {epoch}; stopping");
            break;
        }
    }
    Ok(TrainOutcome {
        checkpoint: best,
        epochs,
    })
}

/// Class probabilities for every sample, `samples × n_classes`, computed in
/// batches of `batch_size`.
pub fn predict_proba(
    params: &ModelParameters,
    model: &ModelConfig,
    samples: &[Sample],
    batch_size: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(batch_size.max(1)) {
        let refs: Vec<&Sample> = chunk.iter().collect();
        let probs = softmax_rows(&model_forward(params, model, &batch_refs(&refs)?)?);
        out.extend(probs.row_iter().map(|r| r.to_vec()));
    }
    Ok(out)
}

/// Metrics of `params` on `samples`, stratified by age bin, sex and group.
pub fn evaluate_samples(
    params: &ModelParameters,
    model: &ModelConfig,
    samples: &[Sample],
    batch_size: usize,
) -> Result<Metrics> {
    if samples.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let probs = predict_proba(params, model, samples, batch_size)?;
    let scores: Vec<f64> = probs.iter().map(|p| p.get(1).copied().unwrap_or(0.0)).collect();
    let predicted: Vec<usize> = probs
        .iter()
        .map(|p| {
            p.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (k, &v)| if v > best.1 { (k, v) } else { best })
                .0
        })
        .collect();
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let mut metrics = Metrics::compute(&scores, &predicted, &labels)?;
    for field in ["age", "sex", "group"] {
        let Some(values) = samples
            .iter()
            .map(|s| s.metadata.get(field).cloned())
            .collect::<Option<Vec<String>>>()
        else {
            continue;
        };
        let values = if field == "age" {
            values
                .iter()
                .map(|a| a.parse::<f64>().map_or_else(|_| "unknown".to_string(), age_group))
                .collect()
        } else {
            values
        };
        metrics
            .groups
            .insert(field.to_string(), stratified_metrics(&scores, &predicted, &labels, &values)?);
    }
    Ok(metrics)
}

/// Check that a checkpoint can read samples from `manifest`.
pub fn check_compatible(checkpoint: &Checkpoint, manifest: &Manifest) -> Result<()> {
    if manifest.n_structures() != checkpoint.model.n_structures {
        return Err(Error::config(
            "n_structures",
            format!(
                "manifest has {} structures, checkpoint expects {}",
                manifest.n_structures(),
                checkpoint.model.n_structures
            ),
        ));
    }
    if checkpoint.features.dim() != checkpoint.model.input_dim {
        return Err(Error::config("feature_mode", "checkpoint features disagree with input_dim"));
    }
    Ok(())
}

/// Evaluate a checkpoint on every sample of a manifest.
pub fn evaluate(checkpoint: &Checkpoint, manifest: &Manifest, cache_dir: Option<&Path>) -> Result<Metrics> {
    check_compatible(checkpoint, manifest)?;
    let samples = load_samples(manifest, &checkpoint.features, checkpoint.model.n_structures, cache_dir)?;
    evaluate_samples(&checkpoint.params, &checkpoint.model, &samples, 128)
}

/// Load `manifest`, split it, train, and write `checkpoint.txt`, `epochs.csv`
/// and `split_{train,val,test}.csv` under `out_dir`. Returns the checkpoint path.
pub fn train(
    config: &TrainConfig,
    manifest_path: impl AsRef<Path>,
    out_dir: impl AsRef<Path>,
    cache_dir: Option<&Path>,
) -> Result<(PathBuf, TrainOutcome)> {
    config.validate()?;
    let manifest = Manifest::load(manifest_path)?;
    if manifest.n_structures() != config.model.n_structures {
        return Err(Error::config(
            "n_structures",
            format!(
                "manifest has {} structures, config expects {}",
                manifest.n_structures(),
                config.model.n_structures
            ),
        ));
    }
    let [train_m, val_m, test_m] = split(&manifest, config.fractions, config.seed)?;
    if train_m.is_empty() {
        return Err(Error::InvalidArgument("empty training split".into()));
    }
    if val_m.is_empty() {
        return Err(Error::InvalidArgument("empty validation split".into()));
    }
    let n = config.model.n_structures;
    let train_s = load_samples(&train_m, &config.features, n, cache_dir)?;
    let val_s = load_samples(&val_m, &config.features, n, cache_dir)?;
    let outcome = train_samples(config, &train_s, &val_s)?;

    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for (name, m) in [("train", &train_m), ("val", &val_m), ("test", &test_m)] {
        m.save(out_dir.join(format!("split_{name}.csv")))?;
    }
    let log_path = out_dir.join(EPOCH_LOG_FILE);
    std::fs::write(&log_path, outcome.epoch_log_csv()).map_err(|e| Error::io(&log_path, e))?;
    let ckpt_path = out_dir.join(CHECKPOINT_FILE);
    outcome.checkpoint.save(&ckpt_path)?;
    Ok((ckpt_path, outcome))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureMode;
    use crate::pipeline::synthetic::{sample_meshes, SyntheticConfig};
    use std::collections::BTreeMap;

    fn samples(n: usize, features: &FeatureConfig) -> Vec<Sample> {
        let cfg = SyntheticConfig::new(n, 2, 0.3, 11);
        (0..n)
            .map(|i| {
                crate::graph::assemble_sample(
                    format!("s{i}"),
                    &sample_meshes(&cfg, i, i % 2),
                    2,
                    i % 2,
                    BTreeMap::new(),
                    features,
                )
                .unwrap()
            })
            .collect()
    }

    fn config() -> TrainConfig {
        let features = FeatureConfig::new(FeatureMode::Positional);
        let mut c = TrainConfig::new(ConvKind::Gcn, features, 2);
        c.model.hidden = 4;
        c.batch_size = 4;
        c.max_epochs = 2;
        c.aug_offset = 0.1;
        c
    }

    #[test]
    fn zero_epochs_keeps_initial_parameters() {
        let mut c = config();
        c.max_epochs = 0;
        let s = samples(6, &c.features);
        let out = train_samples(&c, &s[..4], &s[4..]).unwrap();
        assert!(out.epochs.is_empty());
        let init = ModelParameters::init(&c.model, &mut ChaCha8Rng::seed_from_u64(c.seed));
        assert_eq!(out.checkpoint.params, init);
        assert_eq!(out.best_epoch(), 0);
    }

    #[test]
    fn training_is_reproducible() {
        let c = config();
        let s = samples(8, &c.features);
        let a = train_samples(&c, &s[..6], &s[6..]).unwrap();
        let b = train_samples(&c, &s[..6], &s[6..]).unwrap();
        assert_eq!(a.epoch_log_csv(), b.epoch_log_csv());
        assert_eq!(a.checkpoint.to_text(), b.checkpoint.to_text());
        assert_eq!(a.epochs.len(), 2);
    }

    #[test]
    fn empty_splits_and_bad_config_fail() {
        let c = config();
        let s = samples(4, &c.features);
        assert!(train_samples(&c, &[], &s).is_err());
        assert!(train_samples(&c, &s, &[]).is_err());
        let mut bad = c.clone();
        bad.aug_offset = -1.0;
        let err = train_samples(&bad, &s, &s).unwrap_err().to_string();
        assert!(err.contains("aug must be ≥ 0"), "{err}");
    }

    #[test]
    fn accuracy_matches_argmax_recount() {
        let c = config();
        let s = samples(8, &c.features);
        let params = ModelParameters::init(&c.model, &mut ChaCha8Rng::seed_from_u64(2));
        let m = evaluate_samples(&params, &c.model, &s, 3).unwrap();
        let probs = predict_proba(&params, &c.model, &s, 8).unwrap();
        let correct = probs
            .iter()
            .zip(&s)
            .filter(|(p, s)| (p[1] > p[0]) as usize == s.label)
            .count();
        assert_eq!(m.accuracy, correct as f64 / 8.0);
        for p in probs {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
