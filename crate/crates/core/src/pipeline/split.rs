//! Label-stratified train/validation/test splitting.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::manifest::Manifest;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.7,
            val: 0.1,
            test: 0.2,
        }
    }
}

impl SplitFractions {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let f = SplitFractions { train, val, test };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::config("fractions", "each fraction must lie in [0, 1]"));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::config("fractions", "fractions must sum to 1"));
        }
        Ok(())
    }
}

/// Indices of the train, validation and test parts, each ascending.
///
/// Within each class the indices are shuffled, then the first
/// `round(n·train)` go to train and the next `round(n·val)` to validation;
/// the rest is test.
pub fn split_indices(
    labels: &[usize],
    fractions: SplitFractions,
    seed: u64,
) -> Result<[Vec<usize>; 3]> {
    fractions.validate()?;
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &y) in labels.iter().enumerate() {
        by_class.entry(y).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts: [Vec<usize>; 3] = Default::default();
    for (&class, members) in by_class.iter_mut() {
        members.shuffle(&mut rng);
        let n = members.len();
        let n_train = ((n as f64 * fractions.train).round() as usize).min(n);
        let n_val = ((n as f64 * fractions.val).round() as usize).min(n - n_train);
        parts[0].extend_from_slice(&members[..n_train]);
        parts[1].extend_from_slice(&members[n_train..n_train + n_val]);
        parts[2].extend_from_slice(&members[n_train + n_val..]);
        let wanted = [fractions.train, fractions.val, fractions.test];
        let got = [n_train, n_val, n - n_train - n_val];
        for (k, name) in ["train", "validation", "test"].iter().enumerate() {
            if wanted[k] > 0.0 && got[k] == 0 {
                log::warn!("{name} split has no samples of class {class}");
            }
        }
    }
    for p in &mut parts {
        p.sort_unstable();
    }
    Ok(parts)
}

/// Split a manifest into `[train, val, test]`.
pub fn split(manifest: &Manifest, fractions: SplitFractions, seed: u64) -> Result<[Manifest; 3]> {
    let [a, b, c] = split_indices(&manifest.labels(), fractions, seed)?;
    Ok([manifest.subset(&a), manifest.subset(&b), manifest.subset(&c)])
}
