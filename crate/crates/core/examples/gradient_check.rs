//! Compare backpropagated gradients with central differences for each
//! convolution kind.
//!
//! cargo run --release --example gradient_check

use std::collections::BTreeMap;

use meshgnn::features::{FeatureConfig, FeatureMode};
use meshgnn::graph::{assemble_sample, batch, Sample};
use meshgnn::nn::{cross_entropy, loss_and_gradients, model_forward, ConvKind, ModelConfig, ModelParameters};
use meshgnn::pipeline::synthetic::icosphere;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> meshgnn::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let features = FeatureConfig::new(FeatureMode::Positional);
    let base = icosphere(0);
    let samples: Vec<Sample> = (0..4)
        .map(|i| {
            let mesh = base.with_vertices(
                base.vertices().iter().map(|v| v.map(|c| c * rng.gen_range(4.0..6.0))).collect(),
            )?;
            assemble_sample(format!("g{i}"), &[mesh], 1, i % 2, BTreeMap::new(), &features)
        })
        .collect::<meshgnn::Result<_>>()?;
    let b = batch(&samples)?;
    let h = 1e-5;

    for kind in ConvKind::ALL {
        let mut config = ModelConfig::new(kind, features.dim(), 1);
        config.hidden = 4;
        let mut params = ModelParameters::init(&config, &mut rng);
        // nudge the zero-initialized biases so no unit starts exactly at a ReLU kink
        for (_, t) in params.iter_mut() {
            t.data.iter_mut().for_each(|v| *v += rng.gen_range(-0.1..0.1));
        }
        let (_, grads) = loss_and_gradients(&params, &config, &b)?;
        let names: Vec<String> = params.iter().map(|(n, _)| n.clone()).collect();
        let mut worst = 0.0f64;
        let mut nonzero = 0;
        for name in &names {
            for i in 0..params.get(name).unwrap().len() {
                let orig = params.get(name).unwrap().data[i];
                let loss_at = |v: f64, p: &mut ModelParameters| {
                    p.get_mut(name).unwrap().data[i] = v;
                    cross_entropy(&model_forward(p, &config, &b).unwrap(), &b.labels)
                };
                let numeric = (loss_at(orig + h, &mut params) - loss_at(orig - h, &mut params)) / (2.0 * h);
                loss_at(orig, &mut params);
                let analytic = grads.get(name).unwrap().data[i];
                nonzero += (analytic != 0.0) as usize;
                worst = worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6));
            }
        }
        println!(
            "{:<9} {} parameters ({nonzero} with nonzero gradient), max relative error {worst:.2e}",
            kind.as_str(),
            params.scalar_count()
        );
    }
    Ok(())
}
