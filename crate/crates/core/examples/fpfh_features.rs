//! FPFH descriptors of a synthetic structure, before and after a random
//! rigid motion.
//!
//! cargo run --release --example fpfh_features

use meshgnn::features::{fpfh, DEFAULT_BINS, DEFAULT_MAX_NEIGHBORS, DEFAULT_RADIUS};
use meshgnn::pipeline::synthetic::{random_rotation, random_translation, sample_meshes, SyntheticConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let data = SyntheticConfig::new(2, 1, 0.3, 4);
    let plain = &sample_meshes(&data, 0, 0)[0];
    let bumped = &sample_meshes(&data, 0, 1)[0];
    let f = |m| fpfh(m, DEFAULT_RADIUS, DEFAULT_MAX_NEIGHBORS, DEFAULT_BINS);

    let a = f(plain);
    let b = f(bumped);
    println!("{} vertices x {} features", a.rows(), a.cols());
    let fmt = |row: &[f64]| row[..11].iter().map(|v| format!("{v:5.1}")).collect::<Vec<_>>().join(" ");
    println!("alpha bins, vertex 0, plain : {}", fmt(a.row(0)));
    println!("alpha bins, vertex 0, bumped: {}", fmt(b.row(0)));
    println!("max |plain - bumped| over all vertices: {:.3}", a.max_abs_diff(&b));

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let moved = bumped.transformed(&random_rotation(&mut rng), random_translation(&mut rng, 50.0));
    println!("max |bumped - moved bumped|: {:.2e}", b.max_abs_diff(&f(&moved)));
}
