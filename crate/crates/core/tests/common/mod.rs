#![allow(dead_code)]

use std::collections::BTreeMap;

use meshgnn::features::{FeatureConfig, FeatureMode};
use meshgnn::graph::{assemble_sample, Sample};
use meshgnn::linalg::Vec3;
use meshgnn::pipeline::synthetic::{icosphere, random_rotation, random_translation};
use meshgnn::Mesh;
use rand::Rng;

/// Icosphere with per-vertex radial noise, scaled to `radius` mm.
pub fn noisy_sphere<R: Rng>(rng: &mut R, subdivisions: usize, radius: f64) -> Mesh {
    let base = icosphere(subdivisions);
    let verts: Vec<Vec3> = base
        .vertices()
        .iter()
        .map(|v| {
            let s = radius * rng.gen_range(0.85..1.15);
            [v[0] * s, v[1] * s, v[2] * s]
        })
        .collect();
    base.with_vertices(verts).unwrap()
}

/// Random rigid motion applied to `mesh`.
pub fn random_pose<R: Rng>(rng: &mut R, mesh: &Mesh, max_translation: f64) -> Mesh {
    let rot = random_rotation(rng);
    let t = random_translation(rng, max_translation);
    mesh.transformed(&rot, t)
}

/// Feature configuration whose width is `dim` (1, 3 or 33).
pub fn features_of_dim(dim: usize) -> FeatureConfig {
    let mode = match dim {
        1 => FeatureMode::Constant,
        3 => FeatureMode::Positional,
        33 => FeatureMode::Fpfh,
        _ => panic!("no feature mode of width {dim}"),
    };
    let f = FeatureConfig::new(mode);
    assert_eq!(f.dim(), dim);
    f
}

/// Samples of `n_structures` random 12-vertex meshes each.
pub fn small_samples<R: Rng>(
    rng: &mut R,
    count: usize,
    n_structures: usize,
    features: &FeatureConfig,
) -> Vec<Sample> {
    (0..count)
        .map(|i| {
            let meshes: Vec<Mesh> = (0..n_structures)
                .map(|_| {
                    let m = noisy_sphere(rng, 0, 5.0);
                    random_pose(rng, &m, 3.0)
                })
                .collect();
            assemble_sample(format!("t{i}"), &meshes, n_structures, i % 2, BTreeMap::new(), features)
                .unwrap()
        })
        .collect()
}
