//! Structure graphs, multi-graph samples, disjoint-union batches and
//! node-jitter augmentation.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::features::{edge_attributes, node_features_with, FeatureConfig, FeatureMode};
use crate::linalg::{Matrix, Vec3};
use crate::mesh::{edges_from_faces, Mesh};

/// Default structure count per sample.
pub const DEFAULT_STRUCTURES: usize = 15;

/// One structure's mesh as a graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    pub structure_id: usize,
    pub node_features: Matrix,
    /// Directed `(source, target)` pairs.
    pub edges: Vec<(usize, usize)>,
    /// One `(r, θ, φ)` row in `[0,1]³` per edge.
    pub edge_attrs: Matrix,
    /// Geometry the features were computed from; augmentation perturbs it.
    pub mesh: Mesh,
    pub features: FeatureConfig,
}

impl Graph {
    pub fn node_count(&self) -> usize {
        self.mesh.vertex_count()
    }

    pub fn node_positions(&self) -> &[Vec3] {
        self.mesh.vertices()
    }
}

pub fn build_graph(mesh: &Mesh, features: &FeatureConfig, structure_id: usize) -> Graph {
    let node_features = node_features_with(mesh, features);
    graph_with_features(mesh, features, structure_id, node_features)
}

/// Like [`build_graph`] but with node features computed elsewhere (e.g. a cache).
pub fn graph_with_features(
    mesh: &Mesh,
    features: &FeatureConfig,
    structure_id: usize,
    node_features: Matrix,
) -> Graph {
    let edges = edges_from_faces(mesh);
    let edge_attrs = edge_attributes(mesh.vertices(), &edges);
    Graph {
        structure_id,
        node_features,
        edges,
        edge_attrs,
        mesh: mesh.clone(),
        features: *features,
    }
}

/// A labeled observation made of `N` structure graphs.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub sample_id: String,
    pub label: usize,
    pub graphs: Vec<Graph>,
    /// Group fields such as `age`, `sex`, `group`.
    pub metadata: BTreeMap<String, String>,
}

impl Sample {
    pub fn n_structures(&self) -> usize {
        self.graphs.len()
    }
}

pub fn assemble_sample(
    sample_id: impl Into<String>,
    meshes: &[Mesh],
    n_structures: usize,
    label: usize,
    metadata: BTreeMap<String, String>,
    features: &FeatureConfig,
) -> Result<Sample> {
    if meshes.len() != n_structures {
        return Err(Error::StructureCount {
            expected: n_structures,
            got: meshes.len(),
        });
    }
    let graphs = meshes
        .iter()
        .enumerate()
        .map(|(s, m)| build_graph(m, features, s))
        .collect();
    Ok(Sample {
        sample_id: sample_id.into(),
        label,
        graphs,
        metadata,
    })
}

/// Disjoint union of one structure's graphs across the batch.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphUnion {
    pub node_features: Matrix,
    pub edges: Vec<(usize, usize)>,
    pub edge_attrs: Matrix,
    /// Batch position of every node, non-decreasing.
    pub assignment: Vec<usize>,
    /// Node offset of each member; `batch_size + 1` entries.
    pub node_offsets: Vec<usize>,
    /// Edge offset of each member; `batch_size + 1` entries.
    pub edge_offsets: Vec<usize>,
}

impl GraphUnion {
    pub fn node_count(&self) -> usize {
        self.node_features.rows()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    /// Indexed by structure id.
    pub structures: Vec<GraphUnion>,
    pub labels: Vec<usize>,
    pub sample_ids: Vec<String>,
}

impl Batch {
    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn n_structures(&self) -> usize {
        self.structures.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.structures.first().map_or(0, |u| u.node_features.cols())
    }

    /// Split back into per-sample, per-structure parts with local indices.
    pub fn unbatch(&self) -> Vec<Vec<GraphParts>> {
        (0..self.size())
            .map(|b| {
                self.structures
                    .iter()
                    .map(|u| {
                        let (n0, n1) = (u.node_offsets[b], u.node_offsets[b + 1]);
                        let (e0, e1) = (u.edge_offsets[b], u.edge_offsets[b + 1]);
                        GraphParts {
                            node_features: u.node_features.slice_rows(n0, n1),
                            edges: u.edges[e0..e1]
                                .iter()
                                .map(|&(s, t)| (s - n0, t - n0))
                                .collect(),
                            edge_attrs: u.edge_attrs.slice_rows(e0, e1),
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// The tensors of one graph, as recovered by [`Batch::unbatch`].
#[derive(Clone, Debug, PartialEq)]
pub struct GraphParts {
    pub node_features: Matrix,
    pub edges: Vec<(usize, usize)>,
    pub edge_attrs: Matrix,
}

impl From<&Graph> for GraphParts {
    fn from(g: &Graph) -> Self {
        GraphParts {
            node_features: g.node_features.clone(),
            edges: g.edges.clone(),
            edge_attrs: g.edge_attrs.clone(),
        }
    }
}

pub fn batch(samples: &[Sample]) -> Result<Batch> {
    let refs: Vec<&Sample> = samples.iter().collect();
    batch_refs(&refs)
}

pub fn batch_refs(samples: &[&Sample]) -> Result<Batch> {
    let first = samples.first().ok_or(Error::EmptyBatch)?;
    let n = first.n_structures();
    let dim = first.graphs.first().map_or(0, |g| g.node_features.cols());
    for s in samples {
        if s.n_structures() != n {
            return Err(Error::Shape(format!(
                "sample '{}' has {} structures, expected {n}",
                s.sample_id,
                s.n_structures()
            )));
        }
        if let Some(g) = s.graphs.iter().find(|g| g.node_features.cols() != dim) {
            return Err(Error::Shape(format!(
                "sample '{}' structure {} has feature dim {}, expected {dim}",
                s.sample_id,
                g.structure_id,
                g.node_features.cols()
            )));
        }
    }

    let structures = (0..n)
        .map(|sid| {
            let graphs: Vec<&Graph> = samples.iter().map(|s| &s.graphs[sid]).collect();
            let feats: Vec<&Matrix> = graphs.iter().map(|g| &g.node_features).collect();
            let attrs: Vec<&Matrix> = graphs.iter().map(|g| &g.edge_attrs).collect();
            let mut edges = Vec::new();
            let mut assignment = Vec::new();
            let mut node_offsets = vec![0];
            let mut edge_offsets = vec![0];
            for (b, g) in graphs.iter().enumerate() {
                let off = *node_offsets.last().unwrap();
                edges.extend(g.edges.iter().map(|&(s, t)| (s + off, t + off)));
                assignment.extend(std::iter::repeat(b).take(g.node_features.rows()));
                node_offsets.push(off + g.node_features.rows());
                edge_offsets.push(edges.len());
            }
            Ok(GraphUnion {
                node_features: Matrix::vstack(&feats)?,
                edges,
                edge_attrs: Matrix::vstack(&attrs)?,
                assignment,
                node_offsets,
                edge_offsets,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Batch {
        structures,
        labels: samples.iter().map(|s| s.label).collect(),
        sample_ids: samples.iter().map(|s| s.sample_id.clone()).collect(),
    })
}

/// Seed for augmenting the sample at `index` during `epoch`.
pub fn augmentation_seed(base_seed: u64, index: usize, epoch: usize) -> u64 {
    base_seed ^ index as u64 ^ ((epoch as u64) << 32)
}

/// Jitter every node by an independent uniform offset in `[-max_offset, max_offset]`
/// per coordinate, then recompute the position-dependent features.
pub fn augment<R: Rng + ?Sized>(sample: &Sample, max_offset: f64, rng: &mut R) -> Result<Sample> {
    if !(max_offset >= 0.0) {
        return Err(Error::InvalidArgument("max_offset must be ≥ 0".into()));
    }
    if max_offset == 0.0 {
        return Ok(sample.clone());
    }
    let graphs = sample
        .graphs
        .iter()
        .map(|g| {
            let moved: Vec<Vec3> = g
                .node_positions()
                .iter()
                .map(|p| {
                    let mut q = *p;
                    for c in &mut q {
                        *c += rng.gen_range(-max_offset..=max_offset);
                    }
                    q
                })
                .collect();
            let mesh = g.mesh.with_vertices(moved)?;
            let node_features = match g.features.mode {
                FeatureMode::Constant => g.node_features.clone(),
                _ => node_features_with(&mesh, &g.features),
            };
            Ok(graph_with_features(&mesh, &g.features, g.structure_id, node_features))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Sample {
        sample_id: sample.sample_id.clone(),
        label: sample.label,
        graphs,
        metadata: sample.metadata.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tri(offset: f64) -> Mesh {
        Mesh::new(
            vec![[offset, 0.0, 0.0], [offset + 1.0, 0.0, 0.0], [offset, 1.0, 0.0]],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    fn quad() -> Mesh {
        Mesh::new(
            vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.5]],
            vec![[0, 1, 2], [1, 3, 2]],
        )
        .unwrap()
    }

    fn sample(id: &str, meshes: &[Mesh], mode: FeatureMode) -> Sample {
        assemble_sample(
            id,
            meshes,
            meshes.len(),
            0,
            BTreeMap::new(),
            &FeatureConfig::new(mode),
        )
        .unwrap()
    }

    #[test]
    fn triangle_graph() {
        let g = build_graph(&tri(0.0), &FeatureConfig::new(FeatureMode::Constant), 0);
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edges.len(), 6);
        assert_eq!(g.node_features, Matrix::filled(3, 1, 1.0));
        assert_eq!(g.edge_attrs.rows(), 6);
        let p = build_graph(&tri(2.0), &FeatureConfig::new(FeatureMode::Positional), 0);
        assert_eq!(p.node_features.row(1), &[3.0, 0.0, 0.0]);
    }

    #[test]
    fn structure_count_is_enforced() {
        let cfg = FeatureConfig::new(FeatureMode::Constant);
        let meshes = vec![tri(0.0); 15];
        let s = assemble_sample("a", &meshes, 15, 1, BTreeMap::new(), &cfg).unwrap();
        assert_eq!(s.graphs.len(), 15);
        assert!(s.graphs.iter().enumerate().all(|(i, g)| g.structure_id == i));
        assert!(matches!(
            assemble_sample("a", &meshes[..14], 15, 1, BTreeMap::new(), &cfg),
            Err(Error::StructureCount { expected: 15, got: 14 })
        ));
        assert!(assemble_sample("a", &meshes[..2], 2, 1, BTreeMap::new(), &cfg).is_ok());
    }

    #[test]
    fn batch_offsets() {
        let a = sample("a", &[tri(0.0)], FeatureMode::Constant);
        let b = sample("b", &[quad()], FeatureMode::Constant);
        let batch = batch(&[a.clone(), b.clone()]).unwrap();
        let u = &batch.structures[0];
        assert_eq!(u.node_count(), 7);
        assert_eq!(u.assignment, vec![0, 0, 0, 1, 1, 1, 1]);
        let e0 = a.graphs[0].edges.len();
        assert_eq!(u.edges[e0], (b.graphs[0].edges[0].0 + 3, b.graphs[0].edges[0].1 + 3));

        let parts = batch.unbatch();
        assert_eq!(parts[1][0], GraphParts::from(&b.graphs[0]));
        assert_eq!(parts[0][0], GraphParts::from(&a.graphs[0]));
    }

    #[test]
    fn single_and_empty_batches() {
        let a = sample("a", &[quad()], FeatureMode::Positional);
        let one = batch(std::slice::from_ref(&a)).unwrap();
        assert_eq!(one.structures[0].edges, a.graphs[0].edges);
        assert_eq!(one.structures[0].node_features, a.graphs[0].node_features);
        assert!(matches!(batch(&[]), Err(Error::EmptyBatch)));
        let c = sample("c", &[quad()], FeatureMode::Constant);
        assert!(batch(&[a, c]).is_err());
    }

    #[test]
    fn augmentation_bounds_and_determinism() {
        let s = sample("a", &[quad(), tri(3.0)], FeatureMode::Positional);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(augment(&s, 0.0, &mut rng).unwrap(), s);

        let a1 = augment(&s, 0.1, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let a2 = augment(&s, 0.1, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let a3 = augment(&s, 0.1, &mut ChaCha8Rng::seed_from_u64(10)).unwrap();
        assert_eq!(a1, a2);
        assert_ne!(a1.graphs[0].node_positions(), a3.graphs[0].node_positions());
        for (g0, g1) in s.graphs.iter().zip(&a1.graphs) {
            assert_eq!(g0.edges, g1.edges);
            for (p, q) in g0.node_positions().iter().zip(g1.node_positions()) {
                for d in 0..3 {
                    assert!((p[d] - q[d]).abs() <= 0.1);
                }
            }
            // positional features track the moved vertices
            assert_eq!(g1.node_features, Matrix::from_rows(g1.node_positions()).unwrap());
        }
        assert_eq!(a1.label, s.label);
    }

    #[test]
    fn constant_features_survive_augmentation() {
        let s = sample("a", &[quad()], FeatureMode::Constant);
        let a = augment(&s, 0.5, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(a.graphs[0].node_features, s.graphs[0].node_features);
        assert_ne!(a.graphs[0].edge_attrs, s.graphs[0].edge_attrs);
    }
}
