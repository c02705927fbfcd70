//! Synthetic multi-structure mesh datasets.
//!
//! Every structure is a subdivided icosphere with per-sample anisotropic
//! scaling and vertex jitter. Class 1 samples additionally get a smooth radial
//! bump on the even-indexed structures. Generation is fully determined by the
//! seed: each sample draws from its own RNG stream.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::manifest::{Manifest, ManifestRow};
use crate::error::{Error, Result};
use crate::linalg::{self, Vec3};
use crate::mesh::{self, Mesh};

pub const ICOSPHERE_SUBDIVISIONS: usize = 2;
/// Radius of the undeformed structure, mm.
pub const BASE_RADIUS: f64 = 8.0;
/// Distance between neighboring structure centers, mm.
pub const STRUCTURE_SPACING: f64 = 30.0;
/// Per-axis scale factors are drawn from `1 ± SCALE_JITTER`.
pub const SCALE_JITTER: f64 = 0.08;
/// Per-coordinate vertex noise bound, mm.
pub const VERTEX_JITTER: f64 = 0.05;
/// Angular width (radians) of the class bump.
pub const BUMP_WIDTH: f64 = 0.6;
/// Largest random-pose translation norm, mm.
pub const MAX_POSE_TRANSLATION: f64 = 50.0;
/// Offset added to every coordinate by the translate shift, mm.
pub const SHIFT_TRANSLATION: f64 = 100.0;
pub const SHIFT_SCALE: f64 = 1.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoseMode {
    Aligned,
    /// Per-sample random rotation and translation.
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainShift {
    None,
    Translate,
    Scale,
}

impl fmt::Display for PoseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PoseMode::Aligned => "aligned",
            PoseMode::Random => "random",
        })
    }
}

impl FromStr for PoseMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aligned" => Ok(PoseMode::Aligned),
            "random" => Ok(PoseMode::Random),
            _ => Err(Error::InvalidArgument(format!("unknown pose mode '{s}'"))),
        }
    }
}

impl fmt::Display for DomainShift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainShift::None => "none",
            DomainShift::Translate => "translate",
            DomainShift::Scale => "scale",
        })
    }
}

impl FromStr for DomainShift {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(DomainShift::None),
            "translate" => Ok(DomainShift::Translate),
            "scale" => Ok(DomainShift::Scale),
            _ => Err(Error::InvalidArgument(format!("unknown domain shift '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub n_samples: usize,
    pub n_structures: usize,
    /// Bump amplitude as a fraction of [`BASE_RADIUS`].
    pub class_effect: f64,
    pub pose: PoseMode,
    pub shift: DomainShift,
    pub seed: u64,
}

impl SyntheticConfig {
    pub fn new(n_samples: usize, n_structures: usize, class_effect: f64, seed: u64) -> Self {
        SyntheticConfig {
            n_samples,
            n_structures,
            class_effect,
            pose: PoseMode::Aligned,
            shift: DomainShift::None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 4 {
            return Err(Error::InvalidArgument("n_samples must be ≥ 4".into()));
        }
        if self.n_structures == 0 {
            return Err(Error::InvalidArgument("n_structures must be ≥ 1".into()));
        }
        if !(self.class_effect >= 0.0) || !self.class_effect.is_finite() {
            return Err(Error::InvalidArgument("class_effect must be ≥ 0".into()));
        }
        Ok(())
    }

    /// `key=value` pairs written as manifest comments.
    pub fn describe(&self) -> Vec<String> {
        vec![
            format!(
                "synthetic n_samples={} n_structures={} class_effect={} pose={} shift={} seed={}",
                self.n_samples, self.n_structures, self.class_effect, self.pose, self.shift, self.seed
            ),
            format!(
                "geometry icosphere_subdivisions={ICOSPHERE_SUBDIVISIONS} base_radius_mm={BASE_RADIUS} \
                 spacing_mm={STRUCTURE_SPACING} scale_jitter={SCALE_JITTER} vertex_jitter_mm={VERTEX_JITTER}"
            ),
            format!(
                "class bump on even structures, radial gaussian width_rad={BUMP_WIDTH} amplitude=class_effect*base_radius"
            ),
            format!(
                "pose max_translation_mm={MAX_POSE_TRANSLATION}; shift translate_mm={SHIFT_TRANSLATION} scale={SHIFT_SCALE}"
            ),
        ]
    }
}

/// Unit icosphere after `subdivisions` rounds of midpoint splitting.
pub fn icosphere(subdivisions: usize) -> Mesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|&v| linalg::scale(v, 1.0 / linalg::norm(v)))
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vec3>| {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let m = linalg::scale(linalg::add(vertices[a], vertices[b]), 0.5);
                vertices.push(linalg::scale(m, 1.0 / linalg::norm(m)));
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    Mesh::new(vertices, faces).expect("icosphere is valid")
}

/// Uniformly random rotation from a quaternion sampled in the unit 4-ball.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> [[f64; 3]; 3] {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let n2: f64 = q.iter().map(|x| x * x).sum();
        if n2 > 1e-6 && n2 <= 1.0 {
            let n = n2.sqrt();
            let [w, x, y, z] = q.map(|c| c / n);
            return [
                [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
                [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
                [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
            ];
        }
    }
}

/// Translation drawn uniformly from the ball of radius `max_norm`.
pub fn random_translation<R: Rng + ?Sized>(rng: &mut R, max_norm: f64) -> Vec3 {
    loop {
        let t: Vec3 = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        if linalg::norm(t) <= 1.0 {
            return linalg::scale(t, max_norm);
        }
    }
}

/// Fixed bump direction of structure `s` in its local frame.
fn bump_direction(s: usize) -> Vec3 {
    let a = s as f64 * 2.399_963_229_728_653; // golden angle
    let z: f64 = 0.5;
    let r = (1.0 - z * z).sqrt();
    [r * a.cos(), r * a.sin(), z]
}

fn structure_center(s: usize) -> Vec3 {
    [s as f64 * STRUCTURE_SPACING, 0.0, 0.0]
}

/// Meshes of one sample, in structure order.
pub fn sample_meshes(config: &SyntheticConfig, index: usize, label: usize) -> Vec<Mesh> {
    let sphere = icosphere(ICOSPHERE_SUBDIVISIONS);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64 + 1);

    let pose = match config.pose {
        PoseMode::Aligned => None,
        PoseMode::Random => Some((
            random_rotation(&mut rng),
            random_translation(&mut rng, MAX_POSE_TRANSLATION),
        )),
    };

    (0..config.n_structures)
        .map(|s| {
            let scale: Vec3 = std::array::from_fn(|_| 1.0 + rng.gen_range(-SCALE_JITTER..SCALE_JITTER));
            let bump = if label == 1 && s % 2 == 0 {
                config.class_effect * BASE_RADIUS
            } else {
                0.0
            };
            let dir = bump_direction(s);
            let center = structure_center(s);
            let verts: Vec<Vec3> = sphere
                .vertices()
                .iter()
                .map(|&u| {
                    let angle = linalg::dot(u, dir).clamp(-1.0, 1.0).acos();
                    let r = BASE_RADIUS + bump * (-(angle * angle) / (2.0 * BUMP_WIDTH * BUMP_WIDTH)).exp();
                    let mut p = [0.0; 3];
                    for c in 0..3 {
                        p[c] = u[c] * r * scale[c] + rng.gen_range(-VERTEX_JITTER..VERTEX_JITTER);
                    }
                    let mut p = linalg::add(p, center);
                    if let Some((rot, t)) = &pose {
                        p = linalg::add(linalg::mat3_mul(rot, p), *t);
                    }
                    match config.shift {
                        DomainShift::None => p,
                        DomainShift::Translate => p.map(|c| c + SHIFT_TRANSLATION),
                        DomainShift::Scale => p.map(|c| c * SHIFT_SCALE),
                    }
                })
                .collect();
            sphere.with_vertices(verts).expect("finite vertices")
        })
        .collect()
}

pub fn sample_id(index: usize) -> String {
    format!("s{index:05}")
}

/// Synthetic metadata of sample `index`: (age in years, sex, group).
fn metadata(config: &SyntheticConfig, index: usize) -> (u32, &'static str, &'static str) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x6d65_7461);
    rng.set_stream(index as u64 + 1);
    let age = rng.gen_range(18..90);
    let sex = if rng.gen_bool(0.5) { "F" } else { "M" };
    let group = if rng.gen_bool(0.5) { "site_a" } else { "site_b" };
    (age, sex, group)
}

/// Write the dataset under `out_dir` (`manifest.csv` plus `meshes/*.off`)
/// and return the manifest path.
pub fn gen_synthetic(config: &SyntheticConfig, out_dir: impl AsRef<Path>) -> Result<PathBuf> {
    config.validate()?;
    let out_dir = out_dir.as_ref();
    let mesh_dir = out_dir.join("meshes");
    std::fs::create_dir_all(&mesh_dir).map_err(|e| Error::io(&mesh_dir, e))?;

    let mut rows = Vec::with_capacity(config.n_samples);
    for i in 0..config.n_samples {
        let label = i % 2;
        let id = sample_id(i);
        let mut paths = Vec::with_capacity(config.n_structures);
        for (s, m) in sample_meshes(config, i, label).iter().enumerate() {
            let rel = PathBuf::from("meshes").join(format!("{id}_{s:02}.off"));
            mesh::save_off(m, out_dir.join(&rel))?;
            paths.push(out_dir.join(rel));
        }
        let (age, sex, group) = metadata(config, i);
        rows.push(ManifestRow {
            sample_id: id,
            label,
            age: age as f64,
            sex: sex.into(),
            group: group.into(),
            meshes: paths,
        });
    }
    let manifest = Manifest {
        rows,
        comments: config.describe(),
    };
    let path = out_dir.join("manifest.csv");
    manifest.save(&path)?;
    Ok(path)
}
