//! Node features (constant, positional, FPFH) and spherical edge attributes.

pub mod cache;
mod fpfh;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

pub use fpfh::{
    darboux_angles, fpfh, spfh, DarbouxAngles, DEFAULT_BINS, DEFAULT_MAX_NEIGHBORS,
    DEFAULT_RADIUS,
};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vec3};
use crate::mesh::Mesh;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FeatureMode {
    /// One column of ones.
    Constant,
    /// Raw vertex coordinates in mm.
    Positional,
    /// 3·bins-wide FPFH descriptor.
    Fpfh,
}

impl FeatureMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::Constant => "constant",
            FeatureMode::Positional => "positional",
            FeatureMode::Fpfh => "fpfh",
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(FeatureMode::Constant),
            "positional" => Ok(FeatureMode::Positional),
            "fpfh" => Ok(FeatureMode::Fpfh),
            other => Err(Error::UnknownFeatureMode(other.to_string())),
        }
    }
}

/// Feature mode plus the FPFH parameters it depends on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureConfig {
    pub mode: FeatureMode,
    /// Neighborhood radius in mm.
    pub radius: f64,
    pub max_neighbors: usize,
    /// Bins per angle.
    pub bins: usize,
}

impl FeatureConfig {
    pub fn new(mode: FeatureMode) -> Self {
        FeatureConfig {
            mode,
            radius: DEFAULT_RADIUS,
            max_neighbors: DEFAULT_MAX_NEIGHBORS,
            bins: DEFAULT_BINS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidArgument("radius must be > 0".into()));
        }
        if self.max_neighbors == 0 {
            return Err(Error::InvalidArgument("max_neighbors must be ≥ 1".into()));
        }
        if self.bins == 0 {
            return Err(Error::InvalidArgument("bins must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Feature width `d`.
    pub fn dim(&self) -> usize {
        match self.mode {
            FeatureMode::Constant => 1,
            FeatureMode::Positional => 3,
            FeatureMode::Fpfh => 3 * self.bins,
        }
    }
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig::new(FeatureMode::Fpfh)
    }
}

/// Node feature matrix with default FPFH parameters.
pub fn node_features(mesh: &Mesh, mode: FeatureMode) -> Matrix {
    node_features_with(mesh, &FeatureConfig::new(mode))
}

pub fn node_features_with(mesh: &Mesh, config: &FeatureConfig) -> Matrix {
    let n = mesh.vertex_count();
    match config.mode {
        FeatureMode::Constant => Matrix::filled(n, 1, 1.0),
        FeatureMode::Positional => {
            Matrix::from_rows(mesh.vertices()).expect("3 columns per vertex")
        }
        FeatureMode::Fpfh => fpfh(mesh, config.radius, config.max_neighbors, config.bins),
    }
}

/// `(r / r_max, θ/π, (φ+π)/2π)` per directed edge `(i → j)` with `δ = p_j − p_i`.
///
/// `r_max` is the longest edge of this edge list. Zero-length edges give `(0, 0, 0)`.
pub fn edge_attributes(points: &[Vec3], edges: &[(usize, usize)]) -> Matrix {
    let deltas: Vec<Vec3> = edges
        .iter()
        .map(|&(i, j)| linalg::sub(points[j], points[i]))
        .collect();
    let lengths: Vec<f64> = deltas.iter().map(|&d| linalg::norm(d)).collect();
    let r_max = lengths.iter().copied().fold(0.0, f64::max);

    let mut out = Matrix::zeros(edges.len(), 3);
    for (e, (d, &r)) in deltas.iter().zip(&lengths).enumerate() {
        if r == 0.0 {
            continue;
        }
        let polar = (d[2] / r).clamp(-1.0, 1.0).acos();
        // + 0.0 folds -0.0 so the azimuth stays in (-π, π]
        let azimuth = (d[1] + 0.0).atan2(d[0]);
        let row = out.row_mut(e);
        row[0] = if r_max > 0.0 { (r / r_max).min(1.0) } else { 0.0 };
        row[1] = (polar / PI).clamp(0.0, 1.0);
        row[2] = ((azimuth + PI) / (2.0 * PI)).clamp(0.0, 1.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{radius_neighbors, vertex_normals};

    #[test]
    fn constant_and_positional_modes() {
        let m = Mesh::new(
            vec![[1.5, -2.0, 0.0], [0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[1, 2, 3]],
        )
        .unwrap();
        let c = node_features(&m, FeatureMode::Constant);
        assert_eq!((c.rows(), c.cols()), (4, 1));
        assert!(c.as_slice().iter().all(|&x| x == 1.0));
        let p = node_features(&m, FeatureMode::Positional);
        assert_eq!(p.row(0), &[1.5, -2.0, 0.0]);
    }

    #[test]
    fn unknown_mode() {
        assert!(matches!(
            "curvature".parse::<FeatureMode>(),
            Err(Error::UnknownFeatureMode(_))
        ));
    }

    #[test]
    fn two_vertex_fpfh_matches_formula() {
        let m = Mesh::new(vec![[0.0; 3], [5.0, 0.0, 0.0]], vec![]).unwrap();
        let got = node_features(&m, FeatureMode::Fpfh);
        let pts = m.vertices();
        let normals = vertex_normals(&m);
        let idx = radius_neighbors(pts, 10.0, 100);
        let s0 = spfh(pts, normals.as_slice(), &idx, 0, 11);
        let s1 = spfh(pts, normals.as_slice(), &idx, 1, 11);
        for b in 0..33 {
            assert_eq!(got[(0, b)], s0[b] + s1[b] / 5.0);
        }
    }

    #[test]
    fn isolated_vertex_fpfh_is_zero() {
        let m = Mesh::new(vec![[0.0; 3], [50.0, 0.0, 0.0]], vec![]).unwrap();
        let f = node_features(&m, FeatureMode::Fpfh);
        assert!(f.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn edge_attributes_examples() {
        let pts = [[0.0; 3], [0.0, 0.0, 2.0], [1.0, 0.0, 0.0]];
        let a = edge_attributes(&pts, &[(0, 1), (0, 2), (0, 0)]);
        assert_eq!(a.row(0), &[1.0, 0.0, 0.5]);
        assert_eq!(a.row(1), &[0.5, 0.5, 0.5]);
        assert_eq!(a.row(2), &[0.0, 0.0, 0.0]);
        // -x direction with a negative-zero y component
        let b = edge_attributes(&[[0.0; 3], [-1.0, -0.0, 0.0]], &[(0, 1)]);
        assert_eq!(b.row(0), &[1.0, 0.5, 1.0]);
        let degenerate = edge_attributes(&[[1.0; 3], [1.0; 3]], &[(0, 1)]);
        assert_eq!(degenerate.row(0), &[0.0, 0.0, 0.0]);
    }
}
