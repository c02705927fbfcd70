//! On-disk node feature cache.
//!
//! Each entry is a text table keyed by a SHA-256 of the mesh geometry and the
//! feature parameters. The header repeats those parameters and is checked on
//! read, so a stale or foreign file is rejected rather than silently reused.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{node_features_with, FeatureConfig};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::mesh::Mesh;

const MAGIC: &str = "meshgnn-features v1";

pub fn cache_key(mesh: &Mesh, config: &FeatureConfig) -> String {
    let mut h = Sha256::new();
    for v in mesh.vertices() {
        for c in v {
            h.update(c.to_le_bytes());
        }
    }
    for f in mesh.faces() {
        for k in f {
            h.update((*k as u64).to_le_bytes());
        }
    }
    h.update(header_line(config, mesh.vertex_count()).as_bytes());
    hex::encode(h.finalize())
}

fn header_line(config: &FeatureConfig, rows: usize) -> String {
    format!(
        "mode {} radius {:.16e} max_neighbors {} bins {} rows {} cols {}",
        config.mode,
        config.radius,
        config.max_neighbors,
        config.bins,
        rows,
        config.dim()
    )
}

pub fn entry_path(dir: &Path, mesh: &Mesh, config: &FeatureConfig) -> PathBuf {
    dir.join(format!("{}.feat", cache_key(mesh, config)))
}

pub fn write_table(path: &Path, features: &Matrix, config: &FeatureConfig) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(s, "{}", header_line(config, features.rows()));
    for row in features.row_iter() {
        let line: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
        let _ = writeln!(s, "{}", line.join(" "));
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_table(path: &Path, config: &FeatureConfig, rows: usize) -> Result<Matrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let origin = path.display().to_string();
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(Error::parse(&origin, 1, "not a feature cache file"));
    }
    let expected = header_line(config, rows);
    if lines.next() != Some(expected.as_str()) {
        return Err(Error::parse(&origin, 2, "cache header does not match parameters"));
    }
    let cols = config.dim();
    let mut data = Vec::with_capacity(rows * cols);
    for (i, line) in lines.enumerate() {
        for tok in line.split_whitespace() {
            data.push(
                tok.parse::<f64>()
                    .map_err(|_| Error::parse(&origin, i + 3, format!("bad value '{tok}'")))?,
            );
        }
    }
    Matrix::from_vec(rows, cols, data)
}

/// Node features for `mesh`, read from `dir` when present and written otherwise.
pub fn cached_node_features(dir: &Path, mesh: &Mesh, config: &FeatureConfig) -> Result<Matrix> {
    let path = entry_path(dir, mesh, config);
    if path.exists() {
        return read_table(&path, config, mesh.vertex_count());
    }
    let features = node_features_with(mesh, config);
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_table(&path, &features, config)?;
    Ok(features)
}
