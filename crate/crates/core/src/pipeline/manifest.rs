//! Dataset manifests: one CSV row per sample with its label, group fields and
//! structure mesh paths.
//!
//! ```text
//! # optional comment lines
//! sample_id,label,age,sex,group,mesh_0,...,mesh_{N-1}
//! ```
//!
//! Mesh paths are relative to the manifest's directory.

use std::collections::{BTreeMap, HashSet};
use std::io::Write as _;
use std::path::{Component, Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{cache, FeatureConfig};
use crate::graph::{graph_with_features, Sample};
use crate::mesh::load_off;

const FIXED_COLUMNS: [&str; 5] = ["sample_id", "label", "age", "sex", "group"];

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestRow {
    pub sample_id: String,
    pub label: usize,
    /// Years.
    pub age: f64,
    pub sex: String,
    pub group: String,
    /// Resolved mesh paths in structure order.
    pub meshes: Vec<PathBuf>,
}

impl ManifestRow {
    pub fn metadata(&self) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("age".to_string(), self.age.to_string()),
            ("sex".to_string(), self.sex.clone()),
            ("group".to_string(), self.group.clone()),
        ])
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
    /// Leading `#` lines, without the marker.
    pub comments: Vec<String>,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_structures(&self) -> usize {
        self.rows.first().map_or(0, |r| r.meshes.len())
    }

    pub fn labels(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.label).collect()
    }

    /// Rows at `indices`, keeping the comments.
    pub fn subset(&self, indices: &[usize]) -> Manifest {
        Manifest {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            comments: self.comments.clone(),
        }
    }

    /// Rows whose ids appear in `ids`, in this manifest's order.
    pub fn select_ids(&self, ids: &[String]) -> Manifest {
        let wanted: HashSet<&str> = ids.iter().map(String::as_str).collect();
        Manifest {
            rows: self
                .rows
                .iter()
                .filter(|r| wanted.contains(r.sample_id.as_str()))
                .cloned()
                .collect(),
            comments: self.comments.clone(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Manifest> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = parent_dir(path);
        let m = Manifest::parse(&text, base, &path.display().to_string())?;
        for row in &m.rows {
            for p in &row.meshes {
                if !p.is_file() {
                    return Err(Error::InvalidArgument(format!(
                        "sample '{}': mesh file {} does not exist",
                        row.sample_id,
                        p.display()
                    )));
                }
            }
        }
        Ok(m)
    }

    /// Parse manifest text, resolving mesh paths against `base`. Does not
    /// touch the file system.
    pub fn parse(text: &str, base: &Path, origin: &str) -> Result<Manifest> {
        let comments: Vec<String> = text
            .lines()
            .take_while(|l| l.trim_start().starts_with('#'))
            .map(|l| l.trim_start()[1..].trim().to_string())
            .collect();
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader.headers()?.clone();
        let header_line = comments.len() + 1;
        let names: Vec<&str> = header.iter().collect();
        if names.len() < FIXED_COLUMNS.len() + 1 || names[..5] != FIXED_COLUMNS {
            return Err(Error::parse(
                origin,
                header_line,
                "header must be sample_id,label,age,sex,group,mesh_0,...",
            ));
        }
        for (k, name) in names[5..].iter().enumerate() {
            if *name != format!("mesh_{k}") {
                return Err(Error::parse(
                    origin,
                    header_line,
                    format!("expected column mesh_{k}, found '{name}'"),
                ));
            }
        }

        let mut rows = Vec::new();
        let mut seen = HashSet::new();
        for record in reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            let field = |i: usize| record.get(i).unwrap_or("");
            let sample_id = field(0).to_string();
            if sample_id.is_empty() {
                return Err(Error::parse(origin, line, "empty sample_id"));
            }
            if !seen.insert(sample_id.clone()) {
                return Err(Error::parse(origin, line, format!("duplicate sample_id '{sample_id}'")));
            }
            let label = field(1)
                .parse::<usize>()
                .map_err(|_| Error::parse(origin, line, format!("label '{}' is not a class index", field(1))))?;
            let age = field(2)
                .parse::<f64>()
                .ok()
                .filter(|a| a.is_finite())
                .ok_or_else(|| Error::parse(origin, line, format!("age '{}' is not a number", field(2))))?;
            let meshes = (5..names.len()).map(|i| base.join(field(i))).collect();
            rows.push(ManifestRow {
                sample_id,
                label,
                age,
                sex: field(3).to_string(),
                group: field(4).to_string(),
                meshes,
            });
        }
        Ok(Manifest { rows, comments })
    }

    /// Write to `path`, with mesh paths relative to its directory.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let base = parent_dir(path);
        let mut out = Vec::new();
        for c in &self.comments {
            let _ = writeln!(out, "# {c}");
        }
        {
            let mut w = csv::Writer::from_writer(&mut out);
            let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
            header.extend((0..self.n_structures()).map(|k| format!("mesh_{k}")));
            w.write_record(&header)?;
            for r in &self.rows {
                let mut rec = vec![
                    r.sample_id.clone(),
                    r.label.to_string(),
                    r.age.to_string(),
                    r.sex.clone(),
                    r.group.clone(),
                ];
                for m in &r.meshes {
                    rec.push(relative_to(m, base)?.to_string_lossy().into_owned());
                }
                w.write_record(&rec)?;
            }
            w.flush().map_err(|e| Error::io(path, e))?;
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

fn parent_dir(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

/// `path` expressed relative to directory `base`.
fn relative_to(path: &Path, base: &Path) -> Result<PathBuf> {
    let abs = |p: &Path| std::path::absolute(p).map(|a| lexical(&a)).map_err(|e| Error::io(p, e));
    let (p, b) = (abs(path)?, abs(base)?);
    let pc: Vec<Component> = p.components().collect();
    let bc: Vec<Component> = b.components().collect();
    let common = pc.iter().zip(&bc).take_while(|(a, b)| a == b).count();
    if common == 0 {
        return Ok(p);
    }
    let mut rel = PathBuf::new();
    for _ in common..bc.len() {
        rel.push("..");
    }
    for c in &pc[common..] {
        rel.push(c);
    }
    Ok(rel)
}

/// Resolve `.` and `..` components without touching the file system.
fn lexical(path: &Path) -> PathBuf {
    let mut out = PathBuf::new();
    for c in path.components() {
        match c {
            Component::ParentDir => {
                out.pop();
            }
            Component::CurDir => {}
            c => out.push(c),
        }
    }
    out
}

/// Load every sample's meshes and compute graphs. Samples are processed in
/// parallel; with `cache_dir` node features are read from or written to the
/// feature cache.
pub fn load_samples(
    manifest: &Manifest,
    features: &FeatureConfig,
    expected_structures: usize,
    cache_dir: Option<&Path>,
) -> Result<Vec<Sample>> {
    features.validate()?;
    if let Some(dir) = cache_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    manifest
        .rows
        .par_iter()
        .map(|row| {
            if row.meshes.len() != expected_structures {
                return Err(Error::StructureCount {
                    expected: expected_structures,
                    got: row.meshes.len(),
                });
            }
            let graphs = row
                .meshes
                .iter()
                .enumerate()
                .map(|(s, p)| {
                    let mesh = load_off(p)?;
                    let feats = match cache_dir {
                        Some(dir) => cache::cached_node_features(dir, &mesh, features)?,
                        None => crate::features::node_features_with(&mesh, features),
                    };
                    Ok(graph_with_features(&mesh, features, s, feats))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Sample {
                sample_id: row.sample_id.clone(),
                label: row.label,
                graphs,
                metadata: row.metadata(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "# made by hand\nsample_id,label,age,sex,group,mesh_0,mesh_1\n\
                        a,0,31,F,site_a,m/a0.off,m/a1.off\n\
                        b,1,55.5,M,site_b,m/b0.off,m/b1.off\n";

    #[test]
    fn parse_resolves_paths() {
        let m = Manifest::parse(TEXT, Path::new("/data"), "mem").unwrap();
        assert_eq!(m.comments, vec!["made by hand"]);
        assert_eq!(m.len(), 2);
        assert_eq!(m.n_structures(), 2);
        assert_eq!(m.rows[1].meshes[0], PathBuf::from("/data/m/b0.off"));
        assert_eq!(m.rows[1].age, 55.5);
        assert_eq!(m.labels(), vec![0, 1]);
    }

    #[test]
    fn rejects_bad_rows() {
        let dup = TEXT.replace("b,1", "a,1");
        assert!(Manifest::parse(&dup, Path::new("."), "mem").is_err());
        let bad_label = TEXT.replace("b,1", "b,x");
        assert!(Manifest::parse(&bad_label, Path::new("."), "mem").is_err());
        let bad_header = TEXT.replace("mesh_1", "mesh_2");
        assert!(Manifest::parse(&bad_header, Path::new("."), "mem").is_err());
    }

    #[test]
    fn save_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = Manifest::parse(TEXT, dir.path(), "mem").unwrap();
        let sub = dir.path().join("splits");
        std::fs::create_dir_all(&sub).unwrap();
        let p = sub.join("x.csv");
        m.save(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.contains("../m/a0.off"), "{text}");
        let back = Manifest::parse(&text, &sub, "mem").unwrap();
        let norm = |m: &Manifest| -> Vec<PathBuf> {
            m.rows
                .iter()
                .flat_map(|r| r.meshes.iter().map(|p| lexical(&std::path::absolute(p).unwrap())))
                .collect()
        };
        assert_eq!(norm(&back), norm(&m));
        assert_eq!(back.comments, m.comments);
    }

    #[test]
    fn missing_files_fail_load() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        std::fs::write(&p, TEXT).unwrap();
        assert!(Manifest::load(&p).is_err());
    }
}
