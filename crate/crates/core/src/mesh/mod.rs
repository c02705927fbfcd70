//! Triangle meshes: OFF I/O, vertex normals, connectivity and radius search.

mod neighbors;
mod off;

pub use neighbors::{radius_neighbors, NeighborIndex, Neighbor};
pub use off::{load_off, parse_off, save_off, write_off};

use crate::error::{Error, Result};
use crate::linalg::{self, Vec3};

/// Normal assigned to vertices with no non-degenerate incident face.
pub const FALLBACK_NORMAL: Vec3 = [0.0, 0.0, 1.0];

/// Vertex positions in millimetres plus counter-clockwise triangles.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
}

impl Mesh {
    /// Build a mesh; validates face indices and coordinates.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        for (i, v) in vertices.iter().enumerate() {
            if !v.iter().all(|c| c.is_finite()) {
                return Err(Error::InvalidMesh(format!("vertex {i} is not finite")));
            }
        }
        for (f, face) in faces.iter().enumerate() {
            if let Some(&bad) = face.iter().find(|&&k| k >= vertices.len()) {
                return Err(Error::InvalidMesh(format!(
                    "face {f} references vertex {bad} of {}",
                    vertices.len()
                )));
            }
            if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
                return Err(Error::InvalidMesh(format!("face {f} repeats a vertex")));
            }
        }
        Ok(Mesh { vertices, faces })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Same connectivity, new positions.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::InvalidMesh(format!(
                "replacement has {} vertices, mesh has {}",
                vertices.len(),
                self.vertices.len()
            )));
        }
        Mesh::new(vertices, self.faces.clone())
    }

    /// Apply `x ↦ R·x + t` to every vertex.
    pub fn transformed(&self, rotation: &[[f64; 3]; 3], translation: Vec3) -> Mesh {
        let vertices = self
            .vertices
            .iter()
            .map(|&v| linalg::add(linalg::mat3_mul(rotation, v), translation))
            .collect();
        Mesh {
            vertices,
            faces: self.faces.clone(),
        }
    }
}

/// Unit normal per vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexNormals(pub Vec<Vec3>);

impl VertexNormals {
    pub fn as_slice(&self) -> &[Vec3] {
        &self.0
    }
}

/// Area-weighted average of incident face normals.
///
/// The cross product of the two winding-order edge vectors has length equal
/// to twice the face area, so summing raw cross products is the area-weighted
/// sum of unit face normals. Zero-area faces add nothing.
pub fn vertex_normals(mesh: &Mesh) -> VertexNormals {
    let mut acc = vec![[0.0; 3]; mesh.vertex_count()];
    for face in mesh.faces() {
        let [a, b, c] = face.map(|k| mesh.vertices[k]);
        let n = linalg::cross(linalg::sub(b, a), linalg::sub(c, a));
        if linalg::norm(n) == 0.0 {
            continue;
        }
        for &k in face {
            acc[k] = linalg::add(acc[k], n);
        }
    }
    VertexNormals(
        acc.into_iter()
            .map(|n| {
                let len = linalg::norm(n);
                if len > 0.0 && len.is_finite() {
                    linalg::scale(n, 1.0 / len)
                } else {
                    FALLBACK_NORMAL
                }
            })
            .collect(),
    )
}

/// Directed edges `(source, target)`: both directions of every face edge,
/// deduplicated, sorted by source then target.
pub fn edges_from_faces(mesh: &Mesh) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> = mesh
        .faces()
        .iter()
        .flat_map(|&[a, b, c]| [(a, b), (b, a), (b, c), (c, b), (c, a), (a, c)])
        .collect();
    edges.sort_unstable();
    edges.dedup();
    edges
}
