//! Write a mesh to OFF, read it back and inspect its normals and edges.
//!
//! cargo run --example mesh_io

use meshgnn::linalg::{dot, norm};
use meshgnn::mesh::{edges_from_faces, load_off, save_off, vertex_normals};
use meshgnn::pipeline::synthetic::icosphere;

fn main() -> meshgnn::Result<()> {
    let sphere = icosphere(2);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sphere.off");
    save_off(&sphere, &path)?;
    let back = load_off(&path)?;
    println!(
        "{}: {} vertices, {} faces, {} directed edges",
        path.display(),
        back.vertex_count(),
        back.faces().len(),
        edges_from_faces(&back).len()
    );

    // on a sphere centred at the origin the normals should point outward
    let normals = vertex_normals(&back);
    let worst = back
        .vertices()
        .iter()
        .zip(normals.as_slice())
        .map(|(v, n)| dot(*v, *n) / norm(*v))
        .fold(f64::INFINITY, f64::min);
    println!("smallest cos(normal, radial) = {worst:.6}");
    Ok(())
}

