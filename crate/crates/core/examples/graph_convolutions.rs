//! The three convolution operators on a four-node path graph.
//!
//! cargo run --example graph_convolutions

use meshgnn::features::edge_attributes;
use meshgnn::nn::{gcn_conv_forward, graph_conv_forward, spline_basis, spline_conv_forward};
use meshgnn::Matrix;

fn show(name: &str, m: &Matrix) {
    println!("{name}:");
    for r in m.row_iter() {
        println!("  {}", r.iter().map(|v| format!("{v:8.4}")).collect::<Vec<_>>().join(" "));
    }
}

fn main() -> meshgnn::Result<()> {
    let points = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [1.0, 1.0, 2.0]];
    let mut edges = Vec::new();
    for i in 0..3 {
        edges.push((i, i + 1));
        edges.push((i + 1, i));
    }
    let x = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [-1.0, 0.5]])?;
    let w = Matrix::from_rows(&[[0.5, -1.0, 0.0], [1.0, 0.5, 2.0]])?;
    let bias = [0.0, 0.1, -0.1];

    show("gcn", &gcn_conv_forward(&x, &edges, &w, &bias)?);
    let root = Matrix::filled(2, 3, 0.25);
    show("graphconv", &graph_conv_forward(&x, &edges, &root, &w, &bias)?);

    // pseudo-coordinates (length, polar, azimuth) in [0, 1]
    let attrs = edge_attributes(&points, &edges);
    show("edge attributes", &attrs);
    let k = 3;
    let first = spline_basis([attrs.row(0)[0], attrs.row(0)[1], attrs.row(0)[2]], k, 1)?;
    println!("edge 0 touches {} of {} kernels", first.len(), k * k * k);
    let kernels: Vec<Matrix> = (0..k * k * k)
        .map(|p| Matrix::filled(2, 3, (p as f64 - 13.0) / 13.0))
        .collect();
    show("spline", &spline_conv_forward(&x, &edges, &attrs, &kernels, &root, &bias, k)?);
    Ok(())
}
