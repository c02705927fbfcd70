//! Darboux-frame pair features and (fast) point feature histograms.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vec3};
use crate::mesh::{radius_neighbors, vertex_normals, Mesh, NeighborIndex};

pub const DEFAULT_BINS: usize = 11;
pub const DEFAULT_RADIUS: f64 = 10.0;
pub const DEFAULT_MAX_NEIGHBORS: usize = 100;

const FRAME_EPS: f64 = 1e-12;

/// Angular variation of a normal pair expressed in the source's Darboux frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DarbouxAngles {
    /// `v · n_k`, in [-1, 1].
    pub alpha: f64,
    /// `u · d̂`, in [-1, 1].
    pub phi: f64,
    /// `atan2(w · n_k, u · n_k)`, radians in (-π, π].
    pub theta: f64,
}

/// Pair features of `(p_r, n_r)` and `(p_k, n_k)`.
///
/// The point whose normal makes the smaller angle with the connecting line
/// becomes the source; on an exact tie `p_r` stays the source.
pub fn darboux_angles(p_r: Vec3, n_r: Vec3, p_k: Vec3, n_k: Vec3) -> Result<DarbouxAngles> {
    pair_angles(p_r, n_r, p_k, n_k).0
}

/// [`darboux_angles`] plus whether swapping the arguments gives the same
/// result, which holds except on an exact source tie.
fn pair_angles(p_r: Vec3, n_r: Vec3, p_k: Vec3, n_k: Vec3) -> (Result<DarbouxAngles>, bool) {
    let diff = linalg::sub(p_k, p_r);
    let len = linalg::norm(diff);
    if len == 0.0 {
        return (Err(Error::ZeroLengthPair), true);
    }
    let mut d = linalg::scale(diff, 1.0 / len);
    let (mut src_n, mut dst_n) = (n_r, n_k);
    let (cos_r, cos_k) = (linalg::dot(n_r, d).abs(), linalg::dot(n_k, d).abs());
    if cos_r < cos_k {
        std::mem::swap(&mut src_n, &mut dst_n);
        d = linalg::scale(d, -1.0);
    }
    (frame_angles(d, src_n, dst_n), cos_r != cos_k)
}

fn frame_angles(d: Vec3, src_n: Vec3, dst_n: Vec3) -> Result<DarbouxAngles> {
    let u = src_n;
    let v_raw = linalg::cross(d, u);
    let v_len = linalg::norm(v_raw);
    if v_len < FRAME_EPS {
        return Err(Error::DegenerateFrame);
    }
    let v = linalg::scale(v_raw, 1.0 / v_len);
    let w = linalg::cross(u, v);

    let alpha = linalg::dot(v, dst_n).clamp(-1.0, 1.0);
    let phi = linalg::dot(u, d).clamp(-1.0, 1.0);
    let mut theta = linalg::dot(w, dst_n).atan2(linalg::dot(u, dst_n));
    if theta == -PI {
        theta = PI;
    }
    Ok(DarbouxAngles { alpha, phi, theta })
}

/// Bin `value` from `[lo, hi]` into `bins` equal cells; `hi` lands in the last.
#[inline]
pub(crate) fn bin_index(value: f64, lo: f64, hi: f64, bins: usize) -> usize {
    let t = (value - lo) / (hi - lo);
    ((t * bins as f64).floor().max(0.0) as usize).min(bins - 1)
}

/// Simple point feature histogram of one vertex: `[α | φ | θ]`, each block
/// with `bins` cells normalized to sum 1 (all-zero when no pair counts).
pub fn spfh(
    points: &[Vec3],
    normals: &[Vec3],
    neighbors: &NeighborIndex,
    query: usize,
    bins: usize,
) -> Vec<f64> {
    assert!(bins >= 1, "bins must be at least 1");
    let mut hist = vec![0.0; 3 * bins];
    let mut count = 0usize;
    for nb in neighbors.neighbors(query) {
        let Ok(a) = darboux_angles(
            points[query],
            normals[query],
            points[nb.index],
            normals[nb.index],
        ) else {
            continue;
        };
        hist[bin_index(a.alpha, -1.0, 1.0, bins)] += 1.0;
        hist[bins + bin_index(a.phi, -1.0, 1.0, bins)] += 1.0;
        hist[2 * bins + bin_index(a.theta, -PI, PI, bins)] += 1.0;
        count += 1;
    }
    if count > 0 {
        let inv = 1.0 / count as f64;
        hist.iter_mut().for_each(|h| *h *= inv);
    }
    hist
}

/// Whether `q`, at distance `d` from `j`, made it into `j`'s capped list.
fn listed(index: &NeighborIndex, j: usize, q: usize, d: f64) -> bool {
    let list = index.neighbors(j);
    list.len() < index.max_neighbors
        || list
            .last()
            .is_some_and(|last| (d.to_bits(), q) <= (last.distance.to_bits(), last.index))
}

/// [`spfh`] of every vertex. A pair listed from both ends is evaluated once
/// and counted for both, unless the source tie makes the two directions
/// differ.
fn spfh_all(points: &[Vec3], normals: &[Vec3], index: &NeighborIndex, bins: usize) -> Vec<Vec<f64>> {
    assert!(bins >= 1, "bins must be at least 1");
    let n = points.len();
    let mut hist = vec![vec![0.0; 3 * bins]; n];
    let mut count = vec![0usize; n];
    let add = |h: &mut [f64], c: &mut usize, a: &DarbouxAngles| {
        h[bin_index(a.alpha, -1.0, 1.0, bins)] += 1.0;
        h[bins + bin_index(a.phi, -1.0, 1.0, bins)] += 1.0;
        h[2 * bins + bin_index(a.theta, -PI, PI, bins)] += 1.0;
        *c += 1;
    };
    for q in 0..n {
        for nb in index.neighbors(q) {
            let j = nb.index;
            let mutual = listed(index, j, q, nb.distance);
            if j < q && mutual {
                continue;
            }
            let (angles, symmetric) = pair_angles(points[q], normals[q], points[j], normals[j]);
            if let Ok(a) = &angles {
                add(&mut hist[q], &mut count[q], a);
            }
            if mutual && j > q {
                let reverse = if symmetric {
                    angles
                } else {
                    pair_angles(points[j], normals[j], points[q], normals[q]).0
                };
                if let Ok(a) = &reverse {
                    add(&mut hist[j], &mut count[j], a);
                }
            }
        }
    }
    for (h, &c) in hist.iter_mut().zip(&count) {
        if c > 0 {
            let inv = 1.0 / c as f64;
            h.iter_mut().for_each(|v| *v *= inv);
        }
    }
    hist
}

/// FPFH of every vertex, `n × 3·bins`.
///
/// `FPFH(p) = SPFH(p) + (1/N) Σ_k SPFH(p_k) / ‖p_k − p‖` over the radius
/// neighbors of `p`. Coincident neighbors (distance 0) are left out of both
/// the sum and `N`.
pub fn fpfh(mesh: &Mesh, radius: f64, max_neighbors: usize, bins: usize) -> Matrix {
    let points = mesh.vertices();
    let normals = vertex_normals(mesh);
    let index = radius_neighbors(points, radius, max_neighbors);

    let simple = spfh_all(points, normals.as_slice(), &index, bins);
    let width = 3 * bins;
    let rows: Vec<Vec<f64>> = (0..points.len())
        .into_par_iter()
        .map(|q| {
            let mut row = simple[q].clone();
            let mut acc = vec![0.0; width];
            let mut n = 0usize;
            for nb in index.neighbors(q) {
                if nb.distance == 0.0 {
                    continue;
                }
                linalg::axpy(1.0 / nb.distance, &simple[nb.index], &mut acc);
                n += 1;
            }
            if n > 0 {
                linalg::axpy(1.0 / n as f64, &acc, &mut row);
            }
            row
        })
        .collect();

    let mut data = Vec::with_capacity(points.len() * width);
    rows.into_iter().for_each(|r| data.extend(r));
    Matrix::from_vec(points.len(), width, data).expect("fpfh shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    const Z: Vec3 = [0.0, 0.0, 1.0];
    const X: Vec3 = [1.0, 0.0, 0.0];
    const O: Vec3 = [0.0, 0.0, 0.0];

    #[test]
    fn coplanar_parallel_normals() {
        let a = darboux_angles(O, Z, X, Z).unwrap();
        assert_eq!((a.alpha, a.phi, a.theta), (0.0, 0.0, 0.0));
    }

    #[test]
    fn normal_along_the_line_swaps_into_degenerate_frame() {
        // n_k parallel to the connecting line wins source selection, and a
        // source normal parallel to d̂ has no frame.
        assert!(matches!(darboux_angles(O, Z, X, X), Err(Error::DegenerateFrame)));
    }

    #[test]
    fn quarter_turn_theta() {
        let n_r = [0.8, 0.0, 0.6];
        let n_k = [0.6, 0.0, -0.8];
        let a = darboux_angles(O, n_r, X, n_k).unwrap();
        assert!(a.alpha.abs() < 1e-15);
        assert!((a.phi - 0.8).abs() < 1e-15);
        assert!((a.theta - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn swap_rule_makes_argument_order_irrelevant() {
        let p_r = [0.3, -0.2, 0.1];
        let p_k = [1.2, 0.4, -0.5];
        let n_r = [0.9, 0.1, 0.2];
        let n_k = [0.1, 0.3, 0.9];
        let n_r = linalg::scale(n_r, 1.0 / linalg::norm(n_r));
        let n_k = linalg::scale(n_k, 1.0 / linalg::norm(n_k));
        let ab = darboux_angles(p_r, n_r, p_k, n_k).unwrap();
        let ba = darboux_angles(p_k, n_k, p_r, n_r).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn shared_pairs_match_per_vertex_histograms() {
        use crate::pipeline::synthetic::icosphere;
        let mesh = icosphere(2);
        let mut points: Vec<Vec3> = mesh.vertices().iter().map(|v| linalg::scale(*v, 6.0)).collect();
        // a duplicate vertex and mirrored normals produce zero-length pairs and exact ties
        points[5] = points[4];
        let mut normals: Vec<Vec3> = points.iter().map(|p| linalg::scale(*p, 1.0 / linalg::norm(*p))).collect();
        normals[7] = [0.0, 0.0, 1.0];
        normals[8] = [0.0, 0.0, 1.0];
        for cap in [5, 40, 200] {
            let index = radius_neighbors(&points, 6.0, cap);
            let all = spfh_all(&points, &normals, &index, 11);
            for (q, h) in all.iter().enumerate() {
                assert_eq!(h, &spfh(&points, &normals, &index, q, 11), "vertex {q}, cap {cap}");
            }
        }
    }

    #[test]
    fn coincident_points_error() {
        assert!(matches!(darboux_angles(O, Z, O, Z), Err(Error::ZeroLengthPair)));
    }

    #[test]
    fn binning_arithmetic() {
        assert_eq!(bin_index(0.0, -1.0, 1.0, 11), 5);
        assert_eq!(bin_index(0.0, -PI, PI, 11), 5);
        assert_eq!(bin_index(1.0, -1.0, 1.0, 11), 10);
        assert_eq!(bin_index(-1.0, -1.0, 1.0, 11), 0);
        assert_eq!(bin_index(PI, -PI, PI, 11), 10);
    }

    #[test]
    fn single_neighbor_histogram() {
        let pts = [O, X];
        let normals = [Z, Z];
        let idx = radius_neighbors(&pts, 10.0, 100);
        let h = spfh(&pts, &normals, &idx, 0, 11);
        let mut want = vec![0.0; 33];
        want[5] = 1.0;
        want[16] = 1.0;
        want[27] = 1.0;
        assert_eq!(h, want);
    }

    #[test]
    fn empty_neighborhood_is_zero() {
        let pts = [O, [50.0, 0.0, 0.0]];
        let idx = radius_neighbors(&pts, 10.0, 100);
        assert_eq!(spfh(&pts, &[Z, Z], &idx, 0, 11), vec![0.0; 33]);
    }
}
