//! The three graph convolutions with their adjoints.
//!
//! Messages flow along `(source → target)` edges into the target. Each
//! operator precomputes its edge-dependent structure once per graph
//! ([`GraphOperator`]) and reuses it for the forward and backward passes.

use super::spline::for_each_term;
use super::ConvKind;
use crate::error::{Error, Result};
use crate::linalg::{axpy, gemm, matmul_bt, matmul_into, Matrix};

/// Spline rows processed per block, sized so the gathered inputs and
/// products stay in cache.
const CHUNK_ROWS: usize = 240;

/// Spline terms are grouped by blocks of this many consecutive targets, so
/// the rows of `x` and of the output touched by one block stay in cache.
const TARGET_BLOCK: usize = 1024;

#[derive(Clone, Copy, Debug)]
struct Segment {
    kernel: usize,
    start: usize,
    end: usize,
}

#[derive(Clone, Copy, Debug)]
struct SplineRow {
    target: usize,
    start: usize,
    end: usize,
}

#[derive(Clone, Debug)]
enum Plan {
    /// `(target, source, Â_ts / √(d_t d_s))`, sorted by target then source.
    Gcn(Vec<(usize, usize, f64)>),
    /// Incoming sources per target in CSR form.
    Sum { offsets: Vec<usize>, sources: Vec<usize> },
    /// Rows in segments of one kernel and one target block, ordered by
    /// block then kernel. A row is one target's run of `(source, basis
    /// value)` terms for that kernel.
    Spline {
        kernels: usize,
        segments: Vec<Segment>,
        rows: Vec<SplineRow>,
        terms: Vec<(usize, f64)>,
    },
}

/// Edge structure of one graph prepared for a convolution kind.
#[derive(Clone, Debug)]
pub(crate) struct GraphOperator {
    nodes: usize,
    plan: Plan,
}

/// Borrowed parameters of one convolution layer.
pub(crate) struct LayerParams<'a> {
    pub weight: &'a [f64],
    pub root: Option<&'a [f64]>,
    pub bias: &'a [f64],
    pub d_in: usize,
    pub d_out: usize,
}

pub(crate) struct LayerGrads {
    pub weight: Vec<f64>,
    pub root: Option<Vec<f64>>,
    pub bias: Vec<f64>,
}

fn check_edges(nodes: usize, edges: &[(usize, usize)]) -> Result<()> {
    if let Some(&(s, t)) = edges.iter().find(|&&(s, t)| s >= nodes || t >= nodes) {
        return Err(Error::Shape(format!(
            "edge ({s}, {t}) references a node outside 0..{nodes}"
        )));
    }
    Ok(())
}

impl GraphOperator {
    pub fn new(
        kind: ConvKind,
        nodes: usize,
        edges: &[(usize, usize)],
        edge_attrs: &Matrix,
        kernel_size: usize,
    ) -> Result<Self> {
        check_edges(nodes, edges)?;
        let plan = match kind {
            ConvKind::Gcn => Plan::Gcn(gcn_coefficients(nodes, edges)),
            ConvKind::GraphConv => {
                let mut counts = vec![0usize; nodes + 1];
                for &(_, t) in edges {
                    counts[t + 1] += 1;
                }
                for i in 0..nodes {
                    counts[i + 1] += counts[i];
                }
                let mut fill = counts.clone();
                let mut sources = vec![0; edges.len()];
                for &(s, t) in edges {
                    sources[fill[t]] = s;
                    fill[t] += 1;
                }
                Plan::Sum {
                    offsets: counts,
                    sources,
                }
            }
            ConvKind::Spline => {
                if edge_attrs.rows() != edges.len() || edge_attrs.cols() != 3 {
                    return Err(Error::Shape(format!(
                        "edge attributes are {}x{}, expected {}x3",
                        edge_attrs.rows(),
                        edge_attrs.cols(),
                        edges.len()
                    )));
                }
                spline_plan(nodes, edges, edge_attrs, kernel_size)?
            }
        };
        Ok(GraphOperator { nodes, plan })
    }

    /// Pre-activation output of the layer.
    pub fn forward(&self, x: &Matrix, p: &LayerParams) -> Matrix {
        let n = self.nodes;
        let (din, dout) = (p.d_in, p.d_out);
        debug_assert_eq!(x.rows(), n);
        debug_assert_eq!(x.cols(), din);
        let mut out = Matrix::zeros(n, dout);
        match &self.plan {
            Plan::Gcn(coeffs) => {
                let mut h = vec![0.0; n * dout];
                matmul_into(x.as_slice(), n, din, p.weight, dout, &mut h);
                for &(t, s, c) in coeffs {
                    axpy(c, &h[s * dout..(s + 1) * dout], out.row_mut(t));
                }
            }
            Plan::Sum { offsets, sources } => {
                let root = p.root.expect("graphconv root weight");
                matmul_into(x.as_slice(), n, din, root, dout, out.as_mut_slice());
                let agg = neighbor_sum(x, offsets, sources);
                matmul_into(agg.as_slice(), n, din, p.weight, dout, out.as_mut_slice());
            }
            Plan::Spline {
                kernels,
                segments,
                rows,
                terms,
            } => {
                let root = p.root.expect("spline root weight");
                debug_assert_eq!(p.weight.len(), kernels * din * dout);
                matmul_into(x.as_slice(), n, din, root, dout, out.as_mut_slice());
                let block = din * dout;
                let mut z = Vec::new();
                let mut y = Vec::new();
                for seg in segments {
                    let k = seg.kernel;
                    let wk = &p.weight[k * block..(k + 1) * block];
                    for rs in rows[seg.start..seg.end].chunks(CHUNK_ROWS) {
                        gather_rows(x, rs, terms, &mut z);
                        y.clear();
                        y.resize(rs.len() * dout, 0.0);
                        gemm(rs.len(), din, dout, &z, false, wk, false, 0.0, &mut y);
                        for (r, yr) in rs.iter().zip(y.chunks_exact(dout)) {
                            axpy(1.0, yr, out.row_mut(r.target));
                        }
                    }
                }
            }
        }
        out.add_row(p.bias);
        out
    }

    /// Gradients of the layer given `dout = ∂L/∂(pre-activation)`.
    /// The input gradient is only formed when `need_dx`.
    pub fn backward(
        &self,
        x: &Matrix,
        p: &LayerParams,
        dout: &Matrix,
        need_dx: bool,
    ) -> (Option<Matrix>, LayerGrads) {
        let n = self.nodes;
        let (din, dco) = (p.d_in, p.d_out);
        let bias = dout.column_sums();
        match &self.plan {
            Plan::Gcn(coeffs) => {
                // out = Â_norm (x W): dH = Â_normᵀ dout
                let mut dh = Matrix::zeros(n, dco);
                for &(t, s, c) in coeffs {
                    axpy(c, dout.row(t), dh.row_mut(s));
                }
                let weight = x.t_matmul(&dh).expect("gcn dW").into_vec();
                let dx = need_dx.then(|| matmul_bt(&dh, p.weight, din));
                (
                    dx,
                    LayerGrads {
                        weight,
                        root: None,
                        bias,
                    },
                )
            }
            Plan::Sum { offsets, sources } => {
                let root = p.root.expect("graphconv root weight");
                let agg = neighbor_sum(x, offsets, sources);
                let weight = agg.t_matmul(dout).expect("graphconv dW").into_vec();
                let root_grad = x.t_matmul(dout).expect("graphconv dW_root").into_vec();
                let dx = need_dx.then(|| {
                    let mut dx = matmul_bt(dout, root, din);
                    let dagg = matmul_bt(dout, p.weight, din);
                    for t in 0..n {
                        for &s in &sources[offsets[t]..offsets[t + 1]] {
                            axpy(1.0, dagg.row(t), dx.row_mut(s));
                        }
                    }
                    dx
                });
                (
                    dx,
                    LayerGrads {
                        weight,
                        root: Some(root_grad),
                        bias,
                    },
                )
            }
            Plan::Spline {
                kernels,
                segments,
                rows,
                terms,
            } => {
                let root = p.root.expect("spline root weight");
                let root_grad = x.t_matmul(dout).expect("spline dW_root").into_vec();
                let mut dx = need_dx.then(|| matmul_bt(dout, root, din));
                let block = din * dco;
                let mut weight = vec![0.0; kernels * block];
                let (mut z, mut g, mut dz) = (Vec::new(), Vec::new(), Vec::new());
                for seg in segments {
                    let k = seg.kernel;
                    let wk = &p.weight[k * block..(k + 1) * block];
                    let wg = &mut weight[k * block..(k + 1) * block];
                    for rs in rows[seg.start..seg.end].chunks(CHUNK_ROWS) {
                        gather_rows(x, rs, terms, &mut z);
                        g.clear();
                        for r in rs {
                            g.extend_from_slice(dout.row(r.target));
                        }
                        gemm(din, rs.len(), dco, &z, true, &g, false, 1.0, wg);
                        if let Some(dx) = dx.as_mut() {
                            dz.clear();
                            dz.resize(rs.len() * din, 0.0);
                            gemm(rs.len(), dco, din, &g, false, wk, true, 0.0, &mut dz);
                            for (r, dzr) in rs.iter().zip(dz.chunks_exact(din)) {
                                for &(s, b) in &terms[r.start..r.end] {
                                    axpy(b, dzr, dx.row_mut(s));
                                }
                            }
                        }
                    }
                }
                (
                    dx,
                    LayerGrads {
                        weight,
                        root: Some(root_grad),
                        bias,
                    },
                )
            }
        }
    }
}

/// Binary adjacency `A[t][s] = 1` for every edge `s → t`, plus the identity.
fn gcn_coefficients(nodes: usize, edges: &[(usize, usize)]) -> Vec<(usize, usize, f64)> {
    let mut pairs: Vec<(usize, usize)> = edges.iter().map(|&(s, t)| (t, s)).collect();
    pairs.sort_unstable();
    pairs.dedup();
    let mut weighted: Vec<(usize, usize, f64)> = pairs.into_iter().map(|(t, s)| (t, s, 1.0)).collect();
    let mut has_self = vec![false; nodes];
    for e in weighted.iter_mut() {
        if e.0 == e.1 {
            e.2 += 1.0;
            has_self[e.0] = true;
        }
    }
    weighted.extend((0..nodes).filter(|&i| !has_self[i]).map(|i| (i, i, 1.0)));
    weighted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

    let mut degree = vec![0.0; nodes];
    for &(t, _, w) in &weighted {
        degree[t] += w;
    }
    weighted
        .into_iter()
        .map(|(t, s, w)| (t, s, w / (degree[t] * degree[s]).sqrt()))
        .collect()
}

/// Stable counting sort of `items` by `key(item) < buckets`.
fn counting_sort<T: Copy>(items: &[T], buckets: usize, key: impl Fn(&T) -> usize) -> Vec<T> {
    let mut offsets = vec![0usize; buckets + 1];
    for it in items {
        offsets[key(it) + 1] += 1;
    }
    for i in 0..buckets {
        offsets[i + 1] += offsets[i];
    }
    let mut slots = vec![0usize; items.len()];
    for (i, it) in items.iter().enumerate() {
        let k = key(it);
        slots[offsets[k]] = i;
        offsets[k] += 1;
    }
    slots.into_iter().map(|i| items[i]).collect()
}

fn spline_plan(nodes: usize, edges: &[(usize, usize)], attrs: &Matrix, kernel_size: usize) -> Result<Plan> {
    let by_target = counting_sort(
        &(0..edges.len()).collect::<Vec<_>>(),
        nodes,
        |&e| edges[e].1,
    );
    let kernels = kernel_size.pow(3);
    let attr = |e: usize| {
        let row = attrs.row(e);
        [row[0], row[1], row[2]]
    };
    // two passes over the basis: count terms per (target block, kernel)
    // bucket, then place each term; visiting edges by target keeps every
    // bucket sorted by target, with edge order inside a target
    let buckets = nodes.div_ceil(TARGET_BLOCK) * kernels;
    let bucket = |t: usize, p: usize| (t / TARGET_BLOCK) * kernels + p;
    let mut offsets = vec![0usize; buckets + 1];
    for &e in &by_target {
        let t = edges[e].1;
        for_each_term(attr(e), kernel_size, |term| offsets[bucket(t, term.index) + 1] += 1)?;
    }
    for b in 0..buckets {
        offsets[b + 1] += offsets[b];
    }
    let mut fill = offsets.clone();
    let mut placed = vec![(0usize, 0usize, 0.0f64); offsets[buckets]];
    for &e in &by_target {
        let (s, t) = edges[e];
        for_each_term(attr(e), kernel_size, |term| {
            let b = bucket(t, term.index);
            placed[fill[b]] = (t, s, term.value);
            fill[b] += 1;
        })?;
    }

    let mut segments = Vec::new();
    let mut rows: Vec<SplineRow> = Vec::new();
    let mut terms = Vec::with_capacity(placed.len());
    for b in 0..buckets {
        let first_row = rows.len();
        for k in offsets[b]..offsets[b + 1] {
            let (t, s, v) = placed[k];
            if k == offsets[b] || placed[k - 1].0 != t {
                rows.push(SplineRow {
                    target: t,
                    start: k,
                    end: k,
                });
            }
            terms.push((s, v));
            rows.last_mut().expect("row").end = k + 1;
        }
        if rows.len() > first_row {
            segments.push(Segment {
                kernel: b % kernels,
                start: first_row,
                end: rows.len(),
            });
        }
    }
    Ok(Plan::Spline {
        kernels,
        segments,
        rows,
        terms,
    })
}

/// `z` = one row per spline row: `Σ b · x_source` over its terms.
fn gather_rows(x: &Matrix, rows: &[SplineRow], terms: &[(usize, f64)], z: &mut Vec<f64>) {
    let d = x.cols();
    z.clear();
    for r in rows {
        let (s, b) = terms[r.start];
        z.extend(x.row(s).iter().map(|v| b * v));
        let tail = z.len() - d;
        let zr = &mut z[tail..];
        for &(s, b) in &terms[r.start + 1..r.end] {
            axpy(b, x.row(s), zr);
        }
    }
}

fn neighbor_sum(x: &Matrix, offsets: &[usize], sources: &[usize]) -> Matrix {
    let mut agg = Matrix::zeros(x.rows(), x.cols());
    for t in 0..x.rows() {
        let row = agg.row_mut(t);
        for &s in &sources[offsets[t]..offsets[t + 1]] {
            axpy(1.0, x.row(s), row);
        }
    }
    agg
}

fn check_layer(x: &Matrix, w: &Matrix, b: &[f64]) -> Result<()> {
    if w.rows() != x.cols() {
        return Err(Error::Shape(format!(
            "weight has {} rows for {} input features",
            w.rows(),
            x.cols()
        )));
    }
    if b.len() != w.cols() {
        return Err(Error::Shape(format!(
            "bias has {} entries for {} outputs",
            b.len(),
            w.cols()
        )));
    }
    Ok(())
}

/// `D̂^{-1/2} Â D̂^{-1/2} X W + b` with `Â = A + I`.
pub fn gcn_conv_forward(
    x: &Matrix,
    edges: &[(usize, usize)],
    weight: &Matrix,
    bias: &[f64],
) -> Result<Matrix> {
    check_layer(x, weight, bias)?;
    let op = GraphOperator::new(ConvKind::Gcn, x.rows(), edges, &Matrix::zeros(0, 3), 2)?;
    Ok(op.forward(
        x,
        &LayerParams {
            weight: weight.as_slice(),
            root: None,
            bias,
            d_in: weight.rows(),
            d_out: weight.cols(),
        },
    ))
}

/// `x'_i = W_rootᵀ x_i + W_nbrᵀ Σ_{j→i} x_j + b`.
pub fn graph_conv_forward(
    x: &Matrix,
    edges: &[(usize, usize)],
    root: &Matrix,
    neighbor: &Matrix,
    bias: &[f64],
) -> Result<Matrix> {
    check_layer(x, root, bias)?;
    check_layer(x, neighbor, bias)?;
    let op = GraphOperator::new(ConvKind::GraphConv, x.rows(), edges, &Matrix::zeros(0, 3), 2)?;
    Ok(op.forward(
        x,
        &LayerParams {
            weight: neighbor.as_slice(),
            root: Some(root.as_slice()),
            bias,
            d_in: root.rows(),
            d_out: root.cols(),
        },
    ))
}

/// `x'_i = W_rootᵀ x_i + Σ_{j→i} (Σ_p B_p(u_ji) W_pᵀ) x_j + b`, one kernel
/// matrix per entry of `kernels` (`kernel_size³` of them).
pub fn spline_conv_forward(
    x: &Matrix,
    edges: &[(usize, usize)],
    edge_attrs: &Matrix,
    kernels: &[Matrix],
    root: &Matrix,
    bias: &[f64],
    kernel_size: usize,
) -> Result<Matrix> {
    check_layer(x, root, bias)?;
    if kernels.len() != kernel_size.pow(3) {
        return Err(Error::Shape(format!(
            "{} kernel matrices for kernel size {kernel_size}",
            kernels.len()
        )));
    }
    let mut flat = Vec::with_capacity(kernels.len() * root.rows() * root.cols());
    for k in kernels {
        if (k.rows(), k.cols()) != (root.rows(), root.cols()) {
            return Err(Error::Shape("kernel matrix shape differs from root".into()));
        }
        flat.extend_from_slice(k.as_slice());
    }
    let op = GraphOperator::new(ConvKind::Spline, x.rows(), edges, edge_attrs, kernel_size)?;
    Ok(op.forward(
        x,
        &LayerParams {
            weight: &flat,
            root: Some(root.as_slice()),
            bias,
            d_in: root.rows(),
            d_out: root.cols(),
        },
    ))
}
