//! Shared-submodel multi-graph classifier.
//!
//! Every structure union in a batch goes through the same three
//! convolutions (ReLU after each) and a global mean pool. The per-structure
//! embeddings are concatenated in structure order and classified by
//! `FC(N·H → H) → ReLU → FC(H → classes)`.

use rayon::prelude::*;

use super::conv::{GraphOperator, LayerGrads, LayerParams};
use super::loss::{cross_entropy, cross_entropy_grad};
use super::{ModelConfig, ModelParameters};
use crate::error::{Error, Result};
use crate::graph::{Batch, GraphUnion};
use crate::linalg::{matmul_bt, matmul_into, Matrix};

/// Mean of the rows assigned to each graph; empty graphs give zero rows.
pub fn global_mean_pool(x: &Matrix, assignment: &[usize], n_graphs: usize) -> Matrix {
    assert_eq!(x.rows(), assignment.len(), "one assignment per node");
    let mut out = Matrix::zeros(n_graphs, x.cols());
    let mut counts = vec![0usize; n_graphs];
    for (r, &g) in assignment.iter().enumerate() {
        counts[g] += 1;
        for (o, v) in out.row_mut(g).iter_mut().zip(x.row(r)) {
            *o += *v;
        }
    }
    for (g, &c) in counts.iter().enumerate() {
        if c > 0 {
            let inv = 1.0 / c as f64;
            out.row_mut(g).iter_mut().for_each(|v| *v *= inv);
        }
    }
    out
}

struct StructureTrace {
    op: GraphOperator,
    /// Layer inputs followed by the final activation.
    activations: Vec<Matrix>,
    pooled: Matrix,
}

struct Trace {
    structures: Vec<StructureTrace>,
    concat: Matrix,
    hidden: Matrix,
    logits: Matrix,
}

fn layer_params<'a>(params: &'a ModelParameters, config: &ModelConfig, layer: usize) -> LayerParams<'a> {
    let (d_in, d_out) = config.layer_dims(layer);
    LayerParams {
        weight: &params.tensor(&format!("conv{layer}.weight")).data,
        root: params.get(&format!("conv{layer}.root")).map(|t| t.data.as_slice()),
        bias: &params.tensor(&format!("conv{layer}.bias")).data,
        d_in,
        d_out,
    }
}

fn check_inputs(params: &ModelParameters, config: &ModelConfig, batch: &Batch) -> Result<()> {
    config.validate()?;
    params.validate(config)?;
    if batch.n_structures() != config.n_structures {
        return Err(Error::config(
            "n_structures",
            format!(
                "batch has {} structures, model expects {}",
                batch.n_structures(),
                config.n_structures
            ),
        ));
    }
    if batch.feature_dim() != config.input_dim {
        return Err(Error::config(
            "input_dim",
            format!(
                "batch features are {}-dimensional, model expects {}",
                batch.feature_dim(),
                config.input_dim
            ),
        ));
    }
    if let Some(&y) = batch.labels.iter().find(|&&y| y >= config.n_classes) {
        return Err(Error::config(
            "n_classes",
            format!("label {y} with {} classes", config.n_classes),
        ));
    }
    Ok(())
}

fn relu(m: &mut Matrix) {
    m.map_inplace(|v| v.max(0.0));
}

fn structure_forward(
    params: &ModelParameters,
    config: &ModelConfig,
    union: &GraphUnion,
    batch_size: usize,
) -> Result<StructureTrace> {
    let op = GraphOperator::new(
        config.conv_kind,
        union.node_count(),
        &union.edges,
        &union.edge_attrs,
        config.spline_kernel_size,
    )?;
    let mut activations = Vec::with_capacity(config.conv_layers + 1);
    activations.push(union.node_features.clone());
    for l in 0..config.conv_layers {
        let mut pre = op.forward(&activations[l], &layer_params(params, config, l));
        relu(&mut pre);
        activations.push(pre);
    }
    let pooled = global_mean_pool(activations.last().unwrap(), &union.assignment, batch_size);
    Ok(StructureTrace {
        op,
        activations,
        pooled,
    })
}

fn forward_trace(params: &ModelParameters, config: &ModelConfig, batch: &Batch) -> Result<Trace> {
    check_inputs(params, config, batch)?;
    let b = batch.size();
    let h = config.hidden;
    let structures = batch
        .structures
        .par_iter()
        .map(|u| structure_forward(params, config, u, b))
        .collect::<Result<Vec<_>>>()?;

    let n = config.n_structures;
    let mut concat = Matrix::zeros(b, n * h);
    for (s, tr) in structures.iter().enumerate() {
        for r in 0..b {
            concat.row_mut(r)[s * h..(s + 1) * h].copy_from_slice(tr.pooled.row(r));
        }
    }

    let mut hidden = Matrix::zeros(b, h);
    matmul_into(
        concat.as_slice(),
        b,
        n * h,
        &params.tensor("fc_hidden.weight").data,
        h,
        hidden.as_mut_slice(),
    );
    hidden.add_row(&params.tensor("fc_hidden.bias").data);
    relu(&mut hidden);

    let c = config.n_classes;
    let mut logits = Matrix::zeros(b, c);
    matmul_into(
        hidden.as_slice(),
        b,
        h,
        &params.tensor("fc_out.weight").data,
        c,
        logits.as_mut_slice(),
    );
    logits.add_row(&params.tensor("fc_out.bias").data);

    Ok(Trace {
        structures,
        concat,
        hidden,
        logits,
    })
}

/// Logits, `batch_size × n_classes`.
pub fn model_forward(params: &ModelParameters, config: &ModelConfig, batch: &Batch) -> Result<Matrix> {
    Ok(forward_trace(params, config, batch)?.logits)
}

/// Pooled submodel embedding of every structure, each `batch_size × hidden`.
pub fn structure_embeddings(
    params: &ModelParameters,
    config: &ModelConfig,
    batch: &Batch,
) -> Result<Vec<Matrix>> {
    Ok(forward_trace(params, config, batch)?
        .structures
        .into_iter()
        .map(|s| s.pooled)
        .collect())
}

/// `dst += src` elementwise.
fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += *s;
    }
}

/// Mean cross entropy of the batch and its gradient for every parameter.
pub fn loss_and_gradients(
    params: &ModelParameters,
    config: &ModelConfig,
    batch: &Batch,
) -> Result<(f64, ModelParameters)> {
    let trace = forward_trace(params, config, batch)?;
    let loss = cross_entropy(&trace.logits, &batch.labels);
    let mut grads = params.zeros_like();
    let (b, h, n) = (batch.size(), config.hidden, config.n_structures);

    // head
    let dlogits = cross_entropy_grad(&trace.logits, &batch.labels);
    grads.tensor_mut("fc_out.weight").data = trace.hidden.t_matmul(&dlogits)?.into_vec();
    grads.tensor_mut("fc_out.bias").data = dlogits.column_sums();
    let mut dhidden = matmul_bt(&dlogits, &params.tensor("fc_out.weight").data, h);
    for (g, a) in dhidden.as_mut_slice().iter_mut().zip(trace.hidden.as_slice()) {
        if *a <= 0.0 {
            *g = 0.0;
        }
    }
    grads.tensor_mut("fc_hidden.weight").data = trace.concat.t_matmul(&dhidden)?.into_vec();
    grads.tensor_mut("fc_hidden.bias").data = dhidden.column_sums();
    let dconcat = matmul_bt(&dhidden, &params.tensor("fc_hidden.weight").data, n * h);

    // shared submodel, one pass per structure
    let per_structure: Vec<Vec<LayerGrads>> = trace
        .structures
        .par_iter()
        .zip(batch.structures.par_iter())
        .enumerate()
        .map(|(s, (tr, union))| {
            let mut counts = vec![0usize; b];
            for &g in &union.assignment {
                counts[g] += 1;
            }
            let mut d = Matrix::zeros(union.node_count(), h);
            for (r, &g) in union.assignment.iter().enumerate() {
                let inv = 1.0 / counts[g] as f64;
                let src = &dconcat.row(g)[s * h..(s + 1) * h];
                for (dv, sv) in d.row_mut(r).iter_mut().zip(src) {
                    *dv = sv * inv;
                }
            }
            let mut layers = Vec::with_capacity(config.conv_layers);
            for l in (0..config.conv_layers).rev() {
                let out = &tr.activations[l + 1];
                for (dv, a) in d.as_mut_slice().iter_mut().zip(out.as_slice()) {
                    if *a <= 0.0 {
                        *dv = 0.0;
                    }
                }
                let (dx, lg) =
                    tr.op
                        .backward(&tr.activations[l], &layer_params(params, config, l), &d, l > 0);
                layers.push(lg);
                if let Some(dx) = dx {
                    d = dx;
                }
            }
            layers.reverse();
            layers
        })
        .collect();

    for layers in &per_structure {
        for (l, lg) in layers.iter().enumerate() {
            add_into(&mut grads.tensor_mut(&format!("conv{l}.weight")).data, &lg.weight);
            add_into(&mut grads.tensor_mut(&format!("conv{l}.bias")).data, &lg.bias);
            if let Some(root) = &lg.root {
                add_into(&mut grads.tensor_mut(&format!("conv{l}.root")).data, root);
            }
        }
    }
    Ok((loss, grads))
}

/// Gradients of the mean cross entropy with respect to every parameter.
pub fn backward(params: &ModelParameters, config: &ModelConfig, batch: &Batch) -> Result<ModelParameters> {
    Ok(loss_and_gradients(params, config, batch)?.1)
}
