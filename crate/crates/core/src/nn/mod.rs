//! Graph convolutions, the shared-submodel multi-graph classifier, its
//! gradients and the Adam optimizer.
//!
//! Everything is `f64`. Gradients are hand-derived layer adjoints rather than
//! a general autodiff tape; `tests/gradients.rs` checks them against central
//! finite differences.

mod adam;
pub mod checkpoint;
mod conv;
mod loss;
mod model;
mod spline;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use conv::{gcn_conv_forward, graph_conv_forward, spline_conv_forward};
pub use loss::{cross_entropy, softmax_rows};
pub use model::{backward, global_mean_pool, loss_and_gradients, model_forward, structure_embeddings};
pub use spline::{spline_basis, SplineTerm};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConvKind {
    /// Symmetric-normalized adjacency with self loops.
    Gcn,
    /// Root weight plus neighbor-sum weight.
    GraphConv,
    /// Degree-1 open B-spline kernel over edge pseudo-coordinates.
    Spline,
}

impl ConvKind {
    pub const ALL: [ConvKind; 3] = [ConvKind::Gcn, ConvKind::GraphConv, ConvKind::Spline];

    pub fn as_str(self) -> &'static str {
        match self {
            ConvKind::Gcn => "gcn",
            ConvKind::GraphConv => "graphconv",
            ConvKind::Spline => "spline",
        }
    }

    fn has_root(self) -> bool {
        !matches!(self, ConvKind::Gcn)
    }
}

impl fmt::Display for ConvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConvKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gcn" => Ok(ConvKind::Gcn),
            "graphconv" => Ok(ConvKind::GraphConv),
            "spline" => Ok(ConvKind::Spline),
            other => Err(Error::UnknownConvKind(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub conv_kind: ConvKind,
    /// Width of every convolution output and of the hidden FC layer.
    pub hidden: usize,
    pub conv_layers: usize,
    pub n_structures: usize,
    pub n_classes: usize,
    pub input_dim: usize,
    pub spline_kernel_size: usize,
    pub spline_degree: usize,
}

impl ModelConfig {
    pub fn new(conv_kind: ConvKind, input_dim: usize, n_structures: usize) -> Self {
        ModelConfig {
            conv_kind,
            hidden: 32,
            conv_layers: 3,
            n_structures,
            n_classes: 2,
            input_dim,
            spline_kernel_size: 5,
            spline_degree: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, msg: &str| Err(Error::config(field, msg));
        if self.hidden == 0 {
            return fail("hidden", "must be ≥ 1");
        }
        if self.conv_layers != 3 {
            return fail("conv_layers", "the submodel has exactly 3 convolutions");
        }
        if self.n_structures == 0 {
            return fail("n_structures", "must be ≥ 1");
        }
        if self.n_classes < 2 {
            return fail("n_classes", "must be ≥ 2");
        }
        if self.input_dim == 0 {
            return fail("input_dim", "must be ≥ 1");
        }
        if self.conv_kind == ConvKind::Spline {
            if self.spline_kernel_size < 2 {
                return fail("spline_kernel_size", "must be ≥ 2");
            }
            if self.spline_degree != 1 {
                return fail("spline_degree", "only degree 1 is supported");
            }
        }
        Ok(())
    }

    /// Number of spline kernel matrices (`kernel_size³`).
    pub fn kernel_count(&self) -> usize {
        self.spline_kernel_size.pow(3)
    }

    fn layer_dims(&self, layer: usize) -> (usize, usize) {
        if layer == 0 {
            (self.input_dim, self.hidden)
        } else {
            (self.hidden, self.hidden)
        }
    }

    /// Expected parameter names and shapes.
    pub fn parameter_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for l in 0..self.conv_layers {
            let (din, dout) = self.layer_dims(l);
            let weight = match self.conv_kind {
                ConvKind::Spline => vec![self.kernel_count(), din, dout],
                _ => vec![din, dout],
            };
            out.push((format!("conv{l}.weight"), weight));
            if self.conv_kind.has_root() {
                out.push((format!("conv{l}.root"), vec![din, dout]));
            }
            out.push((format!("conv{l}.bias"), vec![dout]));
        }
        let h = self.hidden;
        out.push(("fc_hidden.weight".into(), vec![self.n_structures * h, h]));
        out.push(("fc_hidden.bias".into(), vec![h]));
        out.push(("fc_out.weight".into(), vec![h, self.n_classes]));
        out.push(("fc_out.bias".into(), vec![self.n_classes]));
        out
    }
}

/// A named, shaped array of values (row-major).
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Every trainable tensor, keyed by layer name (`conv0.weight`, `fc_out.bias`, ...).
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ModelParameters {
    tensors: BTreeMap<String, Tensor>,
}

impl ModelParameters {
    pub fn zeros(config: &ModelConfig) -> Self {
        let tensors = config
            .parameter_shapes()
            .into_iter()
            .map(|(name, shape)| (name, Tensor::zeros(&shape)))
            .collect();
        ModelParameters { tensors }
    }

    /// Weights uniform in `±1/√fan_in` (fan_in = input width of each weight
    /// matrix, including each spline kernel matrix), biases zero.
    pub fn init<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Self {
        let mut params = ModelParameters::zeros(config);
        for (name, t) in params.tensors.iter_mut() {
            if name.ends_with(".bias") {
                continue;
            }
            let fan_in = t.shape[t.shape.len() - 2];
            let bound = 1.0 / (fan_in as f64).sqrt();
            for x in &mut t.data {
                *x = rng.gen_range(-bound..bound);
            }
        }
        params
    }

    pub fn zeros_like(&self) -> Self {
        ModelParameters {
            tensors: self
                .tensors
                .iter()
                .map(|(k, t)| (k.clone(), Tensor::zeros(&t.shape)))
                .collect(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    pub(crate) fn tensor(&self, name: &str) -> &Tensor {
        self.tensors
            .get(name)
            .unwrap_or_else(|| panic!("missing parameter {name}"))
    }

    pub(crate) fn tensor_mut(&mut self, name: &str) -> &mut Tensor {
        self.tensors
            .get_mut(name)
            .unwrap_or_else(|| panic!("missing parameter {name}"))
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.tensors.insert(name.into(), tensor);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.tensors.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor)> {
        self.tensors.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    /// Check names and shapes against `config`.
    pub fn validate(&self, config: &ModelConfig) -> Result<()> {
        let expected = config.parameter_shapes();
        if expected.len() != self.tensors.len() {
            return Err(Error::Shape(format!(
                "expected {} parameter tensors, found {}",
                expected.len(),
                self.tensors.len()
            )));
        }
        for (name, shape) in expected {
            let t = self
                .tensors
                .get(&name)
                .ok_or_else(|| Error::Shape(format!("missing parameter '{name}'")))?;
            if t.shape != shape {
                return Err(Error::Shape(format!(
                    "parameter '{name}' has shape {:?}, config implies {shape:?}",
                    t.shape
                )));
            }
            if t.data.len() != shape.iter().product::<usize>() {
                return Err(Error::Shape(format!("parameter '{name}' has wrong length")));
            }
            if !t.data.iter().all(|x| x.is_finite()) {
                return Err(Error::Shape(format!("parameter '{name}' is not finite")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shapes_per_kind() {
        let spline = ModelConfig::new(ConvKind::Spline, 33, 15);
        let p = ModelParameters::zeros(&spline);
        assert_eq!(p.get("conv0.weight").unwrap().shape, vec![125, 33, 32]);
        assert_eq!(p.get("conv1.root").unwrap().shape, vec![32, 32]);
        assert_eq!(p.get("fc_hidden.weight").unwrap().shape, vec![15 * 32, 32]);
        assert_eq!(p.get("fc_out.weight").unwrap().shape, vec![32, 2]);
        let gcn = ModelConfig::new(ConvKind::Gcn, 3, 2);
        assert!(ModelParameters::zeros(&gcn).get("conv0.root").is_none());
        assert!(p.validate(&gcn).is_err());
        assert!(p.validate(&spline).is_ok());
    }

    #[test]
    fn init_respects_bounds() {
        let cfg = ModelConfig::new(ConvKind::GraphConv, 4, 2);
        let p = ModelParameters::init(&cfg, &mut ChaCha8Rng::seed_from_u64(0));
        let w = p.get("conv0.weight").unwrap();
        assert!(w.data.iter().all(|x| x.abs() <= 0.5));
        assert!(w.data.iter().any(|&x| x != 0.0));
        assert!(p.get("conv0.bias").unwrap().data.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn config_validation() {
        let mut cfg = ModelConfig::new(ConvKind::Spline, 3, 2);
        assert!(cfg.validate().is_ok());
        cfg.conv_layers = 2;
        assert!(matches!(cfg.validate(), Err(Error::Config { field, .. }) if field == "conv_layers"));
        assert!("gat".parse::<ConvKind>().is_err());
    }
}
