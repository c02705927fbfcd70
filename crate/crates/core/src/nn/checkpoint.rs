//! Text checkpoint: a `key value` header with the model and feature settings,
//! then one `param <name> <dims...>` line per tensor followed by its row-major
//! values written with 17 significant digits (exact `f64` round trip).

use std::fmt::Write as _;
use std::path::Path;

use super::{ConvKind, ModelConfig, ModelParameters, Tensor};
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureMode};

const MAGIC: &str = "meshgnn-checkpoint v1";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: ModelConfig,
    pub features: FeatureConfig,
    /// Training augmentation offset in mm.
    pub aug_offset: f64,
    pub seed: u64,
    /// Epoch the parameters come from (0 = initialization).
    pub epoch: usize,
    pub params: ModelParameters,
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let m = &self.model;
        let f = &self.features;
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC}");
        let header: [(&str, String); 15] = [
            ("conv_kind", m.conv_kind.to_string()),
            ("hidden", m.hidden.to_string()),
            ("conv_layers", m.conv_layers.to_string()),
            ("n_structures", m.n_structures.to_string()),
            ("n_classes", m.n_classes.to_string()),
            ("input_dim", m.input_dim.to_string()),
            ("spline_kernel_size", m.spline_kernel_size.to_string()),
            ("spline_degree", m.spline_degree.to_string()),
            ("feature_mode", f.mode.to_string()),
            ("fpfh_radius", fmt17(f.radius)),
            ("fpfh_max_neighbors", f.max_neighbors.to_string()),
            ("fpfh_bins", f.bins.to_string()),
            ("aug_offset", fmt17(self.aug_offset)),
            ("seed", self.seed.to_string()),
            ("epoch", self.epoch.to_string()),
        ];
        for (k, v) in header {
            let _ = writeln!(s, "{k} {v}");
        }
        for (name, t) in self.params.iter() {
            let dims: Vec<String> = t.shape.iter().map(usize::to_string).collect();
            let _ = writeln!(s, "param {name} {}", dims.join(" "));
            let vals: Vec<String> = t.data.iter().map(|&x| fmt17(x)).collect();
            let _ = writeln!(s, "{}", vals.join(" "));
        }
        s
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let err = |line: usize, msg: String| Error::parse(origin, line, msg);
        match lines.next() {
            Some((_, l)) if l == MAGIC => {}
            _ => return Err(err(1, "not a meshgnn checkpoint".into())),
        }

        let mut header = std::collections::BTreeMap::new();
        let mut params = ModelParameters::default();
        while let Some((ln, line)) = lines.next() {
            if line.is_empty() {
                continue;
            }
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            if key == "param" {
                let mut toks = rest.split_whitespace();
                let name = toks
                    .next()
                    .ok_or_else(|| err(ln, "param without a name".into()))?
                    .to_string();
                let shape = toks
                    .map(|t| t.parse::<usize>().map_err(|_| err(ln, format!("bad dim '{t}'"))))
                    .collect::<Result<Vec<_>>>()?;
                let (vln, values) = lines
                    .next()
                    .ok_or_else(|| err(ln, format!("missing values for '{name}'")))?;
                let data = values
                    .split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|_| err(vln, format!("bad value '{t}'"))))
                    .collect::<Result<Vec<_>>>()?;
                if data.len() != shape.iter().product::<usize>() {
                    return Err(err(
                        vln,
                        format!("'{name}' has {} values for shape {shape:?}", data.len()),
                    ));
                }
                params.insert(name, Tensor { shape, data });
            } else {
                header.insert(key.to_string(), (ln, rest.trim().to_string()));
            }
        }

        let get = |k: &str| {
            header
                .get(k)
                .ok_or_else(|| err(1, format!("missing header field '{k}'")))
        };
        fn num<T: std::str::FromStr>(
            v: &(usize, String),
            k: &str,
            origin: &str,
        ) -> Result<T> {
            v.1.parse()
                .map_err(|_| Error::parse(origin, v.0, format!("bad value for '{k}'")))
        }
        let conv_kind: ConvKind = get("conv_kind")?.1.parse()?;
        let mode: FeatureMode = get("feature_mode")?.1.parse()?;
        let model = ModelConfig {
            conv_kind,
            hidden: num(get("hidden")?, "hidden", origin)?,
            conv_layers: num(get("conv_layers")?, "conv_layers", origin)?,
            n_structures: num(get("n_structures")?, "n_structures", origin)?,
            n_classes: num(get("n_classes")?, "n_classes", origin)?,
            input_dim: num(get("input_dim")?, "input_dim", origin)?,
            spline_kernel_size: num(get("spline_kernel_size")?, "spline_kernel_size", origin)?,
            spline_degree: num(get("spline_degree")?, "spline_degree", origin)?,
        };
        let features = FeatureConfig {
            mode,
            radius: num(get("fpfh_radius")?, "fpfh_radius", origin)?,
            max_neighbors: num(get("fpfh_max_neighbors")?, "fpfh_max_neighbors", origin)?,
            bins: num(get("fpfh_bins")?, "fpfh_bins", origin)?,
        };
        let ckpt = Checkpoint {
            model,
            features,
            aug_offset: num(get("aug_offset")?, "aug_offset", origin)?,
            seed: num(get("seed")?, "seed", origin)?,
            epoch: num(get("epoch")?, "epoch", origin)?,
            params,
        };
        ckpt.model.validate()?;
        ckpt.params.validate(&ckpt.model)?;
        if ckpt.features.dim() != ckpt.model.input_dim {
            return Err(Error::config(
                "input_dim",
                format!(
                    "feature mode {} gives {} dims, model declares {}",
                    ckpt.features.mode,
                    ckpt.features.dim(),
                    ckpt.model.input_dim
                ),
            ));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::parse(&text, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> Checkpoint {
        let model = ModelConfig {
            hidden: 4,
            ..ModelConfig::new(ConvKind::Spline, 33, 2)
        };
        let params = ModelParameters::init(&model, &mut ChaCha8Rng::seed_from_u64(5));
        Checkpoint {
            model,
            features: FeatureConfig::new(FeatureMode::Fpfh),
            aug_offset: 0.1,
            seed: 7,
            epoch: 3,
            params,
        }
    }

    #[test]
    fn text_round_trip_is_exact() {
        let c = sample();
        let back = Checkpoint::parse(&c.to_text(), "mem").unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_text(), c.to_text());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let text = sample().to_text().replace("hidden 4", "hidden 5");
        assert!(Checkpoint::parse(&text, "mem").is_err());
        assert!(Checkpoint::parse("garbage", "mem").is_err());
    }
}
