//! Dense feed-forward networks.
//!
//! A network maps an input vector through layers `a ← σ(W a + b)`, with the
//! hidden activation `σ` on every layer but the last, which stays linear.
//! The trainable parameters θ are the concatenation, layer by layer, of each
//! weight matrix (row-major, `fan_out × fan_in`) followed by its bias vector.

mod jet;
mod wrapper;

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Real;
use crate::error::{Error, Result};
use crate::grid::fmt_f64;

pub use jet::{BatchModel, Jet, JetSpec, JetValues, NetworkTensors};
pub use wrapper::{wrap_hard_constraints, ConstraintWrapper, TimeFactor};

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Softplus,
    Identity,
}

impl Activation {
    pub fn apply<R: Real>(self, x: R) -> R {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Softplus => x.softplus(),
            Activation::Identity => x,
        }
    }
}

/// A scalar field that can be evaluated on any [`Real`] type, and hence
/// differentiated by every mode in [`autodiff`](crate::autodiff).
pub trait Evaluator {
    fn eval<R: Real>(&self, point: &[R]) -> R;
}

/// One dense layer: `weights` is `fan_out × fan_in`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub fan_in: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    pub fn fan_out(&self) -> usize {
        self.biases.len()
    }

    fn apply<R: Real>(&self, input: &[R], act: Activation) -> Vec<R> {
        self.biases
            .iter()
            .zip(self.weights.chunks_exact(self.fan_in))
            .map(|(&b, row)| {
                let mut acc = input[0] * row[0];
                for (&x, &w) in input.iter().zip(row).skip(1) {
                    acc = acc + x * w;
                }
                act.apply(acc + b)
            })
            .collect()
    }
}

/// Weights, biases and activation of a dense network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    layers: Vec<Layer>,
    activation: Activation,
}

/// Number of trainable parameters for the given layer sizes, input first.
///
/// ```
/// assert_eq!(pinn::network::param_count(&[2, 8, 4, 2, 1]).unwrap(), 73);
/// ```
pub fn param_count(sizes: &[usize]) -> Result<usize> {
    validate_sizes(sizes)?;
    Ok(sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum())
}

fn validate_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::Structural(format!(
            "a network needs at least input and output sizes, got {sizes:?}"
        )));
    }
    if let Some(k) = sizes.iter().position(|&n| n == 0) {
        return Err(Error::Structural(format!(
            "layer size {k} is zero in {sizes:?}"
        )));
    }
    Ok(())
}

/// Glorot-uniform weights, zero biases, deterministic in `seed`.
pub fn init_params(sizes: &[usize], activation: Activation, seed: u64) -> Result<NetworkParams> {
    validate_sizes(sizes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = sizes
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            Layer {
                fan_in,
                weights: (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-limit..=limit))
                    .collect(),
                biases: vec![0.0; fan_out],
            }
        })
        .collect();
    NetworkParams::from_layers(layers, activation)
}

/// Forward pass with parameters supplied as a flat vector of any [`Real`]
/// type, so that θ itself can be differentiated.
pub fn forward_flat<R: Real>(
    sizes: &[usize],
    activation: Activation,
    theta: &[R],
    input: &[R],
) -> Result<Vec<R>> {
    let expected = param_count(sizes)?;
    if theta.len() != expected {
        return Err(Error::Structural(format!(
            "expected {expected} parameters, got {}",
            theta.len()
        )));
    }
    if input.len() != sizes[0] {
        return Err(Error::Dimension {
            layer: 0,
            expected: sizes[0],
            got: input.len(),
        });
    }
    let mut a = input.to_vec();
    let mut offset = 0;
    let last = sizes.len() - 2;
    for (l, w) in sizes.windows(2).enumerate() {
        let (fan_in, fan_out) = (w[0], w[1]);
        let weights = &theta[offset..offset + fan_in * fan_out];
        let biases = &theta[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
        offset += fan_in * fan_out + fan_out;
        let act = if l == last {
            Activation::Identity
        } else {
            activation
        };
        a = biases
            .iter()
            .zip(weights.chunks_exact(fan_in))
            .map(|(&b, row)| {
                let mut acc = a[0] * row[0];
                for (&x, &w) in a.iter().zip(row).skip(1) {
                    acc = acc + x * w;
                }
                act.apply(acc + b)
            })
            .collect();
    }
    Ok(a)
}

impl NetworkParams {
    /// Assembles a network, checking that adjacent layers chain.
    pub fn from_layers(layers: Vec<Layer>, activation: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Structural(
                "a network needs at least one layer".into(),
            ));
        }
        for (l, layer) in layers.iter().enumerate() {
            if layer.fan_in == 0 || layer.biases.is_empty() {
                return Err(Error::Structural(format!(
                    "layer {l} has an empty dimension"
                )));
            }
            if layer.weights.len() != layer.fan_in * layer.fan_out() {
                return Err(Error::Structural(format!(
                    "layer {l}: {} weights for a {}×{} matrix",
                    layer.weights.len(),
                    layer.fan_out(),
                    layer.fan_in
                )));
            }
            if l > 0 && layers[l - 1].fan_out() != layer.fan_in {
                return Err(Error::Dimension {
                    layer: l,
                    expected: layers[l - 1].fan_out(),
                    got: layer.fan_in,
                });
            }
        }
        Ok(Self { layers, activation })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Layer sizes, input first.
    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].fan_in)
            .chain(self.layers.iter().map(Layer::fan_out))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// θ as one vector: per layer, weights row-major then biases.
    pub fn flat(&self) -> Vec<f64> {
        let mut theta = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            theta.extend_from_slice(&l.weights);
            theta.extend_from_slice(&l.biases);
        }
        theta
    }

    pub fn set_flat(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.num_params() {
            return Err(Error::Structural(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                theta.len()
            )));
        }
        let mut rest = theta;
        for l in &mut self.layers {
            let (w, r) = rest.split_at(l.weights.len());
            let (b, r) = r.split_at(l.biases.len());
            l.weights.copy_from_slice(w);
            l.biases.copy_from_slice(b);
            rest = r;
        }
        Ok(())
    }

    pub fn with_flat(&self, theta: &[f64]) -> Result<Self> {
        let mut out = self.clone();
        out.set_flat(theta)?;
        Ok(out)
    }

    /// Applies the layer recursion; the final layer is linear.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.forward_real(input)
    }

    /// [`forward`](Self::forward) over any [`Real`] input type.
    pub fn forward_real<R: Real>(&self, input: &[R]) -> Result<Vec<R>> {
        if input.len() != self.input_dim() {
            return Err(Error::Dimension {
                layer: 0,
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        Ok(self.forward_unchecked(input))
    }

    fn forward_unchecked<R: Real>(&self, input: &[R]) -> Vec<R> {
        let last = self.layers.len() - 1;
        let mut a = input.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let act = if l == last {
                Activation::Identity
            } else {
                self.activation
            };
            a = layer.apply(&a, act);
        }
        a
    }

    /// Writes `layer,row,col,value` rows. Biases are stored as column
    /// `fan_in` of their layer, i.e. the augmented matrix `[W | b]`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["layer", "row", "col", "value"])?;
        for (l, layer) in self.layers.iter().enumerate() {
            for r in 0..layer.fan_out() {
                for c in 0..=layer.fan_in {
                    let v = if c < layer.fan_in {
                        layer.weights[r * layer.fan_in + c]
                    } else {
                        layer.biases[r]
                    };
                    w.write_record([l.to_string(), r.to_string(), c.to_string(), fmt_f64(v)])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Parses the format written by [`write_csv`](Self::write_csv). Every
    /// entry of every augmented matrix must be present exactly once.
    pub fn read_csv<R: Read>(input: R, activation: Activation, path: &Path) -> Result<Self> {
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            message,
        };
        let mut r = csv::Reader::from_reader(input);
        if r.headers()?.iter().collect::<Vec<_>>() != ["layer", "row", "col", "value"] {
            return Err(bad("expected header layer,row,col,value".into()));
        }
        let mut entries = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != 4 {
                return Err(bad(format!("row {} has {} fields", line + 1, rec.len())));
            }
            let idx = |k: usize| {
                rec[k]
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| bad(format!("row {}: bad index `{}`", line + 1, &rec[k])))
            };
            let value: f64 = rec[3]
                .trim()
                .parse()
                .map_err(|_| bad(format!("row {}: bad value `{}`", line + 1, &rec[3])))?;
            entries.push((idx(0)?, idx(1)?, idx(2)?, value));
        }
        if entries.is_empty() {
            return Err(bad("no parameter rows".into()));
        }
        let n_layers = entries.iter().map(|e| e.0).max().unwrap_or(0) + 1;
        let mut layers = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let rows = entries.iter().filter(|e| e.0 == l).map(|e| e.1).max();
            let cols = entries.iter().filter(|e| e.0 == l).map(|e| e.2).max();
            let (Some(rows), Some(cols)) = (rows, cols) else {
                return Err(bad(format!("layer {l} is missing")));
            };
            if cols == 0 {
                return Err(bad(format!("layer {l} has no weight columns")));
            }
            let (fan_out, fan_in) = (rows + 1, cols);
            let mut seen = vec![false; fan_out * (fan_in + 1)];
            let mut layer = Layer {
                fan_in,
                weights: vec![0.0; fan_out * fan_in],
                biases: vec![0.0; fan_out],
            };
            for &(_, r, c, v) in entries.iter().filter(|e| e.0 == l) {
                let k = r * (fan_in + 1) + c;
                if std::mem::replace(&mut seen[k], true) {
                    return Err(bad(format!("layer {l} entry ({r},{c}) appears twice")));
                }
                if c < fan_in {
                    layer.weights[r * fan_in + c] = v;
                } else {
                    layer.biases[r] = v;
                }
            }
            if let Some(k) = seen.iter().position(|s| !s) {
                return Err(bad(format!(
                    "layer {l} entry ({},{}) is missing",
                    k / (fan_in + 1),
                    k % (fan_in + 1)
                )));
            }
            layers.push(layer);
        }
        Self::from_layers(layers, activation).map_err(|e| bad(e.to_string()))
    }

    pub fn load(path: &Path, activation: Activation) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file), activation, path)
    }
}

/// The first output of the network as a scalar field.
impl Evaluator for NetworkParams {
    fn eval<R: Real>(&self, point: &[R]) -> R {
        assert_eq!(point.len(), self.input_dim(), "network input dimension");
        self.forward_unchecked(point)[0]
    }
}
