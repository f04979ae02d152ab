//! Batched evaluation of a network together with its input derivatives.
//!
//! A PDE residual needs `Λ`, some first derivatives and some pure second
//! derivatives with respect to the inputs, at every collocation point, and
//! the trainer needs the gradient of the resulting loss with respect to θ.
//! Both are obtained by pushing a truncated Taylor expansion ("jet") of each
//! layer's activations through the network on a [`BatchTape`]:
//!
//! ```text
//! z   = W a + b        z_d  = W a_d        z_dd = W a_dd
//! a'  = σ(z)           a'_d = σ'(z) z_d    a'_dd = σ'(z) z_dd + σ''(z) z_d²
//! ```
//!
//! Every jet component is an ordinary tape node, so one reverse sweep over
//! the loss returns exact parameter gradients of a loss built from input
//! derivatives.

use ndarray::{Array2, Axis};

use super::{Activation, NetworkParams};
use crate::autodiff::{BatchTape, ParamGrads, TensorId};

/// Which input derivatives to carry.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JetSpec {
    /// Input dimensions `d` for which `∂/∂x_d` is needed.
    pub first: Vec<usize>,
    /// Input dimensions `d` for which `∂²/∂x_d²` is needed; each must also
    /// appear in `first`.
    pub second: Vec<usize>,
}

impl JetSpec {
    pub fn value_only() -> Self {
        Self::default()
    }

    pub fn new(first: &[usize], second: &[usize]) -> Self {
        let mut first = first.to_vec();
        for &d in second {
            if !first.contains(&d) {
                first.push(d);
            }
        }
        first.sort_unstable();
        Self {
            first,
            second: second.to_vec(),
        }
    }

    /// First derivatives in every one of `dim` input dimensions.
    pub fn gradient(dim: usize) -> Self {
        Self::new(&(0..dim).collect::<Vec<_>>(), &[])
    }

    /// Largest input index referenced, plus one.
    fn span(&self) -> usize {
        self.first
            .iter()
            .chain(&self.second)
            .map(|&d| d + 1)
            .max()
            .unwrap_or(0)
    }
}

/// Tape nodes holding an output and its input derivatives, one row per point.
///
/// `first[d]` and `second[d]` are `Some` for every dimension requested in the
/// [`JetSpec`]. Inside the network a `None` stands for an identically zero
/// component, which lets the input layer skip its vanishing second derivatives.
#[derive(Debug, Clone)]
pub struct Jet {
    pub value: TensorId,
    pub first: Vec<Option<TensorId>>,
    pub second: Vec<Option<TensorId>>,
}

impl Jet {
    /// `∂/∂x_d`; panics if it was not requested.
    pub fn d1(&self, d: usize) -> TensorId {
        self.first[d].unwrap_or_else(|| panic!("first derivative {d} was not requested"))
    }

    /// `∂²/∂x_d²`; panics if it was not requested.
    pub fn d2(&self, d: usize) -> TensorId {
        self.second[d].unwrap_or_else(|| panic!("second derivative {d} was not requested"))
    }
}

/// Plain values of a jet evaluated outside training.
#[derive(Debug, Clone, PartialEq)]
pub struct JetValues {
    pub value: Vec<f64>,
    pub first: Vec<Option<Vec<f64>>>,
    pub second: Vec<Option<Vec<f64>>>,
}

/// Parameter nodes of one network on one tape: `(W, b)` per layer, with
/// `b` stored as a `1 × fan_out` row.
#[derive(Debug, Clone)]
pub struct NetworkTensors {
    layers: Vec<(TensorId, TensorId)>,
}

/// A scalar model that can be evaluated in batches on a [`BatchTape`].
pub trait BatchModel {
    fn network(&self) -> &NetworkParams;

    /// Output jet for `points` (one row per point), built on `tape` from the
    /// parameter nodes `tensors`.
    fn jet(
        &self,
        tape: &mut BatchTape,
        tensors: &NetworkTensors,
        points: &Array2<f64>,
        spec: &JetSpec,
    ) -> Jet;

    /// Evaluates the jet without keeping a tape, in chunks of `CHUNK` rows.
    fn evaluate(&self, points: &Array2<f64>, spec: &JetSpec) -> JetValues {
        const CHUNK: usize = 4096;
        let dim = points.ncols();
        let mut out = JetValues {
            value: Vec::with_capacity(points.nrows()),
            first: (0..dim)
                .map(|d| spec.first.contains(&d).then(Vec::new))
                .collect(),
            second: (0..dim)
                .map(|d| spec.second.contains(&d).then(Vec::new))
                .collect(),
        };
        for chunk in points.axis_chunks_iter(Axis(0), CHUNK) {
            let mut tape = BatchTape::new();
            let tensors = self.network().register(&mut tape);
            let jet = self.jet(&mut tape, &tensors, &chunk.to_owned(), spec);
            out.value.extend(tape.value(jet.value).iter());
            for d in 0..dim {
                if let (Some(v), Some(id)) = (&mut out.first[d], jet.first[d]) {
                    v.extend(tape.value(id).iter());
                }
                if let (Some(v), Some(id)) = (&mut out.second[d], jet.second[d]) {
                    v.extend(tape.value(id).iter());
                }
            }
        }
        out
    }
}

impl NetworkParams {
    /// Adds the weights and biases to `tape` as parameter nodes.
    pub fn register(&self, tape: &mut BatchTape) -> NetworkTensors {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                let w = Array2::from_shape_vec((l.fan_out(), l.fan_in), l.weights.clone())
                    .expect("layer shape checked at construction");
                let b =
                    Array2::from_shape_vec((1, l.fan_out()), l.biases.clone()).expect("bias row");
                (tape.param(w), tape.param(b))
            })
            .collect();
        NetworkTensors { layers }
    }

    /// Adds the parameter gradients held in `grads` to the flat vector `out`,
    /// using the same layout as [`flat`](Self::flat).
    pub fn accumulate_grads(&self, tensors: &NetworkTensors, grads: &ParamGrads, out: &mut [f64]) {
        let mut offset = 0;
        for (layer, &(w, b)) in self.layers.iter().zip(&tensors.layers) {
            let nw = layer.weights.len();
            let nb = layer.biases.len();
            if let Some(g) = grads.of(w) {
                for (o, g) in out[offset..offset + nw].iter_mut().zip(g.iter()) {
                    *o += g;
                }
            }
            if let Some(g) = grads.of(b) {
                for (o, g) in out[offset + nw..offset + nw + nb].iter_mut().zip(g.iter()) {
                    *o += g;
                }
            }
            offset += nw + nb;
        }
    }
}

impl BatchModel for NetworkParams {
    fn network(&self) -> &NetworkParams {
        self
    }

    fn jet(
        &self,
        tape: &mut BatchTape,
        tensors: &NetworkTensors,
        points: &Array2<f64>,
        spec: &JetSpec,
    ) -> Jet {
        let (rows, dim) = points.dim();
        assert_eq!(dim, self.input_dim(), "network input dimension");
        assert!(
            spec.span() <= dim,
            "jet requests a derivative beyond the input dimension"
        );

        let mut value = tape.leaf(points.clone());
        let mut first: Vec<Option<TensorId>> = vec![None; dim];
        let mut second: Vec<Option<TensorId>> = vec![None; dim];
        for &d in &spec.first {
            let mut unit = Array2::zeros((rows, dim));
            unit.column_mut(d).fill(1.0);
            first[d] = Some(tape.leaf(unit));
        }

        let last = self.layers.len() - 1;
        for (l, &(w, b)) in tensors.layers.iter().enumerate() {
            let z = tape.linear(value, w);
            let z = tape.add_bias(z, b);
            let dz: Vec<Option<TensorId>> =
                first.iter().map(|a| a.map(|a| tape.linear(a, w))).collect();
            let ddz: Vec<Option<TensorId>> = second
                .iter()
                .map(|a| a.map(|a| tape.linear(a, w)))
                .collect();
            let act = if l == last {
                Activation::Identity
            } else {
                self.activation
            };
            match act {
                Activation::Identity => {
                    value = z;
                    first = dz;
                    second = ddz;
                }
                Activation::Tanh | Activation::Softplus => {
                    // s = σ'(z), s2 = σ''(z)
                    let (a, s) = if act == Activation::Tanh {
                        let a = tape.tanh(z);
                        let sq = tape.mul(a, a);
                        (a, tape.affine(sq, -1.0, 1.0))
                    } else {
                        let a = tape.softplus(z);
                        let diff = tape.sub(z, a);
                        (a, tape.exp(diff))
                    };
                    let s2 = if spec.second.is_empty() {
                        None
                    } else if act == Activation::Tanh {
                        let as_ = tape.mul(a, s);
                        Some(tape.scale(as_, -2.0))
                    } else {
                        let one_minus = tape.affine(s, -1.0, 1.0);
                        Some(tape.mul(s, one_minus))
                    };
                    value = a;
                    for d in 0..dim {
                        let Some(dzd) = dz[d] else { continue };
                        first[d] = Some(tape.mul(s, dzd));
                        if spec.second.contains(&d) {
                            let s2 = s2.expect("second derivatives requested");
                            let t = tape.mul(s2, dzd);
                            let curv = tape.mul(t, dzd);
                            second[d] = Some(match ddz[d] {
                                Some(ddzd) => {
                                    let lin = tape.mul(s, ddzd);
                                    tape.add(lin, curv)
                                }
                                None => curv,
                            });
                        }
                    }
                }
            }
        }

        for d in 0..dim {
            if !spec.first.contains(&d) {
                first[d] = None;
            }
            if spec.second.contains(&d) {
                if second[d].is_none() {
                    second[d] = Some(tape.leaf(Array2::zeros((rows, 1))));
                }
            } else {
                second[d] = None;
            }
        }
        Jet {
            value,
            first,
            second,
        }
    }
}
