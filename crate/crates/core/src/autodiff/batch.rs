//! Reverse-mode differentiation over matrix-valued nodes.
//!
//! The scalar [`Tape`](super::Tape) records one node per floating-point
//! operation, which is the right granularity for auditing derivative rules
//! but far too fine for training: a PINN loss over ten thousand collocation
//! points would need hundreds of millions of scalar nodes. `BatchTape`
//! records the same elementary operations lifted elementwise over a batch
//! (one row per point), plus the matrix product that a dense layer is made
//! of. Each node holds a whole `rows × cols` array, so one backward sweep
//! costs a handful of matrix products per layer.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, Axis, Zip};

/// Index of a node on a [`BatchTape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorId(usize);

#[derive(Debug, Clone, Copy)]
enum TOp {
    Leaf,
    Param(usize),
    /// `x · wᵀ`
    Linear(usize, usize),
    /// `x + 1·b` with `b` a `1 × cols` row
    AddBias(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    /// `a · scale + shift`; only the scale matters for the gradient
    Affine(usize, f64),
    Pow(usize, f64),
    Exp(usize),
    Ln(usize),
    Sin(usize),
    Cos(usize),
    Tanh(usize),
    Softplus(usize),
    /// `scale · Σ a²`, a `1 × 1` node
    SumSquares(usize, f64),
}

#[derive(Debug)]
struct TNode {
    op: TOp,
    value: Array2<f64>,
    needs_grad: bool,
}

/// Gradients of the parameter nodes, in parameter registration order.
#[derive(Debug)]
pub struct ParamGrads {
    ids: Vec<usize>,
    grads: Vec<Option<Array2<f64>>>,
}

impl ParamGrads {
    /// Gradient of the parameter node `id`.
    pub fn of(&self, id: TensorId) -> Option<&Array2<f64>> {
        let k = self.ids.iter().position(|&p| p == id.0)?;
        self.get(k)
    }

    /// Gradient of parameter `k`, or `None` if the output does not depend on it.
    pub fn get(&self, k: usize) -> Option<&Array2<f64>> {
        self.grads.get(k).and_then(Option::as_ref)
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }
}

/// Append-only tape of batched elementwise and matrix operations.
#[derive(Debug, Default)]
pub struct BatchTape {
    nodes: Vec<TNode>,
    params: Vec<usize>,
}

impl BatchTape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: TensorId) -> &Array2<f64> {
        &self.nodes[id.0].value
    }

    /// Scalar value of a `1 × 1` node.
    pub fn scalar(&self, id: TensorId) -> f64 {
        self.nodes[id.0].value[[0, 0]]
    }

    fn push(&mut self, op: TOp, value: Array2<f64>, needs_grad: bool) -> TensorId {
        self.nodes.push(TNode {
            op,
            value,
            needs_grad,
        });
        TensorId(self.nodes.len() - 1)
    }

    fn needs(&self, id: usize) -> bool {
        self.nodes[id].needs_grad
    }

    /// Constant data; never receives a gradient.
    pub fn leaf(&mut self, value: Array2<f64>) -> TensorId {
        self.push(TOp::Leaf, value, false)
    }

    /// A trainable tensor; its gradient is returned by [`backward`](Self::backward).
    pub fn param(&mut self, value: Array2<f64>) -> TensorId {
        let k = self.params.len();
        let id = self.push(TOp::Param(k), value, true);
        self.params.push(id.0);
        id
    }

    /// `x · wᵀ` for `x: rows × k` and `w: n × k`.
    pub fn linear(&mut self, x: TensorId, w: TensorId) -> TensorId {
        let value = self.nodes[x.0].value.dot(&self.nodes[w.0].value.t());
        let ng = self.needs(x.0) || self.needs(w.0);
        self.push(TOp::Linear(x.0, w.0), value, ng)
    }

    /// Adds the `1 × n` row `b` to every row of `x`.
    pub fn add_bias(&mut self, x: TensorId, b: TensorId) -> TensorId {
        let value = &self.nodes[x.0].value + &self.nodes[b.0].value;
        let ng = self.needs(x.0) || self.needs(b.0);
        self.push(TOp::AddBias(x.0, b.0), value, ng)
    }

    fn binary(
        &mut self,
        op: TOp,
        a: TensorId,
        b: TensorId,
        f: impl Fn(f64, f64) -> f64,
    ) -> TensorId {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(
            va.dim(),
            vb.dim(),
            "elementwise operands must share a shape"
        );
        let value = Zip::from(va).and(vb).map_collect(|&x, &y| f(x, y));
        let ng = self.needs(a.0) || self.needs(b.0);
        self.push(op, value, ng)
    }

    fn unary(&mut self, op: TOp, a: TensorId, f: impl Fn(f64) -> f64) -> TensorId {
        let value = self.nodes[a.0].value.mapv(f);
        let ng = self.needs(a.0);
        self.push(op, value, ng)
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> TensorId {
        self.binary(TOp::Add(a.0, b.0), a, b, |x, y| x + y)
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> TensorId {
        self.binary(TOp::Sub(a.0, b.0), a, b, |x, y| x - y)
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> TensorId {
        self.binary(TOp::Mul(a.0, b.0), a, b, |x, y| x * y)
    }

    pub fn div(&mut self, a: TensorId, b: TensorId) -> TensorId {
        self.binary(TOp::Div(a.0, b.0), a, b, |x, y| x / y)
    }

    /// `a · scale + shift`.
    pub fn affine(&mut self, a: TensorId, scale: f64, shift: f64) -> TensorId {
        self.unary(TOp::Affine(a.0, scale), a, |x| x * scale + shift)
    }

    pub fn scale(&mut self, a: TensorId, c: f64) -> TensorId {
        self.affine(a, c, 0.0)
    }

    pub fn powf(&mut self, a: TensorId, p: f64) -> TensorId {
        self.unary(TOp::Pow(a.0, p), a, |x| x.powf(p))
    }

    pub fn exp(&mut self, a: TensorId) -> TensorId {
        self.unary(TOp::Exp(a.0), a, f64::exp)
    }

    pub fn ln(&mut self, a: TensorId) -> TensorId {
        self.unary(TOp::Ln(a.0), a, f64::ln)
    }

    pub fn sin(&mut self, a: TensorId) -> TensorId {
        self.unary(TOp::Sin(a.0), a, f64::sin)
    }

    pub fn cos(&mut self, a: TensorId) -> TensorId {
        self.unary(TOp::Cos(a.0), a, f64::cos)
    }

    pub fn tanh(&mut self, a: TensorId) -> TensorId {
        self.unary(TOp::Tanh(a.0), a, f64::tanh)
    }

    pub fn softplus(&mut self, a: TensorId) -> TensorId {
        self.unary(TOp::Softplus(a.0), a, super::real::softplus)
    }

    /// `scale · Σ a²` as a `1 × 1` node.
    pub fn sum_squares(&mut self, a: TensorId, scale: f64) -> TensorId {
        let s: f64 = self.nodes[a.0].value.iter().map(|x| x * x).sum();
        let ng = self.needs(a.0);
        self.push(
            TOp::SumSquares(a.0, scale),
            Array2::from_elem((1, 1), scale * s),
            ng,
        )
    }

    /// Gradients of the `1 × 1` node `output` with respect to every parameter.
    pub fn backward(&self, output: TensorId) -> ParamGrads {
        assert_eq!(
            self.nodes[output.0].value.dim(),
            (1, 1),
            "backward needs a scalar output"
        );
        let mut grads: Vec<Option<Array2<f64>>> = (0..=output.0).map(|_| None).collect();
        grads[output.0] = Some(Array2::ones((1, 1)));
        let mut out = ParamGrads {
            ids: self.params.clone(),
            grads: (0..self.params.len()).map(|_| None).collect(),
        };

        for id in (0..=output.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            if !node.needs_grad {
                continue;
            }
            let (lo, _) = grads.split_at_mut(id);
            let val = |k: usize| &self.nodes[k].value;
            let needs = |k: usize| self.nodes[k].needs_grad;
            match node.op {
                TOp::Leaf => {}
                TOp::Param(k) => {
                    out.grads[k] = Some(g);
                    continue;
                }
                TOp::Linear(x, w) => {
                    if needs(x) {
                        let gx = slot(lo, x, val(x).dim());
                        general_mat_mul(1.0, &g, val(w), 1.0, gx);
                    }
                    if needs(w) {
                        let gw = slot(lo, w, val(w).dim());
                        general_mat_mul(1.0, &g.t(), val(x), 1.0, gw);
                    }
                }
                TOp::AddBias(x, b) => {
                    if needs(b) {
                        let gb = slot(lo, b, val(b).dim());
                        *gb += &g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    }
                    if needs(x) {
                        add_into(lo, x, g);
                    }
                }
                TOp::Add(a, b) => {
                    if needs(a) {
                        let ga = slot(lo, a, g.dim());
                        *ga += &g;
                    }
                    if needs(b) {
                        add_into(lo, b, g);
                    }
                }
                TOp::Sub(a, b) => {
                    if needs(a) {
                        let ga = slot(lo, a, g.dim());
                        *ga += &g;
                    }
                    if needs(b) {
                        let gb = slot(lo, b, g.dim());
                        *gb -= &g;
                    }
                }
                TOp::Mul(a, b) => {
                    if needs(a) {
                        let ga = slot(lo, a, g.dim());
                        Zip::from(ga)
                            .and(&g)
                            .and(val(b))
                            .for_each(|s, &g, &y| *s += g * y);
                    }
                    if needs(b) {
                        let gb = slot(lo, b, g.dim());
                        Zip::from(gb)
                            .and(&g)
                            .and(val(a))
                            .for_each(|s, &g, &x| *s += g * x);
                    }
                }
                TOp::Div(a, b) => {
                    if needs(a) {
                        let ga = slot(lo, a, g.dim());
                        Zip::from(ga)
                            .and(&g)
                            .and(val(b))
                            .for_each(|s, &g, &y| *s += g / y);
                    }
                    if needs(b) {
                        let gb = slot(lo, b, g.dim());
                        Zip::from(gb)
                            .and(&g)
                            .and(&node.value)
                            .and(val(b))
                            .for_each(|s, &g, &q, &y| *s -= g * q / y);
                    }
                }
                TOp::Affine(a, scale) => {
                    let ga = slot(lo, a, g.dim());
                    Zip::from(ga).and(&g).for_each(|s, &g| *s += g * scale);
                }
                TOp::Pow(a, p) => {
                    let ga = slot(lo, a, g.dim());
                    Zip::from(ga)
                        .and(&g)
                        .and(val(a))
                        .for_each(|s, &g, &x| *s += g * p * x.powf(p - 1.0));
                }
                TOp::Exp(a) => {
                    let ga = slot(lo, a, g.dim());
                    Zip::from(ga)
                        .and(&g)
                        .and(&node.value)
                        .for_each(|s, &g, &e| *s += g * e);
                }
                TOp::Ln(a) => {
                    let ga = slot(lo, a, g.dim());
                    Zip::from(ga)
                        .and(&g)
                        .and(val(a))
                        .for_each(|s, &g, &x| *s += g / x);
                }
                TOp::Sin(a) => {
                    let ga = slot(lo, a, g.dim());
                    Zip::from(ga)
                        .and(&g)
                        .and(val(a))
                        .for_each(|s, &g, &x| *s += g * x.cos());
                }
                TOp::Cos(a) => {
                    let ga = slot(lo, a, g.dim());
                    Zip::from(ga)
                        .and(&g)
                        .and(val(a))
                        .for_each(|s, &g, &x| *s -= g * x.sin());
                }
                TOp::Tanh(a) => {
                    let ga = slot(lo, a, g.dim());
                    Zip::from(ga)
                        .and(&g)
                        .and(&node.value)
                        .for_each(|s, &g, &t| *s += g * (1.0 - t * t));
                }
                TOp::Softplus(a) => {
                    let ga = slot(lo, a, g.dim());
                    Zip::from(ga)
                        .and(&g)
                        .and(val(a))
                        .and(&node.value)
                        .for_each(|s, &g, &x, &sp| *s += g * (x - sp).exp());
                }
                TOp::SumSquares(a, scale) => {
                    let c = 2.0 * scale * g[[0, 0]];
                    let ga = slot(lo, a, val(a).dim());
                    Zip::from(ga).and(val(a)).for_each(|s, &x| *s += c * x);
                }
            }
        }
        out
    }
}

fn slot(grads: &mut [Option<Array2<f64>>], k: usize, dim: (usize, usize)) -> &mut Array2<f64> {
    grads[k].get_or_insert_with(|| Array2::zeros(dim))
}

fn add_into(grads: &mut [Option<Array2<f64>>], k: usize, g: Array2<f64>) {
    match &mut grads[k] {
        Some(existing) => *existing += &g,
        empty => *empty = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{reverse_gradient, Real, Tape};
    use ndarray::array;

    #[test]
    fn elementwise_gradients_match_scalar_tape() {
        let xs = [0.3, -0.8, 1.4];
        let ws = [0.5, -1.1];
        let mut bt = BatchTape::new();
        let x = bt.leaf(Array2::from_shape_vec((3, 1), xs.to_vec()).unwrap());
        let w = bt.param(Array2::from_shape_vec((1, 1), vec![ws[0]]).unwrap());
        let b = bt.param(Array2::from_shape_vec((1, 1), vec![ws[1]]).unwrap());
        let z = bt.linear(x, w);
        let z = bt.add_bias(z, b);
        let a = bt.tanh(z);
        let s = bt.softplus(z);
        let e = bt.exp(a);
        let m = bt.mul(e, s);
        let c = bt.cos(m);
        let sn = bt.sin(z);
        let q = bt.div(c, e);
        let p = bt.affine(sn, 2.0, 3.0);
        let p = bt.powf(p, 1.5);
        let l = bt.ln(p);
        let r = bt.sub(q, l);
        let loss = bt.sum_squares(r, 0.25);
        let grads = bt.backward(loss);

        let tape = Tape::new();
        let wv = tape.inputs(&ws);
        let mut total = tape.constant(0.0);
        for &xv in &xs {
            let z = wv[0] * xv + wv[1];
            let e = z.tanh().exp();
            let m = e * z.softplus();
            let q = m.cos() / e;
            let l = (z.sin() * 2.0 + 3.0).powf(1.5).ln();
            let r = q - l;
            total = total + r * r * 0.25;
        }
        let g = reverse_gradient(&tape, total.id()).unwrap();
        assert!((bt.scalar(loss) - total.value()).abs() < 1e-14);
        assert!((grads.get(0).unwrap()[[0, 0]] - g[0]).abs() < 1e-13);
        assert!((grads.get(1).unwrap()[[0, 0]] - g[1]).abs() < 1e-13);
    }

    #[test]
    fn linear_layer_gradient() {
        // loss = Σ (x wᵀ + b)², checked by hand.
        let mut bt = BatchTape::new();
        let x = bt.leaf(array![[1.0, 2.0], [3.0, -1.0]]);
        let w = bt.param(array![[0.5, -0.25]]);
        let b = bt.param(array![[0.1]]);
        let z = bt.linear(x, w);
        let z = bt.add_bias(z, b);
        let loss = bt.sum_squares(z, 1.0);
        let g = bt.backward(loss);
        // z = [0.1, 1.85]
        let z0 = 0.1;
        let z1 = 1.85;
        let gw = g.get(0).unwrap();
        assert!((gw[[0, 0]] - 2.0 * (z0 * 1.0 + z1 * 3.0)).abs() < 1e-14);
        assert!((gw[[0, 1]] - 2.0 * (z0 * 2.0 + -z1)).abs() < 1e-14);
        assert!((g.get(1).unwrap()[[0, 0]] - 2.0 * (z0 + z1)).abs() < 1e-14);
    }

    #[test]
    fn unused_params_get_none() {
        let mut bt = BatchTape::new();
        let a = bt.param(array![[1.0]]);
        let _unused = bt.param(array![[2.0]]);
        let loss = bt.sum_squares(a, 1.0);
        let g = bt.backward(loss);
        assert_eq!(g.len(), 2);
        assert!(g.get(1).is_none());
        assert_eq!(g.get(0).unwrap()[[0, 0]], 2.0);
    }
}
