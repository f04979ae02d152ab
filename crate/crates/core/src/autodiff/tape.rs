//! Reverse-mode differentiation over a recorded computational graph.
//!
//! A [`Tape`] is an append-only list of elementary operations. Each node
//! stores its op kind, up to two parent ids, the local partial derivatives
//! with respect to those parents and its primal value. Because a node can
//! only be created from existing [`Var`]s, parents always precede children
//! and the node order is a topological order.
//!
//! The same graph supports three evaluations:
//!
//! * [`reverse_gradient`]: one backward sweep giving the gradient with respect
//!   to every registered input.
//! * [`forward_eval`]: a replay with dual numbers giving one directional
//!   derivative alongside the value.
//! * [`second_derivative`]: a dual-number replay followed by a reverse sweep
//!   whose adjoints are themselves dual numbers (forward-over-reverse), which
//!   yields a full Hessian column per sweep.
//!
//! ```
//! use pinn::autodiff::{Expr, Real};
//!
//! let f = Expr::record(&[3.0, 4.0], |x| x[0] * x[1] + x[0].sin()).unwrap();
//! let g = f.reverse_gradient().unwrap();
//! assert_eq!(g[1], 3.0);
//! assert!((g[0] - (4.0 + 3.0f64.cos())).abs() < 1e-15);
//! ```

use std::cell::RefCell;
use std::ops::{Add, Div, Index, Mul, Neg, Sub};

use super::dual::Dual;
use super::real::Real;
use crate::error::{Error, Result};

/// Index of a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

/// Elementary operation kinds recorded on a tape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op {
    Input,
    Const,
    Add,
    Sub,
    Mul,
    Div,
    /// Power with a constant real exponent.
    Pow(f64),
    Exp,
    Ln,
    Sin,
    Cos,
    Tanh,
    Softplus,
}

impl Op {
    pub fn name(self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Const => "const",
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Div => "div",
            Op::Pow(_) => "pow",
            Op::Exp => "exp",
            Op::Ln => "ln",
            Op::Sin => "sin",
            Op::Cos => "cos",
            Op::Tanh => "tanh",
            Op::Softplus => "softplus",
        }
    }

    fn arity(self) -> usize {
        match self {
            Op::Input | Op::Const => 0,
            Op::Add | Op::Sub | Op::Mul | Op::Div => 2,
            _ => 1,
        }
    }

    fn apply<T: Real>(self, a: T, b: T) -> T {
        match self {
            Op::Input | Op::Const => unreachable!("leaves are not applied"),
            Op::Add => a + b,
            Op::Sub => a - b,
            Op::Mul => a * b,
            Op::Div => a / b,
            Op::Pow(p) => a.powf(p),
            Op::Exp => a.exp(),
            Op::Ln => a.ln(),
            Op::Sin => a.sin(),
            Op::Cos => a.cos(),
            Op::Tanh => a.tanh(),
            Op::Softplus => a.softplus(),
        }
    }

    /// Partial derivatives of the node value with respect to its parents.
    fn partials<T: Real>(self, a: T, b: T, out: T) -> [T; 2] {
        let zero = a.lift(0.0);
        let one = a.lift(1.0);
        match self {
            Op::Input | Op::Const => [zero, zero],
            Op::Add => [one, one],
            Op::Sub => [one, -one],
            Op::Mul => [b, a],
            Op::Div => [one / b, -(out / b)],
            Op::Pow(p) => [a.powf(p - 1.0) * p, zero],
            Op::Exp => [out, zero],
            Op::Ln => [one / a, zero],
            // black_box keeps LLVM from fusing these with the primal into a
            // `sincos` call, which can round differently from `sin`/`cos`.
            Op::Sin => [std::hint::black_box(a).cos(), zero],
            Op::Cos => [-std::hint::black_box(a).sin(), zero],
            Op::Tanh => [-(out * out) + 1.0, zero],
            Op::Softplus => [(a - out).exp(), zero],
        }
    }

    /// Domain check on primal inputs.
    fn domain_violation(self, a: f64, b: f64) -> Option<String> {
        match self {
            Op::Div if b == 0.0 => Some(format!("division of {a} by zero")),
            Op::Ln if a <= 0.0 => Some(format!("logarithm of non-positive value {a}")),
            Op::Pow(p) if a < 0.0 && p.fract() != 0.0 => {
                Some(format!("negative base {a} with non-integer exponent {p}"))
            }
            Op::Pow(p) if a == 0.0 && p < 0.0 => {
                Some(format!("zero base with negative exponent {p}"))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    parents: [usize; 2],
    partials: [f64; 2],
    value: f64,
}

#[derive(Debug, Clone)]
struct Fault {
    op: &'static str,
    node: usize,
    detail: String,
}

#[derive(Debug, Default)]
struct Inner {
    nodes: Vec<Node>,
    inputs: Vec<usize>,
    fault: Option<Fault>,
}

/// Append-only record of elementary operations.
///
/// A tape is single-threaded (interior mutability through `RefCell`); use
/// one tape per thread.
#[derive(Debug, Default)]
pub struct Tape {
    inner: RefCell<Inner>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a new independent variable.
    pub fn input(&self, value: f64) -> Var<'_> {
        let mut inner = self.inner.borrow_mut();
        let id = inner.nodes.len();
        inner.nodes.push(Node {
            op: Op::Input,
            parents: [id, id],
            partials: [0.0, 0.0],
            value,
        });
        inner.inputs.push(id);
        Var {
            tape: self,
            id,
            value,
        }
    }

    /// Registers one variable per entry of `values`.
    pub fn inputs(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.input(v)).collect()
    }

    pub fn constant(&self, value: f64) -> Var<'_> {
        let mut inner = self.inner.borrow_mut();
        let id = inner.nodes.len();
        inner.nodes.push(Node {
            op: Op::Const,
            parents: [id, id],
            partials: [0.0, 0.0],
            value,
        });
        Var {
            tape: self,
            id,
            value,
        }
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_inputs(&self) -> usize {
        self.inner.borrow().inputs.len()
    }

    /// Ids of the registered inputs, in registration order.
    pub fn input_ids(&self) -> Vec<NodeId> {
        self.inner
            .borrow()
            .inputs
            .iter()
            .map(|&i| NodeId(i))
            .collect()
    }

    /// Recorded primal value of a node.
    pub fn value(&self, id: NodeId) -> Option<f64> {
        self.inner.borrow().nodes.get(id.0).map(|n| n.value)
    }

    /// Op kind and parent ids of a node.
    pub fn node(&self, id: NodeId) -> Option<(Op, Vec<NodeId>)> {
        let inner = self.inner.borrow();
        inner.nodes.get(id.0).map(|n| {
            let parents = n.parents[..n.op.arity()]
                .iter()
                .map(|&p| NodeId(p))
                .collect();
            (n.op, parents)
        })
    }

    /// Drops every node so the tape can be reused for the next evaluation.
    pub fn reset(&mut self) {
        let inner = self.inner.get_mut();
        inner.nodes.clear();
        inner.inputs.clear();
        inner.fault = None;
    }

    /// First domain violation seen while recording, if any.
    pub fn check(&self) -> Result<()> {
        match &self.inner.borrow().fault {
            None => Ok(()),
            Some(f) => Err(Error::Domain {
                op: f.op,
                node: f.node,
                detail: f.detail.clone(),
            }),
        }
    }

    fn push(&self, op: Op, a: &Var<'_>, b: &Var<'_>) -> Var<'_> {
        debug_assert!(std::ptr::eq(a.tape, self) && std::ptr::eq(b.tape, self));
        let value = op.apply(a.value, b.value);
        let partials = op.partials(a.value, b.value, value);
        let mut inner = self.inner.borrow_mut();
        let id = inner.nodes.len();
        if inner.fault.is_none() {
            if let Some(detail) = op.domain_violation(a.value, b.value) {
                inner.fault = Some(Fault {
                    op: op.name(),
                    node: id,
                    detail,
                });
            }
        }
        inner.nodes.push(Node {
            op,
            parents: [a.id, b.id],
            partials,
            value,
        });
        Var {
            tape: self,
            id,
            value,
        }
    }

    /// Re-evaluates the graph at new inputs in any [`Real`] type.
    ///
    /// With `T = f64` and the recorded inputs this reproduces every stored
    /// primal bit for bit. With `T = Dual` it is forward-mode AD.
    pub fn replay<T: Real>(&self, inputs: &[T]) -> Result<Vec<T>> {
        let inner = self.inner.borrow();
        if inputs.len() != inner.inputs.len() {
            return Err(Error::Structural(format!(
                "tape has {} inputs, {} supplied",
                inner.inputs.len(),
                inputs.len()
            )));
        }
        let Some(&anchor) = inputs.first() else {
            return Err(Error::Structural("tape has no inputs".into()));
        };
        let mut next_input = 0;
        let mut vals: Vec<T> = Vec::with_capacity(inner.nodes.len());
        for (id, node) in inner.nodes.iter().enumerate() {
            let v = match node.op {
                Op::Input => {
                    next_input += 1;
                    inputs[next_input - 1]
                }
                Op::Const => anchor.lift(node.value),
                op => {
                    let a = vals[node.parents[0]];
                    let b = vals[node.parents[1]];
                    if let Some(detail) = op.domain_violation(a.value(), b.value()) {
                        return Err(Error::Domain {
                            op: op.name(),
                            node: id,
                            detail,
                        });
                    }
                    op.apply(a, b)
                }
            };
            vals.push(v);
        }
        Ok(vals)
    }
}

/// A variable recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
    value: f64,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var(#{} = {})", self.id, self.value)
    }
}

impl<'t> Var<'t> {
    pub fn id(&self) -> NodeId {
        NodeId(self.id)
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    fn unary(self, op: Op) -> Self {
        self.tape.push(op, &self, &self)
    }
}

macro_rules! var_binop {
    ($trait:ident, $method:ident, $op:expr) => {
        impl<'t> $trait for Var<'t> {
            type Output = Var<'t>;
            fn $method(self, rhs: Var<'t>) -> Var<'t> {
                self.tape.push($op, &self, &rhs)
            }
        }
        impl<'t> $trait<f64> for Var<'t> {
            type Output = Var<'t>;
            fn $method(self, rhs: f64) -> Var<'t> {
                let c = self.tape.constant(rhs);
                self.tape.push($op, &self, &c)
            }
        }
    };
}

var_binop!(Add, add, Op::Add);
var_binop!(Sub, sub, Op::Sub);
var_binop!(Mul, mul, Op::Mul);
var_binop!(Div, div, Op::Div);

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        let zero = self.tape.constant(0.0);
        self.tape.push(Op::Sub, &zero, &self)
    }
}

impl Real for Var<'_> {
    fn value(self) -> f64 {
        self.value
    }
    fn lift(self, c: f64) -> Self {
        self.tape.constant(c)
    }
    fn exp(self) -> Self {
        self.unary(Op::Exp)
    }
    fn ln(self) -> Self {
        self.unary(Op::Ln)
    }
    fn sin(self) -> Self {
        self.unary(Op::Sin)
    }
    fn cos(self) -> Self {
        self.unary(Op::Cos)
    }
    fn tanh(self) -> Self {
        self.unary(Op::Tanh)
    }
    fn softplus(self) -> Self {
        self.unary(Op::Softplus)
    }
    fn powf(self, p: f64) -> Self {
        self.unary(Op::Pow(p))
    }
}

/// Adjoints of the registered inputs, in registration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    adjoints: Vec<f64>,
}

impl Gradient {
    pub fn as_slice(&self) -> &[f64] {
        &self.adjoints
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.adjoints
    }

    pub fn len(&self) -> usize {
        self.adjoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjoints.is_empty()
    }
}

impl Index<usize> for Gradient {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.adjoints[i]
    }
}

fn check_output(tape: &Tape, output: NodeId) -> Result<()> {
    let len = tape.len();
    if output.0 >= len {
        return Err(Error::Structural(format!(
            "output node {} out of range for tape of length {len}",
            output.0
        )));
    }
    Ok(())
}

/// Gradient of `output` with respect to every registered input, by one
/// backward sweep over the recorded partials.
pub fn reverse_gradient(tape: &Tape, output: NodeId) -> Result<Gradient> {
    check_output(tape, output)?;
    tape.check()?;
    let inner = tape.inner.borrow();
    let mut adj = vec![0.0; output.0 + 1];
    adj[output.0] = 1.0;
    for id in (0..=output.0).rev() {
        let a = adj[id];
        if a == 0.0 {
            continue;
        }
        let node = &inner.nodes[id];
        for k in 0..node.op.arity() {
            adj[node.parents[k]] += a * node.partials[k];
        }
    }
    let adjoints = inner
        .inputs
        .iter()
        .map(|&i| adj.get(i).copied().unwrap_or(0.0))
        .collect();
    Ok(Gradient { adjoints })
}

/// Value and directional derivative along input `seed`, from one dual-number
/// pass over the graph.
pub fn forward_eval(
    tape: &Tape,
    output: NodeId,
    inputs: &[f64],
    seed: usize,
) -> Result<(f64, f64)> {
    check_output(tape, output)?;
    if seed >= inputs.len() {
        return Err(Error::Argument(format!(
            "seed index {seed} out of range for {} inputs",
            inputs.len()
        )));
    }
    let vals = tape.replay(&Dual::seeded(inputs, seed))?;
    let out = vals[output.0];
    Ok((out.primal, out.tangent))
}

/// Gradient and one Hessian column (`∂²f/∂xᵢ∂x_col` for every `i`).
///
/// The graph is replayed with dual numbers seeded along `col`, then swept
/// backward with dual adjoints whose local partials are evaluated in dual
/// arithmetic. The primal parts of the adjoints are the gradient; their
/// tangent parts are the Hessian column.
pub fn hessian_column(
    tape: &Tape,
    output: NodeId,
    inputs: &[f64],
    col: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_output(tape, output)?;
    if col >= inputs.len() {
        return Err(Error::Argument(format!(
            "column {col} out of range for {} inputs",
            inputs.len()
        )));
    }
    let vals = tape.replay(&Dual::seeded(inputs, col))?;
    let inner = tape.inner.borrow();
    let zero = Dual::new(0.0, 0.0);
    let mut adj = vec![zero; output.0 + 1];
    adj[output.0] = Dual::new(1.0, 0.0);
    for id in (0..=output.0).rev() {
        let a = adj[id];
        if a == zero {
            continue;
        }
        let node = &inner.nodes[id];
        let arity = node.op.arity();
        if arity == 0 {
            continue;
        }
        let pa = vals[node.parents[0]];
        let pb = vals[node.parents[1]];
        let partials = node.op.partials(pa, pb, vals[id]);
        for k in 0..arity {
            adj[node.parents[k]] = adj[node.parents[k]] + a * partials[k];
        }
    }
    let (grad, column) = inner
        .inputs
        .iter()
        .map(|&i| adj.get(i).copied().unwrap_or(zero))
        .map(|d| (d.primal, d.tangent))
        .unzip();
    Ok((grad, column))
}

/// `∂²f/∂xᵢ∂xⱼ` at `inputs` by forward-over-reverse.
pub fn second_derivative(
    tape: &Tape,
    output: NodeId,
    inputs: &[f64],
    i: usize,
    j: usize,
) -> Result<f64> {
    if i >= inputs.len() {
        return Err(Error::Argument(format!(
            "index {i} out of range for {} inputs",
            inputs.len()
        )));
    }
    let (_, column) = hessian_column(tape, output, inputs, j)?;
    Ok(column[i])
}

/// A recorded scalar expression: a tape plus its output node.
#[derive(Debug)]
pub struct Expr {
    tape: Tape,
    output: NodeId,
    point: Vec<f64>,
}

impl Expr {
    /// Records `f` evaluated at `point`.
    ///
    /// Recording itself never fails; a domain violation met while recording
    /// is reported by the first derivative query.
    pub fn record<F>(point: &[f64], f: F) -> Result<Self>
    where
        F: for<'t> FnOnce(&[Var<'t>]) -> Var<'t>,
    {
        let tape = Tape::new();
        let output = {
            let vars = tape.inputs(point);
            f(&vars).id()
        };
        Ok(Self {
            tape,
            output,
            point: point.to_vec(),
        })
    }

    pub fn tape(&self) -> &Tape {
        &self.tape
    }

    pub fn output(&self) -> NodeId {
        self.output
    }

    /// Recorded value at the recording point.
    pub fn value(&self) -> f64 {
        self.tape.value(self.output).unwrap_or(f64::NAN)
    }

    pub fn forward_eval(&self, inputs: &[f64], seed: usize) -> Result<(f64, f64)> {
        forward_eval(&self.tape, self.output, inputs, seed)
    }

    /// Gradient at the recording point.
    pub fn reverse_gradient(&self) -> Result<Gradient> {
        reverse_gradient(&self.tape, self.output)
    }

    pub fn second_derivative(&self, inputs: &[f64], i: usize, j: usize) -> Result<f64> {
        second_derivative(&self.tape, self.output, inputs, i, j)
    }

    pub fn hessian_column(&self, inputs: &[f64], col: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        hessian_column(&self.tape, self.output, inputs, col)
    }

    /// Plain evaluation at new inputs.
    pub fn eval(&self, inputs: &[f64]) -> Result<f64> {
        Ok(self.tape.replay(inputs)?[self.output.0])
    }

    pub fn point(&self) -> &[f64] {
        &self.point
    }
}
