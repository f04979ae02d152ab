//! Hard enforcement of initial and boundary conditions.
//!
//! A network `Λ` is wrapped as
//!
//! ```text
//! U(x, t) = B(x) · T(t) · Λ(x, t) + IC(x),    B(x) = Π_k (x_k − lo_k)(hi_k − x_k)
//! ```
//!
//! so `U` matches the initial data at `t = 0` and vanishes on every spatial
//! face. With `T(t) = t²` the initial velocity is zero as well, which is what
//! second-order-in-time problems need. The wrapper only applies to zero
//! Dirichlet data whose initial condition vanishes on the boundary.

use ndarray::Array2;

use super::{BatchModel, Evaluator, Jet, JetSpec, NetworkParams, NetworkTensors};
use crate::autodiff::{BatchTape, Dual, Real};
use crate::error::{Error, Result};
use crate::pde::PdeProblem;

/// The time factor `T(t)` of the wrapper.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeFactor {
    /// `T = t`: fixes the initial value only.
    Linear,
    /// `T = t²`: fixes initial value and zero initial velocity.
    Quadratic,
}

impl TimeFactor {
    pub fn for_problem(problem: &PdeProblem) -> Self {
        if problem.kind.second_order_in_time() {
            TimeFactor::Quadratic
        } else {
            TimeFactor::Linear
        }
    }
}

/// A network with the initial and boundary conditions of a problem built in.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintWrapper {
    pub base: NetworkParams,
    pub problem: PdeProblem,
    pub time_factor: TimeFactor,
}

/// Wraps `base` for `problem`, picking the time factor from the equation order.
pub fn wrap_hard_constraints(
    base: NetworkParams,
    problem: &PdeProblem,
) -> Result<ConstraintWrapper> {
    ConstraintWrapper::new(base, problem)
}

impl ConstraintWrapper {
    pub fn new(base: NetworkParams, problem: &PdeProblem) -> Result<Self> {
        if !problem.homogeneous_boundary() {
            return Err(Error::UnsupportedConstraint(format!(
                "hard constraints need zero boundary values, {:?} has {:?}",
                problem.kind, problem.boundary_values
            )));
        }
        if base.input_dim() != problem.dim() {
            return Err(Error::Dimension {
                layer: 0,
                expected: problem.dim(),
                got: base.input_dim(),
            });
        }
        Ok(Self {
            base,
            problem: problem.clone(),
            time_factor: TimeFactor::for_problem(problem),
        })
    }

    /// `B(x) · T(t)`.
    fn factor<R: Real>(&self, p: &[R]) -> R {
        let ta = self.problem.time_axis();
        let mut g = match self.time_factor {
            TimeFactor::Linear => p[ta],
            TimeFactor::Quadratic => p[ta] * p[ta],
        };
        for (k, &(lo, hi)) in self.problem.domain.bounds[..ta].iter().enumerate() {
            g = g * (p[k] - lo) * (-p[k] + hi);
        }
        g
    }

    fn initial<R: Real>(&self, p: &[R]) -> R {
        self.problem.ic(&p[..self.problem.time_axis()])
    }

    /// Value, first and second derivative along input `d` of `f` at `p`.
    fn taylor(
        p: &[f64],
        d: usize,
        f: impl Fn(&[Dual<Dual<f64>>]) -> Dual<Dual<f64>>,
    ) -> (f64, f64, f64) {
        let q: Vec<Dual<Dual<f64>>> = p
            .iter()
            .enumerate()
            .map(|(k, &x)| {
                if k == d {
                    Dual::new(Dual::new(x, 1.0), Dual::new(1.0, 0.0))
                } else {
                    Dual::constant(Dual::constant(x))
                }
            })
            .collect();
        let v = f(&q);
        (v.primal.primal, v.primal.tangent, v.tangent.tangent)
    }
}

impl Evaluator for ConstraintWrapper {
    fn eval<R: Real>(&self, p: &[R]) -> R {
        let lambda = self
            .base
            .forward_real(p)
            .expect("input dimension checked at construction")[0];
        self.factor(p) * lambda + self.initial(p)
    }
}

impl BatchModel for ConstraintWrapper {
    fn network(&self) -> &NetworkParams {
        &self.base
    }

    fn jet(
        &self,
        tape: &mut BatchTape,
        tensors: &NetworkTensors,
        points: &Array2<f64>,
        spec: &JetSpec,
    ) -> Jet {
        let (rows, dim) = points.dim();
        let spec = JetSpec::new(&spec.first, &spec.second);
        let inner = self.base.jet(tape, tensors, points, &spec);

        let column = |f: &dyn Fn(&[f64]) -> f64| {
            Array2::from_shape_fn((rows, 1), |(r, _)| {
                f(points.row(r).as_slice().expect("standard layout"))
            })
        };
        let g = tape.leaf(column(&|p| self.factor(p)));
        let ic = tape.leaf(column(&|p| self.initial(p)));
        let gl = tape.mul(g, inner.value);
        let value = tape.add(gl, ic);

        let mut first = vec![None; dim];
        let mut second = vec![None; dim];
        for &d in &spec.first {
            let gj = column(&|p| Self::taylor(p, d, |q| self.factor(q)).1);
            let icj = column(&|p| Self::taylor(p, d, |q| self.initial(q)).1);
            let gd = tape.leaf(gj);
            let a = tape.mul(gd, inner.value);
            let b = tape.mul(g, inner.d1(d));
            let ab = tape.add(a, b);
            let icd = tape.leaf(icj);
            first[d] = Some(tape.add(ab, icd));

            if spec.second.contains(&d) {
                let gdd = tape.leaf(column(&|p| Self::taylor(p, d, |q| self.factor(q)).2));
                let icdd = tape.leaf(column(&|p| Self::taylor(p, d, |q| self.initial(q)).2));
                let t1 = tape.mul(gdd, inner.value);
                let t2 = tape.mul(gd, inner.d1(d));
                let t2 = tape.scale(t2, 2.0);
                let t3 = tape.mul(g, inner.d2(d));
                let s = tape.add(t1, t2);
                let s = tape.add(s, t3);
                second[d] = Some(tape.add(s, icdd));
            }
        }
        Jet {
            value,
            first,
            second,
        }
    }
}
