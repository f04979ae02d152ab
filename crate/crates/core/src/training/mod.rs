//! Physics-informed loss and the training loop.
//!
//! Two loss layouts are supported:
//!
//! * two-term: `(1−λ) · mean‖u − U‖² + λ · mean‖𝒩(U)‖²` over data points and
//!   collocation points;
//! * three-term: `mean(IC mismatch²) + mean(BC mismatch²) + mean(𝒩(U)²)`,
//!   each term with its own weight (1 by default). For equations of second
//!   order in time the IC term also penalizes the initial velocity.
//!
//! Every term is a mean of squares over its point set.

mod history;
mod train;

use ndarray::{Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{BatchTape, TensorId};
use crate::error::{Error, Result};
use crate::network::{
    BatchModel, ConstraintWrapper, Evaluator, Jet, JetSpec, NetworkParams, NetworkTensors,
};
use crate::pde::PdeProblem;
use crate::sampling::{GradientNorm, Strategy};

pub use history::{
    reference_grid, track_convergence, track_convergence_against, HistoryRecord, TrainingHistory,
};
pub use train::{
    error_report, evaluate_on_grid, gradient_norm_on_grid, train, train_model, NetworkSpec,
    OptimizerSpec, TrainConfig, Trained,
};

/// Rows per tape when evaluating the loss, bounding memory use.
const CHUNK: usize = 2048;

/// Layout of the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermMode {
    /// Data mismatch and physics residual balanced by λ.
    TwoTerm,
    /// Initial condition, boundary condition and physics residual.
    #[default]
    ThreeTerm,
}

/// What the loss contains and how many points each part uses.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSpec {
    pub term_mode: TermMode,
    /// Weight of the physics term in two-term mode, in [0, 1].
    pub lambda_weight: f64,
    /// Observations `(point, value)` for the two-term data part.
    pub data_points: Vec<(Vec<f64>, f64)>,
    /// Collocation points per batch.
    pub n_physics: usize,
    /// Initial-condition points (three-term mode).
    pub n_initial: usize,
    /// Boundary points (three-term mode).
    pub n_boundary: usize,
    /// Weights of the IC, BC and physics terms in three-term mode.
    pub term_weights: [f64; 3],
    pub strategy: Strategy,
}

impl LossSpec {
    /// Unit-weighted IC + BC + physics loss.
    pub fn three_term(n_initial: usize, n_boundary: usize, n_physics: usize) -> Self {
        Self {
            term_mode: TermMode::ThreeTerm,
            lambda_weight: 0.5,
            data_points: Vec::new(),
            n_physics,
            n_initial,
            n_boundary,
            term_weights: [1.0; 3],
            strategy: Strategy::Uniform,
        }
    }

    /// `(1−λ)` data term plus `λ` physics term.
    pub fn two_term(
        lambda_weight: f64,
        data_points: Vec<(Vec<f64>, f64)>,
        n_physics: usize,
    ) -> Result<Self> {
        let spec = Self {
            term_mode: TermMode::TwoTerm,
            lambda_weight,
            data_points,
            n_physics,
            n_initial: 0,
            n_boundary: 0,
            term_weights: [1.0; 3],
            strategy: Strategy::Uniform,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda_weight) {
            return Err(Error::Argument(format!(
                "lambda_weight = {} must lie in [0, 1]",
                self.lambda_weight
            )));
        }
        if self.n_physics == 0 {
            return Err(Error::Argument("the physics batch is empty".into()));
        }
        match self.term_mode {
            TermMode::TwoTerm => {
                if self.data_points.is_empty() && self.lambda_weight < 1.0 {
                    return Err(Error::Argument(
                        "two-term loss with λ < 1 needs data points".into(),
                    ));
                }
            }
            TermMode::ThreeTerm => {
                if self.n_initial == 0 || self.n_boundary == 0 {
                    return Err(Error::Argument(
                        "three-term loss needs initial and boundary points".into(),
                    ));
                }
                if self
                    .term_weights
                    .iter()
                    .any(|w| !(*w >= 0.0 && w.is_finite()))
                {
                    return Err(Error::Argument(format!(
                        "term weights {:?} must be finite and nonnegative",
                        self.term_weights
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Loss value and its parts.
///
/// `data` is the data mismatch (two-term) or IC + BC mismatch (three-term);
/// `physics` is the mean squared residual. `initial` and `boundary` are zero
/// in two-term mode.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub total: f64,
    pub data: f64,
    pub physics: f64,
    pub initial: f64,
    pub boundary: f64,
}

/// The point sets one loss evaluation uses.
#[derive(Debug, Clone, PartialEq)]
pub struct Collocation {
    /// Interior collocation points.
    pub physics: Array2<f64>,
    /// Points on `t = 0` (three-term) or data locations (two-term).
    pub anchors: Array2<f64>,
    /// Target values at `anchors`.
    pub anchor_values: Vec<f64>,
    /// Points on the spatial boundary.
    pub boundary: Array2<f64>,
    /// Dirichlet values at `boundary`.
    pub boundary_values: Vec<f64>,
}

/// `n` points on the spatial faces of `problem`, faces chosen in proportion
/// to their measure, with their Dirichlet values.
pub fn boundary_points(
    problem: &PdeProblem,
    n: usize,
    rng: &mut impl Rng,
) -> (Array2<f64>, Vec<f64>) {
    let b = &problem.domain.bounds;
    let d = problem.spatial_dim();
    // Face measure (without the common time extent).
    let measure: Vec<f64> = (0..2 * d)
        .map(|face| {
            (0..d)
                .filter(|&k| k != face / 2)
                .map(|k| b[k].1 - b[k].0)
                .product::<f64>()
        })
        .collect();
    let total: f64 = measure.iter().sum();
    let mut pts = Array2::zeros((n, d + 1));
    let mut vals = Vec::with_capacity(n);
    for mut row in pts.rows_mut() {
        let mut u = rng.random::<f64>() * total;
        let mut face = 2 * d - 1;
        for (f, m) in measure.iter().enumerate() {
            if u < *m {
                face = f;
                break;
            }
            u -= m;
        }
        problem
            .domain
            .draw(rng, row.as_slice_mut().expect("standard layout"));
        let axis = face / 2;
        row[axis] = if face.is_multiple_of(2) {
            b[axis].0
        } else {
            b[axis].1
        };
        vals.push(problem.boundary_value(face));
    }
    (pts, vals)
}

/// `n` uniform points on `t = 0` with the initial values.
pub fn initial_points(
    problem: &PdeProblem,
    n: usize,
    rng: &mut impl Rng,
) -> (Array2<f64>, Vec<f64>) {
    let d = problem.spatial_dim();
    let space = problem.spatial_domain();
    let mut pts = Array2::zeros((n, d + 1));
    let mut vals = Vec::with_capacity(n);
    for mut row in pts.rows_mut() {
        let x = row.as_slice_mut().expect("standard layout");
        space.draw(rng, &mut x[..d]);
        vals.push(problem.ic(&x[..d]));
    }
    (pts, vals)
}

/// The model being trained: a plain network or one wrapped with hard
/// constraints.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Plain(NetworkParams),
    Wrapped(ConstraintWrapper),
}

impl Model {
    pub fn params(&self) -> &NetworkParams {
        match self {
            Model::Plain(n) => n,
            Model::Wrapped(w) => &w.base,
        }
    }

    pub fn set_flat(&mut self, theta: &[f64]) -> Result<()> {
        match self {
            Model::Plain(n) => n.set_flat(theta),
            Model::Wrapped(w) => w.base.set_flat(theta),
        }
    }

    /// Values at each row of `points`.
    pub fn values(&self, points: &Array2<f64>) -> Vec<f64> {
        self.evaluate(points, &JetSpec::value_only()).value
    }
}

impl Evaluator for Model {
    fn eval<R: crate::autodiff::Real>(&self, p: &[R]) -> R {
        match self {
            Model::Plain(n) => n.eval(p),
            Model::Wrapped(w) => w.eval(p),
        }
    }
}

impl BatchModel for Model {
    fn network(&self) -> &NetworkParams {
        self.params()
    }

    fn jet(
        &self,
        tape: &mut BatchTape,
        tensors: &NetworkTensors,
        points: &Array2<f64>,
        spec: &JetSpec,
    ) -> Jet {
        match self {
            Model::Plain(n) => n.jet(tape, tensors, points, spec),
            Model::Wrapped(w) => w.jet(tape, tensors, points, spec),
        }
    }
}

impl GradientNorm for Model {
    fn gradient_norms(&self, points: &Array2<f64>) -> Vec<f64> {
        match self {
            Model::Plain(n) => n.gradient_norms(points),
            Model::Wrapped(w) => w.gradient_norms(points),
        }
    }
}

/// Accumulates `Σ_chunks scale · Σ_rows f(rows)²` and its parameter gradient.
struct Accumulator<'a, M: BatchModel> {
    model: &'a M,
    grad: Option<Vec<f64>>,
}

impl<M: BatchModel> Accumulator<'_, M> {
    /// Mean over all rows of the squared tensors produced by `build`, times
    /// `weight`. Returns the unweighted mean.
    fn mean_squares<F>(&mut self, points: &Array2<f64>, weight: f64, mut build: F) -> f64
    where
        F: FnMut(&mut BatchTape, &NetworkTensors, &Array2<f64>, usize) -> Vec<TensorId>,
    {
        let n = points.nrows();
        let mut sum = 0.0;
        for (c, chunk) in points.axis_chunks_iter(Axis(0), CHUNK).enumerate() {
            let mut tape = BatchTape::new();
            let tensors = self.model.network().register(&mut tape);
            let outs = build(&mut tape, &tensors, &chunk.to_owned(), c * CHUNK);
            for &o in &outs {
                sum += tape.value(o).iter().map(|v| v * v).sum::<f64>();
            }
            if let Some(g) = self.grad.as_mut() {
                if weight != 0.0 {
                    let scale = weight / n as f64;
                    let mut loss = tape.sum_squares(outs[0], scale);
                    for &o in &outs[1..] {
                        let extra = tape.sum_squares(o, scale);
                        loss = tape.add(loss, extra);
                    }
                    let grads = tape.backward(loss);
                    self.model.network().accumulate_grads(&tensors, &grads, g);
                }
            }
        }
        sum / n as f64
    }
}

fn target_column(values: &[f64], offset: usize, rows: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, 1), |(r, _)| values[offset + r])
}

/// Loss parts and, if `with_grad`, the gradient with respect to the flat
/// parameter vector of `model`.
pub fn loss_and_gradient<M: BatchModel>(
    model: &M,
    spec: &LossSpec,
    problem: &PdeProblem,
    batch: &Collocation,
    with_grad: bool,
) -> Result<(LossParts, Option<Vec<f64>>)> {
    spec.validate()?;
    if batch.physics.nrows() == 0 {
        return Err(Error::Argument("the physics batch is empty".into()));
    }
    let mut acc = Accumulator {
        model,
        grad: with_grad.then(|| vec![0.0; model.network().num_params()]),
    };
    let (w_data, w_bc, w_phys) = match spec.term_mode {
        TermMode::TwoTerm => (1.0 - spec.lambda_weight, 0.0, spec.lambda_weight),
        TermMode::ThreeTerm => (
            spec.term_weights[0],
            spec.term_weights[1],
            spec.term_weights[2],
        ),
    };

    let residual_spec = problem.residual_spec();
    let physics = acc.mean_squares(&batch.physics, w_phys, |tape, tensors, pts, _| {
        let jet = model.jet(tape, tensors, pts, &residual_spec);
        vec![problem.residual_batch(tape, &jet)]
    });

    let mut parts = LossParts {
        physics,
        ..LossParts::default()
    };
    let velocity = spec.term_mode == TermMode::ThreeTerm && problem.kind.second_order_in_time();
    let anchor_spec = if velocity {
        JetSpec::new(&[problem.time_axis()], &[])
    } else {
        JetSpec::value_only()
    };
    let anchor = if batch.anchors.nrows() == 0 {
        0.0
    } else {
        acc.mean_squares(&batch.anchors, w_data, |tape, tensors, pts, offset| {
            let jet = model.jet(tape, tensors, pts, &anchor_spec);
            let target = tape.leaf(target_column(&batch.anchor_values, offset, pts.nrows()));
            let mut outs = vec![tape.sub(jet.value, target)];
            if velocity {
                outs.push(jet.d1(problem.time_axis()));
            }
            outs
        })
    };
    match spec.term_mode {
        TermMode::TwoTerm => {
            parts.data = anchor;
            parts.total =
                (1.0 - spec.lambda_weight) * parts.data + spec.lambda_weight * parts.physics;
        }
        TermMode::ThreeTerm => {
            parts.initial = anchor;
            parts.boundary = if batch.boundary.nrows() == 0 {
                0.0
            } else {
                acc.mean_squares(&batch.boundary, w_bc, |tape, tensors, pts, offset| {
                    let jet = model.jet(tape, tensors, pts, &JetSpec::value_only());
                    let target =
                        tape.leaf(target_column(&batch.boundary_values, offset, pts.nrows()));
                    vec![tape.sub(jet.value, target)]
                })
            };
            parts.data = parts.initial + parts.boundary;
            let [wi, wb, wp] = spec.term_weights;
            parts.total = wi * parts.initial + wb * parts.boundary + wp * parts.physics;
        }
    }
    Ok((parts, acc.grad))
}

/// Loss parts of `model` on `batch`.
pub fn pinn_loss<M: BatchModel>(
    model: &M,
    spec: &LossSpec,
    problem: &PdeProblem,
    batch: &Collocation,
) -> Result<LossParts> {
    Ok(loss_and_gradient(model, spec, problem, batch, false)?.0)
}

/// Uniform collocation, initial and boundary points for `spec`, drawn from
/// `seed`. Two-term specs use the data points as anchors.
pub fn draw_collocation(problem: &PdeProblem, spec: &LossSpec, seed: u64) -> Result<Collocation> {
    spec.validate()?;
    let mut r = crate::sampling::rng(seed, 7);
    let physics = crate::sampling::uniform_sample(&problem.domain, spec.n_physics, seed)?.points;
    Ok(with_anchors(problem, spec, physics, &mut r))
}

pub(crate) fn with_anchors(
    problem: &PdeProblem,
    spec: &LossSpec,
    physics: Array2<f64>,
    r: &mut impl Rng,
) -> Collocation {
    let dim = problem.dim();
    match spec.term_mode {
        TermMode::TwoTerm => {
            let mut anchors = Array2::zeros((spec.data_points.len(), dim));
            for (mut row, (p, _)) in anchors.rows_mut().into_iter().zip(&spec.data_points) {
                row.assign(&ndarray::ArrayView1::from(&p[..]));
            }
            Collocation {
                physics,
                anchors,
                anchor_values: spec.data_points.iter().map(|(_, v)| *v).collect(),
                boundary: Array2::zeros((0, dim)),
                boundary_values: Vec::new(),
            }
        }
        TermMode::ThreeTerm => {
            let (anchors, anchor_values) = initial_points(problem, spec.n_initial, r);
            let (boundary, boundary_values) = boundary_points(problem, spec.n_boundary, r);
            Collocation {
                physics,
                anchors,
                anchor_values,
                boundary,
                boundary_values,
            }
        }
    }
}

/// Keeps the first `n` physics rows; used to thin large batches in tests.
#[cfg(test)]
fn truncate(c: &Collocation, n: usize) -> Collocation {
    Collocation {
        physics: c.physics.slice(ndarray::s![..n, ..]).to_owned(),
        ..c.clone()
    }
}
