use ndarray::Array2;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    loss_and_gradient, with_anchors, Collocation, HistoryRecord, LossParts, LossSpec, Model,
    TrainingHistory,
};
use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::metrics::{energy_error, ErrorReport};
use crate::network::{init_params, Activation, BatchModel, ConstraintWrapper, JetSpec};
use crate::optim::{
    adam_step, lbfgs_direction, line_search, AdamState, LbfgsState, LineSearch, LineSearchOutcome,
};
use crate::pde::PdeProblem;
use crate::sampling::{
    progressive_from, rng, uniform_from, weighted_from, GradientNorm, PartitionSchedule, Strategy,
};

/// Architecture of the network to train.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// Layer widths from input to output.
    pub layers: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    /// Wrap the network so initial and boundary conditions hold exactly.
    #[serde(default)]
    pub hard_constraints: bool,
}

/// Optimizer and its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerSpec {
    Lbfgs {
        m: usize,
        c1: f64,
        c2: f64,
    },
    Adam {
        alpha: f64,
        beta1: f64,
        beta2: f64,
    },
    Sgd {
        gamma: f64,
    },
    /// ADAM for `adam_iterations`, then L-BFGS for the rest of the budget.
    AdamLbfgs {
        adam_iterations: usize,
        alpha: f64,
        beta1: f64,
        beta2: f64,
        m: usize,
        c1: f64,
        c2: f64,
    },
}

impl OptimizerSpec {
    /// L-BFGS with 50 stored pairs, `c₁ = 1e-4`, `c₂ = 0.9`.
    pub fn lbfgs() -> Self {
        OptimizerSpec::Lbfgs {
            m: 50,
            c1: 1e-4,
            c2: 0.9,
        }
    }

    /// ADAM with `α = 1e-3`, `β₁ = 0.9`, `β₂ = 0.999`.
    pub fn adam() -> Self {
        OptimizerSpec::Adam {
            alpha: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
        }
    }

    fn lbfgs_parts(&self) -> Option<(usize, f64, f64)> {
        match *self {
            OptimizerSpec::Lbfgs { m, c1, c2 } | OptimizerSpec::AdamLbfgs { m, c1, c2, .. } => {
                Some((m, c1, c2))
            }
            _ => None,
        }
    }

    fn adam_parts(&self) -> Option<(f64, f64, f64)> {
        match *self {
            OptimizerSpec::Adam {
                alpha,
                beta1,
                beta2,
            }
            | OptimizerSpec::AdamLbfgs {
                alpha,
                beta1,
                beta2,
                ..
            } => Some((alpha, beta1, beta2)),
            _ => None,
        }
    }
}

/// Budget, sampling and bookkeeping settings of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Optimizer iterations.
    pub budget: usize,
    /// Iterations between snapshots; 0 disables them.
    pub snapshot_interval: usize,
    /// Nodes of the snapshot grid per axis.
    pub snapshot_shape: (usize, usize),
    /// Redraw the collocation points every this many iterations; 0 keeps
    /// one batch for the whole run (progressive stages still redraw).
    pub resample_every: usize,
    /// Stage layout for [`Strategy::Progressive`].
    pub schedule: Option<PartitionSchedule>,
    /// Pilot size for [`Strategy::GradientWeighted`].
    pub pilot: usize,
    /// Stop once the total loss falls below this value.
    pub loss_threshold: Option<f64>,
}

impl TrainConfig {
    pub fn new(budget: usize) -> Self {
        Self {
            budget,
            snapshot_interval: 50,
            snapshot_shape: (200, 400),
            resample_every: 0,
            schedule: None,
            pilot: 1000,
            loss_threshold: None,
        }
    }
}

/// Result of a successful run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trained {
    pub model: Model,
    pub history: TrainingHistory,
}

/// Maps grid coordinates to network inputs.
pub(crate) type GridToInput = Box<dyn Fn(f64, f64) -> Vec<f64>>;

/// Axis ranges of the snapshot grid of `problem` and the map from grid
/// coordinates to network inputs: `(x, t)` for one space dimension, the
/// `(x, y)` plane at the final time for two.
pub(crate) fn snapshot_layout(problem: &PdeProblem) -> ([(f64, f64); 2], GridToInput) {
    let b = &problem.domain.bounds;
    if problem.spatial_dim() == 1 {
        ([b[0], b[1]], Box::new(|x, t| vec![x, t]))
    } else {
        let t = problem.horizon();
        ([b[0], b[1]], Box::new(move |x, y| vec![x, y, t]))
    }
}

/// Network inputs at the nodes of the snapshot grid, row-major, with an
/// empty field on that grid.
fn grid_points(problem: &PdeProblem, shape: (usize, usize)) -> (Array2<f64>, GridField) {
    let (ranges, point) = snapshot_layout(problem);
    let skeleton = GridField::from_fn(shape, ranges, |_, _| 0.0);
    let (a, b) = (skeleton.coords(0), skeleton.coords(1));
    let mut pts = Array2::zeros((a.len() * b.len(), problem.dim()));
    for (k, mut row) in pts.rows_mut().into_iter().enumerate() {
        let p = point(a[k / b.len()], b[k % b.len()]);
        row.assign(&ndarray::ArrayView1::from(&p[..]));
    }
    (pts, skeleton)
}

/// Values of `model` on the snapshot grid of `problem`.
pub fn evaluate_on_grid<M: BatchModel>(
    model: &M,
    problem: &PdeProblem,
    shape: (usize, usize),
) -> GridField {
    let (pts, skeleton) = grid_points(problem, shape);
    let values = model.evaluate(&pts, &JetSpec::value_only()).value;
    GridField { values, ..skeleton }
}

/// Euclidean norm of the input gradient of `model` (all coordinates, time
/// included) on the snapshot grid of `problem`.
pub fn gradient_norm_on_grid<G: GradientNorm>(
    model: &G,
    problem: &PdeProblem,
    shape: (usize, usize),
) -> GridField {
    let (pts, skeleton) = grid_points(problem, shape);
    let values = model.gradient_norms(&pts);
    GridField { values, ..skeleton }
}

/// Error report of `model` against `reference` on the snapshot grid. The
/// energy norm is computed when `problem` has an analytical solution and is
/// NaN otherwise.
pub fn error_report(
    model: &Model,
    problem: &PdeProblem,
    reference: &GridField,
) -> Result<ErrorReport> {
    let approx = evaluate_on_grid(model, problem, reference.shape);
    let (ranges, _) = snapshot_layout(problem);
    if ranges != reference.ranges {
        return Err(Error::Argument(format!(
            "reference covers {:?}, the snapshot grid covers {ranges:?}",
            reference.ranges
        )));
    }
    let grad = gradient_norm_on_grid(model, problem, reference.shape);
    let energy = match problem.analytical() {
        Some(exact) => {
            let nodes = if problem.spatial_dim() == 1 {
                vec![101, 201]
            } else {
                vec![11, 11, 11]
            };
            energy_error(&exact, model, &problem.domain, &nodes)?
        }
        None => f64::NAN,
    };
    ErrorReport::new(reference, &approx, grad, energy)
}

struct Sampler<'a> {
    problem: &'a PdeProblem,
    loss: &'a LossSpec,
    config: &'a TrainConfig,
    seed: u64,
    rng: ChaCha8Rng,
    draws: u64,
}

impl Sampler<'_> {
    fn stage(&self, iter: usize) -> usize {
        match (&self.config.schedule, self.loss.strategy) {
            (Some(s), Strategy::Progressive) => s.stage_at(iter.saturating_sub(1)),
            _ => 0,
        }
    }

    /// Whether iteration `iter` (1-based) starts on a fresh batch.
    fn redraw(&self, iter: usize) -> bool {
        let every = self.config.resample_every;
        iter > 1
            && ((every > 0 && (iter - 1).is_multiple_of(every))
                || self.stage(iter) != self.stage(iter - 1))
    }

    fn draw(&mut self, model: &Model, iter: usize) -> Result<Collocation> {
        let n = self.loss.n_physics;
        let domain = &self.problem.domain;
        let physics = match self.loss.strategy {
            Strategy::Uniform => uniform_from(domain, n, &mut self.rng)?.points,
            Strategy::Progressive => {
                let schedule = self.config.schedule.as_ref().ok_or_else(|| {
                    Error::Argument("progressive sampling needs a schedule".into())
                })?;
                progressive_from(schedule, self.stage(iter), n, &mut self.rng)?.points
            }
            Strategy::GradientWeighted => {
                weighted_from(model, domain, n, self.config.pilot, self.seed, self.draws)?
                    .batch
                    .points
            }
        };
        self.draws += 1;
        Ok(with_anchors(
            self.problem,
            self.loss,
            physics,
            &mut self.rng,
        ))
    }
}

/// Builds a network from `network` (initialized from `seed`) and trains it.
pub fn train(
    problem: &PdeProblem,
    network: &NetworkSpec,
    optimizer: &OptimizerSpec,
    loss: &LossSpec,
    config: &TrainConfig,
    seed: u64,
) -> Result<Trained> {
    if network.layers.first() != Some(&problem.dim()) || network.layers.last() != Some(&1) {
        return Err(Error::Structural(format!(
            "layers {:?} must start at the input dimension {} and end at 1",
            network.layers,
            problem.dim()
        )));
    }
    let base = init_params(&network.layers, network.activation, seed)?;
    let model = if network.hard_constraints {
        Model::Wrapped(ConstraintWrapper::new(base, problem)?)
    } else {
        Model::Plain(base)
    };
    train_model(model, problem, optimizer, loss, config, seed)
}

/// Trains an existing model. Deterministic in all inputs.
pub fn train_model(
    model: Model,
    problem: &PdeProblem,
    optimizer: &OptimizerSpec,
    loss: &LossSpec,
    config: &TrainConfig,
    seed: u64,
) -> Result<Trained> {
    if config.budget == 0 {
        return Err(Error::Argument("training budget must be positive".into()));
    }
    loss.validate()?;
    if model.params().input_dim() != problem.dim() {
        return Err(Error::Dimension {
            layer: 0,
            expected: problem.dim(),
            got: model.params().input_dim(),
        });
    }
    let search = match optimizer.lbfgs_parts() {
        Some((_, c1, c2)) => LineSearch::new(c1, c2)?,
        None => LineSearch::default(),
    };
    let mut lbfgs = match optimizer.lbfgs_parts() {
        Some((m, c1, c2)) => Some(LbfgsState::new(m, c1, c2)?),
        None => None,
    };
    let n = model.params().num_params();
    let mut adam = match optimizer.adam_parts() {
        Some((alpha, b1, b2)) => Some(AdamState::new(n, alpha, b1, b2)?),
        None => None,
    };
    let adam_iterations = match *optimizer {
        OptimizerSpec::Adam { .. } | OptimizerSpec::Sgd { .. } => config.budget,
        OptimizerSpec::AdamLbfgs {
            adam_iterations, ..
        } => adam_iterations,
        OptimizerSpec::Lbfgs { .. } => 0,
    };

    let mut sampler = Sampler {
        problem,
        loss,
        config,
        seed,
        rng: rng(seed, 1),
        draws: 0,
    };
    let mut work = model;
    let mut theta = work.params().flat();
    let mut history = TrainingHistory::new(config.snapshot_interval);
    let mut batch = sampler.draw(&work, 1)?;

    let evaluate = |work: &mut Model, theta: &[f64], batch: &Collocation, evals: &mut usize| {
        work.set_flat(theta)?;
        *evals += 1;
        let (parts, grad) = loss_and_gradient(&*work, loss, problem, batch, true)?;
        Ok::<_, Error>((parts, grad.expect("gradient requested")))
    };
    let finite = |parts: &LossParts, grad: &[f64]| {
        parts.total.is_finite() && grad.iter().all(|g| g.is_finite())
    };

    let mut evals = 0;
    // Loss and gradient at `theta` on `batch`, when known.
    let mut current: Option<(LossParts, Vec<f64>)> = None;
    for iter in 1..=config.budget {
        if sampler.redraw(iter) {
            batch = sampler.draw(&work, iter)?;
            current = None;
        }
        let (parts, grad) = match current.take() {
            Some(c) => c,
            None => evaluate(&mut work, &theta, &batch, &mut evals)?,
        };
        if !finite(&parts, &grad) {
            history.evaluations = evals;
            return Err(Error::Diverged {
                iteration: iter,
                history: Box::new(history),
            });
        }

        let recorded = if iter <= adam_iterations {
            match (optimizer, adam.as_mut()) {
                (OptimizerSpec::Sgd { gamma }, _) => theta
                    .iter_mut()
                    .zip(&grad)
                    .for_each(|(t, g)| *t -= gamma * g),
                (_, Some(state)) => adam_step(state, &mut theta, &grad)?,
                _ => unreachable!("first-order phase without a first-order optimizer"),
            }
            parts
        } else {
            let state = lbfgs.as_mut().expect("L-BFGS phase");
            let mut p = lbfgs_direction(state, &grad);
            let slope: f64 = p.iter().zip(&grad).map(|(a, b)| a * b).sum();
            if !(slope < 0.0) {
                state.clear();
                p = grad.iter().map(|g| -g).collect();
            }
            if grad.iter().all(|&g| g == 0.0) {
                current = Some((parts, grad));
                parts
            } else {
                let mut trials: Vec<LossParts> = Vec::new();
                let step = line_search(
                    |x| {
                        let (pt, g) = evaluate(&mut work, x, &batch, &mut evals)?;
                        trials.push(pt);
                        Ok((pt.total, g))
                    },
                    &theta,
                    &p,
                    parts.total,
                    &grad,
                    &search,
                )?;
                let accepted = *trials
                    .iter()
                    .rev()
                    .find(|t| t.total.to_bits() == step.loss.to_bits())
                    .expect("accepted step was evaluated");
                if !finite(&accepted, &step.grad) {
                    history.evaluations = evals;
                    return Err(Error::Diverged {
                        iteration: iter,
                        history: Box::new(history),
                    });
                }
                let s: Vec<f64> = p.iter().map(|d| step.alpha * d).collect();
                let y: Vec<f64> = step.grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
                if step.outcome == LineSearchOutcome::Exhausted {
                    state.clear();
                } else {
                    state.push(s.clone(), y);
                }
                theta.iter_mut().zip(&s).for_each(|(t, d)| *t += d);
                current = Some((accepted, step.grad));
                accepted
            }
        };

        history.records.push(HistoryRecord {
            iter,
            data_loss: recorded.data,
            physics_loss: recorded.physics,
            total_loss: recorded.total,
        });
        if config.snapshot_interval > 0 && iter % config.snapshot_interval == 0 {
            work.set_flat(&theta)?;
            history.snapshots.push((
                iter,
                evaluate_on_grid(&work, problem, config.snapshot_shape),
            ));
        }
        if config
            .loss_threshold
            .is_some_and(|eps| recorded.total < eps)
        {
            break;
        }
    }
    work.set_flat(&theta)?;
    history.evaluations = evals;
    Ok(Trained {
        model: work,
        history,
    })
}
