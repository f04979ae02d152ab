//! Experiment configuration files.
//!
//! A run is a TOML document with the sections `[problem]`, `[network]`,
//! `[optimizer]`, `[loss]`, `[sampling]`, `[training]`, `[fd]` and
//! `[output]`. Only `problem.kind` and `network.layers` are required;
//! everything else falls back to the defaults below. Errors name the offending key path, e.g.
//! `loss.lambda_weight`.
//!
//! ```
//! use pinn::config::RunConfig;
//!
//! let cfg = RunConfig::parse(
//!     r#"
//!     [problem]
//!     kind = "wave1d"
//!
//!     [network]
//!     layers = [2, 8, 4, 2, 1]
//!     "#,
//! )
//! .unwrap();
//! let run = cfg.run().unwrap();
//! assert_eq!(run.loss.n_physics, 10000);
//!
//! let bad = RunConfig::parse(
//!     "[problem]\nkind = \"wave1d\"\n[network]\nlayers = [2, 1]\n[loss]\nlambda_weight = 1.5\n",
//! )
//! .and_then(|c| c.run());
//! assert!(bad.unwrap_err().to_string().contains("lambda_weight"));
//! ```

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::network::{init_params, Activation, ConstraintWrapper, Evaluator};
use crate::pde::{
    burgers_fd_solve, BurgersFdConfig, ConvectionScheme, HeatFdConfig, HeatSolver, PdeKind,
    PdeProblem,
};
use crate::sampling::{rng, AxisBox, Domain, PartitionSchedule, Strategy};
use crate::training::{
    reference_grid, LossSpec, NetworkSpec, OptimizerSpec, TermMode, TrainConfig,
};

/// Shipped presets by name.
pub const PRESETS: &[(&str, &str)] = &[
    ("wave1d_128", include_str!("../presets/wave1d_128.toml")),
    ("wave1d_64_64", include_str!("../presets/wave1d_64_64.toml")),
    ("wave1d_20x4", include_str!("../presets/wave1d_20x4.toml")),
    (
        "wave1d_32_16_16_32",
        include_str!("../presets/wave1d_32_16_16_32.toml"),
    ),
    (
        "wave1d_64_32_16_8",
        include_str!("../presets/wave1d_64_32_16_8.toml"),
    ),
    ("wave1d_842", include_str!("../presets/wave1d_842.toml")),
    (
        "wave1d_16_8_4_2",
        include_str!("../presets/wave1d_16_8_4_2.toml"),
    ),
    ("burgers", include_str!("../presets/burgers.toml")),
    ("heat2d_fd", include_str!("../presets/heat2d_fd.toml")),
    (
        "membrane_hard",
        include_str!("../presets/membrane_hard.toml"),
    ),
];

/// Text of the preset called `name`.
pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}

/// A parsed configuration file. Optional problem fields default to the
/// preset problem of the chosen kind; [`resolved`](Self::resolved) fills them
/// in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub loss: LossConfig,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub fd: FdConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: PdeKind,
    /// `c`, `ν` or `α` depending on the kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient: Option<f64>,
    /// `[lo, hi]` per axis, space first and time last.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    /// Layer widths from input to output; empty for FD-only configurations.
    #[serde(default)]
    pub layers: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub hard_constraints: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Lbfgs,
    Adam,
    Sgd,
    AdamLbfgs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub gamma: f64,
    pub m: usize,
    pub c1: f64,
    pub c2: f64,
    /// ADAM iterations before switching to L-BFGS (`adam_lbfgs` only).
    pub adam_iterations: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Lbfgs,
            alpha: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            gamma: 1e-3,
            m: 50,
            c1: 1e-4,
            c2: 0.9,
            adam_iterations: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    pub mode: TermMode,
    pub lambda_weight: f64,
    pub n_initial: usize,
    pub n_boundary: usize,
    pub n_physics: usize,
    /// Observations drawn from the analytical solution (two-term mode).
    pub n_data: usize,
    /// IC, BC and physics weights (three-term mode).
    pub term_weights: [f64; 3],
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            mode: TermMode::ThreeTerm,
            lambda_weight: 0.5,
            n_initial: 1000,
            n_boundary: 1000,
            n_physics: 10000,
            n_data: 0,
            term_weights: [1.0; 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    pub strategy: Strategy,
    /// Redraw every this many iterations; 0 keeps one batch.
    pub resample_every: usize,
    /// Pilot size of gradient-weighted sampling.
    pub pilot: usize,
    pub growth: f64,
    pub stages: usize,
    pub iterations_per_stage: usize,
    /// Seed regions of progressive sampling; empty means the strip
    /// `t ∈ [0, T/10]` over the whole spatial domain.
    pub seed_boxes: Vec<BoxConfig>,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Uniform,
            resample_every: 0,
            pilot: 1000,
            growth: 0.5,
            stages: 4,
            iterations_per_stage: 250,
            seed_boxes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub budget: usize,
    pub snapshot_interval: usize,
    pub snapshot_shape: [usize; 2],
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_threshold: Option<f64>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            budget: 1000,
            snapshot_interval: 50,
            snapshot_shape: [200, 400],
            seed: 0,
            loss_threshold: None,
        }
    }
}

/// Finite-difference settings. Heat uses `h`, `dt`, `steps` and
/// `record_every`; Burgers uses `nx`, `n_times`, `scheme` and an optional
/// `dt` (90% of the stability limit when absent).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FdConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_every: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_times: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<ConvectionScheme>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("runs"),
        }
    }
}

/// A fully validated training run.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub problem: PdeProblem,
    pub network: NetworkSpec,
    pub optimizer: OptimizerSpec,
    pub loss: LossSpec,
    pub train: TrainConfig,
    pub seed: u64,
}

fn config_err(key: &str, message: impl std::fmt::Display) -> Error {
    Error::Config {
        key: key.into(),
        message: message.to_string(),
    }
}

/// Wraps any error from validating the value at `key`.
fn at<T>(key: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config { .. } => e,
        other => config_err(key, other),
    })
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let key = e
                .span()
                .map(|s| key_path_at(text, s.start))
                .unwrap_or_else(|| "<document>".into());
            config_err(&key, e.message().trim())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err("<document>", e))
    }

    pub fn problem(&self) -> Result<PdeProblem> {
        let p = &self.problem;
        let preset = match p.kind {
            PdeKind::Wave1d => PdeProblem::wave1d(),
            PdeKind::Burgers => PdeProblem::burgers(),
            PdeKind::Heat2d => PdeProblem::heat2d(),
            PdeKind::Membrane2d => PdeProblem::membrane(),
        };
        let domain = match &p.domain {
            Some(b) => at(
                "problem.domain",
                Domain::new(b.iter().map(|&[lo, hi]| (lo, hi)).collect()),
            )?,
            None => preset.domain.clone(),
        };
        at(
            "problem",
            PdeProblem::new(
                p.kind,
                p.coefficient.unwrap_or(preset.coefficient),
                domain,
                p.boundary_values
                    .clone()
                    .unwrap_or(preset.boundary_values.clone()),
                p.initial_value.unwrap_or(preset.initial_value),
            ),
        )
    }

    /// The same configuration with every problem and FD default written
    /// out, as echoed next to run outputs.
    pub fn resolved(&self) -> Result<Self> {
        let problem = self.problem()?;
        let mut out = self.clone();
        out.problem = ProblemConfig {
            kind: problem.kind,
            coefficient: Some(problem.coefficient),
            domain: Some(
                problem
                    .domain
                    .bounds
                    .iter()
                    .map(|&(lo, hi)| [lo, hi])
                    .collect(),
            ),
            boundary_values: Some(problem.boundary_values.clone()),
            initial_value: Some(problem.initial_value),
        };
        match problem.kind {
            PdeKind::Heat2d => {
                let c = self.heat_fd()?;
                out.fd = FdConfig {
                    h: Some(c.h),
                    dt: Some(c.dt),
                    steps: Some(c.steps),
                    record_every: Some(c.record_every),
                    ..FdConfig::default()
                };
            }
            PdeKind::Burgers => {
                let c = self.burgers_fd()?;
                out.fd = FdConfig {
                    dt: Some(c.dt),
                    nx: Some(c.nx),
                    n_times: Some(c.n_times),
                    scheme: Some(c.scheme),
                    ..FdConfig::default()
                };
            }
            _ => {}
        }
        Ok(out)
    }

    /// Explicit heat solver settings; by default `h = 0.02`, `dt = 0.1`,
    /// run to the final time with three recorded fields.
    pub fn heat_fd(&self) -> Result<HeatFdConfig> {
        let problem = self.problem()?;
        if problem.kind != PdeKind::Heat2d {
            return Err(config_err(
                "problem.kind",
                "finite differences for heat need kind = \"heat2d\"",
            ));
        }
        let dt = self.fd.dt.unwrap_or(0.1);
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(config_err(
                "fd.dt",
                format!("time step {dt} must be positive"),
            ));
        }
        let steps = self
            .fd
            .steps
            .unwrap_or((problem.horizon() / dt).round() as usize);
        let record_every = self.fd.record_every.unwrap_or((steps / 2).max(1));
        if record_every == 0 {
            return Err(config_err("fd.record_every", "must be positive"));
        }
        Ok(HeatFdConfig {
            h: self.fd.h.unwrap_or(0.02),
            dt,
            steps,
            record_every,
        })
    }

    /// Burgers reference solver settings; by default 4096 cells, central
    /// convection and output times matching the snapshot grid.
    pub fn burgers_fd(&self) -> Result<BurgersFdConfig> {
        let problem = self.problem()?;
        if problem.kind != PdeKind::Burgers {
            return Err(config_err(
                "problem.kind",
                "the Burgers reference needs kind = \"burgers\"",
            ));
        }
        let nx = self.fd.nx.unwrap_or(4096);
        let n_times = self.fd.n_times.unwrap_or(self.training.snapshot_shape[1]);
        if nx < 2 || n_times < 2 {
            return Err(config_err("fd.nx", "need nx ≥ 2 and n_times ≥ 2"));
        }
        let mut c = BurgersFdConfig::stable(
            problem.coefficient,
            nx,
            problem.horizon(),
            n_times,
            self.fd.scheme.unwrap_or_default(),
        );
        if let Some(dt) = self.fd.dt {
            c.dt = dt;
        }
        Ok(c)
    }

    /// The reference solution on a snapshot grid of `shape`: the analytical
    /// solution when one exists, otherwise the finite-difference solution
    /// interpolated onto the grid (Burgers over `(x, t)`, heat at the final
    /// time).
    pub fn reference(&self, shape: (usize, usize)) -> Result<GridField> {
        let problem = self.problem()?;
        if let Some(exact) = problem.analytical() {
            return Ok(reference_grid(&exact, &problem, shape));
        }
        let fd = match problem.kind {
            PdeKind::Burgers => burgers_fd_solve(&self.burgers_fd()?)?,
            PdeKind::Heat2d => {
                let c = self.heat_fd()?;
                if (c.steps as f64 * c.dt - problem.horizon()).abs() > 1e-9 * problem.horizon() {
                    return Err(config_err(
                        "fd.steps",
                        format!("steps · dt must reach the final time {}", problem.horizon()),
                    ));
                }
                let mut solver = HeatSolver::new(&problem, c.h, c.dt)?;
                for _ in 0..c.steps {
                    solver.step();
                }
                solver.field()
            }
            kind => {
                return Err(Error::NoReference(format!(
                    "{kind:?} with these settings has neither an analytical nor a finite-difference solution"
                )))
            }
        };
        Ok(fd.resample(shape, fd.ranges))
    }

    /// Validates the training part of the configuration.
    pub fn run(&self) -> Result<Run> {
        let problem = self.problem()?;
        let net = &self.network;
        if net.layers.is_empty() {
            return Err(config_err("network.layers", "training needs layer widths"));
        }
        if net.layers.first() != Some(&problem.dim()) || net.layers.last() != Some(&1) {
            return Err(config_err(
                "network.layers",
                format!(
                    "{:?} must start at the input dimension {} and end at 1",
                    net.layers,
                    problem.dim()
                ),
            ));
        }
        if net.layers.contains(&0) {
            return Err(config_err(
                "network.layers",
                "layer widths must be positive",
            ));
        }
        if net.hard_constraints {
            let base = at(
                "network.layers",
                init_params(&net.layers, net.activation, 0),
            )?;
            at(
                "network.hard_constraints",
                ConstraintWrapper::new(base, &problem),
            )?;
        }
        let network = NetworkSpec {
            layers: net.layers.clone(),
            activation: net.activation,
            hard_constraints: net.hard_constraints,
        };
        let optimizer = self.optimizer_spec()?;
        let loss = self.loss_spec(&problem)?;
        let train = self.train_config(&problem)?;
        Ok(Run {
            problem,
            network,
            optimizer,
            loss,
            train,
            seed: self.training.seed,
        })
    }

    fn optimizer_spec(&self) -> Result<OptimizerSpec> {
        let o = &self.optimizer;
        let unit = |key: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(config_err(key, format!("{v} must lie in (0, 1)")))
            }
        };
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(config_err(key, format!("{v} must be positive")))
            }
        };
        let uses_adam = matches!(o.kind, OptimizerKind::Adam | OptimizerKind::AdamLbfgs);
        let uses_lbfgs = matches!(o.kind, OptimizerKind::Lbfgs | OptimizerKind::AdamLbfgs);
        if uses_adam {
            positive("optimizer.alpha", o.alpha)?;
            unit("optimizer.beta1", o.beta1)?;
            unit("optimizer.beta2", o.beta2)?;
        }
        if uses_lbfgs {
            if o.m == 0 {
                return Err(config_err("optimizer.m", "history length must be positive"));
            }
            unit("optimizer.c1", o.c1)?;
            unit("optimizer.c2", o.c2)?;
            if o.c1 >= o.c2 {
                return Err(config_err(
                    "optimizer.c2",
                    format!("need c1 < c2, got {} ≥ {}", o.c1, o.c2),
                ));
            }
        }
        Ok(match o.kind {
            OptimizerKind::Lbfgs => OptimizerSpec::Lbfgs {
                m: o.m,
                c1: o.c1,
                c2: o.c2,
            },
            OptimizerKind::Adam => OptimizerSpec::Adam {
                alpha: o.alpha,
                beta1: o.beta1,
                beta2: o.beta2,
            },
            OptimizerKind::Sgd => {
                positive("optimizer.gamma", o.gamma)?;
                OptimizerSpec::Sgd { gamma: o.gamma }
            }
            OptimizerKind::AdamLbfgs => OptimizerSpec::AdamLbfgs {
                adam_iterations: o.adam_iterations,
                alpha: o.alpha,
                beta1: o.beta1,
                beta2: o.beta2,
                m: o.m,
                c1: o.c1,
                c2: o.c2,
            },
        })
    }

    fn loss_spec(&self, problem: &PdeProblem) -> Result<LossSpec> {
        let l = &self.loss;
        if !(0.0..=1.0).contains(&l.lambda_weight) {
            return Err(config_err(
                "loss.lambda_weight",
                format!("{} must lie in [0, 1]", l.lambda_weight),
            ));
        }
        if l.n_physics == 0 {
            return Err(config_err("loss.n_physics", "the physics batch is empty"));
        }
        let mut spec = match l.mode {
            TermMode::ThreeTerm => {
                if l.n_initial == 0 {
                    return Err(config_err("loss.n_initial", "must be positive"));
                }
                if l.n_boundary == 0 {
                    return Err(config_err("loss.n_boundary", "must be positive"));
                }
                if l.term_weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
                    return Err(config_err(
                        "loss.term_weights",
                        "weights must be finite and nonnegative",
                    ));
                }
                let mut s = LossSpec::three_term(l.n_initial, l.n_boundary, l.n_physics);
                s.term_weights = l.term_weights;
                s
            }
            TermMode::TwoTerm => {
                let data = if l.n_data == 0 {
                    Vec::new()
                } else {
                    let exact = problem.analytical().ok_or_else(|| {
                        config_err(
                            "loss.n_data",
                            "no reference available to draw observations from",
                        )
                    })?;
                    let mut r = rng(self.training.seed, 11);
                    (0..l.n_data)
                        .map(|_| {
                            let p: Vec<f64> = problem
                                .domain
                                .bounds
                                .iter()
                                .map(|&(lo, hi)| r.random_range(lo..=hi))
                                .collect();
                            let v = exact.eval(&p);
                            (p, v)
                        })
                        .collect()
                };
                if data.is_empty() && l.lambda_weight < 1.0 {
                    return Err(config_err(
                        "loss.n_data",
                        "two-term loss with lambda_weight < 1 needs data",
                    ));
                }
                at(
                    "loss",
                    LossSpec::two_term(l.lambda_weight, data, l.n_physics),
                )?
            }
        };
        spec.lambda_weight = l.lambda_weight;
        spec.strategy = self.sampling.strategy;
        at("loss", spec.validate())?;
        Ok(spec)
    }

    fn train_config(&self, problem: &PdeProblem) -> Result<TrainConfig> {
        let t = &self.training;
        if t.budget == 0 {
            return Err(config_err("training.budget", "must be positive"));
        }
        if t.snapshot_shape.contains(&0) {
            return Err(config_err(
                "training.snapshot_shape",
                "both axes need at least one point",
            ));
        }
        let s = &self.sampling;
        if s.strategy == Strategy::GradientWeighted && s.pilot == 0 {
            return Err(config_err("sampling.pilot", "must be positive"));
        }
        let schedule = if s.strategy == Strategy::Progressive {
            let seeds = if s.seed_boxes.is_empty() {
                let mut lo: Vec<f64> = problem.domain.bounds.iter().map(|b| b.0).collect();
                let mut hi: Vec<f64> = problem.domain.bounds.iter().map(|b| b.1).collect();
                let ta = problem.time_axis();
                lo[ta] = 0.0;
                hi[ta] = 0.1 * problem.horizon();
                vec![at("sampling.seed_boxes", AxisBox::new(lo, hi))?]
            } else {
                s.seed_boxes
                    .iter()
                    .map(|b| {
                        at(
                            "sampling.seed_boxes",
                            AxisBox::new(b.lo.clone(), b.hi.clone()),
                        )
                    })
                    .collect::<Result<_>>()?
            };
            Some(at(
                "sampling",
                PartitionSchedule::new(
                    problem.domain.clone(),
                    seeds,
                    s.growth,
                    s.stages,
                    s.iterations_per_stage,
                ),
            )?)
        } else {
            None
        };
        if let Some(th) = t.loss_threshold {
            if !(th > 0.0) {
                return Err(config_err("training.loss_threshold", "must be positive"));
            }
        }
        Ok(TrainConfig {
            budget: t.budget,
            snapshot_interval: t.snapshot_interval,
            snapshot_shape: (t.snapshot_shape[0], t.snapshot_shape[1]),
            resample_every: s.resample_every,
            schedule,
            pilot: s.pilot,
            loss_threshold: t.loss_threshold,
        })
    }
}

/// Dotted key path of the entry covering byte `offset` of a TOML document.
fn key_path_at(text: &str, offset: usize) -> String {
    let offset = offset.min(text.len());
    let mut section = String::new();
    let mut key = None;
    let mut pos = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if trimmed.starts_with('[') {
            section = trimmed
                .trim_matches(|c| c == '[' || c == ']')
                .trim()
                .to_string();
            key = None;
        } else if let Some((k, _)) = trimmed.split_once('=') {
            key = Some(k.trim().to_string());
        }
        if pos + line.len() > offset {
            break;
        }
        pos += line.len();
    }
    let line = &text[pos..];
    let here = line.lines().next().unwrap_or("").trim();
    if here.starts_with('[') {
        return section;
    }
    // An unknown key is reported at its own span.
    let ident: String = text[offset..]
        .chars()
        .take_while(|c| c.is_alphanumeric() || *c == '_')
        .collect();
    let key = match here.split_once('=') {
        Some((k, _)) => k.trim().to_string(),
        None if !ident.is_empty() => ident,
        None => key.unwrap_or_default(),
    };
    match (section.is_empty(), key.is_empty()) {
        (true, _) => key,
        (false, true) => section,
        (false, false) => format!("{section}.{key}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_of(text: &str) -> String {
        match RunConfig::parse(text).and_then(|c| c.run()) {
            Err(Error::Config { key, .. }) => key,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    const BASE: &str = "[problem]\nkind = \"wave1d\"\n[network]\nlayers = [2, 8, 4, 2, 1]\n";

    #[test]
    fn every_preset_parses_and_round_trips() {
        for (name, text) in PRESETS {
            let cfg = RunConfig::parse(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            let resolved = cfg.resolved().unwrap();
            let again = RunConfig::parse(&resolved.to_toml().unwrap()).unwrap();
            assert_eq!(again, resolved, "{name}");
            assert_eq!(again.problem().unwrap(), cfg.problem().unwrap(), "{name}");
            if !cfg.network.layers.is_empty() {
                assert_eq!(again.run().unwrap(), cfg.run().unwrap(), "{name}");
            }
        }
        assert!(preset("wave1d_842").is_some());
        assert!(preset("nope").is_none());
    }

    #[test]
    fn defaults_match_the_experiments() {
        let run = RunConfig::parse(BASE).unwrap().run().unwrap();
        assert_eq!(
            (run.loss.n_initial, run.loss.n_boundary, run.loss.n_physics),
            (1000, 1000, 10000)
        );
        assert_eq!(run.optimizer, OptimizerSpec::lbfgs());
        assert_eq!(run.train.snapshot_shape, (200, 400));
        assert_eq!(run.problem, PdeProblem::wave1d());
    }

    #[test]
    fn errors_name_the_key_path() {
        assert_eq!(
            key_of(&format!("{BASE}[loss]\nlambda_weight = 1.5\n")),
            "loss.lambda_weight"
        );
        assert_eq!(
            key_of(&format!("{BASE}[loss]\nn_physics = \"many\"\n")),
            "loss.n_physics"
        );
        assert_eq!(
            key_of(&format!("{BASE}[optimizer]\nkind = \"lbfgs\"\nc1 = 0.95\n")),
            "optimizer.c2"
        );
        assert_eq!(
            key_of(&format!("{BASE}[training]\nbudgett = 3\n")),
            "training.budgett"
        );
        assert_eq!(
            key_of("[problem]\nkind = \"wave1d\"\n[network]\nlayers = [3, 1]\n"),
            "network.layers"
        );
        assert_eq!(
            key_of("[problem]\nkind = \"string_theory\"\n"),
            "problem.kind"
        );
        assert_eq!(
            key_of("[problem]\nkind = \"wave1d\"\ncoefficient = -1.0\n"),
            "problem"
        );
        assert_eq!(
            key_of("[problem]\nkind = \"heat2d\"\n[network]\nlayers = [3, 4, 1]\nhard_constraints = true\n"),
            "network.hard_constraints"
        );
        assert_eq!(key_of("[problem]\nkind = \"burgers\"\n[network]\nlayers = [2, 4, 1]\n[loss]\nmode = \"two_term\"\nn_data = 5\n"), "loss.n_data");
        assert_eq!(key_of("[bogus]\nx = 1\n"), "bogus");
    }

    #[test]
    fn two_term_draws_observations_from_the_series() {
        let text = format!("{BASE}[loss]\nmode = \"two_term\"\nlambda_weight = 0.3\nn_data = 20\n");
        let run = RunConfig::parse(&text).unwrap().run().unwrap();
        assert_eq!(run.loss.data_points.len(), 20);
        let exact = run.problem.analytical().unwrap();
        for (p, v) in &run.loss.data_points {
            assert!(run.problem.domain.contains(p));
            assert_eq!(*v, exact.eval(p));
        }
    }

    #[test]
    fn progressive_default_seed_is_the_initial_strip() {
        let text = format!("{BASE}[sampling]\nstrategy = \"progressive\"\n");
        let s = RunConfig::parse(&text)
            .unwrap()
            .run()
            .unwrap()
            .train
            .schedule
            .unwrap();
        assert_eq!(s.seeds[0].lo, vec![0.0, 0.0]);
        assert_eq!(s.seeds[0].hi, vec![2.0, 0.4]);
    }

    #[test]
    fn fd_settings() {
        let heat = RunConfig::parse(preset("heat2d_fd").unwrap()).unwrap();
        let c = heat.heat_fd().unwrap();
        assert_eq!((c.steps, c.record_every), (200, 100));
        let burgers = RunConfig::parse(preset("burgers").unwrap()).unwrap();
        let b = burgers.burgers_fd().unwrap();
        assert!(b.dt <= b.dt_limit());
        assert!(burgers.heat_fd().is_err());
    }
}
