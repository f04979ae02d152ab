//! PDE problems, residual operators and reference solutions.
//!
//! Points are laid out as spatial coordinates followed by time: `(x, t)` for
//! the one-dimensional problems and `(x, y, t)` for the two-dimensional ones.

mod fd;
mod series;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::autodiff::{BatchTape, Expr, Real, TensorId};
use crate::error::{Error, Result};
use crate::network::{Evaluator, Jet, JetSpec};
use crate::sampling::Domain;

pub use fd::{
    burgers_fd_solve, heat2d_fd_solve, BurgersFdConfig, ConvectionScheme, HeatFdConfig, HeatSolver,
};
pub use series::{
    membrane_coefficient, membrane_series, wave1d_coefficient, wave1d_series, MembraneSeries,
    WaveSeries,
};

/// Which equation a problem poses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdeKind {
    /// `u_tt = c² u_xx`
    Wave1d,
    /// `u_t + u u_x = ν u_xx`
    Burgers,
    /// `u_t = α (u_xx + u_yy)`
    Heat2d,
    /// `u_tt = c² (u_xx + u_yy)`
    Membrane2d,
}

impl PdeKind {
    pub fn spatial_dim(self) -> usize {
        match self {
            PdeKind::Wave1d | PdeKind::Burgers => 1,
            PdeKind::Heat2d | PdeKind::Membrane2d => 2,
        }
    }

    /// True for equations with a second time derivative, which need an
    /// initial velocity as well as an initial value.
    pub fn second_order_in_time(self) -> bool {
        matches!(self, PdeKind::Wave1d | PdeKind::Membrane2d)
    }

    /// Name of the coefficient as it appears in configuration files.
    pub fn coefficient_name(self) -> &'static str {
        match self {
            PdeKind::Wave1d | PdeKind::Membrane2d => "c",
            PdeKind::Burgers => "nu",
            PdeKind::Heat2d => "alpha_diff",
        }
    }
}

/// Domain, coefficient, initial and boundary data of one problem.
///
/// Initial conditions are closed forms fixed by the kind and scaled to the
/// spatial box: `(x−a)(b−x)` for the wave, the product of such factors for
/// the membrane, `−sin(πx)` for Burgers and the constant `initial_value` for
/// heat. Initial velocities of second-order problems are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeProblem {
    pub kind: PdeKind,
    /// `c` (wave, membrane), `ν` (Burgers) or `α` (heat).
    pub coefficient: f64,
    /// Spatial axes followed by `[0, T]`.
    pub domain: Domain,
    /// Dirichlet values per face: axis 0 low, axis 0 high, axis 1 low, ...
    pub boundary_values: Vec<f64>,
    /// Interior initial value (heat only).
    pub initial_value: f64,
}

impl PdeProblem {
    pub fn new(
        kind: PdeKind,
        coefficient: f64,
        domain: Domain,
        boundary_values: Vec<f64>,
        initial_value: f64,
    ) -> Result<Self> {
        if !(coefficient > 0.0 && coefficient.is_finite()) {
            return Err(Error::Argument(format!(
                "coefficient {} must be positive, got {coefficient}",
                kind.coefficient_name()
            )));
        }
        let d = kind.spatial_dim();
        if domain.dim() != d + 1 {
            return Err(Error::Structural(format!(
                "{kind:?} needs {} axes (space then time), got {}",
                d + 1,
                domain.dim()
            )));
        }
        if domain.bounds[d].0 != 0.0 {
            return Err(Error::Structural("time axis must start at 0".into()));
        }
        if boundary_values.len() != 2 * d {
            return Err(Error::Structural(format!(
                "{kind:?} needs {} boundary values, got {}",
                2 * d,
                boundary_values.len()
            )));
        }
        Ok(Self {
            kind,
            coefficient,
            domain,
            boundary_values,
            initial_value,
        })
    }

    /// `u_tt = u_xx` on `[0,2] × [0,4]`, `u(x,0) = x(2−x)`, fixed ends.
    pub fn wave1d() -> Self {
        Self::new(
            PdeKind::Wave1d,
            1.0,
            Domain::new(vec![(0.0, 2.0), (0.0, 4.0)]).expect("valid"),
            vec![0.0; 2],
            0.0,
        )
        .expect("valid preset")
    }

    /// `ν = 0.01/π` on `[−1,1] × [0,1]`, `u(x,0) = −sin(πx)`, zero ends.
    pub fn burgers() -> Self {
        Self::new(
            PdeKind::Burgers,
            0.01 / PI,
            Domain::new(vec![(-1.0, 1.0), (0.0, 1.0)]).expect("valid"),
            vec![0.0; 2],
            0.0,
        )
        .expect("valid preset")
    }

    /// The heated square: `α = 1.28e-4` on `[0,1]²`, faces held at
    /// 100 (x=0), 25 (x=1), 200 (y=0) and 0 (y=1), interior starting at 50.
    pub fn heat2d() -> Self {
        Self::new(
            PdeKind::Heat2d,
            1.28e-4,
            Domain::new(vec![(0.0, 1.0), (0.0, 1.0), (0.0, 20.0)]).expect("valid"),
            vec![100.0, 25.0, 200.0, 0.0],
            50.0,
        )
        .expect("valid preset")
    }

    /// `u_tt = 6² (u_xx + u_yy)` on `[0,2] × [0,3] × [0,1]`,
    /// `u(x,y,0) = xy(2−x)(3−y)`, clamped edges.
    pub fn membrane() -> Self {
        Self::new(
            PdeKind::Membrane2d,
            6.0,
            Domain::new(vec![(0.0, 2.0), (0.0, 3.0), (0.0, 1.0)]).expect("valid"),
            vec![0.0; 4],
            0.0,
        )
        .expect("valid preset")
    }

    pub fn spatial_dim(&self) -> usize {
        self.kind.spatial_dim()
    }

    /// Input dimension of a network for this problem.
    pub fn dim(&self) -> usize {
        self.spatial_dim() + 1
    }

    pub fn time_axis(&self) -> usize {
        self.spatial_dim()
    }

    pub fn horizon(&self) -> f64 {
        self.domain.bounds[self.time_axis()].1
    }

    /// The spatial part of the domain.
    pub fn spatial_domain(&self) -> Domain {
        Domain {
            bounds: self.domain.bounds[..self.spatial_dim()].to_vec(),
        }
    }

    /// Initial value at spatial coordinates `x`.
    pub fn ic<R: Real>(&self, x: &[R]) -> R {
        let b = &self.domain.bounds;
        match self.kind {
            PdeKind::Wave1d => (x[0] - b[0].0) * (-x[0] + b[0].1),
            PdeKind::Membrane2d => {
                (x[0] - b[0].0) * (-x[0] + b[0].1) * (x[1] - b[1].0) * (-x[1] + b[1].1)
            }
            PdeKind::Burgers => -(x[0] * PI).sin(),
            PdeKind::Heat2d => x[0].lift(self.initial_value),
        }
    }

    /// Dirichlet value on face `face` (axis `face / 2`, high side if odd).
    pub fn boundary_value(&self, face: usize) -> f64 {
        self.boundary_values[face]
    }

    pub fn homogeneous_boundary(&self) -> bool {
        self.boundary_values.iter().all(|&v| v == 0.0)
    }

    /// Analytical solution, when one is known for this exact configuration.
    pub fn analytical(&self) -> Option<Analytical> {
        let same_space = |preset: &PdeProblem| {
            self.coefficient == preset.coefficient
                && self.domain.bounds[..self.spatial_dim()]
                    == preset.domain.bounds[..self.spatial_dim()]
                && self.homogeneous_boundary()
        };
        if self.kind == PdeKind::Wave1d && same_space(&Self::wave1d()) {
            Some(Analytical::Wave(WaveSeries::default()))
        } else if self.kind == PdeKind::Membrane2d && same_space(&Self::membrane()) {
            Some(Analytical::Membrane(MembraneSeries::default()))
        } else {
            None
        }
    }

    /// Residual `𝒩(Λ)` at `point` with derivatives from the scalar tape.
    pub fn residual<E: Evaluator>(&self, net: &E, point: &[f64]) -> Result<f64> {
        if point.len() != self.dim() {
            return Err(Error::Dimension {
                layer: 0,
                expected: self.dim(),
                got: point.len(),
            });
        }
        let k = self.coefficient;
        match self.kind {
            PdeKind::Wave1d => wave1d_residual(net, point[0], point[1], k),
            PdeKind::Burgers => burgers_residual(net, point[0], point[1], k),
            PdeKind::Heat2d => heat2d_residual(net, point[0], point[1], point[2], k),
            PdeKind::Membrane2d => wave2d_residual(net, point, k),
        }
    }

    /// Input derivatives the residual needs.
    pub fn residual_spec(&self) -> JetSpec {
        match self.kind {
            PdeKind::Wave1d => JetSpec::new(&[], &[0, 1]),
            PdeKind::Burgers => JetSpec::new(&[0, 1], &[0]),
            PdeKind::Heat2d => JetSpec::new(&[2], &[0, 1]),
            PdeKind::Membrane2d => JetSpec::new(&[], &[0, 1, 2]),
        }
    }

    /// Residual of a batched jet, one row per point.
    pub fn residual_batch(&self, tape: &mut BatchTape, jet: &Jet) -> TensorId {
        let k = self.coefficient;
        match self.kind {
            PdeKind::Wave1d => {
                let xx = tape.scale(jet.d2(0), k * k);
                tape.sub(jet.d2(1), xx)
            }
            PdeKind::Burgers => {
                let adv = tape.mul(jet.value, jet.d1(0));
                let lhs = tape.add(jet.d1(1), adv);
                let diff = tape.scale(jet.d2(0), k);
                tape.sub(lhs, diff)
            }
            PdeKind::Heat2d => {
                let lap = tape.add(jet.d2(0), jet.d2(1));
                let diff = tape.scale(lap, k);
                tape.sub(jet.d1(2), diff)
            }
            PdeKind::Membrane2d => {
                let lap = tape.add(jet.d2(0), jet.d2(1));
                let lap = tape.scale(lap, k * k);
                tape.sub(jet.d2(2), lap)
            }
        }
    }
}

/// A known closed-form or series solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Analytical {
    Wave(WaveSeries),
    Membrane(MembraneSeries),
}

impl Evaluator for Analytical {
    fn eval<R: Real>(&self, point: &[R]) -> R {
        match self {
            Analytical::Wave(s) => s.eval(point),
            Analytical::Membrane(s) => s.eval(point),
        }
    }
}

/// Value, gradient and pure second derivatives `∂²/∂x_d²` for `d` in `dims`.
fn derivatives<E: Evaluator>(
    net: &E,
    point: &[f64],
    dims: &[usize],
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let expr = Expr::record(point, |v| net.eval(v))?;
    let mut grad = expr.reverse_gradient()?.into_vec();
    let mut diag = vec![0.0; point.len()];
    for &d in dims {
        let (g, col) = expr.hessian_column(point, d)?;
        grad = g;
        diag[d] = col[d];
    }
    Ok((expr.value(), grad, diag))
}

/// `Λ_tt − c² Λ_xx` at `(x, t)`.
pub fn wave1d_residual<E: Evaluator>(net: &E, x: f64, t: f64, c: f64) -> Result<f64> {
    let (_, _, h) = derivatives(net, &[x, t], &[0, 1])?;
    Ok(h[1] - c * c * h[0])
}

/// `Λ_t + Λ Λ_x − ν Λ_xx` at `(x, t)`.
pub fn burgers_residual<E: Evaluator>(net: &E, x: f64, t: f64, nu: f64) -> Result<f64> {
    let (u, g, h) = derivatives(net, &[x, t], &[0])?;
    Ok(g[1] + u * g[0] - nu * h[0])
}

/// `Λ_t − α (Λ_xx + Λ_yy)` at `(x, y, t)`.
pub fn heat2d_residual<E: Evaluator>(net: &E, x: f64, y: f64, t: f64, alpha: f64) -> Result<f64> {
    let (_, g, h) = derivatives(net, &[x, y, t], &[0, 1])?;
    Ok(g[2] - alpha * (h[0] + h[1]))
}

/// `Λ_tt − 36 (Λ_xx + Λ_yy)` at `(x, y, t)`, the membrane with `c = 6`.
pub fn membrane_residual<E: Evaluator>(net: &E, x: f64, y: f64, t: f64) -> Result<f64> {
    wave2d_residual(net, &[x, y, t], 6.0)
}

fn wave2d_residual<E: Evaluator>(net: &E, p: &[f64], c: f64) -> Result<f64> {
    let (_, _, h) = derivatives(net, p, &[0, 1, 2])?;
    Ok(h[2] - c * c * (h[0] + h[1]))
}
