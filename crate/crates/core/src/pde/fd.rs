//! Explicit finite-difference reference solvers.

use serde::{Deserialize, Serialize};

use super::{PdeKind, PdeProblem};
use crate::error::{Error, Result};
use crate::grid::GridField;

/// Grid and step settings for [`heat2d_fd_solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatFdConfig {
    /// Spatial step in both directions.
    pub h: f64,
    pub dt: f64,
    pub steps: usize,
    /// Keep every `record_every`-th field (the initial field is always kept).
    pub record_every: usize,
}

/// Explicit five-point scheme for the two-dimensional heat equation,
/// advanced one step at a time.
///
/// The update is
/// `φ' = (1 − 4r) φ + r (φ_S + φ_W + φ_N + φ_E)` with `r = Δt α / h²`;
/// boundary nodes hold their face values. Corner nodes take the value of the
/// `y` faces; the stencil never reads them.
#[derive(Debug, Clone)]
pub struct HeatSolver {
    nx: usize,
    ny: usize,
    r: f64,
    dt: f64,
    step: usize,
    ranges: [(f64, f64); 2],
    phi: Vec<f64>,
    next: Vec<f64>,
}

fn grid_points(lo: f64, hi: f64, h: f64, axis: &str) -> Result<usize> {
    let cells = (hi - lo) / h;
    let n = cells.round();
    if !(h > 0.0) || n < 2.0 || (cells - n).abs() > 1e-9 * n {
        return Err(Error::Argument(format!(
            "h = {h} does not divide the {axis} extent {} into at least 2 cells",
            hi - lo
        )));
    }
    Ok(n as usize + 1)
}

impl HeatSolver {
    pub fn new(problem: &PdeProblem, h: f64, dt: f64) -> Result<Self> {
        if problem.kind != PdeKind::Heat2d {
            return Err(Error::Argument(format!(
                "heat solver given a {:?} problem",
                problem.kind
            )));
        }
        let alpha = problem.coefficient;
        let bound = h * h / (4.0 * alpha);
        if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
            return Err(Error::Stability(format!(
                "dt ≤ h²/(4α) violated: dt = {dt}, h = {h}, α = {alpha}, bound = {bound}"
            )));
        }
        let b = &problem.domain.bounds;
        let nx = grid_points(b[0].0, b[0].1, h, "x")?;
        let ny = grid_points(b[1].0, b[1].1, h, "y")?;
        let mut phi = vec![problem.initial_value; nx * ny];
        let bc = &problem.boundary_values;
        for j in 0..ny {
            phi[j] = bc[0];
            phi[(nx - 1) * ny + j] = bc[1];
        }
        for i in 0..nx {
            phi[i * ny] = bc[2];
            phi[i * ny + ny - 1] = bc[3];
        }
        Ok(Self {
            nx,
            ny,
            r: dt * alpha / (h * h),
            dt,
            step: 0,
            ranges: [b[0], b[1]],
            next: phi.clone(),
            phi,
        })
    }

    pub fn step(&mut self) {
        let (ny, r) = (self.ny, self.r);
        let c = 1.0 - 4.0 * r;
        for i in 1..self.nx - 1 {
            for j in 1..ny - 1 {
                let k = i * ny + j;
                let around =
                    self.phi[k - 1] + self.phi[k - ny] + self.phi[k + 1] + self.phi[k + ny];
                self.next[k] = c * self.phi[k] + r * around;
            }
        }
        std::mem::swap(&mut self.phi, &mut self.next);
        self.step += 1;
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    /// Node values, row-major with `y` fastest.
    pub fn values(&self) -> &[f64] {
        &self.phi
    }

    /// `(min, max)` over interior nodes.
    pub fn interior_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 1..self.nx - 1 {
            for &v in &self.phi[i * self.ny + 1..(i + 1) * self.ny - 1] {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }

    pub fn field(&self) -> GridField {
        GridField::new((self.nx, self.ny), self.ranges, self.phi.clone()).expect("consistent shape")
    }
}

/// Runs the explicit heat scheme and returns the recorded fields, starting
/// with the initial one.
pub fn heat2d_fd_solve(problem: &PdeProblem, cfg: &HeatFdConfig) -> Result<Vec<GridField>> {
    if cfg.record_every == 0 {
        return Err(Error::Argument("record_every must be positive".into()));
    }
    let mut solver = HeatSolver::new(problem, cfg.h, cfg.dt)?;
    let mut out = vec![solver.field()];
    for k in 1..=cfg.steps {
        solver.step();
        if k % cfg.record_every == 0 {
            out.push(solver.field());
        }
    }
    Ok(out)
}

/// Discretisation of the convective term `(u²/2)_x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvectionScheme {
    /// First-order upwind `u D±u`, monotone for
    /// `dt (2ν/h² + max|u|/h) ≤ 1`.
    Upwind,
    /// Second-order central flux difference `(u²_{i+1} − u²_{i−1}) / 4h`,
    /// which needs a grid with cell Péclet number `h max|u| / ν ≤ 2`.
    #[default]
    Central,
}

/// Settings for [`burgers_fd_solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurgersFdConfig {
    pub nu: f64,
    /// Number of cells on `[−1, 1]`; the grid has `nx + 1` nodes.
    pub nx: usize,
    /// Largest time step; the solver shortens it so that output times fall
    /// on steps.
    pub dt: f64,
    pub t_end: f64,
    /// Number of output times, evenly spaced on `[0, t_end]`.
    pub n_times: usize,
    pub scheme: ConvectionScheme,
}

impl BurgersFdConfig {
    /// A configuration stepping at 90% of the stability limit.
    pub fn stable(
        nu: f64,
        nx: usize,
        t_end: f64,
        n_times: usize,
        scheme: ConvectionScheme,
    ) -> Self {
        let mut cfg = Self {
            nu,
            nx,
            dt: 0.0,
            t_end,
            n_times,
            scheme,
        };
        cfg.dt = 0.9 * cfg.dt_limit();
        cfg
    }

    fn h(&self) -> f64 {
        2.0 / self.nx as f64
    }

    /// Largest stable step for `max|u| = 1`, the bound of the initial data.
    pub fn dt_limit(&self) -> f64 {
        let h = self.h();
        match self.scheme {
            ConvectionScheme::Upwind => 1.0 / (2.0 * self.nu / (h * h) + 1.0 / h),
            ConvectionScheme::Central => (h * h / (2.0 * self.nu)).min(h),
        }
    }
}

/// Viscous Burgers on `[−1, 1]` with `u(x,0) = −sin(πx)` and zero ends,
/// explicit in time with central diffusion. Returns `u` on the
/// `(nx+1) × n_times` grid of nodes and output times.
pub fn burgers_fd_solve(cfg: &BurgersFdConfig) -> Result<GridField> {
    let BurgersFdConfig {
        nu,
        nx,
        dt,
        t_end,
        n_times,
        scheme,
    } = *cfg;
    if !(nu > 0.0) || nx < 4 || !(t_end > 0.0) || n_times < 2 {
        return Err(Error::Argument(format!("invalid Burgers grid {cfg:?}")));
    }
    let h = cfg.h();
    let u_max = 1.0;
    if scheme == ConvectionScheme::Central && h * u_max > 2.0 * nu {
        return Err(Error::Stability(format!(
            "cell Péclet number h·max|u|/ν = {} exceeds 2; refine the grid",
            h * u_max / nu
        )));
    }
    if !(dt > 0.0) || dt > cfg.dt_limit() * (1.0 + 1e-12) {
        return Err(Error::Stability(format!(
            "CFL violated: dt = {dt} exceeds {} (dt ≤ min(h/max|u|, h²/(2ν)) for central, \
             dt (2ν/h² + max|u|/h) ≤ 1 for upwind)",
            cfg.dt_limit()
        )));
    }
    let interval = t_end / (n_times - 1) as f64;
    let sub = (interval / dt - 1e-9).ceil().max(1.0) as usize;
    let dt = interval / sub as f64;

    let xs: Vec<f64> = (0..=nx).map(|i| (2 * i) as f64 / nx as f64 - 1.0).collect();
    let mut u: Vec<f64> = xs
        .iter()
        .map(|&x| -(std::f64::consts::PI * x).sin())
        .collect();
    u[0] = 0.0;
    u[nx] = 0.0;
    let mut next = u.clone();
    let mut out = vec![0.0; (nx + 1) * n_times];
    let store = |out: &mut [f64], u: &[f64], k: usize| {
        for (i, &v) in u.iter().enumerate() {
            out[i * n_times + k] = v;
        }
    };
    store(&mut out, &u, 0);
    let d = nu * dt / (h * h);
    let a = dt / h;
    for k in 1..n_times {
        for _ in 0..sub {
            for i in 1..nx {
                let (w, c, e) = (u[i - 1], u[i], u[i + 1]);
                let conv = match scheme {
                    ConvectionScheme::Central => 0.25 * a * (e * e - w * w),
                    ConvectionScheme::Upwind => {
                        if c > 0.0 {
                            a * c * (c - w)
                        } else {
                            a * c * (e - c)
                        }
                    }
                };
                next[i] = c - conv + d * (e - 2.0 * c + w);
            }
            std::mem::swap(&mut u, &mut next);
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                index: k,
                what: "Burgers solution became non-finite".into(),
            });
        }
        store(&mut out, &u, k);
    }
    GridField::new((nx + 1, n_times), [(-1.0, 1.0), (0.0, t_end)], out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::Domain;

    fn cell_problem() -> PdeProblem {
        PdeProblem::new(
            PdeKind::Heat2d,
            1.28e-4,
            Domain::new(vec![(0.0, 0.2), (0.0, 0.2), (0.0, 1.0)]).unwrap(),
            vec![100.0, 25.0, 200.0, 0.0],
            50.0,
        )
        .unwrap()
    }

    #[test]
    fn single_step_hand_example() {
        let mut s = HeatSolver::new(&cell_problem(), 0.1, 0.1).unwrap();
        s.step();
        assert!((s.values()[4] - 50.16).abs() < 1e-12);
    }

    #[test]
    fn uniform_field_is_a_fixed_point() {
        let p = PdeProblem::new(
            PdeKind::Heat2d,
            1.0,
            Domain::new(vec![(0.0, 1.0), (0.0, 1.0), (0.0, 1.0)]).unwrap(),
            vec![50.0; 4],
            50.0,
        )
        .unwrap();
        let fields = heat2d_fd_solve(
            &p,
            &HeatFdConfig {
                h: 0.1,
                dt: 0.0025,
                steps: 100,
                record_every: 10,
            },
        )
        .unwrap();
        assert_eq!(fields.len(), 11);
        assert!(fields.iter().all(|f| f.values.iter().all(|&v| v == 50.0)));
    }

    #[test]
    fn unstable_step_is_rejected() {
        let err = HeatSolver::new(&PdeProblem::heat2d(), 0.1, 20.0).unwrap_err();
        assert!(err.to_string().contains("dt ≤ h²/(4α)"));
        assert!(HeatSolver::new(&PdeProblem::heat2d(), 0.3, 1.0).is_err());
    }

    #[test]
    fn heavy_diffusion_decays() {
        let cfg = BurgersFdConfig::stable(1.0, 64, 0.2, 11, ConvectionScheme::Central);
        let g = burgers_fd_solve(&cfg).unwrap();
        let sup: Vec<f64> = (0..11)
            .map(|k| (0..=64).map(|i| g.get(i, k).abs()).fold(0.0, f64::max))
            .collect();
        assert!(sup.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn solution_is_odd() {
        for scheme in [ConvectionScheme::Central, ConvectionScheme::Upwind] {
            let cfg = BurgersFdConfig::stable(0.01 / std::f64::consts::PI, 512, 1.0, 11, scheme);
            let g = burgers_fd_solve(&cfg).unwrap();
            for k in 0..11 {
                for i in 0..=512 {
                    assert!((g.get(i, k) + g.get(512 - i, k)).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn burgers_step_limits() {
        let mut cfg = BurgersFdConfig::stable(0.01, 256, 0.5, 3, ConvectionScheme::Central);
        cfg.dt *= 1.5;
        assert!(matches!(burgers_fd_solve(&cfg), Err(Error::Stability(_))));
        let coarse = BurgersFdConfig::stable(0.001, 64, 0.5, 3, ConvectionScheme::Central);
        assert!(matches!(
            burgers_fd_solve(&coarse),
            Err(Error::Stability(_))
        ));
    }
}
