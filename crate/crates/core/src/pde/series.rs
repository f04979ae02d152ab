//! Separation-of-variables series solutions.

use std::f64::consts::PI;

use ndarray::Array2;

use crate::autodiff::Real;
use crate::grid::GridField;
use crate::network::Evaluator;

/// `α_n = −(8πn sin πn + 16 cos πn − 16) / (π³n³)`, kept in this form even
/// though `sin πn` vanishes for integer `n`.
pub fn wave1d_coefficient(n: usize) -> f64 {
    let n = n as f64;
    -(8.0 * PI * n * (PI * n).sin() + 16.0 * (PI * n).cos() - 16.0) / (PI.powi(3) * n.powi(3))
}

/// Partial sum `Σ_{n ≤ n_terms} α_n cos(nπt/2) sin(nπx/2)` of the fixed-end
/// wave with `u(x,0) = x(2−x)` on `[0, 2]`.
pub fn wave1d_series(x: f64, t: f64, n_terms: usize) -> f64 {
    WaveSeries { n_terms }.eval(&[x, t])
}

/// Coefficient of the `(i, j)` membrane mode:
/// `576 (1+(−1)^{i+1})(1+(−1)^{j+1}) / (π⁶ i³ j³)`.
pub fn membrane_coefficient(i: usize, j: usize) -> f64 {
    if i.is_multiple_of(2) || j.is_multiple_of(2) {
        return 0.0;
    }
    576.0 * 4.0 / (PI.powi(6) * (i as f64).powi(3) * (j as f64).powi(3))
}

/// Double partial sum of the clamped membrane `u_tt = 36 (u_xx + u_yy)` on
/// `[0,2] × [0,3]` with `u(x,y,0) = xy(2−x)(3−y)`, using `n_each` modes per axis.
pub fn membrane_series(x: f64, y: f64, t: f64, n_each: usize) -> f64 {
    MembraneSeries { n_each }.eval(&[x, y, t])
}

/// The wave series as an [`Evaluator`] on `(x, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WaveSeries {
    pub n_terms: usize,
}

impl Default for WaveSeries {
    /// 1000 terms: the `n⁻³` coefficient decay puts the tail below 1e-6.
    fn default() -> Self {
        Self { n_terms: 1000 }
    }
}

impl Evaluator for WaveSeries {
    fn eval<R: Real>(&self, p: &[R]) -> R {
        let (x, t) = (p[0], p[1]);
        let mut sum = x.lift(0.0);
        for n in 1..=self.n_terms {
            let k = n as f64 * PI / 2.0;
            sum = sum + (t * k).cos() * (x * k).sin() * wave1d_coefficient(n);
        }
        sum
    }
}

impl WaveSeries {
    /// The series on a tensor grid, summed as one matrix product
    /// `Σ_n [α_n sin(nπx/2)] [cos(nπt/2)]`.
    pub fn grid(&self, shape: (usize, usize), ranges: [(f64, f64); 2]) -> GridField {
        let skeleton = GridField::from_fn(shape, ranges, |_, _| 0.0);
        let (xs, ts) = (skeleton.coords(0), skeleton.coords(1));
        let n = self.n_terms;
        let a = Array2::from_shape_fn((xs.len(), n), |(i, k)| {
            let m = k + 1;
            wave1d_coefficient(m) * (xs[i] * m as f64 * PI / 2.0).sin()
        });
        let b = Array2::from_shape_fn((n, ts.len()), |(k, j)| {
            (ts[j] * (k + 1) as f64 * PI / 2.0).cos()
        });
        let u = a.dot(&b);
        GridField {
            values: u.into_iter().collect(),
            ..skeleton
        }
    }
}

/// The membrane series as an [`Evaluator`] on `(x, y, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MembraneSeries {
    pub n_each: usize,
}

impl Default for MembraneSeries {
    fn default() -> Self {
        Self { n_each: 100 }
    }
}

impl Evaluator for MembraneSeries {
    fn eval<R: Real>(&self, p: &[R]) -> R {
        let (x, y, t) = (p[0], p[1], p[2]);
        let mut sum = x.lift(0.0);
        for i in (1..=self.n_each).step_by(2) {
            let sx = (x * (i as f64 * PI / 2.0)).sin();
            for j in (1..=self.n_each).step_by(2) {
                let omega = PI * ((9 * i * i + 4 * j * j) as f64).sqrt();
                let term = sx * (y * (j as f64 * PI / 3.0)).sin() * (t * omega).cos();
                sum = sum + term * membrane_coefficient(i, j);
            }
        }
        sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::{membrane_residual, wave1d_residual};
    use rand::{Rng, SeedableRng};

    #[test]
    fn wave_coefficients() {
        assert!(wave1d_coefficient(2).abs() < 1e-15);
        assert!((wave1d_coefficient(1) - 32.0 / PI.powi(3)).abs() < 1e-15);
        assert!((wave1d_coefficient(1) - 1.032049).abs() < 1e-6);
    }

    #[test]
    fn wave_series_reproduces_the_initial_shape() {
        assert!((wave1d_series(1.0, 0.0, 1000) - 1.0).abs() < 1e-6);
        assert_eq!(wave1d_series(0.0, 1.3, 50), 0.0);
    }

    #[test]
    fn grid_form_matches_pointwise_sum() {
        let s = WaveSeries { n_terms: 40 };
        let g = s.grid((7, 9), [(0.0, 2.0), (0.0, 4.0)]);
        for i in 0..7 {
            for j in 0..9 {
                let direct = s.eval(&[g.coord(0, i), g.coord(1, j)]);
                assert!((g.get(i, j) - direct).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn wave_series_solves_the_pde() {
        let s = WaveSeries::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let (x, t) = (rng.random::<f64>() * 2.0, rng.random::<f64>() * 4.0);
            assert!(wave1d_residual(&s, x, t, 1.0).unwrap().abs() <= 1e-6);
        }
    }

    #[test]
    fn membrane_series_properties() {
        assert_eq!(membrane_coefficient(2, 1), 0.0);
        assert_eq!(membrane_coefficient(3, 4), 0.0);
        assert!((membrane_series(1.0, 1.5, 0.0, 100) - 2.25).abs() < 1e-3);
        for &(x, y) in &[(0.0, 1.0), (2.0, 0.7), (1.2, 0.0), (0.4, 3.0)] {
            assert!(membrane_series(x, y, 0.37, 30).abs() < 1e-12);
        }
    }

    #[test]
    fn membrane_series_solves_the_pde() {
        let s = MembraneSeries { n_each: 50 };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let (x, y, t) = (
                rng.random::<f64>() * 2.0,
                rng.random::<f64>() * 3.0,
                rng.random::<f64>(),
            );
            assert!(membrane_residual(&s, x, y, t).unwrap().abs() <= 1e-4);
        }
    }
}
