//! Inexact line search: Armijo backtracking followed by a strong-Wolfe zoom.

use crate::error::{Error, Result};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Constants of [`line_search`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch {
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_halvings: usize,
    pub max_zoom: usize,
}

impl Default for LineSearch {
    fn default() -> Self {
        Self {
            c1: 1e-4,
            c2: 0.9,
            max_halvings: 50,
            max_zoom: 30,
        }
    }
}

impl LineSearch {
    pub fn new(c1: f64, c2: f64) -> Result<Self> {
        if !(0.0 < c1 && c1 < c2 && c2 < 1.0) {
            return Err(Error::Argument(format!(
                "need 0 < c1 < c2 < 1, got c1 = {c1}, c2 = {c2}"
            )));
        }
        Ok(Self {
            c1,
            c2,
            ..Self::default()
        })
    }
}

/// Which conditions the accepted step satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineSearchOutcome {
    /// Armijo and strong curvature.
    Wolfe,
    /// Armijo only: either `α = 1` was accepted without a bracket for the
    /// zoom, or the zoom ran out of iterations.
    Armijo,
    /// No step passed Armijo within the halving budget; the smallest step
    /// tried is returned.
    Exhausted,
}

/// An accepted step with the loss and gradient at `θ + α p`.
#[derive(Debug, Clone, PartialEq)]
pub struct LineStep {
    pub alpha: f64,
    pub loss: f64,
    pub grad: Vec<f64>,
    /// Loss evaluations spent.
    pub evals: usize,
    pub outcome: LineSearchOutcome,
}

struct Probe {
    alpha: f64,
    loss: f64,
    slope: f64,
    grad: Vec<f64>,
}

/// Step length along the descent direction `p` from `params`, where
/// `loss0` and `grad0` are the loss and gradient at `params`.
///
/// Tries `α = 1, ½, ¼, …` until `L(θ+αp) ≤ L(θ) + c₁ α pᵀ∇L(θ)`. If the
/// strong curvature condition `|pᵀ∇L(θ+αp)| ≤ c₂ |pᵀ∇L(θ)|` fails there and
/// a bracket is known, a zoom with safeguarded cubic interpolation looks for
/// a point satisfying both.
pub fn line_search<F>(
    mut loss_fn: F,
    params: &[f64],
    p: &[f64],
    loss0: f64,
    grad0: &[f64],
    cfg: &LineSearch,
) -> Result<LineStep>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    if !(0.0 < cfg.c1 && cfg.c1 < cfg.c2 && cfg.c2 < 1.0) {
        return Err(Error::Argument(format!(
            "need 0 < c1 < c2 < 1, got c1 = {}, c2 = {}",
            cfg.c1, cfg.c2
        )));
    }
    let slope0 = dot(grad0, p);
    if !(slope0 < 0.0) {
        return Err(Error::Argument(format!(
            "not a descent direction: pᵀ∇L = {slope0}"
        )));
    }
    let mut evals = 0;
    let mut probe = |alpha: f64| -> Result<Probe> {
        let trial: Vec<f64> = params.iter().zip(p).map(|(x, d)| x + alpha * d).collect();
        let (loss, grad) = loss_fn(&trial)?;
        evals += 1;
        Ok(Probe {
            alpha,
            loss,
            slope: dot(&grad, p),
            grad,
        })
    };
    let armijo = |pr: &Probe| pr.loss <= loss0 + cfg.c1 * pr.alpha * slope0;
    let curvature = |pr: &Probe| pr.slope.abs() <= cfg.c2 * slope0.abs();

    let mut alpha = 1.0;
    let mut halvings = 0;
    let mut cur = probe(alpha)?;
    while !armijo(&cur) {
        if halvings == cfg.max_halvings {
            return Ok(finish(cur, evals, LineSearchOutcome::Exhausted));
        }
        alpha *= 0.5;
        halvings += 1;
        cur = probe(alpha)?;
    }
    if curvature(&cur) {
        return Ok(finish(cur, evals, LineSearchOutcome::Wolfe));
    }

    // Bracket for the zoom: `lo` passes Armijo with the lowest loss so far and
    // the slope at `lo` points towards `hi`.
    let (mut hi_alpha, mut hi_loss, mut hi_slope) = if cur.slope > 0.0 {
        (0.0, loss0, slope0)
    } else if halvings > 0 {
        (2.0 * alpha, f64::NAN, f64::NAN)
    } else {
        return Ok(finish(cur, evals, LineSearchOutcome::Armijo));
    };
    let mut lo = cur;
    for _ in 0..cfg.max_zoom {
        let a = interpolate(lo.alpha, lo.loss, lo.slope, hi_alpha, hi_loss, hi_slope);
        let trial = probe(a)?;
        if !armijo(&trial) || trial.loss >= lo.loss {
            hi_alpha = trial.alpha;
            hi_loss = trial.loss;
            hi_slope = trial.slope;
        } else {
            if curvature(&trial) {
                return Ok(finish(trial, evals, LineSearchOutcome::Wolfe));
            }
            if trial.slope * (hi_alpha - trial.alpha) >= 0.0 {
                hi_alpha = lo.alpha;
                hi_loss = lo.loss;
                hi_slope = lo.slope;
            }
            lo = trial;
        }
        if (hi_alpha - lo.alpha).abs() <= 1e-12 * lo.alpha.max(1e-300) {
            break;
        }
    }
    Ok(finish(lo, evals, LineSearchOutcome::Armijo))
}

fn finish(p: Probe, evals: usize, outcome: LineSearchOutcome) -> LineStep {
    LineStep {
        alpha: p.alpha,
        loss: p.loss,
        grad: p.grad,
        evals,
        outcome,
    }
}

/// Minimizer of the cubic through both end points, kept at least a tenth of
/// the interval away from either end; bisection when the data is unusable.
fn interpolate(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> f64 {
    let (left, right) = (a.min(b), a.max(b));
    let width = right - left;
    let mid = 0.5 * (a + b);
    if ![fa, da, fb, db].iter().all(|v| v.is_finite()) {
        return mid;
    }
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if disc < 0.0 {
        return mid;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let denom = db - da + 2.0 * d2;
    if denom == 0.0 {
        return mid;
    }
    let x = b - (b - a) * (db + d2 - d1) / denom;
    if !x.is_finite() {
        return mid;
    }
    x.clamp(left + 0.1 * width, right - 0.1 * width)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn square(x: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((x[0] * x[0], vec![2.0 * x[0]]))
    }

    #[test]
    fn halving_example() {
        let s = line_search(square, &[1.0], &[-2.0], 1.0, &[2.0], &LineSearch::default()).unwrap();
        assert_eq!(s.alpha, 0.5);
        assert_eq!(s.outcome, LineSearchOutcome::Wolfe);
        assert_eq!(s.evals, 2);
    }

    #[test]
    fn linear_accepts_unit_step() {
        let lin = |x: &[f64]| Ok((3.0 * x[0], vec![3.0]));
        let s = line_search(lin, &[0.0], &[-1.0], 0.0, &[3.0], &LineSearch::default()).unwrap();
        assert_eq!(s.alpha, 1.0);
        assert_eq!(s.evals, 1);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(line_search(square, &[1.0], &[2.0], 1.0, &[2.0], &LineSearch::default()).is_err());
        assert!(LineSearch::new(0.5, 0.1).is_err());
        let bad = LineSearch {
            c1: 0.0,
            ..LineSearch::default()
        };
        assert!(line_search(square, &[1.0], &[-2.0], 1.0, &[2.0], &bad).is_err());
    }

    #[test]
    fn exhausted_returns_smallest_step() {
        // Every positive step increases the loss although the slope says otherwise.
        let liar = |x: &[f64]| Ok((if x[0] == 0.0 { 0.0 } else { 1.0 }, vec![1.0]));
        let s = line_search(liar, &[0.0], &[-1.0], 0.0, &[1.0], &LineSearch::default()).unwrap();
        assert_eq!(s.outcome, LineSearchOutcome::Exhausted);
        assert_eq!(s.alpha, 0.5f64.powi(50));
        assert_eq!(s.evals, 51);
    }

    #[test]
    fn non_finite_trials_are_backtracked() {
        let f = |x: &[f64]| {
            if x[0] < -0.5 {
                Ok((f64::NAN, vec![f64::NAN]))
            } else {
                square(x)
            }
        };
        let s = line_search(f, &[1.0], &[-2.0], 1.0, &[2.0], &LineSearch::default()).unwrap();
        assert!(s.loss.is_finite());
    }

    #[test]
    fn zoom_finds_wolfe_point_on_a_stiff_function() {
        // L = x⁴ from x = 1 along −1: α = 1 gives 0 with zero slope; along
        // −1.9 the unit step overshoots and the zoom has to work.
        let quartic = |x: &[f64]| Ok((x[0].powi(4), vec![4.0 * x[0].powi(3)]));
        let cfg = LineSearch::new(1e-4, 0.1).unwrap();
        let s = line_search(quartic, &[1.0], &[-1.9], 1.0, &[4.0], &cfg).unwrap();
        assert_eq!(s.outcome, LineSearchOutcome::Wolfe);
        let slope = s.grad[0] * -1.9;
        assert!(slope.abs() <= 0.1 * 7.6);
    }

    proptest! {
        #[test]
        fn accepted_steps_satisfy_armijo_and_descend(
            a in 0.1f64..50.0, b in -5.0f64..5.0, x0 in -3.0f64..3.0, scale in 0.01f64..100.0,
        ) {
            // L = a (x − b)² + sin x, descending along −scale·L'.
            let f = move |x: &[f64]| {
                let v = x[0];
                Ok((a * (v - b).powi(2) + v.sin(), vec![2.0 * a * (v - b) + v.cos()]))
            };
            let (l0, g0) = f(&[x0]).unwrap();
            prop_assume!(g0[0].abs() > 1e-8);
            let p = [-scale * g0[0]];
            let cfg = LineSearch::default();
            let s = line_search(f, &[x0], &p, l0, &g0, &cfg).unwrap();
            prop_assert!(s.outcome != LineSearchOutcome::Exhausted);
            prop_assert!(s.loss <= l0 + cfg.c1 * s.alpha * g0[0] * p[0]);
            prop_assert!(s.loss <= l0);
            if s.outcome == LineSearchOutcome::Wolfe {
                prop_assert!((s.grad[0] * p[0]).abs() <= cfg.c2 * (g0[0] * p[0]).abs());
            }
        }
    }
}
