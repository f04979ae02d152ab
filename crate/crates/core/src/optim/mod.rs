//! Minimizers over flat parameter vectors.
//!
//! All optimizers work on `&[f64]` parameter vectors and leave the
//! computation of losses and gradients to the caller. Gradient steps descend:
//! `θ ← θ − γ ∇L`.

mod lbfgs;
mod line_search;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use lbfgs::{bfgs_inverse_update, lbfgs_direction, LbfgsState};
pub use line_search::{line_search, LineSearch, LineSearchOutcome, LineStep};

/// One plain gradient step using the mean gradient over `batch`, summed in
/// batch order.
pub fn sgd_step<P, F>(params: &[f64], grad_fn: F, batch: &[P], gamma: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &P) -> Vec<f64>,
{
    if batch.is_empty() {
        return Err(Error::Argument("SGD batch is empty".into()));
    }
    if !(gamma > 0.0) {
        return Err(Error::Argument(format!(
            "learning rate {gamma} must be positive"
        )));
    }
    let mut mean = vec![0.0; params.len()];
    for item in batch {
        let g = grad_fn(params, item);
        if g.len() != params.len() {
            return Err(Error::Argument(format!(
                "gradient has {} components for {} parameters",
                g.len(),
                params.len()
            )));
        }
        for (m, g) in mean.iter_mut().zip(&g) {
            *m += g;
        }
    }
    let scale = gamma / batch.len() as f64;
    Ok(params
        .iter()
        .zip(&mean)
        .map(|(p, g)| p - scale * g)
        .collect())
}

/// Moment estimates and hyperparameters of ADAM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Number of steps taken so far.
    pub t: u64,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Guard added to `√v̂` before dividing.
    pub delta: f64,
}

impl AdamState {
    pub fn new(n: usize, alpha: f64, beta1: f64, beta2: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::Argument(format!(
                "ADAM step size {alpha} must be positive"
            )));
        }
        for (name, b) in [("beta1", beta1), ("beta2", beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Argument(format!("{name} = {b} must lie in [0, 1)")));
            }
        }
        Ok(Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            alpha,
            beta1,
            beta2,
            delta: 1e-8,
        })
    }

    /// `α = 1e-3, β₁ = 0.9, β₂ = 0.999`.
    pub fn with_defaults(n: usize) -> Self {
        Self::new(n, 1e-3, 0.9, 0.999).expect("valid defaults")
    }
}

/// One ADAM update of `params` in place.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grad: &[f64]) -> Result<()> {
    if params.len() != grad.len() || state.m.len() != grad.len() {
        return Err(Error::Argument(format!(
            "ADAM sizes disagree: {} parameters, {} gradient components, state for {}",
            params.len(),
            grad.len(),
            state.m.len()
        )));
    }
    if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numeric {
            index,
            what: format!("non-finite gradient component {}", grad[index]),
        });
    }
    state.t += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powf(state.t as f64);
    let c2 = 1.0 - b2.powf(state.t as f64);
    for k in 0..params.len() {
        let g = grad[k];
        state.m[k] = b1 * state.m[k] + (1.0 - b1) * g;
        state.v[k] = b2 * state.v[k] + (1.0 - b2) * g * g;
        let m_hat = state.m[k] / c1;
        let v_hat = state.v[k] / c2;
        params[k] -= state.alpha * m_hat / (v_hat.sqrt() + state.delta);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sgd_examples() {
        let grad = |p: &[f64], _: &()| vec![2.0 * p[0]];
        assert!((sgd_step(&[1.0], grad, &[()], 0.1).unwrap()[0] - 0.8).abs() < 1e-15);
        let zero = |_: &[f64], _: &()| vec![0.0, 0.0];
        assert_eq!(
            sgd_step(&[1.0, -2.0], zero, &[(), ()], 0.5).unwrap(),
            vec![1.0, -2.0]
        );
        assert!(sgd_step(&[1.0], grad, &[], 0.1).is_err());
    }

    #[test]
    fn sgd_averages_the_batch() {
        let grad = |_: &[f64], g: &[f64; 2]| g.to_vec();
        let (g1, g2) = ([0.3, -1.2], [2.5, 0.4]);
        let both = sgd_step(&[1.0, 1.0], grad, &[g1, g2], 0.2).unwrap();
        let a = sgd_step(&[1.0, 1.0], grad, &[g1], 0.1).unwrap();
        let b = sgd_step(&a, grad, &[g2], 0.1).unwrap();
        for (x, y) in both.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn adam_single_step() {
        let mut s = AdamState::new(1, 0.1, 0.9, 0.999).unwrap();
        let mut theta = [1.0];
        adam_step(&mut s, &mut theta, &[2.0]).unwrap();
        assert!((theta[0] - (1.0 - 0.1 * 2.0 / (2.0 + 1e-8))).abs() < 1e-15);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn adam_zero_gradient_and_errors() {
        let mut s = AdamState::with_defaults(2);
        let mut theta = [0.5, -0.5];
        for _ in 0..100 {
            adam_step(&mut s, &mut theta, &[0.0, 0.0]).unwrap();
        }
        assert_eq!(theta, [0.5, -0.5]);
        assert_eq!(s.t, 100);
        match adam_step(&mut s, &mut theta, &[0.0, f64::NAN]) {
            Err(Error::Numeric { index, .. }) => assert_eq!(index, 1),
            other => panic!("{other:?}"),
        }
        assert!(AdamState::new(1, 0.1, 1.0, 0.9).is_err());
    }

    #[test]
    fn adam_steps_stay_bounded() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 4;
        let mut s = AdamState::with_defaults(n);
        let mut theta = vec![0.0; n];
        for step in 0..10_000 {
            let g: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let before = theta.clone();
            adam_step(&mut s, &mut theta, &g).unwrap();
            let bound = if step == 0 {
                s.alpha * (1.0 + 1e-12)
            } else {
                s.alpha / (1.0 - s.beta1)
            };
            for (a, b) in theta.iter().zip(&before) {
                assert!((a - b).abs() <= bound);
            }
        }
    }

    proptest! {
        #[test]
        fn adam_first_step_is_sign(g in prop::collection::vec(-1e3f64..1e3, 1..6)) {
            prop_assume!(g.iter().all(|x| x.abs() > 1e-2));
            let mut s = AdamState::with_defaults(g.len());
            let mut theta = vec![0.0; g.len()];
            adam_step(&mut s, &mut theta, &g).unwrap();
            for (t, g) in theta.iter().zip(&g) {
                prop_assert!((t + s.alpha * g.signum()).abs() < 2e-9);
            }
        }
    }
}
