//! Limited-memory BFGS.

use std::collections::VecDeque;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Curvature history and line-search constants of L-BFGS.
#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsState {
    /// Pairs `(s, y)`, oldest first, with `s = θ_{k+1} − θ_k` and
    /// `y = ∇L(θ_{k+1}) − ∇L(θ_k)`.
    pub history: VecDeque<(Vec<f64>, Vec<f64>)>,
    /// Maximum number of stored pairs.
    pub m: usize,
    pub c1: f64,
    pub c2: f64,
}

impl Default for LbfgsState {
    fn default() -> Self {
        Self::new(50, 1e-4, 0.9).expect("valid defaults")
    }
}

impl LbfgsState {
    pub fn new(m: usize, c1: f64, c2: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::Argument(
                "L-BFGS history size must be positive".into(),
            ));
        }
        if !(0.0 < c1 && c1 < c2 && c2 < 1.0) {
            return Err(Error::Argument(format!(
                "need 0 < c1 < c2 < 1, got c1 = {c1}, c2 = {c2}"
            )));
        }
        Ok(Self {
            history: VecDeque::with_capacity(m),
            m,
            c1,
            c2,
        })
    }

    /// Stores a curvature pair unless `yᵀs ≤ 1e-10 ‖y‖ ‖s‖`. Returns whether
    /// the pair was kept; the oldest pair is dropped once `m` are stored.
    pub fn push(&mut self, s: Vec<f64>, y: Vec<f64>) -> bool {
        let ys = dot(&y, &s);
        if !(ys > 1e-10 * norm(&y) * norm(&s)) {
            return false;
        }
        if self.history.len() == self.m {
            self.history.pop_front();
        }
        self.history.push_back((s, y));
        true
    }

    pub fn clear(&mut self) {
        self.history.clear();
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }
}

/// Search direction `p = −H ∇L` by the two-loop recursion, with
/// `H₀ = (sᵀy / yᵀy) I` from the newest pair. An empty history gives `−∇L`.
pub fn lbfgs_direction(state: &LbfgsState, grad: &[f64]) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(state.history.len());
    for (s, y) in state.history.iter().rev() {
        let rho = 1.0 / dot(y, s);
        let a = rho * dot(s, &q);
        for (qk, yk) in q.iter_mut().zip(y) {
            *qk -= a * yk;
        }
        alphas.push((a, rho));
    }
    if let Some((s, y)) = state.history.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y), (a, rho)) in state.history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qk, sk) in q.iter_mut().zip(s) {
            *qk += (a - b) * sk;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Dense inverse-Hessian BFGS update
/// `(I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ` with `ρ = 1 / yᵀs`.
///
/// Returns `None`, the signal to skip the update, when `yᵀs ≤ 0`.
pub fn bfgs_inverse_update(hinv: &Array2<f64>, s: &[f64], y: &[f64]) -> Option<Array2<f64>> {
    let ys = dot(y, s);
    if !(ys > 0.0) {
        return None;
    }
    let rho = 1.0 / ys;
    let s = Array1::from(s.to_vec());
    let y = Array1::from(y.to_vec());
    let hy = hinv.dot(&y);
    let yh = y.dot(hinv);
    let yhy = y.dot(&hy);
    let n = s.len();
    Some(Array2::from_shape_fn((n, n), |(i, j)| {
        hinv[[i, j]] - rho * (s[i] * yh[j] + hy[i] * s[j]) + (rho * rho * yhy + rho) * s[i] * s[j]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn angle(a: &[f64], b: &[f64]) -> f64 {
        (dot(a, b) / (norm(a) * norm(b))).clamp(-1.0, 1.0).acos()
    }

    #[test]
    fn empty_history_is_steepest_descent() {
        assert_eq!(
            lbfgs_direction(&LbfgsState::default(), &[1.0, -2.0]),
            vec![-1.0, 2.0]
        );
    }

    #[test]
    fn identity_pair_keeps_steepest_descent() {
        let mut st = LbfgsState::default();
        assert!(st.push(vec![0.3, -0.7], vec![0.3, -0.7]));
        let p = lbfgs_direction(&st, &[1.5, 2.0]);
        assert!((p[0] + 1.5).abs() < 1e-15 && (p[1] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn quadratic_direction_points_at_minimizer() {
        // f = ½ θᵀAθ, gradient Aθ, minimizer 0. The steps are A-conjugate, as
        // exact line searches on a quadratic produce, so H equals A⁻¹.
        let a = array![[3.0, 1.0], [1.0, 2.0]];
        let mut st = LbfgsState::default();
        for s in [array![1.0, 0.0], array![1.0, -3.0]] {
            let y = a.dot(&s);
            st.push(s.to_vec(), y.to_vec());
        }
        let theta = array![0.8, -1.7];
        let p = lbfgs_direction(&st, &a.dot(&theta).to_vec());
        let newton = (-&theta).to_vec();
        assert!(angle(&p, &newton) < 1e-8);
    }

    #[test]
    fn safeguard_and_capacity() {
        let mut st = LbfgsState::new(2, 1e-4, 0.9).unwrap();
        assert!(!st.push(vec![1.0, 0.0], vec![0.0, 1.0]));
        assert!(!st.push(vec![1.0, 0.0], vec![-1.0, 0.0]));
        for k in 1..=3 {
            assert!(st.push(vec![k as f64, 0.0], vec![1.0, 0.0]));
        }
        assert_eq!(st.len(), 2);
        assert_eq!(st.history[0].0[0], 2.0);
        assert!(LbfgsState::new(5, 0.9, 0.1).is_err());
        assert!(LbfgsState::new(0, 1e-4, 0.9).is_err());
    }

    #[test]
    fn bfgs_update_examples() {
        let eye = Array2::<f64>::eye(3);
        let s = [0.2, -1.0, 0.5];
        let same = bfgs_inverse_update(&eye, &s, &s).unwrap();
        assert!((&same - &eye).iter().all(|v| v.abs() < 1e-15));

        let s = [1.0, 1.0];
        let y = [1.0, 4.0];
        let h = bfgs_inverse_update(&Array2::eye(2), &s, &y).unwrap();
        let hy = h.dot(&array![1.0, 4.0]);
        assert!((hy[0] - 1.0).abs() < 1e-12 && (hy[1] - 1.0).abs() < 1e-12);
        assert!(bfgs_inverse_update(&eye, &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).is_none());
    }

    fn spd(d: usize, entries: &[f64]) -> Array2<f64> {
        let m = Array2::from_shape_fn((d, d), |(i, j)| entries[i * d + j]);
        m.t().dot(&m) + Array2::<f64>::eye(d)
    }

    proptest! {
        #[test]
        fn secant_condition_holds(
            d in 2usize..6,
            entries in prop::collection::vec(-1.0f64..1.0, 25),
            steps in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 5), 1..6),
        ) {
            let a = spd(d, &entries);
            let mut h = Array2::eye(d);
            for s in steps {
                let s = Array1::from(s[..d].to_vec());
                let y = a.dot(&s);
                if let Some(next) = bfgs_inverse_update(&h, s.as_slice().unwrap(), y.as_slice().unwrap()) {
                    h = next;
                    let hy = h.dot(&y);
                    for k in 0..d {
                        prop_assert!((hy[k] - s[k]).abs() <= 1e-10 * (1.0 + s[k].abs()));
                    }
                }
            }
        }

        #[test]
        fn exact_line_search_terminates_on_quadratics(
            d in 1usize..6,
            entries in prop::collection::vec(-1.0f64..1.0, 25),
            start in prop::collection::vec(-3.0f64..3.0, 5),
        ) {
            let a = spd(d, &entries);
            let mut theta = Array1::from(start[..d].to_vec());
            let mut st = LbfgsState::default();
            let mut g = a.dot(&theta);
            let mut iters = 0;
            while norm(g.as_slice().unwrap()) >= 1e-8 && iters <= d + 1 {
                let p = Array1::from(lbfgs_direction(&st, g.as_slice().unwrap()));
                let alpha = -g.dot(&p) / p.dot(&a.dot(&p));
                let s = &p * alpha;
                theta = &theta + &s;
                let next = a.dot(&theta);
                st.push(s.to_vec(), (&next - &g).to_vec());
                g = next;
                iters += 1;
            }
            prop_assert!(norm(g.as_slice().unwrap()) < 1e-8, "{} iterations", iters);
            prop_assert!(iters <= d + 1);
        }
    }
}
