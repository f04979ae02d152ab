//! Gradient-weighted rejection sampling.

use ndarray::Array2;
use rand::Rng;

use super::{rng, uniform_from, Domain, SampleBatch, Strategy};
use crate::error::{Error, Result};
use crate::network::{BatchModel, ConstraintWrapper, JetSpec, NetworkParams};

/// Below this pilot maximum the field counts as flat.
const FLAT_THRESHOLD: f64 = 1e-12;
/// Candidates are scored in blocks of this many points.
const BLOCK: usize = 4096;

/// A field whose input-gradient norm `‖∇Λ‖₂` can be evaluated in batches.
pub trait GradientNorm {
    fn gradient_norms(&self, points: &Array2<f64>) -> Vec<f64>;
}

fn model_norms<M: BatchModel>(model: &M, points: &Array2<f64>) -> Vec<f64> {
    let jet = model.evaluate(points, &JetSpec::gradient(points.ncols()));
    (0..points.nrows())
        .map(|r| {
            jet.first
                .iter()
                .map(|c| c.as_ref().map_or(0.0, |c| c[r] * c[r]))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

impl GradientNorm for NetworkParams {
    fn gradient_norms(&self, points: &Array2<f64>) -> Vec<f64> {
        model_norms(self, points)
    }
}

impl GradientNorm for ConstraintWrapper {
    fn gradient_norms(&self, points: &Array2<f64>) -> Vec<f64> {
        model_norms(self, points)
    }
}

/// Adapts a closure returning the gradient norm at a point.
pub struct FnGradient<F>(pub F);

impl<F: Fn(&[f64]) -> f64> GradientNorm for FnGradient<F> {
    fn gradient_norms(&self, points: &Array2<f64>) -> Vec<f64> {
        points
            .rows()
            .into_iter()
            .map(|r| (self.0)(r.as_slice().expect("standard layout")))
            .collect()
    }
}

/// Result of [`gradient_weighted_sample`].
#[derive(Debug, Clone)]
pub struct WeightedSample {
    pub batch: SampleBatch,
    /// The pilot found no gradient above 1e-12 and the batch is uniform.
    pub fallback: bool,
    /// Rejection bound `M = 1.1 · max pilot norm` (0 on fallback).
    pub bound: f64,
    /// Number of candidates scored to collect the batch.
    pub candidates: usize,
}

/// `min(1, norm / bound)`.
pub fn acceptance_probability(norm: f64, bound: f64) -> f64 {
    (norm / bound).min(1.0)
}

/// `n` points drawn with density proportional to `‖∇Λ‖₂` (capped at the
/// pilot-estimated bound), by rejection from uniform candidates.
pub fn gradient_weighted_sample<G: GradientNorm + ?Sized>(
    field: &G,
    domain: &Domain,
    n: usize,
    seed: u64,
    pilot_n: usize,
) -> Result<WeightedSample> {
    weighted_from(field, domain, n, pilot_n, seed, 0)
}

pub(crate) fn weighted_from<G: GradientNorm + ?Sized>(
    field: &G,
    domain: &Domain,
    n: usize,
    pilot_n: usize,
    seed: u64,
    stream: u64,
) -> Result<WeightedSample> {
    if pilot_n < 100 {
        return Err(Error::Argument(format!(
            "pilot size {pilot_n} is below 100"
        )));
    }
    if n == 0 {
        return Err(Error::Argument("sample size must be positive".into()));
    }
    let mut r = rng(seed, 2 * stream + 1);
    let pilot = uniform_from(domain, pilot_n, &mut r)?;
    let max = field
        .gradient_norms(&pilot.points)
        .into_iter()
        .fold(0.0f64, f64::max);
    if !(max >= FLAT_THRESHOLD) {
        let batch = uniform_from(domain, n, &mut r)?;
        return Ok(WeightedSample {
            batch,
            fallback: true,
            bound: 0.0,
            candidates: n,
        });
    }
    let bound = 1.1 * max;
    let limit = n.saturating_mul(10_000);
    let dim = domain.dim();
    let mut points = Array2::zeros((n, dim));
    let mut accepted = 0;
    let mut candidates = 0;
    while accepted < n {
        if candidates >= limit {
            return Err(Error::Argument(format!(
                "acceptance rate too low: {accepted} of {candidates} candidates accepted"
            )));
        }
        let block = uniform_from(domain, BLOCK, &mut r)?.points;
        let norms = field.gradient_norms(&block);
        for (row, &g) in block.rows().into_iter().zip(&norms) {
            candidates += 1;
            if r.random::<f64>() < acceptance_probability(g, bound) {
                points.row_mut(accepted).assign(&row);
                accepted += 1;
                if accepted == n {
                    break;
                }
            }
        }
    }
    Ok(WeightedSample {
        batch: SampleBatch {
            points,
            stage: 0,
            strategy: Strategy::GradientWeighted,
        },
        fallback: false,
        bound,
        candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{ks_critical, ks_statistic, uniform_sample};

    fn unit_box() -> Domain {
        Domain::new(vec![(0.0, 2.0), (0.0, 1.0)]).unwrap()
    }

    #[test]
    fn two_to_one_ratio() {
        let field = FnGradient(|p: &[f64]| if p[0] < 1.0 { 2.0 } else { 1.0 });
        let s = gradient_weighted_sample(&field, &unit_box(), 100_000, 5, 1000).unwrap();
        assert!(!s.fallback);
        let a = s
            .batch
            .points
            .column(0)
            .iter()
            .filter(|&&x| x < 1.0)
            .count() as f64;
        let ratio = a / (100_000.0 - a);
        assert!((ratio - 2.0).abs() <= 0.1, "ratio {ratio}");
    }

    #[test]
    fn flat_field_falls_back() {
        let s = gradient_weighted_sample(&FnGradient(|_: &[f64]| 0.0), &unit_box(), 50, 1, 200)
            .unwrap();
        assert!(s.fallback);
        assert_eq!(s.batch.len(), 50);
    }

    #[test]
    fn constant_norm_is_uniform() {
        let n = 10_000;
        let s =
            gradient_weighted_sample(&FnGradient(|_: &[f64]| 3.0), &unit_box(), n, 8, 500).unwrap();
        let u = uniform_sample(&unit_box(), n, 99).unwrap();
        let crit = ks_critical(n, n, 0.01);
        for k in 0..2 {
            let d = ks_statistic(
                &s.batch.points.column(k).to_vec(),
                &u.points.column(k).to_vec(),
            );
            assert!(d < crit);
        }
    }

    #[test]
    fn deterministic_and_in_bounds() {
        let field = FnGradient(|p: &[f64]| p[0] * p[1]);
        let d = unit_box();
        let a = gradient_weighted_sample(&field, &d, 500, 3, 100).unwrap();
        let b = gradient_weighted_sample(&field, &d, 500, 3, 100).unwrap();
        assert_eq!(a.batch, b.batch);
        assert!(a
            .batch
            .points
            .rows()
            .into_iter()
            .all(|r| d.contains(r.as_slice().unwrap())));
        assert!(gradient_weighted_sample(&field, &d, 10, 3, 99).is_err());
    }
}
