//! Collocation point generation.
//!
//! Three strategies produce batches of points (one row per point, with the
//! time coordinate last):
//!
//! * [`uniform_sample`]: i.i.d. uniform over the whole domain.
//! * [`progressive_sample`]: uniform over a region that starts around known
//!   data (typically the initial-condition strip) and grows stage by stage
//!   until it is the whole domain.
//! * [`gradient_weighted_sample`]: rejection sampling with acceptance
//!   probability proportional to the input-gradient norm of the current
//!   approximation, so steep regions receive more points.

mod progressive;
mod weighted;

use std::io::Write;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::fmt_f64;

pub(crate) use progressive::progressive_from;
pub use progressive::{progressive_sample, AxisBox, PartitionSchedule};
pub(crate) use weighted::weighted_from;
pub use weighted::{
    acceptance_probability, gradient_weighted_sample, FnGradient, GradientNorm, WeightedSample,
};

/// A deterministic generator for one `(seed, stream)` pair.
///
/// Streams let one seed drive independent draws (per iteration, per loss
/// term) without the draws depending on each other's consumption.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// An axis-aligned box `Π [lo_k, hi_k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub bounds: Vec<(f64, f64)>,
}

impl Domain {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::Structural("a domain needs at least one axis".into()));
        }
        if let Some(k) = bounds
            .iter()
            .position(|(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite())
        {
            return Err(Error::Structural(format!(
                "axis {k} bounds {:?} are not lo < hi",
                bounds[k]
            )));
        }
        Ok(Self { bounds })
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn volume(&self) -> f64 {
        self.bounds.iter().map(|(lo, hi)| hi - lo).product()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(&self.bounds)
                .all(|(&x, &(lo, hi))| lo <= x && x <= hi)
    }

    /// Fills `out` with one uniform point.
    pub fn draw(&self, rng: &mut impl Rng, out: &mut [f64]) {
        for (x, &(lo, hi)) in out.iter_mut().zip(&self.bounds) {
            *x = lo + (hi - lo) * rng.random::<f64>();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    Uniform,
    Progressive,
    GradientWeighted,
}

/// A batch of collocation points.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    /// One row per point.
    pub points: Array2<f64>,
    /// Progressive stage the batch was drawn from, 0 for other strategies.
    pub stage: usize,
    pub strategy: Strategy,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    /// Writes the points as CSV with the given column names.
    pub fn write_csv<W: Write>(&self, out: W, columns: &[&str]) -> Result<()> {
        if columns.len() != self.points.ncols() {
            return Err(Error::Argument(format!(
                "{} column names for {}-dimensional points",
                columns.len(),
                self.points.ncols()
            )));
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(columns)?;
        for row in self.points.rows() {
            w.write_record(row.iter().map(|&v| fmt_f64(v)))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `n` i.i.d. uniform points in `domain`, deterministic in `seed`.
pub fn uniform_sample(domain: &Domain, n: usize, seed: u64) -> Result<SampleBatch> {
    uniform_from(domain, n, &mut rng(seed, 0))
}

pub(crate) fn uniform_from(domain: &Domain, n: usize, rng: &mut impl Rng) -> Result<SampleBatch> {
    if n == 0 {
        return Err(Error::Argument("sample size must be positive".into()));
    }
    let mut points = Array2::zeros((n, domain.dim()));
    for mut row in points.rows_mut() {
        domain.draw(rng, row.as_slice_mut().expect("standard layout"));
    }
    Ok(SampleBatch {
        points,
        stage: 0,
        strategy: Strategy::Uniform,
    })
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a − F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// Critical value of the two-sample KS statistic at significance `alpha`
/// (asymptotic form).
pub fn ks_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    c * ((n + m) as f64 / (n * m) as f64).sqrt()
}
