//! Progressive domain expansion.
//!
//! Training starts on small regions around data that is known well (seed
//! boxes, e.g. the strip next to the initial condition) and widens them in
//! stages. Stage `i < k−1` grows every seed box towards the domain boundary by
//! the fraction `1 − (1 − growth)^i` of the remaining distance on each side,
//! then clips each pair of boxes at a fixed plane midway between their seeds.
//! The final stage is the whole domain.

use rand::Rng;

use super::{rng, Domain, SampleBatch, Strategy};
use crate::error::{Error, Result};
use ndarray::Array2;

/// `Π [lo_k, hi_k]`, used for seed regions and stage regions.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Structural(
                "box corners must have equal, nonzero length".into(),
            ));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b)) {
            return Err(Error::Structural(format!(
                "box corners {lo:?} / {hi:?} are not ordered"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn contains_point(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&x, (&a, &b))| a <= x && x <= b)
    }

    pub fn contains_box(&self, other: &AxisBox) -> bool {
        self.lo.iter().zip(&other.lo).all(|(a, b)| a <= b)
            && self.hi.iter().zip(&other.hi).all(|(a, b)| a >= b)
    }

    /// True if the interiors intersect.
    pub fn overlaps(&self, other: &AxisBox) -> bool {
        (0..self.lo.len()).all(|k| self.lo[k] < other.hi[k] && other.lo[k] < self.hi[k])
    }

    fn within(&self, domain: &Domain) -> bool {
        self.lo.len() == domain.dim()
            && domain
                .bounds
                .iter()
                .enumerate()
                .all(|(k, &(lo, hi))| lo <= self.lo[k] && self.hi[k] <= hi)
    }
}

/// Seed regions and the staging parameters of progressive sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSchedule {
    pub domain: Domain,
    pub seeds: Vec<AxisBox>,
    /// Fraction of the remaining distance to the boundary covered per stage, in (0, 1].
    pub growth: f64,
    /// Number of stages `k`; the last one is the whole domain.
    pub stages: usize,
    /// Optimizer iterations spent on each stage before advancing.
    pub iterations_per_stage: usize,
}

impl PartitionSchedule {
    pub fn new(
        domain: Domain,
        seeds: Vec<AxisBox>,
        growth: f64,
        stages: usize,
        iterations_per_stage: usize,
    ) -> Result<Self> {
        if seeds.is_empty() {
            return Err(Error::Structural(
                "progressive schedule needs at least one seed box".into(),
            ));
        }
        if !(growth > 0.0 && growth <= 1.0) {
            return Err(Error::Argument(format!(
                "growth {growth} must lie in (0, 1]"
            )));
        }
        if stages == 0 || iterations_per_stage == 0 {
            return Err(Error::Argument(
                "stages and iterations_per_stage must be positive".into(),
            ));
        }
        for (i, s) in seeds.iter().enumerate() {
            if !s.within(&domain) {
                return Err(Error::Structural(format!("seed box {i} leaves the domain")));
            }
            if s.volume() <= 0.0 {
                return Err(Error::Structural(format!("seed box {i} has zero volume")));
            }
            for (j, t) in seeds.iter().enumerate().skip(i + 1) {
                if s.overlaps(t) {
                    return Err(Error::Structural(format!("seed boxes {i} and {j} overlap")));
                }
            }
        }
        Ok(Self {
            domain,
            seeds,
            growth,
            stages,
            iterations_per_stage,
        })
    }

    /// The stage a given optimizer iteration belongs to.
    pub fn stage_at(&self, iteration: usize) -> usize {
        (iteration / self.iterations_per_stage).min(self.stages - 1)
    }

    /// A fixed hyperplane `x_axis = mid` separating seeds `i` and `j`: the
    /// axis with the widest gap relative to the domain extent, split at the
    /// middle of the gap. Clipping every stage against the same planes keeps
    /// the stages nested.
    fn separator(&self, i: usize, j: usize) -> (usize, f64) {
        let (a, b) = (&self.seeds[i], &self.seeds[j]);
        let mut best = (0, f64::NEG_INFINITY, 0.0);
        for (k, &(lo, hi)) in self.domain.bounds.iter().enumerate() {
            let (gap, mid) = if a.hi[k] <= b.lo[k] {
                (b.lo[k] - a.hi[k], 0.5 * (a.hi[k] + b.lo[k]))
            } else if b.hi[k] <= a.lo[k] {
                (a.lo[k] - b.hi[k], 0.5 * (b.hi[k] + a.lo[k]))
            } else {
                continue;
            };
            let rel = gap / (hi - lo);
            if rel > best.1 {
                best = (k, rel, mid);
            }
        }
        (best.0, best.2)
    }

    /// Regions of stage `stage`: pairwise disjoint, each containing its
    /// counterpart from the previous stage.
    pub fn stage_boxes(&self, stage: usize) -> Result<Vec<AxisBox>> {
        if stage >= self.stages {
            return Err(Error::Argument(format!(
                "stage {stage} out of range for {} stages",
                self.stages
            )));
        }
        if stage + 1 == self.stages {
            let (lo, hi) = self.domain.bounds.iter().copied().unzip();
            return Ok(vec![AxisBox { lo, hi }]);
        }
        let f = 1.0 - (1.0 - self.growth).powi(stage as i32);
        let mut boxes: Vec<AxisBox> = self
            .seeds
            .iter()
            .map(|s| {
                let (lo, hi) = self
                    .domain
                    .bounds
                    .iter()
                    .enumerate()
                    .map(|(k, &(dlo, dhi))| {
                        (s.lo[k] - f * (s.lo[k] - dlo), s.hi[k] + f * (dhi - s.hi[k]))
                    })
                    .unzip();
                AxisBox { lo, hi }
            })
            .collect();
        for i in 0..boxes.len() {
            for j in i + 1..boxes.len() {
                let (axis, mid) = self.separator(i, j);
                if self.seeds[i].hi[axis] <= mid {
                    boxes[i].hi[axis] = boxes[i].hi[axis].min(mid);
                    boxes[j].lo[axis] = boxes[j].lo[axis].max(mid);
                } else {
                    boxes[j].hi[axis] = boxes[j].hi[axis].min(mid);
                    boxes[i].lo[axis] = boxes[i].lo[axis].max(mid);
                }
            }
        }
        Ok(boxes)
    }
}

/// `n` points uniform over the union of the stage-`stage` regions.
pub fn progressive_sample(
    schedule: &PartitionSchedule,
    stage: usize,
    n: usize,
    seed: u64,
) -> Result<SampleBatch> {
    progressive_from(schedule, stage, n, &mut rng(seed, 0))
}

pub(crate) fn progressive_from(
    schedule: &PartitionSchedule,
    stage: usize,
    n: usize,
    rng: &mut impl Rng,
) -> Result<SampleBatch> {
    if n == 0 {
        return Err(Error::Argument("sample size must be positive".into()));
    }
    let boxes = schedule.stage_boxes(stage)?;
    let volumes: Vec<f64> = boxes.iter().map(AxisBox::volume).collect();
    let total: f64 = volumes.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Structural(format!("stage {stage} region is empty")));
    }
    let dim = schedule.domain.dim();
    let mut points = Array2::zeros((n, dim));
    for mut row in points.rows_mut() {
        let mut u = rng.random::<f64>() * total;
        let mut pick = boxes.len() - 1;
        for (k, v) in volumes.iter().enumerate() {
            if u < *v {
                pick = k;
                break;
            }
            u -= v;
        }
        let b = &boxes[pick];
        for k in 0..dim {
            row[k] = b.lo[k] + (b.hi[k] - b.lo[k]) * rng.random::<f64>();
        }
    }
    Ok(SampleBatch {
        points,
        stage,
        strategy: Strategy::Progressive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{ks_critical, ks_statistic, uniform_sample};

    fn strip_schedule() -> PartitionSchedule {
        let domain = Domain::new(vec![(0.0, 2.0), (0.0, 4.0)]).unwrap();
        let seed = AxisBox::new(vec![0.0, 0.0], vec![2.0, 0.1]).unwrap();
        PartitionSchedule::new(domain, vec![seed], 0.3, 5, 100).unwrap()
    }

    #[test]
    fn first_stage_stays_in_the_strip() {
        let b = progressive_sample(&strip_schedule(), 0, 2000, 4).unwrap();
        assert!(b.points.column(1).iter().all(|&t| t <= 0.1));
        assert_eq!(b.stage, 0);
    }

    #[test]
    fn final_stage_is_uniform() {
        let s = strip_schedule();
        let n = 10_000;
        let p = progressive_sample(&s, 4, n, 9).unwrap();
        let u = uniform_sample(&s.domain, n, 10).unwrap();
        let crit = ks_critical(n, n, 0.01);
        for k in 0..2 {
            let d = ks_statistic(&p.points.column(k).to_vec(), &u.points.column(k).to_vec());
            assert!(d < crit, "axis {k}: {d} ≥ {crit}");
        }
    }

    #[test]
    fn stages_nest_and_stay_disjoint() {
        let domain = Domain::new(vec![(0.0, 1.0), (0.0, 1.0)]).unwrap();
        let seeds = vec![
            AxisBox::new(vec![0.1, 0.1], vec![0.2, 0.2]).unwrap(),
            AxisBox::new(vec![0.6, 0.5], vec![0.8, 0.9]).unwrap(),
        ];
        let s = PartitionSchedule::new(domain, seeds, 0.5, 4, 10).unwrap();
        let mut prev = s.seeds.clone();
        for stage in 0..3 {
            let boxes = s.stage_boxes(stage).unwrap();
            assert!(!boxes[0].overlaps(&boxes[1]));
            for (b, p) in boxes.iter().zip(&prev) {
                assert!(b.contains_box(p));
            }
            prev = boxes;
        }
        assert_eq!(s.stage_boxes(3).unwrap().len(), 1);
        assert!(s.stage_boxes(4).is_err());
        assert_eq!(s.stage_at(0), 0);
        assert_eq!(s.stage_at(25), 2);
        assert_eq!(s.stage_at(10_000), 3);
    }

    #[test]
    fn schedule_validation() {
        let domain = Domain::new(vec![(0.0, 1.0)]).unwrap();
        let a = AxisBox::new(vec![0.1], vec![0.5]).unwrap();
        let b = AxisBox::new(vec![0.4], vec![0.6]).unwrap();
        assert!(PartitionSchedule::new(domain.clone(), vec![a.clone(), b], 0.5, 3, 1).is_err());
        assert!(PartitionSchedule::new(domain.clone(), vec![a.clone()], 0.0, 3, 1).is_err());
        assert!(PartitionSchedule::new(domain.clone(), vec![], 0.5, 3, 1).is_err());
        let flat = AxisBox::new(vec![0.2], vec![0.2]).unwrap();
        assert!(PartitionSchedule::new(domain, vec![flat], 0.5, 3, 1).is_err());
    }
}
