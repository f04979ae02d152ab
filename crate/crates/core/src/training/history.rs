use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{fmt_f64, GridField};
use crate::metrics::rel_l2_error;
use crate::network::Evaluator;
use crate::pde::{Analytical, PdeProblem};

use super::train::snapshot_layout;

/// Loss parts after one optimizer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRecord {
    pub iter: usize,
    pub data_loss: f64,
    pub physics_loss: f64,
    pub total_loss: f64,
}

/// Per-iteration losses plus snapshots of the approximation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingHistory {
    pub records: Vec<HistoryRecord>,
    /// `(iteration, field)` pairs on the evaluation grid.
    pub snapshots: Vec<(usize, GridField)>,
    pub snapshot_interval: usize,
    /// Loss and gradient evaluations spent, line-search trials included.
    pub evaluations: usize,
}

const HEADER: [&str; 4] = ["iter", "data_loss", "physics_loss", "total_loss"];

impl TrainingHistory {
    pub fn new(snapshot_interval: usize) -> Self {
        Self {
            snapshot_interval,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&HistoryRecord> {
        self.records.last()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(HEADER)?;
        for r in &self.records {
            w.write_record([
                r.iter.to_string(),
                fmt_f64(r.data_loss),
                fmt_f64(r.physics_loss),
                fmt_f64(r.total_loss),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the records written by [`write_csv`](Self::write_csv); snapshots
    /// are not part of the file.
    pub fn read_csv<R: Read>(input: R, path: &Path) -> Result<Self> {
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            message,
        };
        let mut rdr = csv::Reader::from_reader(input);
        if rdr.headers()?.iter().collect::<Vec<_>>() != HEADER {
            return Err(bad(format!("expected header {}", HEADER.join(","))));
        }
        let mut h = Self::default();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let num = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad(format!("row {}: column {k} is not a number", line + 1)))
            };
            let iter = rec
                .get(0)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad(format!("row {}: bad iteration", line + 1)))?;
            h.records.push(HistoryRecord {
                iter,
                data_loss: num(1)?,
                physics_loss: num(2)?,
                total_loss: num(3)?,
            });
        }
        Ok(h)
    }

    /// Writes `history.csv` and one `snap_<iter>.csv` per snapshot into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(dir.join("history.csv"))?)?;
        for (iter, field) in &self.snapshots {
            field.save(&dir.join(format!("snap_{iter}.csv")))?;
        }
        Ok(())
    }
}

/// Relative L2 error of every snapshot against `reference`.
pub fn track_convergence_against(
    history: &TrainingHistory,
    reference: &GridField,
) -> Result<Vec<(usize, f64)>> {
    if history.snapshots.is_empty() {
        return Err(Error::Argument("history has no snapshots".into()));
    }
    history
        .snapshots
        .iter()
        .map(|(iter, field)| {
            if !field.congruent(reference) {
                return Err(Error::Argument(format!(
                    "snapshot {iter} is not on the reference grid"
                )));
            }
            Ok((*iter, rel_l2_error(&reference.values, &field.values)?))
        })
        .collect()
}

/// Relative L2 error of every snapshot against the analytical solution of
/// `problem`.
pub fn track_convergence(
    history: &TrainingHistory,
    problem: &PdeProblem,
) -> Result<Vec<(usize, f64)>> {
    let Some((_, first)) = history.snapshots.first() else {
        return Err(Error::Argument("history has no snapshots".into()));
    };
    let Some(exact) = problem.analytical() else {
        return Err(Error::NoReference(format!(
            "{:?} has no analytical solution",
            problem.kind
        )));
    };
    let reference = reference_grid(&exact, problem, first.shape);
    track_convergence_against(history, &reference)
}

/// The analytical solution on the snapshot grid of `problem`.
pub fn reference_grid(
    exact: &Analytical,
    problem: &PdeProblem,
    shape: (usize, usize),
) -> GridField {
    let (ranges, point) = snapshot_layout(problem);
    match exact {
        Analytical::Wave(s) if problem.spatial_dim() == 1 => s.grid(shape, ranges),
        _ => GridField::from_fn(shape, ranges, |a, b| exact.eval(&point(a, b))),
    }
}
