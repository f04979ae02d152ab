//! Error norms, relative-error fields and convergence-rate fits.

use std::io::Write;
use std::path::Path;

use crate::autodiff::Dual;
use crate::error::{Error, Result};
use crate::grid::{fmt_f64, GridField};
use crate::network::Evaluator;
use crate::sampling::Domain;

/// Below this magnitude the reference counts as zero in relative errors.
pub const RELATIVE_FLOOR: f64 = 1e-12;

/// Trapezoid weights for `n` equidistant nodes with spacing `h`.
fn trapezoid(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    w[0] *= 0.5;
    w[n - 1] *= 0.5;
    w
}

/// Input gradient of `f` at `p` by one forward-mode pass per input.
fn gradient<E: Evaluator>(f: &E, p: &[f64], out: &mut [f64]) {
    for (d, o) in out.iter_mut().enumerate() {
        *o = f.eval(&Dual::seeded(p, d)).tangent;
    }
}

/// `∫ |∇u − ∇Λ|² ` over `domain` by the tensor-product trapezoid rule on
/// `nodes[k]` equidistant nodes per axis.
pub fn energy_error<U: Evaluator, A: Evaluator>(
    u: &U,
    approx: &A,
    domain: &Domain,
    nodes: &[usize],
) -> Result<f64> {
    let dim = domain.dim();
    if nodes.len() != dim || nodes.iter().any(|&n| n < 2) {
        return Err(Error::Argument(format!(
            "need at least 2 nodes on each of {dim} axes, got {nodes:?}"
        )));
    }
    let weights: Vec<Vec<f64>> = (0..dim)
        .map(|k| {
            let (lo, hi) = domain.bounds[k];
            trapezoid(nodes[k], (hi - lo) / (nodes[k] - 1) as f64)
        })
        .collect();
    let mut idx = vec![0usize; dim];
    let mut p = vec![0.0; dim];
    let mut gu = vec![0.0; dim];
    let mut ga = vec![0.0; dim];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for k in 0..dim {
            let (lo, hi) = domain.bounds[k];
            p[k] = if idx[k] + 1 == nodes[k] {
                hi
            } else {
                lo + (hi - lo) * idx[k] as f64 / (nodes[k] - 1) as f64
            };
            w *= weights[k][idx[k]];
        }
        gradient(u, &p, &mut gu);
        gradient(approx, &p, &mut ga);
        let sq: f64 = gu.iter().zip(&ga).map(|(a, b)| (a - b) * (a - b)).sum();
        if !sq.is_finite() {
            return Err(Error::Numeric {
                index: 0,
                what: format!("non-finite gradient difference at {p:?}"),
            });
        }
        total += w * sq;
        // advance the multi-index, last axis fastest
        let mut k = dim;
        loop {
            if k == 0 {
                return Ok(total);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < nodes[k] {
                break;
            }
            idx[k] = 0;
        }
    }
}

fn check_congruent(a: &GridField, b: &GridField) -> Result<()> {
    if a.congruent(b) {
        Ok(())
    } else {
        Err(Error::Argument(format!(
            "grids differ: {:?} over {:?} vs {:?} over {:?}",
            a.shape, a.ranges, b.shape, b.ranges
        )))
    }
}

/// Mean squared difference of two congruent grids.
pub fn mse_error(u: &GridField, approx: &GridField) -> Result<f64> {
    check_congruent(u, approx)?;
    let n = u.values.len() as f64;
    Ok(u.values
        .iter()
        .zip(&approx.values)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

/// `‖u − approx‖₂ / ‖u‖₂`.
pub fn rel_l2_error(u: &[f64], approx: &[f64]) -> Result<f64> {
    if u.len() != approx.len() {
        return Err(Error::Argument(format!(
            "vectors of length {} and {} cannot be compared",
            u.len(),
            approx.len()
        )));
    }
    let norm: f64 = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::Argument("reference has zero norm".into()));
    }
    let diff: f64 = u
        .iter()
        .zip(approx)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(diff / norm)
}

/// `Λ/u − 1` per cell, NaN where `|u| < 1e-12`.
pub fn relative_error_field(u: &GridField, approx: &GridField) -> Result<GridField> {
    check_congruent(u, approx)?;
    let values = u
        .values
        .iter()
        .zip(&approx.values)
        .map(|(&a, &b)| {
            if a.abs() < RELATIVE_FLOOR {
                f64::NAN
            } else {
                b / a - 1.0
            }
        })
        .collect();
    Ok(GridField {
        values,
        ..u.clone()
    })
}

/// `|u − Λ|` per cell.
pub fn abs_error_field(u: &GridField, approx: &GridField) -> Result<GridField> {
    check_congruent(u, approx)?;
    let values = u
        .values
        .iter()
        .zip(&approx.values)
        .map(|(a, b)| (a - b).abs())
        .collect();
    Ok(GridField {
        values,
        ..u.clone()
    })
}

/// Least-squares fit of `e = γ N^p` in log-log space; returns `(γ, p)`.
pub fn fit_convergence_rate(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 3 {
        return Err(Error::Argument(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(bad) = points.iter().find(|(n, e)| !(*n > 0.0 && *e > 0.0)) {
        return Err(Error::Argument(format!("point {bad:?} is not positive")));
    }
    let m = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|(n, _)| n.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, e)| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Argument("all N values coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok(((my - slope * mx).exp(), slope))
}

/// Ranks with ties sharing their average rank.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let avg = 0.5 * (i + j) as f64 + 1.0;
        for &k in &order[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation between two congruent fields, over cells where
/// both are finite. NaN when either field is constant there.
pub fn error_gradient_correlation(abs_error: &GridField, gradient_norm: &GridField) -> Result<f64> {
    check_congruent(abs_error, gradient_norm)?;
    let (a, b): (Vec<f64>, Vec<f64>) = abs_error
        .values
        .iter()
        .zip(&gradient_norm.values)
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .map(|(x, y)| (*x, *y))
        .unzip();
    if a.len() < 2 {
        return Ok(f64::NAN);
    }
    let (ra, rb) = (ranks(&a), ranks(&b));
    let m = ra.len() as f64;
    let mean = (m + 1.0) / 2.0;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - mean) * (y - mean);
        saa += (x - mean) * (x - mean);
        sbb += (y - mean) * (y - mean);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(f64::NAN);
    }
    Ok(sab / (saa * sbb).sqrt())
}

/// Error summary of an approximation against a reference on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// Energy-norm error, NaN when it was not computed.
    pub energy: f64,
    pub mse: f64,
    pub rel_l2: f64,
    pub abs_error_field: GridField,
    /// `Λ/u − 1`, NaN where the reference vanishes.
    pub rel_error_field: GridField,
    pub gradient_norm_field: GridField,
}

impl ErrorReport {
    pub fn new(
        reference: &GridField,
        approx: &GridField,
        gradient_norm: GridField,
        energy: f64,
    ) -> Result<Self> {
        check_congruent(reference, &gradient_norm)?;
        Ok(Self {
            energy,
            mse: mse_error(reference, approx)?,
            rel_l2: rel_l2_error(&reference.values, &approx.values)?,
            abs_error_field: abs_error_field(reference, approx)?,
            rel_error_field: relative_error_field(reference, approx)?,
            gradient_norm_field: gradient_norm,
        })
    }

    /// Mean of `|Λ/u − 1|` over cells with a nonzero reference, and the
    /// number of cells excluded.
    pub fn mean_relative_error(&self) -> (f64, usize) {
        let finite: Vec<f64> = self
            .rel_error_field
            .values
            .iter()
            .filter(|v| v.is_finite())
            .map(|v| v.abs())
            .collect();
        let excluded = self.rel_error_field.values.len() - finite.len();
        let mean = if finite.is_empty() {
            f64::NAN
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        };
        (mean, excluded)
    }

    pub fn correlation(&self) -> Result<f64> {
        error_gradient_correlation(&self.abs_error_field, &self.gradient_norm_field)
    }

    /// One-row summary. Relative errors are averaged over cells with
    /// `|u| ≥ 1e-12`; `rel_excluded_cells` counts the others.
    pub fn write_summary<W: Write>(&self, out: W) -> Result<()> {
        let (mean_rel, excluded) = self.mean_relative_error();
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "energy",
            "mse",
            "rel_l2",
            "mean_abs_rel_error",
            "rel_excluded_cells",
            "error_gradient_spearman",
        ])?;
        w.write_record([
            fmt_f64(self.energy),
            fmt_f64(self.mse),
            fmt_f64(self.rel_l2),
            fmt_f64(mean_rel),
            excluded.to_string(),
            fmt_f64(self.correlation()?),
        ])?;
        w.flush()?;
        Ok(())
    }

    /// Writes `report.csv` and the three fields into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        self.write_summary(std::fs::File::create(dir.join("report.csv"))?)?;
        self.abs_error_field.save(&dir.join("abs_error.csv"))?;
        self.rel_error_field.save(&dir.join("rel_error.csv"))?;
        self.gradient_norm_field
            .save(&dir.join("gradient_norm.csv"))?;
        Ok(())
    }
}
