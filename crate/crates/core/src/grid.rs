//! Scalar fields sampled on a regular two-dimensional grid.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Formats a float with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Values on an equidistant `n0 × n1` grid, stored row-major (axis 1 fastest).
///
/// Axis `k` covers `ranges[k]` inclusively with `shape[k]` points; a
/// single-point axis sits at its lower bound.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub shape: (usize, usize),
    pub ranges: [(f64, f64); 2],
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(shape: (usize, usize), ranges: [(f64, f64); 2], values: Vec<f64>) -> Result<Self> {
        if shape.0 == 0 || shape.1 == 0 {
            return Err(Error::Structural(format!(
                "grid shape {shape:?} has an empty axis"
            )));
        }
        if values.len() != shape.0 * shape.1 {
            return Err(Error::Structural(format!(
                "grid {}×{} needs {} values, got {}",
                shape.0,
                shape.1,
                shape.0 * shape.1,
                values.len()
            )));
        }
        Ok(Self {
            shape,
            ranges,
            values,
        })
    }

    /// Samples `f(x0, x1)` at every grid point.
    pub fn from_fn(
        shape: (usize, usize),
        ranges: [(f64, f64); 2],
        mut f: impl FnMut(f64, f64) -> f64,
    ) -> Self {
        let mut values = Vec::with_capacity(shape.0 * shape.1);
        for i in 0..shape.0 {
            let a = axis_coord(ranges[0], shape.0, i);
            for j in 0..shape.1 {
                values.push(f(a, axis_coord(ranges[1], shape.1, j)));
            }
        }
        Self {
            shape,
            ranges,
            values,
        }
    }

    /// Coordinate of index `i` along `axis` (0 or 1).
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        let n = if axis == 0 {
            self.shape.0
        } else {
            self.shape.1
        };
        axis_coord(self.ranges[axis], n, i)
    }

    pub fn coords(&self, axis: usize) -> Vec<f64> {
        let n = if axis == 0 {
            self.shape.0
        } else {
            self.shape.1
        };
        (0..n).map(|i| self.coord(axis, i)).collect()
    }

    /// Grid spacing along `axis`, zero for a single-point axis.
    pub fn spacing(&self, axis: usize) -> f64 {
        let n = if axis == 0 {
            self.shape.0
        } else {
            self.shape.1
        };
        if n < 2 {
            0.0
        } else {
            (self.ranges[axis].1 - self.ranges[axis].0) / (n - 1) as f64
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.shape.1 + j]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn congruent(&self, other: &GridField) -> bool {
        self.shape == other.shape && self.ranges == other.ranges
    }

    /// Bilinear interpolation at `(a, b)`, clamped to the grid.
    pub fn interpolate(&self, a: f64, b: f64) -> f64 {
        let (i, s) = locate(self.ranges[0], self.shape.0, a);
        let (j, t) = locate(self.ranges[1], self.shape.1, b);
        let i1 = (i + 1).min(self.shape.0 - 1);
        let j1 = (j + 1).min(self.shape.1 - 1);
        let lo = self.get(i, j) * (1.0 - t) + self.get(i, j1) * t;
        let hi = self.get(i1, j) * (1.0 - t) + self.get(i1, j1) * t;
        lo * (1.0 - s) + hi * s
    }

    /// This field interpolated onto another grid over `ranges`.
    pub fn resample(&self, shape: (usize, usize), ranges: [(f64, f64); 2]) -> GridField {
        GridField::from_fn(shape, ranges, |a, b| self.interpolate(a, b))
    }

    /// Fails with the index of the first non-finite value.
    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::Numeric {
                index,
                what: "grid value".into(),
            }),
            None => Ok(()),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["axis0", "axis1", "value"])?;
        for i in 0..self.shape.0 {
            let a = fmt_f64(self.coord(0, i));
            for j in 0..self.shape.1 {
                w.write_record([
                    a.as_str(),
                    &fmt_f64(self.coord(1, j)),
                    &fmt_f64(self.get(i, j)),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Parses the `axis0,axis1,value` format written by [`write_csv`](Self::write_csv).
    pub fn read_csv<R: Read>(input: R, path: &Path) -> Result<Self> {
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            message,
        };
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        if header.iter().collect::<Vec<_>>() != ["axis0", "axis1", "value"] {
            return Err(bad(format!(
                "expected header axis0,axis1,value, found {:?}",
                header
            )));
        }
        let mut rows: Vec<[f64; 3]> = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != 3 {
                return Err(bad(format!("row {} has {} fields", line + 1, rec.len())));
            }
            let mut row = [0.0; 3];
            for (k, field) in rec.iter().enumerate() {
                row[k] = field
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("row {}: `{field}` is not a number", line + 1)))?;
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(bad("no data rows".into()));
        }
        let n1 = rows.iter().take_while(|r| r[0] == rows[0][0]).count();
        if !rows.len().is_multiple_of(n1) {
            return Err(bad(format!(
                "{} rows do not form a grid with {n1} columns",
                rows.len()
            )));
        }
        let n0 = rows.len() / n1;
        for (k, row) in rows.iter().enumerate() {
            if row[0] != rows[(k / n1) * n1][0] || row[1] != rows[k % n1][1] {
                return Err(bad(format!(
                    "row {} breaks the row-major grid layout",
                    k + 1
                )));
            }
        }
        let ranges = [
            (rows[0][0], rows[rows.len() - 1][0]),
            (rows[0][1], rows[n1 - 1][1]),
        ];
        let values = rows.iter().map(|r| r[2]).collect();
        Self::new((n0, n1), ranges, values)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file), path)
    }
}

/// Cell index and fractional offset of `x` along an axis.
fn locate((lo, hi): (f64, f64), n: usize, x: f64) -> (usize, f64) {
    if n < 2 || hi == lo {
        return (0, 0.0);
    }
    let u = ((x - lo) / (hi - lo) * (n - 1) as f64).clamp(0.0, (n - 1) as f64);
    let i = (u.floor() as usize).min(n - 2);
    (i, u - i as f64)
}

fn axis_coord((lo, hi): (f64, f64), n: usize, i: usize) -> f64 {
    if n < 2 {
        lo
    } else if i + 1 == n {
        hi
    } else {
        lo + (hi - lo) * i as f64 / (n - 1) as f64
    }
}
