//! Observed panels: `p` series by `T + 1` time points.

use std::io::{Read, Write};
use std::path::Path;

use faer::{Mat, MatRef};

use crate::error::{Error, Result};

/// A `p x (T + 1)` data matrix; column `t` is the observation `y_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    data: Mat<f64>,
}

impl Panel {
    pub fn new(data: Mat<f64>) -> Result<Self> {
        let (p, n_obs) = data.shape();
        if p == 0 {
            return Err(Error::InsufficientData("panel has no series".into()));
        }
        if n_obs < 3 {
            return Err(Error::InsufficientData(format!(
                "need at least 3 time points (T >= 2), got {n_obs}"
            )));
        }
        for j in 0..n_obs {
            for i in 0..p {
                if !data[(i, j)].is_finite() {
                    return Err(Error::domain(format!(
                        "non-finite entry at series {i}, time {j}"
                    )));
                }
            }
        }
        Ok(Self { data })
    }

    /// Build from one vector per series.
    pub fn from_series(series: &[Vec<f64>]) -> Result<Self> {
        let p = series.len();
        let n_obs = series.first().map_or(0, Vec::len);
        if let Some((i, s)) = series.iter().enumerate().find(|(_, s)| s.len() != n_obs) {
            return Err(Error::domain(format!(
                "series {i} has {} observations, expected {n_obs}",
                s.len()
            )));
        }
        Self::new(Mat::from_fn(p, n_obs, |i, j| series[i][j]))
    }

    pub fn p(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_obs(&self) -> usize {
        self.data.ncols()
    }

    /// Number of lag-1 products, `n_obs - 1`.
    pub fn t(&self) -> usize {
        self.data.ncols() - 1
    }

    pub fn data(&self) -> MatRef<'_, f64> {
        self.data.as_ref()
    }

    pub fn into_inner(self) -> Mat<f64> {
        self.data
    }

    pub fn series(&self) -> Vec<Vec<f64>> {
        (0..self.p())
            .map(|i| (0..self.n_obs()).map(|j| self.data[(i, j)]).collect())
            .collect()
    }

    /// Subtract each series' sample mean.
    pub fn demeaned(&self) -> Self {
        let (p, n) = self.data.shape();
        let mut data = self.data.clone();
        for i in 0..p {
            let mean = (0..n).map(|j| data[(i, j)]).sum::<f64>() / n as f64;
            for j in 0..n {
                data[(i, j)] -= mean;
            }
        }
        Self { data }
    }

    /// `c * panel`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            data: Mat::from_fn(self.p(), self.n_obs(), |i, j| c * self.data[(i, j)]),
        }
    }

    /// Parse CSV text. By default rows are time points and columns are
    /// series; `transpose` accepts series-as-rows instead. A first row
    /// consisting only of non-numeric cells is taken as a header.
    pub fn read_csv<R: Read>(reader: R, transpose: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);

        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut width = None;
        for (idx, record) in rdr.records().enumerate() {
            let record = record?;
            let line = record.position().map_or(idx + 1, |p| p.line() as usize);
            if record.iter().all(str::is_empty) {
                continue;
            }
            let parsed: Vec<Option<f64>> = record.iter().map(|c| c.parse::<f64>().ok()).collect();
            if rows.is_empty() && width.is_none() && parsed.iter().all(Option::is_none) {
                width = Some(parsed.len());
                continue;
            }
            let expected = *width.get_or_insert(parsed.len());
            if parsed.len() != expected {
                return Err(Error::MalformedPanel {
                    line,
                    detail: format!("ragged row: {} cells, expected {expected}", parsed.len()),
                });
            }
            let mut row = Vec::with_capacity(parsed.len());
            for (col, (cell, raw)) in parsed.iter().zip(record.iter()).enumerate() {
                match cell {
                    Some(v) => row.push(*v),
                    None => {
                        return Err(Error::MalformedPanel {
                            line,
                            detail: format!("non-numeric cell {raw:?} in column {}", col + 1),
                        })
                    }
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::InsufficientData("CSV contains no data rows".into()));
        }
        let (n_rows, n_cols) = (rows.len(), rows[0].len());
        let data = if transpose {
            Mat::from_fn(n_rows, n_cols, |i, j| rows[i][j])
        } else {
            Mat::from_fn(n_cols, n_rows, |i, j| rows[j][i])
        };
        Self::new(data)
    }

    pub fn read_csv_path(path: impl AsRef<Path>, transpose: bool) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file), transpose)
    }

    /// Write as CSV, one row per time point, with a `s1,s2,...` header.
    /// Values use the shortest representation that parses back exactly.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record((1..=self.p()).map(|i| format!("s{i}")))?;
        for j in 0..self.n_obs() {
            w.write_record((0..self.p()).map(|i| self.data[(i, j)].to_string()))?;
        }
        w.flush().map_err(|e| Error::io("<panel csv>", e))?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}
