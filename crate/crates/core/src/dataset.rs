//! Training sets and their text format.
//!
//! Rows are `f1,...,fp,label` with `label ∈ {-1, 0, +1}`. Unlabeled rows
//! (label 0) are moved after the labeled ones; the original row order is
//! kept in [`TrainingSet::source_rows`] so graph files written against the
//! file order can be remapped.

use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    features: DMatrix<f64>,
    labels: Vec<f64>,
    labeled_count: usize,
    source_rows: Vec<usize>,
}

impl TrainingSet {
    /// Build from per-sample rows and labels. Labeled samples are stably moved
    /// to the front.
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Parameter("training set has no samples".into()));
        }
        if rows.len() != labels.len() {
            return Err(Error::Parameter(format!(
                "{} samples but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let p = rows[0].len();
        if p == 0 {
            return Err(Error::Parameter("samples have no features".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::Parameter(format!(
                    "sample {i} has {} features, expected {p}",
                    row.len()
                )));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::Parameter(format!("sample {i} has a non-finite feature")));
            }
        }
        for (i, &y) in labels.iter().enumerate() {
            if y != -1.0 && y != 0.0 && y != 1.0 {
                return Err(Error::Parameter(format!("label {y} of sample {i} is not in {{-1,0,+1}}")));
            }
        }

        let mut order: Vec<usize> = (0..rows.len()).filter(|&i| labels[i] != 0.0).collect();
        let labeled_count = order.len();
        if labeled_count == 0 {
            return Err(Error::Parameter("training set has no labeled samples".into()));
        }
        order.extend((0..rows.len()).filter(|&i| labels[i] == 0.0));

        let m = rows.len();
        let features = DMatrix::from_fn(m, p, |i, j| rows[order[i]][j]);
        let labels = order.iter().map(|&i| labels[i]).collect();
        Ok(Self {
            features,
            labels,
            labeled_count,
            source_rows: order,
        })
    }

    /// Samples as rows of an `m × p` matrix.
    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn label_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.labels)
    }

    pub fn labeled_count(&self) -> usize {
        self.labeled_count
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn sample(&self, i: usize) -> Vec<f64> {
        self.features.row(i).iter().copied().collect()
    }

    /// For each position, the row index the sample had in its source.
    pub fn source_rows(&self) -> &[usize] {
        &self.source_rows
    }

    /// Position of each source row after reordering.
    pub fn position_of_source(&self) -> Vec<usize> {
        let mut pos = vec![0; self.len()];
        for (p, &src) in self.source_rows.iter().enumerate() {
            pos[src] = p;
        }
        pos
    }
}

/// Parse a delimited dataset with a header row.
pub fn load_dataset<R: Read>(source: R) -> Result<TrainingSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(source);

    let header = reader.headers().map_err(|e| csv_error(e, 1))?.clone();
    if header.is_empty() || header.iter().all(str::is_empty) {
        return Err(Error::Parse {
            line: 1,
            message: "empty dataset".into(),
        });
    }
    if header.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            message: "header needs at least one feature column and a label column".into(),
        });
    }
    let p = header.len() - 1;

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(e, 0))?;
        let line = record.position().map_or(0, |pos| pos.line() as usize);
        let mut row = Vec::with_capacity(p);
        for (j, field) in record.iter().take(p).enumerate() {
            let x: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("feature {} is not numeric: {field:?}", j + 1),
            })?;
            if !x.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("feature {} is not finite", j + 1),
                });
            }
            row.push(x);
        }
        let raw = &record[p];
        let y: f64 = raw.parse().map_err(|_| Error::Parse {
            line,
            message: format!("label is not numeric: {raw:?}"),
        })?;
        if y != -1.0 && y != 0.0 && y != 1.0 {
            return Err(Error::Parse {
                line,
                message: format!("label {raw} is not one of -1, 0, +1"),
            });
        }
        rows.push(row);
        labels.push(y);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 2,
            message: "dataset has no rows".into(),
        });
    }
    if labels.iter().all(|&y| y == 0.0) {
        return Err(Error::Parse {
            line: 2,
            message: "dataset has no labeled rows".into(),
        });
    }
    TrainingSet::new(rows, labels)
}

pub fn load_dataset_path(path: &Path) -> Result<TrainingSet> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_dataset(file)
}

/// Parse a feature-only point list (`f1,...,fp` header, optionally followed by
/// a label column which is ignored when `p` columns are expected).
pub fn load_points<R: Read>(source: R, p: usize) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let width = reader.headers().map_err(|e| csv_error(e, 1))?.len();
    if width != p && width != p + 1 {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected {p} feature columns, header has {width} columns"),
        });
    }
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(e, 0))?;
        let line = record.position().map_or(0, |pos| pos.line() as usize);
        let point = record
            .iter()
            .take(p)
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("value is not numeric: {f:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        points.push(point);
    }
    Ok(points)
}

pub fn load_points_path(path: &Path, p: usize) -> Result<Vec<Vec<f64>>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_points(file, p)
}

fn csv_error(e: csv::Error, fallback_line: usize) -> Error {
    let line = e
        .position()
        .map_or(fallback_line, |pos| pos.line() as usize);
    let message = match e.kind() {
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => format!("ragged row: {len} fields, expected {expected_len}"),
        _ => e.to_string(),
    };
    Error::Parse { line, message }
}
