//! Windowed feature matrices built from one user's ordered records.
//!
//! Both featurizers walk the stream once. A non-target record updates the
//! buffers; a target record emits a matrix (labelled with the target value)
//! when the buffers are full. Buffers are never cleared, so consecutive targets
//! with no measurements in between share the same window. Rows are ordered
//! oldest (row 0) to newest (row `W-1`).

use std::collections::VecDeque;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::records::{DatasetSpec, Record, UserId, UserRecords, TARGET_FEATURE};
use crate::scalar::{parse_scalar, Scalar};

/// Row-major `rows x cols` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("ragged rows"));
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<T> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }
}

/// Last `W` measurements, one populated cell per row.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseFeatureMatrix<T> {
    pub data: Matrix<T>,
    pub label: T,
}

/// Column `j` holds the last `W` values of feature `j + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseFeatureMatrix<T> {
    pub data: Matrix<T>,
    pub label: T,
}

impl<T: Scalar> DenseFeatureMatrix<T> {
    pub fn window(&self) -> usize {
        self.data.rows()
    }

    pub fn n_features(&self) -> usize {
        self.data.cols()
    }
}

impl<T: Scalar> SparseFeatureMatrix<T> {
    pub fn window(&self) -> usize {
        self.data.rows()
    }

    pub fn n_features(&self) -> usize {
        self.data.cols()
    }
}

/// Rolling buffers shared by both featurizers.
#[derive(Clone, Debug)]
pub struct FeaturizerState<T> {
    window: usize,
    n_features: usize,
    /// (zero-based column, value) of the last `W` measurements.
    sparse_buffer: VecDeque<(usize, T)>,
    dense_buffers: Vec<VecDeque<T>>,
}

impl<T: Scalar> FeaturizerState<T> {
    pub fn new(spec: &DatasetSpec) -> Self {
        FeaturizerState {
            window: spec.window,
            n_features: spec.n_features,
            sparse_buffer: VecDeque::with_capacity(spec.window + 1),
            dense_buffers: vec![VecDeque::with_capacity(spec.window + 1); spec.n_features],
        }
    }

    /// Appends a measurement (`feature_type >= 1`) to both buffers.
    pub fn push(&mut self, feature_type: usize, value: T) {
        debug_assert!(feature_type != TARGET_FEATURE && feature_type <= self.n_features);
        let col = feature_type - 1;
        self.sparse_buffer.push_back((col, value));
        if self.sparse_buffer.len() > self.window {
            self.sparse_buffer.pop_front();
        }
        let buf = &mut self.dense_buffers[col];
        buf.push_back(value);
        if buf.len() > self.window {
            buf.pop_front();
        }
    }

    pub fn sparse_ready(&self) -> bool {
        self.sparse_buffer.len() == self.window
    }

    pub fn dense_ready(&self) -> bool {
        self.dense_buffers.iter().all(|b| b.len() == self.window)
    }

    pub fn sparse_matrix(&self, label: T) -> SparseFeatureMatrix<T> {
        let mut data = Matrix::zeros(self.window, self.n_features);
        for (row, &(col, value)) in self.sparse_buffer.iter().enumerate() {
            data.set(row, col, value);
        }
        SparseFeatureMatrix { data, label }
    }

    pub fn dense_matrix(&self, label: T) -> DenseFeatureMatrix<T> {
        let mut data = Matrix::zeros(self.window, self.n_features);
        for (col, buf) in self.dense_buffers.iter().enumerate() {
            for (row, &value) in buf.iter().enumerate() {
                data.set(row, col, value);
            }
        }
        DenseFeatureMatrix { data, label }
    }
}

pub fn sparse_featurize<T: Scalar>(records: &[Record<T>], spec: &DatasetSpec) -> Vec<SparseFeatureMatrix<T>> {
    let mut state = FeaturizerState::new(spec);
    let mut out = Vec::new();
    for r in records {
        if r.is_target() {
            if state.sparse_ready() {
                out.push(state.sparse_matrix(r.value));
            }
        } else {
            state.push(r.feature_type, r.value);
        }
    }
    out
}

pub fn dense_featurize<T: Scalar>(records: &[Record<T>], spec: &DatasetSpec) -> Vec<DenseFeatureMatrix<T>> {
    let mut state = FeaturizerState::new(spec);
    let mut out = Vec::new();
    for r in records {
        if r.is_target() {
            if state.dense_ready() {
                out.push(state.dense_matrix(r.value));
            }
        } else {
            state.push(r.feature_type, r.value);
        }
    }
    out
}

/// A dense and a sparse matrix taken at the same target record.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample<T> {
    pub user_id: UserId,
    pub dense: DenseFeatureMatrix<T>,
    pub sparse: SparseFeatureMatrix<T>,
}

impl<T: Scalar> Sample<T> {
    pub fn label(&self) -> T {
        self.dense.label
    }
}

/// Emits a [`Sample`] at every target record where the dense buffers are full.
///
/// A full dense state implies a full sparse buffer (at least `N * W >= W`
/// measurements were seen), so every variant can train on the same samples.
pub fn paired_featurize<T: Scalar>(user: &UserRecords<T>, spec: &DatasetSpec) -> Vec<Sample<T>> {
    let mut state = FeaturizerState::new(spec);
    let mut out = Vec::new();
    for r in &user.records {
        if r.is_target() {
            if state.dense_ready() {
                debug_assert!(state.sparse_ready());
                out.push(Sample {
                    user_id: user.user_id.clone(),
                    dense: state.dense_matrix(r.value),
                    sparse: state.sparse_matrix(r.value),
                });
            }
        } else {
            state.push(r.feature_type, r.value);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Sparse,
    Dense,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Sparse => "sparse",
            Variant::Dense => "dense",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sparse" => Ok(Variant::Sparse),
            "dense" => Ok(Variant::Dense),
            other => Err(Error::invalid(format!("unknown matrix variant {other:?}"))),
        }
    }
}

/// Matrices of one variant as stored in a matrix file.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixFile<T> {
    pub variant: Variant,
    pub window: usize,
    pub n_features: usize,
    /// (matrix, label) in file order.
    pub samples: Vec<(Matrix<T>, T)>,
}

pub const MATRIX_MAGIC: &str = "HTPSFM";

impl<T: Scalar> MatrixFile<T> {
    pub fn from_dense(window: usize, n_features: usize, ms: &[DenseFeatureMatrix<T>]) -> Self {
        MatrixFile {
            variant: Variant::Dense,
            window,
            n_features,
            samples: ms.iter().map(|m| (m.data.clone(), m.label)).collect(),
        }
    }

    pub fn from_sparse(window: usize, n_features: usize, ms: &[SparseFeatureMatrix<T>]) -> Self {
        MatrixFile {
            variant: Variant::Sparse,
            window,
            n_features,
            samples: ms.iter().map(|m| (m.data.clone(), m.label)).collect(),
        }
    }

    pub fn dense_matrices(&self) -> Result<Vec<DenseFeatureMatrix<T>>> {
        if self.variant != Variant::Dense {
            return Err(Error::invalid("matrix file holds sparse matrices, dense required"));
        }
        Ok(self
            .samples
            .iter()
            .map(|(data, label)| DenseFeatureMatrix {
                data: data.clone(),
                label: *label,
            })
            .collect())
    }

    /// Header line `HTPSFM v1 <variant> W N count`, then per sample `W` rows and a label line.
    pub fn write<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(out);
        writeln!(
            w,
            "{MATRIX_MAGIC} v1 {} {} {} {}",
            self.variant.as_str(),
            self.window,
            self.n_features,
            self.samples.len()
        )?;
        for (m, label) in &self.samples {
            for r in 0..m.rows() {
                let line: Vec<String> = m.row(r).iter().map(T::to_string).collect();
                writeln!(w, "{}", line.join(" "))?;
            }
            writeln!(w, "{label}")?;
        }
        w.flush()
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let mut next_line = |what: &str| -> Result<String> {
            match lines.next() {
                Some(Ok(l)) => Ok(l),
                Some(Err(e)) => Err(Error::Corrupt(format!("reading {what}: {e}"))),
                None => Err(Error::Corrupt(format!("unexpected end of file reading {what}"))),
            }
        };
        let header = next_line("header")?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 6 || parts[0] != MATRIX_MAGIC {
            return Err(Error::Corrupt(format!("bad matrix file header {header:?}")));
        }
        if parts[1] != "v1" {
            return Err(Error::Version {
                expected: 1,
                found: parts[1].to_owned(),
            });
        }
        let variant: Variant = parts[2].parse()?;
        let num = |s: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::Corrupt(format!("bad count {s:?} in header")))
        };
        let (window, n_features, count) = (num(parts[3])?, num(parts[4])?, num(parts[5])?);
        let mut samples = Vec::with_capacity(count);
        for i in 0..count {
            let mut rows = Vec::with_capacity(window);
            for _ in 0..window {
                let line = next_line(&format!("sample {i}"))?;
                let row = line
                    .split_whitespace()
                    .map(parse_scalar::<T>)
                    .collect::<std::result::Result<Vec<T>, String>>()
                    .map_err(Error::Corrupt)?;
                if row.len() != n_features {
                    return Err(Error::Corrupt(format!(
                        "sample {i}: row has {} values, expected {n_features}",
                        row.len()
                    )));
                }
                rows.push(row);
            }
            let label = parse_scalar::<T>(&next_line(&format!("label {i}"))?).map_err(Error::Corrupt)?;
            let data = if window == 0 {
                Matrix::zeros(0, n_features)
            } else {
                Matrix::from_rows(&rows)?
            };
            samples.push((data, label));
        }
        Ok(MatrixFile {
            variant,
            window,
            n_features,
            samples,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(f).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(std::io::BufReader::new(f))
    }
}
