//! Helpers shared by the integration tests.
#![allow(dead_code)]

pub mod gradcheck;

use htps::featurize::Matrix;
use htps::records::{Record, UserId, UserRecords};

/// One emitted window as the oracle sees it.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleMatrix {
    pub rows: Vec<Vec<f64>>,
    /// `true` where a measurement was placed (sparse rows only).
    pub occupied: Vec<Vec<bool>>,
    pub label: f64,
    /// Index of the target record in the stream.
    pub at: usize,
}

/// Builds a record stream for one user from `(feature_type, value)` pairs.
pub fn stream(pairs: &[(usize, f64)]) -> Vec<Record<f64>> {
    pairs
        .iter()
        .enumerate()
        .map(|(i, &(ft, v))| Record {
            user_id: UserId("u".into()),
            seq: i as u64 + 1,
            feature_type: ft,
            value: v,
        })
        .collect()
}

pub fn user(id: &str, pairs: &[(usize, f64)]) -> UserRecords<f64> {
    let mut records = stream(pairs);
    for r in &mut records {
        r.user_id = UserId(id.into());
    }
    UserRecords {
        user_id: UserId(id.into()),
        records,
    }
}

/// Sparse windows recomputed from scratch: for every target record, rescan the
/// whole prefix and keep the last `w` measurements.
pub fn oracle_sparse(records: &[Record<f64>], n: usize, w: usize) -> Vec<OracleMatrix> {
    let mut out = Vec::new();
    for (k, r) in records.iter().enumerate() {
        if r.feature_type != 0 {
            continue;
        }
        let measured: Vec<&Record<f64>> = records[..k].iter().filter(|p| p.feature_type != 0).collect();
        if measured.len() < w {
            continue;
        }
        let last = &measured[measured.len() - w..];
        let mut rows = vec![vec![0.0; n]; w];
        let mut occupied = vec![vec![false; n]; w];
        for (i, m) in last.iter().enumerate() {
            rows[i][m.feature_type - 1] = m.value;
            occupied[i][m.feature_type - 1] = true;
        }
        out.push(OracleMatrix {
            rows,
            occupied,
            label: r.value,
            at: k,
        });
    }
    out
}

/// Dense windows recomputed from scratch: per feature, the last `w` values
/// before each target record, oldest first.
pub fn oracle_dense(records: &[Record<f64>], n: usize, w: usize) -> Vec<OracleMatrix> {
    let mut out = Vec::new();
    for (k, r) in records.iter().enumerate() {
        if r.feature_type != 0 {
            continue;
        }
        let columns: Vec<Vec<f64>> = (1..=n)
            .map(|ft| records[..k].iter().filter(|p| p.feature_type == ft).map(|p| p.value).collect())
            .collect();
        if columns.iter().any(|c| c.len() < w) {
            continue;
        }
        let rows: Vec<Vec<f64>> = (0..w)
            .map(|i| columns.iter().map(|c| c[c.len() - w + i]).collect())
            .collect();
        out.push(OracleMatrix {
            rows,
            occupied: vec![vec![true; n]; w],
            label: r.value,
            at: k,
        });
    }
    out
}

pub fn rows_of(m: &Matrix<f64>) -> Vec<Vec<f64>> {
    m.to_rows()
}

/// Relative error of two gradient vectors, robust to tiny entries.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / (na + nb).max(1e-12)
}

/// Central differences of `f` with respect to every entry of `params`.
pub fn numeric_gradient(params: &mut [f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    (0..params.len())
        .map(|i| {
            let orig = params[i];
            params[i] = orig + h;
            let up = f(params);
            params[i] = orig - h;
            let down = f(params);
            params[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Solves the least-squares problem `min |X b - y|` by normal equations.
pub fn least_squares(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = x[0].len();
    let mut a = vec![vec![0.0; p + 1]; p];
    for (row, &t) in x.iter().zip(y) {
        for i in 0..p {
            for j in 0..p {
                a[i][j] += row[i] * row[j];
            }
            a[i][p] += row[i] * t;
        }
    }
    // Gauss-Jordan with partial pivoting
    for c in 0..p {
        let piv = (c..p).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        let d = a[c][c];
        for v in a[c].iter_mut() {
            *v /= d;
        }
        for r in 0..p {
            if r != c {
                let f = a[r][c];
                let pivot_row = a[c].clone();
                for (v, pv) in a[r].iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    a.iter().map(|r| r[p]).collect()
}
