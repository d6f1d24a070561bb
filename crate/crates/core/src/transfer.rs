//! Heterogeneous transfer between models with different feature sets.
//!
//! Every target feature is fed to each source autoencoder; the autoencoder with
//! the lowest mean reconstruction MAE is copied into the target model's slot for
//! that feature. Only the target training split is ever scored.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::featurize::{DenseFeatureMatrix, Sample};
use crate::model::HtpsModel;
use crate::records::{SplitRole, UserId};
use crate::scalar::{parse_scalar, Scalar};

/// One target feature and the source autoencoder chosen for it (both 1-based).
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatch<T> {
    pub target_feature: usize,
    pub source_autoencoder: usize,
    pub mae_score: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransferPlan<T> {
    pub matches: Vec<FeatureMatch<T>>,
    /// `scores[j][m]`: mean MAE of source autoencoder `m` on target feature `j` (0-based).
    pub scores: Vec<Vec<T>>,
    pub source_checkpoint_id: String,
    /// Users whose matrices were scored; empty when built from anonymous matrices.
    pub provenance: BTreeSet<UserId>,
}

/// Labelled samples of one split.
#[derive(Clone, Debug)]
pub struct SampleSet<T> {
    pub role: SplitRole,
    pub samples: Vec<Sample<T>>,
}

impl<T: Scalar> SampleSet<T> {
    pub fn users(&self) -> BTreeSet<UserId> {
        self.samples.iter().map(|s| s.user_id.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Mean reconstruction MAE of every source autoencoder over `feature_columns`.
pub fn score_feature<T: Scalar>(source: &HtpsModel<T>, feature_columns: &[Vec<T>]) -> Result<Vec<T>> {
    if feature_columns.is_empty() {
        return Err(Error::invalid("no feature columns to score"));
    }
    if let Some(c) = feature_columns.iter().find(|c| c.len() != source.window()) {
        return Err(Error::shape(format!(
            "column of length {} but the source model has window {}; transfer needs equal windows",
            c.len(),
            source.window()
        )));
    }
    let n = T::from_usize(feature_columns.len()).unwrap();
    source
        .autoencoders
        .iter()
        .map(|ae| {
            let mut total = T::zero();
            for col in feature_columns {
                total += ae.reconstruction_error(col)?;
            }
            Ok(total / n)
        })
        .collect()
}

fn argmin<T: Scalar>(scores: &[T]) -> usize {
    // strict `<` keeps the lowest index on ties; NaN never wins
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s < scores[best] || scores[best].is_nan() {
            best = i;
        }
    }
    best
}

/// Matches every target feature using the given training matrices.
pub fn build_plan<T: Scalar>(
    source: &HtpsModel<T>,
    target_training: &[DenseFeatureMatrix<T>],
    target_n_features: usize,
    source_checkpoint_id: &str,
) -> Result<TransferPlan<T>> {
    if target_training.is_empty() {
        return Err(Error::invalid("empty target training set"));
    }
    if let Some(m) = target_training.iter().find(|m| m.n_features() != target_n_features) {
        return Err(Error::shape(format!(
            "training matrix with {} features for a target with {target_n_features}",
            m.n_features()
        )));
    }
    let mut matches = Vec::with_capacity(target_n_features);
    let mut scores = Vec::with_capacity(target_n_features);
    for j in 0..target_n_features {
        let columns: Vec<Vec<T>> = target_training.iter().map(|m| m.data.column(j)).collect();
        let s = score_feature(source, &columns)?;
        let best = argmin(&s);
        matches.push(FeatureMatch {
            target_feature: j + 1,
            source_autoencoder: best + 1,
            mae_score: s[best],
        });
        scores.push(s);
    }
    Ok(TransferPlan {
        matches,
        scores,
        source_checkpoint_id: source_checkpoint_id.to_owned(),
        provenance: BTreeSet::new(),
    })
}

/// [`build_plan`] over a training split, recording which users were scored.
pub fn build_plan_from_split<T: Scalar>(
    source: &HtpsModel<T>,
    training: &SampleSet<T>,
    target_n_features: usize,
    source_checkpoint_id: &str,
) -> Result<TransferPlan<T>> {
    if training.role != SplitRole::Train {
        return Err(Error::invalid(format!(
            "transfer plans are built from the training split, got {:?}",
            training.role
        )));
    }
    let dense: Vec<DenseFeatureMatrix<T>> = training.samples.iter().map(|s| s.dense.clone()).collect();
    let mut plan = build_plan(source, &dense, target_n_features, source_checkpoint_id)?;
    plan.provenance = training.users();
    Ok(plan)
}

/// Copies the matched source autoencoders into `target`. Other sub-networks are untouched.
pub fn apply_plan<T: Scalar>(plan: &TransferPlan<T>, source: &HtpsModel<T>, mut target: HtpsModel<T>) -> Result<HtpsModel<T>> {
    if source.window() != target.window() {
        return Err(Error::shape(format!(
            "source window {} differs from target window {}",
            source.window(),
            target.window()
        )));
    }
    for m in &plan.matches {
        let src = m
            .source_autoencoder
            .checked_sub(1)
            .and_then(|i| source.autoencoders.get(i))
            .ok_or_else(|| Error::invalid(format!("source autoencoder {} out of range", m.source_autoencoder)))?;
        let dst = m
            .target_feature
            .checked_sub(1)
            .and_then(|i| target.autoencoders.get_mut(i))
            .ok_or_else(|| Error::invalid(format!("target feature {} out of range", m.target_feature)))?;
        if src.encoder.dims() != dst.encoder.dims() || src.decoder.dims() != dst.decoder.dims() {
            return Err(Error::shape(format!(
                "autoencoder shapes differ for target feature {}",
                m.target_feature
            )));
        }
        *dst = src.clone();
    }
    Ok(target)
}

impl<T: Scalar> TransferPlan<T> {
    /// Re-checks that every recorded score is the minimum of its row.
    pub fn verify_argmin(&self) -> bool {
        self.matches.iter().zip(&self.scores).all(|(m, row)| {
            row.get(m.source_autoencoder - 1) == Some(&m.mae_score) && row.iter().all(|&s| m.mae_score <= s)
        })
    }

    /// One line per match: `target_idx source_idx mae_score`.
    pub fn write<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(out);
        for m in &self.matches {
            writeln!(w, "{} {} {}", m.target_feature, m.source_autoencoder, m.mae_score)?;
        }
        w.flush()
    }

    /// Reads the match lines; scores and provenance are not stored in the file.
    pub fn read<R: BufRead>(input: R) -> Result<Vec<FeatureMatch<T>>> {
        let mut out = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::Corrupt(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::Corrupt(format!("plan line {}: {line:?}", i + 1));
            if f.len() != 3 {
                return Err(bad());
            }
            out.push(FeatureMatch {
                target_feature: f[0].parse().map_err(|_| bad())?,
                source_autoencoder: f[1].parse().map_err(|_| bad())?,
                mae_score: parse_scalar(f[2]).map_err(|_| bad())?,
            });
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(f).map_err(|e| Error::io(path, e))
    }
}
