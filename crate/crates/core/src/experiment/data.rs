//! Turning record groups into per-split sample sets.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::featurize::{paired_featurize, Sample};
use crate::nn::Checkpoint;
use crate::records::{filter_users, split_users, DatasetSpec, SplitRole, UserId, UserRecords, UserSplit, DEFAULT_FRACTIONS};
use crate::scalar::Scalar;
use crate::transfer::SampleSet;

/// Filtered users of one dataset.
#[derive(Clone, Debug)]
pub struct Dataset<T> {
    pub spec: DatasetSpec,
    pub users: Vec<UserRecords<T>>,
}

impl<T: Scalar> Dataset<T> {
    /// Validates every user against `spec` and drops users with too few targets.
    pub fn new(spec: DatasetSpec, users: Vec<UserRecords<T>>, min_target_records: usize) -> Result<Self> {
        spec.validate()?;
        for u in &users {
            u.validate(spec.n_features)?;
        }
        Ok(Dataset {
            users: filter_users(users, min_target_records),
            spec,
        })
    }

    pub fn user_ids(&self) -> Vec<UserId> {
        self.users.iter().map(|u| u.user_id.clone()).collect()
    }
}

/// Per-feature z-scoring fitted on training users.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalization<T> {
    pub mean: Vec<T>,
    pub sd: Vec<T>,
    /// Users whose records produced the statistics.
    pub fitted_users: BTreeSet<UserId>,
}

impl<T: Scalar> Normalization<T> {
    pub fn fit(users: &[&UserRecords<T>], n_features: usize) -> Self {
        let mut sum = vec![0.0f64; n_features];
        let mut sq = vec![0.0f64; n_features];
        let mut count = vec![0usize; n_features];
        for u in users {
            for r in u.records.iter().filter(|r| !r.is_target()) {
                let j = r.feature_type - 1;
                let v = r.value.to_f64_lossy();
                sum[j] += v;
                sq[j] += v * v;
                count[j] += 1;
            }
        }
        let mut mean = Vec::with_capacity(n_features);
        let mut sd = Vec::with_capacity(n_features);
        for j in 0..n_features {
            let n = count[j].max(1) as f64;
            let m = sum[j] / n;
            let var = (sq[j] / n - m * m).max(0.0);
            mean.push(T::lit(m));
            // constant or unseen features keep their scale
            sd.push(T::lit(if var > 0.0 { var.sqrt() } else { 1.0 }));
        }
        Normalization {
            mean,
            sd,
            fitted_users: users.iter().map(|u| u.user_id.clone()).collect(),
        }
    }

    /// Stores the statistics in checkpoint metadata so a saved model can be evaluated on raw records.
    pub fn write_meta(&self, ck: &mut Checkpoint<T>) {
        let join = |v: &[T]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        ck.set_meta("norm_mean", join(&self.mean));
        ck.set_meta("norm_sd", join(&self.sd));
    }

    /// Statistics stored by [`Normalization::write_meta`], if any.
    pub fn from_meta(ck: &Checkpoint<T>) -> Result<Option<Self>> {
        let (Some(mean), Some(sd)) = (ck.meta.get("norm_mean"), ck.meta.get("norm_sd")) else {
            return Ok(None);
        };
        let parse = |s: &str| -> Result<Vec<T>> {
            s.split(',')
                .map(|x| x.parse::<T>().map_err(|_| Error::Corrupt(format!("bad normalization value {x:?}"))))
                .collect()
        };
        let (mean, sd) = (parse(mean)?, parse(sd)?);
        if mean.len() != sd.len() {
            return Err(Error::Corrupt("normalization mean and sd lengths differ".into()));
        }
        Ok(Some(Normalization {
            mean,
            sd,
            fitted_users: BTreeSet::new(),
        }))
    }

    pub fn apply(&self, user: &UserRecords<T>) -> UserRecords<T> {
        let mut out = user.clone();
        for r in out.records.iter_mut().filter(|r| !r.is_target()) {
            let j = r.feature_type - 1;
            r.value = (r.value - self.mean[j]) / self.sd[j];
        }
        out
    }
}

/// Featurized train / validation / test sets of one trial.
#[derive(Clone, Debug)]
pub struct PreparedSplits<T> {
    pub split: UserSplit,
    pub train: SampleSet<T>,
    pub valid: SampleSet<T>,
    pub test: SampleSet<T>,
    pub normalization: Option<Normalization<T>>,
}

impl<T: Scalar> PreparedSplits<T> {
    pub fn set(&self, role: SplitRole) -> &SampleSet<T> {
        match role {
            SplitRole::Train => &self.train,
            SplitRole::Valid => &self.valid,
            SplitRole::Test => &self.test,
        }
    }
}

/// Splits users with `split_seed`, optionally normalizes, and featurizes every user.
pub fn prepare<T: Scalar>(dataset: &Dataset<T>, split_seed: u64, normalize: bool) -> Result<PreparedSplits<T>> {
    let split = split_users(&dataset.user_ids(), DEFAULT_FRACTIONS, split_seed)?;
    let normalization = if normalize {
        let train_users: Vec<&UserRecords<T>> = dataset
            .users
            .iter()
            .filter(|u| split.train_users.contains(&u.user_id))
            .collect();
        Some(Normalization::fit(&train_users, dataset.spec.n_features))
    } else {
        None
    };

    let mut sets: [Vec<Sample<T>>; 3] = Default::default();
    for user in &dataset.users {
        let role = split
            .role_of(&user.user_id)
            .ok_or_else(|| Error::invalid(format!("user {} missing from split", user.user_id)))?;
        let samples = match &normalization {
            Some(n) => paired_featurize(&n.apply(user), &dataset.spec),
            None => paired_featurize(user, &dataset.spec),
        };
        let slot = match role {
            SplitRole::Train => 0,
            SplitRole::Valid => 1,
            SplitRole::Test => 2,
        };
        sets[slot].extend(samples);
    }
    let [train, valid, test] = sets;
    Ok(PreparedSplits {
        split,
        train: SampleSet { role: SplitRole::Train, samples: train },
        valid: SampleSet { role: SplitRole::Valid, samples: valid },
        test: SampleSet { role: SplitRole::Test, samples: test },
        normalization,
    })
}
