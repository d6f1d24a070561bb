//! Record data model, CSV ingestion, user filtering and user-level splits.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{parse_scalar, Scalar};

/// Header line of the record CSV.
pub const CSV_HEADER: [&str; 4] = ["user_id", "seq", "feature_type", "value"];

/// Feature type reserved for the prediction target.
pub const TARGET_FEATURE: usize = 0;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub String);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for UserId {
    fn from(s: &str) -> Self {
        UserId(s.to_owned())
    }
}

/// One measurement event. `feature_type == 0` is the prediction target.
#[derive(Clone, Debug, PartialEq)]
pub struct Record<T> {
    pub user_id: UserId,
    pub seq: u64,
    pub feature_type: usize,
    pub value: T,
}

impl<T: Scalar> Record<T> {
    pub fn is_target(&self) -> bool {
        self.feature_type == TARGET_FEATURE
    }
}

/// All records of one user in collection order.
#[derive(Clone, Debug, PartialEq)]
pub struct UserRecords<T> {
    pub user_id: UserId,
    pub records: Vec<Record<T>>,
}

impl<T: Scalar> UserRecords<T> {
    pub fn target_count(&self) -> usize {
        self.records.iter().filter(|r| r.is_target()).count()
    }

    /// Checks that `seq` is strictly increasing and feature types lie in `0..=n_features`.
    pub fn validate(&self, n_features: usize) -> Result<()> {
        for pair in self.records.windows(2) {
            if pair[1].seq <= pair[0].seq {
                return Err(Error::invalid(format!(
                    "user {}: seq {} does not follow {}",
                    self.user_id, pair[1].seq, pair[0].seq
                )));
            }
        }
        if let Some(r) = self.records.iter().find(|r| r.feature_type > n_features) {
            return Err(Error::invalid(format!(
                "user {}: feature_type {} outside 0..={n_features}",
                self.user_id, r.feature_type
            )));
        }
        Ok(())
    }
}

/// Shape of a dataset: `n_features` predictors plus one target, windowed by `window`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub n_features: usize,
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub window: usize,
}

impl DatasetSpec {
    pub fn new(
        feature_names: Vec<String>,
        target_name: impl Into<String>,
        window: usize,
    ) -> Result<Self> {
        let spec = DatasetSpec {
            n_features: feature_names.len(),
            feature_names,
            target_name: target_name.into(),
            window,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Spec with generated names `f1..fN` and target `target`.
    pub fn anonymous(n_features: usize, window: usize) -> Result<Self> {
        Self::new(
            (1..=n_features).map(|j| format!("f{j}")).collect(),
            "target",
            window,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::invalid("window must be at least 1"));
        }
        if self.n_features == 0 {
            return Err(Error::invalid("n_features must be at least 1"));
        }
        if self.feature_names.len() != self.n_features {
            return Err(Error::invalid(format!(
                "{} feature names for {} features",
                self.feature_names.len(),
                self.n_features
            )));
        }
        let distinct: BTreeSet<&String> = self.feature_names.iter().collect();
        if distinct.len() != self.feature_names.len() {
            return Err(Error::invalid("feature names must be distinct"));
        }
        Ok(())
    }
}

/// Reads a record CSV, grouping rows by user in order of first appearance.
pub fn ingest_csv<T: Scalar>(path: &Path, spec: &DatasetSpec) -> Result<Vec<UserRecords<T>>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, path, spec)
}

pub fn read_csv<T: Scalar, R: std::io::Read>(
    reader: R,
    path: &Path,
    spec: &DatasetSpec,
) -> Result<Vec<UserRecords<T>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let parse_err = |line: u64, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };

    let mut groups: Vec<UserRecords<T>> = Vec::new();
    let mut index: HashMap<UserId, usize> = HashMap::new();
    let mut saw_header = false;

    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if !saw_header {
            saw_header = true;
            let fields: Vec<&str> = row.iter().collect();
            if fields != CSV_HEADER {
                return Err(parse_err(
                    line,
                    format!("expected header {:?}, found {fields:?}", CSV_HEADER.join(",")),
                ));
            }
            continue;
        }
        if row.len() != 4 {
            return Err(parse_err(line, format!("expected 4 fields, found {}", row.len())));
        }
        let user_id = UserId(row[0].to_owned());
        if user_id.0.is_empty() {
            return Err(parse_err(line, "empty user_id".into()));
        }
        let seq: u64 = row[1]
            .parse()
            .map_err(|_| parse_err(line, format!("seq is not a nonnegative integer: {:?}", &row[1])))?;
        let feature_type: usize = row[2]
            .parse()
            .map_err(|_| parse_err(line, format!("feature_type is not an integer: {:?}", &row[2])))?;
        if feature_type > spec.n_features {
            return Err(parse_err(
                line,
                format!("feature_type {feature_type} outside 0..={}", spec.n_features),
            ));
        }
        let value: T = parse_scalar(&row[3]).map_err(|m| parse_err(line, m))?;
        if !value.is_finite() {
            return Err(parse_err(line, format!("non-finite value {:?}", &row[3])));
        }

        let slot = *index.entry(user_id.clone()).or_insert_with(|| {
            groups.push(UserRecords {
                user_id: user_id.clone(),
                records: Vec::new(),
            });
            groups.len() - 1
        });
        let group = &mut groups[slot];
        if let Some(prev) = group.records.last() {
            if seq <= prev.seq {
                return Err(parse_err(
                    line,
                    format!("seq {seq} for user {user_id} does not follow {}", prev.seq),
                ));
            }
        }
        group.records.push(Record {
            user_id,
            seq,
            feature_type,
            value,
        });
    }
    Ok(groups)
}

/// Writes records in the CSV format read by [`ingest_csv`].
pub fn write_csv<T: Scalar, W: Write>(out: W, groups: &[UserRecords<T>]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(out);
    writeln!(w, "{}", CSV_HEADER.join(","))?;
    for g in groups {
        for r in &g.records {
            writeln!(w, "{},{},{},{}", r.user_id, r.seq, r.feature_type, r.value)?;
        }
    }
    w.flush()
}

pub fn save_csv<T: Scalar>(path: &Path, groups: &[UserRecords<T>]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(file, groups).map_err(|e| Error::io(path, e))
}

/// Keeps users with at least `min_target_records` target records.
pub fn filter_users<T: Scalar>(
    groups: Vec<UserRecords<T>>,
    min_target_records: usize,
) -> Vec<UserRecords<T>> {
    groups
        .into_iter()
        .filter(|g| g.target_count() >= min_target_records)
        .collect()
}

/// Disjoint train / validation / test user sets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserSplit {
    pub train_users: BTreeSet<UserId>,
    pub valid_users: BTreeSet<UserId>,
    pub test_users: BTreeSet<UserId>,
}

impl UserSplit {
    pub fn role_of(&self, user: &UserId) -> Option<SplitRole> {
        if self.train_users.contains(user) {
            Some(SplitRole::Train)
        } else if self.valid_users.contains(user) {
            Some(SplitRole::Valid)
        } else if self.test_users.contains(user) {
            Some(SplitRole::Test)
        } else {
            None
        }
    }

    pub fn users(&self, role: SplitRole) -> &BTreeSet<UserId> {
        match role {
            SplitRole::Train => &self.train_users,
            SplitRole::Valid => &self.valid_users,
            SplitRole::Test => &self.test_users,
        }
    }

    /// Order-independent fingerprint of the split, used to show that variants share data.
    pub fn fingerprint(&self) -> String {
        // FNV-1a over the three sorted user lists.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for (tag, set) in [(b'T', &self.train_users), (b'V', &self.valid_users), (b'S', &self.test_users)] {
            for byte in std::iter::once(tag).chain(set.iter().flat_map(|u| u.0.bytes().chain([0u8]))) {
                h ^= u64::from(byte);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        format!("{h:016x}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitRole {
    Train,
    Valid,
    Test,
}

pub const DEFAULT_FRACTIONS: (f64, f64, f64) = (0.6, 0.2, 0.2);

/// Shuffles `user_ids` with `seed` and cuts it into train / validation / test.
///
/// Train and validation sizes are `floor(fraction * n)`; the remainder goes to test.
pub fn split_users(user_ids: &[UserId], fractions: (f64, f64, f64), seed: u64) -> Result<UserSplit> {
    if user_ids.is_empty() {
        return Err(Error::invalid("cannot split an empty user list"));
    }
    let (ft, fv, fs) = fractions;
    if [ft, fv, fs].iter().any(|f| !(0.0..=1.0).contains(f)) || (ft + fv + fs - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "split fractions {fractions:?} must be in [0, 1] and sum to 1"
        )));
    }
    let mut order: Vec<&UserId> = user_ids.iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let n = order.len();
    let n_train = (ft * n as f64).floor() as usize;
    let n_valid = ((fv * n as f64).floor() as usize).min(n - n_train);
    let take = |range: std::ops::Range<usize>| order[range].iter().map(|u| (*u).clone()).collect();
    Ok(UserSplit {
        train_users: take(0..n_train),
        valid_users: take(n_train..n_train + n_valid),
        test_users: take(n_train + n_valid..n),
    })
}
