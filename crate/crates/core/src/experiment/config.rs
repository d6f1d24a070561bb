//! Declarative experiment description and its key-value file format.
//!
//! ```text
//! # comment
//! variant = dsen
//! preset = pair
//! epochs = 100
//! ```
//!
//! Keys are listed in [`KEYS`]; unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{Variant, DEFAULT_HIDDEN};
use crate::nn::{AdamConfig, DEFAULT_SLOPE};
use crate::synth::Preset;

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("variant", "mlp | den | dsen | dsent"),
    ("preset", "synthetic data when `data` is unset: carevue-like | metavision-like | pair"),
    ("users", "users per synthetic dataset"),
    ("data", "target record CSV"),
    ("n_features", "predictor count of `data`"),
    ("feature_names", "comma-separated predictor names of `data`"),
    ("source_data", "source record CSV (ablation source model)"),
    ("source_n_features", "predictor count of `source_data`"),
    ("source_checkpoint", "trained source checkpoint for the dsent variant"),
    ("source_epochs", "epochs for training the ablation source model"),
    ("window", "window size W"),
    ("epochs", "training epochs"),
    ("learning_rate", "Adam learning rate"),
    ("batch_size", "mini-batch size"),
    ("lambda", "weight of the reconstruction terms"),
    ("slope", "LeakyReLU negative slope"),
    ("hidden", "comma-separated hidden widths of every sub-network"),
    ("mlp_hidden", "comma-separated hidden widths of the MLP baseline (default: parameter-matched)"),
    ("trials", "independent repetitions"),
    ("seed", "base seed for splits, initialization and shuffling"),
    ("reshuffle_splits", "draw a new user split per trial (true) or reuse one (false)"),
    ("min_target_records", "drop users with fewer target records"),
    ("normalize", "z-score predictors with training-split statistics"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub variant: Variant,
    pub preset: Preset,
    pub users: usize,
    pub data: Option<PathBuf>,
    pub n_features: Option<usize>,
    pub feature_names: Option<Vec<String>>,
    pub source_data: Option<PathBuf>,
    pub source_n_features: Option<usize>,
    pub source_checkpoint: Option<PathBuf>,
    pub source_epochs: Option<usize>,
    pub window: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub lambda: f64,
    pub slope: f64,
    pub hidden: Vec<usize>,
    pub mlp_hidden: Option<Vec<usize>>,
    pub trials: usize,
    pub seed: u64,
    pub reshuffle_splits: bool,
    pub min_target_records: usize,
    pub normalize: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            variant: Variant::Dsen,
            preset: Preset::Pair,
            users: 60,
            data: None,
            n_features: None,
            feature_names: None,
            source_data: None,
            source_n_features: None,
            source_checkpoint: None,
            source_epochs: None,
            window: 3,
            epochs: 100,
            learning_rate: 0.01,
            batch_size: 256,
            lambda: 1.0,
            slope: DEFAULT_SLOPE,
            hidden: DEFAULT_HIDDEN.to_vec(),
            mlp_hidden: None,
            trials: 10,
            seed: 0,
            reshuffle_splits: true,
            min_target_records: 5,
            normalize: false,
        }
    }
}

fn parse<V: std::str::FromStr>(key: &str, value: &str) -> Result<V> {
    value.parse().map_err(|_| Error::Config {
        key: key.to_owned(),
        msg: format!("cannot parse {value:?}"),
    })
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    let v: Vec<usize> = value
        .split(',')
        .map(|s| parse(key, s.trim()))
        .collect::<Result<_>>()?;
    if v.is_empty() || v.contains(&0) {
        return Err(Error::Config {
            key: key.to_owned(),
            msg: "widths must be positive".into(),
        });
    }
    Ok(v)
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn preset_name(p: Preset) -> &'static str {
    match p {
        Preset::CarevueLike => "carevue-like",
        Preset::MetavisionLike => "metavision-like",
        Preset::Pair => "pair",
    }
}

impl ExperimentConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            ..AdamConfig::default()
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let path = || PathBuf::from(value);
        match key {
            "variant" => {
                self.variant = value.parse().map_err(|e: Error| Error::Config {
                    key: key.into(),
                    msg: e.to_string(),
                })?
            }
            "preset" => {
                self.preset = value.parse().map_err(|e: Error| Error::Config {
                    key: key.into(),
                    msg: e.to_string(),
                })?
            }
            "users" => self.users = parse(key, value)?,
            "data" => self.data = Some(path()),
            "n_features" => self.n_features = Some(parse(key, value)?),
            "feature_names" => {
                self.feature_names = Some(value.split(',').map(|s| s.trim().to_owned()).collect())
            }
            "source_data" => self.source_data = Some(path()),
            "source_n_features" => self.source_n_features = Some(parse(key, value)?),
            "source_checkpoint" => self.source_checkpoint = Some(path()),
            "source_epochs" => self.source_epochs = Some(parse(key, value)?),
            "window" => self.window = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "slope" => self.slope = parse(key, value)?,
            "hidden" => self.hidden = parse_list(key, value)?,
            "mlp_hidden" => self.mlp_hidden = Some(parse_list(key, value)?),
            "trials" => self.trials = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "reshuffle_splits" => self.reshuffle_splits = parse(key, value)?,
            "min_target_records" => self.min_target_records = parse(key, value)?,
            "normalize" => self.normalize = parse(key, value)?,
            _ => {
                return Err(Error::Config {
                    key: key.to_owned(),
                    msg: "unknown key".into(),
                })
            }
        }
        Ok(())
    }

    /// Applies `key=value` overrides.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let o = o.as_ref();
            let (k, v) = o.split_once('=').ok_or_else(|| Error::Config {
                key: o.to_owned(),
                msg: "override must look like key=value".into(),
            })?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                key: line.to_owned(),
                msg: format!("line {}: expected `key = value`", i + 1),
            })?;
            cfg.set(k.trim(), v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse_str(&text)?;
        // relative data paths are relative to the config file
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.data, &mut cfg.source_data, &mut cfg.source_checkpoint].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| {
            Err(Error::Config {
                key: key.to_owned(),
                msg: msg.to_owned(),
            })
        };
        if self.window == 0 {
            return bad("window", "must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs", "must be at least 1");
        }
        if self.trials == 0 {
            return bad("trials", "must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", "must be positive");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda", "must be >= 0");
        }
        if self.data.is_some() && self.n_features.is_none() {
            return bad("n_features", "required when `data` is set");
        }
        if self.source_data.is_some() && self.source_n_features.is_none() {
            return bad("source_n_features", "required when `source_data` is set");
        }
        if let (Some(n), Some(names)) = (self.n_features, &self.feature_names) {
            if names.len() != n {
                return bad("feature_names", "count differs from n_features");
            }
        }
        Ok(())
    }

    /// Checks the source-checkpoint rule of a single-variant run: dsent needs one, others must not have one.
    pub fn validate_for_training(&self) -> Result<()> {
        self.validate()?;
        match (self.variant, &self.source_checkpoint) {
            (Variant::Dsent, None) => Err(Error::Config {
                key: "source_checkpoint".into(),
                msg: "required for the dsent variant".into(),
            }),
            (v, Some(_)) if v != Variant::Dsent => Err(Error::Config {
                key: "source_checkpoint".into(),
                msg: format!("only valid for the dsent variant, not {v}"),
            }),
            _ => Ok(()),
        }
    }

    /// Every setting as sorted key/value strings, echoed into reports.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_owned(), v);
        };
        let show = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        put("variant", self.variant.to_string());
        put("preset", preset_name(self.preset).into());
        put("users", self.users.to_string());
        put("data", show(&self.data));
        put("n_features", self.n_features.map(|n| n.to_string()).unwrap_or_default());
        put("feature_names", self.feature_names.as_ref().map(|v| v.join(",")).unwrap_or_default());
        put("source_data", show(&self.source_data));
        put("source_n_features", self.source_n_features.map(|n| n.to_string()).unwrap_or_default());
        put("source_checkpoint", show(&self.source_checkpoint));
        put("source_epochs", self.source_epochs.map(|n| n.to_string()).unwrap_or_default());
        put("window", self.window.to_string());
        put("epochs", self.epochs.to_string());
        put("learning_rate", self.learning_rate.to_string());
        put("batch_size", self.batch_size.to_string());
        put("lambda", self.lambda.to_string());
        put("slope", self.slope.to_string());
        put("hidden", join(&self.hidden));
        put("mlp_hidden", self.mlp_hidden.as_deref().map(join).unwrap_or_default());
        put("trials", self.trials.to_string());
        put("seed", self.seed.to_string());
        put("reshuffle_splits", self.reshuffle_splits.to_string());
        put("min_target_records", self.min_target_records.to_string());
        put("normalize", self.normalize.to_string());
        m
    }
}
