//! Synthetic multi-user record streams driven by latent per-feature walks.
//!
//! Each user has one latent level per feature that drifts as a mean-reverting
//! random walk. Every emitted record picks a feature type at random; a
//! measurement reports the latent level plus noise, a target record reports a
//! linear function of the current latent levels plus noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::records::{DatasetSpec, Record, UserId, UserRecords, TARGET_FEATURE};
use crate::scalar::Scalar;

/// SplitMix64 finalizer; derives independent seeds from `(base, stream)`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureConfig {
    pub name: String,
    /// Population mean of the latent level.
    pub base_level: f64,
    /// Standard deviation of a user's own mean around `base_level`.
    pub user_spread: f64,
    /// Innovation standard deviation of the latent walk per record.
    pub walk_sd: f64,
    /// Measurement noise standard deviation.
    pub noise_sd: f64,
    /// Probability that a record measures this feature.
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub n_users: usize,
    pub features: Vec<FeatureConfig>,
    pub target_name: String,
    pub target_probability: f64,
    /// Inclusive range of records per user.
    pub records_per_user: (usize, usize),
    /// Target = `target_bias + sum_j target_weights[j] * latent_j + N(0, target_noise)`.
    pub target_weights: Vec<f64>,
    pub target_bias: f64,
    pub target_noise: f64,
    /// Pull of the latent walk towards the user's mean, in `[0, 1)`.
    pub reversion: f64,
    pub user_prefix: String,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn dataset_spec(&self, window: usize) -> Result<DatasetSpec> {
        DatasetSpec::new(
            self.features.iter().map(|f| f.name.clone()).collect(),
            self.target_name.clone(),
            window,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(Error::invalid("generator needs at least one feature"));
        }
        let probs = std::iter::once(self.target_probability).chain(self.features.iter().map(|f| f.probability));
        let mut sum = 0.0;
        for p in probs {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::invalid(format!("probability {p} outside (0, 1]")));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("record-type probabilities sum to {sum}, not 1")));
        }
        if self.target_weights.len() != self.features.len() {
            return Err(Error::invalid(format!(
                "{} target weights for {} features",
                self.target_weights.len(),
                self.features.len()
            )));
        }
        let (lo, hi) = self.records_per_user;
        if lo > hi {
            return Err(Error::invalid(format!("records_per_user range {lo}..={hi} is empty")));
        }
        if !(0.0..1.0).contains(&self.reversion) {
            return Err(Error::invalid(format!("reversion {} outside [0, 1)", self.reversion)));
        }
        let sds = self
            .features
            .iter()
            .flat_map(|f| [f.user_spread, f.walk_sd, f.noise_sd])
            .chain([self.target_noise]);
        for sd in sds {
            if !(sd >= 0.0 && sd.is_finite()) {
                return Err(Error::invalid(format!("standard deviation {sd} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    /// Rescales measurement probabilities so that they sum to `1 - target_probability`.
    pub fn normalize_probabilities(&mut self) {
        let total: f64 = self.features.iter().map(|f| f.probability).sum();
        let scale = (1.0 - self.target_probability) / total;
        for f in &mut self.features {
            f.probability *= scale;
        }
    }

    /// Sets all noise and drift to zero; targets become exact functions of the measurements.
    pub fn noiseless(mut self) -> Self {
        for f in &mut self.features {
            f.walk_sd = 0.0;
            f.noise_sd = 0.0;
        }
        self.target_noise = 0.0;
        self
    }
}

fn feature(name: &str, base: f64, spread: f64, walk: f64, noise: f64, p: f64) -> FeatureConfig {
    FeatureConfig {
        name: name.to_owned(),
        base_level: base,
        user_spread: spread,
        walk_sd: walk,
        noise_sd: noise,
        probability: p,
    }
}

/// Five predictors with well separated levels, frequent target records.
pub fn carevue_like(n_users: usize, seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        n_users,
        features: vec![
            feature("heart_rate", 72.0, 6.0, 1.0, 1.0, 0.17),
            feature("resp_rate", 18.0, 2.0, 0.3, 0.5, 0.17),
            feature("abp_mean", 140.0, 6.0, 1.0, 1.0, 0.17),
            feature("nbp_mean", 105.0, 6.0, 1.0, 1.0, 0.17),
            feature("temperature", 37.0, 0.4, 0.05, 0.1, 0.17),
        ],
        target_name: "spo2".into(),
        target_probability: 0.15,
        records_per_user: (60, 120),
        target_weights: vec![-0.3, -1.0, 0.2, 0.15, -2.0],
        target_bias: 158.0,
        target_noise: 0.5,
        reversion: 0.1,
        user_prefix: "cv".into(),
        seed,
    }
}

/// Four predictors shared with [`carevue_like`], measured at other rates and scales.
pub fn metavision_like(n_users: usize, seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        n_users,
        features: vec![
            feature("heart_rate", 78.0, 7.0, 1.2, 1.5, 0.26),
            feature("resp_rate", 20.0, 2.5, 0.4, 0.8, 0.22),
            feature("nbp_mean", 100.0, 7.0, 1.2, 1.5, 0.18),
            feature("abp_mean", 135.0, 7.0, 1.2, 1.5, 0.16),
        ],
        target_name: "spo2".into(),
        target_probability: 0.18,
        records_per_user: (50, 110),
        target_weights: vec![-0.3, -1.0, 0.15, 0.2],
        target_bias: 98.0,
        target_noise: 0.7,
        reversion: 0.1,
        user_prefix: "mv".into(),
        seed,
    }
}

/// Source and target configs of a heterogeneous pair (5 vs 4 features).
pub fn heterogeneous_pair(n_users: usize, seed: u64) -> (GeneratorConfig, GeneratorConfig) {
    (
        carevue_like(n_users, derive_seed(seed, 0)),
        metavision_like(n_users, derive_seed(seed, 1)),
    )
}

/// Target dataset whose features are noisy copies of the given source features.
///
/// `source_features` lists 0-based source feature indices, in target order.
pub fn noisy_copy_target(
    source: &GeneratorConfig,
    source_features: &[usize],
    extra_noise: f64,
    n_users: usize,
    seed: u64,
) -> Result<GeneratorConfig> {
    if source_features.is_empty() || source_features.iter().any(|&j| j >= source.features.len()) {
        return Err(Error::invalid(format!("bad source feature list {source_features:?}")));
    }
    let mut cfg = source.clone();
    cfg.n_users = n_users;
    cfg.seed = seed;
    cfg.user_prefix = format!("{}copy", source.user_prefix);
    cfg.features = source_features
        .iter()
        .map(|&j| {
            let mut f = source.features[j].clone();
            f.noise_sd = (f.noise_sd.powi(2) + extra_noise.powi(2)).sqrt();
            f
        })
        .collect();
    cfg.target_weights = source_features.iter().map(|&j| source.target_weights[j]).collect();
    cfg.normalize_probabilities();
    Ok(cfg)
}

fn normal(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("validated standard deviation")
}

/// Generates every user's records; user `i` depends only on `(seed, i)`.
pub fn generate<T: Scalar>(config: &GeneratorConfig) -> Result<Vec<UserRecords<T>>> {
    config.validate()?;
    let weights: Vec<f64> = std::iter::once(config.target_probability)
        .chain(config.features.iter().map(|f| f.probability))
        .collect();
    let picker = WeightedIndex::new(&weights).map_err(|e| Error::invalid(e.to_string()))?;
    let target_noise = normal(config.target_noise);

    (0..config.n_users)
        .map(|u| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, u as u64));
            let user_id = UserId(format!("{}{u:05}", config.user_prefix));
            let means: Vec<f64> = config
                .features
                .iter()
                .map(|f| f.base_level + normal(f.user_spread).sample(&mut rng))
                .collect();
            let mut latent = means.clone();
            let (lo, hi) = config.records_per_user;
            let count = rng.random_range(lo..=hi);
            let mut seq = 0u64;
            let mut records = Vec::with_capacity(count);
            for _ in 0..count {
                for (j, f) in config.features.iter().enumerate() {
                    latent[j] += config.reversion * (means[j] - latent[j]) + normal(f.walk_sd).sample(&mut rng);
                }
                seq += rng.random_range(1..=3);
                let feature_type = picker.sample(&mut rng);
                let value = if feature_type == TARGET_FEATURE {
                    let linear: f64 = config.target_weights.iter().zip(&latent).map(|(w, x)| w * x).sum();
                    config.target_bias + linear + target_noise.sample(&mut rng)
                } else {
                    let f = &config.features[feature_type - 1];
                    latent[feature_type - 1] + normal(f.noise_sd).sample(&mut rng)
                };
                records.push(Record {
                    user_id: user_id.clone(),
                    seq,
                    feature_type,
                    value: T::lit(value),
                });
            }
            Ok(UserRecords { user_id, records })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    CarevueLike,
    MetavisionLike,
    Pair,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "carevue-like" => Ok(Preset::CarevueLike),
            "metavision-like" => Ok(Preset::MetavisionLike),
            "pair" => Ok(Preset::Pair),
            other => Err(Error::invalid(format!(
                "unknown preset {other:?} (expected carevue-like, metavision-like or pair)"
            ))),
        }
    }
}
