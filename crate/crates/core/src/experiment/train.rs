use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::nn::{AdamConfig, AdamState, Params};
use crate::scalar::Scalar;
use crate::transfer::SampleSet;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub shuffle_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training objective over the epoch's mini-batches.
    pub train_loss: f64,
    pub valid_mse: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    pub best_model: Model<T>,
    pub best_epoch: usize,
    pub best_valid_mse: f64,
    /// Training objective of the initial model over the whole training set.
    pub initial_train_loss: f64,
    pub curve: Vec<EpochRecord>,
}

/// Mean squared prediction error in label units.
pub fn evaluate<T: Scalar>(model: &Model<T>, set: &SampleSet<T>) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::invalid(format!("empty {:?} split", set.role)));
    }
    let mut total = 0.0;
    for s in &set.samples {
        let d = (model.predict(s)? - s.label()).to_f64_lossy();
        total += d * d;
    }
    Ok(total / set.len() as f64)
}

/// Mean training objective (prediction MSE plus weighted reconstruction terms).
pub fn mean_objective<T: Scalar>(model: &Model<T>, set: &SampleSet<T>) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::invalid(format!("empty {:?} split", set.role)));
    }
    let mut total = 0.0;
    for s in &set.samples {
        total += model.objective(s)?.to_f64_lossy();
    }
    Ok(total / set.len() as f64)
}

/// Runs one epoch of shuffled mini-batch Adam; returns the mean batch objective.
fn run_epoch<T: Scalar>(
    model: &mut Model<T>,
    grads: &mut Model<T>,
    adam: &mut AdamState<T>,
    train: &SampleSet<T>,
    order: &[usize],
    batch_size: usize,
) -> Result<f64> {
    let mut loss_sum = 0.0;
    let mut batches = 0usize;
    for batch in order.chunks(batch_size) {
        grads.fill_zero();
        let scale = T::one() / T::from_usize(batch.len()).unwrap();
        let mut batch_loss = 0.0;
        for &i in batch {
            batch_loss += model.accumulate_gradient(&train.samples[i], scale, grads)?.to_f64_lossy();
        }
        batch_loss /= batch.len() as f64;
        if !batch_loss.is_finite() {
            return Ok(f64::NAN);
        }
        adam.step(model.tensors_mut(), grads.tensors())?;
        loss_sum += batch_loss;
        batches += 1;
    }
    Ok(loss_sum / batches as f64)
}

/// Trains with save-best selection on validation prediction MSE.
pub fn train<T: Scalar>(
    model: Model<T>,
    train: &SampleSet<T>,
    valid: &SampleSet<T>,
    config: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    if valid.is_empty() {
        return Err(Error::invalid("empty validation split"));
    }
    train_with_scorer(model, train, config, &mut |_, m| evaluate(m, valid))
}

/// Like [`train`] but the per-epoch selection score comes from `scorer(epoch, model)`.
///
/// The returned model is the one with the lowest score; on equal scores the
/// earlier epoch wins.
pub fn train_with_scorer<T: Scalar>(
    mut model: Model<T>,
    train: &SampleSet<T>,
    config: &TrainConfig,
    scorer: &mut dyn FnMut(usize, &Model<T>) -> Result<f64>,
) -> Result<TrainOutcome<T>> {
    if train.is_empty() {
        return Err(Error::invalid("empty training split"));
    }
    if config.epochs == 0 || config.batch_size == 0 {
        return Err(Error::invalid("epochs and batch_size must be positive"));
    }
    let initial_train_loss = mean_objective(&model, train)?;
    let mut grads = model.zeros_like();
    let mut adam = AdamState::new(config.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(config.shuffle_seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best: Option<(usize, f64, Model<T>)> = None;
    let mut curve = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let train_loss = run_epoch(&mut model, &mut grads, &mut adam, train, &order, config.batch_size)?;
        if !train_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let valid_mse = scorer(epoch, &model)?;
        if !valid_mse.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        curve.push(EpochRecord {
            epoch,
            train_loss,
            valid_mse,
        });
        if best.as_ref().is_none_or(|(_, b, _)| valid_mse < *b) {
            best = Some((epoch, valid_mse, model.clone()));
        }
    }
    let (best_epoch, best_valid_mse, best_model) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        best_model,
        best_epoch,
        best_valid_mse,
        initial_train_loss,
        curve,
    })
}
