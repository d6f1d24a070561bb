//! Training runs, repeated trials and the four-variant ablation.
//!
//! Every trial derives its split, initialization and shuffling seeds from the
//! base seed and the trial index, so variants compared within one trial see the
//! same users and the whole report is a function of the configuration.

mod config;
mod data;
mod report;
mod train;

pub use config::{ExperimentConfig, KEYS};
pub use data::{prepare, Dataset, Normalization, PreparedSplits};
pub use report::{
    AblationReport, AblationRow, Aggregate, MetricsReport, SourceSummary, TrialReport, TrialStatus, REPORT_SCHEMA,
};
pub use train::{evaluate, mean_objective, train, train_with_scorer, EpochRecord, TrainConfig, TrainOutcome};

use crate::error::{Error, Result};
use crate::model::{htps_param_count, parity_baseline_dims, subnet_dims, HtpsConfig, HtpsModel, Model, Variant};
use crate::nn::{init_mlp, Checkpoint, Params};
use crate::records::{ingest_csv, DatasetSpec};
use crate::scalar::Scalar;
use crate::synth::{carevue_like, derive_seed, generate, heterogeneous_pair, metavision_like, Preset};
use crate::transfer::{apply_plan, build_plan_from_split, SampleSet, TransferPlan};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialSeeds {
    pub split_seed: u64,
    pub init_seed: u64,
    pub shuffle_seed: u64,
}

pub fn trial_seeds(cfg: &ExperimentConfig, trial: usize) -> TrialSeeds {
    let k = trial as u64;
    let split_seed = if cfg.reshuffle_splits {
        derive_seed(cfg.seed, 1_000 + k)
    } else {
        derive_seed(cfg.seed, 1_000)
    };
    TrialSeeds {
        split_seed,
        init_seed: derive_seed(cfg.seed, 2_000 + k),
        shuffle_seed: derive_seed(cfg.seed, 3_000 + k),
    }
}

/// A trained composite model used as a transfer source.
#[derive(Clone, Debug)]
pub struct SourceModel<T> {
    pub model: HtpsModel<T>,
    pub id: String,
}

impl<T: Scalar> SourceModel<T> {
    pub fn from_checkpoint(ck: &Checkpoint<T>, id: impl Into<String>) -> Result<Self> {
        match Model::from_checkpoint(ck)? {
            Model::Htps { model, .. } => Ok(SourceModel { model, id: id.into() }),
            Model::Mlp(_) => Err(Error::invalid("a transfer source must be a composite model, not mlp")),
        }
    }
}

pub fn htps_config(cfg: &ExperimentConfig, n_features: usize, use_sparse: bool) -> HtpsConfig {
    HtpsConfig {
        window: cfg.window,
        n_features,
        hidden: cfg.hidden.clone(),
        use_sparse,
        lambda: cfg.lambda,
        slope: cfg.slope,
    }
}

/// Widths of the MLP baseline: explicit `mlp_hidden`, or matched to the full model's size.
pub fn baseline_widths(cfg: &ExperimentConfig, n_features: usize) -> Vec<usize> {
    match &cfg.mlp_hidden {
        Some(h) => subnet_dims(cfg.window * n_features, h),
        None => parity_baseline_dims(
            cfg.window,
            n_features,
            &cfg.hidden,
            htps_param_count(&htps_config(cfg, n_features, true)),
        ),
    }
}

/// Fresh model for `variant`; dsent also builds and applies a transfer plan from `train`.
pub fn build_model<T: Scalar>(
    variant: Variant,
    cfg: &ExperimentConfig,
    spec: &DatasetSpec,
    init_seed: u64,
    source: Option<&SourceModel<T>>,
    train: &SampleSet<T>,
) -> Result<(Model<T>, Option<TransferPlan<T>>)> {
    let n = spec.n_features;
    match variant {
        Variant::Mlp => Ok((Model::Mlp(init_mlp(&baseline_widths(cfg, n), T::lit(cfg.slope), init_seed)?), None)),
        Variant::Den | Variant::Dsen => {
            let model = HtpsModel::init(&htps_config(cfg, n, variant.uses_sparse()), init_seed)?;
            Ok((Model::Htps { variant, model }, None))
        }
        Variant::Dsent => {
            let source = source.ok_or_else(|| Error::Config {
                key: "source_checkpoint".into(),
                msg: "the dsent variant needs a source model".into(),
            })?;
            // same initialization as dsen for the parts that are not transferred
            let fresh = HtpsModel::init(&htps_config(cfg, n, true), init_seed)?;
            let plan = build_plan_from_split(&source.model, train, n, &source.id)?;
            let model = apply_plan(&plan, &source.model, fresh)?;
            Ok((Model::Htps { variant, model }, Some(plan)))
        }
    }
}

/// Best model of one trial plus its report entry.
pub struct TrialResult<T> {
    pub report: TrialReport,
    pub checkpoint: Option<Checkpoint<T>>,
    pub plan: Option<TransferPlan<T>>,
}

pub fn run_trial<T: Scalar>(
    cfg: &ExperimentConfig,
    variant: Variant,
    dataset: &Dataset<T>,
    trial: usize,
    source: Option<&SourceModel<T>>,
) -> Result<TrialResult<T>> {
    let seeds = trial_seeds(cfg, trial);
    let splits = prepare(dataset, seeds.split_seed, cfg.normalize)?;
    for (name, set) in [("training", &splits.train), ("validation", &splits.valid), ("test", &splits.test)] {
        if set.is_empty() {
            return Err(Error::invalid(format!(
                "{name} split has no samples (users: {}); generate more users or lower the window",
                dataset.users.len()
            )));
        }
    }
    let (model, plan) = build_model(variant, cfg, &dataset.spec, seeds.init_seed, source, &splits.train)?;
    let train_cfg = TrainConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        adam: cfg.adam(),
        shuffle_seed: seeds.shuffle_seed,
    };
    let mut report = TrialReport {
        trial,
        split_seed: seeds.split_seed,
        init_seed: seeds.init_seed,
        split_hash: splits.split.fingerprint(),
        status: TrialStatus::Ok,
        diverged_epoch: None,
        best_epoch: None,
        best_valid_mse: None,
        test_mse: None,
        initial_train_loss: None,
        n_train: splits.train.len(),
        n_valid: splits.valid.len(),
        n_test: splits.test.len(),
        curve: Vec::new(),
    };
    match train(model, &splits.train, &splits.valid, &train_cfg) {
        Ok(out) => {
            report.best_epoch = Some(out.best_epoch);
            report.best_valid_mse = Some(out.best_valid_mse);
            report.initial_train_loss = Some(out.initial_train_loss);
            report.test_mse = Some(evaluate(&out.best_model, &splits.test)?);
            report.curve = out.curve;
            let mut ck = out.best_model.to_checkpoint();
            ck.set_meta("epoch", out.best_epoch);
            ck.set_meta("valid_mse", out.best_valid_mse);
            ck.set_meta("split_seed", seeds.split_seed);
            ck.set_meta("init_seed", seeds.init_seed);
            ck.set_meta("trial", trial);
            if let Some(n) = &splits.normalization {
                n.write_meta(&mut ck);
            }
            if let Some(s) = source.filter(|_| variant == Variant::Dsent) {
                ck.set_meta("transfer_source", &s.id);
            }
            Ok(TrialResult {
                report,
                checkpoint: Some(ck),
                plan,
            })
        }
        Err(Error::Diverged { epoch }) => {
            report.status = TrialStatus::Diverged;
            report.diverged_epoch = Some(epoch);
            Ok(TrialResult {
                report,
                checkpoint: None,
                plan,
            })
        }
        Err(e) => Err(e),
    }
}

pub struct RunOutput<T> {
    pub report: MetricsReport,
    /// Best checkpoint per trial (`None` for diverged trials).
    pub checkpoints: Vec<Option<Checkpoint<T>>>,
}

fn variant_parameters(cfg: &ExperimentConfig, variant: Variant, n_features: usize) -> usize {
    match variant {
        Variant::Mlp => crate::model::dims_param_count(&baseline_widths(cfg, n_features)),
        v => htps_param_count(&htps_config(cfg, n_features, v.uses_sparse())),
    }
}

/// Runs `cfg.trials` independent trials of `variant`.
pub fn run_trials<T: Scalar>(
    cfg: &ExperimentConfig,
    variant: Variant,
    dataset: &Dataset<T>,
    source: Option<&SourceModel<T>>,
) -> Result<RunOutput<T>> {
    if cfg.trials == 0 {
        return Err(Error::Config {
            key: "trials".into(),
            msg: "must be at least 1".into(),
        });
    }
    let mut trials = Vec::with_capacity(cfg.trials);
    let mut checkpoints = Vec::with_capacity(cfg.trials);
    for k in 0..cfg.trials {
        let r = run_trial(cfg, variant, dataset, k, source)?;
        trials.push(r.report);
        checkpoints.push(r.checkpoint);
    }
    let mut echo = cfg.echo();
    echo.insert("variant".into(), variant.to_string());
    Ok(RunOutput {
        report: MetricsReport {
            schema: REPORT_SCHEMA.into(),
            variant,
            config: echo,
            parameters: variant_parameters(cfg, variant, dataset.spec.n_features),
            aggregate: Aggregate::from_trials(&trials),
            trials,
        },
        checkpoints,
    })
}

/// Target dataset and, when available, the source dataset described by `cfg`.
pub fn load_datasets<T: Scalar>(cfg: &ExperimentConfig) -> Result<(Dataset<T>, Option<Dataset<T>>)> {
    let from_csv = |path: &std::path::Path, n: usize, names: Option<&Vec<String>>| -> Result<Dataset<T>> {
        let spec = match names {
            Some(names) => DatasetSpec::new(names.clone(), "target", cfg.window)?,
            None => DatasetSpec::anonymous(n, cfg.window)?,
        };
        let users = ingest_csv(path, &spec)?;
        Dataset::new(spec, users, cfg.min_target_records)
    };
    let from_gen = |g: crate::synth::GeneratorConfig| -> Result<Dataset<T>> {
        Dataset::new(g.dataset_spec(cfg.window)?, generate(&g)?, cfg.min_target_records)
    };

    let (pair_source, pair_target) = heterogeneous_pair(cfg.users, cfg.seed);
    let target = match &cfg.data {
        Some(path) => from_csv(path, cfg.n_features.unwrap_or(0), cfg.feature_names.as_ref())?,
        None => match cfg.preset {
            Preset::Pair => from_gen(pair_target)?,
            Preset::CarevueLike => from_gen(carevue_like(cfg.users, cfg.seed))?,
            Preset::MetavisionLike => from_gen(metavision_like(cfg.users, cfg.seed))?,
        },
    };
    let source = match &cfg.source_data {
        Some(path) => Some(from_csv(path, cfg.source_n_features.unwrap_or(0), None)?),
        None if cfg.data.is_none() && cfg.preset == Preset::Pair => Some(from_gen(pair_source)?),
        None => None,
    };
    Ok((target, source))
}

/// Trains the composite model (with sparse path) on the source dataset.
pub fn train_source<T: Scalar>(
    cfg: &ExperimentConfig,
    source: &Dataset<T>,
    id: &str,
) -> Result<(SourceModel<T>, Checkpoint<T>, SourceSummary)> {
    let mut source_cfg = cfg.clone();
    source_cfg.epochs = cfg.source_epochs.unwrap_or(cfg.epochs);
    source_cfg.seed = derive_seed(cfg.seed, 9_000);
    let result = run_trial(&source_cfg, Variant::Dsen, source, 0, None)?;
    let ck = result.checkpoint.ok_or(Error::Diverged {
        epoch: result.report.diverged_epoch.unwrap_or(0),
    })?;
    let model = SourceModel::from_checkpoint(&ck, id)?;
    let summary = SourceSummary {
        checkpoint: id.to_owned(),
        n_features: source.spec.n_features,
        best_epoch: result.report.best_epoch.unwrap_or(0),
        valid_mse: result.report.best_valid_mse.unwrap_or(f64::NAN),
        test_mse: result.report.test_mse,
    };
    Ok((model, ck, summary))
}

pub struct AblationOutput<T> {
    pub report: AblationReport,
    pub source_checkpoint: Option<Checkpoint<T>>,
    /// Per variant (in [`Variant::ALL`] order), the best checkpoint of each trial.
    pub checkpoints: Vec<(Variant, Vec<Option<Checkpoint<T>>>)>,
}

pub const SOURCE_CHECKPOINT_NAME: &str = "source.ckpt";

/// Runs mlp, den, dsen and dsent on identical trials.
///
/// The dsent leg uses `source` when given; otherwise it trains a source model
/// on `source_data`; with neither it is skipped and the row says so.
pub fn run_ablation<T: Scalar>(
    cfg: &ExperimentConfig,
    target: &Dataset<T>,
    source_data: Option<&Dataset<T>>,
    source: Option<SourceModel<T>>,
) -> Result<AblationOutput<T>> {
    let mut source_checkpoint = None;
    let mut source_summary = None;
    let source = match (source, source_data) {
        (Some(s), _) => Some(s),
        (None, Some(ds)) => {
            let (model, ck, summary) = train_source(cfg, ds, SOURCE_CHECKPOINT_NAME)?;
            source_checkpoint = Some(ck);
            source_summary = Some(summary);
            Some(model)
        }
        (None, None) => None,
    };
    if let Some(s) = &source {
        if s.model.window() != cfg.window {
            return Err(Error::Config {
                key: "window".into(),
                msg: format!("source model has window {}, target uses {}", s.model.window(), cfg.window),
            });
        }
        if source_summary.is_none() {
            source_summary = Some(SourceSummary {
                checkpoint: s.id.clone(),
                n_features: s.model.n_features(),
                best_epoch: 0,
                valid_mse: f64::NAN,
                test_mse: None,
            });
        }
    }

    let mut rows = Vec::new();
    let mut variants = Vec::new();
    let mut checkpoints = Vec::new();
    for variant in Variant::ALL {
        let params = variant_parameters(cfg, variant, target.spec.n_features);
        if variant == Variant::Dsent && source.is_none() {
            rows.push(AblationRow {
                variant,
                mean_test_mse: None,
                std_test_mse: None,
                completed: 0,
                diverged: 0,
                parameters: params,
                skipped: Some("no source checkpoint; dsent leg skipped".into()),
            });
            continue;
        }
        let out = run_trials(cfg, variant, target, source.as_ref())?;
        let a = &out.report.aggregate;
        rows.push(AblationRow {
            variant,
            mean_test_mse: a.mean_test_mse,
            std_test_mse: a.std_test_mse,
            completed: a.completed,
            diverged: a.diverged,
            parameters: params,
            skipped: None,
        });
        variants.push(out.report);
        checkpoints.push((variant, out.checkpoints));
    }
    let mut echo = cfg.echo();
    echo.remove("variant");
    Ok(AblationOutput {
        report: AblationReport {
            schema: REPORT_SCHEMA.into(),
            config: echo,
            source: source_summary,
            rows,
            variants,
        },
        source_checkpoint,
        checkpoints,
    })
}

/// Parameter count of a built model, for reports and parity checks.
pub fn model_parameters<T: Scalar>(model: &Model<T>) -> usize {
    model.param_count()
}
