//! Command-line front end.
//!
//! ```text
//! htps generate  --preset pair --seed 1 --out data/
//! htps featurize --input data/target.csv --n-features 4 --window 3 --variant dense --out target.fm
//! htps train     --config run.cfg --out runs/dsen --variant dsen
//! htps transfer  --source-checkpoint runs/src/dsen/trial-00.ckpt --input target.fm --out runs/plan
//! htps evaluate  --checkpoint runs/dsen/dsen/trial-00.ckpt --input data/target.csv
//! htps ablate    --config run.cfg --out runs/ablation
//! ```
//!
//! Exit status is 0 on success, 1 for invalid arguments, configuration or
//! input files, and 2 for failures while running.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::experiment::{
    evaluate, load_datasets, run_ablation, run_trials, ExperimentConfig, Normalization, SourceModel,
    SOURCE_CHECKPOINT_NAME,
};
use crate::featurize::{dense_featurize, paired_featurize, sparse_featurize, MatrixFile, Variant as MatrixVariant};
use crate::model::{HtpsModel, Model, Variant};
use crate::nn::Checkpoint;
use crate::records::{ingest_csv, save_csv, DatasetSpec, SplitRole};
use crate::synth::{carevue_like, generate, heterogeneous_pair, metavision_like, GeneratorConfig, Preset};
use crate::transfer::{apply_plan, build_plan, SampleSet};

#[derive(Parser, Debug)]
#[command(name = "htps", version, about = "Sparse and dense time-series prediction with autoencoder transfer")]
struct Cli {
    /// Print progress to stderr
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write synthetic record CSVs
    Generate(GenerateArgs),
    /// Turn a record CSV into a sparse or dense matrix file
    Featurize(FeaturizeArgs),
    /// Train one variant for several trials
    Train(RunArgs),
    /// Match target features to source autoencoders and initialize a target model
    Transfer(TransferArgs),
    /// Prediction MSE of a checkpoint on a record CSV
    Evaluate(EvaluateArgs),
    /// Train and compare mlp, den, dsen and dsent
    Ablate(RunArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    preset: Preset,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 60)]
    users: usize,
}

#[derive(Args, Debug)]
struct FeaturizeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    n_features: usize,
    #[arg(long)]
    window: usize,
    #[arg(long)]
    variant: MatrixVariant,
    /// Output matrix file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Key-value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    preset: Option<Preset>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    source_checkpoint: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    /// z-score predictors with training-split statistics
    #[arg(long)]
    normalize: bool,
    /// Any configuration key, as key=value; applied last
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args, Debug)]
struct TransferArgs {
    #[arg(long)]
    source_checkpoint: PathBuf,
    /// Dense matrix file of the target training split
    #[arg(long)]
    input: PathBuf,
    /// Output directory for plan.txt and target.ckpt
    #[arg(long)]
    out: PathBuf,
    /// Initialization seed for the parts that are not transferred
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Record CSV with the checkpoint's feature count
    #[arg(long)]
    input: PathBuf,
}

/// Parses `args` (program name first), runs the command and returns the exit status.
pub fn run<I: IntoIterator<Item = OsString>>(args: I) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let verbose = cli.verbose > 0;
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Featurize(a) => cmd_featurize(a),
        Command::Train(a) => cmd_train(a, verbose),
        Command::Transfer(a) => cmd_transfer(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Ablate(a) => cmd_ablate(a, verbose),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    create_dir(&a.out)?;
    let jobs: Vec<(&str, GeneratorConfig)> = match a.preset {
        Preset::CarevueLike => vec![("carevue-like.csv", carevue_like(a.users, a.seed))],
        Preset::MetavisionLike => vec![("metavision-like.csv", metavision_like(a.users, a.seed))],
        Preset::Pair => {
            let (source, target) = heterogeneous_pair(a.users, a.seed);
            vec![("source.csv", source), ("target.csv", target)]
        }
    };
    for (name, g) in jobs {
        let users = generate::<f64>(&g)?;
        let path = a.out.join(name);
        save_csv(&path, &users)?;
        let records: usize = users.iter().map(|u| u.records.len()).sum();
        println!(
            "{}: {} users, {} records, {} features ({})",
            path.display(),
            users.len(),
            records,
            g.features.len(),
            g.features.iter().map(|f| f.name.as_str()).collect::<Vec<_>>().join(",")
        );
    }
    Ok(())
}

fn cmd_featurize(a: FeaturizeArgs) -> Result<()> {
    let spec = DatasetSpec::anonymous(a.n_features, a.window)?;
    let users = ingest_csv::<f64>(&a.input, &spec)?;
    let file = match a.variant {
        MatrixVariant::Dense => {
            let ms: Vec<_> = users.iter().flat_map(|u| dense_featurize(&u.records, &spec)).collect();
            MatrixFile::from_dense(a.window, a.n_features, &ms)
        }
        MatrixVariant::Sparse => {
            let ms: Vec<_> = users.iter().flat_map(|u| sparse_featurize(&u.records, &spec)).collect();
            MatrixFile::from_sparse(a.window, a.n_features, &ms)
        }
    };
    file.save(&a.out)?;
    println!("{}: {} {} matrices", a.out.display(), file.samples.len(), a.variant.as_str());
    Ok(())
}

fn run_config(a: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.preset {
        cfg.preset = v;
    }
    if let Some(v) = a.variant {
        cfg.variant = v;
    }
    if let Some(v) = &a.source_checkpoint {
        cfg.source_checkpoint = Some(v.clone());
    }
    if let Some(v) = a.trials {
        cfg.trials = v;
    }
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.lr {
        cfg.learning_rate = v;
    }
    if let Some(v) = a.window {
        cfg.window = v;
    }
    if let Some(v) = a.lambda {
        cfg.lambda = v;
    }
    if a.normalize {
        cfg.normalize = true;
    }
    cfg.apply_overrides(&a.overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

fn load_source(path: &Path) -> Result<SourceModel<f64>> {
    SourceModel::from_checkpoint(&Checkpoint::load(path)?, path.display().to_string())
}

fn checkpoint_name(trial: usize) -> String {
    format!("trial-{trial:02}.ckpt")
}

fn save_checkpoints(dir: &Path, variant: Variant, cks: &[Option<Checkpoint<f64>>]) -> Result<()> {
    let dir = dir.join(variant.as_str());
    create_dir(&dir)?;
    for (k, ck) in cks.iter().enumerate() {
        if let Some(ck) = ck {
            ck.save(&dir.join(checkpoint_name(k)))?;
        }
    }
    Ok(())
}

fn show_mse(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |m| format!("{m:.4}"))
}

fn cmd_train(a: RunArgs, verbose: bool) -> Result<()> {
    let cfg = run_config(&a)?;
    cfg.validate_for_training()?;
    let source = cfg.source_checkpoint.as_deref().map(load_source).transpose()?;
    let (target, _) = load_datasets::<f64>(&cfg)?;
    if verbose {
        eprintln!("training {} on {} users, {} trials", cfg.variant, target.users.len(), cfg.trials);
    }
    let out = run_trials(&cfg, cfg.variant, &target, source.as_ref())?;
    create_dir(&a.out)?;
    write_file(&a.out.join("report.json"), &out.report.to_json())?;
    write_file(&a.out.join("report.txt"), &out.report.to_table())?;
    save_checkpoints(&a.out, cfg.variant, &out.checkpoints)?;
    let agg = &out.report.aggregate;
    println!(
        "{}, mean test MSE {} ({} of {} trials completed)",
        cfg.variant,
        show_mse(agg.mean_test_mse),
        agg.completed,
        cfg.trials
    );
    Ok(())
}

fn cmd_ablate(a: RunArgs, verbose: bool) -> Result<()> {
    let cfg = run_config(&a)?;
    let source = cfg.source_checkpoint.as_deref().map(load_source).transpose()?;
    let (target, source_data) = load_datasets::<f64>(&cfg)?;
    if verbose {
        eprintln!("ablation on {} users, {} trials per variant", target.users.len(), cfg.trials);
    }
    let out = run_ablation(&cfg, &target, source_data.as_ref(), source)?;
    create_dir(&a.out)?;
    write_file(&a.out.join("report.json"), &out.report.to_json())?;
    write_file(&a.out.join("report.txt"), &out.report.to_table())?;
    if let Some(ck) = &out.source_checkpoint {
        ck.save(&a.out.join(SOURCE_CHECKPOINT_NAME))?;
    }
    for (variant, cks) in &out.checkpoints {
        save_checkpoints(&a.out, *variant, cks)?;
    }
    for row in &out.report.rows {
        match &row.skipped {
            Some(why) => println!("{}, skipped: {why}", row.variant),
            None => println!("{}, mean test MSE {}", row.variant, show_mse(row.mean_test_mse)),
        }
    }
    Ok(())
}

fn cmd_transfer(a: TransferArgs) -> Result<()> {
    let ck = Checkpoint::<f64>::load(&a.source_checkpoint)?;
    let source = SourceModel::from_checkpoint(&ck, a.source_checkpoint.display().to_string())?;
    let file = MatrixFile::<f64>::load(&a.input)?;
    if file.variant != MatrixVariant::Dense {
        return Err(Error::invalid(format!("{}: transfer needs a dense matrix file", a.input.display())));
    }
    let matrices = file.dense_matrices()?;
    let plan = build_plan(&source.model, &matrices, file.n_features, &source.id)?;

    // the target keeps the source's sub-network widths, lambda and slope
    let mut config = crate::experiment::htps_config(&ExperimentConfig::default(), file.n_features, true);
    config.window = file.window;
    config.hidden = source_hidden(&source.model);
    config.lambda = ck.meta_value("lambda").unwrap_or(config.lambda);
    config.slope = ck.meta_value("slope").unwrap_or(config.slope);
    let fresh = HtpsModel::init(&config, a.seed)?;
    let model = apply_plan(&plan, &source.model, fresh)?;

    create_dir(&a.out)?;
    plan.save(&a.out.join("plan.txt"))?;
    let mut target = Model::Htps {
        variant: Variant::Dsent,
        model,
    }
    .to_checkpoint();
    target.set_meta("init_seed", a.seed);
    target.set_meta("transfer_source", &source.id);
    target.save(&a.out.join("target.ckpt"))?;
    for m in &plan.matches {
        println!("feature {} <- autoencoder {} (mae {:.6})", m.target_feature, m.source_autoencoder, m.mae_score);
    }
    Ok(())
}

/// Hidden widths of the source's sub-networks, read off its first encoder.
fn source_hidden(model: &HtpsModel<f64>) -> Vec<usize> {
    let dims = model.autoencoders[0].encoder.dims();
    dims[2..dims.len() - 1].to_vec()
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let ck = Checkpoint::<f64>::load(&a.checkpoint)?;
    let model = Model::from_checkpoint(&ck)?;
    let window: usize = ck.meta_value("window")?;
    let n_features: usize = ck.meta_value("n_features")?;
    let spec = DatasetSpec::anonymous(n_features, window)?;
    let norm = Normalization::from_meta(&ck)?;
    if norm.as_ref().is_some_and(|n| n.mean.len() != n_features) {
        return Err(Error::Corrupt(format!("{}: normalization length differs from n_features", a.checkpoint.display())));
    }
    let users = ingest_csv::<f64>(&a.input, &spec)?;
    let samples = users
        .iter()
        .flat_map(|u| match &norm {
            Some(n) => paired_featurize(&n.apply(u), &spec),
            None => paired_featurize(u, &spec),
        })
        .collect();
    let set = SampleSet {
        role: SplitRole::Test,
        samples,
    };
    if set.is_empty() {
        return Err(Error::invalid(format!("{}: no complete samples for window {window}", a.input.display())));
    }
    let mse = evaluate(&model, &set)?;
    println!("{}, mean test MSE {mse:.6} over {} samples", model.variant(), set.len());
    Ok(())
}
