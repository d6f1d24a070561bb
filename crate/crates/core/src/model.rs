//! The composite network: per-feature autoencoders (dense embedding), a shared
//! sparse-row embedding, and a prediction head, plus the plain MLP baseline.

use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurize::{DenseFeatureMatrix, Sample, SparseFeatureMatrix};
use crate::nn::{self, init_mlp_with_rng, mae_loss, mse_loss, Checkpoint, DenseLayer, Mlp, MlpCache, Params};
use crate::scalar::Scalar;

/// Hidden widths shared by every sub-network: `[in, in, 32, 256, 6, 1]`.
pub const DEFAULT_HIDDEN: [usize; 3] = [32, 256, 6];

/// Ablation variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Mlp,
    Den,
    Dsen,
    Dsent,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Mlp, Variant::Den, Variant::Dsen, Variant::Dsent];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Mlp => "mlp",
            Variant::Den => "den",
            Variant::Dsen => "dsen",
            Variant::Dsent => "dsent",
        }
    }

    /// Tag written into checkpoints. The transferred full model is `htps`.
    pub fn checkpoint_tag(self) -> &'static str {
        match self {
            Variant::Dsent => "htps",
            v => v.as_str(),
        }
    }

    pub fn from_checkpoint_tag(tag: &str) -> Result<Self> {
        match tag {
            "mlp" => Ok(Variant::Mlp),
            "den" => Ok(Variant::Den),
            "dsen" => Ok(Variant::Dsen),
            "htps" => Ok(Variant::Dsent),
            other => Err(Error::Corrupt(format!("unknown model kind {other:?}"))),
        }
    }

    pub fn uses_sparse(self) -> bool {
        matches!(self, Variant::Dsen | Variant::Dsent)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(Variant::Mlp),
            "den" => Ok(Variant::Den),
            "dsen" => Ok(Variant::Dsen),
            "dsent" | "htps" => Ok(Variant::Dsent),
            other => Err(Error::invalid(format!(
                "unknown variant {other:?} (expected mlp, den, dsen or dsent)"
            ))),
        }
    }
}

/// `[input, input, hidden..., 1]`: the first Linear keeps the input width.
pub fn subnet_dims(input: usize, hidden: &[usize]) -> Vec<usize> {
    let mut dims = vec![input, input];
    dims.extend_from_slice(hidden);
    dims.push(1);
    dims
}

/// Mirror of the encoder's tail: `[1, reversed hidden..., window]`.
pub fn decoder_dims(window: usize, hidden: &[usize]) -> Vec<usize> {
    let mut dims = vec![1];
    dims.extend(hidden.iter().rev());
    dims.push(window);
    dims
}

#[derive(Clone, Debug, PartialEq)]
pub struct HtpsConfig {
    pub window: usize,
    pub n_features: usize,
    pub hidden: Vec<usize>,
    pub use_sparse: bool,
    pub lambda: f64,
    pub slope: f64,
}

impl HtpsConfig {
    pub fn new(window: usize, n_features: usize) -> Self {
        HtpsConfig {
            window,
            n_features,
            hidden: DEFAULT_HIDDEN.to_vec(),
            use_sparse: true,
            lambda: 1.0,
            slope: nn::DEFAULT_SLOPE,
        }
    }

    pub fn prediction_input(&self) -> usize {
        self.n_features + if self.use_sparse { self.window } else { 0 }
    }

    fn validate(&self) -> Result<()> {
        if self.window == 0 || self.n_features == 0 {
            return Err(Error::invalid("window and n_features must be positive"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        Ok(())
    }
}

/// Encoder `W -> 1` and decoder `1 -> W` for one feature.
#[derive(Clone, Debug, PartialEq)]
pub struct Autoencoder<T> {
    pub encoder: Mlp<T>,
    pub decoder: Mlp<T>,
}

impl<T: Scalar> Autoencoder<T> {
    pub fn init<R: RngCore>(window: usize, hidden: &[usize], slope: T, rng: &mut R) -> Result<Self> {
        Ok(Autoencoder {
            encoder: init_mlp_with_rng(&subnet_dims(window, hidden), slope, rng)?,
            decoder: init_mlp_with_rng(&decoder_dims(window, hidden), slope, rng)?,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Autoencoder {
            encoder: self.encoder.zeros_like(),
            decoder: self.decoder.zeros_like(),
        }
    }

    pub fn window(&self) -> usize {
        self.encoder.in_dim()
    }

    pub fn reconstruct(&self, column: &[T]) -> Result<Vec<T>> {
        let embedding = self.encoder.predict(column)?;
        self.decoder.predict(&embedding)
    }

    /// Reconstruction MAE of one column.
    pub fn reconstruction_error(&self, column: &[T]) -> Result<T> {
        Ok(mae_loss(&self.reconstruct(column)?, column)?.0)
    }
}

impl<T> Params<T> for Autoencoder<T> {
    fn tensors(&self) -> Vec<&[T]> {
        let mut v = self.encoder.tensors();
        v.extend(self.decoder.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut v = self.encoder.tensors_mut();
        v.extend(self.decoder.tensors_mut());
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HtpsModel<T> {
    pub(crate) window: usize,
    pub(crate) n_features: usize,
    pub autoencoders: Vec<Autoencoder<T>>,
    /// `None` for the dense-only variant.
    pub sparse_embed: Option<Mlp<T>>,
    pub prediction: Mlp<T>,
    pub lambda: T,
}

/// Every intermediate signal of one forward pass.
#[derive(Clone, Debug)]
pub struct HtpsForwardCache<T> {
    pub encoder_caches: Vec<MlpCache<T>>,
    pub decoder_caches: Vec<MlpCache<T>>,
    pub embeddings: Vec<T>,
    pub sparse_caches: Vec<MlpCache<T>>,
    pub sparse_embeddings: Vec<T>,
    pub prediction_cache: MlpCache<T>,
    pub prediction: T,
}

impl<T: Scalar> HtpsForwardCache<T> {
    pub fn reconstruction(&self, feature: usize) -> &[T] {
        self.decoder_caches[feature].output()
    }

    /// Input of the prediction head: dense embeddings then sparse embeddings.
    pub fn prediction_input(&self) -> Vec<T> {
        self.embeddings.iter().chain(&self.sparse_embeddings).copied().collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossBreakdown<T> {
    pub total: T,
    pub prediction_mse: T,
    /// One reconstruction MAE per feature.
    pub reconstruction_mae: Vec<T>,
}

impl<T: Scalar> HtpsModel<T> {
    pub fn init(config: &HtpsConfig, seed: u64) -> Result<Self> {
        Self::init_with_rng(config, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn init_with_rng<R: RngCore>(config: &HtpsConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let slope = T::lit(config.slope);
        let autoencoders = (0..config.n_features)
            .map(|_| Autoencoder::init(config.window, &config.hidden, slope, rng))
            .collect::<Result<Vec<_>>>()?;
        let sparse_embed = if config.use_sparse {
            Some(init_mlp_with_rng(&subnet_dims(config.n_features, &config.hidden), slope, rng)?)
        } else {
            None
        };
        let prediction = init_mlp_with_rng(&subnet_dims(config.prediction_input(), &config.hidden), slope, rng)?;
        Ok(HtpsModel {
            window: config.window,
            n_features: config.n_features,
            autoencoders,
            sparse_embed,
            prediction,
            lambda: T::lit(config.lambda),
        })
    }

    /// Assembles a model from parts, checking every dimension contract.
    pub fn from_parts(
        autoencoders: Vec<Autoencoder<T>>,
        sparse_embed: Option<Mlp<T>>,
        prediction: Mlp<T>,
        lambda: T,
    ) -> Result<Self> {
        let n_features = autoencoders.len();
        let window = autoencoders.first().map(Autoencoder::window).ok_or_else(|| Error::shape("no autoencoders"))?;
        for (j, ae) in autoencoders.iter().enumerate() {
            if ae.encoder.in_dim() != window
                || ae.encoder.out_dim() != 1
                || ae.decoder.in_dim() != 1
                || ae.decoder.out_dim() != window
            {
                return Err(Error::shape(format!("autoencoder {j} does not map {window} -> 1 -> {window}")));
            }
        }
        let mut pred_in = n_features;
        if let Some(s) = &sparse_embed {
            if s.in_dim() != n_features || s.out_dim() != 1 {
                return Err(Error::shape(format!("sparse embedding must map {n_features} -> 1")));
            }
            pred_in += window;
        }
        if prediction.in_dim() != pred_in || prediction.out_dim() != 1 {
            return Err(Error::shape(format!("prediction head must map {pred_in} -> 1")));
        }
        Ok(HtpsModel {
            window,
            n_features,
            autoencoders,
            sparse_embed,
            prediction,
            lambda,
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn uses_sparse(&self) -> bool {
        self.sparse_embed.is_some()
    }

    pub fn zeros_like(&self) -> Self {
        HtpsModel {
            window: self.window,
            n_features: self.n_features,
            autoencoders: self.autoencoders.iter().map(Autoencoder::zeros_like).collect(),
            sparse_embed: self.sparse_embed.as_ref().map(Mlp::zeros_like),
            prediction: self.prediction.zeros_like(),
            lambda: self.lambda,
        }
    }

    fn check_inputs(&self, dense: &DenseFeatureMatrix<T>, sparse: Option<&SparseFeatureMatrix<T>>) -> Result<()> {
        if dense.window() != self.window || dense.n_features() != self.n_features {
            return Err(Error::shape(format!(
                "dense matrix {}x{} for model with W={} N={}",
                dense.window(),
                dense.n_features(),
                self.window,
                self.n_features
            )));
        }
        match (&self.sparse_embed, sparse) {
            (Some(_), None) => Err(Error::shape("model with a sparse path needs a sparse matrix")),
            (Some(_), Some(s)) if s.window() != self.window || s.n_features() != self.n_features => {
                Err(Error::shape(format!(
                    "sparse matrix {}x{} for model with W={} N={}",
                    s.window(),
                    s.n_features(),
                    self.window,
                    self.n_features
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn forward(
        &self,
        dense: &DenseFeatureMatrix<T>,
        sparse: Option<&SparseFeatureMatrix<T>>,
    ) -> Result<HtpsForwardCache<T>> {
        self.check_inputs(dense, sparse)?;
        let mut encoder_caches = Vec::with_capacity(self.n_features);
        let mut decoder_caches = Vec::with_capacity(self.n_features);
        let mut embeddings = Vec::with_capacity(self.n_features);
        for (j, ae) in self.autoencoders.iter().enumerate() {
            let enc = ae.encoder.forward(&dense.data.column(j))?;
            let e = enc.output()[0];
            decoder_caches.push(ae.decoder.forward(&[e])?);
            encoder_caches.push(enc);
            embeddings.push(e);
        }
        let mut sparse_caches = Vec::new();
        let mut sparse_embeddings = Vec::new();
        if let (Some(net), Some(s)) = (&self.sparse_embed, sparse) {
            for r in 0..self.window {
                let c = net.forward(s.data.row(r))?;
                sparse_embeddings.push(c.output()[0]);
                sparse_caches.push(c);
            }
        }
        let input: Vec<T> = embeddings.iter().chain(&sparse_embeddings).copied().collect();
        let prediction_cache = self.prediction.forward(&input)?;
        let prediction = prediction_cache.output()[0];
        Ok(HtpsForwardCache {
            encoder_caches,
            decoder_caches,
            embeddings,
            sparse_caches,
            sparse_embeddings,
            prediction_cache,
            prediction,
        })
    }

    /// `MSE(prediction, label) + lambda * sum_j MAE(reconstruction_j, column_j)`.
    pub fn loss(&self, cache: &HtpsForwardCache<T>, dense: &DenseFeatureMatrix<T>, label: T) -> Result<LossBreakdown<T>> {
        let (prediction_mse, _) = mse_loss(&[cache.prediction], &[label])?;
        let reconstruction_mae = (0..self.n_features)
            .map(|j| Ok(mae_loss(cache.reconstruction(j), &dense.data.column(j))?.0))
            .collect::<Result<Vec<T>>>()?;
        let total = prediction_mse + self.lambda * reconstruction_mae.iter().copied().sum::<T>();
        Ok(LossBreakdown {
            total,
            prediction_mse,
            reconstruction_mae,
        })
    }

    /// Accumulates `scale * d(total loss)/d(params)` into `grads`.
    ///
    /// The prediction error reaches the encoders and the sparse embedding
    /// through the head; reconstruction errors reach the encoders through the
    /// decoders. Encoder gradients are the sum of both paths.
    pub fn backward(
        &self,
        cache: &HtpsForwardCache<T>,
        dense: &DenseFeatureMatrix<T>,
        label: T,
        scale: T,
        grads: &mut HtpsModel<T>,
    ) -> Result<()> {
        if grads.autoencoders.len() != self.n_features || grads.sparse_embed.is_some() != self.sparse_embed.is_some() {
            return Err(Error::shape("gradient container does not match model"));
        }
        let (_, d_pred) = mse_loss(&[cache.prediction], &[label])?;
        let d_input = self
            .prediction
            .backward(&cache.prediction_cache, &[scale * d_pred[0]], &mut grads.prediction)?;

        for (j, ae) in self.autoencoders.iter().enumerate() {
            let (_, d_rec) = mae_loss(cache.reconstruction(j), &dense.data.column(j))?;
            let d_rec: Vec<T> = d_rec.into_iter().map(|g| g * self.lambda * scale).collect();
            let g_ae = &mut grads.autoencoders[j];
            let d_emb_dec = ae.decoder.backward(&cache.decoder_caches[j], &d_rec, &mut g_ae.decoder)?;
            let d_emb = d_input[j] + d_emb_dec[0];
            ae.encoder.backward(&cache.encoder_caches[j], &[d_emb], &mut g_ae.encoder)?;
        }

        if let (Some(net), Some(g_net)) = (&self.sparse_embed, grads.sparse_embed.as_mut()) {
            for (r, c) in cache.sparse_caches.iter().enumerate() {
                net.backward(c, &[d_input[self.n_features + r]], g_net)?;
            }
        }
        Ok(())
    }

    pub fn predict(&self, dense: &DenseFeatureMatrix<T>, sparse: Option<&SparseFeatureMatrix<T>>) -> Result<T> {
        Ok(self.forward(dense, sparse)?.prediction)
    }
}

impl<T> Params<T> for HtpsModel<T> {
    fn tensors(&self) -> Vec<&[T]> {
        let mut v: Vec<&[T]> = self.autoencoders.iter().flat_map(|a| a.tensors()).collect();
        if let Some(s) = &self.sparse_embed {
            v.extend(s.tensors());
        }
        v.extend(self.prediction.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut v: Vec<&mut [T]> = self.autoencoders.iter_mut().flat_map(|a| a.tensors_mut()).collect();
        if let Some(s) = &mut self.sparse_embed {
            v.extend(s.tensors_mut());
        }
        v.extend(self.prediction.tensors_mut());
        v
    }
}

/// MLP baseline widths `[W*N, W*N, 32, 256, 6, 1]` before any parity adjustment.
pub fn baseline_dims(window: usize, n_features: usize, hidden: &[usize]) -> Vec<usize> {
    subnet_dims(window * n_features, hidden)
}

/// Baseline widths whose widest hidden layer is resized so the parameter count
/// is as close as possible to `target_params`.
pub fn parity_baseline_dims(window: usize, n_features: usize, hidden: &[usize], target_params: usize) -> Vec<usize> {
    let mut dims = baseline_dims(window, n_features, hidden);
    // index of the widest hidden layer (ties: first)
    let k = (2..dims.len() - 1).max_by_key(|&i| (dims[i], std::cmp::Reverse(i))).unwrap_or(1);
    dims[k] = 1;
    let base = dims_param_count(&dims) as f64;
    // each unit at position k adds (in + 1) + out parameters
    let per_unit = (dims[k - 1] + 1 + dims[k + 1]) as f64;
    let extra = ((target_params as f64 - base) / per_unit).round().max(0.0) as usize;
    dims[k] = 1 + extra;
    dims
}

pub fn dims_param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|d| d[0] * d[1] + d[1]).sum()
}

/// Parameter count of the composite model for a config, without building it.
pub fn htps_param_count(config: &HtpsConfig) -> usize {
    let ae = dims_param_count(&subnet_dims(config.window, &config.hidden))
        + dims_param_count(&decoder_dims(config.window, &config.hidden));
    let sparse = if config.use_sparse {
        dims_param_count(&subnet_dims(config.n_features, &config.hidden))
    } else {
        0
    };
    config.n_features * ae + sparse + dims_param_count(&subnet_dims(config.prediction_input(), &config.hidden))
}

/// Flattens a dense matrix row-major, the baseline's input layout.
pub fn flatten_dense<T: Scalar>(dense: &DenseFeatureMatrix<T>) -> &[T] {
    dense.data.as_slice()
}

/// A trained or trainable model of any variant.
#[derive(Clone, Debug, PartialEq)]
pub enum Model<T> {
    Mlp(Mlp<T>),
    Htps { variant: Variant, model: HtpsModel<T> },
}

impl<T: Scalar> Model<T> {
    pub fn variant(&self) -> Variant {
        match self {
            Model::Mlp(_) => Variant::Mlp,
            Model::Htps { variant, .. } => *variant,
        }
    }

    pub fn as_htps(&self) -> Option<&HtpsModel<T>> {
        match self {
            Model::Htps { model, .. } => Some(model),
            Model::Mlp(_) => None,
        }
    }

    pub fn zeros_like(&self) -> Self {
        match self {
            Model::Mlp(m) => Model::Mlp(m.zeros_like()),
            Model::Htps { variant, model } => Model::Htps {
                variant: *variant,
                model: model.zeros_like(),
            },
        }
    }

    pub fn predict(&self, sample: &Sample<T>) -> Result<T> {
        match self {
            Model::Mlp(m) => Ok(m.predict(flatten_dense(&sample.dense))?[0]),
            Model::Htps { model, .. } => model.predict(&sample.dense, Some(&sample.sparse)),
        }
    }

    /// Training objective of one sample; accumulates `scale * gradient` into `grads`.
    pub fn accumulate_gradient(&self, sample: &Sample<T>, scale: T, grads: &mut Model<T>) -> Result<T> {
        match (self, grads) {
            (Model::Mlp(m), Model::Mlp(g)) => {
                let cache = m.forward(flatten_dense(&sample.dense))?;
                let (loss, d) = mse_loss(cache.output(), &[sample.label()])?;
                let d: Vec<T> = d.into_iter().map(|x| x * scale).collect();
                m.backward(&cache, &d, g)?;
                Ok(loss)
            }
            (Model::Htps { model, .. }, Model::Htps { model: g, .. }) => {
                let sparse = model.uses_sparse().then_some(&sample.sparse);
                let cache = model.forward(&sample.dense, sparse)?;
                let loss = model.loss(&cache, &sample.dense, sample.label())?;
                model.backward(&cache, &sample.dense, sample.label(), scale, g)?;
                Ok(loss.total)
            }
            _ => Err(Error::shape("gradient container of a different model kind")),
        }
    }

    /// Training objective of one sample without gradients.
    pub fn objective(&self, sample: &Sample<T>) -> Result<T> {
        match self {
            Model::Mlp(m) => {
                let p = m.predict(flatten_dense(&sample.dense))?;
                Ok(mse_loss(&p, &[sample.label()])?.0)
            }
            Model::Htps { model, .. } => {
                let sparse = model.uses_sparse().then_some(&sample.sparse);
                let cache = model.forward(&sample.dense, sparse)?;
                Ok(model.loss(&cache, &sample.dense, sample.label())?.total)
            }
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint<T> {
        let mut ck = Checkpoint::new(self.variant().checkpoint_tag());
        let push_mlp = |ck: &mut Checkpoint<T>, prefix: &str, m: &Mlp<T>| {
            for (i, l) in m.layers().iter().enumerate() {
                ck.push_tensor(format!("{prefix}.{i}.w"), l.out_dim(), l.in_dim(), l.weights());
                ck.push_tensor(format!("{prefix}.{i}.b"), 1, l.out_dim(), l.bias());
            }
        };
        match self {
            Model::Mlp(m) => {
                ck.set_meta("slope", m.slope());
                ck.set_meta("layers", m.layers().len());
                push_mlp(&mut ck, "mlp", m);
            }
            Model::Htps { model, .. } => {
                ck.set_meta("slope", model.prediction.slope());
                ck.set_meta("lambda", model.lambda);
                ck.set_meta("window", model.window);
                ck.set_meta("n_features", model.n_features);
                ck.set_meta("sparse", model.uses_sparse());
                ck.set_meta("layers", model.prediction.layers().len());
                ck.set_meta("ae_layers", model.autoencoders[0].encoder.layers().len());
                ck.set_meta("dec_layers", model.autoencoders[0].decoder.layers().len());
                for (j, ae) in model.autoencoders.iter().enumerate() {
                    push_mlp(&mut ck, &format!("ae{}.enc", j + 1), &ae.encoder);
                    push_mlp(&mut ck, &format!("ae{}.dec", j + 1), &ae.decoder);
                }
                if let Some(s) = &model.sparse_embed {
                    push_mlp(&mut ck, "sparse", s);
                }
                push_mlp(&mut ck, "pred", &model.prediction);
            }
        }
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint<T>) -> Result<Self> {
        let variant = Variant::from_checkpoint_tag(&ck.model_kind)?;
        let slope: T = ck.meta_value("slope")?;
        let read_mlp = |prefix: &str, n_layers: usize| -> Result<Mlp<T>> {
            let mut layers = Vec::with_capacity(n_layers);
            for i in 0..n_layers {
                let w = ck.tensor(&format!("{prefix}.{i}.w"))?;
                let b = ck.tensor(&format!("{prefix}.{i}.b"))?;
                if b.rows != 1 || b.cols != w.rows {
                    return Err(Error::shape(format!("{prefix}.{i}: bias does not match weights")));
                }
                layers.push(DenseLayer::from_parts(w.cols, w.rows, w.data.clone(), b.data.clone())?);
            }
            Mlp::from_layers(layers, slope)
        };
        let n_layers: usize = ck.meta_value("layers")?;
        match variant {
            Variant::Mlp => Ok(Model::Mlp(read_mlp("mlp", n_layers)?)),
            _ => {
                let n_features: usize = ck.meta_value("n_features")?;
                let window: usize = ck.meta_value("window")?;
                let ae_layers: usize = ck.meta_value("ae_layers")?;
                let dec_layers: usize = ck.meta_value("dec_layers")?;
                let sparse: bool = ck.meta_value("sparse")?;
                if sparse != variant.uses_sparse() {
                    return Err(Error::Corrupt(format!("{variant} checkpoint with sparse={sparse}")));
                }
                let autoencoders = (1..=n_features)
                    .map(|j| {
                        Ok(Autoencoder {
                            encoder: read_mlp(&format!("ae{j}.enc"), ae_layers)?,
                            decoder: read_mlp(&format!("ae{j}.dec"), dec_layers)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let sparse_embed = if sparse { Some(read_mlp("sparse", n_layers)?) } else { None };
                let model = HtpsModel::from_parts(autoencoders, sparse_embed, read_mlp("pred", n_layers)?, ck.meta_value("lambda")?)?;
                if model.window != window {
                    return Err(Error::shape(format!("checkpoint window {window} but autoencoders take {}", model.window)));
                }
                Ok(Model::Htps { variant, model })
            }
        }
    }
}

impl<T> Params<T> for Model<T> {
    fn tensors(&self) -> Vec<&[T]> {
        match self {
            Model::Mlp(m) => m.tensors(),
            Model::Htps { model, .. } => model.tensors(),
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        match self {
            Model::Mlp(m) => m.tensors_mut(),
            Model::Htps { model, .. } => model.tensors_mut(),
        }
    }
}
