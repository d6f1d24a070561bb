//! Finite-difference gradient checks shared by the gradient tests and the acceptance run.

use super::{numeric_gradient, rel_err};
use htps::featurize::{DenseFeatureMatrix, Matrix, SparseFeatureMatrix};
use htps::model::{HtpsConfig, HtpsModel};
use htps::nn::{init_mlp, mae_loss, mse_loss, Mlp, Params};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const H: f64 = 1e-5;
pub const TOL: f64 = 1e-4;
pub const CONFIGS: u64 = 120;

pub fn flat<P: Params<f64>>(p: &P) -> Vec<f64> {
    p.tensors().concat()
}

pub fn load<P: Params<f64>>(p: &mut P, values: &[f64]) {
    let mut it = values.iter();
    for t in p.tensors_mut() {
        for v in t.iter_mut() {
            *v = *it.next().unwrap();
        }
    }
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix<f64> {
    let data: Vec<Vec<f64>> = (0..rows).map(|_| random_vec(rng, cols, 2.0)).collect();
    Matrix::from_rows(&data).unwrap()
}

/// Parameter and input gradients of `g . mlp(x)`.
pub fn check_mlp(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = rng.random_range(1..=4);
    let dims: Vec<usize> = (0..=depth).map(|_| rng.random_range(1..=5)).collect();
    let mut mlp: Mlp<f64> = init_mlp(&dims, 0.01, seed).unwrap();
    // non-zero biases so every layer's bias gradient is exercised
    for l in mlp.layers_mut() {
        let mut ts = l.tensors_mut();
        for b in ts[1].iter_mut() {
            *b = rng.random_range(-0.5..0.5);
        }
    }
    let x = random_vec(&mut rng, dims[0], 2.0);
    let g = random_vec(&mut rng, *dims.last().unwrap(), 1.0);
    let objective = |m: &Mlp<f64>, x: &[f64]| -> f64 { m.predict(x).unwrap().iter().zip(&g).map(|(a, b)| a * b).sum() };

    let cache = mlp.forward(&x).unwrap();
    let mut grads = mlp.zeros_like();
    let d_input = mlp.backward(&cache, &g, &mut grads).unwrap();

    let mut params = flat(&mlp);
    let mut probe = mlp.clone();
    let numeric = numeric_gradient(&mut params, H, |p| {
        load(&mut probe, p);
        objective(&probe, &x)
    });
    let mut xs = x.clone();
    let numeric_input = numeric_gradient(&mut xs, H, |xi| objective(&mlp, xi));
    rel_err(&flat(&grads), &numeric).max(rel_err(&d_input, &numeric_input))
}

/// Worst relative error of both losses over `configs` random vectors.
pub fn check_losses(seed: u64, configs: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..configs {
        let n = rng.random_range(1..=6);
        let target = random_vec(&mut rng, n, 3.0);
        // keep predictions away from the MAE kink
        let mut pred: Vec<f64> = target
            .iter()
            .map(|t| t + rng.random_range(0.01..1.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        for loss in [mse_loss::<f64> as fn(&[f64], &[f64]) -> _, mae_loss::<f64>] {
            let (_, analytic) = loss(&pred, &target).unwrap();
            let numeric = numeric_gradient(&mut pred, H, |p| loss(p, &target).unwrap().0);
            worst = worst.max(rel_err(&analytic, &numeric));
        }
    }
    worst
}

/// Relative error of the full composite loss gradient on a toy model (N=2, W=2).
pub fn check_composite(seed: u64) -> f64 {
    let use_sparse = seed % 3 != 0;
    let model = toy_model(seed, use_sparse, [1.0, 0.5, 2.0][seed as usize % 3]);
    let (dense, sparse) = toy_inputs(seed);
    let grads = analytic(&model, &dense, &sparse, dense.label);

    let s = use_sparse.then_some(&sparse);
    let mut params = flat(&model);
    let mut probe = model.clone();
    let numeric = numeric_gradient(&mut params, H, |p| {
        load(&mut probe, p);
        let cache = probe.forward(&dense, s).unwrap();
        probe.loss(&cache, &dense, dense.label).unwrap().total
    });
    rel_err(&flat(&grads), &numeric)
}

pub fn toy_model(seed: u64, use_sparse: bool, lambda: f64) -> HtpsModel<f64> {
    let config = HtpsConfig {
        window: 2,
        n_features: 2,
        hidden: vec![3, 4, 2],
        use_sparse,
        lambda,
        slope: 0.01,
    };
    let mut m = HtpsModel::init(&config, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb1a5);
    for t in m.tensors_mut() {
        for v in t.iter_mut() {
            *v += rng.random_range(-0.2..0.2);
        }
    }
    m
}

pub fn toy_inputs(seed: u64) -> (DenseFeatureMatrix<f64>, SparseFeatureMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let label = rng.random_range(-3.0..3.0);
    let dense = DenseFeatureMatrix {
        data: random_matrix(&mut rng, 2, 2),
        label,
    };
    let mut sparse = Matrix::zeros(2, 2);
    for r in 0..2 {
        sparse.set(r, rng.random_range(0..2), rng.random_range(-2.0..2.0));
    }
    (dense, SparseFeatureMatrix { data: sparse, label })
}

/// Analytic gradient of the composite loss at `label`.
pub fn analytic(
    model: &HtpsModel<f64>,
    dense: &DenseFeatureMatrix<f64>,
    sparse: &SparseFeatureMatrix<f64>,
    label: f64,
) -> HtpsModel<f64> {
    let s = model.uses_sparse().then_some(sparse);
    let cache = model.forward(dense, s).unwrap();
    let mut grads = model.zeros_like();
    model.backward(&cache, dense, label, 1.0, &mut grads).unwrap();
    grads
}
