//! Small from-scratch neural network engine.
//!
//! Fully connected layers, LeakyReLU, L1/L2 losses, hand-written
//! backpropagation, Adam and a text checkpoint format. Gradients are stored in
//! containers shaped like the model itself (see [`Params`]).

mod adam;
mod checkpoint;
mod layer;
mod loss;
mod mlp;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, Tensor, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use layer::DenseLayer;
pub use loss::{mae_loss, mse_loss};
pub use mlp::{init_mlp, init_mlp_with_rng, leaky_relu, leaky_relu_derivative, Mlp, MlpCache};

/// Leaky slope used when none is configured.
pub const DEFAULT_SLOPE: f64 = 0.01;

/// Anything exposing its trainable tensors in a fixed order.
pub trait Params<T> {
    fn tensors(&self) -> Vec<&[T]>;
    fn tensors_mut(&mut self) -> Vec<&mut [T]>;

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn fill_zero(&mut self)
    where
        T: num_traits::Zero + Copy,
    {
        for t in self.tensors_mut() {
            t.fill(T::zero());
        }
    }
}

/// Four-accumulator dot product; the summation order is fixed.
#[inline]
pub(crate) fn dot<T: crate::Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        s += a[i] * b[i];
    }
    s
}
