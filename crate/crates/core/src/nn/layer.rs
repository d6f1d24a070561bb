use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{dot, Params};

/// Fully connected layer, weights row-major `out x in`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer<T> {
    pub(crate) in_dim: usize,
    pub(crate) out_dim: usize,
    pub(crate) weights: Vec<T>,
    pub(crate) bias: Vec<T>,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        DenseLayer {
            in_dim,
            out_dim,
            weights: vec![T::zero(); in_dim * out_dim],
            bias: vec![T::zero(); out_dim],
        }
    }

    pub fn from_parts(in_dim: usize, out_dim: usize, weights: Vec<T>, bias: Vec<T>) -> Result<Self> {
        if weights.len() != in_dim * out_dim || bias.len() != out_dim {
            return Err(Error::shape(format!(
                "layer {in_dim}->{out_dim} given {} weights and {} biases",
                weights.len(),
                bias.len()
            )));
        }
        Ok(DenseLayer {
            in_dim,
            out_dim,
            weights,
            bias,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn weight(&self, out: usize, inp: usize) -> T {
        self.weights[out * self.in_dim + inp]
    }

    pub(crate) fn forward_into(&self, x: &[T], y: &mut Vec<T>) {
        debug_assert_eq!(x.len(), self.in_dim);
        y.clear();
        y.extend(
            self.weights
                .chunks_exact(self.in_dim)
                .zip(&self.bias)
                .map(|(row, &b)| b + dot(row, x)),
        );
    }

    /// Accumulates `dL/dW`, `dL/db` into `grads` and returns `dL/dx`.
    pub(crate) fn backward_accumulate(&self, x: &[T], grad_out: &[T], grads: &mut DenseLayer<T>) -> Vec<T> {
        let mut grad_in = vec![T::zero(); self.in_dim];
        for (o, &g) in grad_out.iter().enumerate() {
            if g == T::zero() {
                continue;
            }
            grads.bias[o] += g;
            let start = o * self.in_dim;
            let gw = &mut grads.weights[start..start + self.in_dim];
            for (gwi, &xi) in gw.iter_mut().zip(x) {
                *gwi += g * xi;
            }
            let w = &self.weights[start..start + self.in_dim];
            for (gi, &wi) in grad_in.iter_mut().zip(w) {
                *gi += g * wi;
            }
        }
        grad_in
    }
}

impl<T> Params<T> for DenseLayer<T> {
    fn tensors(&self) -> Vec<&[T]> {
        vec![&self.weights, &self.bias]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        vec![&mut self.weights, &mut self.bias]
    }
}
