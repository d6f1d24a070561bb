use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{DenseLayer, Params};

pub fn leaky_relu<T: Scalar>(x: T, slope: T) -> T {
    if x > T::zero() {
        x
    } else {
        slope * x
    }
}

/// Derivative of [`leaky_relu`]; at `x = 0` it is `slope`.
pub fn leaky_relu_derivative<T: Scalar>(x: T, slope: T) -> T {
    if x > T::zero() {
        T::one()
    } else {
        slope
    }
}

/// Stack of dense layers with LeakyReLU between them and none after the last.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T> {
    pub(crate) layers: Vec<DenseLayer<T>>,
    pub(crate) slope: T,
}

/// Per-layer inputs and pre-activations recorded by [`Mlp::forward`].
#[derive(Clone, Debug, Default)]
pub struct MlpCache<T> {
    inputs: Vec<Vec<T>>,
    pre: Vec<Vec<T>>,
}

impl<T: Scalar> MlpCache<T> {
    pub fn output(&self) -> &[T] {
        self.pre.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn pre_activations(&self) -> &[Vec<T>] {
        &self.pre
    }
}

impl<T: Scalar> Mlp<T> {
    pub fn from_layers(layers: Vec<DenseLayer<T>>, slope: T) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("an MLP needs at least one layer"));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::shape(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    pair[0].out_dim,
                    i + 1,
                    pair[1].in_dim
                )));
            }
        }
        Ok(Mlp { layers, slope })
    }

    pub fn zeros(dims: &[usize], slope: T) -> Result<Self> {
        check_dims(dims)?;
        Self::from_layers(dims.windows(2).map(|d| DenseLayer::zeros(d[0], d[1])).collect(), slope)
    }

    /// Same shape, all parameters zero. Used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        Mlp {
            layers: self.layers.iter().map(|l| DenseLayer::zeros(l.in_dim, l.out_dim)).collect(),
            slope: self.slope,
        }
    }

    pub fn layers(&self) -> &[DenseLayer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer<T>] {
        &mut self.layers
    }

    pub fn slope(&self) -> T {
        self.slope
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    /// Widths `[in, out_1, ..., out_k]`.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.in_dim())
            .chain(self.layers.iter().map(|l| l.out_dim))
            .collect()
    }

    pub fn forward(&self, input: &[T]) -> Result<MlpCache<T>> {
        if input.len() != self.in_dim() {
            return Err(Error::shape(format!(
                "input of length {} for network expecting {}",
                input.len(),
                self.in_dim()
            )));
        }
        let n = self.layers.len();
        let mut cache = MlpCache {
            inputs: Vec::with_capacity(n),
            pre: Vec::with_capacity(n),
        };
        let mut x = input.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.out_dim);
            layer.forward_into(&x, &mut z);
            let next = if i + 1 < n {
                z.iter().map(|&v| leaky_relu(v, self.slope)).collect()
            } else {
                Vec::new()
            };
            cache.inputs.push(x);
            cache.pre.push(z);
            x = next;
        }
        Ok(cache)
    }

    /// Convenience wrapper returning only the output.
    pub fn predict(&self, input: &[T]) -> Result<Vec<T>> {
        Ok(self.forward(input)?.pre.pop().unwrap_or_default())
    }

    /// Accumulates parameter gradients into `grads` and returns the input gradient.
    pub fn backward(&self, cache: &MlpCache<T>, output_gradient: &[T], grads: &mut Mlp<T>) -> Result<Vec<T>> {
        if cache.pre.len() != self.layers.len() || grads.layers.len() != self.layers.len() {
            return Err(Error::shape("cache or gradient container does not match network"));
        }
        if output_gradient.len() != self.out_dim() {
            return Err(Error::shape(format!(
                "output gradient of length {} for network with {} outputs",
                output_gradient.len(),
                self.out_dim()
            )));
        }
        let mut g = output_gradient.to_vec();
        for i in (0..self.layers.len()).rev() {
            if i + 1 < self.layers.len() {
                for (gi, &z) in g.iter_mut().zip(&cache.pre[i]) {
                    *gi *= leaky_relu_derivative(z, self.slope);
                }
            }
            g = self.layers[i].backward_accumulate(&cache.inputs[i], &g, &mut grads.layers[i]);
        }
        Ok(g)
    }
}

impl<T> Params<T> for Mlp<T> {
    fn tensors(&self) -> Vec<&[T]> {
        self.layers.iter().flat_map(|l| l.tensors()).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        self.layers.iter_mut().flat_map(|l| l.tensors_mut()).collect()
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::invalid(format!("need at least two widths, got {dims:?}")));
    }
    if dims.contains(&0) {
        return Err(Error::invalid(format!("zero width in {dims:?}")));
    }
    Ok(())
}

/// Weights `~ U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, biases zero.
pub fn init_mlp<T: Scalar>(dims: &[usize], slope: T, seed: u64) -> Result<Mlp<T>> {
    init_mlp_with_rng(dims, slope, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn init_mlp_with_rng<T: Scalar, R: RngCore>(dims: &[usize], slope: T, rng: &mut R) -> Result<Mlp<T>> {
    let mut mlp = Mlp::zeros(dims, slope)?;
    for layer in &mut mlp.layers {
        let bound = 1.0 / (layer.in_dim as f64).sqrt();
        for w in &mut layer.weights {
            *w = T::lit(rng.random_range(-bound..bound));
        }
    }
    Ok(mlp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaky_relu_values() {
        assert_eq!(leaky_relu(2.0, 0.01), 2.0);
        assert!((leaky_relu(-3.0f64, 0.01) + 0.03).abs() < 1e-15);
        assert_eq!(leaky_relu(0.0, 0.01), 0.0);
        assert_eq!(leaky_relu_derivative(0.0, 0.01), 0.01);
        assert_eq!(leaky_relu_derivative(5.0, 0.01), 1.0);
    }

    #[test]
    fn identity_and_affine_forward() {
        let id = Mlp::from_layers(
            vec![DenseLayer::from_parts(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0]).unwrap()],
            0.01,
        )
        .unwrap();
        assert_eq!(id.predict(&[3.0, -4.0]).unwrap(), vec![3.0, -4.0]);

        let affine = Mlp::from_layers(vec![DenseLayer::from_parts(1, 1, vec![2.0], vec![1.0]).unwrap()], 0.01).unwrap();
        assert_eq!(affine.predict(&[3.0]).unwrap(), vec![7.0]);
        assert!(affine.predict(&[3.0, 1.0]).is_err());
    }

    #[test]
    fn scalar_gradients() {
        let net = Mlp::from_layers(vec![DenseLayer::from_parts(1, 1, vec![2.0], vec![1.0]).unwrap()], 0.01).unwrap();
        let cache = net.forward(&[3.0]).unwrap();
        let mut g = net.zeros_like();
        let gx = net.backward(&cache, &[1.0], &mut g).unwrap();
        assert_eq!(g.layers[0].weights, vec![3.0]);
        assert_eq!(g.layers[0].bias, vec![1.0]);
        assert_eq!(gx, vec![2.0]);
    }

    #[test]
    fn zero_output_gradient_gives_zero_gradients() {
        let net: Mlp<f64> = init_mlp(&[3, 5, 2], 0.01, 4).unwrap();
        let cache = net.forward(&[0.3, -1.0, 2.0]).unwrap();
        let mut g = net.zeros_like();
        let gx = net.backward(&cache, &[0.0, 0.0], &mut g).unwrap();
        assert!(gx.iter().all(|&v| v == 0.0));
        assert!(g.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn init_is_seeded_and_shaped() {
        let a: Mlp<f64> = init_mlp(&[4, 1], 0.01, 9).unwrap();
        let b: Mlp<f64> = init_mlp(&[4, 1], 0.01, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.layers[0].weights.len(), 4);
        assert_eq!(a.layers[0].out_dim(), 1);
        assert!(a.layers[0].weights.iter().all(|w| w.abs() <= 0.5));
        assert!(init_mlp::<f64>(&[4], 0.01, 0).is_err());
        assert!(init_mlp::<f64>(&[], 0.01, 0).is_err());
    }

    #[test]
    fn init_draws_are_centered() {
        // U(-1, 1) for fan_in 1: sd = 1/sqrt(3); mean of 1e4 draws has sd 1/sqrt(3e4).
        let net: Mlp<f64> = init_mlp(&[1, 10_000], 0.01, 123).unwrap();
        let w = &net.layers[0].weights;
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let sigma = (1.0f64 / 3.0 / w.len() as f64).sqrt();
        assert!(mean.abs() < 3.0 * sigma, "mean {mean}");
    }
}
