use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam with bias correction. Moments are allocated on the first step.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub step_count: u64,
    first_moment: Vec<Vec<T>>,
    second_moment: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(config: AdamConfig) -> Self {
        AdamState {
            config,
            step_count: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    pub fn step(&mut self, mut params: Vec<&mut [T]>, grads: Vec<&[T]>) -> Result<()> {
        if params.len() != grads.len() || params.iter().zip(&grads).any(|(p, g)| p.len() != g.len()) {
            return Err(Error::shape("parameter and gradient tensors differ"));
        }
        if self.first_moment.is_empty() {
            self.first_moment = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
            self.second_moment = self.first_moment.clone();
        } else if self.first_moment.len() != params.len()
            || self.first_moment.iter().zip(&params).any(|(m, p)| m.len() != p.len())
        {
            return Err(Error::shape("optimizer state does not match parameters"));
        }

        self.step_count += 1;
        let c = &self.config;
        let t = self.step_count as i32;
        let b1 = T::lit(c.beta1);
        let b2 = T::lit(c.beta2);
        let one = T::one();
        let lr = T::lit(c.learning_rate);
        let eps = T::lit(c.epsilon);
        let correction1 = one - b1.powi(t);
        let correction2 = one - b2.powi(t);

        for (k, p) in params.iter_mut().enumerate() {
            let g = grads[k];
            let m = &mut self.first_moment[k];
            let v = &mut self.second_moment[k];
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (one - b1) * g[i];
                v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
                let m_hat = m[i] / correction1;
                let v_hat = v[i] / correction2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = AdamState::<f64>::new(AdamConfig::default());
        let mut p = vec![1.5, -2.0];
        s.step(vec![&mut p], vec![&[0.0, 0.0]]).unwrap();
        assert_eq!(p, vec![1.5, -2.0]);
        assert_eq!(s.step_count, 1);
    }

    #[test]
    fn shape_errors() {
        let mut s = AdamState::<f64>::new(AdamConfig::default());
        let mut p = vec![1.0];
        assert!(s.step(vec![&mut p], vec![&[0.0, 0.0]]).is_err());
        s.step(vec![&mut p], vec![&[1.0]]).unwrap();
        let mut q = vec![1.0, 2.0];
        assert!(s.step(vec![&mut q], vec![&[1.0, 1.0]]).is_err());
    }

    #[test]
    fn converges_on_least_squares_line() {
        // y = 3x, full batch; loss must fall over the first 50 steps.
        let xs = [-1.0, -0.5, 0.0, 0.5, 1.0, 2.0];
        let mut w = vec![0.0f64];
        let mut s = AdamState::new(AdamConfig::default());
        let loss = |w: f64| xs.iter().map(|x| (w * x - 3.0 * x).powi(2)).sum::<f64>() / xs.len() as f64;
        let mut prev = loss(w[0]);
        for _ in 0..50 {
            let g = xs.iter().map(|x| 2.0 * (w[0] * x - 3.0 * x) * x).sum::<f64>() / xs.len() as f64;
            s.step(vec![&mut w], vec![&[g]]).unwrap();
            let cur = loss(w[0]);
            assert!(cur < prev);
            prev = cur;
        }
    }
}
