use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn check_lengths<T>(pred: &[T], target: &[T]) -> Result<()> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::shape(format!(
            "loss over {} predictions and {} targets",
            pred.len(),
            target.len()
        )));
    }
    Ok(())
}

/// Mean absolute error and its subgradient `sign(pred - target) / len`, with `sign(0) = 0`.
pub fn mae_loss<T: Scalar>(pred: &[T], target: &[T]) -> Result<(T, Vec<T>)> {
    check_lengths(pred, target)?;
    let n = T::from_usize(pred.len()).unwrap();
    let mut total = T::zero();
    let grad = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let d = p - t;
            total += d.abs();
            if d > T::zero() {
                n.recip()
            } else if d < T::zero() {
                -n.recip()
            } else {
                T::zero()
            }
        })
        .collect();
    Ok((total / n, grad))
}

/// Mean squared error and its gradient `2 (pred - target) / len`.
pub fn mse_loss<T: Scalar>(pred: &[T], target: &[T]) -> Result<(T, Vec<T>)> {
    check_lengths(pred, target)?;
    let n = T::from_usize(pred.len()).unwrap();
    let two = T::lit(2.0);
    let mut total = T::zero();
    let grad = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let d = p - t;
            total += d * d;
            two * d / n
        })
        .collect();
    Ok((total / n, grad))
}
