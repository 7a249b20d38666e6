use crate::nn::{Scalar, Tensor};
use crate::Result;

/// Mean+max pooling over time: `B×T×C` → `B×2C`, means in `0..C` and
/// maxima in `C..2C`.
///
/// Each mean is summed in sorted order in f64, so it does not depend on
/// the order of the time steps, and is clamped into `[min, max]` against
/// rounding.
pub fn pool_features<F: Scalar>(fmap: &Tensor<F>) -> Result<Tensor<F>> {
    let (batch, steps, channels) = fmap.dims3()?;
    let x = fmap.data();
    let mut out = vec![F::zero(); batch * 2 * channels];
    let mut column = vec![F::zero(); steps];
    for b in 0..batch {
        let (means, maxes) = out[b * 2 * channels..(b + 1) * 2 * channels].split_at_mut(channels);
        for c in 0..channels {
            for (t, v) in column.iter_mut().enumerate() {
                *v = x[(b * steps + t) * channels + c];
            }
            let (mean, max) = sorted_mean_max(&mut column);
            means[c] = mean;
            maxes[c] = max;
        }
    }
    Tensor::new(vec![batch, 2 * channels], out)
}

/// Order-independent mean and max of `values`, which get sorted in place.
pub(crate) fn sorted_mean_max<F: Scalar>(values: &mut [F]) -> (F, F) {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let sum: f64 = values.iter().map(|v| v.to_f64_lossy()).sum();
    let (lo, hi) = (values[0], values[values.len() - 1]);
    let mean = F::from_f64_lossy(sum / values.len() as f64);
    (mean.max(lo).min(hi), hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_max_per_filter() {
        let fmap = Tensor::<f64>::from_f64(&[1, 3, 2], &[1.0, 10.0, 2.0, 30.0, 3.0, 20.0]).unwrap();
        let p = pool_features(&fmap).unwrap();
        assert_eq!(p.shape(), &[1, 4]);
        assert_eq!(p.data(), &[2.0, 20.0, 3.0, 30.0]);
    }

    #[test]
    fn constant_map() {
        let p = pool_features(&Tensor::<f32>::full(&[2, 13, 768], 0.75)).unwrap();
        assert_eq!(p.shape(), &[2, 1536]);
        assert!(p.data().iter().all(|&v| v == 0.75));
    }
}
