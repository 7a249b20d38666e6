use crate::nn::{softmax_rows, Scalar, Tensor};
use crate::{Error, Result};

/// Cross-entropy on per-step softmax probabilities averaged over time.
///
/// `step_logits` is `B×T×K`. Each step is softmaxed, the `T` probability
/// rows are averaged into `p̄` (`B×K`) and the loss is
/// `mean_b −ln p̄[b, target_b]`. Returns `(loss, p̄, d_step_logits)`.
pub fn averaged_softmax_xent<F: Scalar>(
    step_logits: &Tensor<F>,
    targets: &[usize],
) -> Result<(F, Tensor<F>, Tensor<F>)> {
    let (batch, steps, k) = step_logits.dims3()?;
    if targets.len() != batch {
        return Err(Error::contract(format!(
            "{} targets for batch of {batch}",
            targets.len()
        )));
    }
    if let Some(&bad) = targets.iter().find(|&&t| t >= k) {
        return Err(Error::contract(format!(
            "target index {bad} out of range for {k} classes"
        )));
    }
    let probs = softmax_rows(&step_logits.clone().reshape(&[batch * steps, k])?)?;
    let p = probs.data();
    let t_f = F::from_usize(steps).unwrap_or_else(F::one);
    let b_f = F::from_usize(batch).unwrap_or_else(F::one);

    let mut avg = vec![F::zero(); batch * k];
    for b in 0..batch {
        for t in 0..steps {
            let row = &p[(b * steps + t) * k..][..k];
            for (a, &v) in avg[b * k..(b + 1) * k].iter_mut().zip(row) {
                *a = *a + v;
            }
        }
    }
    avg.iter_mut().for_each(|a| *a = *a / t_f);

    let mut loss = F::zero();
    let mut d = vec![F::zero(); batch * steps * k];
    for (b, &y) in targets.iter().enumerate() {
        let p_y = avg[b * k + y];
        loss = loss - p_y.ln();
        // dL/dp_t[y] = −1/(B·T·p̄_y); softmax backward per step
        let g_y = -F::one() / (b_f * t_f * p_y);
        for t in 0..steps {
            let row = &p[(b * steps + t) * k..][..k];
            let d_row = &mut d[(b * steps + t) * k..][..k];
            let dot = g_y * row[y];
            for (j, dz) in d_row.iter_mut().enumerate() {
                let g_j = if j == y { g_y } else { F::zero() };
                *dz = row[j] * (g_j - dot);
            }
        }
    }

    Ok((
        loss / b_f,
        Tensor::new(vec![batch, k], avg)?,
        Tensor::new(vec![batch, steps, k], d)?,
    ))
}
