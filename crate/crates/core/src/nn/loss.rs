use super::{Scalar, Tensor};
use crate::{Error, Result};

/// Row-wise softmax of a `B×K` tensor with max subtraction.
pub fn softmax_rows<F: Scalar>(logits: &Tensor<F>) -> Result<Tensor<F>> {
    let (_, k) = logits.dims2()?;
    let mut probs = logits.clone();
    for row in probs.data_mut().chunks_exact_mut(k) {
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        let mut sum = F::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum = sum + *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
    Ok(probs)
}

#[derive(Debug, Clone)]
pub struct SoftmaxXent<F> {
    pub loss: F,
    pub probs: Tensor<F>,
    pub d_logits: Tensor<F>,
}

/// Mean categorical cross-entropy of softmax probabilities against class
/// indices, with the gradient `(probs − onehot)/B`.
pub fn softmax_xent<F: Scalar>(logits: &Tensor<F>, targets: &[usize]) -> Result<SoftmaxXent<F>> {
    let (rows, k) = logits.dims2()?;
    if k < 2 {
        return Err(Error::contract("softmax_xent needs at least two classes"));
    }
    if targets.len() != rows {
        return Err(Error::contract(format!(
            "{} targets for {rows} rows",
            targets.len()
        )));
    }
    if let Some(&bad) = targets.iter().find(|&&t| t >= k) {
        return Err(Error::contract(format!(
            "target index {bad} out of range for {k} classes"
        )));
    }
    let probs = softmax_rows(logits)?;
    let batch = F::from_usize(rows).unwrap_or_else(F::one);
    let mut loss = F::zero();
    let mut d = probs.clone();
    for ((row, d_row), &t) in probs
        .data()
        .chunks_exact(k)
        .zip(d.data_mut().chunks_exact_mut(k))
        .zip(targets)
    {
        loss = loss - row[t].ln();
        d_row[t] = d_row[t] - F::one();
        d_row.iter_mut().for_each(|v| *v = *v / batch);
    }
    Ok(SoftmaxXent {
        loss: loss / batch,
        probs,
        d_logits: d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits() {
        let out = softmax_xent(&Tensor::<f64>::zeros(&[1, 3]), &[1]).unwrap();
        for &p in out.probs.data() {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!((out.loss - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn two_class_hand_case() {
        let logits = Tensor::<f64>::from_f64(&[1, 2], &[1.0, 0.0]).unwrap();
        let out = softmax_xent(&logits, &[0]).unwrap();
        let e = std::f64::consts::E;
        assert!((out.probs.data()[0] - e / (e + 1.0)).abs() < 1e-12);
        assert!((out.probs.data()[0] - 0.7311).abs() < 1e-4);
        assert!((out.loss - 0.3133).abs() < 1e-4);
    }

    #[test]
    fn large_logits_stay_finite() {
        let logits =
            Tensor::<f64>::from_f64(&[2, 3], &[1000.0, -1000.0, 0.0, 5e3, 5e3, 5e3]).unwrap();
        let out = softmax_xent(&logits, &[0, 2]).unwrap();
        assert!(out.probs.is_finite());
        for row in out.probs.data().chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn target_out_of_range() {
        assert!(softmax_xent(&Tensor::<f32>::zeros(&[1, 2]), &[2]).is_err());
    }
}
