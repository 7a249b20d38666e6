use super::{Scalar, Tensor};
use crate::{Error, Result};

#[derive(Debug)]
pub struct DenseCtx<F> {
    input: Tensor<F>,
    weights: Tensor<F>,
}

#[derive(Debug)]
pub struct DenseGrads<F> {
    pub d_input: Tensor<F>,
    pub d_weights: Tensor<F>,
    pub d_bias: Tensor<F>,
}

/// `input · weights + bias` for a `B×Din` input and `Din×Dout` weights.
pub fn dense<F: Scalar>(
    input: &Tensor<F>,
    weights: &Tensor<F>,
    bias: &Tensor<F>,
) -> Result<(Tensor<F>, DenseCtx<F>)> {
    let (rows, din) = input.dims2()?;
    let (w_in, dout) = weights.dims2()?;
    if w_in != din || bias.shape() != [dout] {
        return Err(Error::contract(format!(
            "dense shapes disagree: input {:?}, weights {:?}, bias {:?}",
            input.shape(),
            weights.shape(),
            bias.shape()
        )));
    }
    let x = input.data();
    let w = weights.data();
    let mut out = Vec::with_capacity(rows * dout);
    for x_row in x.chunks_exact(din) {
        let mut acc = bias.data().to_vec();
        for (i, &xv) in x_row.iter().enumerate() {
            for (a, &wv) in acc.iter_mut().zip(&w[i * dout..(i + 1) * dout]) {
                *a = *a + xv * wv;
            }
        }
        out.extend(acc);
    }
    let ctx = DenseCtx {
        input: input.clone(),
        weights: weights.clone(),
    };
    Ok((Tensor::new(vec![rows, dout], out)?, ctx))
}

pub fn dense_grad<F: Scalar>(ctx: DenseCtx<F>, upstream: &Tensor<F>) -> Result<DenseGrads<F>> {
    let (rows, din) = ctx.input.dims2()?;
    let (_, dout) = ctx.weights.dims2()?;
    if upstream.shape() != [rows, dout] {
        return Err(Error::contract(format!(
            "dense upstream shape {:?} does not match forward output [{rows}, {dout}]",
            upstream.shape()
        )));
    }
    let x = ctx.input.data();
    let w = ctx.weights.data();
    let g = upstream.data();

    let mut d_input = vec![F::zero(); rows * din];
    let mut d_weights = vec![F::zero(); din * dout];
    let mut d_bias = vec![F::zero(); dout];
    for r in 0..rows {
        let g_row = &g[r * dout..(r + 1) * dout];
        let x_row = &x[r * din..(r + 1) * din];
        for (d, &gv) in d_bias.iter_mut().zip(g_row) {
            *d = *d + gv;
        }
        for i in 0..din {
            let w_row = &w[i * dout..(i + 1) * dout];
            d_input[r * din + i] = w_row.iter().zip(g_row).map(|(&a, &b)| a * b).sum();
            let xv = x_row[i];
            for (d, &gv) in d_weights[i * dout..(i + 1) * dout].iter_mut().zip(g_row) {
                *d = *d + xv * gv;
            }
        }
    }
    Ok(DenseGrads {
        d_input: Tensor::new(vec![rows, din], d_input)?,
        d_weights: Tensor::new(vec![din, dout], d_weights)?,
        d_bias: Tensor::new(vec![dout], d_bias)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_matmul() {
        let x = Tensor::<f64>::from_f64(&[1, 2], &[1.0, 2.0]).unwrap();
        let w = Tensor::<f64>::from_f64(&[2, 2], &[1.0, 0.0, 0.0, 1.0]).unwrap();
        let b = Tensor::<f64>::from_f64(&[2], &[3.0, 4.0]).unwrap();
        let (y, _) = dense(&x, &w, &b).unwrap();
        assert_eq!(y.data(), &[4.0, 6.0]);
    }

    #[test]
    fn identity_weights_zero_bias() {
        let x = Tensor::<f64>::from_f64(&[2, 3], &[1.0, -2.0, 3.5, 0.0, 9.0, -1.0]).unwrap();
        let mut eye = vec![0.0; 9];
        for i in 0..3 {
            eye[i * 3 + i] = 1.0;
        }
        let (y, _) = dense(
            &x,
            &Tensor::<f64>::from_f64(&[3, 3], &eye).unwrap(),
            &Tensor::zeros(&[3]),
        )
        .unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn mismatched_shapes_fail() {
        let x = Tensor::<f32>::zeros(&[1, 3]);
        assert!(dense(&x, &Tensor::zeros(&[2, 2]), &Tensor::zeros(&[2])).is_err());
        assert!(dense(&x, &Tensor::zeros(&[3, 2]), &Tensor::zeros(&[3])).is_err());
    }
}
