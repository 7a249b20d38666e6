use rayon::prelude::*;

use super::{Scalar, Tensor};
use crate::{Error, Result};

/// Output length under "same-ceil" padding: `ceil(len / stride)`.
pub fn conv_out_len(len: usize, stride: usize) -> usize {
    len.div_ceil(stride)
}

/// Cache for [`conv1d_grad`].
#[derive(Debug)]
pub struct Conv1dCtx<F> {
    input: Tensor<F>,
    weights: Tensor<F>,
    stride: usize,
    out_shape: [usize; 3],
}

#[derive(Debug)]
pub struct Conv1dGrads<F> {
    pub d_input: Tensor<F>,
    pub d_weights: Tensor<F>,
    pub d_bias: Tensor<F>,
}

fn pad_left(kernel: usize) -> isize {
    ((kernel - 1) / 2) as isize
}

/// 1D cross-correlation over a `B×T×Cin` input with `K×Cin×Cout` weights.
///
/// Output step `t` reads inputs `t·stride + k − floor((K−1)/2)` for
/// `k in 0..K`; positions outside the signal are zero. The output has
/// `ceil(T / stride)` steps.
pub fn conv1d<F: Scalar>(
    input: &Tensor<F>,
    weights: &Tensor<F>,
    bias: &Tensor<F>,
    stride: usize,
) -> Result<(Tensor<F>, Conv1dCtx<F>)> {
    let (batch, len, cin) = input.dims3()?;
    let (kernel, w_cin, cout) = weights.dims3()?;
    if stride == 0 {
        return Err(Error::contract("conv1d stride must be at least 1"));
    }
    if w_cin != cin {
        return Err(Error::contract(format!(
            "conv1d input has {cin} channels but weights expect {w_cin}"
        )));
    }
    if bias.shape() != [cout] {
        return Err(Error::contract(format!(
            "conv1d bias shape {:?} does not match {cout} output channels",
            bias.shape()
        )));
    }
    let out_len = conv_out_len(len, stride);
    let pad = pad_left(kernel);
    let x = input.data();
    let w = weights.data();
    let b = bias.data();
    let mut out = vec![F::zero(); batch * out_len * cout];

    out.par_chunks_mut(cout).enumerate().for_each(|(row, acc)| {
        let bi = row / out_len;
        let t = row % out_len;
        acc.copy_from_slice(b);
        for k in 0..kernel {
            let src = (t * stride) as isize + k as isize - pad;
            if src < 0 || src >= len as isize {
                continue;
            }
            let x_row = &x[(bi * len + src as usize) * cin..][..cin];
            let w_k = &w[k * cin * cout..][..cin * cout];
            for (ci, &xv) in x_row.iter().enumerate() {
                let w_row = &w_k[ci * cout..][..cout];
                for (a, &wv) in acc.iter_mut().zip(w_row) {
                    *a = *a + xv * wv;
                }
            }
        }
    });

    let output = Tensor::new(vec![batch, out_len, cout], out)?;
    let ctx = Conv1dCtx {
        input: input.clone(),
        weights: weights.clone(),
        stride,
        out_shape: [batch, out_len, cout],
    };
    Ok((output, ctx))
}

/// Exact gradients of [`conv1d`] with respect to input, weights and bias.
pub fn conv1d_grad<F: Scalar>(ctx: Conv1dCtx<F>, upstream: &Tensor<F>) -> Result<Conv1dGrads<F>> {
    if upstream.shape() != ctx.out_shape {
        return Err(Error::contract(format!(
            "conv1d upstream shape {:?} does not match forward output {:?}",
            upstream.shape(),
            ctx.out_shape
        )));
    }
    let (batch, len, cin) = ctx.input.dims3()?;
    let (kernel, _, cout) = ctx.weights.dims3()?;
    let [_, out_len, _] = ctx.out_shape;
    let pad = pad_left(kernel);
    let x = ctx.input.data();
    let w = ctx.weights.data();
    let g = upstream.data();

    let mut d_bias = vec![F::zero(); cout];
    for g_row in g.chunks_exact(cout) {
        for (d, &gv) in d_bias.iter_mut().zip(g_row) {
            *d = *d + gv;
        }
    }

    // Each input row has its own fixed (t, k) accumulation order, so the
    // per-batch split is deterministic.
    let mut d_input = vec![F::zero(); batch * len * cin];
    d_input
        .par_chunks_mut(len * cin)
        .enumerate()
        .for_each(|(bi, dx_b)| {
            for t in 0..out_len {
                let g_row = &g[(bi * out_len + t) * cout..][..cout];
                for k in 0..kernel {
                    let src = (t * ctx.stride) as isize + k as isize - pad;
                    if src < 0 || src >= len as isize {
                        continue;
                    }
                    let dx_row = &mut dx_b[src as usize * cin..][..cin];
                    let w_k = &w[k * cin * cout..][..cin * cout];
                    for (ci, dx) in dx_row.iter_mut().enumerate() {
                        let w_row = &w_k[ci * cout..][..cout];
                        let dot: F = w_row.iter().zip(g_row).map(|(&a, &b)| a * b).sum();
                        *dx = *dx + dot;
                    }
                }
            }
        });

    // Weight gradient: parallel over (k, ci) rows, each summing over (b, t)
    // in a fixed order.
    let mut d_weights = vec![F::zero(); kernel * cin * cout];
    d_weights
        .par_chunks_mut(cout)
        .enumerate()
        .for_each(|(row, dw_row)| {
            let k = row / cin;
            let ci = row % cin;
            for bi in 0..batch {
                for t in 0..out_len {
                    let src = (t * ctx.stride) as isize + k as isize - pad;
                    if src < 0 || src >= len as isize {
                        continue;
                    }
                    let xv = x[(bi * len + src as usize) * cin + ci];
                    if xv == F::zero() {
                        continue;
                    }
                    let g_row = &g[(bi * out_len + t) * cout..][..cout];
                    for (d, &gv) in dw_row.iter_mut().zip(g_row) {
                        *d = *d + xv * gv;
                    }
                }
            }
        });

    Ok(Conv1dGrads {
        d_input: Tensor::new(vec![batch, len, cin], d_input)?,
        d_weights: Tensor::new(vec![kernel, cin, cout], d_weights)?,
        d_bias: Tensor::new(vec![cout], d_bias)?,
    })
}
