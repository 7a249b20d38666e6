use super::{Scalar, Tensor};
use crate::{Error, Result};

#[derive(Debug)]
pub struct ReluCtx {
    active: Vec<bool>,
    shape: Vec<usize>,
}

pub fn relu<F: Scalar>(input: &Tensor<F>) -> (Tensor<F>, ReluCtx) {
    let mut out = input.clone();
    let active = out
        .data_mut()
        .iter_mut()
        .map(|v| {
            let on = *v > F::zero();
            if !on {
                *v = F::zero();
            }
            on
        })
        .collect();
    let ctx = ReluCtx {
        active,
        shape: input.shape().to_vec(),
    };
    (out, ctx)
}

/// Passes `upstream` where the forward input was strictly positive.
pub fn relu_grad<F: Scalar>(ctx: ReluCtx, upstream: &Tensor<F>) -> Result<Tensor<F>> {
    if upstream.shape() != ctx.shape {
        return Err(Error::contract(format!(
            "relu upstream shape {:?} does not match forward {:?}",
            upstream.shape(),
            ctx.shape
        )));
    }
    let mut d = upstream.clone();
    for (g, &on) in d.data_mut().iter_mut().zip(&ctx.active) {
        if !on {
            *g = F::zero();
        }
    }
    Ok(d)
}
