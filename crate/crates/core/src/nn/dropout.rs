use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Mode, Scalar, Tensor};
use crate::{Error, Result};

#[derive(Debug)]
pub struct DropoutCtx<F> {
    /// Per-element multiplier: 0 for dropped, 1/(1−rate) for kept. Empty
    /// when the layer acted as the identity.
    scale: Vec<F>,
    shape: Vec<usize>,
}

/// Inverted dropout. Train mode zeroes each element with probability
/// `rate` and scales survivors by `1/(1−rate)`; infer mode is the identity.
pub fn dropout<F: Scalar>(
    input: &Tensor<F>,
    rate: f64,
    mode: Mode,
    seed: u64,
) -> Result<(Tensor<F>, DropoutCtx<F>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::contract(format!(
            "dropout rate {rate} outside [0, 1)"
        )));
    }
    let shape = input.shape().to_vec();
    if mode == Mode::Infer || rate == 0.0 {
        return Ok((
            input.clone(),
            DropoutCtx {
                scale: Vec::new(),
                shape,
            },
        ));
    }
    let keep = F::from_f64_lossy(1.0 / (1.0 - rate));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale: Vec<F> = (0..input.len())
        .map(|_| {
            if rng.gen::<f64>() < rate {
                F::zero()
            } else {
                keep
            }
        })
        .collect();
    let mut out = input.clone();
    for (v, &s) in out.data_mut().iter_mut().zip(&scale) {
        *v = *v * s;
    }
    Ok((out, DropoutCtx { scale, shape }))
}

pub fn dropout_grad<F: Scalar>(ctx: DropoutCtx<F>, upstream: &Tensor<F>) -> Result<Tensor<F>> {
    if upstream.shape() != ctx.shape {
        return Err(Error::contract(
            "dropout upstream shape does not match forward",
        ));
    }
    let mut d = upstream.clone();
    if !ctx.scale.is_empty() {
        for (g, &s) in d.data_mut().iter_mut().zip(&ctx.scale) {
            *g = *g * s;
        }
    }
    Ok(d)
}
