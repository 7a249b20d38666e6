use super::{Mode, Scalar, Tensor};
use crate::{Error, Result};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Per-channel running mean and (biased) variance used in inference mode.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats<F> {
    pub mean: Tensor<F>,
    pub var: Tensor<F>,
    pub initialized: bool,
}

impl<F: Scalar> RunningStats<F> {
    /// Mean 0, variance 1, flagged as never updated.
    pub fn uninitialized(channels: usize) -> Self {
        RunningStats {
            mean: Tensor::zeros(&[channels]),
            var: Tensor::full(&[channels], F::one()),
            initialized: false,
        }
    }

    pub fn from_values(mean: Tensor<F>, var: Tensor<F>) -> Result<Self> {
        if mean.shape() != var.shape() || mean.shape().len() != 1 {
            return Err(Error::contract(
                "running mean/var must be equal-length vectors",
            ));
        }
        Ok(RunningStats {
            mean,
            var,
            initialized: true,
        })
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }
}

#[derive(Debug)]
pub struct BatchNormCtx<F> {
    mode: Mode,
    x_hat: Tensor<F>,
    inv_std: Vec<F>,
    gamma: Vec<F>,
}

#[derive(Debug)]
pub struct BatchNormGrads<F> {
    pub d_input: Tensor<F>,
    pub d_gamma: Tensor<F>,
    pub d_beta: Tensor<F>,
}

/// Batch normalization over the `B×T` axes of a `B×T×C` tensor.
///
/// Train mode normalizes with the batch mean and biased variance and folds
/// them into `running` with momentum [`BN_MOMENTUM`]. Infer mode uses
/// `running` and fails if it was never populated.
pub fn batchnorm1d<F: Scalar>(
    input: &Tensor<F>,
    gamma: &Tensor<F>,
    beta: &Tensor<F>,
    running: &mut RunningStats<F>,
    mode: Mode,
) -> Result<(Tensor<F>, BatchNormCtx<F>)> {
    let channels = check_shapes(input, gamma, beta, running)?;
    match mode {
        Mode::Train => {
            let (mean, var) = batch_stats(input.data(), channels);
            let mom = F::from_f64_lossy(BN_MOMENTUM);
            let keep = F::one() - mom;
            for (r, &m) in running.mean.data_mut().iter_mut().zip(&mean) {
                *r = keep * *r + mom * m;
            }
            for (r, &v) in running.var.data_mut().iter_mut().zip(&var) {
                *r = keep * *r + mom * v;
            }
            running.initialized = true;
            normalize(input, gamma, beta, &mean, &var, Mode::Train)
        }
        Mode::Infer => batchnorm1d_infer(input, gamma, beta, running),
    }
}

/// Inference-mode batch normalization that leaves `running` untouched.
pub fn batchnorm1d_infer<F: Scalar>(
    input: &Tensor<F>,
    gamma: &Tensor<F>,
    beta: &Tensor<F>,
    running: &RunningStats<F>,
) -> Result<(Tensor<F>, BatchNormCtx<F>)> {
    check_shapes(input, gamma, beta, running)?;
    if !running.initialized {
        return Err(Error::UninitializedStats);
    }
    normalize(
        input,
        gamma,
        beta,
        running.mean.data(),
        running.var.data(),
        Mode::Infer,
    )
}

fn check_shapes<F: Scalar>(
    input: &Tensor<F>,
    gamma: &Tensor<F>,
    beta: &Tensor<F>,
    running: &RunningStats<F>,
) -> Result<usize> {
    let (_, _, channels) = input.dims3()?;
    if gamma.shape() != [channels] || beta.shape() != [channels] || running.channels() != channels {
        return Err(Error::contract(format!(
            "batchnorm parameters do not match {channels} channels"
        )));
    }
    Ok(channels)
}

/// Per-channel mean and biased variance over all rows.
fn batch_stats<F: Scalar>(x: &[F], channels: usize) -> (Vec<F>, Vec<F>) {
    let rows = x.len() / channels;
    let n = F::from_usize(rows).unwrap_or_else(F::one);
    let mut mean = vec![F::zero(); channels];
    for row in x.chunks_exact(channels) {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m = *m + v;
        }
    }
    mean.iter_mut().for_each(|m| *m = *m / n);
    let mut var = vec![F::zero(); channels];
    for row in x.chunks_exact(channels) {
        for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
            let d = v - m;
            *s = *s + d * d;
        }
    }
    var.iter_mut().for_each(|s| *s = *s / n);
    (mean, var)
}

fn normalize<F: Scalar>(
    input: &Tensor<F>,
    gamma: &Tensor<F>,
    beta: &Tensor<F>,
    mean: &[F],
    var: &[F],
    mode: Mode,
) -> Result<(Tensor<F>, BatchNormCtx<F>)> {
    let channels = mean.len();
    let x = input.data();
    let eps = F::from_f64_lossy(BN_EPS);
    let inv_std: Vec<F> = var.iter().map(|&v| (v + eps).sqrt().recip()).collect();
    let g = gamma.data();
    let b = beta.data();
    let mut x_hat = vec![F::zero(); x.len()];
    let mut out = vec![F::zero(); x.len()];
    for ((row, xh_row), out_row) in x
        .chunks_exact(channels)
        .zip(x_hat.chunks_exact_mut(channels))
        .zip(out.chunks_exact_mut(channels))
    {
        for c in 0..channels {
            let xh = (row[c] - mean[c]) * inv_std[c];
            xh_row[c] = xh;
            out_row[c] = g[c] * xh + b[c];
        }
    }

    let shape = input.shape().to_vec();
    let ctx = BatchNormCtx {
        mode,
        x_hat: Tensor::new(shape.clone(), x_hat)?,
        inv_std,
        gamma: g.to_vec(),
    };
    Ok((Tensor::new(shape, out)?, ctx))
}

pub fn batchnorm1d_grad<F: Scalar>(
    ctx: BatchNormCtx<F>,
    upstream: &Tensor<F>,
) -> Result<BatchNormGrads<F>> {
    if upstream.shape() != ctx.x_hat.shape() {
        return Err(Error::contract(format!(
            "batchnorm upstream shape {:?} does not match forward output {:?}",
            upstream.shape(),
            ctx.x_hat.shape()
        )));
    }
    let channels = ctx.gamma.len();
    let g = upstream.data();
    let xh = ctx.x_hat.data();
    let rows = g.len() / channels;

    let mut d_gamma = vec![F::zero(); channels];
    let mut d_beta = vec![F::zero(); channels];
    for (g_row, xh_row) in g.chunks_exact(channels).zip(xh.chunks_exact(channels)) {
        for c in 0..channels {
            d_beta[c] = d_beta[c] + g_row[c];
            d_gamma[c] = d_gamma[c] + g_row[c] * xh_row[c];
        }
    }

    let mut d_input = vec![F::zero(); g.len()];
    match ctx.mode {
        Mode::Infer => {
            for (dx_row, g_row) in d_input
                .chunks_exact_mut(channels)
                .zip(g.chunks_exact(channels))
            {
                for c in 0..channels {
                    dx_row[c] = g_row[c] * ctx.gamma[c] * ctx.inv_std[c];
                }
            }
        }
        Mode::Train => {
            // dx = γ·inv_std/N · (N·g − Σg − x̂·Σ(g·x̂))
            let n = F::from_usize(rows).unwrap_or_else(F::one);
            for ((dx_row, g_row), xh_row) in d_input
                .chunks_exact_mut(channels)
                .zip(g.chunks_exact(channels))
                .zip(xh.chunks_exact(channels))
            {
                for c in 0..channels {
                    let scale = ctx.gamma[c] * ctx.inv_std[c] / n;
                    dx_row[c] = scale * (n * g_row[c] - d_beta[c] - xh_row[c] * d_gamma[c]);
                }
            }
        }
    }

    Ok(BatchNormGrads {
        d_input: Tensor::new(upstream.shape().to_vec(), d_input)?,
        d_gamma: Tensor::new(vec![channels], d_gamma)?,
        d_beta: Tensor::new(vec![channels], d_beta)?,
    })
}
