use rand::Rng;

use crate::nn::{
    batchnorm1d, batchnorm1d_grad, batchnorm1d_infer, conv1d, conv1d_grad, dense, dense_grad,
    BatchNormCtx, Conv1dCtx, DenseCtx, Mode, Param, RunningStats, Scalar, Tensor,
};
use crate::Result;

/// Convolution with its weight and bias parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<F> {
    pub weight: Param<F>,
    pub bias: Param<F>,
    pub stride: usize,
}

impl<F: Scalar> ConvLayer<F> {
    /// Kaiming-normal weights (fan-in `K·Cin`), zero bias.
    pub fn new<R: Rng + ?Sized>(
        kernel: usize,
        cin: usize,
        cout: usize,
        stride: usize,
        rng: &mut R,
    ) -> Self {
        let std = (2.0 / (kernel * cin) as f64).sqrt();
        ConvLayer {
            weight: Param::new(Tensor::randn(&[kernel, cin, cout], std, rng)),
            bias: Param::new(Tensor::zeros(&[cout])),
            stride,
        }
    }

    pub fn forward(&self, x: &Tensor<F>) -> Result<(Tensor<F>, Conv1dCtx<F>)> {
        conv1d(x, &self.weight.value, &self.bias.value, self.stride)
    }

    pub fn backward(&mut self, ctx: Conv1dCtx<F>, upstream: &Tensor<F>) -> Result<Tensor<F>> {
        let g = conv1d_grad(ctx, upstream)?;
        self.weight.accumulate(&g.d_weights)?;
        self.bias.accumulate(&g.d_bias)?;
        Ok(g.d_input)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnLayer<F> {
    pub gamma: Param<F>,
    pub beta: Param<F>,
    pub stats: RunningStats<F>,
}

impl<F: Scalar> BnLayer<F> {
    pub fn new(channels: usize) -> Self {
        BnLayer {
            gamma: Param::new(Tensor::full(&[channels], F::one())),
            beta: Param::new(Tensor::zeros(&[channels])),
            stats: RunningStats::uninitialized(channels),
        }
    }

    pub fn forward(&mut self, x: &Tensor<F>, mode: Mode) -> Result<(Tensor<F>, BatchNormCtx<F>)> {
        batchnorm1d(
            x,
            &self.gamma.value,
            &self.beta.value,
            &mut self.stats,
            mode,
        )
    }

    pub fn infer(&self, x: &Tensor<F>) -> Result<Tensor<F>> {
        batchnorm1d_infer(x, &self.gamma.value, &self.beta.value, &self.stats).map(|(y, _)| y)
    }

    pub fn backward(&mut self, ctx: BatchNormCtx<F>, upstream: &Tensor<F>) -> Result<Tensor<F>> {
        let g = batchnorm1d_grad(ctx, upstream)?;
        self.gamma.accumulate(&g.d_gamma)?;
        self.beta.accumulate(&g.d_beta)?;
        Ok(g.d_input)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<F> {
    pub weight: Param<F>,
    pub bias: Param<F>,
}

impl<F: Scalar> DenseLayer<F> {
    pub fn new<R: Rng + ?Sized>(din: usize, dout: usize, rng: &mut R) -> Self {
        let std = (2.0 / din as f64).sqrt();
        DenseLayer {
            weight: Param::new(Tensor::randn(&[din, dout], std, rng)),
            bias: Param::new(Tensor::zeros(&[dout])),
        }
    }

    pub fn forward(&self, x: &Tensor<F>) -> Result<(Tensor<F>, DenseCtx<F>)> {
        dense(x, &self.weight.value, &self.bias.value)
    }

    pub fn backward(&mut self, ctx: DenseCtx<F>, upstream: &Tensor<F>) -> Result<Tensor<F>> {
        let g = dense_grad(ctx, upstream)?;
        self.weight.accumulate(&g.d_weights)?;
        self.bias.accumulate(&g.d_bias)?;
        Ok(g.d_input)
    }
}
