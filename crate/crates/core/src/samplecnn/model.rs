use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::head::averaged_softmax_xent;
use super::layers::{BnLayer, ConvLayer, DenseLayer};
use super::SampleCnnConfig;
use crate::nn::{
    adam_step, dropout, dropout_grad, relu, relu_grad, softmax_rows, AdamConfig, BatchNormCtx,
    Conv1dCtx, DenseCtx, DropoutCtx, Mode, Param, ReluCtx, RunningStats, Scalar, Tensor,
};
use crate::{Error, Result};

/// Convolution → batch norm → ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage<F> {
    pub conv: ConvLayer<F>,
    pub bn: BnLayer<F>,
}

#[derive(Debug)]
struct StageCtx<F> {
    conv: Conv1dCtx<F>,
    bn: BatchNormCtx<F>,
    relu: ReluCtx,
}

impl<F: Scalar> Stage<F> {
    fn new(kernel: usize, cin: usize, cout: usize, stride: usize, rng: &mut ChaCha8Rng) -> Self {
        Stage {
            conv: ConvLayer::new(kernel, cin, cout, stride, rng),
            bn: BnLayer::new(cout),
        }
    }

    fn forward(&mut self, x: &Tensor<F>, mode: Mode) -> Result<(Tensor<F>, StageCtx<F>)> {
        let (y, conv) = self.conv.forward(x)?;
        let (y, bn) = self.bn.forward(&y, mode)?;
        let (y, relu) = relu(&y);
        Ok((y, StageCtx { conv, bn, relu }))
    }

    fn infer(&self, x: &Tensor<F>) -> Result<Tensor<F>> {
        let (y, _) = self.conv.forward(x)?;
        Ok(relu(&self.bn.infer(&y)?).0)
    }

    fn backward(&mut self, ctx: StageCtx<F>, upstream: &Tensor<F>) -> Result<Tensor<F>> {
        let d = relu_grad(ctx.relu, upstream)?;
        let d = self.bn.backward(ctx.bn, &d)?;
        self.conv.backward(ctx.conv, &d)
    }
}

/// Residual block: `conv(s=3) → BN → ReLU → conv(s=1) → BN`, added to a
/// stride-3 1×1 projection of the input, then ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct ResBlock<F> {
    pub conv1: ConvLayer<F>,
    pub bn1: BnLayer<F>,
    pub conv2: ConvLayer<F>,
    pub bn2: BnLayer<F>,
    pub shortcut: ConvLayer<F>,
}

#[derive(Debug)]
struct BlockCtx<F> {
    conv1: Conv1dCtx<F>,
    bn1: BatchNormCtx<F>,
    relu1: ReluCtx,
    conv2: Conv1dCtx<F>,
    bn2: BatchNormCtx<F>,
    shortcut: Conv1dCtx<F>,
    relu_out: ReluCtx,
}

impl<F: Scalar> ResBlock<F> {
    fn new(kernel: usize, cin: usize, cout: usize, stride: usize, rng: &mut ChaCha8Rng) -> Self {
        let conv1 = ConvLayer::new(kernel, cin, cout, stride, rng);
        let conv2 = ConvLayer::new(kernel, cout, cout, 1, rng);
        let shortcut = ConvLayer::new(1, cin, cout, stride, rng);
        ResBlock {
            conv1,
            bn1: BnLayer::new(cout),
            conv2,
            bn2: BnLayer::new(cout),
            shortcut,
        }
    }

    fn forward(&mut self, x: &Tensor<F>, mode: Mode) -> Result<(Tensor<F>, BlockCtx<F>)> {
        let (y, conv1) = self.conv1.forward(x)?;
        let (y, bn1) = self.bn1.forward(&y, mode)?;
        let (y, relu1) = relu(&y);
        let (y, conv2) = self.conv2.forward(&y)?;
        let (mut y, bn2) = self.bn2.forward(&y, mode)?;
        let (s, shortcut) = self.shortcut.forward(x)?;
        y.add_assign(&s)?;
        let (y, relu_out) = relu(&y);
        Ok((
            y,
            BlockCtx {
                conv1,
                bn1,
                relu1,
                conv2,
                bn2,
                shortcut,
                relu_out,
            },
        ))
    }

    fn infer(&self, x: &Tensor<F>) -> Result<Tensor<F>> {
        let (y, _) = self.conv1.forward(x)?;
        let (y, _) = relu(&self.bn1.infer(&y)?);
        let (y, _) = self.conv2.forward(&y)?;
        let mut y = self.bn2.infer(&y)?;
        let (s, _) = self.shortcut.forward(x)?;
        y.add_assign(&s)?;
        Ok(relu(&y).0)
    }

    fn backward(&mut self, ctx: BlockCtx<F>, upstream: &Tensor<F>) -> Result<Tensor<F>> {
        let d_sum = relu_grad(ctx.relu_out, upstream)?;
        let mut d_x = self.shortcut.backward(ctx.shortcut, &d_sum)?;
        let d = self.bn2.backward(ctx.bn2, &d_sum)?;
        let d = self.conv2.backward(ctx.conv2, &d)?;
        let d = relu_grad(ctx.relu1, &d)?;
        let d = self.bn1.backward(ctx.bn1, &d)?;
        d_x.add_assign(&self.conv1.backward(ctx.conv1, &d)?)?;
        Ok(d_x)
    }
}

/// Caches from a training-mode feature pass, consumed by the backward pass.
#[derive(Debug)]
pub struct FeatureCtx<F> {
    stem: StageCtx<F>,
    blocks: Vec<BlockCtx<F>>,
    final_stage: StageCtx<F>,
}

#[derive(Debug)]
struct HeadCtx<F> {
    dropout: DropoutCtx<F>,
    dense: DenseCtx<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleCnnModel<F> {
    pub config: SampleCnnConfig,
    pub stem: Stage<F>,
    pub blocks: Vec<ResBlock<F>>,
    pub final_stage: Stage<F>,
    /// Time-distributed classifier shared across steps.
    pub head: DenseLayer<F>,
}

/// Builds the network with Kaiming-normal weights drawn from `seed`.
pub fn build_model<F: Scalar>(cfg: &SampleCnnConfig, seed: u64) -> Result<SampleCnnModel<F>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = cfg.kernel_size;
    let s = cfg.block_stride;
    let stem = Stage::new(k, 1, cfg.initial_filters, s, &mut rng);
    let mut cin = cfg.initial_filters;
    let mut blocks = Vec::with_capacity(cfg.block_filters.len());
    for &cout in &cfg.block_filters {
        blocks.push(ResBlock::new(k, cin, cout, s, &mut rng));
        cin = cout;
    }
    let final_stage = Stage::new(k, cin, cfg.final_filters, 1, &mut rng);
    let head = DenseLayer::new(cfg.final_filters, cfg.num_classes, &mut rng);
    Ok(SampleCnnModel {
        config: cfg.clone(),
        stem,
        blocks,
        final_stage,
        head,
    })
}

impl<F: Scalar> SampleCnnModel<F> {
    fn check_input(&self, batch: &Tensor<F>) -> Result<()> {
        let (_, len, ch) = batch.dims3()?;
        if len != self.config.input_len || ch != 1 {
            return Err(Error::contract(format!(
                "model expects B×{}×1 input, got {:?}",
                self.config.input_len,
                batch.shape()
            )));
        }
        Ok(())
    }

    /// Final-stage activations `B×T×768` using running BN statistics.
    pub fn features(&self, batch: &Tensor<F>) -> Result<Tensor<F>> {
        self.check_input(batch)?;
        let mut y = self.stem.infer(batch)?;
        for block in &self.blocks {
            y = block.infer(&y)?;
        }
        self.final_stage.infer(&y)
    }

    /// Training-mode feature pass that keeps the caches for backward.
    pub fn features_train(&mut self, batch: &Tensor<F>) -> Result<(Tensor<F>, FeatureCtx<F>)> {
        self.check_input(batch)?;
        let (mut y, stem) = self.stem.forward(batch, Mode::Train)?;
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for block in &mut self.blocks {
            let (next, ctx) = block.forward(&y, Mode::Train)?;
            blocks.push(ctx);
            y = next;
        }
        let (y, final_stage) = self.final_stage.forward(&y, Mode::Train)?;
        Ok((
            y,
            FeatureCtx {
                stem,
                blocks,
                final_stage,
            },
        ))
    }

    pub fn features_backward(
        &mut self,
        ctx: FeatureCtx<F>,
        d_fmap: &Tensor<F>,
    ) -> Result<Tensor<F>> {
        let mut d = self.final_stage.backward(ctx.final_stage, d_fmap)?;
        for (block, bctx) in self.blocks.iter_mut().zip(ctx.blocks).rev() {
            d = block.backward(bctx, &d)?;
        }
        self.stem.backward(ctx.stem, &d)
    }

    pub fn forward_features(&mut self, batch: &Tensor<F>, mode: Mode) -> Result<Tensor<F>> {
        match mode {
            Mode::Infer => self.features(batch),
            Mode::Train => Ok(self.features_train(batch)?.0),
        }
    }

    fn head_logits(
        &self,
        fmap: &Tensor<F>,
        mode: Mode,
        dropout_seed: u64,
    ) -> Result<(Tensor<F>, HeadCtx<F>)> {
        let (batch, steps, channels) = fmap.dims3()?;
        let (x, dropout) = dropout(fmap, self.config.dropout_rate, mode, dropout_seed)?;
        let (logits, dense) = self.head.forward(&x.reshape(&[batch * steps, channels])?)?;
        let logits = logits.reshape(&[batch, steps, self.config.num_classes])?;
        Ok((logits, HeadCtx { dropout, dense }))
    }

    fn step_average(&self, logits: Tensor<F>) -> Result<Tensor<F>> {
        let (batch, steps, k) = logits.dims3()?;
        let probs = softmax_rows(&logits.reshape(&[batch * steps, k])?)?;
        let n = F::from_usize(steps).unwrap_or_else(F::one);
        let mut avg = vec![F::zero(); batch * k];
        for (i, row) in probs.data().chunks_exact(k).enumerate() {
            let b = i / steps;
            for (a, &p) in avg[b * k..(b + 1) * k].iter_mut().zip(row) {
                *a = *a + p;
            }
        }
        avg.iter_mut().for_each(|a| *a = *a / n);
        Tensor::new(vec![batch, k], avg)
    }

    /// Class probabilities `B×num_classes`: the per-step softmax outputs of
    /// the shared classifier averaged over time.
    pub fn classify(&self, batch: &Tensor<F>) -> Result<Tensor<F>> {
        let fmap = self.features(batch)?;
        let (logits, _) = self.head_logits(&fmap, Mode::Infer, 0)?;
        self.step_average(logits)
    }

    pub fn forward_classify(
        &mut self,
        batch: &Tensor<F>,
        mode: Mode,
        dropout_seed: u64,
    ) -> Result<Tensor<F>> {
        let fmap = self.forward_features(batch, mode)?;
        let (logits, _) = self.head_logits(&fmap, mode, dropout_seed)?;
        self.step_average(logits)
    }

    /// Training forward and backward pass. Gradients accumulate into the
    /// parameters; returns the batch loss and averaged probabilities.
    pub fn loss_and_backward(
        &mut self,
        batch: &Tensor<F>,
        targets: &[usize],
        dropout_seed: u64,
    ) -> Result<(F, Tensor<F>)> {
        let (fmap, fctx) = self.features_train(batch)?;
        let (logits, hctx) = self.head_logits(&fmap, Mode::Train, dropout_seed)?;
        let (loss, probs, d_logits) = averaged_softmax_xent(&logits, targets)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("training loss {loss:?}")));
        }
        let (b, t, k) = d_logits.dims3()?;
        let d = self
            .head
            .backward(hctx.dense, &d_logits.reshape(&[b * t, k])?)?;
        let d = dropout_grad(hctx.dropout, &d.reshape(fmap.shape())?)?;
        self.features_backward(fctx, &d)?;
        Ok((loss, probs))
    }

    /// Parameter names, in the order of [`Self::params`] and [`Self::params_mut`].
    pub fn param_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        let conv = |out: &mut Vec<String>, prefix: &str| {
            out.push(format!("{prefix}.weight"));
            out.push(format!("{prefix}.bias"));
        };
        conv(&mut out, "stem.conv");
        out.extend(["stem.bn.gamma".to_string(), "stem.bn.beta".to_string()]);
        for i in 0..self.blocks.len() {
            conv(&mut out, &format!("blocks.{i}.conv1"));
            out.extend([
                format!("blocks.{i}.bn1.gamma"),
                format!("blocks.{i}.bn1.beta"),
            ]);
            conv(&mut out, &format!("blocks.{i}.conv2"));
            out.extend([
                format!("blocks.{i}.bn2.gamma"),
                format!("blocks.{i}.bn2.beta"),
            ]);
            conv(&mut out, &format!("blocks.{i}.shortcut"));
        }
        conv(&mut out, "final.conv");
        out.extend(["final.bn.gamma".to_string(), "final.bn.beta".to_string()]);
        out.extend(["head.weight".to_string(), "head.bias".to_string()]);
        out
    }

    pub fn params(&self) -> Vec<&Param<F>> {
        let mut out: Vec<&Param<F>> = Vec::new();
        out.extend([&self.stem.conv.weight, &self.stem.conv.bias]);
        out.extend([&self.stem.bn.gamma, &self.stem.bn.beta]);
        for b in &self.blocks {
            out.extend([&b.conv1.weight, &b.conv1.bias, &b.bn1.gamma, &b.bn1.beta]);
            out.extend([&b.conv2.weight, &b.conv2.bias, &b.bn2.gamma, &b.bn2.beta]);
            out.extend([&b.shortcut.weight, &b.shortcut.bias]);
        }
        out.extend([&self.final_stage.conv.weight, &self.final_stage.conv.bias]);
        out.extend([&self.final_stage.bn.gamma, &self.final_stage.bn.beta]);
        out.extend([&self.head.weight, &self.head.bias]);
        out
    }

    pub fn named_params(&self) -> Vec<(String, &Param<F>)> {
        self.param_names().into_iter().zip(self.params()).collect()
    }

    /// Mutable parameters in the same order as [`Self::named_params`].
    pub fn params_mut(&mut self) -> Vec<&mut Param<F>> {
        let mut out: Vec<&mut Param<F>> = Vec::new();
        out.extend([&mut self.stem.conv.weight, &mut self.stem.conv.bias]);
        out.extend([&mut self.stem.bn.gamma, &mut self.stem.bn.beta]);
        for b in &mut self.blocks {
            out.extend([
                &mut b.conv1.weight,
                &mut b.conv1.bias,
                &mut b.bn1.gamma,
                &mut b.bn1.beta,
            ]);
            out.extend([
                &mut b.conv2.weight,
                &mut b.conv2.bias,
                &mut b.bn2.gamma,
                &mut b.bn2.beta,
            ]);
            out.extend([&mut b.shortcut.weight, &mut b.shortcut.bias]);
        }
        out.extend([
            &mut self.final_stage.conv.weight,
            &mut self.final_stage.conv.bias,
        ]);
        out.extend([
            &mut self.final_stage.bn.gamma,
            &mut self.final_stage.bn.beta,
        ]);
        out.extend([&mut self.head.weight, &mut self.head.bias]);
        out
    }

    /// Batch-norm running statistics by layer name.
    pub fn named_stats(&self) -> Vec<(String, &RunningStats<F>)> {
        let mut out = vec![("stem.bn".to_string(), &self.stem.bn.stats)];
        for (i, b) in self.blocks.iter().enumerate() {
            out.push((format!("blocks.{i}.bn1"), &b.bn1.stats));
            out.push((format!("blocks.{i}.bn2"), &b.bn2.stats));
        }
        out.push(("final.bn".to_string(), &self.final_stage.bn.stats));
        out
    }

    pub fn stats_mut(&mut self) -> Vec<&mut RunningStats<F>> {
        let mut out = vec![&mut self.stem.bn.stats];
        for b in &mut self.blocks {
            out.push(&mut b.bn1.stats);
            out.push(&mut b.bn2.stats);
        }
        out.push(&mut self.final_stage.bn.stats);
        out
    }

    /// Sets every running mean to 0 and variance to 1 and marks the
    /// statistics as usable for inference.
    pub fn reset_running_stats(&mut self) {
        for s in self.stats_mut() {
            s.mean.fill(F::zero());
            s.var.fill(F::one());
            s.initialized = true;
        }
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Param::zero_grad);
    }

    pub fn adam_step(&mut self, cfg: &AdamConfig) {
        for p in self.params_mut() {
            adam_step(p, cfg);
        }
    }

    pub fn param_count(&self) -> usize {
        self.named_params().iter().map(|(_, p)| p.value.len()).sum()
    }

    /// Copies the network into another float type.
    pub fn cast<G: Scalar>(&self) -> SampleCnnModel<G> {
        fn param<F: Scalar, G: Scalar>(p: &Param<F>) -> Param<G> {
            Param {
                value: p.value.cast(),
                grad: p.grad.cast(),
                adam_m: p.adam_m.cast(),
                adam_v: p.adam_v.cast(),
                step_count: p.step_count,
            }
        }
        fn conv<F: Scalar, G: Scalar>(c: &ConvLayer<F>) -> ConvLayer<G> {
            ConvLayer {
                weight: param(&c.weight),
                bias: param(&c.bias),
                stride: c.stride,
            }
        }
        fn bn<F: Scalar, G: Scalar>(b: &BnLayer<F>) -> BnLayer<G> {
            BnLayer {
                gamma: param(&b.gamma),
                beta: param(&b.beta),
                stats: RunningStats {
                    mean: b.stats.mean.cast(),
                    var: b.stats.var.cast(),
                    initialized: b.stats.initialized,
                },
            }
        }
        fn stage<F: Scalar, G: Scalar>(s: &Stage<F>) -> Stage<G> {
            Stage {
                conv: conv(&s.conv),
                bn: bn(&s.bn),
            }
        }
        SampleCnnModel {
            config: self.config.clone(),
            stem: stage(&self.stem),
            blocks: self
                .blocks
                .iter()
                .map(|b| ResBlock {
                    conv1: conv(&b.conv1),
                    bn1: bn(&b.bn1),
                    conv2: conv(&b.conv2),
                    bn2: bn(&b.bn2),
                    shortcut: conv(&b.shortcut),
                })
                .collect(),
            final_stage: stage(&self.final_stage),
            head: DenseLayer {
                weight: param(&self.head.weight),
                bias: param(&self.head.bias),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> SampleCnnConfig {
        SampleCnnConfig::reduced(4, vec![4, 8], 81)
    }

    #[test]
    fn same_seed_same_parameters() {
        let a: SampleCnnModel<f32> = build_model(&tiny(), 3).unwrap();
        let b: SampleCnnModel<f32> = build_model(&tiny(), 3).unwrap();
        let c: SampleCnnModel<f32> = build_model(&tiny(), 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn wrong_block_count_is_a_config_error() {
        let mut cfg = SampleCnnConfig::default();
        cfg.block_filters = vec![64; 6];
        assert!(matches!(build_model::<f32>(&cfg, 0), Err(Error::Config(_))));
    }

    #[test]
    fn param_lists_agree() {
        let mut m: SampleCnnModel<f32> = build_model(&tiny(), 0).unwrap();
        let shapes: Vec<Vec<usize>> = m
            .named_params()
            .iter()
            .map(|(_, p)| p.shape().to_vec())
            .collect();
        let shapes_mut: Vec<Vec<usize>> =
            m.params_mut().iter().map(|p| p.shape().to_vec()).collect();
        assert_eq!(shapes, shapes_mut);
        assert_eq!(m.named_stats().len(), m.stats_mut().len());
    }

    #[test]
    fn wrong_input_length_rejected() {
        let m: SampleCnnModel<f32> = build_model(&tiny(), 0).unwrap();
        assert!(matches!(
            m.features(&Tensor::zeros(&[1, 80, 1])),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn fresh_model_cannot_infer() {
        let m: SampleCnnModel<f32> = build_model(&tiny(), 0).unwrap();
        assert!(matches!(
            m.features(&Tensor::zeros(&[1, 81, 1])),
            Err(Error::UninitializedStats)
        ));
    }

    #[test]
    fn zero_input_gives_zero_features_with_reset_stats() {
        let mut m: SampleCnnModel<f32> = build_model(&tiny(), 0).unwrap();
        m.reset_running_stats();
        let f = m
            .forward_features(&Tensor::zeros(&[2, 81, 1]), Mode::Infer)
            .unwrap();
        assert_eq!(f.shape(), &[2, 3, 768]);
        assert!(f.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn probabilities_are_normalized() {
        let mut m: SampleCnnModel<f64> = build_model(&tiny(), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Tensor::randn(&[3, 81, 1], 0.3, &mut rng);
        for mode in [Mode::Train, Mode::Infer] {
            let p = m.forward_classify(&x, mode, 5).unwrap();
            for row in p.data().chunks(2) {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
                assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }
}
