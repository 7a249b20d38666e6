#![allow(dead_code)]

use emofeat::nn::gradcheck::{check_gradient, GradCheckConfig};
use emofeat::nn::{
    batchnorm1d, batchnorm1d_grad, conv1d, conv1d_grad, dense, dense_grad, dropout, dropout_grad,
    relu, relu_grad, softmax_xent, Mode, RunningStats, Tensor,
};
use emofeat::samplecnn::{averaged_softmax_xent, build_model, SampleCnnConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn(shape: &[usize], seed: u64) -> Tensor<f64> {
    Tensor::randn(shape, 1.0, &mut rng(seed))
}

/// Values bounded away from zero so ReLU kinks stay out of reach.
pub fn away_from_zero(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut r = rng(seed);
    let n: usize = shape.iter().product();
    let v: Vec<f64> = (0..n)
        .map(|_| {
            let m: f64 = r.gen_range(0.1..2.0);
            if r.gen::<bool>() {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::from_f64(shape, &v).unwrap()
}

/// `sum(r * out)`, a loss whose upstream gradient is `r`.
pub fn project(out: &Tensor<f64>, r: &Tensor<f64>) -> f64 {
    out.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

pub fn with_data(t: &Tensor<f64>, data: &[f64]) -> Tensor<f64> {
    Tensor::new(t.shape().to_vec(), data.to_vec()).unwrap()
}

fn gc() -> GradCheckConfig {
    GradCheckConfig::default()
}

fn check(point: &Tensor<f64>, analytic: &Tensor<f64>, loss: impl FnMut(&[f64]) -> f64) -> f64 {
    let mut p = point.data().to_vec();
    let mut loss = loss;
    check_gradient(&mut p, analytic.data(), |x| Ok(loss(x)), &gc()).unwrap()
}

/// Worst relative error per checked quantity of one layer.
pub type LayerReport = Vec<(String, f64)>;

pub fn conv_report(stride: usize, kernel: usize, len: usize) -> LayerReport {
    let (b, cin, cout) = (2, 3, 4);
    let x = randn(&[b, len, cin], 1);
    let w = randn(&[kernel, cin, cout], 2);
    let bias = randn(&[cout], 3);
    let (out, ctx) = conv1d(&x, &w, &bias, stride).unwrap();
    let r = randn(out.shape(), 4);
    let g = conv1d_grad(ctx, &r).unwrap();
    let tag = format!("conv k{kernel} s{stride} T{len}");
    vec![
        (
            format!("{tag} input"),
            check(&x, &g.d_input, |p| {
                project(&conv1d(&with_data(&x, p), &w, &bias, stride).unwrap().0, &r)
            }),
        ),
        (
            format!("{tag} weights"),
            check(&w, &g.d_weights, |p| {
                project(&conv1d(&x, &with_data(&w, p), &bias, stride).unwrap().0, &r)
            }),
        ),
        (
            format!("{tag} bias"),
            check(&bias, &g.d_bias, |p| {
                project(&conv1d(&x, &w, &with_data(&bias, p), stride).unwrap().0, &r)
            }),
        ),
    ]
}

pub fn batchnorm_report(mode: Mode) -> LayerReport {
    let c = 3;
    let x = randn(&[2, 5, c], 11);
    let gamma = randn(&[c], 12);
    let beta = randn(&[c], 13);
    let stats = RunningStats::from_values(
        Tensor::from_f64(&[c], &[0.3, -0.2, 0.1]).unwrap(),
        Tensor::from_f64(&[c], &[1.5, 0.7, 2.0]).unwrap(),
    )
    .unwrap();
    let run = |x: &Tensor<f64>, g: &Tensor<f64>, b: &Tensor<f64>| {
        let mut s = stats.clone();
        batchnorm1d(x, g, b, &mut s, mode).unwrap()
    };
    let (out, ctx) = run(&x, &gamma, &beta);
    let r = randn(out.shape(), 14);
    let g = batchnorm1d_grad(ctx, &r).unwrap();
    let tag = format!("batchnorm {mode:?}");
    vec![
        (
            format!("{tag} input"),
            check(&x, &g.d_input, |p| {
                project(&run(&with_data(&x, p), &gamma, &beta).0, &r)
            }),
        ),
        (
            format!("{tag} gamma"),
            check(&gamma, &g.d_gamma, |p| {
                project(&run(&x, &with_data(&gamma, p), &beta).0, &r)
            }),
        ),
        (
            format!("{tag} beta"),
            check(&beta, &g.d_beta, |p| {
                project(&run(&x, &gamma, &with_data(&beta, p)).0, &r)
            }),
        ),
    ]
}

pub fn relu_report() -> LayerReport {
    let x = away_from_zero(&[2, 7, 3], 21);
    let (out, ctx) = relu(&x);
    let r = randn(out.shape(), 22);
    let d = relu_grad(ctx, &r).unwrap();
    vec![(
        "relu input".into(),
        check(&x, &d, |p| project(&relu(&with_data(&x, p)).0, &r)),
    )]
}

pub fn dense_report() -> LayerReport {
    let x = randn(&[4, 5], 31);
    let w = randn(&[5, 3], 32);
    let b = randn(&[3], 33);
    let (out, ctx) = dense(&x, &w, &b).unwrap();
    let r = randn(out.shape(), 34);
    let g = dense_grad(ctx, &r).unwrap();
    vec![
        (
            "dense input".into(),
            check(&x, &g.d_input, |p| {
                project(&dense(&with_data(&x, p), &w, &b).unwrap().0, &r)
            }),
        ),
        (
            "dense weights".into(),
            check(&w, &g.d_weights, |p| {
                project(&dense(&x, &with_data(&w, p), &b).unwrap().0, &r)
            }),
        ),
        (
            "dense bias".into(),
            check(&b, &g.d_bias, |p| {
                project(&dense(&x, &w, &with_data(&b, p)).unwrap().0, &r)
            }),
        ),
    ]
}

pub fn dropout_report() -> LayerReport {
    let x = randn(&[2, 6, 4], 41);
    let (out, ctx) = dropout(&x, 0.5, Mode::Train, 42).unwrap();
    let r = randn(out.shape(), 43);
    let d = dropout_grad(ctx, &r).unwrap();
    vec![(
        "dropout input".into(),
        check(&x, &d, |p| {
            project(
                &dropout(&with_data(&x, p), 0.5, Mode::Train, 42).unwrap().0,
                &r,
            )
        }),
    )]
}

pub fn softmax_report() -> LayerReport {
    let z = randn(&[4, 3], 51);
    let targets = [0, 2, 1, 2];
    let d = softmax_xent(&z, &targets).unwrap().d_logits;
    let avg = randn(&[3, 5, 2], 52);
    let steps = [1, 0, 1];
    let (_, _, d_avg) = averaged_softmax_xent(&avg, &steps).unwrap();
    vec![
        (
            "softmax cross-entropy logits".into(),
            check(&z, &d, |p| {
                softmax_xent(&with_data(&z, p), &targets).unwrap().loss
            }),
        ),
        (
            "step-averaged head logits".into(),
            check(&avg, &d_avg, |p| {
                averaged_softmax_xent(&with_data(&avg, p), &steps)
                    .unwrap()
                    .0
            }),
        ),
    ]
}

/// conv(s3) -> batchnorm(train) -> relu, then conv -> relu -> conv, then
/// dense -> relu -> softmax cross-entropy.
pub fn composition_report() -> LayerReport {
    let mut out = Vec::new();

    let x = randn(&[2, 10, 2], 71);
    let w = randn(&[3, 2, 3], 72);
    let bias = randn(&[3], 73);
    let gamma = randn(&[3], 74);
    let beta = randn(&[3], 75);
    let stage = |x: &Tensor<f64>, w: &Tensor<f64>| {
        let (c, cctx) = conv1d(x, w, &bias, 3).unwrap();
        let mut st = RunningStats::uninitialized(3);
        let (n, bctx) = batchnorm1d(&c, &gamma, &beta, &mut st, Mode::Train).unwrap();
        let (r, rctx) = relu(&n);
        (r, cctx, bctx, rctx)
    };
    let (y, cctx, bctx, rctx) = stage(&x, &w);
    let r = randn(y.shape(), 76);
    let g = conv1d_grad(
        cctx,
        &batchnorm1d_grad(bctx, &relu_grad(rctx, &r).unwrap())
            .unwrap()
            .d_input,
    )
    .unwrap();
    out.push((
        "conv-bn-relu input".into(),
        check(&x, &g.d_input, |p| {
            project(&stage(&with_data(&x, p), &w).0, &r)
        }),
    ));
    out.push((
        "conv-bn-relu weights".into(),
        check(&w, &g.d_weights, |p| {
            project(&stage(&x, &with_data(&w, p)).0, &r)
        }),
    ));

    let w1 = randn(&[3, 2, 4], 81);
    let b1 = randn(&[4], 82);
    let w2 = randn(&[3, 4, 2], 83);
    let b2 = randn(&[2], 84);
    let x = away_from_zero(&[2, 9, 2], 85);
    let chain = |x: &Tensor<f64>, w1: &Tensor<f64>| {
        let (a, actx) = conv1d(x, w1, &b1, 1).unwrap();
        let (h, hctx) = relu(&a);
        let (o, octx) = conv1d(&h, &w2, &b2, 3).unwrap();
        (o, actx, hctx, octx)
    };
    let (y, actx, hctx, octx) = chain(&x, &w1);
    let r = randn(y.shape(), 86);
    let d_h = conv1d_grad(octx, &r).unwrap().d_input;
    let g = conv1d_grad(actx, &relu_grad(hctx, &d_h).unwrap()).unwrap();
    out.push((
        "conv-relu-conv input".into(),
        check(&x, &g.d_input, |p| {
            project(&chain(&with_data(&x, p), &w1).0, &r)
        }),
    ));
    out.push((
        "conv-relu-conv weights".into(),
        check(&w1, &g.d_weights, |p| {
            project(&chain(&x, &with_data(&w1, p)).0, &r)
        }),
    ));

    let x = randn(&[5, 4], 91);
    let w = randn(&[4, 6], 92);
    let b = randn(&[6], 93);
    let w_out = randn(&[6, 3], 94);
    let b_out = randn(&[3], 95);
    let targets = [0, 1, 2, 2, 1];
    let mlp = |x: &Tensor<f64>, w: &Tensor<f64>| {
        let (a, actx) = dense(x, w, &b).unwrap();
        let (h, hctx) = relu(&a);
        let (z, zctx) = dense(&h, &w_out, &b_out).unwrap();
        (softmax_xent(&z, &targets).unwrap(), actx, hctx, zctx)
    };
    let (sx, actx, hctx, zctx) = mlp(&x, &w);
    let d_h = dense_grad(zctx, &sx.d_logits).unwrap().d_input;
    let g = dense_grad(actx, &relu_grad(hctx, &d_h).unwrap()).unwrap();
    out.push((
        "dense-relu-softmax input".into(),
        check(&x, &g.d_input, |p| mlp(&with_data(&x, p), &w).0.loss),
    ));
    out.push((
        "dense-relu-softmax weights".into(),
        check(&w, &g.d_weights, |p| mlp(&x, &with_data(&w, p)).0.loss),
    ));
    out
}

/// Every layer-level check.
pub fn layer_suite() -> LayerReport {
    let mut all = Vec::new();
    for (stride, kernel, len) in [
        (1, 3, 9),
        (3, 3, 10),
        (3, 3, 9),
        (2, 3, 7),
        (1, 1, 5),
        (3, 1, 8),
        (1, 4, 6),
    ] {
        all.extend(conv_report(stride, kernel, len));
    }
    all.extend(batchnorm_report(Mode::Train));
    all.extend(batchnorm_report(Mode::Infer));
    all.extend(relu_report());
    all.extend(dense_report());
    all.extend(dropout_report());
    all.extend(softmax_report());
    all.extend(composition_report());
    all
}

/// Parameter gradients of a reduced network with `blocks` residual blocks on
/// a 2-clip batch, full training loss including dropout with a fixed mask.
pub fn model_report(
    block_filters: Vec<usize>,
    input_len: usize,
    coords_per_tensor: usize,
) -> LayerReport {
    let mut cfg = SampleCnnConfig::reduced(4, block_filters, input_len);
    cfg.num_classes = 3;
    let mut model = build_model::<f64>(&cfg, 5).unwrap();
    let x = randn(&[2, input_len, 1], 61);
    let targets = [2, 0];
    let seed = 77;
    model.zero_grad();
    model.loss_and_backward(&x, &targets, seed).unwrap();
    let names = model.param_names();
    let grads: Vec<Vec<f64>> = model
        .params()
        .iter()
        .map(|p| p.grad.data().to_vec())
        .collect();
    let mut out = Vec::new();
    for (j, name) in names.iter().enumerate() {
        let mut point = model.params()[j].value.data().to_vec();
        let cfg = GradCheckConfig {
            max_coords: coords_per_tensor,
            seed: j as u64,
            floor: 1e-6,
            ..GradCheckConfig::default()
        };
        let worst = check_gradient(
            &mut point,
            &grads[j],
            |p| {
                model.params_mut()[j].value.data_mut().copy_from_slice(p);
                let (loss, _) = model.loss_and_backward(&x, &targets, seed)?;
                Ok(loss)
            },
            &cfg,
        )
        .unwrap();
        model.params_mut()[j]
            .value
            .data_mut()
            .copy_from_slice(&point);
        out.push((name.clone(), worst));
    }
    out
}

/// Primal optimum of `0.5 (|w|^2 + b^2) + sum C_i hinge_i`, certified by a
/// dual projected-gradient solve whose duality gap falls below `1e-9`.
pub fn svm_oracle(x: &[Vec<f64>], y: &[f64], c: &[f64]) -> f64 {
    let n = x.len();
    let aug: Vec<Vec<f64>> = x
        .iter()
        .map(|r| r.iter().copied().chain([1.0]).collect())
        .collect();
    let q: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| y[i] * y[j] * aug[i].iter().zip(&aug[j]).map(|(a, b)| a * b).sum::<f64>())
                .collect()
        })
        .collect();
    let lip: f64 = q
        .iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        .max(1e-12);
    let primal = |alpha: &[f64]| {
        let d = aug[0].len();
        let w: Vec<f64> = (0..d)
            .map(|k| (0..n).map(|i| alpha[i] * y[i] * aug[i][k]).sum())
            .collect();
        let reg = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
        let loss: f64 = (0..n)
            .map(|i| {
                c[i] * (1.0 - y[i] * w.iter().zip(&aug[i]).map(|(a, b)| a * b).sum::<f64>())
                    .max(0.0)
            })
            .sum();
        reg + loss
    };
    let dual = |alpha: &[f64]| {
        let quad: f64 = (0..n)
            .map(|i| (0..n).map(|j| alpha[i] * q[i][j] * alpha[j]).sum::<f64>())
            .sum();
        alpha.iter().sum::<f64>() - 0.5 * quad
    };
    let mut alpha = vec![0.0; n];
    let mut z = alpha.clone();
    let mut t = 1.0f64;
    for it in 0..2_000_000 {
        let grad: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| q[i][j] * z[j]).sum::<f64>() - 1.0)
            .collect();
        let next: Vec<f64> = (0..n)
            .map(|i| (z[i] - grad[i] / lip).clamp(0.0, c[i]))
            .collect();
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = (0..n)
            .map(|i| next[i] + (t - 1.0) / t_next * (next[i] - alpha[i]))
            .collect();
        alpha = next;
        t = t_next;
        if it % 100 == 0 {
            let (p, d) = (primal(&alpha), dual(&alpha));
            if p - d < 1e-9 {
                return p;
            }
            if it % 5000 == 0 {
                t = 1.0;
                z = alpha.clone();
            }
        }
    }
    panic!("oracle did not certify optimality");
}
