mod common;

use std::collections::BTreeMap;

use emofeat::audio::{
    augment, extract_random_chunk, normalize_local, split_chunks, AugmentConfig, Waveform,
};
use emofeat::eval::{majority_vote, uar, ConfusionMatrix, PredictionRecord};
use emofeat::nn::{
    adam_step, batchnorm1d, conv1d, conv_out_len, dropout, softmax_rows, AdamConfig, Mode, Param,
    RunningStats, Tensor,
};
use emofeat::samplecnn::{averaged_softmax_xent, pool_features};
use emofeat::svm::{
    argmax_lowest, primal_objective, train_binary, LinearModel, Standardizer, SvmConfig,
};
use emofeat::text::{pool_sentence, TokenEmbeddingSequence, EMBED_DIM};
use proptest::prelude::*;

fn tensor(shape: &[usize], values: &[f64]) -> Tensor<f64> {
    Tensor::from_f64(shape, values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conv_length_rule(len in 1usize..100, stride in 1usize..=3, kernel in 1usize..=4) {
        let x = Tensor::<f64>::full(&[1, len, 1], 1.0);
        let w = Tensor::<f64>::full(&[kernel, 1, 2], 0.5);
        let (out, _) = conv1d(&x, &w, &Tensor::zeros(&[2]), stride).unwrap();
        prop_assert_eq!(out.shape()[1], len.div_ceil(stride));
        prop_assert_eq!(conv_out_len(len, stride), len.div_ceil(stride));
    }

    #[test]
    fn softmax_rows_are_distributions(v in prop::collection::vec(-50.0f64..50.0, 12)) {
        let p = softmax_rows(&tensor(&[4, 3], &v)).unwrap();
        for row in p.data().chunks(3) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            prop_assert!(row.iter().all(|&q| (0.0..=1.0).contains(&q)));
        }
        let (_, avg, _) = averaged_softmax_xent(&tensor(&[2, 2, 3], &v), &[0, 2]).unwrap();
        for row in avg.data().chunks(3) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn dropout_identities(v in prop::collection::vec(-5.0f64..5.0, 1..40), seed: u64) {
        let x = tensor(&[v.len()], &v);
        prop_assert_eq!(dropout(&x, 0.5, Mode::Infer, seed).unwrap().0, x.clone());
        prop_assert_eq!(dropout(&x, 0.0, Mode::Train, seed).unwrap().0, x);
    }

    #[test]
    fn adam_zero_gradient_fixed_point(v in prop::collection::vec(-5.0f64..5.0, 1..20), steps in 1usize..20) {
        let mut p = Param::new(tensor(&[v.len()], &v));
        for _ in 0..steps {
            adam_step(&mut p, &AdamConfig::default());
        }
        prop_assert_eq!(p.value.data(), &v[..]);
    }

    #[test]
    fn batchnorm_train_output_moments(v in prop::collection::vec(-10.0f64..10.0, 24), g in 0.5f64..3.0, b in -2.0f64..2.0) {
        let x = tensor(&[2, 6, 2], &v);
        let mut st = RunningStats::uninitialized(2);
        let (y, _) = batchnorm1d(&x, &tensor(&[2], &[g, g]), &tensor(&[2], &[b, b]), &mut st, Mode::Train).unwrap();
        for c in 0..2 {
            let col: Vec<f64> = y.data().iter().skip(c).step_by(2).copied().collect();
            let xs: Vec<f64> = v.iter().skip(c).step_by(2).copied().collect();
            let mx = xs.iter().sum::<f64>() / 12.0;
            let vx = xs.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / 12.0;
            let m = col.iter().sum::<f64>() / 12.0;
            let var = col.iter().map(|a| (a - m).powi(2)).sum::<f64>() / 12.0;
            prop_assert!((m - b).abs() < 1e-9);
            prop_assert!((var - g * g * vx / (vx + 1e-5)).abs() < 1e-9);
        }
    }

    #[test]
    fn fmap_pooling_invariants(v in prop::collection::vec(-3.0f64..3.0, 5 * 4), perm in Just((0..5).collect::<Vec<usize>>()).prop_shuffle()) {
        let x = tensor(&[1, 5, 4], &v);
        let mut shuffled = Vec::new();
        for &t in &perm {
            shuffled.extend_from_slice(&v[t * 4..(t + 1) * 4]);
        }
        let a = pool_features(&x).unwrap();
        let b = pool_features(&tensor(&[1, 5, 4], &shuffled)).unwrap();
        prop_assert_eq!(&a, &b);
        for f in 0..4 {
            prop_assert!(a.data()[f] <= a.data()[4 + f]);
        }
    }

    #[test]
    fn sentence_pooling_invariants(tokens in 1usize..6, seed: u64) {
        let values: Vec<f32> = (0..tokens * EMBED_DIM)
            .map(|i| (((i as u64).wrapping_mul(2654435761).wrapping_add(seed) % 1000) as f32) / 100.0 - 5.0)
            .collect();
        let seq = TokenEmbeddingSequence { narrative_id: "n".into(), sentence_index: 0, n_tokens: tokens, values: values.clone() };
        let mut rev = Vec::new();
        for t in (0..tokens).rev() {
            rev.extend_from_slice(&values[t * EMBED_DIM..(t + 1) * EMBED_DIM]);
        }
        let a = pool_sentence(&seq).unwrap();
        let b = pool_sentence(&TokenEmbeddingSequence { values: rev, ..seq }).unwrap();
        prop_assert_eq!(&a.vector, &b.vector);
        prop_assert!((0..EMBED_DIM).all(|d| a.vector[d] <= a.vector[EMBED_DIM + d]));
    }

    #[test]
    fn chunks_have_fixed_length_and_reconstruct(n in 1usize..5000, chunk in 1usize..700, seed: u64) {
        let samples: Vec<f32> = (0..n).map(|i| ((i * 37 % 101) as f32 - 50.0) / 60.0).collect();
        let w = Waveform::new(samples.clone(), 16_000, "s").unwrap();
        prop_assert_eq!(extract_random_chunk(&w, chunk, seed).unwrap().len(), chunk);
        let parts = split_chunks(&w, chunk).unwrap();
        prop_assert!(parts.iter().all(|c| c.len() == chunk));
        let joined: Vec<f32> = parts.iter().flat_map(|c| c.samples.iter().copied()).collect();
        prop_assert_eq!(&joined[..n], &samples[..]);
        prop_assert!(joined[n..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn normalization_and_identity_augment(v in prop::collection::vec(-1.0f32..1.0, 1..500), seed: u64) {
        let w = Waveform::new(v.clone(), 16_000, "s").unwrap();
        let c = extract_random_chunk(&w, v.len(), seed).unwrap();
        let m: f64 = normalize_local(&c).samples.iter().map(|&s| f64::from(s)).sum::<f64>() / v.len() as f64;
        prop_assert!(m.abs() < 1e-6);
        let cfg = AugmentConfig { seed, ..AugmentConfig::identity() };
        prop_assert_eq!(augment(&c, &cfg, 3).samples, c.samples);
    }

    #[test]
    fn standardizer_moments(rows in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 3), 2..30)) {
        let s = Standardizer::fit(&rows).unwrap();
        let z = s.apply_rows(&rows).unwrap();
        let n = rows.len() as f64;
        for d in 0..3 {
            let m = z.iter().map(|r| r[d]).sum::<f64>() / n;
            prop_assert!(m.abs() < 1e-9);
            let v = z.iter().map(|r| (r[d] - m).powi(2)).sum::<f64>() / n;
            prop_assert!(v < 1e-18 || (v - 1.0).abs() < 1e-9);
        }
    }
}

fn vote_case() -> impl Strategy<Value = Vec<(usize, [f64; 3])>> {
    prop::collection::vec((0usize..3, prop::array::uniform3(-2.0f64..2.0)), 1..12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn majority_vote_order_invariant(case in vote_case(), seed: u64) {
        let records: Vec<PredictionRecord> = case
            .iter()
            .enumerate()
            .map(|(i, (p, s))| PredictionRecord { narrative_id: "n".into(), unit_index: i, predicted: *p, scores: s.to_vec() })
            .collect();
        let mut shuffled = records.clone();
        let k = shuffled.len();
        for i in 0..k {
            shuffled.swap(i, (seed as usize).wrapping_add(i * 7919) % k);
        }
        shuffled.reverse();
        prop_assert_eq!(majority_vote(&records).unwrap(), majority_vote(&shuffled).unwrap());
    }

    #[test]
    fn uar_label_permutation_invariant(pairs in prop::collection::vec((0usize..3, 0usize..3), 1..40), perm in Just(vec![0usize, 1, 2]).prop_shuffle()) {
        let a = ConfusionMatrix::from_pairs(pairs.iter().copied(), 3);
        let b = ConfusionMatrix::from_pairs(pairs.iter().map(|&(t, p)| (perm[t], perm[p])), 3);
        prop_assert!((uar(&a).unwrap() - uar(&b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn single_narrative_uar_is_binary(t in 0usize..3, p in 0usize..3) {
        let truths = BTreeMap::from([("x".to_string(), t)]);
        let preds = BTreeMap::from([("x".to_string(), p)]);
        let v = uar(&ConfusionMatrix::from_predictions(&preds, &truths, 3).unwrap()).unwrap();
        prop_assert!(v == 0.0 || v == 1.0);
    }

    #[test]
    fn predict_shift_invariant(scores in prop::array::uniform3(-5.0f64..5.0), shift in -10.0f64..10.0, x in prop::collection::vec(-3.0f64..3.0, 2)) {
        let m = LinearModel { weights: vec![vec![scores[0], 1.0], vec![scores[1], -1.0], vec![scores[2], 0.5]], biases: scores.to_vec() };
        let shifted = LinearModel { biases: scores.iter().map(|b| b + shift).collect(), ..m.clone() };
        let a = m.decision(&x).unwrap();
        prop_assert_eq!(m.predict(&x).unwrap(), argmax_lowest(&a));
        let mut shifted_scores = a.clone();
        shifted_scores.iter_mut().for_each(|s| *s += shift);
        prop_assert_eq!(argmax_lowest(&a), argmax_lowest(&shifted_scores));
        prop_assert_eq!(m.predict(&[0.0, 0.0]).unwrap(), shifted.predict(&[0.0, 0.0]).unwrap());
    }
}

fn binary_instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (2usize..=10, 1usize..=3).prop_flat_map(|(n, d)| {
        (
            prop::collection::vec(prop::collection::vec(-3.0f64..3.0, d), n),
            prop::collection::vec(prop::bool::ANY, n),
        )
            .prop_map(|(x, signs)| {
                let mut y: Vec<f64> = signs.iter().map(|&s| if s { 1.0 } else { -1.0 }).collect();
                y[0] = 1.0;
                y[1] = -1.0;
                (x, y)
            })
    })
}

/// Labels from a random hyperplane, with points pushed off it by a margin.
fn separable_instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (
        prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 4..20),
        prop::array::uniform2(-1.0f64..1.0),
        -0.5f64..0.5,
    )
        .prop_filter_map("degenerate normal", |(mut x, n, off)| {
            let norm = (n[0] * n[0] + n[1] * n[1]).sqrt();
            if norm < 0.2 {
                return None;
            }
            let y: Vec<f64> = x
                .iter()
                .map(|p| {
                    if n[0] * p[0] + n[1] * p[1] + off >= 0.0 {
                        1.0
                    } else {
                        -1.0
                    }
                })
                .collect();
            if !y.contains(&1.0) || !y.contains(&-1.0) {
                return None;
            }
            for (p, &yi) in x.iter_mut().zip(&y) {
                p[0] += yi * 0.5 * n[0] / norm;
                p[1] += yi * 0.5 * n[1] / norm;
            }
            Some((x, y))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dual_feasible_and_converged((x, y) in binary_instance(), c in 0.01f64..10.0, seed: u64) {
        let cfg = SvmConfig { c, seed, ..Default::default() };
        let s = train_binary(&x, &y, &cfg).unwrap();
        prop_assert!(s.alpha.iter().all(|&a| (0.0..=c).contains(&a)));
        prop_assert!(s.iterations <= cfg.max_iterations);
        if s.converged {
            prop_assert!(s.max_violation < cfg.tolerance);
        }
        let cs = vec![c; x.len()];
        let gap = primal_objective(&s.w, s.b, &x, &y, &cs) - common::svm_oracle(&x, &y, &cs);
        prop_assert!(gap.abs() < 1e-3, "gap {gap}");
        prop_assert_eq!(&s, &train_binary(&x, &y, &cfg).unwrap());
    }

    #[test]
    fn separable_fits_and_duplication((x, y) in separable_instance(), seed: u64) {
        let cfg = SvmConfig { c: 1e3, seed, ..Default::default() };
        let s = train_binary(&x, &y, &cfg).unwrap();
        let signs: Vec<bool> = x.iter().map(|p| s.decision(p) > 0.0).collect();
        prop_assert!(signs.iter().zip(&y).all(|(&pos, &yi)| pos == (yi > 0.0)));
        let x2: Vec<Vec<f64>> = x.iter().chain(&x).cloned().collect();
        let y2: Vec<f64> = y.iter().chain(&y).copied().collect();
        let s2 = train_binary(&x2, &y2, &cfg).unwrap();
        let signs2: Vec<bool> = x.iter().map(|p| s2.decision(p) > 0.0).collect();
        prop_assert_eq!(signs, signs2);
    }
}
