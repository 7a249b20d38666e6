use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::AudioChunk;
use crate::{mix_seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    /// Maximum time shift as a fraction of the chunk length.
    pub max_shift_fraction: f64,
    /// Half-width of the additive uniform noise.
    pub uniform_noise_amp: f64,
    pub gaussian_noise_std: f64,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            max_shift_fraction: 0.20,
            uniform_noise_amp: 0.005,
            gaussian_noise_std: 0.005,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    /// No shift, no noise.
    pub fn identity() -> Self {
        AugmentConfig {
            max_shift_fraction: 0.0,
            uniform_noise_amp: 0.0,
            gaussian_noise_std: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.max_shift_fraction)
            || self.uniform_noise_amp < 0.0
            || self.gaussian_noise_std < 0.0
        {
            return Err(Error::config(format!(
                "invalid augmentation settings {self:?}"
            )));
        }
        Ok(())
    }
}

/// Shifts `chunk` by `shift` samples (positive moves content later), filling
/// vacated positions with zeros.
pub(crate) fn shift_samples(samples: &[f32], shift: i64) -> Vec<f32> {
    let n = samples.len() as i64;
    (0..n)
        .map(|t| {
            let src = t - shift;
            if (0..n).contains(&src) {
                samples[src as usize]
            } else {
                0.0
            }
        })
        .collect()
}

/// Training-time augmentation: a uniform random time shift of up to
/// `max_shift_fraction` of the chunk length (non-circular), then additive
/// uniform and Gaussian noise. Output depends only on
/// `(cfg.seed, draw_index)`.
pub fn augment(chunk: &AudioChunk, cfg: &AugmentConfig, draw_index: u64) -> AudioChunk {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, draw_index));
    let max_shift = (cfg.max_shift_fraction * chunk.len() as f64).floor() as i64;
    let shift = if max_shift > 0 {
        rng.gen_range(-max_shift..=max_shift)
    } else {
        0
    };
    let mut samples = if shift == 0 {
        chunk.samples.clone()
    } else {
        shift_samples(&chunk.samples, shift)
    };

    if cfg.uniform_noise_amp > 0.0 {
        let a = cfg.uniform_noise_amp;
        for v in &mut samples {
            *v += rng.gen_range(-a..a) as f32;
        }
    }
    if cfg.gaussian_noise_std > 0.0 {
        // std is validated non-negative, so construction cannot fail
        let normal = Normal::new(0.0, cfg.gaussian_noise_std).expect("finite std");
        for v in &mut samples {
            *v += normal.sample(&mut rng) as f32;
        }
    }
    AudioChunk {
        samples,
        source_id: chunk.source_id.clone(),
        start_sample: chunk.start_sample,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> AudioChunk {
        AudioChunk {
            samples: (1..=n).map(|i| i as f32).collect(),
            source_id: "r".into(),
            start_sample: 0,
        }
    }

    #[test]
    fn zero_config_is_identity() {
        let c = ramp(1000);
        assert_eq!(augment(&c, &AugmentConfig::identity(), 17), c);
    }

    #[test]
    fn shift_fills_with_zeros() {
        let s = shift_samples(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 3);
        assert_eq!(s, vec![0.0, 0.0, 0.0, 1.0, 2.0, 3.0]);
        let s = shift_samples(&[1.0, 2.0, 3.0, 4.0], -1);
        assert_eq!(s, vec![2.0, 3.0, 4.0, 0.0]);
    }

    #[test]
    fn deterministic_per_draw() {
        let c = ramp(5000);
        let cfg = AugmentConfig {
            seed: 4,
            ..AugmentConfig::default()
        };
        assert_eq!(augment(&c, &cfg, 9), augment(&c, &cfg, 9));
        assert_ne!(augment(&c, &cfg, 9), augment(&c, &cfg, 10));
    }

    #[test]
    fn shift_stays_within_range() {
        let n = 1000;
        let c = ramp(n);
        let cfg = AugmentConfig {
            uniform_noise_amp: 0.0,
            gaussian_noise_std: 0.0,
            ..AugmentConfig::default()
        };
        for draw in 0..200 {
            let out = augment(&c, &cfg, draw);
            // recover the shift from the first nonzero sample or the first value
            let shift = match out.samples.iter().position(|&v| v != 0.0) {
                Some(0) => 1 - out.samples[0] as i64,
                Some(p) => p as i64,
                None => panic!("signal vanished"),
            };
            assert!(shift.abs() <= (0.2 * n as f64) as i64, "shift {shift}");
        }
    }
}
