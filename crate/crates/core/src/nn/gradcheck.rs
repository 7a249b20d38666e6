//! Central finite-difference gradient checking in 64-bit arithmetic.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    pub eps: f64,
    /// Coordinates checked per call; longer vectors are subsampled.
    pub max_coords: usize,
    pub seed: u64,
    /// Lower bound on the relative-error denominator. Gradients that are
    /// structurally zero (a bias feeding batch norm) are then compared in
    /// absolute terms.
    pub floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            eps: 1e-5,
            max_coords: usize::MAX,
            seed: 0,
            floor: 1e-8,
        }
    }
}

/// Relative error `|a − n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares `analytic` against central differences of `loss` around
/// `point`, returning the maximum relative error over the checked
/// coordinates. `point` is restored before returning.
pub fn check_gradient<L>(
    point: &mut [f64],
    analytic: &[f64],
    mut loss: L,
    cfg: &GradCheckConfig,
) -> Result<f64>
where
    L: FnMut(&[f64]) -> Result<f64>,
{
    if point.len() != analytic.len() {
        return Err(Error::contract(format!(
            "gradient has {} entries for a point of length {}",
            analytic.len(),
            point.len()
        )));
    }
    let coords: Vec<usize> = if point.len() <= cfg.max_coords {
        (0..point.len()).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut picked = sample(&mut rng, point.len(), cfg.max_coords).into_vec();
        picked.sort_unstable();
        picked
    };

    let mut worst = 0.0f64;
    for i in coords {
        let orig = point[i];
        point[i] = orig + cfg.eps;
        let up = loss(point);
        point[i] = orig - cfg.eps;
        let down = loss(point);
        point[i] = orig;
        let (up, down) = (up?, down?);
        if !up.is_finite() || !down.is_finite() || !analytic[i].is_finite() {
            return Err(Error::NonFinite(format!(
                "gradient check at coordinate {i}"
            )));
        }
        let numeric = (up - down) / (2.0 * cfg.eps);
        worst = worst.max(relative_error(analytic[i], numeric, cfg.floor));
    }
    Ok(worst)
}
