use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub c: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
    pub class_weighting: bool,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            tolerance: 1e-4,
            max_iterations: 10_000,
            seed: 0,
            class_weighting: true,
        }
    }
}

impl SvmConfig {
    pub fn with_c(&self, c: f64) -> Self {
        Self { c, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::config(format!("C must be positive, got {}", self.c)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::config(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinarySolution {
    pub w: Vec<f64>,
    pub b: f64,
    /// Dual variables, each in `[0, C_i]`.
    pub alpha: Vec<f64>,
    /// Outer passes performed.
    pub iterations: usize,
    pub converged: bool,
    /// Largest projected-gradient magnitude at the final point.
    pub max_violation: f64,
}

impl BinarySolution {
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.w, x) + self.b
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `0.5 (|w|^2 + b^2) + sum_i C_i max(0, 1 - y_i (w.x_i + b))`. The bias is
/// regularized because it enters as an extra constant feature.
pub fn primal_objective(w: &[f64], b: f64, x: &[Vec<f64>], y: &[f64], c: &[f64]) -> f64 {
    let reg = 0.5 * (dot(w, w) + b * b);
    let loss: f64 = x
        .iter()
        .zip(y)
        .zip(c)
        .map(|((xi, yi), ci)| ci * (1.0 - yi * (dot(w, xi) + b)).max(0.0))
        .sum();
    reg + loss
}

/// Largest free set handed to the subspace step.
const MAX_SUBSPACE: usize = 1500;
/// Passes between subspace steps.
const SUBSPACE_EVERY: usize = 10;

/// Solves `a x = b` in place by Gaussian elimination with partial
/// pivoting. Returns `None` for a numerically singular matrix.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Newton step on the dual restricted to the free variables, truncated at
/// the first bound it reaches. Coordinate descent alone crawls along
/// nearly flat valleys when free support vectors are close to linearly
/// dependent; this step crosses them directly and never increases the
/// dual objective.
fn subspace_step(
    x: &[Vec<f64>],
    y: &[f64],
    c: &[f64],
    alpha: &mut [f64],
    w: &mut [f64],
    b: &mut f64,
) {
    let free: Vec<usize> = (0..alpha.len())
        .filter(|&i| alpha[i] > 0.0 && alpha[i] < c[i])
        .collect();
    if free.is_empty() || free.len() > MAX_SUBSPACE {
        return;
    }
    let q: Vec<Vec<f64>> = free
        .iter()
        .map(|&i| {
            free.iter()
                .map(|&j| y[i] * y[j] * (dot(&x[i], &x[j]) + 1.0))
                .collect()
        })
        .collect();
    let ridge = 1e-12 * q.iter().enumerate().map(|(k, r)| r[k]).fold(0.0, f64::max);
    let mut a = q;
    for (k, row) in a.iter_mut().enumerate() {
        row[k] += ridge;
    }
    let neg_grad: Vec<f64> = free
        .iter()
        .map(|&i| 1.0 - y[i] * (dot(w, &x[i]) + *b))
        .collect();
    let Some(delta) = solve_dense(a, neg_grad) else {
        return;
    };
    let mut t = 1.0f64;
    for (k, &i) in free.iter().enumerate() {
        if delta[k] > 0.0 {
            t = t.min((c[i] - alpha[i]) / delta[k]);
        } else if delta[k] < 0.0 {
            t = t.min(-alpha[i] / delta[k]);
        }
    }
    if !(t > 0.0) {
        return;
    }
    for (k, &i) in free.iter().enumerate() {
        let old = alpha[i];
        alpha[i] = (old + t * delta[k]).clamp(0.0, c[i]);
        let step = (alpha[i] - old) * y[i];
        for (wj, xj) in w.iter_mut().zip(&x[i]) {
            *wj += step * xj;
        }
        *b += step;
    }
}

pub fn train_binary(x: &[Vec<f64>], y: &[f64], cfg: &SvmConfig) -> Result<BinarySolution> {
    let c = vec![cfg.c; x.len()];
    train_binary_weighted(x, y, &c, cfg)
}

fn projected_gradient(g: f64, alpha: f64, c: f64) -> f64 {
    if alpha <= 0.0 {
        g.min(0.0)
    } else if alpha >= c {
        g.max(0.0)
    } else {
        g
    }
}

/// Dual coordinate descent with per-sample upper bounds `c`, with a
/// Newton step on the free variables every few passes. Labels must be
/// exactly +1 or -1 and both must occur. `cfg.c` is ignored.
pub fn train_binary_weighted(
    x: &[Vec<f64>],
    y: &[f64],
    c: &[f64],
    cfg: &SvmConfig,
) -> Result<BinarySolution> {
    let d = super::check_rows(x)?;
    let n = x.len();
    if y.len() != n || c.len() != n {
        return Err(Error::contract(format!(
            "{n} rows but {} labels and {} bounds",
            y.len(),
            c.len()
        )));
    }
    if let Some(i) = y.iter().position(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::data(format!(
            "label {} at row {i} is not +1/-1",
            y[i]
        )));
    }
    if !y.contains(&1.0) || !y.contains(&-1.0) {
        return Err(Error::data(
            "binary SVM needs both classes, got a single-class sample",
        ));
    }
    if let Some(i) = c.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::config(format!(
            "C at row {i} must be positive, got {}",
            c[i]
        )));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("SVM training features".into()));
    }
    if !(cfg.tolerance > 0.0) || cfg.max_iterations == 0 {
        return Err(Error::config(
            "solver needs a positive tolerance and at least one pass",
        ));
    }

    let q_diag: Vec<f64> = x.iter().map(|xi| dot(xi, xi) + 1.0).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let violation = |w: &[f64], b: f64, alpha: &[f64]| {
        (0..n)
            .map(|i| {
                let g = y[i] * (dot(w, &x[i]) + b) - 1.0;
                projected_gradient(g, alpha[i], c[i]).abs()
            })
            .fold(0.0f64, f64::max)
    };

    let mut iterations = 0;
    let mut converged = false;
    let mut max_violation = f64::INFINITY;
    while iterations < cfg.max_iterations {
        iterations += 1;
        order.shuffle(&mut rng);
        let mut pass_violation = 0.0f64;
        for &i in &order {
            let g = y[i] * (dot(&w, &x[i]) + b) - 1.0;
            let pg = projected_gradient(g, alpha[i], c[i]);
            pass_violation = pass_violation.max(pg.abs());
            if pg != 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / q_diag[i]).clamp(0.0, c[i]);
                let step = (alpha[i] - old) * y[i];
                if step != 0.0 {
                    for (wj, xj) in w.iter_mut().zip(&x[i]) {
                        *wj += step * xj;
                    }
                    b += step;
                }
            }
        }
        if pass_violation >= cfg.tolerance && iterations % SUBSPACE_EVERY == 0 {
            subspace_step(x, y, c, &mut alpha, &mut w, &mut b);
        }
        if pass_violation < cfg.tolerance {
            max_violation = violation(&w, b, &alpha);
            if max_violation < cfg.tolerance {
                converged = true;
                let saved = (alpha.clone(), w.clone(), b);
                subspace_step(x, y, c, &mut alpha, &mut w, &mut b);
                let polished = violation(&w, b, &alpha);
                if polished < max_violation {
                    max_violation = polished;
                } else {
                    (alpha, w, b) = saved;
                }
                break;
            }
        }
    }
    if !converged {
        max_violation = violation(&w, b, &alpha);
        log::warn!(
            "SVM dual solver stopped after {iterations} passes with violation {max_violation:.3e}"
        );
    }
    Ok(BinarySolution {
        w,
        b,
        alpha,
        iterations,
        converged,
        max_violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_points_max_margin() {
        let x = vec![vec![-1.0], vec![1.0]];
        let y = vec![-1.0, 1.0];
        let s = train_binary(
            &x,
            &y,
            &SvmConfig {
                c: 10.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(s.converged);
        assert!((s.w[0] - 1.0).abs() < 1e-2 && s.b.abs() < 1e-2, "{s:?}");
        assert!(s.decision(&x[0]) < 0.0 && s.decision(&x[1]) > 0.0);
    }

    #[test]
    fn single_class_rejected() {
        let x = vec![vec![1.0], vec![2.0]];
        assert!(matches!(
            train_binary(&x, &[1.0, 1.0], &SvmConfig::default()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn bounds_respected() {
        let x: Vec<Vec<f64>> = (0..12)
            .map(|i| vec![(i % 5) as f64, (i % 3) as f64 - 1.0])
            .collect();
        let y: Vec<f64> = (0..12)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let cfg = SvmConfig {
            c: 0.5,
            ..Default::default()
        };
        let s = train_binary(&x, &y, &cfg).unwrap();
        assert!(s.alpha.iter().all(|&a| (0.0..=0.5).contains(&a)));
        assert!(s.converged && s.max_violation < cfg.tolerance);
    }

    #[test]
    fn iteration_cap_reported() {
        let x: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i as f64).sin(), (i as f64 * 1.3).cos()])
            .collect();
        let y: Vec<f64> = (0..30)
            .map(|i| if (i * 7) % 3 == 0 { 1.0 } else { -1.0 })
            .collect();
        let cfg = SvmConfig {
            c: 100.0,
            max_iterations: 1,
            tolerance: 1e-12,
            ..Default::default()
        };
        let s = train_binary(&x, &y, &cfg).unwrap();
        assert_eq!(s.iterations, 1);
        assert!(!s.converged);
    }

    #[test]
    fn deterministic() {
        let x: Vec<Vec<f64>> = (0..15)
            .map(|i| vec![(i as f64 * 0.3).sin(), i as f64 / 7.0])
            .collect();
        let y: Vec<f64> = (0..15)
            .map(|i| if i % 3 == 0 { 1.0 } else { -1.0 })
            .collect();
        let cfg = SvmConfig {
            seed: 9,
            ..Default::default()
        };
        assert_eq!(
            train_binary(&x, &y, &cfg).unwrap(),
            train_binary(&x, &y, &cfg).unwrap()
        );
    }
}
