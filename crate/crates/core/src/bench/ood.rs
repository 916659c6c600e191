//! Offline dataset generation and out-of-distribution gradient error.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::objective::{distance, Objective};
use crate::seed;

use super::oracle::Oracle;

pub const DEFAULT_ALPHAS: [f64; 4] = [0.1, 0.2, 0.5, 1.0];
pub const DEFAULT_TEST_POINTS: usize = 1000;

/// `N(mean·1, scale·I)`: `scale` is the covariance multiplier, so each
/// coordinate has standard deviation `√scale`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputDistribution {
    Gaussian { mean: f64, scale: f64 },
}

impl Default for InputDistribution {
    fn default() -> Self {
        InputDistribution::Gaussian { mean: 0.0, scale: 1.0 }
    }
}

impl InputDistribution {
    fn validate(&self) -> Result<()> {
        let InputDistribution::Gaussian { mean, scale } = *self;
        if !(scale > 0.0 && scale.is_finite()) || !mean.is_finite() {
            return Err(Error::Config(format!(
                "gaussian scale must be finite and > 0 (got {scale}), mean finite (got {mean})"
            )));
        }
        Ok(())
    }

    fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let InputDistribution::Gaussian { mean, scale } = *self;
        let sd = scale.sqrt();
        for v in out {
            let z: f64 = rng.sample(StandardNormal);
            *v = mean + sd * z;
        }
    }
}

/// `n` i.i.d. inputs labelled by the oracle; deterministic per `seed`.
pub fn gen_offline_dataset(oracle: &Oracle, n: usize, dist: InputDistribution, seed: u64) -> Result<Dataset> {
    dist.validate()?;
    if n < 2 {
        return Err(Error::Config(format!("a dataset needs at least 2 points, got {n}")));
    }
    let mut rng = seed::rng(seed);
    let mut inputs = Array2::zeros((n, oracle.dim));
    for mut row in inputs.rows_mut() {
        dist.fill(&mut rng, row.as_slice_mut().expect("standard layout"));
    }
    let values = inputs
        .rows()
        .into_iter()
        .map(|r| oracle.value(r.as_slice().expect("standard layout")))
        .collect();
    Dataset::new(oracle.name.clone(), inputs, values)
}

/// Sorted `‖∇g − ∇g_φ‖` at `n_test` draws from `N(0, αI)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OodCurve {
    pub alpha: f64,
    pub errors: Vec<f64>,
    pub mean: f64,
    /// Midpoint average for even counts.
    pub median: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OodReport {
    pub n_test: usize,
    pub curves: Vec<OodCurve>,
}

impl OodReport {
    pub fn curve(&self, alpha: f64) -> Option<&OodCurve> {
        self.curves.iter().find(|c| c.alpha == alpha)
    }
}

pub fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Gradient error of `model` against `oracle` for each `α`. Each `α` draws
/// from its own named stream under `seed`.
pub fn ood_gradient_error<M: Objective + ?Sized>(
    model: &M,
    oracle: &Oracle,
    alphas: &[f64],
    n_test: usize,
    seed: u64,
) -> Result<OodReport> {
    check_dim("model input", oracle.dim, model.dim())?;
    if n_test == 0 {
        return Err(Error::Empty("OOD test set"));
    }
    if alphas.is_empty() {
        return Err(Error::Empty("alpha list"));
    }
    let curves = alphas
        .iter()
        .enumerate()
        .map(|(k, &alpha)| {
            let dist = InputDistribution::Gaussian { mean: 0.0, scale: alpha };
            dist.validate()?;
            let mut rng = seed::rng(seed::derive_indexed(seed, "ood-alpha", k as u64));
            let points: Vec<Vec<f64>> = (0..n_test)
                .map(|_| {
                    let mut x = vec![0.0; oracle.dim];
                    dist.fill(&mut rng, &mut x);
                    x
                })
                .collect();
            let mut errors: Vec<f64> = points
                .par_iter()
                .map(|x| distance(&oracle.gradient(x), &model.gradient(x)))
                .collect();
            if let Some(i) = errors.iter().position(|e| !e.is_finite()) {
                return Err(Error::NonFinite {
                    quantity: "gradient error",
                    stage: "OOD test point",
                    index: i,
                });
            }
            errors.sort_by(f64::total_cmp);
            let mean = errors.iter().sum::<f64>() / n_test as f64;
            let median = median_of_sorted(&errors);
            Ok(OodCurve {
                alpha,
                errors,
                mean,
                median,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OodReport { n_test, curves })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_validated() {
        let o = Oracle::quadratic2d();
        let dist = InputDistribution::default();
        let a = gen_offline_dataset(&o, 50, dist, 3).unwrap();
        let b = gen_offline_dataset(&o, 50, dist, 3).unwrap();
        assert_eq!(a.inputs(), b.inputs());
        assert_eq!(a.values(), b.values());
        let zero = InputDistribution::Gaussian { mean: 0.0, scale: 0.0 };
        assert!(gen_offline_dataset(&o, 50, zero, 3).is_err());
        assert!(gen_offline_dataset(&o, 1, dist, 3).is_err());
    }

    #[test]
    fn oracle_against_itself_has_zero_error() {
        let o = Oracle::quadratic2d();
        let r = ood_gradient_error(&o, &o, &DEFAULT_ALPHAS, 20, 1).unwrap();
        assert_eq!(r.curves.len(), 4);
        assert!(r.curves.iter().all(|c| c.errors.iter().all(|e| *e == 0.0)));
    }

    #[test]
    fn median_convention() {
        assert_eq!(median_of_sorted(&[1.0, 2.0, 10.0]), 2.0);
        assert_eq!(median_of_sorted(&[1.0, 2.0, 4.0, 10.0]), 3.0);
    }
}
