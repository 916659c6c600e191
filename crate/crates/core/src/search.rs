//! m-step gradient-ascent design search driven by any [`Objective`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::objective::Objective;
use crate::optim::{OptimizerKind, Stepper};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub search_steps: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    /// Per-dimension `(lo, hi)`; iterates are projected after every step.
    pub clip_box: Option<Vec<(f64, f64)>>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            search_steps: 150,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            clip_box: None,
        }
    }
}

impl SearchConfig {
    /// Raw ascent with `m` steps of size `λ`.
    pub fn plain(search_steps: usize, learning_rate: f64) -> Self {
        Self {
            search_steps,
            learning_rate,
            optimizer: OptimizerKind::PlainAscent,
            clip_box: None,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "search learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if let Some(bounds) = &self.clip_box {
            check_dim("clip box", dim, bounds.len())?;
            if let Some((i, _)) = bounds.iter().enumerate().find(|(_, (lo, hi))| !(lo <= hi)) {
                return Err(Error::Config(format!("clip box dimension {i} has lo > hi")));
            }
        }
        Ok(())
    }
}

/// Iterates `x⁰ … x^m` and the guiding objective's value at each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub iterates: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl SearchTrace {
    pub fn start(&self) -> &[f64] {
        &self.iterates[0]
    }

    /// The recommended design.
    pub fn last(&self) -> &[f64] {
        self.iterates.last().expect("a trace holds at least its start")
    }
}

/// Gradient ascent on `objective` from `x0`.
pub fn ascend<O: Objective + ?Sized>(objective: &O, x0: &[f64], cfg: &SearchConfig) -> Result<SearchTrace> {
    let d = objective.dim();
    check_dim("search start", d, x0.len())?;
    cfg.validate(d)?;
    if let Some(i) = x0.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            quantity: "start coordinate",
            stage: "search start",
            index: i,
        });
    }
    let mut stepper = Stepper::new(cfg.optimizer, cfg.learning_rate, d);
    let mut x = x0.to_vec();
    let mut iterates = Vec::with_capacity(cfg.search_steps + 1);
    let mut values = Vec::with_capacity(cfg.search_steps + 1);
    iterates.push(x.clone());
    values.push(objective.value(&x));
    for k in 0..cfg.search_steps {
        let grad = objective.gradient(&x);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                quantity: "gradient",
                stage: "search iterate",
                index: k,
            });
        }
        stepper.ascend(&mut x, &grad);
        if let Some(bounds) = &cfg.clip_box {
            for (xi, (lo, hi)) in x.iter_mut().zip(bounds) {
                *xi = xi.clamp(*lo, *hi);
            }
        }
        iterates.push(x.clone());
        values.push(objective.value(&x));
    }
    Ok(SearchTrace { iterates, values })
}

/// Ascent guided by a trained surrogate.
pub fn ascend_surrogate(
    model: &crate::surrogate::SurrogateModel,
    x0: &[f64],
    cfg: &SearchConfig,
) -> Result<SearchTrace> {
    ascend(model, x0, cfg)
}

/// Ascent guided by an oracle's analytic gradient.
pub fn ascend_oracle(oracle: &crate::bench::Oracle, x0: &[f64], cfg: &SearchConfig) -> Result<SearchTrace> {
    ascend(oracle, x0, cfg)
}

/// One independent trace per start, in input order. A failing start yields an
/// `Err` entry without affecting the others.
pub fn batch_search<O: Objective + ?Sized>(
    objective: &O,
    starts: &[Vec<f64>],
    cfg: &SearchConfig,
) -> Result<Vec<Result<SearchTrace>>> {
    if starts.is_empty() {
        return Err(Error::Empty("search starts"));
    }
    Ok(starts.par_iter().map(|x0| ascend(objective, x0, cfg)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    struct NegHalfNorm;

    impl Objective for NegHalfNorm {
        fn dim(&self) -> usize {
            2
        }
        fn value(&self, x: &[f64]) -> f64 {
            -0.5 * (x[0] * x[0] + x[1] * x[1])
        }
        fn gradient(&self, x: &[f64]) -> Vec<f64> {
            vec![-x[0], -x[1]]
        }
    }

    struct Poisoned;

    impl Objective for Poisoned {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, x: &[f64]) -> f64 {
            x[0]
        }
        fn gradient(&self, x: &[f64]) -> Vec<f64> {
            vec![if x[0] > 0.5 { f64::NAN } else { 1.0 }]
        }
    }

    #[test]
    fn one_plain_step() {
        let t = ascend(&NegHalfNorm, &[1.0, 0.0], &SearchConfig::plain(1, 0.1)).unwrap();
        assert_eq!(t.iterates, vec![vec![1.0, 0.0], vec![0.9, 0.0]]);
    }

    #[test]
    fn zero_steps_is_start() {
        let t = ascend(&NegHalfNorm, &[0.3, -0.2], &SearchConfig::plain(0, 0.1)).unwrap();
        assert_eq!(t.iterates, vec![vec![0.3, -0.2]]);
        assert_eq!(t.values.len(), 1);
    }

    #[test]
    fn clip_box_projects() {
        let cfg = SearchConfig {
            clip_box: Some(vec![(0.95, 2.0), (-1.0, 1.0)]),
            ..SearchConfig::plain(3, 0.5)
        };
        let t = ascend(&NegHalfNorm, &[1.0, 0.0], &cfg).unwrap();
        assert_eq!(t.last(), &[0.95, 0.0]);
    }

    #[test]
    fn non_finite_gradient_reports_iterate() {
        let err = ascend(&Poisoned, &[0.0], &SearchConfig::plain(5, 0.3)).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 2, .. }), "{err}");
    }

    #[test]
    fn batch_isolates_failures() {
        let starts = vec![vec![0.0], vec![0.9]];
        let out = batch_search(&Poisoned, &starts, &SearchConfig::plain(1, 0.1)).unwrap();
        assert!(out[0].is_ok());
        assert!(out[1].is_err());
        assert!(batch_search(&Poisoned, &[], &SearchConfig::default()).is_err());
    }

    #[test]
    fn bad_configs() {
        assert!(ascend(&NegHalfNorm, &[0.0], &SearchConfig::default()).is_err());
        assert!(ascend(&NegHalfNorm, &[0.0, 0.0], &SearchConfig::plain(1, 0.0)).is_err());
        let cfg = SearchConfig {
            clip_box: Some(vec![(1.0, 0.0), (0.0, 1.0)]),
            ..SearchConfig::default()
        };
        assert!(ascend(&NegHalfNorm, &[0.0, 0.0], &cfg).is_err());
    }
}
