//! Performance-gap measurement and sampled checks of the worst-case gap bounds.
//!
//! All maxima over `x` are estimated on a finite point set (a grid and a
//! random sample over the oracle's box, the search starts, and every iterate
//! visited by either search). Reports carry the label `sampled-max`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::objective::{distance, norm, Objective};
use crate::search::{ascend, SearchConfig, SearchTrace};
use crate::seed;

use super::oracle::Oracle;

pub const ESTIMATE_LABEL: &str = "sampled-max";

/// Relative slack allowed when comparing a bound with the `ℓ·e^μ` constant.
pub const REMARK_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Violated,
    NotApplicable,
}

impl Verdict {
    fn from_le(lhs: f64, rhs: f64) -> Self {
        if lhs <= rhs {
            Verdict::Holds
        } else {
            Verdict::Violated
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapMeasurement {
    pub start: Vec<f64>,
    pub search_steps: usize,
    pub learning_rate: f64,
    /// `g(x_*) − g(x_*^m)` for the oracle-guided search.
    pub regret_oracle: f64,
    /// `g(x_*) − g(x_φ^m)` for the surrogate-guided search.
    pub regret_surrogate: f64,
    pub gap: f64,
}

struct GapRun {
    measurement: GapMeasurement,
    oracle_trace: SearchTrace,
    surrogate_trace: SearchTrace,
}

fn run_gap<M: Objective + ?Sized>(
    oracle: &Oracle,
    model: &M,
    x0: &[f64],
    m: usize,
    lr: f64,
    x_star_value: f64,
) -> Result<GapRun> {
    check_dim("model input", oracle.dim, model.dim())?;
    let cfg = SearchConfig::plain(m, lr);
    let oracle_trace = ascend(oracle, x0, &cfg)?;
    let surrogate_trace = ascend(model, x0, &cfg)?;
    let regret_oracle = x_star_value - oracle.value(oracle_trace.last());
    let regret_surrogate = x_star_value - oracle.value(surrogate_trace.last());
    Ok(GapRun {
        measurement: GapMeasurement {
            start: x0.to_vec(),
            search_steps: m,
            learning_rate: lr,
            regret_oracle,
            regret_surrogate,
            gap: (regret_oracle - regret_surrogate).abs(),
        },
        oracle_trace,
        surrogate_trace,
    })
}

/// Runs plain ascent on the oracle and on the model from `x0` and compares
/// the oracle's value at both endpoints.
pub fn measure_gap<M: Objective + ?Sized>(
    oracle: &Oracle,
    model: &M,
    x0: &[f64],
    m: usize,
    lr: f64,
    x_star_value: f64,
) -> Result<GapMeasurement> {
    Ok(run_gap(oracle, model, x0, m, lr, x_star_value)?.measurement)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundCheckConfig {
    pub n_starts: usize,
    /// Uniform random points over the box added to the maxima sample set.
    pub n_samples: usize,
    /// Points per dimension of a regular grid over the box; 0 disables it.
    pub grid_per_dim: usize,
    pub m_values: Vec<usize>,
    /// One λ per entry of `m_values`; `None` uses `λ = 1/m`.
    pub learning_rates: Option<Vec<f64>>,
    /// Mixing weight of the generalized bound, in `(0, 1)`.
    pub a: f64,
    pub seed: u64,
}

impl Default for BoundCheckConfig {
    fn default() -> Self {
        Self {
            n_starts: 100,
            n_samples: 1000,
            grid_per_dim: 21,
            m_values: vec![1, 5, 10],
            learning_rates: None,
            a: 0.5,
            seed: 0,
        }
    }
}

impl BoundCheckConfig {
    fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a < 1.0) {
            return Err(Error::Config(format!("a must lie in (0, 1), got {}", self.a)));
        }
        if self.n_starts == 0 || self.m_values.is_empty() {
            return Err(Error::Config("bound check needs starts and at least one m".into()));
        }
        if self.m_values.contains(&0) {
            return Err(Error::Config("bound check m values must be >= 1".into()));
        }
        if let Some(lrs) = &self.learning_rates {
            check_dim("learning rates", self.m_values.len(), lrs.len())?;
            if lrs.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
                return Err(Error::Config("bound check learning rates must be > 0".into()));
            }
        }
        Ok(())
    }

    fn settings(&self) -> Vec<(usize, f64)> {
        self.m_values
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                let lr = match &self.learning_rates {
                    Some(l) => l[i],
                    None => 1.0 / m as f64,
                };
                (m, lr)
            })
            .collect()
    }
}

/// `m·λ·ℓ·(1 + λμ)^{m−1}·G`.
pub fn thm1_rhs(m: usize, lr: f64, ell: f64, mu: f64, grad_gap: f64) -> f64 {
    m as f64 * lr * ell * growth(m, lr, mu) * grad_gap
}

/// `ℓ·e^μ·G`.
pub fn remark_rhs(ell: f64, mu: f64, grad_gap: f64) -> f64 {
    ell * mu.exp() * grad_gap
}

fn growth(m: usize, lr: f64, mu: f64) -> f64 {
    (1.0 + lr * mu).powi(m as i32 - 1)
}

/// Both readings of the generalized bound's gradient coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thm1bRhs {
    /// `2maV + m(ℓ + a(ℓ_φ − ℓ))(1 + λμ)^{m−1}G`.
    pub stated: f64,
    /// `2maV + m((1 − a)λℓ + aℓ_φ)(1 + λμ)^{m−1}G`.
    pub derived: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn thm1b_rhs(m: usize, lr: f64, ell: f64, mu: f64, ell_phi: f64, value_gap: f64, grad_gap: f64, a: f64) -> Thm1bRhs {
    let mf = m as f64;
    let value_term = mf * 2.0 * a * value_gap;
    let tail = growth(m, lr, mu) * grad_gap;
    Thm1bRhs {
        stated: value_term + mf * (ell + a * (ell_phi - ell)) * tail,
        derived: value_term + mf * ((1.0 - a) * lr * ell + a * ell_phi) * tail,
    }
}

/// `λℓ − 2V / ((1 + λμ)^{m−1}·G)`, or `None` when `G = 0`.
pub fn thm1b_threshold(m: usize, lr: f64, ell: f64, mu: f64, value_gap: f64, grad_gap: f64) -> Option<f64> {
    let den = growth(m, lr, mu) * grad_gap;
    (den > 0.0).then(|| lr * ell - 2.0 * value_gap / den)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thm1Row {
    pub search_steps: usize,
    pub learning_rate: f64,
    /// Largest sampled gap over the starts.
    pub lhs: f64,
    pub max_gradient_gap: f64,
    pub rhs: f64,
    pub verdict: Verdict,
    pub remark_rhs: f64,
    /// Whether `rhs ≤ ℓe^μG·(1 + tol)`; not applicable when `λ > 1/m`.
    pub remark_verdict: Verdict,
    pub gaps: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thm1Report {
    pub oracle: String,
    pub estimate: String,
    pub lipschitz_value: f64,
    pub lipschitz_smooth: f64,
    pub n_starts: usize,
    pub rows: Vec<Thm1Row>,
}

impl Thm1Report {
    pub fn all_hold(&self) -> bool {
        self.rows.iter().all(|r| r.verdict == Verdict::Holds)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thm1bRow {
    pub search_steps: usize,
    pub learning_rate: f64,
    pub a: f64,
    pub lipschitz_surrogate: f64,
    pub max_value_gap: f64,
    pub max_gradient_gap: f64,
    pub rhs_thm1: f64,
    pub rhs_stated: f64,
    pub rhs_derived: f64,
    /// `None` when the gradient gap is zero.
    pub threshold: Option<f64>,
    /// `ℓ_φ ≤ threshold`.
    pub condition: Verdict,
    pub stated_tighter: bool,
    pub derived_tighter: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thm1bReport {
    pub oracle: String,
    pub estimate: String,
    pub lipschitz_value: f64,
    pub lipschitz_smooth: f64,
    pub rows: Vec<Thm1bRow>,
}

/// Grid plus random points over the oracle's box, and the random starts.
fn sample_sets(oracle: &Oracle, cfg: &BoundCheckConfig) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let bounds = oracle
        .domain_box
        .as_ref()
        .ok_or_else(|| Error::Config(format!("oracle `{}` has no domain box", oracle.name)))?;
    let mut rng = seed::rng(seed::derive_seed(cfg.seed, "bound-starts"));
    let starts: Vec<Vec<f64>> = (0..cfg.n_starts).map(|_| oracle.sample_domain(&mut rng)).collect();

    let mut points = Vec::new();
    if cfg.grid_per_dim > 0 {
        let k = cfg.grid_per_dim;
        let total = k.checked_pow(bounds.len() as u32).filter(|t| *t <= 10_000_000).ok_or_else(|| {
            Error::Config(format!("grid of {k} points per dimension is too large in {} dimensions", bounds.len()))
        })?;
        for mut idx in 0..total {
            let x = bounds
                .iter()
                .map(|(lo, hi)| {
                    let i = idx % k;
                    idx /= k;
                    if k == 1 {
                        0.5 * (lo + hi)
                    } else {
                        lo + (hi - lo) * i as f64 / (k - 1) as f64
                    }
                })
                .collect();
            points.push(x);
        }
    }
    let mut rng = seed::rng(seed::derive_seed(cfg.seed, "bound-samples"));
    points.extend((0..cfg.n_samples).map(|_| oracle.sample_domain(&mut rng)));
    points.extend(starts.iter().cloned());
    Ok((points, starts))
}

struct Maxima {
    grad_gap: f64,
    value_gap: f64,
    surrogate_grad: f64,
}

fn maxima<M: Objective + ?Sized>(oracle: &Oracle, model: &M, points: &[&[f64]]) -> Maxima {
    points
        .par_iter()
        .map(|x| {
            let gs = model.gradient(x);
            Maxima {
                grad_gap: distance(&oracle.gradient(x), &gs),
                value_gap: (oracle.value(x) - model.value(x)).abs(),
                surrogate_grad: norm(&gs),
            }
        })
        .reduce(
            || Maxima {
                grad_gap: 0.0,
                value_gap: 0.0,
                surrogate_grad: 0.0,
            },
            |a, b| Maxima {
                grad_gap: a.grad_gap.max(b.grad_gap),
                value_gap: a.value_gap.max(b.value_gap),
                surrogate_grad: a.surrogate_grad.max(b.surrogate_grad),
            },
        )
}

struct Setting {
    m: usize,
    lr: f64,
    gaps: Vec<f64>,
    maxima: Maxima,
}

fn evaluate_settings<M: Objective + ?Sized>(
    oracle: &Oracle,
    model: &M,
    cfg: &BoundCheckConfig,
) -> Result<(f64, f64, Vec<Setting>)> {
    cfg.validate()?;
    let (ell, mu) = oracle.lipschitz()?;
    check_dim("model input", oracle.dim, model.dim())?;
    let (points, starts) = sample_sets(oracle, cfg)?;
    let x_star = oracle.optimum_value.unwrap_or(0.0);
    let settings = cfg
        .settings()
        .into_iter()
        .map(|(m, lr)| {
            let runs = starts
                .par_iter()
                .map(|x0| run_gap(oracle, model, x0, m, lr, x_star))
                .collect::<Result<Vec<_>>>()?;
            let mut set: Vec<&[f64]> = points.iter().map(Vec::as_slice).collect();
            for run in &runs {
                set.extend(run.oracle_trace.iterates.iter().map(Vec::as_slice));
                set.extend(run.surrogate_trace.iterates.iter().map(Vec::as_slice));
            }
            Ok(Setting {
                m,
                lr,
                gaps: runs.iter().map(|r| r.measurement.gap).collect(),
                maxima: maxima(oracle, model, &set),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((ell, mu, settings))
}

/// Sampled check of `max_x gap ≤ mλℓ(1 + λμ)^{m−1}·max_x ‖∇g − ∇g_φ‖`.
pub fn check_bound_thm1<M: Objective + ?Sized>(
    oracle: &Oracle,
    model: &M,
    cfg: &BoundCheckConfig,
) -> Result<Thm1Report> {
    let (ell, mu, settings) = evaluate_settings(oracle, model, cfg)?;
    let rows = settings
        .into_iter()
        .map(|s| {
            let lhs = s.gaps.iter().cloned().fold(0.0, f64::max);
            let g = s.maxima.grad_gap;
            let rhs = thm1_rhs(s.m, s.lr, ell, mu, g);
            let remark = remark_rhs(ell, mu, g);
            let remark_verdict = if s.lr * s.m as f64 <= 1.0 + 1e-12 {
                Verdict::from_le(rhs, remark * (1.0 + REMARK_TOLERANCE))
            } else {
                Verdict::NotApplicable
            };
            Thm1Row {
                search_steps: s.m,
                learning_rate: s.lr,
                lhs,
                max_gradient_gap: g,
                rhs,
                verdict: Verdict::from_le(lhs, rhs),
                remark_rhs: remark,
                remark_verdict,
                gaps: s.gaps,
            }
        })
        .collect();
    Ok(Thm1Report {
        oracle: oracle.name.clone(),
        estimate: ESTIMATE_LABEL.into(),
        lipschitz_value: ell,
        lipschitz_smooth: mu,
        n_starts: cfg.n_starts,
        rows,
    })
}

/// Evaluates the generalized bound and its tightness condition.
pub fn check_condition_thm1b<M: Objective + ?Sized>(
    oracle: &Oracle,
    model: &M,
    cfg: &BoundCheckConfig,
) -> Result<Thm1bReport> {
    let (ell, mu, settings) = evaluate_settings(oracle, model, cfg)?;
    let rows = settings
        .into_iter()
        .map(|s| {
            let (v, g, ell_phi) = (s.maxima.value_gap, s.maxima.grad_gap, s.maxima.surrogate_grad);
            let rhs1 = thm1_rhs(s.m, s.lr, ell, mu, g);
            let rhs = thm1b_rhs(s.m, s.lr, ell, mu, ell_phi, v, g, cfg.a);
            let threshold = thm1b_threshold(s.m, s.lr, ell, mu, v, g);
            let condition = match threshold {
                Some(t) => Verdict::from_le(ell_phi, t),
                None => Verdict::NotApplicable,
            };
            Thm1bRow {
                search_steps: s.m,
                learning_rate: s.lr,
                a: cfg.a,
                lipschitz_surrogate: ell_phi,
                max_value_gap: v,
                max_gradient_gap: g,
                rhs_thm1: rhs1,
                rhs_stated: rhs.stated,
                rhs_derived: rhs.derived,
                threshold,
                condition,
                stated_tighter: rhs.stated < rhs1,
                derived_tighter: rhs.derived < rhs1,
            }
        })
        .collect();
    Ok(Thm1bReport {
        oracle: oracle.name.clone(),
        estimate: ESTIMATE_LABEL.into(),
        lipschitz_value: ell,
        lipschitz_smooth: mu,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_steps_have_zero_gap() {
        let o = Oracle::quadratic2d();
        let shifted = Oracle::quadratic("q", vec![1.0, 1.0], vec![0.0, 0.0], vec![(-1.0, 1.0); 2]).unwrap();
        let g = measure_gap(&o, &shifted, &[0.5, 0.5], 0, 0.1, 0.0).unwrap();
        assert_eq!(g.gap, 0.0);
        assert_eq!(g.regret_oracle, -o.value(&[0.5, 0.5]));
    }

    #[test]
    fn identical_model_holds_with_zero_sides() {
        let o = Oracle::quadratic2d();
        let cfg = BoundCheckConfig {
            n_starts: 10,
            n_samples: 10,
            grid_per_dim: 3,
            ..Default::default()
        };
        let r = check_bound_thm1(&o, &o, &cfg).unwrap();
        assert!(r.rows.iter().all(|row| row.lhs == 0.0 && row.rhs == 0.0));
        assert!(r.all_hold());
        let b = check_condition_thm1b(&o, &o, &cfg).unwrap();
        for row in &b.rows {
            assert_eq!(row.rhs_derived, 0.0);
            assert_eq!(row.condition, Verdict::NotApplicable);
        }
    }

    #[test]
    fn config_errors() {
        let o = Oracle::quadratic2d();
        let bad_a = BoundCheckConfig { a: 1.0, ..Default::default() };
        assert!(check_bound_thm1(&o, &o, &bad_a).is_err());
        let shekel_like = Oracle::linear4();
        let mut no_l = shekel_like.clone();
        no_l.lipschitz_value = None;
        assert!(matches!(
            check_bound_thm1(&no_l, &no_l, &BoundCheckConfig::default()),
            Err(Error::MissingLipschitz(_))
        ));
    }

    #[test]
    fn generalized_forms_at_small_a() {
        let (m, lr, ell, mu, lp, v, g) = (5, 0.2, 3.0, 2.0, 1.5, 0.01, 0.2);
        let r = thm1b_rhs(m, lr, ell, mu, lp, v, g, 1e-9);
        let eq7 = thm1_rhs(m, lr, ell, mu, g);
        assert!((r.derived - eq7).abs() < 1e-7);
        assert!((r.stated - eq7 / lr).abs() < 1e-7);
    }
}
