//! Gradient-matching surrogate training.
//!
//! For a monotone trajectory `x_1 … x_m` with values `z_1 … z_m`, each
//! consecutive pair contributes
//!
//! ```text
//! (Δz − Δxᵀ ∫₀¹ ∇g_φ(x_i + t·Δx) dt)²
//! ```
//!
//! with the integral replaced by a κ-interval trapezoid rule. The regression
//! term `Σ (z_i − g_φ(x_i))²` can be added (weighted by α) or used alone.
//!
//! Work per update is `O(p · d·m·κ·|φ|)` for `p` trajectories; the counters in
//! [`TrainReport`] track the probe rows actually evaluated.

use std::time::Instant;

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{directional_derivative, evaluate_batch, forward_value, ParamVector, Tangent};
use crate::data::{Dataset, Trajectory, TrajectorySampler};
use crate::error::{check_dim, Error, Result};
use crate::objective::Objective;
use crate::optim::{OptimizerKind, Stepper};
use crate::seed;
use crate::surrogate::{init_surrogate, ArchitectureSpec, SurrogateModel};

/// Trajectories per parallel work unit. Fixed so the reduction order, and
/// therefore every bit of the result, does not depend on the thread count.
const CHUNK_TRAJECTORIES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    GradMatch,
    Regression,
    Combined,
}

impl TrainMode {
    fn uses_gradient_term(self) -> bool {
        matches!(self, TrainMode::GradMatch | TrainMode::Combined)
    }

    fn uses_regression_term(self) -> bool {
        matches!(self, TrainMode::Regression | TrainMode::Combined)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub mode: TrainMode,
    /// Trapezoid intervals per segment.
    pub kappa: usize,
    /// Weight of the regression term in combined mode.
    pub alpha: f64,
    pub epochs: usize,
    pub traj_len: usize,
    /// Trajectories sampled per epoch.
    pub path_count: usize,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    /// Trajectories per parameter update.
    pub batch_size: usize,
    pub seed: u64,
    /// Draw fresh trajectories every epoch; `false` reuses the first draw.
    pub resample_each_epoch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: TrainMode::Combined,
            kappa: 5,
            alpha: 1.0,
            epochs: 200,
            traj_len: 10,
            path_count: 128,
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-4,
            batch_size: 128,
            seed: 0,
            resample_each_epoch: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.kappa == 0 {
            return bad("kappa must be at least 1".into());
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be finite and >= 0, got {}", self.alpha));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be > 0, got {}", self.learning_rate));
        }
        if self.traj_len < 2 {
            return bad(format!("traj_len must be at least 2, got {}", self.traj_len));
        }
        if self.path_count == 0 || self.batch_size == 0 {
            return bad("path_count and batch_size must be at least 1".into());
        }
        Ok(())
    }
}

/// Loss components for one trajectory or averaged over a batch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub gradient: f64,
    pub regression: f64,
}

impl LossParts {
    fn from_terms(mode: TrainMode, alpha: f64, gradient: f64, regression: f64) -> Self {
        let total = match mode {
            TrainMode::GradMatch => gradient,
            TrainMode::Regression => regression,
            TrainMode::Combined => gradient + alpha * regression,
        };
        Self {
            total,
            gradient,
            regression,
        }
    }
}

/// `(1/2κ) Σ_{u=1..κ} (D_{u-1} + D_u)` over directional derivatives sampled at
/// `t = u/κ`.
fn trapezoid(samples: &[f64]) -> f64 {
    let kappa = (samples.len() - 1) as f64;
    samples.windows(2).map(|w| w[0] + w[1]).sum::<f64>() / (2.0 * kappa)
}

fn trapezoid_weight(u: usize, kappa: usize) -> f64 {
    if u == 0 || u == kappa {
        0.5 / kappa as f64
    } else {
        1.0 / kappa as f64
    }
}

/// `h(t) = x(1−t) + x'·t`.
fn interpolate(x: &[f64], x_next: &[f64], t: f64, out: &mut [f64]) {
    for ((o, a), b) in out.iter_mut().zip(x).zip(x_next) {
        *o = a * (1.0 - t) + b * t;
    }
}

/// Trapezoid estimate of `Δxᵀ ∫₀¹ ∇g_φ(h(t)) dt` along the segment `x → x_next`.
pub fn segment_integral(params: &ParamVector, x: &[f64], x_next: &[f64], kappa: usize) -> Result<f64> {
    if kappa == 0 {
        return Err(Error::Config("kappa must be at least 1".into()));
    }
    let d = params.input_dim();
    check_dim("segment start", d, x.len())?;
    check_dim("segment end", d, x_next.len())?;
    let dx: Vec<f64> = x_next.iter().zip(x).map(|(b, a)| b - a).collect();
    let tangent = Tangent::new(dx)?;
    let mut h = vec![0.0; d];
    let samples = (0..=kappa)
        .map(|u| {
            interpolate(x, x_next, u as f64 / kappa as f64, &mut h);
            directional_derivative(params, &h, &tangent)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(trapezoid(&samples))
}

/// The same trapezoid rule applied to any [`Objective`], with directional
/// derivatives taken as `∇f(h)ᵀΔx`.
pub fn line_integral<O: Objective + ?Sized>(f: &O, x: &[f64], x_next: &[f64], kappa: usize) -> Result<f64> {
    if kappa == 0 {
        return Err(Error::Config("kappa must be at least 1".into()));
    }
    let d = f.dim();
    check_dim("segment start", d, x.len())?;
    check_dim("segment end", d, x_next.len())?;
    let mut h = vec![0.0; d];
    let samples: Vec<f64> = (0..=kappa)
        .map(|u| {
            interpolate(x, x_next, u as f64 / kappa as f64, &mut h);
            f.gradient(&h).iter().zip(x_next.iter().zip(x)).map(|(g, (b, a))| g * (b - a)).sum()
        })
        .collect();
    Ok(trapezoid(&samples))
}

fn check_trajectory(traj: &Trajectory, min_len: usize) -> Result<()> {
    if traj.points.len() != traj.values.len() {
        return Err(Error::dim("trajectory values", traj.points.len(), traj.values.len()));
    }
    if traj.len() < min_len {
        return Err(Error::Config(format!(
            "trajectory needs at least {min_len} points, got {}",
            traj.len()
        )));
    }
    Ok(())
}

/// `Σ_i (Δz_i − segment_integral_i)²` over consecutive trajectory points.
pub fn grad_match_loss(params: &ParamVector, traj: &Trajectory, kappa: usize) -> Result<f64> {
    check_trajectory(traj, 2)?;
    let mut loss = 0.0;
    for i in 0..traj.len() - 1 {
        let dz = traj.values[i + 1] - traj.values[i];
        let r = dz - segment_integral(params, &traj.points[i], &traj.points[i + 1], kappa)?;
        loss += r * r;
    }
    Ok(loss)
}

/// `Σ_i (z_i − g_φ(x_i))²`.
pub fn regression_loss(params: &ParamVector, traj: &Trajectory) -> Result<f64> {
    check_trajectory(traj, 1)?;
    let mut loss = 0.0;
    for (x, z) in traj.points.iter().zip(&traj.values) {
        let e = z - forward_value(params, x)?;
        loss += e * e;
    }
    Ok(loss)
}

/// `grad_match_loss + α · regression_loss`.
pub fn combined_loss(params: &ParamVector, traj: &Trajectory, kappa: usize, alpha: f64) -> Result<f64> {
    Ok(grad_match_loss(params, traj, kappa)? + alpha * regression_loss(params, traj)?)
}

/// The training objective for one trajectory under `mode`.
pub fn trajectory_loss(
    params: &ParamVector,
    traj: &Trajectory,
    mode: TrainMode,
    kappa: usize,
    alpha: f64,
) -> Result<LossParts> {
    let g = if mode.uses_gradient_term() {
        grad_match_loss(params, traj, kappa)?
    } else {
        0.0
    };
    let r = if mode.uses_regression_term() {
        regression_loss(params, traj)?
    } else {
        0.0
    };
    Ok(LossParts::from_terms(mode, alpha, g, r))
}

/// Mean loss over `batch` and its exact gradient with respect to `params`.
#[derive(Clone, Debug)]
pub struct BatchGradient {
    pub loss: LossParts,
    pub gradient: Vec<f64>,
    pub directional_rows: u64,
    pub value_rows: u64,
}

/// Unnormalized sums for a chunk of trajectories.
fn chunk_gradient(
    params: &ParamVector,
    chunk: &[Trajectory],
    mode: TrainMode,
    kappa: usize,
    alpha: f64,
    scale: f64,
) -> Result<BatchGradient> {
    let d = params.input_dim();
    let use_grad = mode.uses_gradient_term();
    let use_reg = mode.uses_regression_term();
    let reg_weight = if mode == TrainMode::Combined { alpha } else { 1.0 };

    let seg_rows: usize = if use_grad {
        chunk.iter().map(|t| (t.len() - 1) * (kappa + 1)).sum()
    } else {
        0
    };
    let val_rows: usize = if use_reg { chunk.iter().map(Trajectory::len).sum() } else { 0 };
    let rows = seg_rows + val_rows;

    let mut points = Array2::zeros((rows, d));
    let mut tangents = if use_grad { Some(Array2::zeros((rows, d))) } else { None };
    let mut row = 0;
    if let Some(tan) = tangents.as_mut() {
        for traj in chunk {
            for i in 0..traj.len() - 1 {
                let (x, xn) = (&traj.points[i], &traj.points[i + 1]);
                for u in 0..=kappa {
                    let mut p = points.row_mut(row);
                    interpolate(
                        x,
                        xn,
                        u as f64 / kappa as f64,
                        p.as_slice_mut().expect("standard layout"),
                    );
                    for (j, t) in tan.row_mut(row).iter_mut().enumerate() {
                        *t = xn[j] - x[j];
                    }
                    row += 1;
                }
            }
        }
    }
    if use_reg {
        for traj in chunk {
            for x in &traj.points {
                points
                    .row_mut(row)
                    .as_slice_mut()
                    .expect("standard layout")
                    .copy_from_slice(x);
                row += 1;
            }
        }
    }

    let eval = evaluate_batch(params, points.view(), tangents.as_ref().map(|t| t.view()))?;
    let mut cv = Array1::zeros(rows);
    let mut cd = Array1::zeros(rows);
    let mut g_sum = 0.0;
    let mut r_sum = 0.0;

    let mut row = 0;
    if let Some(dd) = eval.directional() {
        let dd = dd.as_slice().expect("contiguous");
        for traj in chunk {
            for i in 0..traj.len() - 1 {
                let samples = &dd[row..row + kappa + 1];
                let dz = traj.values[i + 1] - traj.values[i];
                let r = dz - trapezoid(samples);
                g_sum += r * r;
                for u in 0..=kappa {
                    cd[row + u] = -2.0 * r * trapezoid_weight(u, kappa) * scale;
                }
                row += kappa + 1;
            }
        }
    }
    if use_reg {
        let values = eval.values();
        for traj in chunk {
            for z in &traj.values {
                let e = z - values[row];
                r_sum += e * e;
                cv[row] = -2.0 * reg_weight * e * scale;
                row += 1;
            }
        }
    }

    let mut gradient = vec![0.0; params.len()];
    eval.accumulate_param_gradient(
        params,
        cv.view(),
        use_grad.then(|| cd.view()),
        &mut gradient,
    )?;
    Ok(BatchGradient {
        loss: LossParts::from_terms(mode, alpha, g_sum, r_sum),
        gradient,
        directional_rows: seg_rows as u64,
        value_rows: val_rows as u64,
    })
}

/// Mean per-trajectory loss over `batch` with its parameter gradient.
pub fn batch_loss_gradient(
    params: &ParamVector,
    batch: &[Trajectory],
    mode: TrainMode,
    kappa: usize,
    alpha: f64,
) -> Result<BatchGradient> {
    if batch.is_empty() {
        return Err(Error::Empty("trajectory batch"));
    }
    if kappa == 0 {
        return Err(Error::Config("kappa must be at least 1".into()));
    }
    for traj in batch {
        check_trajectory(traj, 2)?;
        for p in &traj.points {
            check_dim("trajectory point", params.input_dim(), p.len())?;
        }
    }
    let scale = 1.0 / batch.len() as f64;
    let parts = batch
        .par_chunks(CHUNK_TRAJECTORIES)
        .map(|chunk| chunk_gradient(params, chunk, mode, kappa, alpha, scale))
        .collect::<Result<Vec<_>>>()?;

    let mut gradient = vec![0.0; params.len()];
    let (mut g, mut r) = (0.0, 0.0);
    let (mut drows, mut vrows) = (0, 0);
    for part in parts {
        for (acc, v) in gradient.iter_mut().zip(&part.gradient) {
            *acc += v;
        }
        g += part.loss.gradient;
        r += part.loss.regression;
        drows += part.directional_rows;
        vrows += part.value_rows;
    }
    Ok(BatchGradient {
        loss: LossParts::from_terms(mode, alpha, g * scale, r * scale),
        gradient,
        directional_rows: drows,
        value_rows: vrows,
    })
}

/// Evaluation counts accumulated over a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkCounters {
    pub updates: u64,
    pub trajectories: u64,
    /// Rows evaluated with a tangent (one per trapezoid node per segment).
    pub directional_rows: u64,
    pub value_rows: u64,
    /// `τ · p · d · m · κ · |φ|`.
    pub nominal_cost: u128,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub mode: Option<TrainMode>,
    pub loss_total: Vec<f64>,
    pub loss_gradient: Vec<f64>,
    pub loss_regression: Vec<f64>,
    pub wall_time_secs: f64,
    pub params_checksum: String,
    pub counters: WorkCounters,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Setup(#[from] Error),

    #[error("training aborted at epoch {epoch}: {detail}")]
    Diverged {
        epoch: usize,
        detail: String,
        partial: Box<TrainReport>,
    },
}

impl TrainError {
    pub fn is_numeric(&self) -> bool {
        matches!(self, TrainError::Diverged { .. })
    }
}

/// Fits a surrogate to `ds`. Reproducible bit-for-bit for a given config.
pub fn train(
    ds: &Dataset,
    arch: &ArchitectureSpec,
    cfg: &TrainConfig,
) -> std::result::Result<(SurrogateModel, TrainReport), TrainError> {
    cfg.validate()?;
    check_dim("architecture input", ds.dim(), arch.input_dim)?;
    let model = init_surrogate(arch, seed::derive_seed(cfg.seed, "init"))?;
    let sampler = TrajectorySampler::new(ds, cfg.traj_len)?;
    train_from(model, &sampler, cfg)
}

/// Continues training `model` on trajectories from `sampler`.
pub fn train_from(
    model: SurrogateModel,
    sampler: &TrajectorySampler<'_>,
    cfg: &TrainConfig,
) -> std::result::Result<(SurrogateModel, TrainReport), TrainError> {
    cfg.validate()?;
    if sampler.traj_len() != cfg.traj_len {
        return Err(Error::Config(format!(
            "sampler builds trajectories of length {}, config expects {}",
            sampler.traj_len(),
            cfg.traj_len
        ))
        .into());
    }
    let started = Instant::now();
    let mut values = model.params().values().to_vec();
    let layout = model.params().layout().clone();
    let mut stepper = Stepper::new(cfg.optimizer, cfg.learning_rate, values.len());
    let mut report = TrainReport {
        mode: Some(cfg.mode),
        ..TrainReport::default()
    };
    report.counters.nominal_cost = cfg.epochs as u128
        * cfg.path_count as u128
        * model.input_dim() as u128
        * cfg.traj_len as u128
        * cfg.kappa as u128
        * values.len() as u128;

    let traj_seed = seed::derive_seed(cfg.seed, "trajectories");
    let fixed = (!cfg.resample_each_epoch)
        .then(|| sampler.sample(cfg.path_count, &mut seed::rng(seed::derive_indexed(traj_seed, "epoch", 0))));

    for epoch in 0..cfg.epochs {
        let fresh;
        let set = match &fixed {
            Some(set) => set,
            None => {
                let s = seed::derive_indexed(traj_seed, "epoch", epoch as u64);
                fresh = sampler.sample(cfg.path_count, &mut seed::rng(s));
                &fresh
            }
        };
        let mut epoch_loss = LossParts::default();
        for batch in set.trajectories.chunks(cfg.batch_size) {
            debug_assert!(batch.iter().all(Trajectory::is_monotone));
            let params = ParamVector::new(layout.clone(), values.clone()).map_err(|_| {
                diverged(epoch, "parameters became non-finite", &report, &values, started)
            })?;
            let bg = batch_loss_gradient(&params, batch, cfg.mode, cfg.kappa, cfg.alpha)?;
            if !bg.loss.total.is_finite() {
                return Err(diverged(epoch, "non-finite loss", &report, &values, started));
            }
            if let Some(i) = bg.gradient.iter().position(|g| !g.is_finite()) {
                let detail = format!("non-finite gradient entry {i}");
                return Err(diverged(epoch, &detail, &report, &values, started));
            }
            let w = batch.len() as f64 / set.count() as f64;
            epoch_loss.total += w * bg.loss.total;
            epoch_loss.gradient += w * bg.loss.gradient;
            epoch_loss.regression += w * bg.loss.regression;
            report.counters.updates += 1;
            report.counters.trajectories += batch.len() as u64;
            report.counters.directional_rows += bg.directional_rows;
            report.counters.value_rows += bg.value_rows;
            stepper.descend(&mut values, &bg.gradient);
        }
        report.loss_total.push(epoch_loss.total);
        report.loss_gradient.push(epoch_loss.gradient);
        report.loss_regression.push(epoch_loss.regression);
    }

    let params = ParamVector::new(layout, values)
        .map_err(|_| diverged(cfg.epochs, "parameters became non-finite", &report, &[], started))?;
    report.params_checksum = params.checksum();
    report.wall_time_secs = started.elapsed().as_secs_f64();
    Ok((model.with_params(params)?, report))
}

fn diverged(
    epoch: usize,
    detail: &str,
    report: &TrainReport,
    values: &[f64],
    started: Instant,
) -> TrainError {
    let mut partial = report.clone();
    partial.wall_time_secs = started.elapsed().as_secs_f64();
    if !values.is_empty() && values.iter().all(|v| v.is_finite()) {
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        partial.params_checksum = seed::hex_digest(&bytes);
    }
    TrainError::Diverged {
        epoch,
        detail: detail.to_string(),
        partial: Box::new(partial),
    }
}
