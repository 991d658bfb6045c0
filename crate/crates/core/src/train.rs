//! Parameter reconstruction: gradient-descent training of the Lindblad
//! ansatz against an observation dataset, with multi-initialization
//! statistics and relative-error tracking.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adjoint::{backward_pass, AdjointError, LossKind};
use crate::dataset::{build_chain_engine, build_spin32_engine, Dataset, Family, CHAIN_LEN};
use crate::engine::FlowEngine;
use crate::integrate::{IntegrationPlan, Method};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("parameter vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("reference parameter scale is zero")]
    ZeroScale,
    #[error("dataset has no ground truth, required for error tracking or frozen α")]
    MissingTruth,
    #[error(transparent)]
    Adjoint(#[from] AdjointError),
}

/// Trainable parameters: α free, γ realized as u² so the rates stay
/// non-negative without constraints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThetaParams {
    pub alpha: Vec<f64>,
    pub gamma_sqrt: Vec<f64>,
}

impl ThetaParams {
    pub fn gammas(&self) -> Vec<f64> {
        self.gamma_sqrt.iter().map(|u| u * u).collect()
    }

    pub fn from_gammas(alpha: Vec<f64>, gammas: &[f64]) -> Self {
        ThetaParams { alpha, gamma_sqrt: gammas.iter().map(|g| g.sqrt()).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    Alpha,
    Gamma,
}

/// Averaged relative error E = sqrt(N⁻¹ Σ (pred − real)²) / θ̄, where the
/// scale θ̄ is the mean |real| (α group) or mean real (γ group).
pub fn relative_error(pred: &[f64], real: &[f64], group: ParamGroup) -> Result<f64, TrainError> {
    if pred.len() != real.len() {
        return Err(TrainError::LengthMismatch(pred.len(), real.len()));
    }
    let n = real.len() as f64;
    let bar = match group {
        ParamGroup::Alpha => real.iter().map(|v| v.abs()).sum::<f64>() / n,
        ParamGroup::Gamma => real.iter().sum::<f64>() / n,
    };
    if bar == 0.0 {
        return Err(TrainError::ZeroScale);
    }
    let msd = pred.iter().zip(real).map(|(p, r)| (p - r) * (p - r)).sum::<f64>() / n;
    Ok(msd.sqrt() / bar)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OptimizerKind {
    /// Plain gradient descent θ ← θ − λ dL/dθ.
    Gd { lr: f64 },
    /// Adaptive moment estimation with the usual defaults.
    Adam { lr: f64 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EarlyStop {
    /// Stop when the best loss seen so far has not improved by at least
    /// `rel_improvement` (relatively) within the last `window` epochs.
    /// Judging against the running best keeps oscillating optimizers from
    /// triggering a stop on a transient uptick.
    pub window: usize,
    pub rel_improvement: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossKindConfig,
    pub optimizer: OptimizerKind,
    pub epochs: usize,
    pub n_init: usize,
    pub seed: u64,
    /// Keep α pinned at the ground truth; only γ is learned.
    pub freeze_alpha: bool,
    pub early_stop: Option<EarlyStop>,
    /// Per-epoch multiplicative learning-rate factor (1.0 = constant).
    /// Decaying the step lets the optimizer settle instead of orbiting the
    /// minimum once the loss is small.
    #[serde(default = "default_lr_decay")]
    pub lr_decay: f64,
    /// First epoch at which the decay factor starts to apply. A constant
    /// full-size step travels to the loss basin fastest; the decay is only
    /// useful once the optimizer orbits the minimum.
    #[serde(default)]
    pub lr_decay_from: usize,
}

fn default_lr_decay() -> f64 {
    1.0
}

/// Serializable mirror of [`LossKind`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKindConfig {
    Mse,
    Mae,
}

impl From<LossKindConfig> for LossKind {
    fn from(k: LossKindConfig) -> LossKind {
        match k {
            LossKindConfig::Mse => LossKind::Mse,
            LossKindConfig::Mae => LossKind::Mae,
        }
    }
}

impl TrainConfig {
    pub fn default_adam(epochs: usize, n_init: usize, seed: u64) -> Self {
        TrainConfig {
            loss: LossKindConfig::Mse,
            optimizer: OptimizerKind::Adam { lr: 0.01 },
            epochs,
            n_init,
            seed,
            freeze_alpha: false,
            early_stop: Some(EarlyStop { window: 200, rel_improvement: 1e-6 }),
            lr_decay: 1.0,
            lr_decay_from: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub e_alpha: Option<f64>,
    pub e_gamma: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitResult {
    pub init: usize,
    pub epochs: Vec<EpochRecord>,
    /// Parameters at the lowest-loss epoch (the retained checkpoint).
    pub final_alphas: Vec<f64>,
    pub final_gammas: Vec<f64>,
    pub diverged: bool,
}

impl InitResult {
    /// The lowest-loss epoch record — the checkpoint whose parameters are
    /// reported in `final_alphas`/`final_gammas`.
    pub fn best_record(&self) -> Option<&EpochRecord> {
        self.epochs.iter().min_by(|a, b| a.loss.partial_cmp(&b.loss).unwrap())
    }
}

fn min_loss(init: &InitResult) -> f64 {
    init.best_record().map_or(f64::INFINITY, |r| r.loss)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub inits: Vec<InitResult>,
    /// Mean and standard deviation of the final E_α over initializations
    /// (None without ground truth).
    pub e_alpha_mean_std: Option<(f64, f64)>,
    pub e_gamma_mean_std: Option<(f64, f64)>,
    /// Index of the initialization with the lowest checkpoint loss.
    pub best_init: usize,
}

impl TrainReport {
    /// Tabular training log: one row per (init, epoch).
    pub fn to_table(&self) -> String {
        let mut out = String::from("init,epoch,loss,e_alpha,e_gamma\n");
        for init in &self.inits {
            for rec in &init.epochs {
                out.push_str(&format!(
                    "{},{},{:.17e},{},{}\n",
                    init.init,
                    rec.epoch,
                    rec.loss,
                    rec.e_alpha.map_or(String::from(""), |v| format!("{v:.17e}")),
                    rec.e_gamma.map_or(String::from(""), |v| format!("{v:.17e}")),
                ));
            }
        }
        out
    }

    /// Checkpoint (lowest) loss of one initialization.
    pub fn final_loss(&self, init: usize) -> f64 {
        self.inits[init].best_record().map_or(f64::NAN, |r| r.loss)
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: usize,
}

impl AdamState {
    fn new(n: usize) -> Self {
        AdamState { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, lr: f64, grad: &[f64], params: &mut [f64]) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        let bc1 = 1.0 - B1.powi(self.t as i32);
        let bc2 = 1.0 - B2.powi(self.t as i32);
        for i in 0..grad.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= lr * mhat / (vhat.sqrt() + EPS);
        }
    }
}

/// Everything fixed about one training problem: per-batch engines and
/// initial states (the probe differs across batches), the shared
/// integration plan, and per-batch targets.
pub(crate) struct Problem<E: FlowEngine> {
    pub(crate) engines: Vec<E>,
    pub(crate) y0s: Vec<E::State>,
    pub(crate) targets: Vec<Array2<f64>>,
    pub(crate) plan: IntegrationPlan,
}

/// Loss and dL/d(α, γ) averaged over batches at the given parameters.
fn loss_and_grad<E: FlowEngine>(
    problem: &mut Problem<E>,
    alphas: &[f64],
    gammas: &[f64],
    kind: LossKind,
) -> Result<(f64, Vec<f64>), AdjointError> {
    let n_params = alphas.len() + gammas.len();
    let mut grad = vec![0.0; n_params];
    let mut loss = 0.0;
    let n_batches = problem.engines.len();
    for b in 0..n_batches {
        problem.engines[b].set_params(alphas, gammas);
        let r = backward_pass(
            &problem.engines[b],
            &problem.y0s[b],
            &problem.plan,
            &problem.targets[b],
            kind,
        )?;
        loss += r.loss / n_batches as f64;
        for (g, rg) in grad.iter_mut().zip(&r.grad) {
            *g += rg / n_batches as f64;
        }
    }
    Ok((loss, grad))
}

pub(crate) fn build_problem_spin32(dataset: &Dataset) -> Problem<crate::engine::DirectEngine> {
    let preset = &dataset.preset;
    let na = preset.n_alpha();
    let ng = preset.n_gamma();
    let engines = dataset
        .batches
        .iter()
        .map(|b| {
            build_spin32_engine(
                &vec![0.0; na],
                &vec![0.0; ng],
                b.probe_frequencies.as_deref(),
                preset.observables,
            )
        })
        .collect();
    let y0s = dataset
        .batches
        .iter()
        .map(|b| b.initial_state.density_matrix(4))
        .collect();
    let targets = (0..dataset.batches.len())
        .map(|b| {
            let full = dataset.targets(b);
            full.slice(ndarray::s![1.., ..]).to_owned()
        })
        .collect();
    Problem { engines, y0s, targets, plan: training_plan(dataset) }
}

pub(crate) fn build_problem_chain(dataset: &Dataset) -> Problem<crate::engine::PauliEngine> {
    let preset = &dataset.preset;
    let na = preset.n_alpha();
    let ng = preset.n_gamma();
    let engines: Vec<_> = dataset
        .batches
        .iter()
        .map(|b| {
            build_chain_engine(
                CHAIN_LEN,
                &vec![0.0; na],
                &vec![0.0; ng],
                b.probe_frequencies.as_deref(),
                preset.observables,
            )
        })
        .collect();
    let y0s = dataset
        .batches
        .iter()
        .zip(&engines)
        .map(|(b, e)| match b.initial_state.bloch_vectors(CHAIN_LEN) {
            Some(bloch) => e.encode_product(&bloch),
            None => e.encode_dense(&b.initial_state.density_matrix(1 << CHAIN_LEN)),
        })
        .collect();
    let targets = (0..dataset.batches.len())
        .map(|b| {
            let full = dataset.targets(b);
            full.slice(ndarray::s![1.., ..]).to_owned()
        })
        .collect();
    Problem { engines, y0s, targets, plan: training_plan(dataset) }
}

/// The t = 0 row of every batch is the (known) initial condition and
/// carries no parameter information, so the trained grid starts at t_1.
pub(crate) fn training_plan(dataset: &Dataset) -> IntegrationPlan {
    let preset = &dataset.preset;
    IntegrationPlan {
        t_start: 0.0,
        t_end: preset.t_end,
        observation_times: preset.time_grid().into_iter().skip(1).collect(),
        substeps_per_interval: preset.substeps_per_interval,
        method: Method::Rk4,
    }
}

/// Loss and gradient of the dataset at explicit parameters — the
/// single-evaluation entry point (benchmarks, sensitivity studies).
pub fn evaluate_loss_grad(
    dataset: &Dataset,
    alphas: &[f64],
    gammas: &[f64],
    kind: LossKind,
) -> Result<(f64, Vec<f64>), TrainError> {
    match dataset.preset.family {
        Family::Spin32 => {
            let mut p = build_problem_spin32(dataset);
            Ok(loss_and_grad(&mut p, alphas, gammas, kind)?)
        }
        Family::Chain5 => {
            let mut p = build_problem_chain(dataset);
            Ok(loss_and_grad(&mut p, alphas, gammas, kind)?)
        }
    }
}

/// Runs `config.n_init` independent trainings against the dataset and
/// reports per-epoch loss and (with ground truth available) relative
/// errors. Initializations draw α from the family's sampling range and
/// γ from [0, 2γ̄], matching the ground-truth prior.
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<TrainReport, TrainError> {
    match dataset.preset.family {
        Family::Spin32 => {
            let mut p = build_problem_spin32(dataset);
            train_generic(dataset, config, &mut p)
        }
        Family::Chain5 => {
            let mut p = build_problem_chain(dataset);
            train_generic(dataset, config, &mut p)
        }
    }
}

fn init_theta(dataset: &Dataset, rng: &mut impl Rng) -> ThetaParams {
    let preset = &dataset.preset;
    let alpha_range = match preset.family {
        Family::Spin32 => (-1.0, 1.0),
        Family::Chain5 => (0.0, 1.0),
    };
    let gbar = preset.gamma_bar();
    let alpha =
        (0..preset.n_alpha()).map(|_| rng.gen_range(alpha_range.0..alpha_range.1)).collect();
    let gammas: Vec<f64> = (0..preset.n_gamma()).map(|_| rng.gen_range(0.0..2.0 * gbar)).collect();
    ThetaParams::from_gammas(alpha, &gammas)
}

fn train_generic<E: FlowEngine>(
    dataset: &Dataset,
    config: &TrainConfig,
    problem: &mut Problem<E>,
) -> Result<TrainReport, TrainError> {
    let truth = dataset.truth.as_ref();
    if config.freeze_alpha && truth.is_none() {
        return Err(TrainError::MissingTruth);
    }
    let kind: LossKind = config.loss.into();
    let na = dataset.preset.n_alpha();
    let mut inits = Vec::with_capacity(config.n_init);

    for init_idx in 0..config.n_init {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(0x5eed_0000 + init_idx as u64);
        let mut theta = init_theta(dataset, &mut rng);
        if config.freeze_alpha {
            theta.alpha = truth.unwrap().alphas.clone();
        }

        let n_free = na + theta.gamma_sqrt.len();
        let mut adam = AdamState::new(n_free);
        let mut records = Vec::with_capacity(config.epochs);
        let mut diverged = false;
        // lowest-loss checkpoint: reported as the run's result, so a
        // transient late-epoch overshoot cannot discard a converged state
        let mut best_loss = f64::INFINITY;
        let mut best_theta = theta.clone();
        // epoch of the last *significant* improvement, for early stopping
        let mut sig_loss = f64::INFINITY;
        let mut sig_epoch = 0usize;

        for epoch in 0..config.epochs {
            let gammas = theta.gammas();
            let (loss, grad) = match loss_and_grad(problem, &theta.alpha, &gammas, kind) {
                Ok(r) => r,
                Err(_) => {
                    diverged = true;
                    break;
                }
            };
            if !loss.is_finite() {
                diverged = true;
                break;
            }
            let (e_alpha, e_gamma) = match truth {
                Some(t) => (
                    Some(relative_error(&theta.alpha, &t.alphas, ParamGroup::Alpha)?),
                    Some(relative_error(&gammas, &t.gammas, ParamGroup::Gamma)?),
                ),
                None => (None, None),
            };
            records.push(EpochRecord { epoch, loss, e_alpha, e_gamma });

            if loss < best_loss {
                best_loss = loss;
                best_theta = theta.clone();
            }
            if loss < sig_loss * (1.0 - config.early_stop.map_or(0.0, |s| s.rel_improvement)) {
                sig_loss = loss;
                sig_epoch = epoch;
            }
            if let Some(stop) = &config.early_stop {
                if epoch - sig_epoch >= stop.window {
                    break;
                }
            }

            // chain rule to the unconstrained coordinates: dL/du = 2u·dL/dγ
            let mut step_grad = vec![0.0; n_free];
            if !config.freeze_alpha {
                step_grad[..na].copy_from_slice(&grad[..na]);
            }
            for (j, u) in theta.gamma_sqrt.iter().enumerate() {
                step_grad[na + j] = 2.0 * u * grad[na + j];
            }

            let mut flat: Vec<f64> =
                theta.alpha.iter().chain(theta.gamma_sqrt.iter()).copied().collect();
            let decay = if config.lr_decay == 1.0 {
                1.0
            } else {
                config.lr_decay.powi(epoch.saturating_sub(config.lr_decay_from) as i32)
            };
            match config.optimizer {
                OptimizerKind::Gd { lr } => {
                    let lr = lr * decay;
                    for (p, g) in flat.iter_mut().zip(&step_grad) {
                        *p -= lr * g;
                    }
                }
                OptimizerKind::Adam { lr } => adam.step(lr * decay, &step_grad, &mut flat),
            }
            theta.alpha.copy_from_slice(&flat[..na]);
            theta.gamma_sqrt.copy_from_slice(&flat[na..]);
            if config.freeze_alpha {
                theta.alpha = truth.unwrap().alphas.clone();
            }
        }

        inits.push(InitResult {
            init: init_idx,
            epochs: records,
            final_alphas: best_theta.alpha.clone(),
            final_gammas: best_theta.gammas(),
            diverged,
        });
    }

    let best_init = (0..inits.len())
        .min_by(|&a, &b| {
            let la = min_loss(&inits[a]);
            let lb = min_loss(&inits[b]);
            la.partial_cmp(&lb).unwrap()
        })
        .unwrap_or(0);

    let (e_alpha_mean_std, e_gamma_mean_std) = match truth {
        Some(t) => {
            let ea: Vec<f64> = inits
                .iter()
                .filter(|i| !i.diverged)
                .map(|i| relative_error(&i.final_alphas, &t.alphas, ParamGroup::Alpha).unwrap())
                .collect();
            let eg: Vec<f64> = inits
                .iter()
                .filter(|i| !i.diverged)
                .map(|i| relative_error(&i.final_gammas, &t.gammas, ParamGroup::Gamma).unwrap())
                .collect();
            if ea.is_empty() {
                (None, None)
            } else {
                (Some(mean_std(&ea)), Some(mean_std(&eg)))
            }
        }
        None => (None, None),
    };

    Ok(TrainReport { config: config.clone(), inits, e_alpha_mean_std, e_gamma_mean_std, best_init })
}
