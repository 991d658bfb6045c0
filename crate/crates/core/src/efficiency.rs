//! Data-acquisition efficiency: how much γ-information a measurement
//! record carries.
//!
//! Three quantities are implemented:
//! * `eta_numeric` — η, the averaged sensitivity of the training loss to
//!   the dissipation rates, from per-point adjoint gradients;
//! * `chi` — the susceptibility χ(t) = |d⟨O(t)⟩/dγ̄| of one observable to
//!   a uniform scaling of all rates;
//! * `eta_closed_form` — the large-N closed forms of η(t_N) for MAE and
//!   MSE losses, whose maxima fix the optimal observation window.
//!
//! On top of these, `sweep_observation_window` and `sweep_data_points`
//! run the γ-only learning experiments that relate η to the actual
//! reconstruction error decay.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adjoint::{backward_from_impulses, forward_predictions, AdjointError, LossKind};
use crate::dataset::{
    build_spin32_engine, generate_dataset_for, Dataset, DatasetError, ExperimentPreset, Family,
    GroundTruth, InitialState, ObservableSet,
};
use crate::engine::FlowEngine;
use crate::integrate::{integrate, IntegrateError, IntegrationPlan, Method};
use crate::spectral::{spectral_analysis, SpectralError};
use crate::train::{
    train, LossKindConfig, OptimizerKind, Problem, TrainConfig, TrainError, TrainReport,
};

#[derive(Debug, Error)]
pub enum EfficiencyError {
    #[error(transparent)]
    Adjoint(#[from] AdjointError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("mean dissipation rate is zero; the uniform scaling direction is undefined")]
    ZeroGammaBar,
    #[error("sweeps are defined for the spin-3/2 family only")]
    UnsupportedFamily,
}

// ---------------------------------------------------------------------------
// closed forms
// ---------------------------------------------------------------------------

/// Large-N closed form of η as a function of the observation window,
/// with `t` the window length in units of the decoherence time t_dc:
/// MAE: (1 − e^{−t} − t e^{−t})/t;  MSE: (1 − e^{−2t} − 2t(t+1)e^{−2t})/(4t).
/// Both vanish as t → 0⁺ and t → ∞ and are unimodal in between.
pub fn eta_closed_form(t: f64, kind: LossKind) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    match kind {
        LossKind::Mae => (1.0 - (-t).exp() - t * (-t).exp()) / t,
        LossKind::Mse => {
            let e = (-2.0 * t).exp();
            (1.0 - e - 2.0 * t * (t + 1.0) * e) / (4.0 * t)
        }
    }
}

/// Observation window (in units of t_dc) that maximizes the closed-form
/// η, by golden-section search on [0.1, 10].
pub fn find_optimal_window(kind: LossKind) -> f64 {
    let inv_phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.1f64, 10.0f64);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = eta_closed_form(c, kind);
    let mut fd = eta_closed_form(d, kind);
    while b - a > 1e-4 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eta_closed_form(c, kind);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eta_closed_form(d, kind);
        }
    }
    0.5 * (a + b)
}

// ---------------------------------------------------------------------------
// susceptibility χ
// ---------------------------------------------------------------------------

/// χ at each requested time: |d⟨O(t)⟩/dγ̄| by central difference along a
/// uniform scaling of all rates (step γ̄·10⁻³ in the mean rate γ̄).
/// `times` must be strictly increasing and positive; χ(0) = 0 trivially.
/// The engine's parameters are restored on return.
pub fn chi_curve<E: FlowEngine>(
    engine: &mut E,
    y0: &E::State,
    observable: usize,
    times: &[f64],
    substeps_per_interval: usize,
    alphas: &[f64],
    gammas: &[f64],
) -> Result<Vec<f64>, EfficiencyError> {
    let gbar = gammas.iter().sum::<f64>() / gammas.len() as f64;
    if gbar <= 0.0 {
        return Err(EfficiencyError::ZeroGammaBar);
    }
    let delta = gbar * 1e-3;
    let plan = IntegrationPlan {
        t_start: 0.0,
        t_end: *times.last().unwrap_or(&0.0),
        observation_times: times.to_vec(),
        substeps_per_interval,
        method: Method::Rk4,
    };
    let mut run = |scale: f64| -> Result<Vec<f64>, EfficiencyError> {
        let scaled: Vec<f64> = gammas.iter().map(|g| g * scale).collect();
        engine.set_params(alphas, &scaled);
        let states = integrate(|y, t| engine.rhs(y, t), y0, &plan)?;
        Ok(states.iter().map(|y| engine.observe(observable, y)).collect())
    };
    let plus = run(1.0 + delta / gbar)?;
    let minus = run(1.0 - delta / gbar)?;
    engine.set_params(alphas, gammas);
    Ok(plus
        .iter()
        .zip(&minus)
        .map(|(p, m)| ((p - m) / (2.0 * delta)).abs())
        .collect())
}

/// χ at a single time.
pub fn chi<E: FlowEngine>(
    engine: &mut E,
    y0: &E::State,
    observable: usize,
    t: f64,
    substeps: usize,
    alphas: &[f64],
    gammas: &[f64],
) -> Result<f64, EfficiencyError> {
    if t <= 0.0 {
        return Ok(0.0);
    }
    Ok(chi_curve(engine, y0, observable, &[t], substeps, alphas, gammas)?[0])
}

// ---------------------------------------------------------------------------
// numeric η
// ---------------------------------------------------------------------------

/// η = (1/(N·N_γ)) Σ_n Σ_μ |dL_n/dγ_μ|: the per-point loss sensitivity
/// to every rate, averaged over all scalar data points (t = 0 rows carry
/// no information and are excluded). Each per-point gradient comes from
/// its own single-impulse backward pass. For the MSE loss the value is
/// proportional to the parameter offset from the truth (and identically
/// zero at the truth), so callers evaluate it at slightly perturbed rates.
pub fn eta_numeric(
    dataset: &Dataset,
    alphas: &[f64],
    gammas: &[f64],
    kind: LossKind,
) -> Result<f64, EfficiencyError> {
    match dataset.preset.family {
        Family::Spin32 => {
            let mut p = crate::train::build_problem_spin32(dataset);
            eta_from_problem(&mut p, alphas, gammas, kind)
        }
        Family::Chain5 => {
            let mut p = crate::train::build_problem_chain(dataset);
            eta_from_problem(&mut p, alphas, gammas, kind)
        }
    }
}

fn eta_from_problem<E: FlowEngine>(
    problem: &mut Problem<E>,
    alphas: &[f64],
    gammas: &[f64],
    kind: LossKind,
) -> Result<f64, EfficiencyError> {
    let n_alpha = alphas.len();
    let n_gamma = gammas.len() as f64;
    let mut sum = 0.0;
    let mut count = 0usize;
    for b in 0..problem.engines.len() {
        problem.engines[b].set_params(alphas, gammas);
        let engine = &problem.engines[b];
        let y0 = &problem.y0s[b];
        let (checkpoints, pred) = forward_predictions(engine, y0, &problem.plan)?;
        let times = &problem.plan.observation_times;
        let n_obs = engine.n_observables();
        for n in 0..times.len() {
            // truncated plan ending at t_n: the single impulse sits at the
            // last grid point, so nothing beyond it needs replaying
            let sub_plan = IntegrationPlan {
                t_start: problem.plan.t_start,
                t_end: times[n],
                observation_times: times[..=n].to_vec(),
                substeps_per_interval: problem.plan.substeps_per_interval,
                method: problem.plan.method,
            };
            for o in 0..n_obs {
                let coef = match kind {
                    // per-point L_n = |resid|: |dL_n/dγ| is residual-free
                    LossKind::Mae => 1.0,
                    // per-point L_n = resid²
                    LossKind::Mse => 2.0 * (pred[[n, o]] - problem.targets[b][[n, o]]),
                };
                let mut impulses = Array2::zeros((n + 1, n_obs));
                impulses[[n, o]] = coef;
                let (grad, _) = backward_from_impulses(
                    engine,
                    y0,
                    &sub_plan,
                    &checkpoints[..=n],
                    &impulses,
                )?;
                sum += grad[n_alpha..].iter().map(|g| g.abs()).sum::<f64>();
                count += 1;
            }
        }
    }
    Ok(sum / (count as f64 * n_gamma))
}

// ---------------------------------------------------------------------------
// sweeps
// ---------------------------------------------------------------------------

/// Decoherence time 1/Δ1 of the (undriven) spin-3/2 ground-truth model.
pub fn spin32_decoherence_time(truth: &GroundTruth) -> Result<f64, EfficiencyError> {
    if truth.family != Family::Spin32 {
        return Err(EfficiencyError::UnsupportedFamily);
    }
    let engine =
        build_spin32_engine(&truth.alphas, &truth.gammas, None, ObservableSet::Spin32Sx);
    let spectrum = spectral_analysis(&engine.liouvillian(0.0), 4)?;
    Ok(spectrum.t_dc)
}

/// Shared settings of one efficiency sweep (γ-only learning; α is always
/// frozen at the ground truth).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub loss: LossKindConfig,
    pub optimizer: OptimizerKind,
    pub epochs: usize,
    pub n_init: usize,
    pub seed: u64,
}

impl SweepConfig {
    pub fn default_mse(epochs: usize, n_init: usize, seed: u64) -> Self {
        SweepConfig {
            loss: LossKindConfig::Mse,
            optimizer: OptimizerKind::Adam { lr: 0.01 },
            epochs,
            n_init,
            seed,
        }
    }
}

/// One grid point of a sweep: η at (near-)truth parameters plus the
/// learning-error statistics across initializations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Grid coordinate: the window in units of t_dc, or the data count N.
    pub label: f64,
    /// Observation window t_N in absolute time units.
    pub window: f64,
    /// Number of (informative) data points.
    pub n_points: usize,
    pub eta_numeric: f64,
    pub eta_closed_form: f64,
    /// Mean and standard deviation of E_γ across initializations, per epoch.
    pub e_gamma_mean: Vec<f64>,
    pub e_gamma_std: Vec<f64>,
}

impl SweepPoint {
    pub fn final_e_gamma_mean(&self) -> f64 {
        *self.e_gamma_mean.last().unwrap_or(&f64::NAN)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EfficiencyReport {
    /// What `SweepPoint::label` means: "t_n_over_t_dc" or "n_points".
    pub label_name: String,
    pub loss: LossKindConfig,
    pub t_dc: f64,
    /// χ(t) of the undriven ground-truth model, sampled over the largest
    /// window (pairs of (t, χ)).
    pub chi_samples: Vec<(f64, f64)>,
    pub points: Vec<SweepPoint>,
}

impl EfficiencyReport {
    /// (label, η_numeric, η_closed_form) per grid point.
    pub fn eta_table(&self) -> String {
        let mut out = format!("{},eta_numeric,eta_closed_form\n", self.label_name);
        for p in &self.points {
            out.push_str(&format!(
                "{:.6},{:.17e},{:.17e}\n",
                p.label, p.eta_numeric, p.eta_closed_form
            ));
        }
        out
    }

    /// (label, epoch, mean E_γ, std E_γ) learning curves.
    pub fn error_table(&self) -> String {
        let mut out = format!("{},epoch,e_gamma_mean,e_gamma_std\n", self.label_name);
        for p in &self.points {
            for (e, (m, s)) in p.e_gamma_mean.iter().zip(&p.e_gamma_std).enumerate() {
                out.push_str(&format!("{:.6},{e},{m:.17e},{s:.17e}\n", p.label));
            }
        }
        out
    }

    /// (t, χ) samples of the ground-truth susceptibility.
    pub fn chi_table(&self) -> String {
        let mut out = String::from("t,chi\n");
        for (t, x) in &self.chi_samples {
            out.push_str(&format!("{t:.17e},{x:.17e}\n"));
        }
        out
    }
}

/// Step count keeping the RK4 substep below ≈ 0.02 time units.
fn substeps_for(interval: f64) -> usize {
    ((interval * 50.0).ceil() as usize).clamp(10, 400)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn per_epoch_gamma_stats(report: &TrainReport) -> (Vec<f64>, Vec<f64>) {
    let max_epochs = report.inits.iter().map(|i| i.epochs.len()).max().unwrap_or(0);
    let mut means = Vec::with_capacity(max_epochs);
    let mut stds = Vec::with_capacity(max_epochs);
    for e in 0..max_epochs {
        let vals: Vec<f64> = report
            .inits
            .iter()
            .filter_map(|i| i.epochs.get(e).and_then(|r| r.e_gamma))
            .collect();
        if vals.is_empty() {
            break;
        }
        let (m, s) = mean_std(&vals);
        means.push(m);
        stds.push(s);
    }
    (means, stds)
}

/// γ-only training run + η evaluation for one (window, N) configuration
/// of the spin-3/2 t-dependent-probe task. The observation grid is
/// t_n = n·window/N, n = 1..N, so exactly `n_points` informative points
/// fall inside the window.
pub fn run_sweep_point(
    truth: &GroundTruth,
    t_dc: f64,
    window: f64,
    label: f64,
    n_points: usize,
    cfg: &SweepConfig,
) -> Result<SweepPoint, EfficiencyError> {
    let mut preset = ExperimentPreset::spin32_t_dependent();
    preset.n_batches = 1;
    preset.n_times = n_points + 1;
    preset.t_end = window * (n_points + 1) as f64 / n_points as f64;
    preset.substeps_per_interval = substeps_for(window / n_points as f64);
    let dataset = generate_dataset_for(&preset, truth, cfg.seed)?;

    let train_cfg = TrainConfig {
        loss: cfg.loss,
        optimizer: cfg.optimizer,
        epochs: cfg.epochs,
        n_init: cfg.n_init,
        seed: cfg.seed,
        freeze_alpha: true,
        early_stop: None,
        lr_decay: 1.0,
        lr_decay_from: 0,
    };
    let report = train(&dataset, &train_cfg)?;
    let (e_gamma_mean, e_gamma_std) = per_epoch_gamma_stats(&report);

    let kind: LossKind = cfg.loss.into();
    let eval_gammas: Vec<f64> = match kind {
        // the MSE sensitivity vanishes exactly at the truth
        LossKind::Mse => truth.gammas.iter().map(|g| g * 1.01).collect(),
        LossKind::Mae => truth.gammas.clone(),
    };
    let eta = eta_numeric(&dataset, &truth.alphas, &eval_gammas, kind)?;

    Ok(SweepPoint {
        label,
        window,
        n_points,
        eta_numeric: eta,
        eta_closed_form: eta_closed_form(window / t_dc, kind),
        e_gamma_mean,
        e_gamma_std,
    })
}

/// χ(t) of the undriven ground-truth spin-3/2 model on the magnetized
/// initial state, sampled uniformly on (0, t_max].
pub fn truth_chi_samples(
    truth: &GroundTruth,
    t_max: f64,
    n_samples: usize,
) -> Result<Vec<(f64, f64)>, EfficiencyError> {
    let mut engine =
        build_spin32_engine(&truth.alphas, &truth.gammas, None, ObservableSet::Spin32Sx);
    let y0 = InitialState::Magnetized32.density_matrix(4);
    let times: Vec<f64> =
        (1..=n_samples).map(|i| t_max * i as f64 / n_samples as f64).collect();
    let substeps = substeps_for(t_max / n_samples as f64);
    let chis =
        chi_curve(&mut engine, &y0, 0, &times, substeps, &truth.alphas, &truth.gammas)?;
    Ok(times.into_iter().zip(chis).collect())
}

/// Sweep of the observation window t_N (grid in units of t_dc) at a
/// fixed number of data points.
pub fn sweep_observation_window(
    truth: &GroundTruth,
    grid_tdc: &[f64],
    n_points: usize,
    cfg: &SweepConfig,
) -> Result<EfficiencyReport, EfficiencyError> {
    let t_dc = spin32_decoherence_time(truth)?;
    let max_window = grid_tdc.iter().cloned().fold(0.0f64, f64::max) * t_dc;
    let mut points = Vec::with_capacity(grid_tdc.len());
    for &g in grid_tdc {
        points.push(run_sweep_point(truth, t_dc, g * t_dc, g, n_points, cfg)?);
    }
    Ok(EfficiencyReport {
        label_name: "t_n_over_t_dc".into(),
        loss: cfg.loss,
        t_dc,
        chi_samples: truth_chi_samples(truth, max_window, 100)?,
        points,
    })
}

/// Sweep of the data-point count N at a fixed observation window
/// (`window_tdc` in units of t_dc; the optimum ≈ 1.7 is the usual choice).
pub fn sweep_data_points(
    truth: &GroundTruth,
    n_grid: &[usize],
    window_tdc: f64,
    cfg: &SweepConfig,
) -> Result<EfficiencyReport, EfficiencyError> {
    let t_dc = spin32_decoherence_time(truth)?;
    let window = window_tdc * t_dc;
    let mut points = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        points.push(run_sweep_point(truth, t_dc, window, n as f64, n, cfg)?);
    }
    Ok(EfficiencyReport {
        label_name: "n_points".into(),
        loss: cfg.loss,
        t_dc,
        chi_samples: truth_chi_samples(truth, window, 100)?,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::sample_ground_truth;
    use crate::linalg::pauli;
    use crate::operators::Operator;

    #[test]
    fn closed_form_values() {
        // MAE at t = 1: 1 − 2/e
        let mae1 = eta_closed_form(1.0, LossKind::Mae);
        assert!((mae1 - (1.0 - 2.0 / std::f64::consts::E)).abs() <= 1e-15);
        // MSE at t = 1: (1 − 5e^{−2})/4
        let mse1 = eta_closed_form(1.0, LossKind::Mse);
        assert!((mse1 - (1.0 - 5.0 * (-2.0f64).exp()) / 4.0).abs() <= 1e-15);
        // MAE at t = 1.8 ≈ 0.29842
        assert!((eta_closed_form(1.8, LossKind::Mae) - 0.29842).abs() <= 5e-5);
        // both vanish at the ends
        for kind in [LossKind::Mae, LossKind::Mse] {
            assert!(eta_closed_form(1e-6, kind) <= 1e-5);
            assert!(eta_closed_form(1e9, kind) <= 1e-8);
            assert_eq!(eta_closed_form(0.0, kind), 0.0);
        }
    }

    #[test]
    fn closed_forms_are_unimodal() {
        for kind in [LossKind::Mae, LossKind::Mse] {
            let vals: Vec<f64> = (0..1000)
                .map(|i| eta_closed_form(0.1 + 9.9 * i as f64 / 999.0, kind))
                .collect();
            let mut sign_changes = 0;
            let mut rising = true;
            for w in vals.windows(2) {
                let up = w[1] > w[0];
                if up != rising {
                    sign_changes += 1;
                    rising = up;
                }
            }
            assert_eq!(sign_changes, 1, "{kind:?} not unimodal");
            assert!(vals.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn optimal_windows() {
        let mae = find_optimal_window(LossKind::Mae);
        assert!((mae - 1.79).abs() <= 0.05, "MAE optimum {mae}");
        let mse = find_optimal_window(LossKind::Mse);
        assert!((mse - 1.70).abs() <= 0.05, "MSE optimum {mse}");
        // first-order condition at both optima
        for (x, kind) in [(mae, LossKind::Mae), (mse, LossKind::Mse)] {
            let h = 1e-3;
            let slope =
                (eta_closed_form(x + h, kind) - eta_closed_form(x - h, kind)) / (2.0 * h);
            assert!(slope.abs() <= 1e-4, "{kind:?} slope {slope:.2e}");
        }
    }

    /// Qubit with a single σ_x channel: ⟨σ_z(t)⟩ = e^{−2γt}, so
    /// χ(t) = 2t·e^{−2γt}.
    fn qubit_flip_engine(gamma: f64) -> (crate::engine::SuperopEngine, crate::linalg::CVec) {
        let engine = crate::engine::SuperopEngine::new(
            2,
            &[],
            &[Operator::dense("sx", pauli(1))],
            None,
            &[pauli(3)],
            &[],
            &[gamma],
        );
        let mut rho = crate::linalg::CMat::zeros((2, 2));
        rho[[0, 0]] = crate::linalg::c(1.0, 0.0);
        (engine, crate::model::vec_state(&rho))
    }

    #[test]
    fn chi_matches_qubit_analytic() {
        let gamma = 0.3;
        let (mut engine, y0) = qubit_flip_engine(gamma);
        let times = [0.5, 1.0, 2.0, 4.0, 9.0];
        let chis = chi_curve(&mut engine, &y0, 0, &times, 60, &[], &[gamma]).unwrap();
        for (&t, x) in times.iter().zip(&chis) {
            let exact = 2.0 * t * (-2.0 * gamma * t).exp();
            assert!((x - exact).abs() <= 1e-4, "t={t}: {x} vs {exact}");
        }
        assert_eq!(chi(&mut engine, &y0, 0, 0.0, 60, &[], &[gamma]).unwrap(), 0.0);
    }

    #[test]
    fn chi_is_linear_at_small_times() {
        let gamma = 0.25;
        let (mut engine, y0) = qubit_flip_engine(gamma);
        // exponent of χ ∝ t^p from a two-point fit well below t_dc = 1/(2γ)
        let t1 = 0.02;
        let t2 = 0.08;
        let x1 = chi(&mut engine, &y0, 0, t1, 40, &[], &[gamma]).unwrap();
        let x2 = chi(&mut engine, &y0, 0, t2, 40, &[], &[gamma]).unwrap();
        let p = (x2 / x1).ln() / (t2 / t1).ln();
        assert!((p - 1.0).abs() <= 0.1, "exponent {p}");
    }

    #[test]
    fn chi_rejects_zero_rates() {
        let (mut engine, y0) = qubit_flip_engine(0.1);
        let err = chi_curve(&mut engine, &y0, 0, &[1.0], 10, &[], &[0.0]);
        assert!(matches!(err, Err(EfficiencyError::ZeroGammaBar)));
    }

    #[test]
    fn chi_envelope_peaks_near_decoherence_time() {
        let truth = sample_ground_truth(Family::Spin32, 9);
        let t_dc = spin32_decoherence_time(&truth).unwrap();
        let samples = truth_chi_samples(&truth, 3.0 * t_dc, 120).unwrap();
        let (t_peak, _) = samples
            .iter()
            .cloned()
            .fold((0.0, 0.0), |acc, (t, x)| if x > acc.1 { (t, x) } else { acc });
        assert!(
            (t_peak - t_dc).abs() <= 0.3 * t_dc,
            "peak at {t_peak:.2}, t_dc {t_dc:.2}"
        );
    }

    fn small_spin32_dataset(seed: u64, t_end: f64, n_times: usize) -> Dataset {
        let mut preset = ExperimentPreset::spin32_t_independent();
        preset.n_batches = 1;
        preset.n_times = n_times;
        preset.t_end = t_end;
        preset.substeps_per_interval = substeps_for(t_end / n_times as f64);
        crate::dataset::generate_dataset(&preset, seed).unwrap()
    }

    #[test]
    fn mse_eta_vanishes_at_truth() {
        let ds = small_spin32_dataset(91, 6.0, 10);
        let truth = ds.truth.clone().unwrap();
        let eta = eta_numeric(&ds, &truth.alphas, &truth.gammas, LossKind::Mse).unwrap();
        assert!(eta <= 1e-14, "η = {eta:.3e}");
        // ... and is positive just off the truth
        let off: Vec<f64> = truth.gammas.iter().map(|g| g * 1.01).collect();
        let eta_off = eta_numeric(&ds, &truth.alphas, &off, LossKind::Mse).unwrap();
        assert!(eta_off > 0.0);
    }

    #[test]
    fn mae_eta_matches_susceptibility_sum() {
        // the reduction of the per-channel gradient sum to the mean-rate
        // susceptibility holds once the window covers the decay (≳ t_dc)
        let truth = sample_ground_truth(Family::Spin32, 93);
        let mut preset = ExperimentPreset::spin32_t_independent();
        preset.n_batches = 1;
        preset.n_times = 24;
        preset.t_end = 27.0;
        preset.substeps_per_interval = substeps_for(27.0 / 24.0);
        let ds = generate_dataset_for(&preset, &truth, 93).unwrap();
        let eta = eta_numeric(&ds, &truth.alphas, &truth.gammas, LossKind::Mae).unwrap();

        // per-channel-averaged susceptibility of the same trajectory,
        // summed over the trained grid points
        let b = &ds.batches[0];
        let mut engine = build_spin32_engine(
            &truth.alphas,
            &truth.gammas,
            b.probe_frequencies.as_deref(),
            ds.preset.observables,
        );
        let y0 = b.initial_state.density_matrix(4);
        let times: Vec<f64> = b.times.iter().copied().skip(1).collect();
        let chis = chi_curve(
            &mut engine,
            &y0,
            0,
            &times,
            ds.preset.substeps_per_interval,
            &truth.alphas,
            &truth.gammas,
        )
        .unwrap();
        let n_gamma = truth.gammas.len() as f64;
        let chi_estimate =
            chis.iter().sum::<f64>() / (times.len() as f64 * n_gamma);
        let rel = (eta - chi_estimate).abs() / chi_estimate;
        assert!(rel <= 0.05, "η {eta:.4e} vs χ-sum {chi_estimate:.4e} (rel {rel:.3})");
    }

    #[test]
    fn short_windows_carry_less_information() {
        let truth = sample_ground_truth(Family::Spin32, 95);
        let t_dc = spin32_decoherence_time(&truth).unwrap();
        let eval: Vec<f64> = truth.gammas.iter().map(|g| g * 1.01).collect();
        let mut etas = Vec::new();
        for window in [0.1 * t_dc, 1.7 * t_dc] {
            let mut preset = ExperimentPreset::spin32_t_dependent();
            preset.n_batches = 1;
            preset.n_times = 16;
            preset.t_end = window;
            preset.substeps_per_interval = substeps_for(window / 16.0);
            let ds = generate_dataset_for(&preset, &truth, 95).unwrap();
            etas.push(eta_numeric(&ds, &truth.alphas, &eval, LossKind::Mse).unwrap());
        }
        assert!(etas[0] < etas[1], "η short {:.3e} vs η optimal {:.3e}", etas[0], etas[1]);
    }

    #[test]
    fn single_point_sweep_is_a_training_run() {
        let truth = sample_ground_truth(Family::Spin32, 97);
        let cfg = SweepConfig::default_mse(4, 2, 97);
        let report = sweep_observation_window(&truth, &[1.7], 8, &cfg).unwrap();
        assert_eq!(report.points.len(), 1);
        let p = &report.points[0];
        assert_eq!(p.e_gamma_mean.len(), 4);
        assert_eq!(p.n_points, 8);
        assert!(p.eta_numeric > 0.0);
        assert!(p.eta_closed_form > 0.0);
        assert!((p.window / report.t_dc - 1.7).abs() <= 1e-12);
        // tables render
        assert!(report.eta_table().starts_with("t_n_over_t_dc,"));
        assert_eq!(report.error_table().lines().count(), 1 + 4);
        assert_eq!(report.chi_table().lines().count(), 1 + 100);
    }
}
