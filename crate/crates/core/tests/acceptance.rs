//! End-to-end acceptance scenarios. Every test prints a single
//! `criterion NN (<name>): PASS|FAIL — <detail>` line before asserting, so
//! a full run (`cargo test --test acceptance -- --nocapture`) reads as a
//! checklist. The reconstruction and sweep scenarios run whole training
//! loops and take tens of minutes on one core.

use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lindblad_learn::adjoint::LossKind;
use lindblad_learn::dataset::{
    build_spin32_engine, generate_dataset, generate_dataset_for, sample_ground_truth,
    ExperimentPreset, Family, ObservableSet,
};
use lindblad_learn::efficiency::{
    find_optimal_window, sweep_data_points, sweep_observation_window, SweepConfig,
};
use lindblad_learn::engine::FlowEngine;
use lindblad_learn::integrate::{integrate, IntegrationPlan, Method};
use lindblad_learn::linalg::{
    c, dagger, eig_general, hermiticity_defect, max_abs, trace, CMat,
};
use lindblad_learn::model::{HamiltonianTerm, JumpChannel, LindbladModel};
use lindblad_learn::operators::{gauge_fix, Operator};
use lindblad_learn::spectral::{evolve_spectral, spectral_analysis};
use lindblad_learn::train::{
    evaluate_loss_grad, train, EarlyStop, LossKindConfig, OptimizerKind, TrainConfig, TrainReport,
};

// epoch budgets for the long-running reconstruction scenarios, chosen so
// each stays well inside its wall-clock limit on one desktop core
const SPIN32_TDEP_EPOCHS: usize = 1500;
const SPIN32_TINDEP_EPOCHS: usize = 4000;
const CHAIN_EPOCHS: usize = 400;
const AMBIGUITY_EPOCHS: usize = 300;
const WINDOW_SWEEP_EPOCHS: usize = 300;
const COUNT_SWEEP_EPOCHS: usize = 300;

fn report(number: usize, name: &str, pass: bool, detail: &str) {
    println!("criterion {number:2} ({name}): {} — {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {number} ({name}) failed: {detail}");
}

// ---------------------------------------------------------------------------
// 1. gradient oracle
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_adjoint_gradients_match_finite_differences() {
    let start = Instant::now();
    let mut preset = ExperimentPreset::spin32_t_independent();
    preset.n_batches = 1;
    preset.n_times = 8;
    preset.t_end = 6.0;
    preset.substeps_per_interval = 20;

    let mut worst = 0.0f64;
    for seed in 301..306u64 {
        let truth = sample_ground_truth(Family::Spin32, seed);
        let dataset = generate_dataset_for(&preset, &truth, seed).unwrap();
        // evaluate away from the truth so residuals are generic
        let alphas: Vec<f64> = truth.alphas.iter().map(|a| a * 1.15 + 0.07).collect();
        let gammas: Vec<f64> = truth.gammas.iter().map(|g| g * 1.2 + 0.003).collect();
        for kind in [LossKind::Mse, LossKind::Mae] {
            let (_, grad) = evaluate_loss_grad(&dataset, &alphas, &gammas, kind).unwrap();
            for j in 0..grad.len() {
                let eps = 1e-5;
                let mut ap = alphas.clone();
                let mut gp = gammas.clone();
                let mut am = alphas.clone();
                let mut gm = gammas.clone();
                if j < alphas.len() {
                    ap[j] += eps;
                    am[j] -= eps;
                } else {
                    gp[j - alphas.len()] += eps;
                    gm[j - alphas.len()] -= eps;
                }
                let (lp, _) = evaluate_loss_grad(&dataset, &ap, &gp, kind).unwrap();
                let (lm, _) = evaluate_loss_grad(&dataset, &am, &gm, kind).unwrap();
                let fd = (lp - lm) / (2.0 * eps);
                let err = if fd.abs() > 1e-8 {
                    (grad[j] - fd).abs() / fd.abs()
                } else if (grad[j] - fd).abs() <= 1e-8 {
                    0.0
                } else {
                    f64::INFINITY
                };
                worst = worst.max(err);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        "gradient oracle",
        worst <= 1e-4 && secs <= 60.0,
        &format!("max rel err {worst:.2e} over 5 models x 30 params x 2 losses in {secs:.1}s"),
    );
}

// ---------------------------------------------------------------------------
// 2. propagator oracle
// ---------------------------------------------------------------------------

#[test]
fn criterion_02_rk4_matches_spectral_propagation() {
    let truth = sample_ground_truth(Family::Spin32, 404);
    let engine =
        build_spin32_engine(&truth.alphas, &truth.gammas, None, ObservableSet::Spin32Sx);
    let abar =
        truth.alphas.iter().map(|a| a.abs()).sum::<f64>() / truth.alphas.len() as f64;
    let t_end = 20.0 / abar;
    let times: Vec<f64> = (1..=200).map(|n| t_end * n as f64 / 200.0).collect();
    let plan = IntegrationPlan {
        t_start: 0.0,
        t_end,
        observation_times: times.clone(),
        substeps_per_interval: 200,
        method: Method::Rk4,
    };
    let mut rho0: CMat = Array2::zeros((4, 4));
    rho0[[0, 0]] = c(0.5, 0.0);
    rho0[[1, 1]] = c(0.5, 0.0);
    rho0[[0, 1]] = c(0.3, 0.2);
    rho0[[1, 0]] = c(0.3, -0.2);

    let rk = integrate(|y, t| engine.rhs(y, t), &rho0, &plan).unwrap();
    let spectrum = spectral_analysis(&engine.liouvillian(0.0), 4).unwrap();
    let sp = evolve_spectral(&spectrum, &rho0, &times);
    let mut worst = 0.0f64;
    for (a, b) in rk.iter().zip(&sp) {
        worst = worst.max((engine.observe(0, a) - engine.observe(0, b)).abs());
    }
    report(
        2,
        "propagator oracle",
        worst <= 1e-8,
        &format!("max |<S_x>| deviation {worst:.2e} over 200 points, t_end = {t_end:.1}"),
    );
}

// ---------------------------------------------------------------------------
// 3. structure preservation
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_evolution_preserves_density_structure() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst_trace = 0.0f64;
    let mut worst_herm = 0.0f64;
    let mut worst_eig = f64::INFINITY;
    for _ in 0..10 {
        let alphas: Vec<f64> = (0..15).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let gammas: Vec<f64> = (0..15).map(|_| rng.gen_range(0.0..0.04)).collect();
        let psi: Vec<_> = (0..4)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let rho0 =
            Array2::from_shape_fn((4, 4), |(i, j)| psi[i] * psi[j].conj() / (norm * norm));
        let engine = build_spin32_engine(&alphas, &gammas, None, ObservableSet::Spin32Sx);
        let plan = IntegrationPlan::uniform(10.0, 8, 60, Method::Rk4);
        for state in integrate(|y, t| engine.rhs(y, t), &rho0, &plan).unwrap() {
            worst_trace = worst_trace.max((trace(&state).re - 1.0).abs());
            worst_trace = worst_trace.max(trace(&state).im.abs());
            worst_herm = worst_herm.max(hermiticity_defect(&state));
            let eig = eig_general(&state).unwrap();
            worst_eig = worst_eig
                .min(eig.eigenvalues.iter().map(|e| e.re).fold(f64::INFINITY, f64::min));
        }
    }
    report(
        3,
        "structure preservation",
        worst_trace <= 1e-10 && worst_herm <= 1e-10 && worst_eig >= -1e-6,
        &format!(
            "trace drift {worst_trace:.2e}, hermiticity {worst_herm:.2e}, min eigenvalue {worst_eig:.2e}"
        ),
    );
}

// ---------------------------------------------------------------------------
// 4/5. spin-3/2 reconstruction
// ---------------------------------------------------------------------------

fn best_init_errors(report: &TrainReport) -> (f64, f64) {
    let best = report.inits[report.best_init].best_record().unwrap();
    (best.e_alpha.unwrap_or(f64::NAN), best.e_gamma.unwrap_or(f64::NAN))
}

/// Multi-start reconstruction config: constant step (decaying it slows the
/// crawl along the ill-conditioned γ valley more than it reduces the
/// oscillation floor; the retained lowest-loss checkpoint rides out the
/// oscillation) with a coarse early stop to cut stuck initializations.
fn reconstruction_config(epochs: usize, n_init: usize) -> TrainConfig {
    let mut config = TrainConfig::default_adam(epochs, n_init, 42);
    config.early_stop = Some(EarlyStop { window: 300, rel_improvement: 0.01 });
    config
}

fn spin32_reconstruction(number: usize, name: &str, preset: ExperimentPreset, epochs: usize) {
    let start = Instant::now();
    let dataset = generate_dataset(&preset, 11).unwrap();
    let config = reconstruction_config(epochs, 3);
    let result = train(&dataset, &config).unwrap();
    let (e_alpha, e_gamma) = best_init_errors(&result);
    let mins = start.elapsed().as_secs_f64() / 60.0;
    report(
        number,
        name,
        e_alpha <= 0.02 && e_gamma <= 0.10 && mins <= 30.0,
        &format!(
            "best init: E_alpha {:.4} (<= 0.02), E_gamma {:.4} (<= 0.10), {} epochs x 3 inits in {mins:.1} min",
            e_alpha, e_gamma, epochs
        ),
    );
}

#[test]
fn criterion_04_spin32_reconstruction_with_probe() {
    spin32_reconstruction(
        4,
        "spin-3/2 reconstruction, t-dependent probe",
        ExperimentPreset::spin32_t_dependent(),
        SPIN32_TDEP_EPOCHS,
    );
}

#[test]
fn criterion_05_spin32_reconstruction_without_probe() {
    spin32_reconstruction(
        5,
        "spin-3/2 reconstruction, t-independent probe",
        ExperimentPreset::spin32_t_independent(),
        SPIN32_TINDEP_EPOCHS,
    );
}

// ---------------------------------------------------------------------------
// 6. chain reconstruction
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_chain_reconstruction() {
    let start = Instant::now();
    let dataset = generate_dataset(&ExperimentPreset::chain_t_independent(), 11).unwrap();
    let config = reconstruction_config(CHAIN_EPOCHS, 2);
    let result = train(&dataset, &config).unwrap();
    let (e_alpha, e_gamma) = best_init_errors(&result);
    let mins = start.elapsed().as_secs_f64() / 60.0;
    report(
        6,
        "chain reconstruction",
        e_alpha <= 0.02 && e_gamma <= 0.10 && mins <= 120.0,
        &format!(
            "best init: E_alpha {e_alpha:.4} (<= 0.02), E_gamma {e_gamma:.4} (<= 0.10), {CHAIN_EPOCHS} epochs x 2 inits in {mins:.1} min"
        ),
    );
}

// ---------------------------------------------------------------------------
// 7. closed-form optima
// ---------------------------------------------------------------------------

#[test]
fn criterion_07_closed_form_optimal_windows() {
    let start = Instant::now();
    let mae = find_optimal_window(LossKind::Mae);
    let mse = find_optimal_window(LossKind::Mse);
    let secs = start.elapsed().as_secs_f64();
    report(
        7,
        "closed-form optima",
        (1.74..=1.84).contains(&mae) && (1.65..=1.75).contains(&mse) && secs < 1.0,
        &format!("argmax MAE {mae:.4} in [1.74, 1.84], MSE {mse:.4} in [1.65, 1.75], {secs:.3}s"),
    );
}

// ---------------------------------------------------------------------------
// 8. observation-window ordering
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_optimal_window_wins_the_sweep() {
    let start = Instant::now();
    let truth = sample_ground_truth(Family::Spin32, 7);
    let cfg = SweepConfig {
        loss: LossKindConfig::Mse,
        optimizer: OptimizerKind::Adam { lr: 0.01 },
        epochs: WINDOW_SWEEP_EPOCHS,
        n_init: 10,
        seed: 7,
    };
    let grid = [0.5, 1.0, 1.7, 3.3];
    let result = sweep_observation_window(&truth, &grid, 15, &cfg).unwrap();
    let finals: Vec<f64> = result.points.iter().map(|p| p.final_e_gamma_mean()).collect();
    let etas: Vec<f64> = result.points.iter().map(|p| p.eta_numeric).collect();
    let best = 2; // index of 1.7 t_dc in the grid
    let lowest_error = (0..grid.len()).all(|i| i == best || finals[best] < finals[i]);
    let largest_eta = (0..grid.len()).all(|i| i == best || etas[best] > etas[i]);
    let mins = start.elapsed().as_secs_f64() / 60.0;
    report(
        8,
        "window-sweep ordering",
        lowest_error && largest_eta && mins <= 60.0,
        &format!(
            "final E_gamma {finals:?}, eta {etas:?} over t_N/t_dc {grid:?} in {mins:.1} min"
        ),
    );
}

// ---------------------------------------------------------------------------
// 9. data-count regimes
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_data_count_regimes() {
    let start = Instant::now();
    let truth = sample_ground_truth(Family::Spin32, 7);
    let cfg = SweepConfig {
        loss: LossKindConfig::Mse,
        optimizer: OptimizerKind::Adam { lr: 0.01 },
        epochs: COUNT_SWEEP_EPOCHS,
        n_init: 5,
        seed: 7,
    };
    let grid = [10usize, 15, 25, 40];
    let result = sweep_data_points(&truth, &grid, 1.7, &cfg).unwrap();
    let finals: Vec<f64> = result.points.iter().map(|p| p.final_e_gamma_mean()).collect();
    let underdetermined = finals[0] > 0.2;
    let determined = finals[1] < 0.1 && finals[2] < 0.1 && finals[3] < 0.1;
    let saturated = finals[3] <= 2.0 * finals[2] && finals[3] >= finals[2] / 2.0;
    let mins = start.elapsed().as_secs_f64() / 60.0;
    report(
        9,
        "data-count regimes",
        underdetermined && determined && saturated && mins <= 60.0,
        &format!("final E_gamma {finals:?} for N = {grid:?} in {mins:.1} min"),
    );
}

// ---------------------------------------------------------------------------
// 10. symmetry ambiguity
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_global_observables_hide_what_local_ones_reveal() {
    // smaller batches/grids than the reconstruction presets: the contrast
    // between the two observable sets is the point, not the precision
    let shrink = |mut p: ExperimentPreset| {
        p.n_batches = 4;
        p.n_times = 25;
        p.t_end = 2.5;
        p
    };
    let global = shrink(ExperimentPreset::chain_ambiguous_global());
    let local = shrink(ExperimentPreset::chain_ambiguous_local());

    let mut cfg = TrainConfig::default_adam(AMBIGUITY_EPOCHS, 1, 42);
    cfg.early_stop = None;

    let ds_global = generate_dataset(&global, 11).unwrap();
    let rep_global = train(&ds_global, &cfg).unwrap();
    let init = &rep_global.inits[0];
    let first = init.epochs.first().unwrap();
    let best = init.best_record().unwrap();
    let loss_drop = first.loss / best.loss;
    let e_gamma_kept = best.e_gamma.unwrap() / first.e_gamma.unwrap();

    let ds_local = generate_dataset(&local, 11).unwrap();
    let rep_local = train(&ds_local, &cfg).unwrap();
    let (_, e_gamma_local) = best_init_errors(&rep_local);

    report(
        10,
        "symmetry ambiguity",
        loss_drop >= 10.0 && e_gamma_kept > 0.5 && e_gamma_local <= 0.10,
        &format!(
            "global: loss drops {loss_drop:.1}x while E_gamma keeps {:.0}% of its initial value; local: E_gamma {e_gamma_local:.4}",
            e_gamma_kept * 100.0
        ),
    );
}

// ---------------------------------------------------------------------------
// 11. invariance suite
// ---------------------------------------------------------------------------

fn random_hermitian(rng: &mut impl Rng) -> CMat {
    let a = Array2::from_shape_fn((4, 4), |_| {
        c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    (&a + &dagger(&a)).mapv(|z| z * c(0.5, 0.0))
}

fn one_channel(h: CMat, j: CMat, gamma: f64) -> LindbladModel {
    LindbladModel {
        dim: 4,
        hamiltonian_terms: vec![HamiltonianTerm {
            alpha: -1.0,
            operator: Operator::dense("h", h),
        }],
        jump_channels: vec![JumpChannel { gamma, operator: Operator::dense("j", j) }],
        probe: None,
    }
}

#[test]
fn criterion_11_generator_invariances() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst_phase = 0.0f64;
    let mut worst_gauge = 0.0f64;
    for _ in 0..20 {
        let j = Array2::from_shape_fn((4, 4), |_| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let h = random_hermitian(&mut rng);
        let rho = random_hermitian(&mut rng);
        let gamma = rng.gen_range(1e-3..0.5);
        let base = one_channel(h.clone(), j.clone(), gamma);

        let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let phased = one_channel(h.clone(), j.mapv(|z| z * c(phi.cos(), phi.sin())), gamma);
        worst_phase = worst_phase.max(max_abs(
            &(&base.rhs(&rho, 0.0).unwrap() - &phased.rhs(&rho, 0.0).unwrap()),
        ));

        let j_scaled = j.mapv(|z| z * c(gamma.sqrt(), 0.0));
        let (j_gauge, h_gauge) = gauge_fix(&j_scaled, &h);
        let gauged = one_channel(h_gauge, j_gauge, 1.0);
        worst_gauge = worst_gauge.max(max_abs(
            &(&base.rhs(&rho, 0.0).unwrap() - &gauged.rhs(&rho, 0.0).unwrap()),
        ));
    }
    report(
        11,
        "generator invariances",
        worst_phase <= 1e-12 && worst_gauge <= 1e-12,
        &format!(
            "channel-phase deviation {worst_phase:.2e}, trace-gauge deviation {worst_gauge:.2e} over 20 random models"
        ),
    );
}
