//! Scratch harness: convergence of the γ-only sweep trainings, to pick
//! the epoch budget and learning rate for the sweep scenarios.

use lindblad_learn::dataset::{sample_ground_truth, Family};
use lindblad_learn::efficiency::{run_sweep_point, spin32_decoherence_time, SweepConfig};
use lindblad_learn::train::OptimizerKind;

fn main() {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(23);
    let epochs: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(2000);
    let n_init: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(5);
    let lr: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.01);

    let truth = sample_ground_truth(Family::Spin32, seed);
    let t_dc = spin32_decoherence_time(&truth).unwrap();
    let mut cfg = SweepConfig::default_mse();
    cfg.epochs = epochs;
    cfg.n_init = n_init;
    cfg.optimizer = OptimizerKind::Adam { lr };
    println!("seed={seed} t_dc={t_dc:.2} epochs={epochs} n_init={n_init} lr={lr}");

    println!("-- window sweep, N = 15 --");
    for label in [0.5, 1.0, 1.7, 3.3] {
        let p = run_sweep_point(&truth, t_dc, label * t_dc, label, 15, &cfg).unwrap();
        let n_rec = p.e_gamma_mean.len();
        let quarter = p.e_gamma_mean[n_rec / 4];
        let half = p.e_gamma_mean[n_rec / 2];
        println!(
            "window={label:3} eta={:.4e} E_gamma q={quarter:.3} h={half:.3} final={:.3}±{:.3}",
            p.eta_numeric,
            p.final_e_gamma_mean(),
            p.e_gamma_std.last().unwrap()
        );
    }

    println!("-- count sweep, window = 1.7 t_dc --");
    for n in [10usize, 15, 25, 40] {
        let p = run_sweep_point(&truth, t_dc, 1.7 * t_dc, n as f64, n, &cfg).unwrap();
        let n_rec = p.e_gamma_mean.len();
        let half = p.e_gamma_mean[n_rec / 2];
        println!(
            "n={n:2} eta={:.4e} E_gamma h={half:.3} final={:.3}±{:.3}",
            p.eta_numeric,
            p.final_e_gamma_mean(),
            p.e_gamma_std.last().unwrap()
        );
    }
}
