//! Scratch harness: convergence trajectories for the reconstruction
//! presets, used to pick epoch budgets.

use lindblad_learn::dataset::{generate_dataset, ExperimentPreset};
use lindblad_learn::train::{train, EarlyStop, TrainConfig};
use std::time::Instant;

fn report(tag: &str, preset: ExperimentPreset, data_seed: u64, cfg: TrainConfig) {
    let ds = generate_dataset(&preset, data_seed).unwrap();
    let t0 = Instant::now();
    let rep = train(&ds, &cfg).unwrap();
    let dt = t0.elapsed();
    println!("== {tag}: {:.1?} total ==", dt);
    for init in &rep.inits {
        let n = init.epochs.len();
        let stride = (n / 12).max(1);
        for rec in init.epochs.iter().step_by(stride).chain(init.epochs.last()) {
            println!(
                "{tag} init={} epoch={:4} loss={:.3e} e_a={:.4} e_g={:.4}",
                init.init,
                rec.epoch,
                rec.loss,
                rec.e_alpha.unwrap_or(f64::NAN),
                rec.e_gamma.unwrap_or(f64::NAN)
            );
        }
    }
    if let (Some(ea), Some(eg)) = (rep.e_alpha_mean_std, rep.e_gamma_mean_std) {
        println!("{tag} FINAL e_alpha={:.4}±{:.4} e_gamma={:.4}±{:.4}", ea.0, ea.1, eg.0, eg.1);
    }
    let best = rep.best_init;
    let last = rep.inits[best].epochs.last().unwrap();
    println!(
        "{tag} BEST init={} epochs={} loss={:.3e} e_a={:.4} e_g={:.4}",
        best,
        rep.inits[best].epochs.len(),
        last.loss,
        last.e_alpha.unwrap_or(f64::NAN),
        last.e_gamma.unwrap_or(f64::NAN)
    );
}

fn main() {
    let mut args = std::env::args().skip(1);
    let which = args.next().unwrap_or_else(|| "spin32dep".into());
    let epochs: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    // lr_end: decay the step from 0.01 down to this value over the budget
    let lr_end: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.01);
    let decay_for = |n: usize| (lr_end / 0.01f64).powf(1.0 / n as f64);
    let coarse_stop = Some(EarlyStop { window: 300, rel_improvement: 0.01 });
    match which.as_str() {
        "spin32dep" => {
            let n = if epochs > 0 { epochs } else { 1500 };
            let mut cfg = TrainConfig::default_adam(n, 3, 42);
            cfg.early_stop = coarse_stop;
            cfg.lr_decay = decay_for(n);
            report("spin32dep", ExperimentPreset::spin32_t_dependent(), 11, cfg);
        }
        "spin32ind" => {
            let n = if epochs > 0 { epochs } else { 3000 };
            let mut cfg = TrainConfig::default_adam(n, 3, 42);
            cfg.early_stop = coarse_stop;
            cfg.lr_decay_from = n / 2;
            cfg.lr_decay = decay_for(n - n / 2);
            report("spin32ind", ExperimentPreset::spin32_t_independent(), 11, cfg);
        }
        "chain" => {
            // third arg doubles as the constant learning rate here
            let n = if epochs > 0 { epochs } else { 600 };
            let mut cfg = TrainConfig::default_adam(n, 2, 42);
            cfg.early_stop = coarse_stop;
            cfg.optimizer = lindblad_learn::train::OptimizerKind::Adam { lr: lr_end };
            let mut preset = ExperimentPreset::chain_t_independent();
            if let Ok(sub) = std::env::var("CHAIN_SUBSTEPS") {
                preset.substeps_per_interval = sub.parse().unwrap();
            }
            report("chain", preset, 11, cfg);
        }
        "ambiglocal" => {
            let n = if epochs > 0 { epochs } else { 2000 };
            let mut preset = ExperimentPreset::chain_ambiguous_local();
            preset.n_batches = 4;
            preset.n_times = 25;
            preset.t_end = 2.5;
            let mut cfg = TrainConfig::default_adam(n, 1, 42);
            cfg.early_stop = None;
            cfg.optimizer = lindblad_learn::train::OptimizerKind::Adam { lr: lr_end };
            report("ambig_local", preset, 11, cfg);
        }
        "ambiguity" => {
            let n = if epochs > 0 { epochs } else { 300 };
            for (tag, mut preset) in [
                ("ambig_global", ExperimentPreset::chain_ambiguous_global()),
                ("ambig_local", ExperimentPreset::chain_ambiguous_local()),
            ] {
                preset.n_batches = 4;
                preset.n_times = 25;
                preset.t_end = 2.5;
                let mut cfg = TrainConfig::default_adam(n, 1, 42);
                cfg.early_stop = None;
                report(tag, preset, 11, cfg);
            }
        }
        other => eprintln!("unknown preset {other}"),
    }
}
