//! Scratch harness: numeric η across observation windows for several
//! sampled models and both losses, to check which window the measure
//! actually favors.

use lindblad_learn::adjoint::LossKind;
use lindblad_learn::dataset::{generate_dataset_for, sample_ground_truth, ExperimentPreset, Family};
use lindblad_learn::efficiency::{eta_numeric, spin32_decoherence_time};

fn main() {
    let grid = [0.5, 1.0, 1.7, 3.3];
    let n_points = 15usize;
    for seed in [3u64, 5, 7, 11, 13, 17, 19, 23, 29, 31] {
        let truth = sample_ground_truth(Family::Spin32, seed);
        let t_dc = spin32_decoherence_time(&truth).unwrap();
        for kind in [LossKind::Mae, LossKind::Mse] {
            let mut etas = Vec::new();
            for label in grid {
                let window = label * t_dc;
                let mut preset = ExperimentPreset::spin32_t_dependent();
                preset.n_batches = 1;
                preset.n_times = n_points + 1;
                preset.t_end = window * (n_points + 1) as f64 / n_points as f64;
                preset.substeps_per_interval =
                    ((window / n_points as f64 * 50.0).ceil() as usize).clamp(10, 400);
                let ds = generate_dataset_for(&preset, &truth, 7).unwrap();
                let gammas: Vec<f64> = match kind {
                    LossKind::Mse => truth.gammas.iter().map(|g| g * 1.01).collect(),
                    LossKind::Mae => truth.gammas.clone(),
                };
                etas.push(eta_numeric(&ds, &truth.alphas, &gammas, kind).unwrap());
            }
            let argmax =
                (0..etas.len()).max_by(|&a, &b| etas[a].partial_cmp(&etas[b]).unwrap()).unwrap();
            println!(
                "seed={seed:2} t_dc={t_dc:7.2} {:?} argmax={} etas={:?}",
                kind, grid[argmax], etas
            );
        }
    }
}
