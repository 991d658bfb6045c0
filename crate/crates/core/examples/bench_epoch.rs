use lindblad_learn::adjoint::LossKind;
use lindblad_learn::dataset::{generate_dataset, ExperimentPreset};
use lindblad_learn::train::evaluate_loss_grad;
use std::time::Instant;

fn main() {
    let preset = ExperimentPreset::spin32_t_dependent();
    let t0 = Instant::now();
    let ds = generate_dataset(&preset, 7).unwrap();
    println!("dataset: {:.2?}", t0.elapsed());
    let truth = ds.truth.clone().unwrap();
    let mut alphas = truth.alphas.clone();
    alphas[0] += 0.1;
    let t1 = Instant::now();
    let (loss, grad) = evaluate_loss_grad(&ds, &alphas, &truth.gammas, LossKind::Mse).unwrap();
    println!("epoch (loss+grad): {:.2?}  loss={loss:.3e} g0={:.3e}", t1.elapsed(), grad[0]);

    let chain = ExperimentPreset::chain_t_independent();
    let t2 = Instant::now();
    let cds = generate_dataset(&chain, 7).unwrap();
    println!("chain dataset: {:.2?}", t2.elapsed());
    let ct = cds.truth.clone().unwrap();
    let mut ca = ct.alphas.clone();
    ca[0] += 0.1;
    let t3 = Instant::now();
    let (closs, cgrad) = evaluate_loss_grad(&cds, &ca, &ct.gammas, LossKind::Mse).unwrap();
    println!("chain epoch: {:.2?}  loss={closs:.3e} g0={:.3e}", t3.elapsed(), cgrad[0]);
}
