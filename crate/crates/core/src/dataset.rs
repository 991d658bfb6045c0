//! Ground-truth sampling, probe construction, and observation datasets.
//!
//! Two model families are bundled:
//! * `spin32` — a single spin-3/2 (d = 4) with the 15 su(4) generators as
//!   both Hamiltonian terms and dissipation channels (15 + 15 parameters).
//! * `chain5` — a spin-1/2 chain of length 5 with one-body σ_μ^i and
//!   nearest-neighbour two-body σ_μ^i σ_ν^{i+1} terms (periodic), the
//!   same operator content in the channels (60 + 60 parameters).
//!
//! A dataset is a collection of batches; each batch has its own probe
//! drive (or initial state, for the time-independent protocol) and the
//! recorded observable expectations on the uniform grid
//! t_n = n·t_N/N_ts, n = 0 … N_ts−1.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{DirectEngine, FlowEngine, PauliEngine, PauliProbe};
use crate::integrate::{IntegrateError, IntegrationPlan, Method};
use crate::linalg::{c, CMat};
use crate::model::ProbeDrive;
use crate::operators::{spin_matrices, su4_generators, Operator};

pub const CHAIN_LEN: usize = 5;
/// Mean dissipation strengths defining the sampling ranges γ ∈ [0, 2γ̄].
pub const SPIN32_GAMMA_BAR: f64 = 0.02;
pub const CHAIN_GAMMA_BAR: f64 = 0.01;
pub const PROBE_AMPLITUDE: f64 = 2.0;
pub const PROBE_N_FREQS: usize = 10;
pub const SPIN32_FREQ_RANGE: f64 = 1.0;
pub const CHAIN_FREQ_RANGE: f64 = 2.0;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error("preset requires at least one observation time")]
    EmptyGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Spin32,
    Chain5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    /// Sinusoidal drive on the total-spin components, fresh frequencies
    /// per batch.
    TimeDependent,
    /// No drive; trajectories are diversified by the initial state.
    TimeIndependent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialStateKind {
    /// |3/2, 3/2⟩ — magnetized along S_z.
    Magnetized32,
    /// ⊗|↑⟩ on every chain site.
    AllUpChain,
    /// Haar-random pure state of the full Hilbert space.
    HaarPure,
    /// Independent Haar-random pure state per chain site.
    RandomProduct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableSet {
    /// ⟨S_x⟩ only (spin-3/2 tasks).
    Spin32Sx,
    /// Total ⟨S_x⟩, ⟨S_y⟩, ⟨S_z⟩ of the chain.
    ChainTotalSpins,
    /// Local ⟨σ_x^3⟩, ⟨σ_y^3⟩, ⟨σ_z^3⟩ on (1-based) site 3.
    ChainLocalSite3,
}

/// Named bundle of everything needed to generate a dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentPreset {
    pub name: String,
    pub family: Family,
    pub probe: ProbeKind,
    pub initial_state: InitialStateKind,
    pub observables: ObservableSet,
    /// Total duration t_N in units of 1/ᾱ.
    pub t_end: f64,
    /// N_bs.
    pub n_batches: usize,
    /// N_ts.
    pub n_times: usize,
    pub substeps_per_interval: usize,
    /// Standard deviation of additive Gaussian measurement noise (0 = off).
    pub noise_std: f64,
}

impl ExperimentPreset {
    /// Spin-3/2, t-dependent probe on a magnetized initial state.
    pub fn spin32_t_dependent() -> Self {
        ExperimentPreset {
            name: "spin32-t-dependent".into(),
            family: Family::Spin32,
            probe: ProbeKind::TimeDependent,
            initial_state: InitialStateKind::Magnetized32,
            observables: ObservableSet::Spin32Sx,
            t_end: 20.0,
            n_batches: 10,
            n_times: 100,
            substeps_per_interval: 10,
            noise_std: 0.0,
        }
    }

    /// Spin-3/2, undriven, random pure initial states.
    pub fn spin32_t_independent() -> Self {
        ExperimentPreset {
            name: "spin32-t-independent".into(),
            initial_state: InitialStateKind::HaarPure,
            probe: ProbeKind::TimeIndependent,
            ..Self::spin32_t_dependent()
        }
    }

    /// Chain, undriven, random product initial states, total-spin readout.
    pub fn chain_t_independent() -> Self {
        ExperimentPreset {
            name: "chain-t-independent".into(),
            family: Family::Chain5,
            probe: ProbeKind::TimeIndependent,
            initial_state: InitialStateKind::RandomProduct,
            observables: ObservableSet::ChainTotalSpins,
            t_end: 5.0,
            n_batches: 20,
            n_times: 50,
            substeps_per_interval: 5,
            noise_std: 0.0,
        }
    }

    /// Chain, t-dependent probe from the translation-invariant all-up
    /// state — global observables cannot resolve permutation-related
    /// parameters here.
    pub fn chain_ambiguous_global() -> Self {
        ExperimentPreset {
            name: "chain-ambiguous-global".into(),
            probe: ProbeKind::TimeDependent,
            initial_state: InitialStateKind::AllUpChain,
            // the driven chain is much stiffer than the free one: three
            // total-spin controls with amplitude 2 push the generator's
            // spectral radius to a few hundred, so RK4 needs h ≈ 0.004
            substeps_per_interval: 25,
            ..Self::chain_t_independent()
        }
    }

    /// Same protocol but reading out one site, which breaks the symmetry.
    pub fn chain_ambiguous_local() -> Self {
        ExperimentPreset {
            name: "chain-ambiguous-local".into(),
            observables: ObservableSet::ChainLocalSite3,
            ..Self::chain_ambiguous_global()
        }
    }

    /// The uniform observation grid t_n = n·t_N/N_ts, n = 0 … N_ts−1.
    pub fn time_grid(&self) -> Vec<f64> {
        (0..self.n_times).map(|n| self.t_end * n as f64 / self.n_times as f64).collect()
    }

    pub fn n_alpha(&self) -> usize {
        match self.family {
            Family::Spin32 => 15,
            Family::Chain5 => 12 * CHAIN_LEN,
        }
    }

    pub fn n_gamma(&self) -> usize {
        self.n_alpha()
    }

    pub fn gamma_bar(&self) -> f64 {
        match self.family {
            Family::Spin32 => SPIN32_GAMMA_BAR,
            Family::Chain5 => CHAIN_GAMMA_BAR,
        }
    }

    pub fn n_observables(&self) -> usize {
        match self.observables {
            ObservableSet::Spin32Sx => 1,
            _ => 3,
        }
    }
}

/// Ground-truth parameters of one sampled model.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GroundTruth {
    pub family: Family,
    pub alphas: Vec<f64>,
    pub gammas: Vec<f64>,
}

/// Draws a ground-truth model: spin32 has α ∈ [−1, 1], γ ∈ [0, 2γ̄] with
/// γ̄ = 0.02; chain5 has α ∈ [0, 1], γ ∈ [0, 0.02].
pub fn sample_ground_truth(family: Family, seed: u64) -> GroundTruth {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // stream 0 is reserved for the ground truth; batches use 1.. so the
    // same master seed never reuses random numbers
    rng.set_stream(0);
    match family {
        Family::Spin32 => GroundTruth {
            family,
            alphas: (0..15).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            gammas: (0..15).map(|_| rng.gen_range(0.0..2.0 * SPIN32_GAMMA_BAR)).collect(),
        },
        Family::Chain5 => GroundTruth {
            family,
            alphas: (0..12 * CHAIN_LEN).map(|_| rng.gen_range(0.0..1.0)).collect(),
            gammas: (0..12 * CHAIN_LEN)
                .map(|_| rng.gen_range(0.0..2.0 * CHAIN_GAMMA_BAR))
                .collect(),
        },
    }
}

/// One batch's probe: a frequency list per control component (x, y, z).
pub fn sample_probe_frequencies(family: Family, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let range = match family {
        Family::Spin32 => SPIN32_FREQ_RANGE,
        Family::Chain5 => CHAIN_FREQ_RANGE,
    };
    (0..3).map(|_| (0..PROBE_N_FREQS).map(|_| rng.gen_range(-range..range)).collect()).collect()
}

/// A concrete initial state, carrying the sampled data so a stored batch
/// reconstructs bit-identically.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InitialState {
    Magnetized32,
    AllUpChain,
    HaarPure { amplitudes: Vec<(f64, f64)> },
    RandomProduct { bloch: Vec<[f64; 3]> },
}

fn standard_normal(rng: &mut impl Rng) -> f64 {
    // Box-Muller
    let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let v: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    (-2.0 * u.ln()).sqrt() * v.cos()
}

pub fn sample_initial_state(
    kind: InitialStateKind,
    dim: usize,
    chain_len: usize,
    rng: &mut impl Rng,
) -> InitialState {
    match kind {
        InitialStateKind::Magnetized32 => InitialState::Magnetized32,
        InitialStateKind::AllUpChain => InitialState::AllUpChain,
        InitialStateKind::HaarPure => {
            let mut amps: Vec<(f64, f64)> =
                (0..dim).map(|_| (standard_normal(rng), standard_normal(rng))).collect();
            let norm: f64 = amps.iter().map(|(re, im)| re * re + im * im).sum::<f64>().sqrt();
            for a in &mut amps {
                a.0 /= norm;
                a.1 /= norm;
            }
            InitialState::HaarPure { amplitudes: amps }
        }
        InitialStateKind::RandomProduct => {
            let bloch = (0..chain_len)
                .map(|_| {
                    let z: f64 = rng.gen_range(-1.0..1.0);
                    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                    let s = (1.0 - z * z).sqrt();
                    [s * phi.cos(), s * phi.sin(), z]
                })
                .collect();
            InitialState::RandomProduct { bloch }
        }
    }
}

impl InitialState {
    /// Density matrix of the state (dense form).
    pub fn density_matrix(&self, dim: usize) -> CMat {
        match self {
            InitialState::Magnetized32 => {
                let mut rho: CMat = Array2::zeros((dim, dim));
                rho[[0, 0]] = c(1.0, 0.0);
                rho
            }
            InitialState::AllUpChain => {
                let mut rho: CMat = Array2::zeros((dim, dim));
                rho[[0, 0]] = c(1.0, 0.0);
                rho
            }
            InitialState::HaarPure { amplitudes } => {
                let psi: Vec<_> = amplitudes.iter().map(|&(re, im)| c(re, im)).collect();
                Array2::from_shape_fn((dim, dim), |(i, j)| psi[i] * psi[j].conj())
            }
            InitialState::RandomProduct { bloch } => {
                let mut rho: CMat = Array2::from_elem((1, 1), c(1.0, 0.0));
                for n in bloch {
                    let site = Array2::from_shape_vec(
                        (2, 2),
                        vec![
                            c(0.5 * (1.0 + n[2]), 0.0),
                            c(0.5 * n[0], -0.5 * n[1]),
                            c(0.5 * n[0], 0.5 * n[1]),
                            c(0.5 * (1.0 - n[2]), 0.0),
                        ],
                    )
                    .unwrap();
                    rho = crate::linalg::kron(&rho, &site);
                }
                rho
            }
        }
    }

    /// Per-site Bloch vectors for chain states.
    pub fn bloch_vectors(&self, chain_len: usize) -> Option<Vec<[f64; 3]>> {
        match self {
            InitialState::AllUpChain => Some(vec![[0.0, 0.0, 1.0]; chain_len]),
            InitialState::RandomProduct { bloch } => Some(bloch.clone()),
            _ => None,
        }
    }
}

/// One forward experiment: probe configuration, initial state, and the
/// recorded observable table (n_times × n_observables).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Batch {
    pub probe_frequencies: Option<Vec<Vec<f64>>>,
    pub initial_state: InitialState,
    pub times: Vec<f64>,
    pub observable_labels: Vec<String>,
    /// Row n = time t_n, column o = observable o; row-major.
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    pub preset: ExperimentPreset,
    pub seed: u64,
    pub truth: Option<GroundTruth>,
    pub batches: Vec<Batch>,
}

pub fn observable_labels(set: ObservableSet) -> Vec<String> {
    match set {
        ObservableSet::Spin32Sx => vec!["Sx".into()],
        ObservableSet::ChainTotalSpins => vec!["Sx".into(), "Sy".into(), "Sz".into()],
        ObservableSet::ChainLocalSite3 => {
            vec!["sx^3".into(), "sy^3".into(), "sz^3".into()]
        }
    }
}

// ---------------------------------------------------------------------------
// engine builders
// ---------------------------------------------------------------------------

/// Spin-3/2 engine for given parameters and (optional) per-control probe
/// frequencies.
pub fn build_spin32_engine(
    alphas: &[f64],
    gammas: &[f64],
    probe_frequencies: Option<&[Vec<f64>]>,
    observables: ObservableSet,
) -> DirectEngine {
    let gens = su4_generators();
    let [sx, sy, sz] = spin_matrices(3);
    let probe = probe_frequencies.map(|freqs| ProbeDrive {
        amplitude: PROBE_AMPLITUDE,
        controls: [sx.clone(), sy.clone(), sz.clone()]
            .into_iter()
            .zip(freqs.iter().cloned())
            .map(|(op, f)| (Operator::dense("spin", op), f))
            .collect(),
    });
    let obs: Vec<CMat> = match observables {
        ObservableSet::Spin32Sx => vec![sx.clone()],
        _ => panic!("observable set not defined for the spin-3/2 family"),
    };
    DirectEngine::new(4, &gens.operators, &gens.operators, probe.as_ref(), &obs, alphas, gammas)
}

/// All Pauli strings of the chain Hamiltonian/channel content, in
/// parameter order: one-body site-major then μ, then two-body bond-major
/// then (μ, ν) row-major, with the periodic wrap bond last.
pub fn chain_strings(len: usize) -> Vec<Vec<u8>> {
    let mut strings = Vec::with_capacity(12 * len);
    for site in 0..len {
        for mu in 1..=3u8 {
            let mut s = vec![0u8; len];
            s[site] = mu;
            strings.push(s);
        }
    }
    for site in 0..len {
        let next = (site + 1) % len;
        for mu in 1..=3u8 {
            for nu in 1..=3u8 {
                let mut s = vec![0u8; len];
                s[site] = mu;
                s[next] = nu;
                strings.push(s);
            }
        }
    }
    strings
}

fn total_spin_strings(len: usize, mu: u8) -> Vec<(Vec<u8>, f64)> {
    (0..len)
        .map(|site| {
            let mut s = vec![0u8; len];
            s[site] = mu;
            (s, 1.0)
        })
        .collect()
}

/// Chain engine for given parameters, probe frequencies, and readout set.
pub fn build_chain_engine(
    len: usize,
    alphas: &[f64],
    gammas: &[f64],
    probe_frequencies: Option<&[Vec<f64>]>,
    observables: ObservableSet,
) -> PauliEngine {
    let strings = chain_strings(len);
    let probe = probe_frequencies.map(|freqs| PauliProbe {
        amplitude: PROBE_AMPLITUDE,
        controls: (1..=3u8)
            .zip(freqs.iter().cloned())
            .map(|(mu, f)| (total_spin_strings(len, mu), f))
            .collect(),
    });
    let obs: Vec<Vec<(Vec<u8>, f64)>> = match observables {
        ObservableSet::ChainTotalSpins => {
            (1..=3u8).map(|mu| total_spin_strings(len, mu)).collect()
        }
        ObservableSet::ChainLocalSite3 => (1..=3u8)
            .map(|mu| {
                let mut s = vec![0u8; len];
                // 1-based site 3
                s[2] = mu;
                vec![(s, 1.0)]
            })
            .collect(),
        ObservableSet::Spin32Sx => panic!("observable set not defined for the chain family"),
    };
    PauliEngine::new(len, &strings, &strings, probe.as_ref(), &obs, alphas, gammas)
}

// ---------------------------------------------------------------------------
// dataset generation
// ---------------------------------------------------------------------------

fn batch_rng(seed: u64, batch_idx: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch_idx as u64 + 1);
    rng
}

/// Forward-solves one configured engine and returns the observable table
/// on the preset grid (row 0 is t = 0).
fn record_observables<E: FlowEngine>(
    engine: &E,
    y0: &E::State,
    preset: &ExperimentPreset,
) -> Result<Vec<Vec<f64>>, DatasetError> {
    if preset.n_times == 0 {
        return Err(DatasetError::EmptyGrid);
    }
    let n_obs = engine.n_observables();
    let mut values = Vec::with_capacity(preset.n_times);
    values.push((0..n_obs).map(|o| engine.observe(o, y0)).collect());
    if preset.n_times > 1 {
        let times: Vec<f64> = preset.time_grid().into_iter().skip(1).collect();
        let plan = IntegrationPlan {
            t_start: 0.0,
            t_end: preset.t_end,
            observation_times: times,
            substeps_per_interval: preset.substeps_per_interval,
            method: Method::Rk4,
        };
        let states = crate::integrate::integrate(|y, t| engine.rhs(y, t), y0, &plan)?;
        for y in &states {
            values.push((0..n_obs).map(|o| engine.observe(o, y)).collect());
        }
    }
    Ok(values)
}

/// Generates the full dataset for `preset`: samples a ground truth from
/// the seed, then one probe/initial-state draw per batch. The RNG is
/// split per batch from the master seed, so batch b is identical no
/// matter how many batches are generated.
pub fn generate_dataset(preset: &ExperimentPreset, seed: u64) -> Result<Dataset, DatasetError> {
    let truth = sample_ground_truth(preset.family, seed);
    generate_dataset_for(preset, &truth, seed)
}

/// Same, but for an explicitly supplied ground truth.
pub fn generate_dataset_for(
    preset: &ExperimentPreset,
    truth: &GroundTruth,
    seed: u64,
) -> Result<Dataset, DatasetError> {
    let labels = observable_labels(preset.observables);
    let times = preset.time_grid();
    let mut batches = Vec::with_capacity(preset.n_batches);
    for b in 0..preset.n_batches {
        let mut rng = batch_rng(seed, b);
        let probe_frequencies = match preset.probe {
            ProbeKind::TimeDependent => Some(sample_probe_frequencies(preset.family, &mut rng)),
            ProbeKind::TimeIndependent => None,
        };
        let dim = match preset.family {
            Family::Spin32 => 4,
            Family::Chain5 => 1 << CHAIN_LEN,
        };
        let initial_state =
            sample_initial_state(preset.initial_state, dim, CHAIN_LEN, &mut rng);

        let mut values = match preset.family {
            Family::Spin32 => {
                let engine = build_spin32_engine(
                    &truth.alphas,
                    &truth.gammas,
                    probe_frequencies.as_deref(),
                    preset.observables,
                );
                let y0 = initial_state.density_matrix(4);
                record_observables(&engine, &y0, preset)?
            }
            Family::Chain5 => {
                let engine = build_chain_engine(
                    CHAIN_LEN,
                    &truth.alphas,
                    &truth.gammas,
                    probe_frequencies.as_deref(),
                    preset.observables,
                );
                let y0 = match initial_state.bloch_vectors(CHAIN_LEN) {
                    Some(bloch) => engine.encode_product(&bloch),
                    None => engine.encode_dense(&initial_state.density_matrix(1 << CHAIN_LEN)),
                };
                record_observables(&engine, &y0, preset)?
            }
        };
        if preset.noise_std > 0.0 {
            for row in &mut values {
                for v in row {
                    *v += preset.noise_std * standard_normal(&mut rng);
                }
            }
        }
        batches.push(Batch {
            probe_frequencies,
            initial_state,
            times: times.clone(),
            observable_labels: labels.clone(),
            values,
        });
    }
    Ok(Dataset {
        preset: preset.clone(),
        seed,
        truth: Some(truth.clone()),
        batches,
    })
}

impl Dataset {
    /// Target table of one batch as an array (n_times × n_observables).
    pub fn targets(&self, batch: usize) -> Array2<f64> {
        let b = &self.batches[batch];
        let n_obs = b.observable_labels.len();
        Array2::from_shape_fn((b.times.len(), n_obs), |(n, o)| b.values[n][o])
    }

    /// Flat tabular export: one `batch,time,observable,value` row per
    /// scalar data point.
    pub fn to_table(&self) -> String {
        let mut out = String::from("batch,time,observable,value\n");
        for (bi, b) in self.batches.iter().enumerate() {
            for (n, &t) in b.times.iter().enumerate() {
                for (o, label) in b.observable_labels.iter().enumerate() {
                    out.push_str(&format!("{bi},{t:.17e},{label},{:.17e}\n", b.values[n][o]));
                }
            }
        }
        out
    }

    pub fn n_points(&self) -> usize {
        self.batches.iter().map(|b| b.values.len() * b.observable_labels.len()).sum()
    }
}
