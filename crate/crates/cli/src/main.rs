//! Command-line front end: dataset generation, training, spectral
//! analysis, efficiency sweeps, and one-command reproduction presets.
//!
//! Every run writes its artifacts into a deterministic subdirectory of
//! the output root (`--out`, `$LINDBLAD_LEARN_OUT`, or `./runs`) together
//! with a `manifest.json` capturing the fully resolved configuration,
//! all seeds, and a version stamp. Failed runs leave their partial
//! artifacts in place next to a `FAILED.txt` marker.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical/runtime failure.

mod svg;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array2;
use serde::Serialize;
use serde_json::{json, Value};

use lindblad_learn::adjoint::LossKind;
use lindblad_learn::dataset::{
    generate_dataset, sample_ground_truth, Dataset, ExperimentPreset, Family, GroundTruth,
};
use lindblad_learn::efficiency::{
    eta_closed_form, find_optimal_window, run_sweep_point, spin32_decoherence_time,
    sweep_data_points, sweep_observation_window, truth_chi_samples, EfficiencyReport,
    SweepConfig, SweepPoint,
};
use lindblad_learn::linalg::c;
use lindblad_learn::model::{JumpChannel, LindbladModel};
use lindblad_learn::operators::Operator;
use lindblad_learn::spectral::spectral_analysis;
use lindblad_learn::train::{
    train, LossKindConfig, OptimizerKind, TrainConfig, TrainReport,
};
use svg::{Plot, Series};

// ---------------------------------------------------------------------------
// argument surface
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "lindblad-learn",
    version,
    about = "Simulate Lindblad dynamics, learn Liouvillian parameters, analyze data efficiency"
)]
struct Cli {
    /// Output root directory (default: $LINDBLAD_LEARN_OUT or ./runs).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for independent sub-runs (sweep grid points,
    /// reproduction variants). 1 = fully sequential.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a ground-truth model (Hamiltonian coefficients and rates).
    GenModel {
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Generate an observation dataset from a preset.
    GenDataset {
        #[arg(long, value_enum)]
        preset: PresetArg,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// JSON file overriding preset fields one by one.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Reconstruct model parameters from a generated dataset.
    Train {
        #[arg(long, value_enum)]
        preset: PresetArg,
        /// Dataset seed (ground truth + batches).
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Liouvillian spectrum: eigenvalues, spectral gap, decoherence time.
    /// Without --family this analyzes the qubit-dephasing demo model.
    Spectrum {
        /// Dephasing rate of the demo model.
        #[arg(long, default_value_t = 0.25)]
        gamma: f64,
        /// Analyze a sampled model of this family instead of the demo.
        #[arg(long, value_enum)]
        family: Option<FamilyArg>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Data-acquisition efficiency: closed forms, susceptibility, sweeps.
    Efficiency {
        #[command(subcommand)]
        action: EfficiencyCmd,
    },
    /// One-command reproduction presets for the main experiments.
    Reproduce {
        #[command(subcommand)]
        task: ReproduceTask,
    },
}

#[derive(Args, Clone)]
struct TrainArgs {
    #[arg(long, value_enum, default_value_t = LossArg::Mse)]
    loss: LossArg,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    /// Use plain gradient descent instead of Adam.
    #[arg(long)]
    gd: bool,
    #[arg(long, default_value_t = 1500)]
    epochs: usize,
    #[arg(long, default_value_t = 3)]
    n_init: usize,
    /// Seed of the initialization draws (independent of the data seed).
    #[arg(long, default_value_t = 42)]
    train_seed: u64,
    /// Pin the Hamiltonian coefficients at the truth; learn rates only.
    #[arg(long)]
    freeze_alpha: bool,
    /// Disable the stagnation-based early stop.
    #[arg(long)]
    no_early_stop: bool,
    /// Per-epoch multiplicative learning-rate factor (1.0 = constant).
    #[arg(long, default_value_t = 1.0)]
    lr_decay: f64,
    /// First epoch at which the learning-rate decay applies.
    #[arg(long, default_value_t = 0)]
    lr_decay_from: usize,
}

#[derive(Subcommand)]
enum EfficiencyCmd {
    /// Closed-form η(t_N) curves and their maximizing windows.
    ClosedForm,
    /// Susceptibility χ(t) of a sampled undriven spin-3/2 model.
    Chi {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Largest sampled time in units of t_dc.
        #[arg(long, default_value_t = 3.0)]
        t_max: f64,
        #[arg(long, default_value_t = 120)]
        samples: usize,
    },
    /// Sweep the observation window t_N at fixed data count.
    SweepWindow {
        /// Grid of t_N in units of t_dc.
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 1.7, 3.3])]
        grid: Vec<f64>,
        #[arg(long, default_value_t = 15)]
        n_points: usize,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Sweep the data count N at a fixed observation window.
    SweepCount {
        #[arg(long, value_delimiter = ',', default_values_t = [10, 15, 25, 40])]
        grid: Vec<usize>,
        /// Observation window in units of t_dc.
        #[arg(long, default_value_t = 1.7)]
        window: f64,
        #[command(flatten)]
        sweep: SweepArgs,
    },
}

#[derive(Args, Clone)]
struct SweepArgs {
    #[arg(long, value_enum, default_value_t = LossArg::Mse)]
    loss: LossArg,
    #[arg(long, default_value_t = 300)]
    epochs: usize,
    #[arg(long, default_value_t = 10)]
    n_init: usize,
    /// Dataset seed; initialization seeds derive from it.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
}

#[derive(Subcommand)]
enum ReproduceTask {
    /// Spin-3/2 reconstruction with the time-dependent probe.
    ProbeTdep(ReproduceArgs),
    /// Spin-3/2 reconstruction with the time-independent probe.
    ProbeTindep(ReproduceArgs),
    /// Five-site chain reconstruction (time-independent probe).
    Chain(ReproduceArgs),
    /// Symmetry-ambiguity study: chain with a translation-invariant
    /// initial state, global vs local observables.
    Ambiguity(ReproduceArgs),
    /// Observation-window and data-count sweeps plus closed-form optima.
    Sweeps {
        #[arg(long, value_enum, default_value_t = LossArg::Mse)]
        kind: LossArg,
        #[command(flatten)]
        common: ReproduceArgs,
    },
}

#[derive(Args, Clone)]
struct ReproduceArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Override the task's default epoch budget.
    #[arg(long)]
    epochs: Option<usize>,
    /// Override the task's default number of initializations.
    #[arg(long)]
    n_init: Option<usize>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    Spin32,
    Chain5,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum LossArg {
    Mse,
    Mae,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum PresetArg {
    /// Spin-3/2, time-dependent probe, magnetized initial state.
    Spin32Tdep,
    /// Spin-3/2, time-independent probe, Haar-random initial states.
    Spin32Tindep,
    /// Five-site chain, time-independent probe, product initial states.
    Chain,
    /// Chain, time-dependent probe, all-up state, global observables.
    ChainAmbiguousGlobal,
    /// Chain, time-dependent probe, all-up state, site-3 observables.
    ChainAmbiguousLocal,
}

impl FamilyArg {
    fn family(self) -> Family {
        match self {
            FamilyArg::Spin32 => Family::Spin32,
            FamilyArg::Chain5 => Family::Chain5,
        }
    }
    fn name(self) -> &'static str {
        match self {
            FamilyArg::Spin32 => "spin32",
            FamilyArg::Chain5 => "chain5",
        }
    }
}

impl LossArg {
    fn config(self) -> LossKindConfig {
        match self {
            LossArg::Mse => LossKindConfig::Mse,
            LossArg::Mae => LossKindConfig::Mae,
        }
    }
    fn name(self) -> &'static str {
        match self {
            LossArg::Mse => "mse",
            LossArg::Mae => "mae",
        }
    }
}

impl PresetArg {
    fn preset(self) -> ExperimentPreset {
        match self {
            PresetArg::Spin32Tdep => ExperimentPreset::spin32_t_dependent(),
            PresetArg::Spin32Tindep => ExperimentPreset::spin32_t_independent(),
            PresetArg::Chain => ExperimentPreset::chain_t_independent(),
            PresetArg::ChainAmbiguousGlobal => ExperimentPreset::chain_ambiguous_global(),
            PresetArg::ChainAmbiguousLocal => ExperimentPreset::chain_ambiguous_local(),
        }
    }
    fn name(self) -> &'static str {
        match self {
            PresetArg::Spin32Tdep => "spin32-tdep",
            PresetArg::Spin32Tindep => "spin32-tindep",
            PresetArg::Chain => "chain",
            PresetArg::ChainAmbiguousGlobal => "chain-ambiguous-global",
            PresetArg::ChainAmbiguousLocal => "chain-ambiguous-local",
        }
    }
}

// ---------------------------------------------------------------------------
// run directories and manifests
// ---------------------------------------------------------------------------

/// A usage problem (bad flags, malformed config file): exit code 1.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}
impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

struct RunDir {
    path: PathBuf,
    artifacts: Vec<String>,
}

impl RunDir {
    fn create(root: &Path, slug: &str) -> Result<Self> {
        let path = root.join(slug);
        std::fs::create_dir_all(&path)
            .with_context(|| format!("cannot create {}", path.display()))?;
        // clear a stale failure marker from a previous attempt
        let _ = std::fs::remove_file(path.join("FAILED.txt"));
        Ok(RunDir { path, artifacts: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        std::fs::write(self.path.join(name), contents)
            .with_context(|| format!("cannot write {name}"))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn finish(&mut self, command: &str, seeds: Value, config: Value, threads: usize) -> Result<()> {
        let manifest = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "threads": threads,
            "seeds": seeds,
            "config": config,
            "artifacts": self.artifacts,
        });
        std::fs::write(
            self.path.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)? + "\n",
        )?;
        println!("artifacts in {}", self.path.display());
        Ok(())
    }

    fn mark_failed(&self, err: &anyhow::Error) {
        let _ = std::fs::write(
            self.path.join("FAILED.txt"),
            format!("run failed; partial artifacts above this marker are incomplete\n{err:#}\n"),
        );
    }
}

fn output_root(cli_out: &Option<PathBuf>) -> PathBuf {
    cli_out
        .clone()
        .or_else(|| std::env::var_os("LINDBLAD_LEARN_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

/// Field-by-field preset override from a JSON object file.
fn apply_config_overrides(preset: &mut ExperimentPreset, path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    let overrides: Value = serde_json::from_str(&text)
        .map_err(|e| usage(format!("config {} is not valid JSON: {e}", path.display())))?;
    let Value::Object(map) = overrides else {
        return Err(usage("config file must contain a JSON object"));
    };
    let mut base = serde_json::to_value(&*preset)?;
    let known = base.as_object().unwrap().keys().cloned().collect::<Vec<_>>();
    for (k, v) in map {
        if !known.contains(&k) {
            return Err(usage(format!("unknown preset field `{k}` (known: {known:?})")));
        }
        base[&k] = v;
    }
    *preset = serde_json::from_value(base)
        .map_err(|e| usage(format!("config override does not fit the preset schema: {e}")))?;
    Ok(())
}

/// Maps a closure over items on up to `threads` workers; results keep
/// the input order regardless of scheduling.
fn par_map<T, U, F>(threads: usize, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync,
{
    let workers = threads.max(1).min(items.len().max(1));
    if workers <= 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<U>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let out = f(&items[i]);
                *slots[i].lock().unwrap() = Some(out);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().unwrap().unwrap()).collect()
}

// ---------------------------------------------------------------------------
// entry point
// ---------------------------------------------------------------------------

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are not errors
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    std::process::exit(run(cli));
}

fn run(cli: Cli) -> i32 {
    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return 1;
    }
    let root = output_root(&cli.out);
    match dispatch(&cli, &root) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                1
            } else {
                2
            }
        }
    }
}

fn dispatch(cli: &Cli, root: &Path) -> Result<()> {
    match &cli.command {
        Command::GenModel { family, seed } => cmd_gen_model(root, *family, *seed, cli.threads),
        Command::GenDataset { preset, seed, config } => {
            cmd_gen_dataset(root, *preset, *seed, config.as_deref(), cli.threads)
        }
        Command::Train { preset, seed, config, train } => {
            cmd_train(root, *preset, *seed, config.as_deref(), train, cli.threads)
        }
        Command::Spectrum { gamma, family, seed } => {
            cmd_spectrum(root, *gamma, *family, *seed, cli.threads)
        }
        Command::Efficiency { action } => cmd_efficiency(root, action, cli.threads),
        Command::Reproduce { task } => cmd_reproduce(root, task, cli.threads),
    }
}

/// Runs `body` inside `slug`'s run directory; on failure the partial
/// artifacts stay on disk next to a `FAILED.txt` marker.
fn with_run_dir(
    root: &Path,
    slug: &str,
    body: impl FnOnce(&mut RunDir) -> Result<()>,
) -> Result<()> {
    let mut dir = RunDir::create(root, slug)?;
    match body(&mut dir) {
        Ok(()) => Ok(()),
        Err(e) => {
            if e.downcast_ref::<UsageError>().is_none() {
                dir.mark_failed(&e);
            }
            Err(e)
        }
    }
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

fn cmd_gen_model(root: &Path, family: FamilyArg, seed: u64, threads: usize) -> Result<()> {
    with_run_dir(root, &format!("gen-model-{}-seed{seed}", family.name()), |dir| {
        let truth = sample_ground_truth(family.family(), seed);
        dir.write("model.json", &(serde_json::to_string_pretty(&truth)? + "\n"))?;
        println!(
            "{}: {} Hamiltonian coefficients, {} rates (mean rate {:.4})",
            family.name(),
            truth.alphas.len(),
            truth.gammas.len(),
            truth.gammas.iter().sum::<f64>() / truth.gammas.len() as f64
        );
        dir.finish(
            "gen-model",
            json!({ "model_seed": seed }),
            json!({ "family": family.name() }),
            threads,
        )
    })
}

fn resolve_preset(preset: PresetArg, config: Option<&Path>) -> Result<ExperimentPreset> {
    let mut p = preset.preset();
    if let Some(path) = config {
        apply_config_overrides(&mut p, path)?;
    }
    Ok(p)
}

fn cmd_gen_dataset(
    root: &Path,
    preset: PresetArg,
    seed: u64,
    config: Option<&Path>,
    threads: usize,
) -> Result<()> {
    let resolved = resolve_preset(preset, config)?;
    with_run_dir(root, &format!("gen-dataset-{}-seed{seed}", preset.name()), |dir| {
        let dataset = generate_dataset(&resolved, seed)?;
        dir.write("dataset.csv", &dataset.to_table())?;
        dir.write("dataset.json", &(serde_json::to_string_pretty(&dataset)? + "\n"))?;
        println!(
            "{}: {} batches x {} times, {} scalar observations",
            resolved.name,
            dataset.batches.len(),
            resolved.n_times,
            dataset.n_points()
        );
        dir.finish(
            "gen-dataset",
            json!({ "dataset_seed": seed }),
            serde_json::to_value(&resolved)?,
            threads,
        )
    })
}

fn train_config_from_args(args: &TrainArgs) -> TrainConfig {
    let mut cfg = TrainConfig::default_adam(args.epochs, args.n_init, args.train_seed);
    cfg.loss = args.loss.config();
    cfg.optimizer = if args.gd {
        OptimizerKind::Gd { lr: args.lr }
    } else {
        OptimizerKind::Adam { lr: args.lr }
    };
    cfg.freeze_alpha = args.freeze_alpha;
    if args.no_early_stop {
        cfg.early_stop = None;
    }
    cfg.lr_decay = args.lr_decay;
    cfg.lr_decay_from = args.lr_decay_from;
    cfg
}

/// Loss and error plots shared by `train` and the reproduction tasks.
fn write_train_artifacts(
    dir: &mut RunDir,
    tag: &str,
    dataset: &Dataset,
    report: &TrainReport,
) -> Result<()> {
    dir.write(&format!("{tag}training_log.csv"), &report.to_table())?;
    dir.write(&format!("{tag}report.json"), &(serde_json::to_string_pretty(report)? + "\n"))?;

    let loss_series: Vec<Series> = report
        .inits
        .iter()
        .map(|init| Series {
            label: format!("init {}", init.init),
            points: init.epochs.iter().map(|r| (r.epoch as f64, r.loss)).collect(),
        })
        .collect();
    dir.write(
        &format!("{tag}loss.svg"),
        &Plot {
            title: format!("{} training loss", dataset.preset.name),
            x_label: "epoch".into(),
            y_label: "loss (log10)".into(),
            log_y: true,
            series: loss_series,
        }
        .render(),
    )?;

    let mut err_series = Vec::new();
    for init in &report.inits {
        let alphas: Vec<(f64, f64)> = init
            .epochs
            .iter()
            .filter_map(|r| r.e_alpha.map(|e| (r.epoch as f64, e)))
            .collect();
        if !alphas.is_empty() {
            err_series.push(Series { label: format!("E_alpha init {}", init.init), points: alphas });
        }
        let gammas: Vec<(f64, f64)> = init
            .epochs
            .iter()
            .filter_map(|r| r.e_gamma.map(|e| (r.epoch as f64, e)))
            .collect();
        if !gammas.is_empty() {
            err_series.push(Series { label: format!("E_gamma init {}", init.init), points: gammas });
        }
    }
    if !err_series.is_empty() {
        dir.write(
            &format!("{tag}errors.svg"),
            &Plot {
                title: format!("{} parameter errors", dataset.preset.name),
                x_label: "epoch".into(),
                y_label: "relative error (log10)".into(),
                log_y: true,
                series: err_series,
            }
            .render(),
        )?;
    }

    let best = &report.inits[report.best_init];
    println!(
        "{}best init {}: final loss {:.3e}",
        if tag.is_empty() { String::new() } else { format!("[{}] ", tag.trim_end_matches('_')) },
        best.init,
        report.final_loss(report.best_init),
    );
    if let (Some((ea, _)), Some((eg, _))) = (report.e_alpha_mean_std, report.e_gamma_mean_std) {
        println!(
            "  mean final E_alpha = {:.4}  mean final E_gamma = {:.4}",
            ea, eg
        );
    }
    Ok(())
}

fn cmd_train(
    root: &Path,
    preset: PresetArg,
    seed: u64,
    config: Option<&Path>,
    args: &TrainArgs,
    threads: usize,
) -> Result<()> {
    let resolved = resolve_preset(preset, config)?;
    with_run_dir(root, &format!("train-{}-seed{seed}", preset.name()), |dir| {
        let dataset = generate_dataset(&resolved, seed)?;
        let cfg = train_config_from_args(args);
        let report = train(&dataset, &cfg)?;
        write_train_artifacts(dir, "", &dataset, &report)?;
        dir.finish(
            "train",
            json!({ "dataset_seed": seed, "train_seed": args.train_seed }),
            json!({ "preset": serde_json::to_value(&resolved)?, "train": serde_json::to_value(&cfg)? }),
            threads,
        )
    })
}

#[derive(Serialize)]
struct SpectrumSummary {
    model: String,
    dim: usize,
    eigenvalues: Vec<(f64, f64)>,
    /// Real part of the slowest decaying damped mode (the spectral gap).
    delta_1: f64,
    t_dc: f64,
    undamped_multiplicity: usize,
}

fn cmd_spectrum(
    root: &Path,
    gamma: f64,
    family: Option<FamilyArg>,
    seed: u64,
    threads: usize,
) -> Result<()> {
    let (slug, model_name, liouvillian, dim, seeds) = match family {
        None => {
            if gamma <= 0.0 {
                return Err(usage("--gamma must be positive for the dephasing demo"));
            }
            let sz = Array2::from_shape_vec(
                (2, 2),
                vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)],
            )
            .unwrap();
            let model = LindbladModel {
                dim: 2,
                hamiltonian_terms: vec![],
                jump_channels: vec![JumpChannel { gamma, operator: Operator::dense("sz", sz) }],
                probe: None,
            };
            (
                "spectrum-demo".to_string(),
                format!("qubit dephasing (gamma = {gamma})"),
                model.vectorize_liouvillian(0.0),
                2,
                json!({}),
            )
        }
        Some(FamilyArg::Spin32) => {
            let truth = sample_ground_truth(Family::Spin32, seed);
            let engine = lindblad_learn::dataset::build_spin32_engine(
                &truth.alphas,
                &truth.gammas,
                None,
                lindblad_learn::dataset::ObservableSet::Spin32Sx,
            );
            (
                format!("spectrum-spin32-seed{seed}"),
                format!("sampled spin-3/2 model (seed {seed})"),
                engine.liouvillian(0.0),
                4,
                json!({ "model_seed": seed }),
            )
        }
        Some(FamilyArg::Chain5) => {
            return Err(usage(
                "spectrum of the 5-site chain (a 1024x1024 eigenproblem) is not supported",
            ));
        }
    };
    with_run_dir(root, &slug, |dir| {
        let spectrum = spectral_analysis(&liouvillian, dim)?;
        let summary = SpectrumSummary {
            model: model_name.clone(),
            dim,
            eigenvalues: spectrum.eigenvalues.iter().map(|z| (z.re, z.im)).collect(),
            delta_1: spectrum.gap.re.abs(),
            t_dc: spectrum.t_dc,
            undamped_multiplicity: spectrum.undamped_multiplicity,
        };
        dir.write("spectrum.json", &(serde_json::to_string_pretty(&summary)? + "\n"))?;
        println!(
            "{model_name}: spectral gap = {:.6}, t_dc = {:.6}, {} undamped mode(s)",
            summary.delta_1, summary.t_dc, summary.undamped_multiplicity
        );
        dir.finish("spectrum", seeds.clone(), json!({ "model": model_name }), threads)
    })
}

// ---------------------------------------------------------------------------
// efficiency
// ---------------------------------------------------------------------------

fn sweep_config(args: &SweepArgs) -> SweepConfig {
    SweepConfig {
        loss: args.loss.config(),
        optimizer: OptimizerKind::Adam { lr: args.lr },
        epochs: args.epochs,
        n_init: args.n_init,
        seed: args.seed,
    }
}

fn write_sweep_artifacts(dir: &mut RunDir, report: &EfficiencyReport) -> Result<()> {
    dir.write("eta.csv", &report.eta_table())?;
    dir.write("errors.csv", &report.error_table())?;
    dir.write("chi.csv", &report.chi_table())?;

    dir.write(
        "eta.svg",
        &Plot {
            title: "information efficiency per grid point".into(),
            x_label: report.label_name.clone(),
            y_label: "eta".into(),
            log_y: false,
            series: vec![
                Series {
                    label: "numeric".into(),
                    points: report.points.iter().map(|p| (p.label, p.eta_numeric)).collect(),
                },
                Series {
                    label: "closed form".into(),
                    points: report
                        .points
                        .iter()
                        .map(|p| (p.label, p.eta_closed_form))
                        .collect(),
                },
            ],
        }
        .render(),
    )?;
    dir.write(
        "errors.svg",
        &Plot {
            title: "rate-learning error per grid point".into(),
            x_label: "epoch".into(),
            y_label: "mean E_gamma (log10)".into(),
            log_y: true,
            series: report
                .points
                .iter()
                .map(|p| Series {
                    label: format!("{} = {}", report.label_name, p.label),
                    points: p
                        .e_gamma_mean
                        .iter()
                        .enumerate()
                        .map(|(e, m)| (e as f64, *m))
                        .collect(),
                })
                .collect(),
        }
        .render(),
    )?;
    dir.write(
        "chi.svg",
        &Plot {
            title: "susceptibility of the ground-truth model".into(),
            x_label: "t".into(),
            y_label: "chi".into(),
            log_y: false,
            series: vec![Series { label: "chi(t)".into(), points: report.chi_samples.clone() }],
        }
        .render(),
    )?;

    println!("t_dc = {:.4}", report.t_dc);
    for p in &report.points {
        println!(
            "  {} = {:>7.3}: eta_numeric = {:.4e}, eta_closed = {:.4e}, final E_gamma = {:.4}",
            report.label_name,
            p.label,
            p.eta_numeric,
            p.eta_closed_form,
            p.final_e_gamma_mean()
        );
    }
    Ok(())
}

/// Window sweep with the grid points distributed over the worker pool;
/// point order in the report is the grid order either way.
fn parallel_window_sweep(
    truth: &GroundTruth,
    grid: &[f64],
    n_points: usize,
    cfg: &SweepConfig,
    threads: usize,
) -> Result<EfficiencyReport> {
    if threads <= 1 {
        return Ok(sweep_observation_window(truth, grid, n_points, cfg)?);
    }
    let t_dc = spin32_decoherence_time(truth)?;
    let results = par_map(threads, grid, |&g| {
        run_sweep_point(truth, t_dc, g * t_dc, g, n_points, cfg)
    });
    let points = results.into_iter().collect::<Result<Vec<SweepPoint>, _>>()?;
    let max_window = grid.iter().cloned().fold(0.0f64, f64::max) * t_dc;
    Ok(EfficiencyReport {
        label_name: "t_n_over_t_dc".into(),
        loss: cfg.loss,
        t_dc,
        chi_samples: truth_chi_samples(truth, max_window, 100)?,
        points,
    })
}

fn parallel_count_sweep(
    truth: &GroundTruth,
    grid: &[usize],
    window_tdc: f64,
    cfg: &SweepConfig,
    threads: usize,
) -> Result<EfficiencyReport> {
    if threads <= 1 {
        return Ok(sweep_data_points(truth, grid, window_tdc, cfg)?);
    }
    let t_dc = spin32_decoherence_time(truth)?;
    let window = window_tdc * t_dc;
    let results =
        par_map(threads, grid, |&n| run_sweep_point(truth, t_dc, window, n as f64, n, cfg));
    let points = results.into_iter().collect::<Result<Vec<SweepPoint>, _>>()?;
    Ok(EfficiencyReport {
        label_name: "n_points".into(),
        loss: cfg.loss,
        t_dc,
        chi_samples: truth_chi_samples(truth, window, 100)?,
        points,
    })
}

fn closed_form_artifacts(dir: &mut RunDir) -> Result<(f64, f64)> {
    let mut table = String::from("t_over_tdc,eta_mae,eta_mse\n");
    let mut mae_series = Vec::new();
    let mut mse_series = Vec::new();
    for i in 1..=400 {
        let t = i as f64 * 5.0 / 400.0;
        let mae = eta_closed_form(t, LossKind::Mae);
        let mse = eta_closed_form(t, LossKind::Mse);
        writeln!(table, "{t:.4},{mae:.17e},{mse:.17e}").unwrap();
        mae_series.push((t, mae));
        mse_series.push((t, mse));
    }
    dir.write("closed_form.csv", &table)?;
    dir.write(
        "closed_form.svg",
        &Plot {
            title: "closed-form information efficiency".into(),
            x_label: "t_N / t_dc".into(),
            y_label: "eta".into(),
            log_y: false,
            series: vec![
                Series { label: "MAE".into(), points: mae_series },
                Series { label: "MSE".into(), points: mse_series },
            ],
        }
        .render(),
    )?;
    let argmax_mae = find_optimal_window(LossKind::Mae);
    let argmax_mse = find_optimal_window(LossKind::Mse);
    dir.write(
        "optima.json",
        &(serde_json::to_string_pretty(&json!({
            "argmax_t_over_tdc": { "mae": argmax_mae, "mse": argmax_mse },
            "eta_at_argmax": {
                "mae": eta_closed_form(argmax_mae, LossKind::Mae),
                "mse": eta_closed_form(argmax_mse, LossKind::Mse),
            },
        }))? + "\n"),
    )?;
    println!("argmax eta_MAE = {argmax_mae:.4} t_dc, argmax eta_MSE = {argmax_mse:.4} t_dc");
    Ok((argmax_mae, argmax_mse))
}

fn cmd_efficiency(root: &Path, action: &EfficiencyCmd, threads: usize) -> Result<()> {
    match action {
        EfficiencyCmd::ClosedForm => with_run_dir(root, "efficiency-closed-form", |dir| {
            closed_form_artifacts(dir)?;
            dir.finish("efficiency closed-form", json!({}), json!({}), threads)
        }),
        EfficiencyCmd::Chi { seed, t_max, samples } => {
            if *t_max <= 0.0 || *samples == 0 {
                return Err(usage("--t-max and --samples must be positive"));
            }
            with_run_dir(root, &format!("efficiency-chi-seed{seed}"), |dir| {
                let truth = sample_ground_truth(Family::Spin32, *seed);
                let t_dc = spin32_decoherence_time(&truth)?;
                let samples = truth_chi_samples(&truth, t_max * t_dc, *samples)?;
                let mut table = String::from("t,chi\n");
                for (t, x) in &samples {
                    writeln!(table, "{t:.17e},{x:.17e}").unwrap();
                }
                dir.write("chi.csv", &table)?;
                dir.write(
                    "chi.svg",
                    &Plot {
                        title: format!("susceptibility, sampled model seed {seed}"),
                        x_label: "t".into(),
                        y_label: "chi".into(),
                        log_y: false,
                        series: vec![Series { label: "chi(t)".into(), points: samples.clone() }],
                    }
                    .render(),
                )?;
                let peak = samples
                    .iter()
                    .cloned()
                    .fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
                println!("t_dc = {t_dc:.4}; chi peaks at t = {:.4} ({:.2} t_dc)", peak.0, peak.0 / t_dc);
                dir.finish(
                    "efficiency chi",
                    json!({ "model_seed": seed }),
                    json!({ "t_max_over_tdc": t_max, "samples": samples.len() }),
                    threads,
                )
            })
        }
        EfficiencyCmd::SweepWindow { grid, n_points, sweep } => {
            if grid.is_empty() || grid.iter().any(|g| *g <= 0.0) || *n_points == 0 {
                return Err(usage("--grid entries and --n-points must be positive"));
            }
            with_run_dir(root, &format!("efficiency-sweep-window-seed{}", sweep.seed), |dir| {
                let truth = sample_ground_truth(Family::Spin32, sweep.seed);
                let cfg = sweep_config(sweep);
                let report = parallel_window_sweep(&truth, grid, *n_points, &cfg, threads)?;
                write_sweep_artifacts(dir, &report)?;
                dir.finish(
                    "efficiency sweep-window",
                    json!({ "dataset_seed": sweep.seed }),
                    json!({ "grid_tdc": grid, "n_points": n_points, "sweep": serde_json::to_value(&cfg)? }),
                    threads,
                )
            })
        }
        EfficiencyCmd::SweepCount { grid, window, sweep } => {
            if grid.is_empty() || grid.iter().any(|n| *n == 0) || *window <= 0.0 {
                return Err(usage("--grid entries and --window must be positive"));
            }
            with_run_dir(root, &format!("efficiency-sweep-count-seed{}", sweep.seed), |dir| {
                let truth = sample_ground_truth(Family::Spin32, sweep.seed);
                let cfg = sweep_config(sweep);
                let report = parallel_count_sweep(&truth, grid, *window, &cfg, threads)?;
                write_sweep_artifacts(dir, &report)?;
                dir.finish(
                    "efficiency sweep-count",
                    json!({ "dataset_seed": sweep.seed }),
                    json!({ "grid_n": grid, "window_tdc": window, "sweep": serde_json::to_value(&cfg)? }),
                    threads,
                )
            })
        }
    }
}

// ---------------------------------------------------------------------------
// reproduction presets
// ---------------------------------------------------------------------------

struct ReproSpec {
    slug: &'static str,
    preset: ExperimentPreset,
    epochs: usize,
    n_init: usize,
    freeze_alpha: bool,
}

fn reproduce_training(
    root: &Path,
    spec: ReproSpec,
    args: &ReproduceArgs,
    threads: usize,
) -> Result<()> {
    with_run_dir(root, spec.slug, |dir| {
        let dataset = generate_dataset(&spec.preset, args.seed)?;
        let mut cfg = TrainConfig::default_adam(
            args.epochs.unwrap_or(spec.epochs),
            args.n_init.unwrap_or(spec.n_init),
            1000 + args.seed,
        );
        cfg.freeze_alpha = spec.freeze_alpha;
        let report = train(&dataset, &cfg)?;
        write_train_artifacts(dir, "", &dataset, &report)?;
        dir.finish(
            spec.slug,
            json!({ "dataset_seed": args.seed, "train_seed": cfg.seed }),
            json!({ "preset": serde_json::to_value(&dataset.preset)?, "train": serde_json::to_value(&cfg)? }),
            threads,
        )
    })
}

fn cmd_reproduce(root: &Path, task: &ReproduceTask, threads: usize) -> Result<()> {
    match task {
        ReproduceTask::ProbeTdep(args) => reproduce_training(
            root,
            ReproSpec {
                slug: "reproduce-probe-tdep",
                preset: ExperimentPreset::spin32_t_dependent(),
                epochs: 1500,
                n_init: 3,
                freeze_alpha: false,
            },
            args,
            threads,
        ),
        ReproduceTask::ProbeTindep(args) => reproduce_training(
            root,
            ReproSpec {
                slug: "reproduce-probe-tindep",
                preset: ExperimentPreset::spin32_t_independent(),
                epochs: 1500,
                n_init: 3,
                freeze_alpha: false,
            },
            args,
            threads,
        ),
        ReproduceTask::Chain(args) => reproduce_training(
            root,
            ReproSpec {
                slug: "reproduce-chain",
                preset: ExperimentPreset::chain_t_independent(),
                epochs: 400,
                n_init: 2,
                freeze_alpha: false,
            },
            args,
            threads,
        ),
        ReproduceTask::Ambiguity(args) => cmd_reproduce_ambiguity(root, args, threads),
        ReproduceTask::Sweeps { kind, common } => {
            cmd_reproduce_sweeps(root, *kind, common, threads)
        }
    }
}

/// Global vs local observables on the translation-invariant chain state:
/// the same training setup succeeds or fails depending only on what is
/// measured.
fn cmd_reproduce_ambiguity(root: &Path, args: &ReproduceArgs, threads: usize) -> Result<()> {
    with_run_dir(root, "reproduce-ambiguity", |dir| {
        let variants = [
            ("global_", ExperimentPreset::chain_ambiguous_global()),
            ("local_", ExperimentPreset::chain_ambiguous_local()),
        ];
        let epochs = args.epochs.unwrap_or(300);
        let n_init = args.n_init.unwrap_or(1);
        let runs = par_map(threads, &variants, |(tag, preset)| -> Result<_> {
            let dataset = generate_dataset(preset, args.seed)?;
            let mut cfg = TrainConfig::default_adam(epochs, n_init, 1000 + args.seed);
            cfg.early_stop = None;
            let report = train(&dataset, &cfg)?;
            Ok((*tag, dataset, cfg, report))
        });
        let mut configs = Vec::new();
        for run in runs {
            let (tag, dataset, cfg, report) = run?;
            write_train_artifacts(dir, tag, &dataset, &report)?;
            configs.push(json!({
                "variant": tag.trim_end_matches('_'),
                "preset": serde_json::to_value(&dataset.preset)?,
                "train": serde_json::to_value(&cfg)?,
            }));
        }
        dir.finish(
            "reproduce-ambiguity",
            json!({ "dataset_seed": args.seed, "train_seed": 1000 + args.seed }),
            Value::Array(configs),
            threads,
        )
    })
}

/// Closed-form optima plus the observation-window and data-count sweeps.
fn cmd_reproduce_sweeps(
    root: &Path,
    kind: LossArg,
    args: &ReproduceArgs,
    threads: usize,
) -> Result<()> {
    with_run_dir(root, &format!("reproduce-sweeps-{}", kind.name()), |dir| {
        let (argmax_mae, argmax_mse) = closed_form_artifacts(dir)?;
        let argmax = match kind {
            LossArg::Mae => argmax_mae,
            LossArg::Mse => argmax_mse,
        };
        println!("optimal window for {} loss: {argmax:.4} t_dc", kind.name());

        let truth = sample_ground_truth(Family::Spin32, args.seed);
        let cfg = SweepConfig {
            loss: kind.config(),
            optimizer: OptimizerKind::Adam { lr: 0.01 },
            epochs: args.epochs.unwrap_or(300),
            n_init: args.n_init.unwrap_or(10),
            seed: args.seed,
        };
        let window_grid = [0.5, 1.0, 1.7, 3.3];
        let window_report = parallel_window_sweep(&truth, &window_grid, 15, &cfg, threads)?;
        let mut sub = RunDir::create(&dir.path, "window")?;
        write_sweep_artifacts(&mut sub, &window_report)?;
        for a in sub.artifacts {
            dir.artifacts.push(format!("window/{a}"));
        }

        let count_grid = [10usize, 15, 25, 40];
        let mut count_cfg = cfg.clone();
        count_cfg.n_init = args.n_init.unwrap_or(3);
        let count_report = parallel_count_sweep(&truth, &count_grid, 1.7, &count_cfg, threads)?;
        let mut sub = RunDir::create(&dir.path, "count")?;
        write_sweep_artifacts(&mut sub, &count_report)?;
        for a in sub.artifacts {
            dir.artifacts.push(format!("count/{a}"));
        }

        dir.finish(
            "reproduce-sweeps",
            json!({ "dataset_seed": args.seed }),
            json!({
                "loss": kind.name(),
                "window_grid_tdc": window_grid,
                "count_grid": count_grid,
                "window_sweep": serde_json::to_value(&cfg)?,
                "count_sweep": serde_json::to_value(&count_cfg)?,
            }),
            threads,
        )
    })
}
