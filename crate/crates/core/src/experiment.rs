//! Configuration-driven orchestration: parse a flat key-value config, run
//! the full pipeline (encode -> evolve -> Gram -> dual solve -> optimal
//! observable -> decompose -> re-fit -> evaluate), sweep operator-subset
//! sizes, and emit plot-ready result tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::decompose::{
    diagonalize, pauli_decompose, rank_pauli, rank_spectral, refit_subset, OperatorSubset,
    RankBy, SubsetMode,
};
use crate::numerics::RealMatrix;
use crate::quantum::{
    run_reservoir, reservoir_unitary, EncodingScheme, EncodingSpec, PauliString, QuantumState,
    ReservoirSpec, TfimAxisVariant,
};
use crate::tasks::{
    accuracy, closed_loop_forecast, forecast_horizon, gen_gaussian_mixture, gen_harmonic,
    gen_lorenz, gen_mackey_glass, load_idx, pca_reduce, rms_error, trajectory_sigma,
    ClassificationDataset, Predictor, TimeSeriesDataset,
};
use crate::training::{
    classify, dual_solve, gram, one_hot_targets, optimal_observable, predict_observables,
};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Lorenz,
    MackeyGlass,
    Harmonic,
    Classify,
}

impl TaskKind {
    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::Lorenz => "lorenz",
            TaskKind::MackeyGlass => "mackey_glass",
            TaskKind::Harmonic => "harmonic",
            TaskKind::Classify => "classify",
        }
    }
}

/// Which decomposition routes the sweep evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    Pauli,
    ZString,
    Both,
}

/// Fully resolved experiment configuration. Every field has a documented
/// default, echoed back in the manifest.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub task: TaskKind,
    pub run_id: String,
    pub output_dir: PathBuf,
    pub reservoir: ReservoirSpec,
    pub ridge: f64,
    pub p_max: usize,
    pub subset_sizes: Vec<usize>,
    pub sweep_mode: SweepMode,
    pub max_weight: Option<usize>,
    // Data generation.
    pub n_samples: usize,
    pub dt: f64,
    pub n_frequencies: usize,
    pub omega0: f64,
    pub x0: [f64; 3],
    pub images_path: Option<PathBuf>,
    pub labels_path: Option<PathBuf>,
    pub n_classes: usize,
    pub class_noise: f64,
    pub kernel_subset: usize,
    pub test_fraction: f64,
    pub pca_components: usize,
    /// Amplitude of seeded uniform noise added to the reservoir inputs during
    /// training (targets stay clean). Stabilizes closed-loop forecasting.
    pub train_noise: f64,
    // Evaluation.
    pub n_trials: usize,
    pub seed: u64,
    pub test_window: usize,
    pub warmup: usize,
}

struct ConfigMap {
    entries: BTreeMap<String, (usize, String)>,
}

impl ConfigMap {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::ParseError {
                    line: line_no,
                    message: format!("expected 'key = value', got '{line}'"),
                });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if entries.insert(key.clone(), (line_no, value)).is_some() {
                return Err(Error::ParseError {
                    line: line_no,
                    message: format!("duplicate key '{key}'"),
                });
            }
        }
        Ok(Self { entries })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(_, v)| v)
    }

    fn take_parsed<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::validation(key, format!("cannot parse '{v}'"))),
        }
    }

    fn finish(self) -> Result<()> {
        if let Some((key, (line, _))) = self.entries.into_iter().next() {
            return Err(Error::ParseError {
                line,
                message: format!("unknown key '{key}'"),
            });
        }
        Ok(())
    }
}

fn parse_usize_list(key: &str, text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::validation(key, format!("cannot parse '{s}'")))
        })
        .collect()
}

impl ExperimentConfig {
    /// Parse and validate a config file; unknown keys are errors, missing
    /// keys fall back to task-appropriate defaults.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str(&text)
    }

    pub fn from_str(text: &str) -> Result<Self> {
        let mut map = ConfigMap::parse(text)?;

        let task = match map
            .take("task")
            .ok_or_else(|| Error::validation("task", "missing required key"))?
            .as_str()
        {
            "lorenz" => TaskKind::Lorenz,
            "mackey_glass" => TaskKind::MackeyGlass,
            "harmonic" => TaskKind::Harmonic,
            "classify" => TaskKind::Classify,
            other => {
                return Err(Error::validation(
                    "task",
                    format!("unknown task '{other}'"),
                ))
            }
        };

        let pca_components = map.take_parsed("data.pca_components", 10usize)?;
        let input_dim_default = match task {
            TaskKind::Lorenz => 3,
            TaskKind::MackeyGlass | TaskKind::Harmonic => 1,
            TaskKind::Classify => pca_components,
        };
        let encoding_name = map.take("reservoir.encoding").unwrap_or_else(|| {
            match task {
                TaskKind::Lorenz | TaskKind::MackeyGlass => "amplitude_sqrt",
                TaskKind::Harmonic => "amplitude_symmetric",
                TaskKind::Classify => "rotational_paired_yz",
            }
            .to_string()
        });
        let scheme = EncodingScheme::parse(&encoding_name)?;
        let encoding = EncodingSpec::new(scheme, input_dim_default)?;

        let n_input = map.take_parsed("reservoir.n_input", encoding.qubits_used)?;
        if n_input != encoding.qubits_used {
            return Err(Error::validation(
                "reservoir.n_input",
                format!(
                    "encoding '{}' over {} inputs uses {} qubits, config says {}",
                    scheme.name(),
                    encoding.input_dim,
                    encoding.qubits_used,
                    n_input
                ),
            ));
        }
        let n_ancilla_default = match task {
            TaskKind::Lorenz => 1,
            TaskKind::MackeyGlass | TaskKind::Harmonic => 3,
            TaskKind::Classify => 0,
        };
        let washout_raw: i64 = map.take_parsed("reservoir.washout", 20i64)?;
        if washout_raw < 0 {
            return Err(Error::validation("reservoir.washout", "must be >= 0"));
        }
        let axis = match map
            .take("reservoir.tfim_axis_variant")
            .unwrap_or_else(|| "x_field_zz_coupling".to_string())
            .as_str()
        {
            "x_field_zz_coupling" => TfimAxisVariant::XFieldZzCoupling,
            "z_field_xx_coupling" => TfimAxisVariant::ZFieldXxCoupling,
            other => {
                return Err(Error::validation(
                    "reservoir.tfim_axis_variant",
                    format!("unknown variant '{other}'"),
                ))
            }
        };
        let reservoir = ReservoirSpec {
            n_input,
            n_ancilla: map.take_parsed("reservoir.n_ancilla", n_ancilla_default)?,
            encoding,
            tfim_h: map.take_parsed("reservoir.tfim_h", 1.0f64)?,
            tfim_j: map.take_parsed("reservoir.tfim_j", 0.5f64)?,
            evolution_time: map.take_parsed("reservoir.evolution_time", 1.0f64)?,
            tfim_axis_variant: axis,
            washout: washout_raw as usize,
        };

        let subset_sizes = match map.take("training.subset_sizes") {
            None => Vec::new(),
            Some(v) => parse_usize_list("training.subset_sizes", &v)?,
        };
        let sweep_mode = match map
            .take("training.mode")
            .unwrap_or_else(|| "both".to_string())
            .as_str()
        {
            "pauli" => SweepMode::Pauli,
            "zstring" => SweepMode::ZString,
            "both" => SweepMode::Both,
            other => {
                return Err(Error::validation(
                    "training.mode",
                    format!("unknown mode '{other}'"),
                ))
            }
        };
        let max_weight = match map.take("training.max_weight") {
            None => None,
            Some(v) => Some(v.parse().map_err(|_| {
                Error::validation("training.max_weight", format!("cannot parse '{v}'"))
            })?),
        };

        let x0 = match map.take("data.x0") {
            None => [1.0, 1.0, 1.0],
            Some(v) => {
                let parts: Vec<f64> = v
                    .split(',')
                    .map(|s| {
                        s.trim()
                            .parse()
                            .map_err(|_| Error::validation("data.x0", format!("cannot parse '{s}'")))
                    })
                    .collect::<Result<_>>()?;
                if parts.len() != 3 {
                    return Err(Error::validation("data.x0", "expected three components"));
                }
                [parts[0], parts[1], parts[2]]
            }
        };

        let config = Self {
            task,
            run_id: map.take("run_id").unwrap_or_else(|| "run0".to_string()),
            output_dir: PathBuf::from(map.take("output.dir").unwrap_or_else(|| "results".into())),
            reservoir,
            ridge: map.take_parsed("training.ridge", 1e-6f64)?,
            p_max: map.take_parsed("training.p_max", 1usize)?,
            subset_sizes,
            sweep_mode,
            max_weight,
            n_samples: map.take_parsed("data.n_samples", 600usize)?,
            dt: map.take_parsed("data.dt", default_dt(task))?,
            n_frequencies: map.take_parsed("data.n_frequencies", 9usize)?,
            omega0: map.take_parsed("data.omega0", 0.5f64)?,
            x0,
            images_path: map.take("data.images_path").map(PathBuf::from),
            labels_path: map.take("data.labels_path").map(PathBuf::from),
            n_classes: map.take_parsed("data.n_classes", 10usize)?,
            class_noise: map.take_parsed("data.noise", 0.08f64)?,
            kernel_subset: map.take_parsed("data.kernel_subset", 10_000usize)?,
            test_fraction: map.take_parsed("data.test_fraction", 0.2f64)?,
            pca_components,
            train_noise: map.take_parsed("data.train_noise", 0.0f64)?,
            n_trials: map.take_parsed("evaluation.n_trials", 10usize)?,
            seed: map.take_parsed("evaluation.seed", 1u64)?,
            test_window: map.take_parsed("evaluation.test_window", 500usize)?,
            warmup: map.take_parsed("evaluation.warmup", 50usize)?,
        };
        map.finish()?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.reservoir.validate()?;
        if self.ridge <= 0.0 {
            return Err(Error::validation("training.ridge", "must be > 0"));
        }
        if self.p_max == 0 {
            return Err(Error::validation("training.p_max", "must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(Error::validation("data.test_fraction", "must be in [0, 1)"));
        }
        if self.train_noise < 0.0 || !self.train_noise.is_finite() {
            return Err(Error::validation("data.train_noise", "must be >= 0"));
        }
        if self.n_trials == 0 {
            return Err(Error::validation("evaluation.n_trials", "must be >= 1"));
        }
        if self.task != TaskKind::Classify && self.warmup <= self.reservoir.washout {
            return Err(Error::validation(
                "evaluation.warmup",
                "must exceed reservoir.washout",
            ));
        }
        for (path, key) in [
            (&self.images_path, "data.images_path"),
            (&self.labels_path, "data.labels_path"),
        ] {
            if let Some(p) = path {
                if !p.exists() {
                    return Err(Error::validation(key, format!("path {p:?} does not exist")));
                }
            }
        }
        Ok(())
    }

    /// Every resolved field, for the manifest. One `key = value` per line.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("task", self.task.name().to_string());
        put("run_id", self.run_id.clone());
        put("output.dir", self.output_dir.display().to_string());
        put("reservoir.n_input", self.reservoir.n_input.to_string());
        put("reservoir.n_ancilla", self.reservoir.n_ancilla.to_string());
        put(
            "reservoir.encoding",
            self.reservoir.encoding.scheme.name().to_string(),
        );
        put("reservoir.tfim_h", self.reservoir.tfim_h.to_string());
        put("reservoir.tfim_j", self.reservoir.tfim_j.to_string());
        put(
            "reservoir.evolution_time",
            self.reservoir.evolution_time.to_string(),
        );
        put(
            "reservoir.tfim_axis_variant",
            match self.reservoir.tfim_axis_variant {
                TfimAxisVariant::XFieldZzCoupling => "x_field_zz_coupling".to_string(),
                TfimAxisVariant::ZFieldXxCoupling => "z_field_xx_coupling".to_string(),
            },
        );
        put("reservoir.washout", self.reservoir.washout.to_string());
        put("training.ridge", format!("{:e}", self.ridge));
        put("training.p_max", self.p_max.to_string());
        put(
            "training.subset_sizes",
            self.subset_sizes
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        put(
            "training.mode",
            match self.sweep_mode {
                SweepMode::Pauli => "pauli",
                SweepMode::ZString => "zstring",
                SweepMode::Both => "both",
            }
            .to_string(),
        );
        put(
            "training.max_weight",
            self.max_weight.map_or("none".into(), |w| w.to_string()),
        );
        put("data.n_samples", self.n_samples.to_string());
        put("data.dt", self.dt.to_string());
        put("data.n_frequencies", self.n_frequencies.to_string());
        put("data.omega0", self.omega0.to_string());
        put(
            "data.x0",
            format!("{},{},{}", self.x0[0], self.x0[1], self.x0[2]),
        );
        put(
            "data.images_path",
            self.images_path
                .as_ref()
                .map_or("none".into(), |p| p.display().to_string()),
        );
        put(
            "data.labels_path",
            self.labels_path
                .as_ref()
                .map_or("none".into(), |p| p.display().to_string()),
        );
        put("data.n_classes", self.n_classes.to_string());
        put("data.noise", self.class_noise.to_string());
        put("data.kernel_subset", self.kernel_subset.to_string());
        put("data.test_fraction", self.test_fraction.to_string());
        put("data.pca_components", self.pca_components.to_string());
        put("data.train_noise", self.train_noise.to_string());
        put("evaluation.n_trials", self.n_trials.to_string());
        put("evaluation.seed", self.seed.to_string());
        put("evaluation.test_window", self.test_window.to_string());
        put("evaluation.warmup", self.warmup.to_string());
        s
    }
}

fn default_dt(task: TaskKind) -> f64 {
    match task {
        TaskKind::Lorenz => 0.02,
        TaskKind::MackeyGlass => 1.0,
        TaskKind::Harmonic => 0.2,
        TaskKind::Classify => 1.0,
    }
}

// ---------------------------------------------------------------------------
// Result rows
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub run_id: String,
    pub task: String,
    pub seed: u64,
    pub mode: String,
    pub subset_size: usize,
    pub metric: String,
    pub value: f64,
    pub censored: bool,
}

impl ResultRow {
    fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:.17e},{}\n",
            self.run_id,
            self.task,
            self.seed,
            self.mode,
            self.subset_size,
            self.metric,
            self.value,
            self.censored
        )
    }
}

pub const RESULT_HEADER: &str = "run_id,task,seed,mode,subset_size,metric,value,censored";

// ---------------------------------------------------------------------------
// Pipeline pieces
// ---------------------------------------------------------------------------

/// A trained forecasting stack for one time-series trial.
pub struct TrainedForecaster {
    pub states: Vec<QuantumState>,
    pub targets: RealMatrix,
    pub observables: crate::training::OptimalObservableSet,
    pub rms_train: f64,
}

pub fn generate_series(config: &ExperimentConfig, trial_seed: u64, total: usize) -> Result<TimeSeriesDataset> {
    match config.task {
        TaskKind::Lorenz => {
            let raw = gen_lorenz(config.x0, total, config.dt, trial_seed);
            raw.scaled_to(0.05, 0.95, Some(config.n_samples))
        }
        TaskKind::MackeyGlass => Ok(gen_mackey_glass(total, trial_seed)),
        TaskKind::Harmonic => Ok(gen_harmonic(
            config.n_frequencies,
            config.omega0,
            total,
            config.dt,
            trial_seed,
        )),
        TaskKind::Classify => Err(Error::validation("task", "not a time-series task")),
    }
}

pub fn train_forecaster(
    config: &ExperimentConfig,
    series: &RealMatrix,
    u: &crate::numerics::ComplexMatrix,
    noise_seed: u64,
) -> Result<TrainedForecaster> {
    let spec = &config.reservoir;
    // Optionally perturb the inputs fed to the reservoir while the targets
    // stay clean; this damps the closed-loop sensitivity to feedback errors.
    let inputs = if config.train_noise > 0.0 {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(noise_seed ^ 0x6e6f_6973);
        let (lo, hi) = spec.encoding.scheme.range();
        let mut noisy = series.clone();
        for r in 0..noisy.rows() {
            for c in 0..noisy.cols() {
                let jitter = rng.gen_range(-config.train_noise..=config.train_noise);
                let v = (noisy.get(r, c) + jitter).clamp(lo, hi);
                noisy.set(r, c, v);
            }
        }
        noisy
    } else {
        series.clone()
    };
    let states_all = run_reservoir(&inputs, spec, u)?;
    // Pair the state after input t with the value at t+1.
    let p = states_all.len() - 1;
    let states = states_all[..p].to_vec();
    let d = series.cols();
    let mut targets = RealMatrix::zeros(p, d);
    for t in 0..p {
        for c in 0..d {
            targets.set(t, c, series.get(spec.washout + t + 1, c));
        }
    }
    let k = gram(&states)?;
    let solution = dual_solve(&k, &targets, config.ridge)?;
    let observables = optimal_observable(&states, &solution)?;
    let mut predicted = RealMatrix::zeros(p, d);
    for (t, s) in states.iter().enumerate() {
        for (c, v) in predict_observables(&observables, s)?.into_iter().enumerate() {
            predicted.set(t, c, v);
        }
    }
    let rms_train = rms_error(&targets, &predicted)?;
    Ok(TrainedForecaster {
        states,
        targets,
        observables,
        rms_train,
    })
}

/// All operator subsets requested by the sweep mode, built from the trained
/// optimal observables.
pub fn build_subsets(
    config: &ExperimentConfig,
    trained: &TrainedForecaster,
) -> Result<Vec<(String, OperatorSubset)>> {
    let mut out = Vec::new();
    if matches!(config.sweep_mode, SweepMode::Pauli | SweepMode::Both) {
        let decomps = trained
            .observables
            .observables
            .iter()
            .enumerate()
            .map(|(c, m)| pauli_decompose(m, c))
            .collect::<Result<Vec<_>>>()?;
        out.push((
            "pauli".to_string(),
            rank_pauli(&decomps, config.max_weight)?,
        ));
    }
    if matches!(config.sweep_mode, SweepMode::ZString | SweepMode::Both) {
        let decomps = trained
            .observables
            .observables
            .iter()
            .enumerate()
            .map(|(c, m)| diagonalize(m, c))
            .collect::<Result<Vec<_>>>()?;
        out.push((
            "zstring".to_string(),
            rank_spectral(&decomps, RankBy::ZCoefficient)?,
        ));
    }
    Ok(out)
}

fn forecast_metrics(
    config: &ExperimentConfig,
    model: &Predictor,
    u: &crate::numerics::ComplexMatrix,
    warm: &RealMatrix,
    truth: &RealMatrix,
    sigma: f64,
    lyapunov: Option<f64>,
    trial_seed: u64,
    mode: &str,
    subset_size: usize,
) -> Result<Vec<ResultRow>> {
    let out = closed_loop_forecast(model, &config.reservoir, u, warm, truth.rows(), true)?;
    let horizon = forecast_horizon(truth, &out.predicted, sigma, config.dt, lyapunov)?;
    let mut rows = vec![ResultRow {
        run_id: config.run_id.clone(),
        task: config.task.name().to_string(),
        seed: trial_seed,
        mode: mode.to_string(),
        subset_size,
        metric: "horizon_steps".to_string(),
        value: horizon.steps as f64,
        censored: horizon.censored,
    }];
    if let Some(lyap) = horizon.lyapunov_units {
        rows.push(ResultRow {
            run_id: config.run_id.clone(),
            task: config.task.name().to_string(),
            seed: trial_seed,
            mode: mode.to_string(),
            subset_size,
            metric: "horizon_lyapunov".to_string(),
            value: lyap,
            censored: horizon.censored,
        });
    }
    rows.push(ResultRow {
        run_id: config.run_id.clone(),
        task: config.task.name().to_string(),
        seed: trial_seed,
        mode: mode.to_string(),
        subset_size,
        metric: "clip_events".to_string(),
        value: out.clip_events as f64,
        censored: false,
    });
    Ok(rows)
}

/// One full time-series trial: generate, train, decompose, sweep, forecast.
fn run_forecast_trial(config: &ExperimentConfig, trial: usize) -> Result<Vec<ResultRow>> {
    let trial_seed = config.seed + trial as u64;
    let spec = &config.reservoir;
    let total = config.n_samples + config.test_window + 1;
    let dataset = generate_series(config, trial_seed, total)?;
    let u = reservoir_unitary(spec)?;

    // Train on the first n_samples rows.
    let mut train = RealMatrix::zeros(config.n_samples, dataset.samples.cols());
    for r in 0..config.n_samples {
        for c in 0..dataset.samples.cols() {
            train.set(r, c, dataset.samples.get(r, c));
        }
    }
    let trained = train_forecaster(config, &train, &u, trial_seed)?;

    // Warm series: the last `warmup` training rows; truth: the next
    // test_window rows.
    let warm_start = config.n_samples - config.warmup;
    let mut warm = RealMatrix::zeros(config.warmup, train.cols());
    for r in 0..config.warmup {
        for c in 0..train.cols() {
            warm.set(r, c, train.get(warm_start + r, c));
        }
    }
    let mut truth = RealMatrix::zeros(config.test_window, train.cols());
    for r in 0..config.test_window {
        for c in 0..train.cols() {
            truth.set(r, c, dataset.samples.get(config.n_samples + r, c));
        }
    }
    let sigma = trajectory_sigma(&train);
    let lyapunov = dataset.lyapunov_exponent;

    let mut rows = Vec::new();
    rows.push(ResultRow {
        run_id: config.run_id.clone(),
        task: config.task.name().to_string(),
        seed: trial_seed,
        mode: "full".to_string(),
        subset_size: 0,
        metric: "rms_train".to_string(),
        value: trained.rms_train,
        censored: false,
    });

    // Full-M* dashed-line reference.
    let full_model = Predictor::Observables(&trained.observables);
    rows.extend(forecast_metrics(
        config, &full_model, &u, &warm, &truth, sigma, lyapunov, trial_seed, "full", 0,
    )?);

    // Complete-basis primal reference (operator-space ridge corresponds to
    // weight-space ridge scaled by tr(P^2) = 2^N).
    let n_total = spec.n_total();
    let complete = OperatorSubset {
        mode: SubsetMode::Pauli,
        n_qubits: n_total,
        selection: (0..1usize << (2 * n_total)).collect(),
        rank_scores: vec![1.0; 1usize << (2 * n_total)],
        pre_rotations: Vec::new(),
    };
    let primal_ref = refit_subset(
        &complete,
        &trained.states,
        &trained.targets,
        config.ridge * (1usize << n_total) as f64,
        1,
    )?;
    rows.extend(forecast_metrics(
        config,
        &Predictor::Refit(&primal_ref),
        &u,
        &warm,
        &truth,
        sigma,
        lyapunov,
        trial_seed,
        "primal_full",
        complete.len(),
    )?);

    // Subset sweeps.
    if !config.subset_sizes.is_empty() {
        for (mode, subset) in build_subsets(config, &trained)? {
            for &size in &config.subset_sizes {
                let size = size.min(subset.len());
                if size == 0 {
                    continue;
                }
                let model = refit_subset(
                    &subset.truncated(size),
                    &trained.states,
                    &trained.targets,
                    config.ridge,
                    config.p_max,
                )?;
                rows.extend(forecast_metrics(
                    config,
                    &Predictor::Refit(&model),
                    &u,
                    &warm,
                    &truth,
                    sigma,
                    lyapunov,
                    trial_seed,
                    &mode,
                    size,
                )?);
            }
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Classification pipeline
// ---------------------------------------------------------------------------

fn load_classification_data(config: &ExperimentConfig) -> Result<ClassificationDataset> {
    match (&config.images_path, &config.labels_path) {
        (Some(img), Some(lbl)) => {
            let raw = load_idx(img, lbl)?;
            let (projected, _model) = pca_reduce(&raw.features, config.pca_components)?;
            ClassificationDataset::with_split(
                projected,
                raw.labels,
                config.test_fraction,
                config.seed,
            )
        }
        (None, None) => Ok(gen_gaussian_mixture(
            config.n_classes,
            config.pca_components,
            config.n_samples,
            config.class_noise,
            config.seed,
        )),
        _ => Err(Error::validation(
            "data.images_path",
            "provide both images_path and labels_path, or neither",
        )),
    }
}

/// Z and ZZ strings (plus the identity) in code order — the fixed operator
/// set of the constrained-primal baseline.
pub fn z_zz_operator_codes(n: usize) -> Vec<usize> {
    let mut codes = vec![0usize];
    for code in 1..1usize << (2 * n) {
        let p = PauliString::new(n, code);
        if p.is_z_string() && p.weight() <= 2 {
            codes.push(code);
        }
    }
    codes
}

pub struct ClassifyOutcome {
    pub rows: Vec<ResultRow>,
}

fn run_classify(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let spec = &config.reservoir;
    let data = load_classification_data(config)?;
    let n_classes = data.n_classes();
    let u = reservoir_unitary(spec)?;

    // Kernel training subset.
    let train_idx: Vec<usize> = data
        .train_indices
        .iter()
        .copied()
        .take(config.kernel_subset)
        .collect();
    let train_features = data.rows(&train_idx);
    let train_labels = data.labels_at(&train_idx);
    let test_features = data.rows(&data.test_indices);
    let test_labels = data.labels_at(&data.test_indices);

    let encode_rows = |features: &RealMatrix| -> Result<Vec<QuantumState>> {
        (0..features.rows())
            .into_par_iter()
            .map(|r| crate::quantum::qelm_state(features.row(r), spec, Some(&u)))
            .collect()
    };
    let train_states = encode_rows(&train_features)?;
    let test_states = encode_rows(&test_features)?;

    let y = one_hot_targets(&train_labels, n_classes);
    let k = gram(&train_states)?;
    let solution = dual_solve(&k, &y, config.ridge)?;
    let observables = optimal_observable(&train_states, &solution)?;

    let mut rows = Vec::new();
    let push_acc = |rows: &mut Vec<ResultRow>, mode: &str, size: usize, acc: f64| {
        rows.push(ResultRow {
            run_id: config.run_id.clone(),
            task: config.task.name().to_string(),
            seed: config.seed,
            mode: mode.to_string(),
            subset_size: size,
            metric: "accuracy".to_string(),
            value: acc,
            censored: false,
        });
    };

    // Full-M* kernel reference.
    let predictions: Vec<usize> = test_states
        .par_iter()
        .map(|s| Ok(classify(&predict_observables(&observables, s)?)))
        .collect::<Result<_>>()?;
    push_acc(&mut rows, "full", 0, accuracy(&predictions, &test_labels)?);

    // Kernel-optimized subsets (ranked Pauli projection, re-fit).
    let decomps = observables
        .observables
        .iter()
        .enumerate()
        .map(|(c, m)| pauli_decompose(m, c))
        .collect::<Result<Vec<_>>>()?;
    let ranked = rank_pauli(&decomps, config.max_weight)?;
    let zz_codes = z_zz_operator_codes(spec.n_total());

    for &size in &config.subset_sizes {
        // Kernel-ranked top-k re-fit.
        let k_size = size.min(ranked.len());
        if k_size > 0 {
            let model = refit_subset(
                &ranked.truncated(k_size),
                &train_states,
                &y,
                config.ridge,
                config.p_max,
            )?;
            let preds: Vec<usize> = test_states
                .par_iter()
                .map(|s| Ok(classify(&model.predict(s)?)))
                .collect::<Result<_>>()?;
            push_acc(
                &mut rows,
                "kernel_subset",
                k_size,
                accuracy(&preds, &test_labels)?,
            );
        }
        // Constrained primal over the first min(size, |Z u ZZ|) fixed codes.
        let p_size = size.min(zz_codes.len());
        if p_size > 0 {
            let fixed = OperatorSubset {
                mode: SubsetMode::Pauli,
                n_qubits: spec.n_total(),
                selection: zz_codes[..p_size].to_vec(),
                rank_scores: vec![1.0; p_size],
                pre_rotations: Vec::new(),
            };
            let model = refit_subset(&fixed, &train_states, &y, config.ridge, config.p_max)?;
            let preds: Vec<usize> = test_states
                .par_iter()
                .map(|s| Ok(classify(&model.predict(s)?)))
                .collect::<Result<_>>()?;
            push_acc(
                &mut rows,
                "primal_zz",
                p_size,
                accuracy(&preds, &test_labels)?,
            );
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Driver and emission
// ---------------------------------------------------------------------------

/// Execute the configured experiment and return all result rows, in
/// deterministic (trial-major) order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    match config.task {
        TaskKind::Classify => run_classify(config),
        _ => {
            let per_trial: Vec<Vec<ResultRow>> = (0..config.n_trials)
                .into_par_iter()
                .map(|t| run_forecast_trial(config, t))
                .collect::<Result<_>>()?;
            Ok(per_trial.into_iter().flatten().collect())
        }
    }
}

/// Write the result table and the run manifest; refuses to overwrite an
/// existing run_id.
pub fn emit_results(
    rows: &[ResultRow],
    config: &ExperimentConfig,
    wall_clock_secs: f64,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(&config.output_dir)?;
    let table_path = config
        .output_dir
        .join(format!("{}_{}.csv", config.task.name(), config.run_id));
    let manifest_path = config
        .output_dir
        .join(format!("manifest_{}.txt", config.run_id));
    for p in [&table_path, &manifest_path] {
        if p.exists() {
            return Err(Error::validation(
                "run_id",
                format!("refusing to overwrite existing {p:?}; choose a new run_id"),
            ));
        }
    }
    let mut table = String::from(RESULT_HEADER);
    table.push('\n');
    for row in rows {
        table.push_str(&row.csv());
    }
    std::fs::write(&table_path, table)?;

    let mut manifest = String::new();
    let _ = writeln!(manifest, "version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(manifest, "wall_clock_secs = {wall_clock_secs:.3}");
    let _ = writeln!(
        manifest,
        "seeds = {}",
        (0..config.n_trials)
            .map(|t| (config.seed + t as u64).to_string())
            .collect::<Vec<_>>()
            .join(",")
    );
    manifest.push_str(&config.echo());
    std::fs::write(&manifest_path, manifest)?;
    Ok(vec![table_path, manifest_path])
}

/// Convenience wrapper: run and emit, timing the run.
pub fn run_and_emit(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let start = Instant::now();
    let rows = run_experiment(config)?;
    emit_results(&rows, config, start.elapsed().as_secs_f64())
}

/// Build the global rayon pool from an explicit thread count or the
/// QRCK_THREADS environment variable. A count of zero (or absence) keeps the
/// default. Safe to call once per process.
pub fn configure_threads(threads: Option<usize>) -> Result<()> {
    let n = match threads {
        Some(n) => n,
        None => match std::env::var("QRCK_THREADS") {
            Ok(v) => v
                .parse()
                .map_err(|_| Error::validation("QRCK_THREADS", format!("cannot parse '{v}'")))?,
            Err(_) => 0,
        },
    };
    if n == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::validation("threads", e.to_string()))
}

/// Aggregate rows into (mode, subset_size, metric) -> (mean, std, count),
/// the standard deviation being the population-style spread across seeds.
pub fn summarize(rows: &[ResultRow]) -> Vec<(String, usize, String, f64, f64, usize)> {
    let mut groups: BTreeMap<(String, usize, String), Vec<f64>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.mode.clone(), r.subset_size, r.metric.clone()))
            .or_default()
            .push(r.value);
    }
    groups
        .into_iter()
        .map(|((mode, size, metric), values)| {
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            (mode, size, metric, mean, var.sqrt(), n)
        })
        .collect()
}
