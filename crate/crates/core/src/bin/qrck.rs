//! Command-line driver: configuration-driven data generation, training,
//! decomposition, forecasting, classification, sweeps, and report
//! summarization. Progress goes to stderr; result data only to files.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qrck::decompose::{export_table, pauli_decompose, rank_pauli};
use qrck::experiment::{
    configure_threads, generate_series, run_and_emit, summarize, train_forecaster,
    ExperimentConfig, ResultRow, TaskKind, RESULT_HEADER,
};
use qrck::numerics::RealMatrix;
use qrck::quantum::reservoir_unitary;
use qrck::training::TrainedReadout;

#[derive(Parser)]
#[command(
    name = "qrck",
    about = "Quantum reservoir computing simulator and benchmark harness",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Path to the experiment configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the configured output directory.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Worker thread count (QRCK_THREADS as fallback; 0 = automatic).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Offset added to every configured seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed_offset: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured dataset and write it as a delimited table.
    GenData,
    /// Train the kernel readout and save it.
    Train,
    /// Train, decompose the optimal observables, and export the ranked table.
    Decompose,
    /// Run the closed-loop forecasting experiment.
    Forecast,
    /// Run the classification experiment.
    Classify,
    /// Full figure-reproduction sweep over operator-subset sizes.
    Sweep,
    /// Summarize a finished run's result table (mean/std per curve point).
    Report,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(cli: &Cli) -> qrck::Result<ExperimentConfig> {
    let path = cli.config.as_ref().ok_or_else(|| {
        qrck::Error::validation("--config", "a configuration file is required")
    })?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(out) = &cli.output {
        config.output_dir = out.clone();
    }
    config.seed += cli.seed_offset;
    Ok(config)
}

fn run(cli: Cli) -> qrck::Result<()> {
    configure_threads(cli.threads)?;
    let config = load_config(&cli)?;
    std::fs::create_dir_all(&config.output_dir)?;
    match cli.command {
        Command::GenData => gen_data(&config),
        Command::Train => train(&config),
        Command::Decompose => decompose(&config),
        Command::Forecast | Command::Classify | Command::Sweep => {
            let expected_time_series = !matches!(cli.command, Command::Classify);
            let is_time_series = config.task != TaskKind::Classify;
            if expected_time_series != is_time_series {
                return Err(qrck::Error::validation(
                    "task",
                    "subcommand does not match the configured task",
                ));
            }
            eprintln!("running {} experiment '{}'", config.task.name(), config.run_id);
            let paths = run_and_emit(&config)?;
            for p in paths {
                eprintln!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::Report => report(&config),
    }
}

fn fresh_path(config: &ExperimentConfig, name: &str) -> qrck::Result<PathBuf> {
    let path = config.output_dir.join(name);
    if path.exists() {
        return Err(qrck::Error::validation(
            "run_id",
            format!("refusing to overwrite existing {path:?}; choose a new run_id"),
        ));
    }
    Ok(path)
}

fn gen_data(config: &ExperimentConfig) -> qrck::Result<()> {
    let path = fresh_path(
        config,
        &format!("{}_data_{}.csv", config.task.name(), config.run_id),
    )?;
    let mut out = String::new();
    match config.task {
        TaskKind::Classify => {
            let data = qrck::tasks::gen_gaussian_mixture(
                config.n_classes,
                config.pca_components,
                config.n_samples,
                config.class_noise,
                config.seed,
            );
            let _ = writeln!(
                out,
                "{},label",
                (0..data.features.cols())
                    .map(|c| format!("f{c}"))
                    .collect::<Vec<_>>()
                    .join(",")
            );
            for r in 0..data.features.rows() {
                let row: Vec<String> = data
                    .features
                    .row(r)
                    .iter()
                    .map(|v| format!("{v:.17e}"))
                    .collect();
                let _ = writeln!(out, "{},{}", row.join(","), data.labels[r]);
            }
        }
        _ => {
            let total = config.n_samples + config.test_window + 1;
            let ds = generate_series(config, config.seed, total)?;
            let _ = writeln!(
                out,
                "{}",
                (0..ds.samples.cols())
                    .map(|c| format!("z{c}"))
                    .collect::<Vec<_>>()
                    .join(",")
            );
            for r in 0..ds.samples.rows() {
                let row: Vec<String> = ds
                    .samples
                    .row(r)
                    .iter()
                    .map(|v| format!("{v:.17e}"))
                    .collect();
                let _ = writeln!(out, "{}", row.join(","));
            }
        }
    }
    std::fs::write(&path, out)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

/// Train the kernel readout on the configured task's training section.
fn train_states_and_targets(
    config: &ExperimentConfig,
) -> qrck::Result<(Vec<qrck::quantum::QuantumState>, RealMatrix, f64)> {
    match config.task {
        TaskKind::Classify => {
            let data = qrck::tasks::gen_gaussian_mixture(
                config.n_classes,
                config.pca_components,
                config.n_samples,
                config.class_noise,
                config.seed,
            );
            let idx: Vec<usize> = data
                .train_indices
                .iter()
                .copied()
                .take(config.kernel_subset)
                .collect();
            let features = data.rows(&idx);
            let labels = data.labels_at(&idx);
            let u = reservoir_unitary(&config.reservoir)?;
            let states = (0..features.rows())
                .map(|r| qrck::quantum::qelm_state(features.row(r), &config.reservoir, Some(&u)))
                .collect::<qrck::Result<Vec<_>>>()?;
            let y = qrck::training::one_hot_targets(&labels, data.n_classes());
            Ok((states, y, f64::NAN))
        }
        _ => {
            let total = config.n_samples + 1;
            let ds = generate_series(config, config.seed, total)?;
            let u = reservoir_unitary(&config.reservoir)?;
            let trained = train_forecaster(config, &ds.samples, &u, config.seed)?;
            Ok((trained.states, trained.targets, trained.rms_train))
        }
    }
}

fn train(config: &ExperimentConfig) -> qrck::Result<()> {
    let path = fresh_path(config, &format!("readout_{}.txt", config.run_id))?;
    let (states, y, rms) = train_states_and_targets(config)?;
    let k = qrck::training::gram(&states)?;
    let solution = qrck::training::dual_solve(&k, &y, config.ridge)?;
    let readout = TrainedReadout {
        n_qubits: config.reservoir.n_total(),
        encoding: config.reservoir.encoding.clone(),
        ridge: config.ridge,
        alpha: Some(solution.alpha),
        operator_codes: Vec::new(),
        weights: None,
        monomial_order: config.p_max,
    };
    readout.save(&path)?;
    if rms.is_finite() {
        eprintln!("rms training error {rms:.6e}");
    }
    eprintln!("trained on {} states; wrote {}", states.len(), path.display());
    Ok(())
}

fn decompose(config: &ExperimentConfig) -> qrck::Result<()> {
    let path = fresh_path(config, &format!("decomposition_{}.csv", config.run_id))?;
    let (states, y, _) = train_states_and_targets(config)?;
    let k = qrck::training::gram(&states)?;
    let solution = qrck::training::dual_solve(&k, &y, config.ridge)?;
    let set = qrck::training::optimal_observable(&states, &solution)?;
    let decomps = set
        .observables
        .iter()
        .enumerate()
        .map(|(c, m)| pauli_decompose(m, c))
        .collect::<qrck::Result<Vec<_>>>()?;
    let subset = rank_pauli(&decomps, config.max_weight)?;
    std::fs::write(&path, export_table(&decomps, &subset))?;
    eprintln!(
        "decomposed {} channels into {} ranked operators; wrote {}",
        decomps.len(),
        subset.len(),
        path.display()
    );
    Ok(())
}

fn report(config: &ExperimentConfig) -> qrck::Result<()> {
    let table_path = config
        .output_dir
        .join(format!("{}_{}.csv", config.task.name(), config.run_id));
    let text = std::fs::read_to_string(&table_path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != RESULT_HEADER {
                return Err(qrck::Error::ParseError {
                    line: 1,
                    message: format!("unexpected header '{line}'"),
                });
            }
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 8 {
            return Err(qrck::Error::ParseError {
                line: i + 1,
                message: format!("expected 8 columns, got {}", parts.len()),
            });
        }
        let parse_err = |field: &str| qrck::Error::ParseError {
            line: i + 1,
            message: format!("cannot parse {field}"),
        };
        rows.push(ResultRow {
            run_id: parts[0].to_string(),
            task: parts[1].to_string(),
            seed: parts[2].parse().map_err(|_| parse_err("seed"))?,
            mode: parts[3].to_string(),
            subset_size: parts[4].parse().map_err(|_| parse_err("subset_size"))?,
            metric: parts[5].to_string(),
            value: parts[6].parse().map_err(|_| parse_err("value"))?,
            censored: parts[7].parse().map_err(|_| parse_err("censored"))?,
        });
    }
    let summary = summarize(&rows);
    let path = fresh_path(config, &format!("summary_{}.csv", config.run_id))?;
    let mut out = String::from("mode,subset_size,metric,mean,std,n\n");
    for (mode, size, metric, mean, std, n) in &summary {
        let _ = writeln!(out, "{mode},{size},{metric},{mean:.17e},{std:.17e},{n}");
    }
    std::fs::write(&path, out)?;
    eprintln!(
        "summarized {} rows into {} curve points; wrote {}",
        rows.len(),
        summary.len(),
        path.display()
    );
    Ok(())
}
