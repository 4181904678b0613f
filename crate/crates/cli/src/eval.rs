use std::io;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use sensel::estimation::{reconstruct, reconstruction_error, wls_estimator};
use sensel::ingest::make_folds;
use sensel::rom_noise::{build_noise_model, fit_rom};
use sensel::{NoiseModel, SensorSet, SnapshotMatrix};

use crate::data;
use crate::error::CliError;
use crate::DataArgs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseArg {
    /// Low-rank-plus-diagonal model from the truncated modes.
    Correlated,
    /// Unit-variance independent noise.
    White,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Sensor file, one row index per line.
    #[arg(long)]
    sensors: PathBuf,
    #[arg(long)]
    r1: usize,
    #[arg(long)]
    r2: usize,
    /// Cross-validate over this many contiguous folds.
    #[arg(long)]
    folds: Option<usize>,
    /// Noise model used by the estimator and the objective.
    #[arg(long, value_enum, default_value_t = NoiseArg::Correlated)]
    noise: NoiseArg,
    /// Metrics CSV [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldMetrics {
    pub objective: f64,
    pub train_error: f64,
    pub test_error: Option<f64>,
}

/// Fits the model on `train`, estimates with `sensors` and scores both splits.
pub fn evaluate(
    train: &SnapshotMatrix,
    test: Option<&SnapshotMatrix>,
    sensors: &SensorSet,
    r1: usize,
    r2: usize,
    noise: NoiseArg,
) -> Result<FoldMetrics, CliError> {
    let rom = fit_rom(train, r1, r2)?;
    sensors.check_range(rom.n())?;
    let noise = match noise {
        NoiseArg::Correlated => build_noise_model(&rom)?,
        NoiseArg::White => NoiseModel::white(rom.n()),
    };
    let est = wls_estimator(&rom, &noise, sensors)?;
    let score = |x: &SnapshotMatrix| -> Result<f64, CliError> {
        let (_, field) = reconstruct(&est, &rom, x)?;
        Ok(reconstruction_error(x, &field)?)
    };
    Ok(FoldMetrics { objective: est.objective(), train_error: score(train)?, test_error: test.map(score).transpose()? })
}

pub fn run(args: &EvalArgs) -> Result<(), CliError> {
    let (snapshots, _) = data::load(&args.data)?;
    let sensors = data::read_sensors(&args.sensors)?;
    if let Some(&bad) = sensors.indices().iter().find(|&&i| i >= snapshots.n()) {
        return Err(CliError::Data(format!("sensor {bad} exceeds the dataset's {} rows", snapshots.n())));
    }
    let mut rows: Vec<(String, FoldMetrics)> = Vec::new();
    match args.folds {
        None => rows.push(("all".into(), evaluate(&snapshots, None, &sensors, args.r1, args.r2, args.noise)?)),
        Some(k) => {
            let cv = make_folds(snapshots.m(), k)?;
            for (f, (train, test)) in cv.folds.iter().enumerate() {
                let train = snapshots.select_columns(train)?;
                let test = snapshots.select_columns(test)?;
                rows.push((f.to_string(), evaluate(&train, Some(&test), &sensors, args.r1, args.r2, args.noise)?));
            }
            let mean = |g: fn(&FoldMetrics) -> f64| rows.iter().map(|(_, m)| g(m)).sum::<f64>() / k as f64;
            let summary = FoldMetrics {
                objective: mean(|m| m.objective),
                train_error: mean(|m| m.train_error),
                test_error: Some(mean(|m| m.test_error.unwrap_or(f64::NAN))),
            };
            rows.push(("mean".into(), summary));
        }
    }
    let mut w = match &args.out {
        Some(path) => csv::Writer::from_writer(Box::new(std::fs::File::create(path)?) as Box<dyn io::Write>),
        None => csv::Writer::from_writer(Box::new(io::stdout()) as Box<dyn io::Write>),
    };
    w.write_record(["fold", "objective", "train_error", "test_error"])?;
    for (label, m) in &rows {
        w.write_record([
            label.clone(),
            format!("{:.12e}", m.objective),
            format!("{:.12e}", m.train_error),
            m.test_error.map(|e| format!("{e:.12e}")).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
