use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use sensel::estimation::{reconstruct, reconstruction_error, wls_estimator, Estimator};
use sensel::ingest::{make_folds, IndexMap};
use sensel::rom_noise::{build_noise_model, fit_rom};
use sensel::{run_method, Method, MethodOutcome, ReducedOrderModel, SnapshotMatrix, TraceRecord};

use crate::data::{self, write_sensors};
use crate::error::CliError;
use crate::{DataArgs, MethodArg, SolverArgs};

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Number of sensors.
    #[arg(long)]
    p: usize,
    /// Latent modes estimated from the sensors.
    #[arg(long)]
    r1: usize,
    /// Modes kept in the noise model (r1 < r2 ≤ m).
    #[arg(long)]
    r2: usize,
    #[command(flatten)]
    solver: SolverArgs,
    /// Split the snapshots into this many contiguous folds ...
    #[arg(long, requires = "fold")]
    folds: Option<usize>,
    /// ... and train on all but this one (0-based); it is used for the test error.
    #[arg(long, requires = "folds")]
    fold: Option<usize>,
    /// Sensor indices, one per line [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
    /// ADMM iteration trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Run metadata as `key=value` lines [default: stderr].
    #[arg(long)]
    meta: Option<PathBuf>,
    /// Grid cells of the selected rows as CSV.
    #[arg(long)]
    cells: Option<PathBuf>,
    /// With `--method oracle`: also run every other method and check that
    /// none beats the exhaustive optimum.
    #[arg(long)]
    n_check: bool,
}

pub fn run(args: &SelectArgs) -> Result<(), CliError> {
    let method = Method::from(args.method);
    if args.n_check && method != Method::Oracle {
        return Err(CliError::Usage("--n-check requires --method oracle".into()));
    }
    let config = args.solver.config()?;
    let (snapshots, map) = data::load(&args.data)?;
    let (train, test) = split(&snapshots, args.folds, args.fold)?;

    let rom = fit_rom(&train, args.r1, args.r2)?;
    let noise = build_noise_model(&rom)?;
    let started = Instant::now();
    let outcome = run_method(method, &rom, &noise, args.p, &config)?;
    let wall = started.elapsed().as_secs_f64();

    let estimator = wls_estimator(&rom, &noise, &outcome.sensors)?;
    let train_error = error_on(&estimator, &rom, &train)?;
    let test_error = test.as_ref().map(|t| error_on(&estimator, &rom, t)).transpose()?;

    let mut meta = vec![
        ("method", method.to_string()),
        ("n", rom.n().to_string()),
        ("m", train.m().to_string()),
        ("p", args.p.to_string()),
        ("r1", args.r1.to_string()),
        ("r2", args.r2.to_string()),
        ("objective", format!("{:.12e}", outcome.objective)),
        ("train_error", format!("{train_error:.12e}")),
    ];
    if let Some(e) = test_error {
        meta.push(("test_error", format!("{e:.12e}")));
    }
    meta.push(("wall_time_s", format!("{wall:.6}")));
    if method.is_admm() {
        meta.push(("iterations", outcome.iterations.to_string()));
        meta.push(("converged", outcome.converged.to_string()));
        if !outcome.converged {
            eprintln!("warning: ADMM stopped at max_iters={} before converging", config.max_iters);
        }
    }

    if args.n_check {
        n_check(&outcome, &rom, &noise, args.p, &config)?;
    }

    match &args.out {
        Some(path) => {
            let mut f = BufWriter::new(File::create(path)?);
            write_sensors(&mut f, &outcome.sensors)?;
            f.flush()?;
        }
        None => write_sensors(&mut io::stdout().lock(), &outcome.sensors)?,
    }
    match &args.meta {
        Some(path) => {
            let mut f = BufWriter::new(File::create(path)?);
            write_meta(&mut f, &meta)?;
            f.flush()?;
        }
        None => write_meta(&mut io::stderr().lock(), &meta)?,
    }
    if let Some(path) = &args.trace {
        write_trace(path, &outcome.trace)?;
    }
    if let Some(path) = &args.cells {
        write_cells(path, &outcome, &map)?;
    }
    Ok(())
}

/// Training and optional test snapshots.
pub fn split(
    snapshots: &SnapshotMatrix,
    folds: Option<usize>,
    fold: Option<usize>,
) -> Result<(SnapshotMatrix, Option<SnapshotMatrix>), CliError> {
    match (folds, fold) {
        (Some(k), Some(f)) => {
            let cv = make_folds(snapshots.m(), k)?;
            let (train, test) =
                cv.folds.get(f).ok_or_else(|| CliError::Usage(format!("--fold {f} out of range for {k} folds")))?;
            Ok((snapshots.select_columns(train)?, Some(snapshots.select_columns(test)?)))
        }
        _ => Ok((snapshots.clone(), None)),
    }
}

fn error_on(est: &Estimator, rom: &ReducedOrderModel, x: &SnapshotMatrix) -> Result<f64, CliError> {
    let (_, field) = reconstruct(est, rom, x)?;
    Ok(reconstruction_error(x, &field)?)
}

fn n_check(
    best: &MethodOutcome,
    rom: &ReducedOrderModel,
    noise: &sensel::NoiseModel,
    p: usize,
    config: &sensel::SolverConfig,
) -> Result<(), CliError> {
    let mut failed = Vec::new();
    for method in Method::ALL.into_iter().filter(|&m| m != Method::Oracle) {
        let other = run_method(method, rom, noise, p, config)?;
        let ok = best.objective <= other.objective * (1.0 + 1e-12);
        eprintln!(
            "n-check {method}: objective {:.12e} {} oracle {:.12e}",
            other.objective,
            if ok { ">=" } else { "<" },
            best.objective
        );
        if !ok {
            failed.push(method.name());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numerical(format!("exhaustive optimum beaten by {}", failed.join(", "))))
    }
}

fn write_meta(out: &mut dyn Write, meta: &[(&str, String)]) -> io::Result<()> {
    for (k, v) in meta {
        writeln!(out, "{k}={v}")?;
    }
    Ok(())
}

pub fn write_trace(path: &PathBuf, trace: &[TraceRecord]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "gamma", "objective", "residual", "active_rows"])?;
    for t in trace {
        w.write_record([
            t.iteration.to_string(),
            format!("{:e}", t.gamma),
            format!("{:e}", t.objective),
            format!("{:e}", t.residual),
            t.active_rows.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_cells(path: &PathBuf, outcome: &MethodOutcome, map: &IndexMap) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["row", "iy", "ix"])?;
    for &r in outcome.sensors.indices() {
        let (iy, ix) = map.cell(r).expect("sensor rows come from the map");
        w.write_record([r.to_string(), iy.to_string(), ix.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
