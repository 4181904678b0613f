use std::io;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use clap::{Args, ValueEnum};
use sensel::estimation::{reconstruct, reconstruction_error, wls_estimator};
use sensel::rom_noise::{build_noise_model, fit_rom};
use sensel::synthetic::{generate, SyntheticSpec};
use sensel::{run_method, Method, SolverConfig};

use crate::error::CliError;
use crate::{MethodArg, SolverArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepArg {
    /// Vary the sensor budget.
    P,
    /// Vary the number of spatial points.
    N,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value_t = SweepArg::P)]
    sweep: SweepArg,
    /// Comma-separated values of the swept parameter [default: the fixed value].
    #[arg(long, value_delimiter = ',')]
    values: Vec<usize>,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 60)]
    m: usize,
    #[arg(long, default_value_t = 30)]
    p: usize,
    #[arg(long, default_value_t = 10)]
    r1: usize,
    #[arg(long, default_value_t = 40)]
    r2: usize,
    /// Number of seeds per cell.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed_start: u64,
    /// Comma-separated methods [default: all but the oracle].
    #[arg(long, value_enum, value_delimiter = ',')]
    methods: Vec<MethodArg>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Worker threads; rows come out in the same order for any value.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Long-format results [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-cell means.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Clone)]
struct Row {
    seed: u64,
    method: Method,
    n: usize,
    m: usize,
    p: usize,
    objective: f64,
    recon_error: f64,
    wall_time_s: f64,
    iterations: usize,
    status: String,
}

impl Row {
    fn ok(&self) -> bool {
        self.status == "ok" || self.status == "not_converged"
    }

    fn time_per_iter(&self) -> Option<f64> {
        (self.iterations > 0).then(|| self.wall_time_s / self.iterations as f64)
    }
}

#[derive(Debug, Clone, Copy)]
struct Trial {
    seed: u64,
    n: usize,
    p: usize,
}

pub fn run(args: &BenchArgs) -> Result<(), CliError> {
    let config = args.solver.config()?;
    let methods: Vec<Method> = if args.methods.is_empty() {
        Method::ALL.into_iter().filter(|&m| m != Method::Oracle).collect()
    } else {
        args.methods.iter().map(|&m| m.into()).collect()
    };
    let values = if args.values.is_empty() {
        vec![match args.sweep {
            SweepArg::P => args.p,
            SweepArg::N => args.n,
        }]
    } else {
        args.values.clone()
    };
    if args.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let trials: Vec<Trial> = values
        .iter()
        .flat_map(|&v| {
            (args.seed_start..args.seed_start + args.seeds).map(move |seed| match args.sweep {
                SweepArg::P => Trial { seed, n: args.n, p: v },
                SweepArg::N => Trial { seed, n: v, p: args.p },
            })
        })
        .collect();

    let results: Mutex<Vec<Option<Vec<Row>>>> = Mutex::new(vec![None; trials.len()]);
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..args.jobs.min(trials.len()).max(1) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&trial) = trials.get(i) else { break };
                let rows = run_trial(trial, args, &methods, &config);
                results.lock().expect("no worker panicked")[i] = Some(rows);
            });
        }
    });
    let rows: Vec<Row> = results.into_inner().expect("no worker panicked").into_iter().flatten().flatten().collect();

    let mut w = match &args.out {
        Some(path) => csv::Writer::from_writer(Box::new(std::fs::File::create(path)?) as Box<dyn io::Write>),
        None => csv::Writer::from_writer(Box::new(io::stdout()) as Box<dyn io::Write>),
    };
    w.write_record([
        "seed",
        "method",
        "n",
        "m",
        "p",
        "objective",
        "recon_error",
        "wall_time_s",
        "iterations",
        "time_per_iter_s",
        "status",
    ])?;
    for r in &rows {
        w.write_record([
            r.seed.to_string(),
            r.method.to_string(),
            r.n.to_string(),
            r.m.to_string(),
            r.p.to_string(),
            format!("{:.12e}", r.objective),
            format!("{:.12e}", r.recon_error),
            format!("{:.6e}", r.wall_time_s),
            r.iterations.to_string(),
            r.time_per_iter().map(|t| format!("{t:.6e}")).unwrap_or_default(),
            r.status.clone(),
        ])?;
    }
    w.flush()?;
    if let Some(path) = &args.summary {
        write_summary(path, &rows)?;
    }
    Ok(())
}

fn run_trial(trial: Trial, args: &BenchArgs, methods: &[Method], config: &SolverConfig) -> Vec<Row> {
    let row = |method, status: String| Row {
        seed: trial.seed,
        method,
        n: trial.n,
        m: args.m,
        p: trial.p,
        objective: f64::NAN,
        recon_error: f64::NAN,
        wall_time_s: f64::NAN,
        iterations: 0,
        status,
    };
    let setup = generate(&SyntheticSpec::inverse_sqrt(trial.n, args.m, trial.seed)).and_then(|x| {
        let rom = fit_rom(&x, args.r1, args.r2)?;
        let noise = build_noise_model(&rom)?;
        Ok((x, rom, noise))
    });
    let (x, rom, noise) = match setup {
        Ok(s) => s,
        Err(e) => return methods.iter().map(|&m| row(m, status_of(&e))).collect(),
    };
    methods
        .iter()
        .map(|&method| {
            let started = Instant::now();
            let outcome = run_method(method, &rom, &noise, trial.p, config);
            let wall = started.elapsed().as_secs_f64();
            let scored = outcome.and_then(|o| {
                let est = wls_estimator(&rom, &noise, &o.sensors)?;
                let (_, field) = reconstruct(&est, &rom, &x)?;
                Ok((reconstruction_error(&x, &field)?, o))
            });
            match scored {
                Ok((err, o)) => Row {
                    objective: o.objective,
                    recon_error: err,
                    wall_time_s: wall,
                    iterations: o.iterations,
                    status: if o.converged { "ok".into() } else { "not_converged".into() },
                    ..row(method, String::new())
                },
                Err(e) => row(method, status_of(&e)),
            }
        })
        .collect()
}

fn status_of(e: &sensel::Error) -> String {
    format!("error: {e}").replace([',', '\n'], ";")
}

/// Summary cell: method, n, m, p.
type CellKey = (Method, usize, usize, usize);

fn write_summary(path: &PathBuf, rows: &[Row]) -> Result<(), CliError> {
    let mut cells: Vec<(CellKey, Vec<&Row>)> = Vec::new();
    for r in rows {
        let key = (r.method, r.n, r.m, r.p);
        match cells.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => cells.push((key, vec![r])),
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "method",
        "n",
        "m",
        "p",
        "trials",
        "ok",
        "mean_objective",
        "mean_recon_error",
        "mean_wall_time_s",
        "mean_iterations",
        "median_time_per_iter_s",
    ])?;
    for ((method, n, m, p), group) in cells {
        let ok: Vec<&Row> = group.iter().copied().filter(|r| r.ok()).collect();
        let mean = |f: fn(&Row) -> f64| {
            if ok.is_empty() {
                f64::NAN
            } else {
                ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
            }
        };
        let mut per_iter: Vec<f64> = ok.iter().filter_map(|r| r.time_per_iter()).collect();
        per_iter.sort_by(f64::total_cmp);
        let median = match per_iter.len() {
            0 => None,
            k if k % 2 == 1 => Some(per_iter[k / 2]),
            k => Some(0.5 * (per_iter[k / 2 - 1] + per_iter[k / 2])),
        };
        w.write_record([
            method.to_string(),
            n.to_string(),
            m.to_string(),
            p.to_string(),
            group.len().to_string(),
            ok.len().to_string(),
            format!("{:.12e}", mean(|r| r.objective)),
            format!("{:.12e}", mean(|r| r.recon_error)),
            format!("{:.6e}", mean(|r| r.wall_time_s)),
            format!("{:.1}", mean(|r| r.iterations as f64)),
            median.map(|t| format!("{t:.6e}")).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
