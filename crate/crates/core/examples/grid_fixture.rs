//! Writes the masked 30×40 grid used by the real-data acceptance check.
//!
//! ```text
//! cargo run --release -p sensel-core --example grid_fixture -- OUT [--eval]
//! ```

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use sensel::ingest::{make_folds, save_grid, to_snapshots, GridFormat, GriddedDataset};
use sensel::{Matrix, Method, SolverConfig};

const NY: usize = 30;
const NX: usize = 40;
const M: usize = 120;
const SEED: u64 = 20;

fn normal(rng: &mut ChaCha20Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn land(iy: usize, ix: usize) -> bool {
    let (y, x) = (iy as f64, ix as f64);
    let west = x < 4.0 + 3.0 * (y / 5.0).sin().abs() && y > 6.0;
    let east = x > 34.0 - 0.15 * (y - 15.0).abs() && y < 20.0;
    let island = (y - 21.0).powi(2) / 9.0 + (x - 16.0).powi(2) / 16.0 < 1.0;
    west || east || island
}

fn build() -> GriddedDataset {
    let mut rng = ChaCha20Rng::seed_from_u64(SEED);
    let lat: Vec<f64> = (0..NY).map(|i| -29.0 + 2.0 * i as f64).collect();
    let lon: Vec<f64> = (0..NX).map(|j| 121.0 + 4.0 * j as f64).collect();

    // Smooth anomaly patterns with decaying amplitude and AR(1) coefficients.
    let k = 60;
    let blobs: Vec<(f64, f64, f64, f64)> = (0..k)
        .map(|i| {
            let amp = 1.5 / (1.0 + i as f64).sqrt();
            (rng.random_range(0.0..NY as f64), rng.random_range(0.0..NX as f64), rng.random_range(2.0..7.0), amp)
        })
        .collect();
    let mut coef = vec![0.0; k];
    let mut enso = 0.0;
    let mut frames = Vec::with_capacity(M);
    for t in 0..M {
        enso = 0.9 * enso + 0.45 * normal(&mut rng);
        for c in coef.iter_mut() {
            *c = 0.6 * *c + 0.8 * normal(&mut rng);
        }
        let season = 2.0 * PI * t as f64 / 12.0;
        let frame = Matrix::from_fn(NY, NX, |iy, ix| {
            if land(iy, ix) {
                return f64::NAN;
            }
            let (y, x) = (iy as f64, ix as f64);
            let phi = (lat[iy]).to_radians();
            let base = 28.0 - 8.0 * phi.sin().powi(2) - 0.05 * x;
            let seasonal = 3.0 * phi.sin() * season.cos() + 0.5 * (season + x / 10.0).sin();
            let warm = enso * 2.0 * (-((y - 14.5) / 4.0).powi(2) - ((x - 26.0) / 9.0).powi(2)).exp();
            let eddies: f64 = blobs
                .iter()
                .zip(&coef)
                .map(|(&(cy, cx, l, a), &c)| a * c * (-((y - cy).powi(2) + (x - cx).powi(2)) / (2.0 * l * l)).exp())
                .sum();
            base + seasonal + warm + eddies
        });
        frames.push(frame);
    }
    // Independent sensor-level jitter.
    for f in frames.iter_mut() {
        for v in f.iter_mut().filter(|v| v.is_finite()) {
            *v += 0.05 * normal(&mut rng);
        }
    }
    let times = (0..M).map(|t| format!("{}-{:02}", 1990 + t / 12, t % 12 + 1)).collect();
    GriddedDataset::new(lat, lon, frames, times).expect("consistent grid")
}

fn evaluate(ds: &GriddedDataset) {
    let (x, map) = to_snapshots(ds, false).expect("valid cells");
    println!("n = {}, m = {}", x.n(), x.m());
    let (r1, r2, p) = (10, 40, 30);
    let cv = make_folds(x.m(), 5).expect("folds");
    let methods = [Method::AdmmCn, Method::AdmmWn, Method::GreedyWn, Method::GreedyCn];
    for method in methods {
        let (mut err, mut nn) = (0.0, 0.0);
        for (train, test) in &cv.folds {
            let (train, test) = (x.select_columns(train).unwrap(), x.select_columns(test).unwrap());
            let rom = sensel::rom_noise::fit_rom(&train, r1, r2).unwrap();
            let noise = sensel::rom_noise::build_noise_model(&rom).unwrap();
            let out = sensel::run_method(method, &rom, &noise, p, &SolverConfig::default()).unwrap();
            let est = sensel::estimation::wls_estimator(&rom, &noise, &out.sensors).unwrap();
            let (_, field) = sensel::estimation::reconstruct(&est, &rom, &test).unwrap();
            err += sensel::estimation::reconstruction_error(&test, &field).unwrap() / 5.0;
            nn += map.mean_nearest_neighbor_distance(&out.sensors).unwrap() / 5.0;
        }
        println!("{method}: test error {err:.5e}, nn distance {nn:.3}");
    }
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out = args.first().expect("usage: grid_fixture OUT [--eval]");
    let ds = build();
    save_grid(&ds, Path::new(out), GridFormat::Binary).expect("write fixture");
    if args.iter().any(|a| a == "--eval") {
        evaluate(&ds);
    }
}
