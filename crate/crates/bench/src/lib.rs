//! Shared fixtures for the benchmarks.

use sensel::rom_noise::{build_noise_model, fit_rom};
use sensel::synthetic::{generate, SyntheticSpec};
use sensel::{NoiseModel, ReducedOrderModel};

/// Synthetic instance with the 1/√k spectrum, `m = 60`, `r1 = 10`, `r2 = 40`.
pub fn instance(n: usize, seed: u64) -> (ReducedOrderModel, NoiseModel) {
    let data = generate(&SyntheticSpec::inverse_sqrt(n, 60, seed)).expect("valid spec");
    let rom = fit_rom(&data, 10, 40).expect("valid ranks");
    let noise = build_noise_model(&rom).expect("nondegenerate noise");
    (rom, noise)
}
