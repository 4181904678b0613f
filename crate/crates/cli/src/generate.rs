use std::path::PathBuf;

use clap::Args;
use sensel::ingest::{dataset_from_matrix, save_grid};
use sensel::synthetic::{generate, Spectrum, SyntheticSpec};

use crate::data::{format_for, FormatArg};
use crate::error::CliError;

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Spatial points.
    #[arg(long)]
    n: usize,
    /// Snapshots.
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `inv-sqrt` for 1/√k, or a comma-separated descending list.
    #[arg(long, default_value = "inv-sqrt")]
    spectrum: String,
    #[arg(long)]
    out: PathBuf,
    /// Output format [default: from the extension].
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

pub fn parse_spectrum(s: &str) -> Result<Spectrum, CliError> {
    if s == "inv-sqrt" {
        return Ok(Spectrum::InverseSqrt);
    }
    s.split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map(Spectrum::Custom)
        .map_err(|_| CliError::Usage(format!("--spectrum: expected `inv-sqrt` or numbers, got `{s}`")))
}

pub fn run(args: &GenerateArgs) -> Result<(), CliError> {
    let spec = SyntheticSpec { n: args.n, m: args.m, spectrum: parse_spectrum(&args.spectrum)?, seed: args.seed };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let data = generate(&spec)?;
    let ds = dataset_from_matrix(data.values())?;
    save_grid(&ds, &args.out, format_for(&args.out, args.format))?;
    Ok(())
}
