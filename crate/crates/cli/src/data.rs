use std::fs;
use std::io::Write;
use std::path::Path;

use clap::ValueEnum;
use sensel::ingest::{load_grid, to_snapshots, GridFormat, IndexMap};
use sensel::{SensorSet, SnapshotMatrix};

use crate::error::CliError;
use crate::DataArgs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Binary,
    Csv,
}

pub fn format_for(path: &Path, explicit: Option<FormatArg>) -> GridFormat {
    match explicit {
        Some(FormatArg::Binary) => GridFormat::Binary,
        Some(FormatArg::Csv) => GridFormat::Csv,
        None => GridFormat::from_path(path),
    }
}

pub fn load(args: &DataArgs) -> Result<(SnapshotMatrix, IndexMap), CliError> {
    let ds = load_grid(&args.data, format_for(&args.data, args.format))?;
    Ok(to_snapshots(&ds, args.center)?)
}

/// Reads one index per line; blank lines and `#` comments are skipped.
pub fn read_sensors(path: &Path) -> Result<SensorSet, CliError> {
    let text = fs::read_to_string(path)?;
    let mut idx = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let i = line
            .parse::<usize>()
            .map_err(|_| CliError::Data(format!("{}:{}: `{line}` is not a row index", path.display(), no + 1)))?;
        idx.push(i);
    }
    Ok(SensorSet::new(idx)?)
}

pub fn write_sensors(out: &mut dyn Write, sensors: &SensorSet) -> std::io::Result<()> {
    for i in sensors.indices() {
        writeln!(out, "{i}")?;
    }
    Ok(())
}
