//! Gridded spatio-temporal data: loading, masking, snapshot matrices and
//! cross-validation folds.
//!
//! Two on-disk formats are understood; see `FORMATS.md` at the repository
//! root for the byte layout.
//!
//! * Binary: magic `SSEL1`, then `ny`, `nx`, `nt` as little-endian `u32`,
//!   `ny` latitudes and `nx` longitudes as little-endian `f64`, then `nt`
//!   frames of `ny × nx` little-endian `f64` values, each frame row-major
//!   (latitude-major). NaN marks a masked cell.
//! * CSV: header `time,lat,lon,value`, one line per cell and frame. Empty or
//!   `NaN` values and cells that never appear are masked.
//!
//! A cell is valid when it is finite in every frame. Snapshot rows follow
//! the valid cells in row-major order.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimation::SensorSet;
use crate::rom_noise::SnapshotMatrix;
use crate::Matrix;

pub const MAGIC: &[u8; 5] = b"SSEL1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridFormat {
    Binary,
    Csv,
}

impl GridFormat {
    /// `.csv` files are CSV, everything else binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => GridFormat::Csv,
            _ => GridFormat::Binary,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GriddedDataset {
    lat: Vec<f64>,
    lon: Vec<f64>,
    /// `ny × nx`, true where every frame is finite.
    mask: Vec<bool>,
    /// `ny × nx` grids in time order.
    frames: Vec<Matrix>,
    times: Vec<String>,
}

impl GriddedDataset {
    /// Builds a dataset and infers the mask. Every frame must be
    /// `lat.len() × lon.len()`.
    pub fn new(lat: Vec<f64>, lon: Vec<f64>, frames: Vec<Matrix>, times: Vec<String>) -> Result<Self> {
        let shape = (lat.len(), lon.len());
        if shape.0 == 0 || shape.1 == 0 {
            return Err(Error::InconsistentGrid("grid has no cells".into()));
        }
        if frames.is_empty() {
            return Err(Error::InconsistentGrid("dataset has no frames".into()));
        }
        if times.len() != frames.len() {
            return Err(Error::InconsistentGrid(format!("{} time labels for {} frames", times.len(), frames.len())));
        }
        if let Some((t, f)) = frames.iter().enumerate().find(|(_, f)| f.shape() != shape) {
            return Err(Error::InconsistentGrid(format!(
                "frame {t} is {}×{}, grid is {}×{}",
                f.nrows(),
                f.ncols(),
                shape.0,
                shape.1
            )));
        }
        let (ny, nx) = shape;
        let mask = (0..ny * nx).map(|c| frames.iter().all(|f| f[(c / nx, c % nx)].is_finite())).collect();
        Ok(Self { lat, lon, mask, frames, times })
    }

    pub fn lat(&self) -> &[f64] {
        &self.lat
    }

    pub fn lon(&self) -> &[f64] {
        &self.lon
    }

    /// `(ny, nx)`
    pub fn shape(&self) -> (usize, usize) {
        (self.lat.len(), self.lon.len())
    }

    pub fn is_valid(&self, iy: usize, ix: usize) -> bool {
        self.mask[iy * self.lon.len() + ix]
    }

    pub fn frames(&self) -> &[Matrix] {
        &self.frames
    }

    pub fn times(&self) -> &[String] {
        &self.times
    }

    /// Number of valid cells.
    pub fn n(&self) -> usize {
        self.mask.iter().filter(|&&v| v).count()
    }

    /// Number of frames.
    pub fn m(&self) -> usize {
        self.frames.len()
    }
}

/// Bijection between snapshot rows and valid grid cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexMap {
    shape: (usize, usize),
    cells: Vec<(usize, usize)>,
    rows: HashMap<(usize, usize), usize>,
}

impl IndexMap {
    fn from_mask(ds: &GriddedDataset) -> Self {
        let (ny, nx) = ds.shape();
        let cells: Vec<_> =
            (0..ny).flat_map(|iy| (0..nx).map(move |ix| (iy, ix))).filter(|&(iy, ix)| ds.is_valid(iy, ix)).collect();
        let rows = cells.iter().enumerate().map(|(r, &c)| (c, r)).collect();
        Self { shape: (ny, nx), cells, rows }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn grid_shape(&self) -> (usize, usize) {
        self.shape
    }

    /// `(iy, ix)` of snapshot row `row`.
    pub fn cell(&self, row: usize) -> Option<(usize, usize)> {
        self.cells.get(row).copied()
    }

    /// Snapshot row of a grid cell, `None` if it is masked.
    pub fn row(&self, iy: usize, ix: usize) -> Option<usize> {
        self.rows.get(&(iy, ix)).copied()
    }

    /// Mean Euclidean grid distance (in cell units) from every sensor to its
    /// nearest other sensor. Zero for fewer than two sensors.
    pub fn mean_nearest_neighbor_distance(&self, sensors: &SensorSet) -> Result<f64> {
        sensors.check_range(self.len())?;
        let pts: Vec<(f64, f64)> = sensors
            .indices()
            .iter()
            .map(|&r| {
                let (iy, ix) = self.cells[r];
                (iy as f64, ix as f64)
            })
            .collect();
        if pts.len() < 2 {
            return Ok(0.0);
        }
        let total: f64 = pts
            .iter()
            .enumerate()
            .map(|(i, a)| {
                pts.iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, b)| (a.0 - b.0).hypot(a.1 - b.1))
                    .fold(f64::INFINITY, f64::min)
            })
            .sum();
        Ok(total / pts.len() as f64)
    }
}

/// Valid cells stacked into an `n × m` matrix, without the snapshot-matrix
/// size checks.
pub fn grid_matrix(ds: &GriddedDataset, center: bool) -> Result<(Matrix, IndexMap)> {
    let map = IndexMap::from_mask(ds);
    if map.is_empty() {
        return Err(Error::EmptyMask);
    }
    let mut x = Matrix::from_fn(map.len(), ds.m(), |r, t| {
        let (iy, ix) = map.cells[r];
        ds.frames[t][(iy, ix)]
    });
    if center {
        for mut row in x.row_iter_mut() {
            let mean = row.mean();
            row.add_scalar_mut(-mean);
        }
    }
    Ok((x, map))
}

/// Snapshot matrix with one row per valid cell and one column per frame.
/// `center` subtracts the temporal mean of every row.
pub fn to_snapshots(ds: &GriddedDataset, center: bool) -> Result<(SnapshotMatrix, IndexMap)> {
    let (x, map) = grid_matrix(ds, center)?;
    Ok((SnapshotMatrix::new(x)?, map))
}

/// Wraps an `n × m` matrix as a `1 × n` grid with `m` frames, so that
/// synthetic data can go through the same file format.
pub fn dataset_from_matrix(x: &Matrix) -> Result<GriddedDataset> {
    let (n, m) = x.shape();
    let frames = (0..m).map(|t| Matrix::from_row_slice(1, n, x.column(t).as_slice())).collect();
    GriddedDataset::new(vec![0.0], (0..n).map(|i| i as f64).collect(), frames, (0..m).map(|t| t.to_string()).collect())
}

pub fn load_grid(path: &Path, format: GridFormat) -> Result<GriddedDataset> {
    let file = File::open(path)?;
    match format {
        GridFormat::Binary => read_binary(BufReader::new(file)),
        GridFormat::Csv => read_csv(BufReader::new(file)),
    }
}

pub fn save_grid(ds: &GriddedDataset, path: &Path, format: GridFormat) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        GridFormat::Binary => write_binary(ds, &mut out)?,
        GridFormat::Csv => write_csv(ds, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

pub fn write_binary<W: Write>(ds: &GriddedDataset, out: &mut W) -> Result<()> {
    let (ny, nx) = ds.shape();
    out.write_all(MAGIC)?;
    for d in [ny, nx, ds.m()] {
        let d = u32::try_from(d).map_err(|_| Error::DimensionError(format!("dimension {d} exceeds u32")))?;
        out.write_all(&d.to_le_bytes())?;
    }
    for v in ds.lat.iter().chain(&ds.lon) {
        out.write_all(&v.to_le_bytes())?;
    }
    for f in &ds.frames {
        for iy in 0..ny {
            for ix in 0..nx {
                out.write_all(&f[(iy, ix)].to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut input: R) -> Result<GriddedDataset> {
    let mut magic = [0u8; 5];
    input.read_exact(&mut magic).map_err(|_| Error::Parse("file too short for header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Parse("missing SSEL1 magic bytes".into()));
    }
    let mut dims = [0usize; 3];
    for d in &mut dims {
        let mut b = [0u8; 4];
        input.read_exact(&mut b).map_err(|_| Error::Parse("truncated header".into()))?;
        *d = u32::from_le_bytes(b) as usize;
    }
    let [ny, nx, nt] = dims;
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    let expected = (ny + nx + nt * ny * nx) * 8;
    if rest.len() != expected {
        return Err(Error::InconsistentGrid(format!(
            "{ny}×{nx} grid with {nt} frames needs {expected} data bytes, found {}",
            rest.len()
        )));
    }
    let mut vals = rest.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    let lat: Vec<f64> = vals.by_ref().take(ny).collect();
    let lon: Vec<f64> = vals.by_ref().take(nx).collect();
    let frames = (0..nt).map(|_| Matrix::from_row_iterator(ny, nx, vals.by_ref().take(ny * nx))).collect();
    GriddedDataset::new(lat, lon, frames, (0..nt).map(|t| t.to_string()).collect())
}

fn write_csv<W: Write>(ds: &GriddedDataset, out: &mut W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(["time", "lat", "lon", "value"]).map_err(csv_err)?;
    let (ny, nx) = ds.shape();
    for (t, f) in ds.frames.iter().enumerate() {
        for iy in 0..ny {
            for ix in 0..nx {
                let v = f[(iy, ix)];
                let v = if v.is_nan() { String::from("NaN") } else { format!("{v:e}") };
                w.write_record([ds.times[t].clone(), format!("{:e}", ds.lat[iy]), format!("{:e}", ds.lon[ix]), v])
                    .map_err(csv_err)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<GriddedDataset> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Parse(format!("missing column `{name}`")))
    };
    let (ct, cy, cx, cv) = (col("time")?, col("lat")?, col("lon")?, col("value")?);

    let mut times: Vec<String> = Vec::new();
    let mut time_index: HashMap<String, usize> = HashMap::new();
    let mut records: Vec<(usize, f64, f64, f64)> = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let num = |c: usize, what: &str| -> Result<f64> {
            let s = rec.get(c).unwrap_or("");
            if what == "value" && (s.is_empty() || s.eq_ignore_ascii_case("nan")) {
                return Ok(f64::NAN);
            }
            s.parse::<f64>().map_err(|_| Error::Parse(format!("line {}: bad {what} `{s}`", line + 2)))
        };
        let t = rec.get(ct).unwrap_or("").to_string();
        let ti = *time_index.entry(t.clone()).or_insert_with(|| {
            times.push(t);
            times.len() - 1
        });
        records.push((ti, num(cy, "lat")?, num(cx, "lon")?, num(cv, "value")?));
    }
    if records.is_empty() {
        return Err(Error::Parse("no data rows".into()));
    }

    let axis = |pick: fn(&(usize, f64, f64, f64)) -> f64| -> Vec<f64> {
        let set: BTreeSet<u64> = records.iter().map(|r| ordered_bits(pick(r))).collect();
        set.into_iter().map(from_ordered_bits).collect()
    };
    let lat = axis(|r| r.1);
    let lon = axis(|r| r.2);
    let find = |axis: &[f64], v: f64| axis.binary_search_by(|a| a.total_cmp(&v)).expect("value is on its axis");

    let (ny, nx) = (lat.len(), lon.len());
    let mut frames = vec![Matrix::from_element(ny, nx, f64::NAN); times.len()];
    let mut seen = vec![vec![false; ny * nx]; times.len()];
    for &(t, y, x, v) in &records {
        let (iy, ix) = (find(&lat, y), find(&lon, x));
        if std::mem::replace(&mut seen[t][iy * nx + ix], true) {
            return Err(Error::InconsistentGrid(format!("time `{}` lists cell ({y}, {x}) twice", times[t])));
        }
        frames[t][(iy, ix)] = v;
    }
    if let Some(t) = seen.iter().position(|s| *s != seen[0]) {
        return Err(Error::InconsistentGrid(format!(
            "time `{}` covers different cells than time `{}`",
            times[t], times[0]
        )));
    }
    GriddedDataset::new(lat, lon, frames, times)
}

// Order-preserving map from f64 to u64, for collecting distinct coordinates.
fn ordered_bits(v: f64) -> u64 {
    let b = v.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

fn from_ordered_bits(b: u64) -> f64 {
    f64::from_bits(if b >> 63 == 1 { b & !(1 << 63) } else { !b })
}

/// Train/test column indices for each fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CvSplit {
    pub fold_count: usize,
    pub folds: Vec<(Vec<usize>, Vec<usize>)>,
}

/// `k` contiguous test blocks over `m` columns. The first `m mod k` blocks
/// get one extra column.
pub fn make_folds(m: usize, k: usize) -> Result<CvSplit> {
    if k < 2 || m < k {
        return Err(Error::BadFoldCount { k, m });
    }
    let (base, extra) = (m / k, m % k);
    let mut start = 0;
    let folds = (0..k)
        .map(|f| {
            let len = base + usize::from(f < extra);
            let test: Vec<usize> = (start..start + len).collect();
            let train = (0..start).chain(start + len..m).collect();
            start += len;
            (train, test)
        })
        .collect();
    Ok(CvSplit { fold_count: k, folds })
}
