//! Reproducible artificial snapshot matrices `X = U·diag(S)·Vᵀ` with a
//! prescribed spectrum and random orthonormal factors.
//!
//! Randomness comes from ChaCha20 seeded with the user seed. `U` and `V`
//! draw from independent streams of that generator: stream 0 for `U`,
//! stream 1 for `V`. Normal variates use `rand_distr::StandardNormal`, so a
//! given seed yields the same matrix on every platform.

use nalgebra::QR;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rom_noise::SnapshotMatrix;
use crate::{Matrix, Vector};

const STREAM_U: u64 = 0;
const STREAM_V: u64 = 1;

/// Singular value profile of the generated data.
#[derive(Debug, Clone, PartialEq)]
pub enum Spectrum {
    /// `S_k = 1/√k` for `k = 1..m`.
    InverseSqrt,
    /// Explicit positive, descending values; length must equal `m`.
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub m: usize,
    pub spectrum: Spectrum,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn inverse_sqrt(n: usize, m: usize, seed: u64) -> Self {
        Self { n, m, spectrum: Spectrum::InverseSqrt, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 || self.n < self.m {
            return Err(Error::DimensionError(format!("need n >= m >= 2, got n={}, m={}", self.n, self.m)));
        }
        if let Spectrum::Custom(values) = &self.spectrum {
            if values.len() != self.m {
                return Err(Error::DimensionError(format!(
                    "custom spectrum has {} values for m={}",
                    values.len(),
                    self.m
                )));
            }
            if values.iter().any(|&v| !(v > 0.0) || !v.is_finite()) || values.windows(2).any(|w| w[0] < w[1]) {
                return Err(Error::DimensionError("custom spectrum must be positive and descending".into()));
            }
        }
        Ok(())
    }

    pub fn singular_values(&self) -> Vector {
        match &self.spectrum {
            Spectrum::InverseSqrt => Vector::from_iterator(self.m, (1..=self.m).map(|k| 1.0 / (k as f64).sqrt())),
            Spectrum::Custom(values) => Vector::from_column_slice(values),
        }
    }
}

/// Generated data together with the factors it was built from.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub snapshots: SnapshotMatrix,
    pub u: Matrix,
    pub s: Vector,
    pub v: Matrix,
}

/// Orthonormal `rows × cols` matrix from the QR factorization of a standard
/// normal matrix, with the sign of each column chosen so the triangular
/// factor has a positive diagonal.
pub fn random_orthonormal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    assert!(rows >= cols, "need rows >= cols for orthonormal columns");
    // Column-major fill keeps the draw order independent of the backend.
    let g = Matrix::from_iterator(rows, cols, (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let qr = QR::new(g);
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..cols {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

pub fn generate_with_factors(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    rng.set_stream(STREAM_U);
    let u = random_orthonormal(spec.n, spec.m, &mut rng);
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    rng.set_stream(STREAM_V);
    let v = random_orthonormal(spec.m, spec.m, &mut rng);
    let s = spec.singular_values();
    let mut us = u.clone();
    for (k, mut col) in us.column_iter_mut().enumerate() {
        col *= s[k];
    }
    let snapshots = SnapshotMatrix::new(us * v.transpose())?;
    Ok(SyntheticData { snapshots, u, s, v })
}

/// Snapshot matrix for the given spec; deterministic per seed.
pub fn generate(spec: &SyntheticSpec) -> Result<SnapshotMatrix> {
    Ok(generate_with_factors(spec)?.snapshots)
}
