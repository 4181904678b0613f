//! Reduced-order model and low-rank correlated-noise covariance.
//!
//! A snapshot matrix `X ∈ R^{n×m}` is factored by a thin SVD. The leading
//! `r1` left singular vectors span the signal; everything past `r1` is
//! treated as measurement noise. The noise covariance keeps the modes
//! `r1..r2` as a low-rank factor and folds the remaining modes `r2..m` into
//! a diagonal correction so that the diagonal of the covariance is exact:
//!
//! ```text
//! R ≈ UQ·diag(SQ²)·UQᵀ + diag(ΔS),   ΔS_i = Σ_{k ≥ r2} U_ik² S_k²
//! ```
//!
//! No `n×n` matrix is ever formed outside of the explicit test helpers.

use nalgebra::SVD;

use crate::error::{Error, Result};
use crate::estimation::SensorSet;
use crate::linalg::symmetrize;
use crate::{Matrix, Vector};

/// Negative `ΔS` entries down to this value are rounding and clamp to zero.
const DELTA_S_TOLERANCE: f64 = 1e-12;
/// Relative floor applied to the noise variances.
const RD_RELATIVE_FLOOR: f64 = 1e-14;

/// Field snapshots, one column per time sample and one row per spatial point.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix(Matrix);

impl SnapshotMatrix {
    pub fn new(values: Matrix) -> Result<Self> {
        if values.nrows() < 1 || values.ncols() < 2 {
            return Err(Error::DimensionError(format!(
                "snapshot matrix must be at least 1×2, got {}×{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::DimensionError("snapshot matrix contains non-finite entries".into()));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &Matrix {
        &self.0
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }

    /// Number of spatial points.
    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    /// Number of snapshots.
    pub fn m(&self) -> usize {
        self.0.ncols()
    }

    /// Keeps the given columns, in order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&c) = cols.iter().find(|&&c| c >= self.m()) {
            return Err(Error::DimensionMismatch(format!("column {c} out of range for {} snapshots", self.m())));
        }
        Self::new(self.0.select_columns(cols))
    }
}

/// Thin SVD factors of a snapshot matrix, split at the signal rank `r1` and
/// the noise-model rank `r2`.
#[derive(Debug, Clone)]
pub struct ReducedOrderModel {
    u: Matrix,
    s: Vector,
    v: Matrix,
    r1: usize,
    r2: usize,
}

impl ReducedOrderModel {
    /// Assembles a model from precomputed factors. `s` must be descending
    /// and nonnegative, `u` and `v` must have `s.len()` columns.
    pub fn from_factors(u: Matrix, s: Vector, v: Matrix, r1: usize, r2: usize) -> Result<Self> {
        let k = s.len();
        if u.ncols() != k || v.ncols() != k {
            return Err(Error::DimensionError(format!(
                "factor shapes disagree: U {}×{}, S {}, V {}×{}",
                u.nrows(),
                u.ncols(),
                k,
                v.nrows(),
                v.ncols()
            )));
        }
        if s.iter().any(|&x| !(x >= 0.0)) || s.as_slice().windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::DimensionError("singular values must be nonnegative and descending".into()));
        }
        check_ranks(r1, r2, k)?;
        Ok(Self { u, s, v, r1, r2 })
    }

    /// All left singular vectors, `n × k`.
    pub fn u(&self) -> &Matrix {
        &self.u
    }

    pub fn s(&self) -> &Vector {
        &self.s
    }

    pub fn v(&self) -> &Matrix {
        &self.v
    }

    pub fn r1(&self) -> usize {
        self.r1
    }

    pub fn r2(&self) -> usize {
        self.r2
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    /// Number of retained SVD factors, `min(n, m)`.
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// The sensor candidate matrix `U_{1:r1}` (`n × r1`).
    pub fn modes(&self) -> Matrix {
        self.u.columns(0, self.r1).into_owned()
    }

    /// Same factors with different split ranks.
    pub fn with_ranks(&self, r1: usize, r2: usize) -> Result<Self> {
        check_ranks(r1, r2, self.rank())?;
        Ok(Self { r1, r2, ..self.clone() })
    }
}

fn check_ranks(r1: usize, r2: usize, k: usize) -> Result<()> {
    if r1 < 1 || r1 >= r2 || r2 > k {
        return Err(Error::RankOutOfRange(format!("need 1 <= r1 < r2 <= {k}, got r1={r1}, r2={r2}")));
    }
    Ok(())
}

/// Thin SVD of the snapshots with singular values sorted descending.
pub fn fit_rom(data: &SnapshotMatrix, r1: usize, r2: usize) -> Result<ReducedOrderModel> {
    let k = data.n().min(data.m());
    check_ranks(r1, r2, k)?;
    let svd = SVD::try_new(data.values().clone(), true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::NumericalFailure("SVD did not converge".into()))?;
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let s = Vector::from_iterator(k, order.iter().map(|&j| svd.singular_values[j]));
    let u = u.select_columns(&order);
    let v = v_t.transpose().select_columns(&order);
    Ok(ReducedOrderModel { u, s, v, r1, r2 })
}

/// Low-rank plus diagonal noise covariance `R = UQ·diag(SQ²)·UQᵀ + diag(ΔS)`
/// together with its diagonal `Rd`.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    uq: Matrix,
    sq: Vector,
    delta_s: Vector,
    rd: Vector,
}

impl NoiseModel {
    /// Builds a model from explicit parts, computing and flooring `Rd`.
    pub fn from_parts(uq: Matrix, sq: Vector, delta_s: Vector) -> Result<Self> {
        if uq.ncols() != sq.len() || uq.nrows() != delta_s.len() {
            return Err(Error::DimensionError(format!(
                "noise factor shapes disagree: UQ {}×{}, SQ {}, ΔS {}",
                uq.nrows(),
                uq.ncols(),
                sq.len(),
                delta_s.len()
            )));
        }
        let mut delta_s = delta_s;
        for d in delta_s.iter_mut() {
            if *d < -DELTA_S_TOLERANCE || !d.is_finite() {
                return Err(Error::NumericalFailure(format!("ΔS entry {d:e} is negative")));
            }
            if *d < 0.0 {
                *d = 0.0;
            }
        }
        let mut rd = delta_s.clone();
        for k in 0..uq.ncols() {
            let s2 = sq[k] * sq[k];
            for (r, u) in rd.iter_mut().zip(uq.column(k).iter()) {
                *r += u * u * s2;
            }
        }
        let max = rd.max();
        // All-zero noise leaves nothing to whiten against.
        if !(max > f64::MIN_POSITIVE) {
            return Err(Error::DegenerateNoise);
        }
        let floor = RD_RELATIVE_FLOOR * max;
        for r in rd.iter_mut() {
            if *r < floor {
                *r = floor;
            }
        }
        Ok(Self { uq, sq, delta_s, rd })
    }

    /// Isotropic noise `R = c·I`.
    pub fn isotropic(n: usize, variance: f64) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::InvalidConfig(format!("noise variance {variance} must be positive")));
        }
        Self::from_parts(Matrix::zeros(n, 0), Vector::zeros(0), Vector::from_element(n, variance))
    }

    /// Unit white noise `R = I`.
    pub fn white(n: usize) -> Self {
        Self::isotropic(n, 1.0).expect("unit variance is valid")
    }

    pub fn uq(&self) -> &Matrix {
        &self.uq
    }

    pub fn sq(&self) -> &Vector {
        &self.sq
    }

    pub fn delta_s(&self) -> &Vector {
        &self.delta_s
    }

    /// Diagonal of the covariance after flooring.
    pub fn rd(&self) -> &Vector {
        &self.rd
    }

    pub fn n(&self) -> usize {
        self.rd.len()
    }

    /// Rank of the low-rank part, `r2 − r1`.
    pub fn rank(&self) -> usize {
        self.sq.len()
    }

    /// `UQ·diag(SQ)`, the square-root factor of the low-rank part.
    pub fn lowrank_factor(&self) -> Matrix {
        let mut f = self.uq.clone();
        for (k, mut col) in f.column_iter_mut().enumerate() {
            col *= self.sq[k];
        }
        f
    }

    /// The full `n × n` covariance. Quadratic in `n`; meant for checks on
    /// small problems.
    pub fn dense_covariance(&self) -> Matrix {
        let f = self.lowrank_factor();
        let mut r = &f * f.transpose();
        for i in 0..self.n() {
            r[(i, i)] += self.delta_s[i];
        }
        r
    }
}

/// Noise covariance of the modes past `r1`, truncated at `r2` with a
/// diagonal correction for the modes past `r2`.
pub fn build_noise_model(rom: &ReducedOrderModel) -> Result<NoiseModel> {
    let (r1, r2) = (rom.r1(), rom.r2());
    check_ranks(r1, r2, rom.rank())?;
    let n = rom.n();
    let uq = rom.u.columns(r1, r2 - r1).into_owned();
    let sq = rom.s.rows(r1, r2 - r1).into_owned();
    let mut delta_s = Vector::zeros(n);
    for k in r2..rom.rank() {
        let s2 = rom.s[k] * rom.s[k];
        for (d, u) in delta_s.iter_mut().zip(rom.u.column(k).iter()) {
            *d += u * u * s2;
        }
    }
    NoiseModel::from_parts(uq, sq, delta_s)
}

/// `R_p = H·R·Hᵀ` for the selected sensors, built from the rows of `UQ` and
/// the diagonal only. The diagonal equals `Rd` exactly.
pub fn covariance_submatrix(noise: &NoiseModel, sensors: &SensorSet) -> Result<Matrix> {
    sensors.check_range(noise.n())?;
    let idx = sensors.indices();
    let p = idx.len();
    let q = noise.rank();
    let mut b = Matrix::zeros(p, q);
    for (a, &i) in idx.iter().enumerate() {
        for k in 0..q {
            b[(a, k)] = noise.uq[(i, k)] * noise.sq[k];
        }
    }
    let mut rp = &b * b.transpose();
    symmetrize(&mut rp);
    for (a, &i) in idx.iter().enumerate() {
        rp[(a, a)] = noise.rd[i];
    }
    Ok(rp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::random_orthonormal;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn explicit_truncated_covariance(rom: &ReducedOrderModel) -> Matrix {
        let k = rom.rank();
        let r1 = rom.r1();
        let mut f = rom.u().columns(r1, k - r1).into_owned();
        for (j, mut col) in f.column_iter_mut().enumerate() {
            col *= rom.s()[r1 + j];
        }
        &f * f.transpose()
    }

    fn random_rom(n: usize, m: usize, r1: usize, r2: usize, seed: u64) -> ReducedOrderModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_orthonormal(n, m, &mut rng);
        let v = random_orthonormal(m, m, &mut rng);
        let s = Vector::from_iterator(m, (0..m).map(|k| 1.0 / ((k + 1) as f64).sqrt()));
        ReducedOrderModel::from_factors(u, s, v, r1, r2).unwrap()
    }

    #[test]
    fn identity_snapshots() {
        let data = SnapshotMatrix::new(Matrix::identity(3, 3)).unwrap();
        let rom = fit_rom(&data, 1, 2).unwrap();
        for s in rom.s().iter() {
            assert!((s - 1.0).abs() < 1e-14);
        }
        let rebuilt = rom.u() * Matrix::from_diagonal(rom.s()) * rom.v().transpose();
        assert!((rebuilt - Matrix::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn rank_two_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_orthonormal(7, 2, &mut rng);
        let v = random_orthonormal(5, 2, &mut rng);
        let data = u.column(0) * v.column(0).transpose() + 0.5 * u.column(1) * v.column(1).transpose();
        let rom = fit_rom(&SnapshotMatrix::new(data.clone()).unwrap(), 1, 2).unwrap();
        assert!((rom.s()[0] - 1.0).abs() < 1e-12);
        assert!((rom.s()[1] - 0.5).abs() < 1e-12);
        for k in 2..5 {
            assert!(rom.s()[k].abs() < 1e-12);
        }
        let rebuilt = rom.u() * Matrix::from_diagonal(rom.s()) * rom.v().transpose();
        assert!((rebuilt - data).norm() < 1e-12);
    }

    #[test]
    fn fit_rejects_bad_ranks() {
        let data = SnapshotMatrix::new(Matrix::identity(4, 3)).unwrap();
        assert!(matches!(fit_rom(&data, 0, 2), Err(Error::RankOutOfRange(_))));
        assert!(matches!(fit_rom(&data, 2, 2), Err(Error::RankOutOfRange(_))));
        assert!(matches!(fit_rom(&data, 1, 4), Err(Error::RankOutOfRange(_))));
    }

    #[test]
    fn snapshot_validation() {
        assert!(SnapshotMatrix::new(Matrix::zeros(3, 1)).is_err());
        let mut m = Matrix::zeros(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(SnapshotMatrix::new(m).is_err());
    }

    #[test]
    fn full_noise_rank_has_zero_correction() {
        let rom = random_rom(9, 5, 2, 5, 1);
        let noise = build_noise_model(&rom).unwrap();
        assert!(noise.delta_s().iter().all(|&d| d == 0.0));
        let explicit = explicit_truncated_covariance(&rom);
        assert!((noise.dense_covariance() - explicit).norm() < 1e-12);
    }

    #[test]
    fn diagonal_correction_matches_explicit_covariance() {
        let rom = random_rom(6, 5, 1, 3, 11);
        let noise = build_noise_model(&rom).unwrap();
        let explicit = explicit_truncated_covariance(&rom);
        let implied = noise.dense_covariance();
        for i in 0..6 {
            assert!((implied[(i, i)] - explicit[(i, i)]).abs() < 1e-12);
            assert!((noise.rd()[i] - explicit[(i, i)]).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_model_is_degenerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_orthonormal(6, 4, &mut rng);
        let v = random_orthonormal(4, 4, &mut rng);
        let s = Vector::from_vec(vec![2.0, 0.0, 0.0, 0.0]);
        let rom = ReducedOrderModel::from_factors(u, s, v, 1, 3).unwrap();
        assert!(matches!(build_noise_model(&rom), Err(Error::DegenerateNoise)));
    }

    #[test]
    fn negative_correction_is_clamped_or_rejected() {
        let uq = Matrix::from_element(2, 1, 0.5);
        let sq = Vector::from_element(1, 1.0);
        let ok = NoiseModel::from_parts(uq.clone(), sq.clone(), Vector::from_vec(vec![-1e-13, 0.1])).unwrap();
        assert_eq!(ok.delta_s()[0], 0.0);
        let bad = NoiseModel::from_parts(uq, sq, Vector::from_vec(vec![-1e-9, 0.1]));
        assert!(matches!(bad, Err(Error::NumericalFailure(_))));
    }

    #[test]
    fn rd_floor_is_relative() {
        let uq = Matrix::zeros(3, 0);
        let noise = NoiseModel::from_parts(uq, Vector::zeros(0), Vector::from_vec(vec![1.0, 0.0, 2.0])).unwrap();
        assert_eq!(noise.rd()[1], 2.0 * RD_RELATIVE_FLOOR);
    }

    #[test]
    fn submatrix_matches_explicit_rows() {
        let rom = random_rom(6, 5, 1, 3, 11);
        let noise = build_noise_model(&rom).unwrap();
        let explicit = explicit_truncated_covariance(&rom);
        let idx = vec![0, 3, 5];
        let rp = covariance_submatrix(&noise, &SensorSet::new(idx.clone()).unwrap()).unwrap();
        let dense = noise.dense_covariance();
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                assert!((rp[(a, b)] - dense[(i, j)]).abs() < 1e-12, "{a},{b}");
            }
        }
        let all = SensorSet::new((0..6).collect()).unwrap();
        let rp = covariance_submatrix(&noise, &all).unwrap();
        assert!((&rp - &rp.transpose()).norm() < 1e-12);
        // r2 < m, so only the diagonal of the low-rank form is exact.
        for i in 0..6 {
            assert!((rp[(i, i)] - explicit[(i, i)]).abs() < 1e-12);
        }
        assert!((rp - noise.dense_covariance()).norm() < 1e-12);
    }

    #[test]
    fn full_set_submatrix_equals_explicit_when_untruncated() {
        let rom = random_rom(6, 5, 1, 5, 2);
        let noise = build_noise_model(&rom).unwrap();
        let rp = covariance_submatrix(&noise, &SensorSet::new((0..6).collect()).unwrap()).unwrap();
        assert!((rp - explicit_truncated_covariance(&rom)).norm() < 1e-12);
    }

    #[test]
    fn singleton_submatrix_is_rd() {
        let rom = random_rom(8, 6, 2, 4, 9);
        let noise = build_noise_model(&rom).unwrap();
        for i in 0..8 {
            let rp = covariance_submatrix(&noise, &SensorSet::new(vec![i]).unwrap()).unwrap();
            assert_eq!(rp[(0, 0)], noise.rd()[i]);
        }
    }

    #[test]
    fn submatrix_errors() {
        let noise = NoiseModel::white(4);
        assert!(matches!(
            covariance_submatrix(&noise, &SensorSet::new(vec![1, 4]).unwrap()),
            Err(Error::IndexOutOfRange { index: 4, n: 4 })
        ));
    }
}
