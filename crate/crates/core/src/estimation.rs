//! Measurement model, whitened least-squares estimation and the
//! A-optimality criterion.

use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, spd_condition, COND_LIMIT};
use crate::rom_noise::{covariance_submatrix, NoiseModel, ReducedOrderModel, SnapshotMatrix};
use crate::Matrix;

/// Ordered, duplicate-free list of selected candidate rows.
///
/// Equivalent to the selection matrix `H ∈ {0,1}^{p×n}` whose row `j` has a
/// single one at column `indices[j]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SensorSet {
    indices: Vec<usize>,
}

impl SensorSet {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidConfig("sensor set must not be empty".into()));
        }
        let mut seen = HashSet::with_capacity(indices.len());
        for &i in &indices {
            if !seen.insert(i) {
                return Err(Error::DuplicateSensor(i));
            }
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.contains(&i)
    }

    /// Same sensors in ascending index order.
    pub fn sorted(&self) -> Self {
        let mut indices = self.indices.clone();
        indices.sort_unstable();
        Self { indices }
    }

    pub fn check_range(&self, n: usize) -> Result<()> {
        match self.indices.iter().find(|&&i| i >= n) {
            Some(&index) => Err(Error::IndexOutOfRange { index, n }),
            None => Ok(()),
        }
    }

    /// Dense `p × n` selection matrix.
    pub fn selection_matrix(&self, n: usize) -> Result<Matrix> {
        self.check_range(n)?;
        let mut h = Matrix::zeros(self.len(), n);
        for (j, &i) in self.indices.iter().enumerate() {
            h[(j, i)] = 1.0;
        }
        Ok(h)
    }
}

impl fmt::Display for SensorSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.indices.iter().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// Weighted least-squares estimator of the latent mode coefficients for a
/// fixed sensor set.
#[derive(Debug, Clone)]
pub struct Estimator {
    sensors: SensorSet,
    gain: Matrix,
    rp: Matrix,
    fim_inv: Matrix,
}

impl Estimator {
    pub fn sensors(&self) -> &SensorSet {
        &self.sensors
    }

    /// `(CᵀRp⁻¹C)⁻¹CᵀRp⁻¹`, `r1 × p`.
    pub fn gain(&self) -> &Matrix {
        &self.gain
    }

    /// Noise covariance of the selected sensors.
    pub fn rp(&self) -> &Matrix {
        &self.rp
    }

    /// Inverse Fisher information, the estimator's error covariance.
    pub fn fim_inv(&self) -> &Matrix {
        &self.fim_inv
    }

    /// A-optimality value of the sensor set.
    pub fn objective(&self) -> f64 {
        self.fim_inv.trace()
    }
}

/// `C = H·U_{1:r1}`, `p × r1`.
pub fn measurement_matrix(rom: &ReducedOrderModel, sensors: &SensorSet) -> Result<Matrix> {
    sensors.check_range(rom.n())?;
    let u = rom.u();
    let r1 = rom.r1();
    Ok(Matrix::from_fn(sensors.len(), r1, |j, k| u[(sensors.indices[j], k)]))
}

struct Whitened {
    rp: Matrix,
    /// `Rp⁻¹·C`
    rinv_c: Matrix,
    fim_inv: Matrix,
}

fn whiten(rom: &ReducedOrderModel, noise: &NoiseModel, sensors: &SensorSet) -> Result<Whitened> {
    let (p, r1) = (sensors.len(), rom.r1());
    if p < r1 {
        return Err(Error::UnderSampled { p, r1 });
    }
    if noise.n() != rom.n() {
        return Err(Error::DimensionMismatch(format!(
            "noise model has {} rows, reduced-order model {}",
            noise.n(),
            rom.n()
        )));
    }
    let c = measurement_matrix(rom, sensors)?;
    let rp = covariance_submatrix(noise, sensors)?;
    let rp_chol = cholesky(rp.clone(), "sensor noise covariance")?;
    let mut white_c = c.clone();
    rp_chol.l_dirty().solve_lower_triangular_mut(&mut white_c);
    let fim = white_c.transpose() * &white_c;
    let cond = spd_condition(&fim);
    if !(cond <= COND_LIMIT) {
        return Err(Error::SingularFim(cond));
    }
    let fim_inv = cholesky(fim, "Fisher information")?.inverse();
    let rinv_c = rp_chol.solve(&c);
    Ok(Whitened { rp, rinv_c, fim_inv })
}

/// Whitened least-squares estimator for the given sensors.
pub fn wls_estimator(rom: &ReducedOrderModel, noise: &NoiseModel, sensors: &SensorSet) -> Result<Estimator> {
    let w = whiten(rom, noise, sensors)?;
    let gain = &w.fim_inv * w.rinv_c.transpose();
    Ok(Estimator { sensors: sensors.clone(), gain, rp: w.rp, fim_inv: w.fim_inv })
}

/// `tr((CᵀRp⁻¹C)⁻¹)`, the mean estimation variance of the latent variables.
pub fn aopt_objective(rom: &ReducedOrderModel, noise: &NoiseModel, sensors: &SensorSet) -> Result<f64> {
    Ok(whiten(rom, noise, sensors)?.fim_inv.trace())
}

/// Estimates mode coefficients from the sensor rows of `snapshots` and
/// rebuilds the full field. Returns `(Z̃, U_{1:r1}·Z̃)`.
pub fn reconstruct(
    estimator: &Estimator,
    rom: &ReducedOrderModel,
    snapshots: &SnapshotMatrix,
) -> Result<(Matrix, Matrix)> {
    if snapshots.n() != rom.n() {
        return Err(Error::DimensionMismatch(format!("snapshots have {} rows, model has {}", snapshots.n(), rom.n())));
    }
    if estimator.gain.nrows() != rom.r1() {
        return Err(Error::DimensionMismatch(format!(
            "estimator resolves {} modes, model has r1={}",
            estimator.gain.nrows(),
            rom.r1()
        )));
    }
    estimator.sensors.check_range(rom.n())?;
    let y = snapshots.values().select_rows(estimator.sensors.indices());
    let z = &estimator.gain * y;
    let field = rom.modes() * &z;
    Ok((z, field))
}

/// `‖original − field‖_F / ‖original‖_F`.
pub fn reconstruction_error(original: &SnapshotMatrix, field: &Matrix) -> Result<f64> {
    let x = original.values();
    if x.shape() != field.shape() {
        return Err(Error::DimensionMismatch(format!(
            "original is {}×{}, field is {}×{}",
            x.nrows(),
            x.ncols(),
            field.nrows(),
            field.ncols()
        )));
    }
    let denom = x.norm();
    if denom == 0.0 {
        return Err(Error::ZeroData);
    }
    Ok((x - field).norm() / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rom_noise::build_noise_model;
    use crate::synthetic::random_orthonormal;
    use crate::Vector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rom_from_u(u: Matrix, r1: usize, r2: usize) -> ReducedOrderModel {
        let k = u.ncols();
        let s = Vector::from_iterator(k, (0..k).map(|i| 1.0 / (i + 1) as f64));
        ReducedOrderModel::from_factors(u, s, Matrix::identity(k, k), r1, r2).unwrap()
    }

    fn random_instance(n: usize, m: usize, r1: usize, r2: usize, seed: u64) -> (ReducedOrderModel, NoiseModel) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_orthonormal(n, m, &mut rng);
        let v = random_orthonormal(m, m, &mut rng);
        let s = Vector::from_iterator(m, (0..m).map(|k| 1.0 / ((k + 1) as f64).sqrt()));
        let rom = ReducedOrderModel::from_factors(u, s, v, r1, r2).unwrap();
        let noise = build_noise_model(&rom).unwrap();
        (rom, noise)
    }

    fn set(v: &[usize]) -> SensorSet {
        SensorSet::new(v.to_vec()).unwrap()
    }

    #[test]
    fn sensor_set_rejects_duplicates_and_empty() {
        assert!(matches!(SensorSet::new(vec![1, 2, 1]), Err(Error::DuplicateSensor(1))));
        assert!(SensorSet::new(vec![]).is_err());
        assert!(set(&[0, 5]).check_range(5).is_err());
    }

    #[test]
    fn measurement_matrix_identity_modes() {
        let rom = rom_from_u(Matrix::identity(4, 4), 2, 3);
        assert_eq!(measurement_matrix(&rom, &set(&[0, 1])).unwrap(), Matrix::identity(2, 2));
        let c = measurement_matrix(&rom, &set(&[2, 0])).unwrap();
        assert_eq!(c, Matrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]));
    }

    #[test]
    fn measurement_matrix_matches_dense_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rom = rom_from_u(random_orthonormal(20, 5, &mut rng), 3, 4);
        let s = set(&[4, 7, 19]);
        let dense = s.selection_matrix(20).unwrap() * rom.modes();
        assert!((measurement_matrix(&rom, &s).unwrap() - dense).norm() < 1e-15);
    }

    #[test]
    fn white_noise_gain_is_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rom = rom_from_u(random_orthonormal(6, 4, &mut rng), 2, 3);
        let noise = NoiseModel::isotropic(6, 0.3).unwrap();
        let s = set(&[1, 4]);
        let est = wls_estimator(&rom, &noise, &s).unwrap();
        let c = measurement_matrix(&rom, &s).unwrap();
        let inv = c.clone().try_inverse().unwrap();
        assert!((est.gain() - inv).norm() < 1e-10);
    }

    #[test]
    fn square_system_ignores_noise() {
        let (rom, noise) = random_instance(10, 6, 3, 5, 2);
        let s = set(&[0, 4, 9]);
        let est = wls_estimator(&rom, &noise, &s).unwrap();
        let c = measurement_matrix(&rom, &s).unwrap();
        let y = crate::Vector::from_vec(vec![0.3, -1.0, 2.0]);
        let direct = c.lu().solve(&y).unwrap();
        assert!((est.gain() * y - direct).norm() < 1e-9);
    }

    #[test]
    fn gain_matches_dense_whitened_normal_equations() {
        let (rom, noise) = random_instance(8, 6, 2, 4, 13);
        let s = set(&[1, 3, 6]);
        let est = wls_estimator(&rom, &noise, &s).unwrap();
        let h = s.selection_matrix(8).unwrap();
        let r = noise.dense_covariance();
        let rp_inv = (&h * r * h.transpose()).try_inverse().unwrap();
        let c = &h * rom.modes();
        let fim = c.transpose() * &rp_inv * &c;
        let oracle = fim.try_inverse().unwrap() * c.transpose() * rp_inv;
        let y = crate::Vector::from_vec(vec![0.5, 1.5, -0.25]);
        assert!((est.gain() * &y - oracle * &y).norm() < 1e-10);
        assert!((est.gain() * &c - Matrix::identity(2, 2)).norm() < 1e-8);
    }

    #[test]
    fn objective_on_identity_fim() {
        let rom = rom_from_u(Matrix::identity(4, 4), 2, 3);
        let noise = NoiseModel::white(4);
        assert!((aopt_objective(&rom, &noise, &set(&[0, 1])).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn objective_on_diagonal_noise() {
        let rom = rom_from_u(Matrix::identity(3, 3), 2, 3);
        let noise =
            NoiseModel::from_parts(Matrix::zeros(3, 0), Vector::zeros(0), Vector::from_vec(vec![4.0, 9.0, 1.0]))
                .unwrap();
        assert!((aopt_objective(&rom, &noise, &set(&[0, 1])).unwrap() - 13.0).abs() < 1e-12);
    }

    #[test]
    fn objective_matches_dense_trace() {
        let (rom, noise) = random_instance(10, 7, 3, 5, 21);
        let s = set(&[2, 5, 7, 8]);
        let h = s.selection_matrix(10).unwrap();
        let rp = &h * noise.dense_covariance() * h.transpose();
        let c = &h * rom.modes();
        let fim = c.transpose() * rp.try_inverse().unwrap() * &c;
        let oracle = fim.try_inverse().unwrap().trace();
        let f = aopt_objective(&rom, &noise, &s).unwrap();
        assert!((f - oracle).abs() < 1e-10 * oracle);
    }

    #[test]
    fn undersampled_and_singular() {
        let (rom, noise) = random_instance(10, 7, 3, 5, 21);
        assert!(matches!(aopt_objective(&rom, &noise, &set(&[1, 2])), Err(Error::UnderSampled { p: 2, r1: 3 })));
        // Rows outside the span of the first two identity columns carry no
        // information about the second mode.
        let rom = rom_from_u(Matrix::identity(4, 4), 2, 3);
        let noise = NoiseModel::white(4);
        assert!(matches!(aopt_objective(&rom, &noise, &set(&[0, 2, 3])), Err(Error::SingularFim(_))));
    }

    #[test]
    fn noiseless_recovery() {
        let (rom, noise) = random_instance(12, 6, 3, 5, 5);
        let z_true = Matrix::from_fn(3, 4, |i, j| (i as f64 + 1.0) * (j as f64 - 1.5));
        let data = SnapshotMatrix::new(rom.modes() * &z_true).unwrap();
        let est = wls_estimator(&rom, &noise, &set(&[0, 3, 7, 11])).unwrap();
        let (z, field) = reconstruct(&est, &rom, &data).unwrap();
        assert!((z - &z_true).norm() < 1e-8);
        assert!(reconstruction_error(&data, &field).unwrap() < 1e-8);
    }

    #[test]
    fn single_mode_weighted_average() {
        // One mode, two sensors with uncorrelated noise: z̃ is the inverse-
        // variance weighted combination y_i / c_i.
        let u = Matrix::from_row_slice(3, 2, &[0.6, 0.0, 0.8, 0.0, 0.0, 1.0]);
        let rom =
            ReducedOrderModel::from_factors(u, Vector::from_vec(vec![1.0, 0.5]), Matrix::identity(2, 2), 1, 2).unwrap();
        let noise =
            NoiseModel::from_parts(Matrix::zeros(3, 0), Vector::zeros(0), Vector::from_vec(vec![1.0, 4.0, 1.0]))
                .unwrap();
        let est = wls_estimator(&rom, &noise, &set(&[0, 1])).unwrap();
        let (y0, y1) = (1.2, 2.0);
        // Hand solution: (Σ c_i y_i / σ_i²) / (Σ c_i² / σ_i²).
        let expected = (0.6 * y0 / 1.0 + 0.8 * y1 / 4.0) / (0.36 / 1.0 + 0.64 / 4.0);
        let z = (est.gain() * crate::Vector::from_vec(vec![y0, y1]))[0];
        assert!((z - expected).abs() < 1e-12);
    }

    #[test]
    fn square_estimator_interpolates_sensor_rows() {
        let (rom, noise) = random_instance(9, 6, 3, 5, 17);
        let s = set(&[1, 4, 8]);
        let est = wls_estimator(&rom, &noise, &s).unwrap();
        let data = SnapshotMatrix::new(Matrix::from_fn(9, 3, |i, j| ((i * 3 + j) as f64).sin())).unwrap();
        let (_, field) = reconstruct(&est, &rom, &data).unwrap();
        for &i in s.indices() {
            for j in 0..3 {
                assert!((field[(i, j)] - data.values()[(i, j)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn reconstruction_error_values() {
        let orig = SnapshotMatrix::new(Matrix::from_row_slice(2, 2, &[3.0, 0.0, 4.0, 0.0])).unwrap();
        assert_eq!(reconstruction_error(&orig, orig.values()).unwrap(), 0.0);
        assert_eq!(reconstruction_error(&orig, &Matrix::zeros(2, 2)).unwrap(), 1.0);
        let field = Matrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 0.0]);
        assert!((reconstruction_error(&orig, &field).unwrap() - 0.8).abs() < 1e-15);
        let zero = SnapshotMatrix::new(Matrix::zeros(2, 2)).unwrap();
        assert!(matches!(reconstruction_error(&zero, &Matrix::zeros(2, 2)), Err(Error::ZeroData)));
        assert!(reconstruction_error(&orig, &Matrix::zeros(3, 2)).is_err());
    }
}
