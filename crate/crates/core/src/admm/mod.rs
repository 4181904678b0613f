//! ADMM sensor selection.
//!
//! Solves
//!
//! ```text
//! minimize tr(XᵀQX)  subject to  AX = I  and  ‖X‖_{g,0} ≤ p
//! ```
//!
//! over the transposed gain `X ∈ R^{n×r1}`, where `‖X‖_{g,0}` counts the
//! nonzero rows. The splitting is `Z = GX` with `G = [I; A]`: the
//! quadratic term is handled in the X-step (see [`x_update`]), the row
//! budget by projecting `Z₁` with [`l0_bht`], and the equality constraint
//! by fixing `Z₂ = I`. The nonzero rows of the converged `X` are the
//! selected sensors; the final gain is then recomputed by weighted least
//! squares in [`polish`].
//!
//! By default the candidate matrix and the noise covariance are first
//! normalized by the noise standard deviation of every row, so that the
//! row-norm thresholding sees noise intensity (see [`normalize`]).

mod prox;
mod solver;
mod woodbury;

pub use prox::{block_soft_threshold, l0_bht};
pub use solver::{solve, SolveOutcome, SolverState, TraceRecord};

use crate::error::{Error, Result};
use crate::estimation::{wls_estimator, Estimator, SensorSet};
use crate::rom_noise::{NoiseModel, ReducedOrderModel};
use crate::{Matrix, Vector};

use self::woodbury::{assemble_rhs, XUpdateFactors};

/// Sparsity model for the rows of `X`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    /// At most `p` nonzero rows.
    GroupL0 { p: usize },
    /// `λ·Σ_i ‖x_i‖₂`; the number of selected rows is whatever emerges.
    GroupL1 { lambda: f64 },
}

/// How the candidate matrix and covariance are scaled before solving.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Scale row `i` by `Rd_i^{-1/2}`, giving `Q` a unit diagonal.
    NoiseWeighted,
    /// Use `U` and the covariance as they are.
    Raw,
}

/// The quadratic program the solver works on: the constraint matrix `A`
/// (`r1 × n`, stored transposed) and `Q = UQ·diag(SQ²)·UQᵀ + diag(dq)`.
#[derive(Debug, Clone)]
pub struct AdmmProblem {
    /// `Aᵀ`, the (possibly normalized) candidate matrix `Û_{1:r1}`.
    at: Matrix,
    uq: Matrix,
    sq: Vector,
    /// Diagonal part of `Q`.
    dq: Vector,
    /// Row weights that were divided out, `Rd` or all ones.
    rd: Vector,
    penalty: Penalty,
    /// `√2·UQ·diag(SQ)`
    w: Matrix,
}

impl AdmmProblem {
    /// Problem from explicit parts. `dq` must be nonnegative.
    pub fn new(at: Matrix, uq: Matrix, sq: Vector, dq: Vector, penalty: Penalty) -> Result<Self> {
        let n = at.nrows();
        if uq.nrows() != n || dq.len() != n || uq.ncols() != sq.len() {
            return Err(Error::DimensionMismatch(format!(
                "A is {}×{}, UQ {}×{}, SQ {}, dq {}",
                at.ncols(),
                n,
                uq.nrows(),
                uq.ncols(),
                sq.len(),
                dq.len()
            )));
        }
        if dq.iter().any(|&d| !(d >= 0.0)) {
            return Err(Error::NumericalFailure("diagonal of Q must be nonnegative".into()));
        }
        let r1 = at.ncols();
        match penalty {
            Penalty::GroupL0 { p } if p < r1 || p > n => {
                return Err(Error::InfeasibleBudget { p, r1, n });
            }
            Penalty::GroupL1 { lambda } if !(lambda >= 0.0) => {
                return Err(Error::InvalidConfig(format!("λ = {lambda} must be nonnegative")));
            }
            _ => {}
        }
        let mut w = uq.clone();
        for (k, mut col) in w.column_iter_mut().enumerate() {
            col *= std::f64::consts::SQRT_2 * sq[k];
        }
        Ok(Self { at, uq, sq, dq, rd: Vector::from_element(n, 1.0), penalty, w })
    }

    /// White-noise problem: `Q = I` and the raw candidate matrix. No noise
    /// model is involved.
    pub fn white(rom: &ReducedOrderModel, penalty: Penalty) -> Result<Self> {
        let n = rom.n();
        Self::new(rom.modes(), Matrix::zeros(n, 0), Vector::zeros(0), Vector::from_element(n, 1.0), penalty)
    }

    pub fn build(
        rom: &ReducedOrderModel,
        noise: &NoiseModel,
        penalty: Penalty,
        normalization: Normalization,
    ) -> Result<Self> {
        match normalization {
            Normalization::NoiseWeighted => normalize(rom, noise, penalty),
            Normalization::Raw => {
                check_noise(rom, noise)?;
                Self::new(rom.modes(), noise.uq().clone(), noise.sq().clone(), noise.delta_s().clone(), penalty)
            }
        }
    }

    pub fn n(&self) -> usize {
        self.at.nrows()
    }

    pub fn r1(&self) -> usize {
        self.at.ncols()
    }

    pub fn penalty(&self) -> Penalty {
        self.penalty
    }

    /// `A`, `r1 × n`.
    pub fn a(&self) -> Matrix {
        self.at.transpose()
    }

    pub fn uq(&self) -> &Matrix {
        &self.uq
    }

    pub fn sq(&self) -> &Vector {
        &self.sq
    }

    pub fn dq(&self) -> &Vector {
        &self.dq
    }

    pub fn rd(&self) -> &Vector {
        &self.rd
    }

    /// Dense `n × n` `Q`, for checks on small problems.
    pub fn dense_q(&self) -> Matrix {
        let mut q = &self.w * self.w.transpose() * 0.5;
        for i in 0..self.n() {
            q[(i, i)] += self.dq[i];
        }
        q
    }

    /// `tr(XᵀQX)` without forming `Q`.
    pub fn objective(&self, x: &Matrix) -> f64 {
        let diag: f64 =
            x.column_iter().map(|col| col.iter().zip(self.dq.iter()).map(|(v, d)| d * v * v).sum::<f64>()).sum();
        let proj = self.w.tr_mul(x);
        diag + 0.5 * proj.norm_squared()
    }

    /// Gain `K = XᵀRd^{-1/2}` in the original (unnormalized) variables.
    pub fn denormalized_gain(&self, x: &Matrix) -> Matrix {
        let mut k = x.transpose();
        for (i, mut col) in k.column_iter_mut().enumerate() {
            col /= self.rd[i].sqrt();
        }
        k
    }
}

fn check_noise(rom: &ReducedOrderModel, noise: &NoiseModel) -> Result<()> {
    if noise.n() != rom.n() {
        return Err(Error::DimensionMismatch(format!(
            "noise model has {} rows, reduced-order model {}",
            noise.n(),
            rom.n()
        )));
    }
    Ok(())
}

/// Noise-weighted problem: `Û = Rd^{-1/2}U`, `ÛQ = Rd^{-1/2}UQ` and
/// `dq = ΔS / Rd`. The implied `Q̂` has a unit diagonal.
pub fn normalize(rom: &ReducedOrderModel, noise: &NoiseModel, penalty: Penalty) -> Result<AdmmProblem> {
    check_noise(rom, noise)?;
    let rd = noise.rd();
    if rd.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::DegenerateNoise);
    }
    let weights: Vec<f64> = rd.iter().map(|r| 1.0 / r.sqrt()).collect();
    let scale = |m: &Matrix| {
        let mut out = m.clone();
        for mut col in out.column_iter_mut() {
            for (x, w) in col.iter_mut().zip(weights.iter()) {
                *x *= w;
            }
        }
        out
    };
    let at = scale(&rom.modes());
    let uq = scale(noise.uq());
    let dq = noise.delta_s().component_div(rd);
    let mut problem = AdmmProblem::new(at, uq, noise.sq().clone(), dq, penalty)?;
    problem.rd = rd.clone();
    Ok(problem)
}

/// Minimizer of `tr(XᵀQX) + (1/2γ)‖Z − GX − Y‖²_F` for the given state,
/// via the two-level Woodbury factorization.
pub fn x_update(problem: &AdmmProblem, state: &SolverState) -> Result<Matrix> {
    let mut factors = XUpdateFactors::new(problem, state.gamma)?;
    let mut b = Matrix::zeros(problem.n(), problem.r1());
    let (z1, z2) = state.z_parts();
    let (y1, y2) = state.y_parts();
    assemble_rhs(problem, &z1, &y1, &z2, &y2, &mut b);
    factors.apply_scaled(problem, &mut b);
    Ok(b)
}

/// Weighted least-squares estimator on the selected sensors. The solver's
/// own gain is not used for estimation.
pub fn polish(rom: &ReducedOrderModel, noise: &NoiseModel, sensors: &SensorSet) -> Result<Estimator> {
    wls_estimator(rom, noise, sensors)
}

/// Step-size schedule and stopping rule.
///
/// The iteration only settles once γ has shrunk enough for the row budget
/// to bind; on problems with a few thousand rows that happens around
/// γ ≈ 0.5. The default multiplies γ by 0.99 every 200 iterations, which
/// gets there in a few thousand iterations. A period of 5000 explores
/// longer but typically needs several hundred thousand iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub gamma_init: f64,
    /// Multiplier applied to γ every `gamma_decay_period` iterations.
    pub eta: f64,
    pub gamma_decay_period: usize,
    /// Tolerance on `‖X⁽ᵏ⁾ − X⁽ᵏ⁻¹⁾‖_F`; `None` means `1e-6·√(n·r1)`.
    pub eps_conv: Option<f64>,
    pub max_iters: usize,
    /// Rows of `X` with a larger ℓ2 norm count as selected.
    pub polish_threshold: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gamma_init: 1.0,
            eta: 0.99,
            gamma_decay_period: 200,
            eps_conv: None,
            max_iters: 200_000,
            polish_threshold: 1e-4,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if !(self.gamma_init > 0.0) || !self.gamma_init.is_finite() {
            return bad("gamma_init must be positive");
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad("eta must lie in (0, 1)");
        }
        if self.gamma_decay_period == 0 {
            return bad("gamma_decay_period must be at least 1");
        }
        if let Some(eps) = self.eps_conv {
            if !(eps > 0.0) {
                return bad("eps_conv must be positive");
            }
        }
        if !(self.polish_threshold > 0.0) {
            return bad("polish_threshold must be positive");
        }
        Ok(())
    }

    pub fn tolerance(&self, n: usize, r1: usize) -> f64 {
        self.eps_conv.unwrap_or(1e-6 * ((n * r1) as f64).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{aopt_objective, measurement_matrix};
    use crate::oracle::exhaustive_best;
    use crate::rom_noise::build_noise_model;
    use crate::synthetic::random_orthonormal;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    fn random_rom(n: usize, m: usize, r1: usize, r2: usize, seed: u64) -> ReducedOrderModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_orthonormal(n, m, &mut rng);
        let v = random_orthonormal(m, m, &mut rng);
        let s = Vector::from_iterator(m, (0..m).map(|k| 1.0 / ((k + 1) as f64).sqrt()));
        ReducedOrderModel::from_factors(u, s, v, r1, r2).unwrap()
    }

    fn random_state(problem: &AdmmProblem, gamma: f64, rng: &mut ChaCha8Rng) -> SolverState {
        let (n, r) = (problem.n(), problem.r1());
        let mut state = SolverState::new(random_matrix(n, r, rng), gamma);
        state.z1 = random_matrix(n, r, rng);
        state.z2 = random_matrix(r, r, rng);
        state.y1 = random_matrix(n, r, rng);
        state.y2 = random_matrix(r, r, rng);
        state
    }

    fn dense_x_update(problem: &AdmmProblem, state: &SolverState) -> Matrix {
        let a = problem.a();
        let g = 1.0 / state.gamma;
        let m = problem.dense_q() * 2.0 + Matrix::identity(problem.n(), problem.n()) * g + a.transpose() * &a * g;
        let rhs = ((&state.z1 - &state.y1) + a.transpose() * (&state.z2 - &state.y2)) * g;
        m.lu().solve(&rhs).unwrap()
    }

    #[test]
    fn x_update_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rom = random_rom(12, 8, 2, 5, 1);
        let noise = build_noise_model(&rom).unwrap();
        for norm in [Normalization::NoiseWeighted, Normalization::Raw] {
            let problem = AdmmProblem::build(&rom, &noise, Penalty::GroupL0 { p: 4 }, norm).unwrap();
            for gamma in [0.05, 1.0, 30.0] {
                let state = random_state(&problem, gamma, &mut rng);
                let fast = x_update(&problem, &state).unwrap();
                let dense = dense_x_update(&problem, &state);
                assert!((&fast - &dense).norm() <= 1e-8 * dense.norm(), "{norm:?} γ={gamma}");
            }
        }
    }

    #[test]
    fn x_update_fixed_point_without_quadratic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (n, r) = (9, 3);
        let problem = AdmmProblem::new(
            random_matrix(n, r, &mut rng),
            Matrix::zeros(n, 0),
            Vector::zeros(0),
            Vector::zeros(n),
            Penalty::GroupL0 { p: 4 },
        )
        .unwrap();
        let mut state = random_state(&problem, 0.7, &mut rng);
        let x0 = random_matrix(n, r, &mut rng);
        state.z1 = &x0 + &state.y1;
        state.z2 = problem.a() * &x0 + &state.y2;
        let x = x_update(&problem, &state).unwrap();
        assert!((&x - &x0).norm() < 1e-10 * x0.norm());
    }

    #[test]
    fn x_update_vanishes_for_huge_gamma() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rom = random_rom(10, 6, 2, 4, 4);
        let noise = build_noise_model(&rom).unwrap();
        let problem = normalize(&rom, &noise, Penalty::GroupL0 { p: 3 }).unwrap();
        let mut last = f64::INFINITY;
        for gamma in [1e2, 1e4, 1e6] {
            let x = x_update(&problem, &random_state(&problem, gamma, &mut rng)).unwrap();
            assert!(x.norm() < last);
            last = x.norm();
        }
        assert!(last < 1e-4);
    }

    #[test]
    fn isotropic_noise_normalizes_to_identity() {
        let rom = random_rom(8, 6, 2, 4, 9);
        let noise = NoiseModel::isotropic(8, 4.0).unwrap();
        let problem = normalize(&rom, &noise, Penalty::GroupL0 { p: 3 }).unwrap();
        assert!((problem.a() - rom.modes().transpose() / 2.0).norm() < 1e-15);
        assert!((problem.dense_q() - Matrix::identity(8, 8)).norm() < 1e-15);
    }

    #[test]
    fn normalized_q_has_unit_diagonal() {
        let rom = random_rom(8, 7, 2, 5, 10);
        let noise = build_noise_model(&rom).unwrap();
        let problem = normalize(&rom, &noise, Penalty::GroupL0 { p: 3 }).unwrap();
        // Assemble the diagonal entry by entry.
        for i in 0..8 {
            let mut d = problem.dq()[i];
            for k in 0..problem.sq().len() {
                d += (problem.uq()[(i, k)] * problem.sq()[k]).powi(2);
            }
            assert!((d - 1.0).abs() < 1e-12);
        }
        let raw = AdmmProblem::build(&rom, &noise, Penalty::GroupL0 { p: 3 }, Normalization::Raw).unwrap();
        assert_eq!(raw.a(), rom.modes().transpose());
        assert!((raw.dense_q() - noise.dense_covariance()).norm() < 1e-15);
    }

    #[test]
    fn budget_is_checked() {
        let rom = random_rom(8, 6, 3, 4, 1);
        for p in [2, 9] {
            assert!(matches!(AdmmProblem::white(&rom, Penalty::GroupL0 { p }), Err(Error::InfeasibleBudget { .. })));
        }
    }

    #[test]
    fn unconstrained_white_problem_reaches_minimum_norm_solution() {
        let rom = random_rom(10, 6, 3, 4, 12);
        let problem = AdmmProblem::white(&rom, Penalty::GroupL0 { p: 10 }).unwrap();
        let config = SolverConfig { eps_conv: Some(1e-13), ..SolverConfig::default() };
        let out = solve(&problem, &config, None).unwrap();
        assert!(out.converged);
        let pinv = crate::linalg::right_pseudo_inverse(&problem.a()).unwrap();
        assert!((&out.state.x - &pinv).norm() < 1e-9);
        assert_eq!(out.sensors.len(), 10);
    }

    #[test]
    fn identity_block_is_selected() {
        let (n, r1, m) = (12, 3, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut seed = random_matrix(n, m, &mut rng) * 1e-3;
        for i in 0..r1 {
            seed[(i, i)] = 1.0;
        }
        let u = seed.qr().q();
        let s = Vector::from_iterator(m, (0..m).map(|k| 1.0 / ((k + 1) as f64).sqrt()));
        let rom = ReducedOrderModel::from_factors(u, s, Matrix::identity(m, m), r1, r1 + 2).unwrap();
        let noise = NoiseModel::white(n);
        let (best, _) = exhaustive_best(&rom, &noise, r1).unwrap();
        assert_eq!(best.indices(), &[0, 1, 2]);
        let problem = AdmmProblem::white(&rom, Penalty::GroupL0 { p: r1 }).unwrap();
        let out = solve(&problem, &SolverConfig::default(), None).unwrap();
        assert_eq!(out.sensors.indices(), &[0, 1, 2]);
    }

    #[test]
    fn polish_gives_unbiased_gain() {
        let rom = random_rom(12, 8, 3, 6, 6);
        let noise = build_noise_model(&rom).unwrap();
        let problem = normalize(&rom, &noise, Penalty::GroupL0 { p: 4 }).unwrap();
        let out = solve(&problem, &SolverConfig::default(), None).unwrap();
        let est = polish(&rom, &noise, &out.sensors).unwrap();
        let c = measurement_matrix(&rom, &out.sensors).unwrap();
        assert!((est.gain() * c - Matrix::identity(3, 3)).norm() < 1e-8);
        assert_eq!(est.objective(), aopt_objective(&rom, &noise, &out.sensors).unwrap());
        let direct = wls_estimator(&rom, &noise, &out.sensors).unwrap();
        assert_eq!(est.gain(), direct.gain());
    }

    #[test]
    fn trace_is_recorded_every_iteration() {
        let rom = random_rom(12, 8, 3, 6, 8);
        let noise = build_noise_model(&rom).unwrap();
        let problem = normalize(&rom, &noise, Penalty::GroupL0 { p: 5 }).unwrap();
        let config = SolverConfig { max_iters: 50, ..SolverConfig::default() };
        let a = solve(&problem, &config, None).unwrap();
        let b = solve(&problem, &config, None).unwrap();
        assert_eq!(a.state.trace.len(), a.state.iter);
        assert!(a.state.trace.iter().all(|t| t.residual.is_finite() && t.objective.is_finite()));
        assert_eq!(a.state.trace, b.state.trace);
        assert_eq!(a.sensors.len(), 5);
    }

    #[test]
    fn group_l1_mode_runs() {
        let rom = random_rom(12, 8, 2, 5, 13);
        let noise = build_noise_model(&rom).unwrap();
        let problem = normalize(&rom, &noise, Penalty::GroupL1 { lambda: 0.05 }).unwrap();
        let out = solve(&problem, &SolverConfig::default(), None).unwrap();
        assert!(!out.sensors.is_empty());
        assert!(out.state.trace.last().unwrap().residual < 1e-3);
    }

    #[test]
    fn config_validation() {
        let ok = SolverConfig::default();
        assert!(ok.validate().is_ok());
        assert!((ok.tolerance(100, 4) - 2e-5).abs() < 1e-18);
        for bad in [
            SolverConfig { gamma_init: 0.0, ..ok.clone() },
            SolverConfig { eta: 1.0, ..ok.clone() },
            SolverConfig { gamma_decay_period: 0, ..ok.clone() },
            SolverConfig { eps_conv: Some(-1.0), ..ok.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))));
        }
    }
}
