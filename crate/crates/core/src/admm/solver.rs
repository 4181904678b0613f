use super::prox::{block_soft_threshold_in_place, l0_bht_in_place, row_norms_sq, top_rows, ProjectionScratch};
use super::woodbury::{assemble_rhs, XUpdateFactors};
use super::{AdmmProblem, Penalty, SolverConfig};
use crate::error::{Error, Result};
use crate::estimation::SensorSet;
use crate::linalg::right_pseudo_inverse;
use crate::Matrix;

/// One row of the iteration trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub gamma: f64,
    /// `tr(XᵀQX)`
    pub objective: f64,
    /// `‖AX − I‖_F`
    pub residual: f64,
    /// Rows of `X` whose norm exceeds the polish threshold.
    pub active_rows: usize,
}

/// ADMM iterates. `Z` and `Y` are kept as their two blocks, `n × r1` on
/// top of `r1 × r1`.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub x: Matrix,
    pub z1: Matrix,
    pub z2: Matrix,
    pub y1: Matrix,
    pub y2: Matrix,
    pub gamma: f64,
    pub iter: usize,
    pub trace: Vec<TraceRecord>,
}

impl SolverState {
    /// `X = x0`, `Z = Y = 0`.
    pub fn new(x0: Matrix, gamma: f64) -> Self {
        let (n, r) = x0.shape();
        Self {
            x: x0,
            z1: Matrix::zeros(n, r),
            z2: Matrix::zeros(r, r),
            y1: Matrix::zeros(n, r),
            y2: Matrix::zeros(r, r),
            gamma,
            iter: 0,
            trace: Vec::new(),
        }
    }

    pub fn z_parts(&self) -> (Matrix, Matrix) {
        (self.z1.clone(), self.z2.clone())
    }

    pub fn y_parts(&self) -> (Matrix, Matrix) {
        (self.y1.clone(), self.y2.clone())
    }

    /// `[Z₁; Z₂]`, `(n + r1) × r1`.
    pub fn z(&self) -> Matrix {
        stack(&self.z1, &self.z2)
    }

    /// `[Y₁; Y₂]`, `(n + r1) × r1`.
    pub fn y(&self) -> Matrix {
        stack(&self.y1, &self.y2)
    }
}

fn stack(top: &Matrix, bottom: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub state: SolverState,
    /// Selected rows in ascending order.
    pub sensors: SensorSet,
    /// False when `max_iters` ran out before the iterates settled. The
    /// state is still the last iterate and `sensors` is still usable.
    pub converged: bool,
}

/// Runs ADMM with a decreasing step size.
///
/// Each iteration:
///
/// 1. `X ← argmin tr(XᵀQX) + (1/2γ)‖Z − GX − Y‖²`
/// 2. `Z₁ ← prox(X + Y₁)`, `Z₂ ← I`
/// 3. `Y ← Y + GX − Z`
///
/// and every `gamma_decay_period` iterations `γ ← η·γ`. Iteration stops once
/// `‖X⁽ᵏ⁾ − X⁽ᵏ⁻¹⁾‖_F` falls to the tolerance. When `initial` is `None` the
/// iteration starts from `X = Aᵀ(AAᵀ)⁻¹`.
pub fn solve(problem: &AdmmProblem, config: &SolverConfig, initial: Option<Matrix>) -> Result<SolveOutcome> {
    config.validate()?;
    let (n, r) = (problem.n(), problem.r1());
    let x0 = match initial {
        Some(x0) if x0.shape() != (n, r) => {
            return Err(Error::DimensionMismatch(format!(
                "initial X is {}×{}, expected {n}×{r}",
                x0.nrows(),
                x0.ncols()
            )))
        }
        Some(x0) => x0,
        None => right_pseudo_inverse(&problem.a())?,
    };
    let tol = config.tolerance(n, r);
    let threshold_sq = config.polish_threshold * config.polish_threshold;
    let identity = Matrix::identity(r, r);

    let mut state = SolverState::new(x0, config.gamma_init);
    let mut factors = XUpdateFactors::new(problem, state.gamma)?;
    let mut x_next = Matrix::zeros(n, r);
    let mut ax = Matrix::zeros(r, r);
    let mut scratch = ProjectionScratch::default();
    let mut norms = Vec::with_capacity(n);
    let mut converged = false;

    while state.iter < config.max_iters {
        if state.iter > 0 && state.iter.is_multiple_of(config.gamma_decay_period) {
            state.gamma *= config.eta;
            factors = XUpdateFactors::new(problem, state.gamma)?;
        }
        debug_assert_eq!(factors.gamma(), state.gamma);

        assemble_rhs(problem, &state.z1, &state.y1, &state.z2, &state.y2, &mut x_next);
        factors.apply_scaled(problem, &mut x_next);

        // Z₁ ← prox(X + Y₁), Y₁ ← Y₁ + X − Z₁
        state.z1.copy_from(&x_next);
        state.z1 += &state.y1;
        match problem.penalty {
            Penalty::GroupL0 { p } => l0_bht_in_place(&mut state.z1, p, &mut scratch),
            Penalty::GroupL1 { lambda } => {
                block_soft_threshold_in_place(&mut state.z1, lambda * state.gamma, &mut norms)
            }
        }
        state.y1 += &x_next;
        state.y1 -= &state.z1;

        // Z₂ ← I, Y₂ ← Y₂ + AX − I
        ax.gemm_tr(1.0, &problem.at, &x_next, 0.0);
        state.z2.copy_from(&identity);
        state.y2 += &ax;
        state.y2 -= &identity;

        let step = (&x_next - &state.x).norm();
        std::mem::swap(&mut state.x, &mut x_next);
        state.iter += 1;

        row_norms_sq(&state.x, &mut norms);
        state.trace.push(TraceRecord {
            iteration: state.iter,
            gamma: state.gamma,
            objective: problem.objective(&state.x),
            residual: (&ax - &identity).norm(),
            active_rows: norms.iter().filter(|&&s| s > threshold_sq).count(),
        });

        if !step.is_finite() {
            return Err(Error::NumericalFailure(format!("iterate diverged at iteration {}", state.iter)));
        }
        if step <= tol {
            converged = true;
            break;
        }
    }

    let sensors = extract_sensors(problem, &state.x, config.polish_threshold)?;
    Ok(SolveOutcome { state, sensors, converged })
}

/// Rows of `x` above the threshold. Under a row budget exactly `p` rows
/// are returned, falling back to the `p` largest when thresholding gives
/// a different count.
fn extract_sensors(problem: &AdmmProblem, x: &Matrix, threshold: f64) -> Result<SensorSet> {
    let mut norms = Vec::new();
    row_norms_sq(x, &mut norms);
    let threshold_sq = threshold * threshold;
    let mut active: Vec<usize> = (0..norms.len()).filter(|&i| norms[i] > threshold_sq).collect();
    if let Penalty::GroupL0 { p } = problem.penalty {
        if active.len() != p {
            top_rows(&norms, p, &mut active);
        }
    }
    active.sort_unstable();
    if active.is_empty() {
        return Err(Error::NumericalFailure("no row of X is above the polish threshold".into()));
    }
    SensorSet::new(active)
}
