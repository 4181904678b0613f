//! Greedy A-optimal selection under white or correlated noise.
//!
//! Sensors are added one at a time, each time taking the candidate that
//! minimizes `tr((CᵀRp⁻¹C)⁻¹)` of the enlarged set. Candidates are scored
//! in whitened coordinates: with `Rp = LLᵀ` for the current set `S`, adding
//! candidate `i` appends the row `l = L⁻¹R[S,i]`, `d = √(R_ii − ‖l‖²)` to the
//! Cholesky factor and the whitened measurement row
//! `c̃ = (c_i − lᵀ·L⁻¹C_S) / d` to the whitened measurement matrix. The
//! Fisher information then grows by the rank-one term `c̃ᵀc̃`, which is
//! scored with Sherman–Morrison once the information matrix is invertible.
//!
//! Before `r1` sensors are placed the information matrix is singular. Those
//! steps rank candidates by the rank of the enlarged information matrix
//! (larger first) and then by the trace of its pseudo-inverse.

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::estimation::{aopt_objective, SensorSet};
use crate::linalg::{cholesky, spd_condition, COND_LIMIT};
use crate::rom_noise::{NoiseModel, ReducedOrderModel};
use crate::Matrix;

/// Relative eigenvalue cut-off for the rank of a singular information matrix.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    /// Score with `R = I`, ignoring the noise model.
    White,
    /// Score with the full low-rank-plus-diagonal covariance.
    Correlated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GreedyConfig {
    pub noise_mode: NoiseMode,
    pub p: usize,
}

#[derive(Debug, Clone)]
pub struct GreedyResult {
    /// Selected rows in the order they were added.
    pub sensors: SensorSet,
    /// Score of the enlarged set after every step: the trace of the inverse
    /// information matrix (pseudo-inverse while it is still singular).
    pub trace: Vec<f64>,
    /// A-optimality value of the final set under the scoring noise model.
    pub objective: f64,
}

/// Incremental whitened state of the current selection.
struct Selection {
    indices: Vec<usize>,
    /// Cholesky factor of `R_S`, grown one row at a time.
    chol: Matrix,
    /// `L⁻¹·R[S, :]`, `k × n`.
    cross: Matrix,
    /// `L⁻¹·C_S`, `k × r1`.
    white_c: Matrix,
}

pub fn greedy_select(rom: &ReducedOrderModel, noise: &NoiseModel, config: &GreedyConfig) -> Result<GreedyResult> {
    let (n, r1, p) = (rom.n(), rom.r1(), config.p);
    if p < r1 || p > n {
        return Err(Error::InfeasibleBudget { p, r1, n });
    }
    let white;
    let noise = match config.noise_mode {
        NoiseMode::White => {
            white = NoiseModel::white(n);
            &white
        }
        NoiseMode::Correlated => {
            if noise.n() != n {
                return Err(Error::DimensionMismatch(format!(
                    "noise model has {} rows, reduced-order model {n}",
                    noise.n()
                )));
            }
            noise
        }
    };
    let c = rom.modes();
    let factor = noise.lowrank_factor();
    let rd = noise.rd();

    let mut sel = Selection {
        indices: Vec::with_capacity(p),
        chol: Matrix::zeros(0, 0),
        cross: Matrix::zeros(0, n),
        white_c: Matrix::zeros(0, r1),
    };
    let mut taken = vec![false; n];
    let mut trace = Vec::with_capacity(p);

    for _ in 0..p {
        let k = sel.indices.len();
        // Schur complements d_i² and whitened candidate rows c̃_i (n × r1).
        let mut d = vec![0.0; n];
        for i in 0..n {
            let l2: f64 = sel.cross.column(i).norm_squared();
            d[i] = rd[i] - l2;
        }
        let mut cand = c.clone();
        if k > 0 {
            cand.gemm_tr(-1.0, &sel.cross, &sel.white_c, 1.0);
        }
        let usable: Vec<bool> = (0..n).map(|i| !taken[i] && d[i] > 1e-12 * rd[i]).collect();
        for i in 0..n {
            if usable[i] {
                let s = 1.0 / d[i].sqrt();
                cand.row_mut(i).scale_mut(s);
            }
        }

        let fim = sel.white_c.transpose() * &sel.white_c;
        let full_rank = k >= r1 && spd_condition(&fim) <= COND_LIMIT;
        let best = if full_rank {
            score_sherman_morrison(&fim, &cand, &usable)?
        } else {
            score_pseudo_inverse(&sel.white_c, &cand, &usable)
        };
        let (j, score) = best.ok_or(Error::SingularFim(f64::INFINITY))?;

        // Commit j: extend the Cholesky factor, whitened rows and cross terms.
        let l = sel.cross.column(j).into_owned();
        let dj = d[j].sqrt();
        let mut chol = Matrix::zeros(k + 1, k + 1);
        chol.view_mut((0, 0), (k, k)).copy_from(&sel.chol);
        for a in 0..k {
            chol[(k, a)] = l[a];
        }
        chol[(k, k)] = dj;
        sel.chol = chol;

        // Row j of R: F_j·Fᵀ off the diagonal, Rd_j on it.
        let mut r_row = factor.row(j) * factor.transpose();
        r_row[j] = rd[j];
        let new_cross = (r_row - l.transpose() * &sel.cross) / dj;
        sel.cross = sel.cross.clone().insert_row(k, 0.0);
        sel.cross.row_mut(k).copy_from(&new_cross);
        sel.white_c = sel.white_c.clone().insert_row(k, 0.0);
        sel.white_c.row_mut(k).copy_from(&cand.row(j));

        sel.indices.push(j);
        taken[j] = true;
        trace.push(score);
    }

    let sensors = SensorSet::new(sel.indices)?;
    let objective = aopt_objective(rom, noise, &sensors)?;
    Ok(GreedyResult { sensors, trace, objective })
}

/// `tr((F + c̃ᵀc̃)⁻¹) = tr(F⁻¹) − ‖F⁻¹c̃‖² / (1 + c̃F⁻¹c̃ᵀ)` for every usable
/// candidate row; returns the lowest-index minimizer.
fn score_sherman_morrison(fim: &Matrix, cand: &Matrix, usable: &[bool]) -> Result<Option<(usize, f64)>> {
    let fim_inv = cholesky(fim.clone(), "Fisher information")?.inverse();
    let base = fim_inv.trace();
    let g = cand * &fim_inv;
    let mut best: Option<(usize, f64)> = None;
    for (i, _) in usable.iter().enumerate().filter(|(_, &u)| u) {
        let gi = g.row(i);
        let quad = gi.dot(&cand.row(i));
        let score = base - gi.norm_squared() / (1.0 + quad);
        if best.is_none_or(|(_, b)| score < b) {
            best = Some((i, score));
        }
    }
    Ok(best)
}

/// Rank-then-pseudo-inverse-trace scoring while the information matrix is
/// singular. The nonzero spectrum of `C̃ᵀC̃` equals that of the small Gram
/// matrix `C̃C̃ᵀ`, so the `(k+1) × (k+1)` Gram is decomposed instead.
fn score_pseudo_inverse(white_c: &Matrix, cand: &Matrix, usable: &[bool]) -> Option<(usize, f64)> {
    let k = white_c.nrows();
    let base_gram = white_c * white_c.transpose();
    let cross = cand * white_c.transpose();
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..cand.nrows() {
        if !usable[i] {
            continue;
        }
        let mut gram = Matrix::zeros(k + 1, k + 1);
        gram.view_mut((0, 0), (k, k)).copy_from(&base_gram);
        for a in 0..k {
            gram[(k, a)] = cross[(i, a)];
            gram[(a, k)] = cross[(i, a)];
        }
        gram[(k, k)] = cand.row(i).norm_squared();
        let eig = SymmetricEigen::new(gram).eigenvalues;
        let max = eig.max();
        if !(max > 0.0) {
            continue;
        }
        let (rank, tr) =
            eig.iter().filter(|&&e| e > RANK_TOLERANCE * max).fold((0usize, 0.0), |(r, t), &e| (r + 1, t + 1.0 / e));
        let better = match best {
            None => true,
            Some((_, br, bt)) => rank > br || (rank == br && tr < bt),
        };
        if better {
            best = Some((i, rank, tr));
        }
    }
    best.map(|(i, _, tr)| (i, tr))
}
