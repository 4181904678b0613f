//! Linear solve of the ADMM X-subproblem.
//!
//! The minimizer of `tr(XᵀQX) + (1/2γ)‖Z − GX − Y‖²_F` with `G = [I; A]`
//! satisfies
//!
//! ```text
//! (2Q + (1/γ)I + (1/γ)AᵀA) X = (1/γ)[(Z₁ − Y₁) + Aᵀ(Z₂ − Y₂)]
//! ```
//!
//! Writing `W = √2·UQ·diag(SQ)` so that `2Q = WWᵀ + 2·diag(dq)`, the system
//! matrix is `M = J + WWᵀ` with `J = D + (1/γ)AᵀA` and `D = 2·diag(dq) + I/γ`.
//! Both inverses are applied through the matrix inversion lemma:
//!
//! ```text
//! J⁻¹ = D⁻¹ − D⁻¹Aᵀ(γI + AD⁻¹Aᵀ)⁻¹AD⁻¹
//! M⁻¹ = J⁻¹ − J⁻¹W(I + WᵀJ⁻¹W)⁻¹WᵀJ⁻¹
//! ```
//!
//! Everything that depends on γ only is factored once in
//! [`XUpdateFactors::new`]; applying the inverse then costs
//! `O(n·r1·(r1 + q))`.

use nalgebra::{Cholesky, Dyn};

use super::AdmmProblem;
use crate::error::Result;
use crate::linalg::cholesky;
use crate::{Matrix, Vector};

#[derive(Debug, Clone)]
pub(crate) struct XUpdateFactors {
    gamma: f64,
    dinv: Vector,
    /// `D⁻¹Aᵀ`, `n × r1`.
    dinv_at: Matrix,
    /// `γI + AD⁻¹Aᵀ`
    inner_a: Cholesky<f64, Dyn>,
    /// `J⁻¹W`, `n × q`.
    jinv_w: Matrix,
    /// `I + WᵀJ⁻¹W`
    inner_w: Option<Cholesky<f64, Dyn>>,
    // workspaces
    small_r: Matrix,
    small_q: Matrix,
}

impl XUpdateFactors {
    pub(crate) fn new(problem: &AdmmProblem, gamma: f64) -> Result<Self> {
        let at = &problem.at;
        let (n, r) = at.shape();
        let w = &problem.w;
        let q = w.ncols();
        let dinv = Vector::from_iterator(n, problem.dq.iter().map(|&d| 1.0 / (2.0 * d + 1.0 / gamma)));
        let mut dinv_at = at.clone();
        scale_rows(&mut dinv_at, &dinv);

        let mut inner = at.tr_mul(&dinv_at);
        for i in 0..r {
            inner[(i, i)] += gamma;
        }
        let inner_a = cholesky(inner, "γI + AD⁻¹Aᵀ")?;

        let (jinv_w, inner_w) = if q == 0 {
            (Matrix::zeros(n, 0), None)
        } else {
            let mut jinv_w = w.clone();
            scale_rows(&mut jinv_w, &dinv);
            let mut s = at.tr_mul(&jinv_w);
            inner_a.solve_mut(&mut s);
            jinv_w.gemm(-1.0, &dinv_at, &s, 1.0);
            let mut inner = w.tr_mul(&jinv_w);
            for i in 0..q {
                inner[(i, i)] += 1.0;
            }
            let inner_w = cholesky(inner, "I + WᵀJ⁻¹W")?;
            (jinv_w, Some(inner_w))
        };
        Ok(Self {
            gamma,
            dinv,
            dinv_at,
            inner_a,
            jinv_w,
            inner_w,
            small_r: Matrix::zeros(r, r),
            small_q: Matrix::zeros(q, 0),
        })
    }

    pub(crate) fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Overwrites `b` (`n × k`) with `M⁻¹·b / γ`.
    pub(crate) fn apply_scaled(&mut self, problem: &AdmmProblem, b: &mut Matrix) {
        let at = &problem.at;
        let k = b.ncols();
        let inv_gamma = 1.0 / self.gamma;
        for mut col in b.column_iter_mut() {
            for (x, d) in col.iter_mut().zip(self.dinv.iter()) {
                *x *= d * inv_gamma;
            }
        }
        // J⁻¹: subtract D⁻¹Aᵀ(γI + AD⁻¹Aᵀ)⁻¹A·(D⁻¹b).
        if self.small_r.ncols() != k {
            self.small_r = Matrix::zeros(at.ncols(), k);
        }
        self.small_r.gemm_tr(1.0, at, b, 0.0);
        self.inner_a.solve_mut(&mut self.small_r);
        b.gemm(-1.0, &self.dinv_at, &self.small_r, 1.0);

        // Low-rank correction.
        if let Some(inner_w) = &self.inner_w {
            if self.small_q.ncols() != k {
                self.small_q = Matrix::zeros(problem.w.ncols(), k);
            }
            self.small_q.gemm_tr(1.0, &problem.w, b, 0.0);
            inner_w.solve_mut(&mut self.small_q);
            b.gemm(-1.0, &self.jinv_w, &self.small_q, 1.0);
        }
    }
}

fn scale_rows(m: &mut Matrix, s: &Vector) {
    for mut col in m.column_iter_mut() {
        for (x, f) in col.iter_mut().zip(s.iter()) {
            *x *= f;
        }
    }
}

/// Right-hand side `(Z₁ − Y₁) + Aᵀ(Z₂ − Y₂)` written into `out`.
pub(crate) fn assemble_rhs(
    problem: &AdmmProblem,
    z1: &Matrix,
    y1: &Matrix,
    z2: &Matrix,
    y2: &Matrix,
    out: &mut Matrix,
) {
    out.copy_from(z1);
    *out -= y1;
    let d2 = z2 - y2;
    out.gemm(1.0, &problem.at, &d2, 1.0);
}
