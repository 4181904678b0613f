//! Row-group proximal operators.

use crate::Matrix;

/// Squared ℓ2 norm of every row.
pub(crate) fn row_norms_sq(v: &Matrix, out: &mut Vec<f64>) {
    out.clear();
    out.resize(v.nrows(), 0.0);
    for col in v.column_iter() {
        for (o, x) in out.iter_mut().zip(col.iter()) {
            *o += x * x;
        }
    }
}

/// Indices of the `p` rows with the largest norms, larger norm first and
/// the lower index winning ties. `scratch` is reused between calls.
pub(crate) fn top_rows(norms_sq: &[f64], p: usize, scratch: &mut Vec<usize>) {
    scratch.clear();
    scratch.extend(0..norms_sq.len());
    let by_norm = |a: &usize, b: &usize| norms_sq[*b].total_cmp(&norms_sq[*a]).then(a.cmp(b));
    if p < scratch.len() && p > 0 {
        scratch.select_nth_unstable_by(p - 1, by_norm);
        scratch.truncate(p);
    }
    scratch.sort_unstable_by(by_norm);
    scratch.truncate(p);
}

/// Scratch buffers for [`l0_bht_in_place`].
#[derive(Debug, Default, Clone)]
pub(crate) struct ProjectionScratch {
    norms: Vec<f64>,
    order: Vec<usize>,
    keep: Vec<bool>,
}

pub(crate) fn l0_bht_in_place(v: &mut Matrix, p: usize, scratch: &mut ProjectionScratch) {
    let n = v.nrows();
    if p >= n {
        return;
    }
    row_norms_sq(v, &mut scratch.norms);
    top_rows(&scratch.norms, p, &mut scratch.order);
    scratch.keep.clear();
    scratch.keep.resize(n, false);
    for &i in &scratch.order {
        scratch.keep[i] = true;
    }
    for mut col in v.column_iter_mut() {
        for (x, &k) in col.iter_mut().zip(scratch.keep.iter()) {
            if !k {
                *x = 0.0;
            }
        }
    }
}

/// Projection onto matrices with at most `p` nonzero rows: keeps the `p`
/// rows of largest ℓ2 norm and zeros the rest. When the `p`th and
/// `(p+1)`th norms tie, the lower row index is kept.
pub fn l0_bht(v: &Matrix, p: usize) -> Matrix {
    let mut out = v.clone();
    l0_bht_in_place(&mut out, p, &mut ProjectionScratch::default());
    out
}

pub(crate) fn block_soft_threshold_in_place(v: &mut Matrix, threshold: f64, norms: &mut Vec<f64>) {
    row_norms_sq(v, norms);
    let scale: Vec<f64> = norms
        .iter()
        .map(|&s| {
            let norm = s.sqrt();
            if norm == 0.0 {
                0.0
            } else {
                (1.0 - threshold / norm).max(0.0)
            }
        })
        .collect();
    for mut col in v.column_iter_mut() {
        for (x, &s) in col.iter_mut().zip(scale.iter()) {
            *x *= s;
        }
    }
}

/// Proximal operator of `threshold · Σ_i ‖v_i‖₂` over rows `v_i`.
pub fn block_soft_threshold(v: &Matrix, threshold: f64) -> Matrix {
    assert!(threshold >= 0.0, "threshold must be nonnegative");
    let mut out = v.clone();
    block_soft_threshold_in_place(&mut out, threshold, &mut Vec::new());
    out
}
