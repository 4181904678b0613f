//! Small dense helpers shared by the estimation and solver modules.

use nalgebra::{Cholesky, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::Matrix;

/// Condition numbers above this are treated as singular.
pub(crate) const COND_LIMIT: f64 = 1e12;

pub(crate) fn cholesky(m: Matrix, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m).ok_or_else(|| Error::NumericalFailure(format!("{what} is not positive definite")))
}

/// Spectral condition number of a symmetric matrix; infinite when the
/// smallest eigenvalue is not positive.
pub(crate) fn spd_condition(m: &Matrix) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if min <= 0.0 || !min.is_finite() || !max.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Replaces `m` by `(m + mᵀ) / 2`.
pub(crate) fn symmetrize(m: &mut Matrix) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Right pseudo-inverse `Aᵀ(AAᵀ)⁻¹` of a wide full-row-rank matrix.
pub(crate) fn right_pseudo_inverse(a: &Matrix) -> Result<Matrix> {
    let gram = a * a.transpose();
    let chol = cholesky(gram, "A·Aᵀ")?;
    Ok(chol.solve(a).transpose())
}
