//! Dense least-squares helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// A column that is (numerically) a linear combination of earlier columns.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Dependency {
    pub column: usize,
    /// `(earlier column, coefficient)` pairs reproducing `column`.
    pub combination: Vec<(usize, f64)>,
}

/// Relative residual norm below which a column counts as dependent.
const RANK_TOL: f64 = 1e-10;

/// Finds the first column that is linearly dependent on the preceding ones.
pub(crate) fn first_dependency(x: &DMatrix<f64>) -> Option<Dependency> {
    let n = x.nrows();
    let mut basis: Vec<usize> = Vec::new();
    for j in 0..x.ncols() {
        let col = x.column(j).clone_owned();
        let norm = col.norm();
        if norm == 0.0 {
            return Some(Dependency { column: j, combination: Vec::new() });
        }
        if basis.is_empty() {
            basis.push(j);
            continue;
        }
        let sub = DMatrix::from_fn(n, basis.len(), |r, c| x[(r, basis[c])]);
        let Some(coef) = lstsq(&sub, &col) else {
            return Some(Dependency { column: j, combination: Vec::new() });
        };
        let resid = &col - &sub * &coef;
        if resid.norm() <= RANK_TOL * norm {
            let combination = basis.iter().copied().zip(coef.iter().copied()).filter(|(_, c)| c.abs() > 1e-12).collect();
            return Some(Dependency { column: j, combination });
        }
        basis.push(j);
    }
    None
}

/// Least-squares solution of `x b = y` via Householder QR; `None` when rank deficient.
pub(crate) fn lstsq(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    let k = x.ncols();
    if x.nrows() < k {
        return None;
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..k).any(|i| r[(i, i)].abs() <= 1e-13 * scale.max(f64::MIN_POSITIVE)) {
        return None;
    }
    let qty = qr.q().transpose() * y;
    r.solve_upper_triangular(&qty)
}

/// Multi-right-hand-side least squares; columns of `y` solved independently.
pub(crate) fn lstsq_many(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let k = x.ncols();
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..k).any(|i| r[(i, i)].abs() <= 1e-13 * scale.max(f64::MIN_POSITIVE)) {
        return None;
    }
    let qty = qr.q().transpose() * y;
    r.solve_upper_triangular(&qty)
}

/// Inverse of a symmetric matrix, symmetrized; `None` if singular.
pub(crate) fn sym_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let inv = m.clone().try_inverse()?;
    if inv.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some((&inv + inv.transpose()) * 0.5)
}
