//! Small dense linear-algebra helpers shared by the learner.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{PanfisError, Result};

/// Symmetry tolerance applied to every stored matrix.
pub const SYMMETRY_TOL: f64 = 1e-10;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn symmetrize_in_place(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let scale = m[(i, j)].abs().max(m[(j, i)].abs()).max(1.0);
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs() / scale);
        }
    }
    worst
}

/// `v · (A v)` with `A` symmetrized first.
pub fn quad_form(a: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    let n = v.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += 0.5 * (a[(i, j)] + a[(j, i)]) * v[j];
        }
        acc += v[i] * row;
    }
    acc
}

/// Natural log of the determinant of an SPD matrix, via Cholesky.
pub fn log_det_spd(m: &DMatrix<f64>) -> Option<f64> {
    let chol = symmetrize(m).cholesky()?;
    let l = chol.l_dirty();
    let mut acc = 0.0;
    for i in 0..m.nrows() {
        acc += l[(i, i)].ln();
    }
    Some(2.0 * acc)
}

pub fn is_spd(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
        && max_asymmetry(m) <= SYMMETRY_TOL
        && symmetrize(m).cholesky().is_some()
}

/// Full validation used when loading documents: symmetry, then eigenvalues.
pub fn validate_spd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(PanfisError::InvalidModel(format!("{what} is not square")));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(PanfisError::InvalidModel(format!("{what} has non-finite entries")));
    }
    let asymmetry = max_asymmetry(m);
    if asymmetry > SYMMETRY_TOL {
        return Err(PanfisError::NotSymmetric {
            what: what.to_string(),
            asymmetry,
        });
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let min_eigenvalue = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_eigenvalue > 0.0) || symmetrize(m).cholesky().is_none() {
        return Err(PanfisError::NotPositiveDefinite {
            what: what.to_string(),
            min_eigenvalue,
        });
    }
    Ok(())
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(PanfisError::InvalidModel(format!("{what} has ragged rows")));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}
