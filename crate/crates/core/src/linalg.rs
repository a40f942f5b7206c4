//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{Complex, DMatrix, DVector, Schur};

use crate::error::{Error, Result};

pub(crate) fn ones(n: usize) -> DVector<f64> {
    DVector::from_element(n, 1.0)
}

pub(crate) fn inf_norm_vec(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Maximum absolute row sum.
pub(crate) fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max)
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Solves `a x = b` by LU with one step of iterative refinement.
pub(crate) fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let lu = a.clone().lu();
    let mut x = lu
        .solve(b)
        .ok_or_else(|| Error::regime("linear system is singular"))?;
    let r = b - a * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    Ok(x)
}

/// Inverse by LU with one step of iterative refinement.
pub(crate) fn inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let lu = a.clone().lu();
    let id = DMatrix::<f64>::identity(n, n);
    let mut x = lu
        .solve(&id)
        .ok_or_else(|| Error::regime("matrix is singular"))?;
    let r = &id - a * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    Ok(x)
}

/// Solves `a x = b` for symmetric positive-definite `a`; `None` when Cholesky fails.
pub(crate) fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let sym = symmetrize(a);
    let chol = sym.clone().cholesky()?;
    let mut x = chol.solve(b);
    let r = b - &sym * &x;
    x += chol.solve(&r);
    Some(x)
}

pub(crate) fn is_positive_definite(a: &DMatrix<f64>) -> bool {
    symmetrize(a).cholesky().is_some()
}

pub(crate) fn check_len(what: &str, v: &DVector<f64>, n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::input(format!(
            "{what} has length {}, expected {n}",
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::input(format!("{what} has non-finite entries")));
    }
    Ok(())
}

const SCHUR_MAX_SWEEPS: usize = 5_000;

/// Eigenvalues via the real Schur form with a bounded iteration count. The
/// shifted QR sweep can cycle when eigenvalues come in `+-` pairs, so the
/// transpose and a diagonally shifted copy are tried before giving up.
pub(crate) fn complex_eigenvalues(m: &DMatrix<f64>) -> Option<Vec<Complex<f64>>> {
    let n = m.nrows();
    let shift = 0.5 * m.norm().max(1.0);
    let shifted = m + DMatrix::identity(n, n) * shift;
    [(m.clone(), 0.0), (m.transpose(), 0.0), (shifted, shift)]
        .into_iter()
        .find_map(|(a, s)| {
            Schur::try_new(a, f64::EPSILON, SCHUR_MAX_SWEEPS)
                .map(|schur| schur.complex_eigenvalues().iter().map(|z| z - s).collect())
        })
}

/// Spectral radius of an entrywise non-negative matrix. Falls back to
/// Collatz-Wielandt bounds for `I + A` when the Schur iteration stalls.
pub(crate) fn nonnegative_spectral_radius(a: &DMatrix<f64>) -> f64 {
    if let Some(eigs) = complex_eigenvalues(a) {
        return eigs.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
    }
    collatz_wielandt(a)
}

fn collatz_wielandt(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let shifted = DMatrix::identity(n, n) + a;
    let mut x = ones(n);
    let mut upper = f64::INFINITY;
    for _ in 0..1_000_000 {
        let y = &shifted * &x;
        let ratios = y.component_div(&x);
        let lower = ratios.min();
        upper = ratios.max();
        if upper - lower <= 1e-14 * upper {
            break;
        }
        x = &y / y.amax();
    }
    upper - 1.0
}
