//! Stationary laws of small dense Markov chains.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest deviation of any row sum of `matrix` from one.
pub fn row_sum_error(matrix: &DMatrix<f64>) -> f64 {
    matrix.row_iter().map(|r| (r.sum() - 1.0).abs()).fold(0.0, f64::max)
}

/// Solves `pi P = pi`, `sum(pi) = 1` by replacing the last balance equation
/// with the normalisation row.
pub fn stationary_direct(matrix: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = matrix.nrows();
    let mut system = matrix.transpose() - DMatrix::identity(n, n);
    system.row_mut(n - 1).fill(1.0);
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let pi = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular { context: format!("solving stationary equations on {n} states") })?;
    // Round-off can leave tiny negative entries on nearly-unvisited states.
    let mut pi: Vec<f64> = pi.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= total);
    Ok(pi)
}

/// Power iteration from the uniform law; stops when successive iterates are
/// within `tol` in max norm.
pub fn stationary_power(matrix: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = matrix.nrows();
    let mut pi = DVector::from_element(n, 1.0 / n as f64).transpose();
    let mut change = f64::INFINITY;
    for _ in 0..max_iter {
        let next = &pi * matrix;
        change = (&next - &pi).amax();
        pi = next;
        if change <= tol {
            return Ok(pi.iter().copied().collect());
        }
    }
    Err(Error::NoConvergence { what: "power iteration", iterations: max_iter, last: pi[0], residual: change })
}

/// `max_j |(pi P)_j - pi_j|`.
pub fn balance_residual(matrix: &DMatrix<f64>, pi: &[f64]) -> f64 {
    let row = DVector::from_column_slice(pi).transpose();
    (&row * matrix - &row).amax()
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    #[test]
    fn two_state_chain() {
        let p = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.3, 0.7]);
        let pi = stationary_direct(&p).unwrap();
        assert_abs_diff_eq!(pi[0], 0.75, epsilon = 1e-14);
        assert_abs_diff_eq!(pi[1], 0.25, epsilon = 1e-14);
        let pw = stationary_power(&p, 1e-14, 10_000).unwrap();
        assert_abs_diff_eq!(pw[0], 0.75, epsilon = 1e-12);
        assert!(balance_residual(&p, &pi) < 1e-15);
    }

    #[test]
    fn reducible_chain_is_singular_or_flagged() {
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        assert!(stationary_direct(&p).is_err());
    }
}
