//! Weighted least squares helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::data::Rows;
use crate::error::{check_len, Result};

/// Design matrix with an optional leading column of ones.
pub fn design_matrix(x: &Rows, intercept: bool) -> DMatrix<f64> {
    let p = x.n_cols() + usize::from(intercept);
    let n = x.n_rows();
    DMatrix::from_fn(n, p, |i, j| {
        if intercept {
            if j == 0 {
                1.0
            } else {
                x.get(i, j - 1)
            }
        } else {
            x.get(i, j)
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstsqSolution {
    pub beta: Vec<f64>,
    pub rank: usize,
}

/// Minimum-norm solution of `min sum w_i (y_i - a_i' beta)^2`.
pub fn weighted_lstsq(a: &DMatrix<f64>, y: &[f64], w: &[f64]) -> Result<LstsqSolution> {
    check_len("design rows vs y", a.nrows(), y.len())?;
    check_len("weights vs y", w.len(), y.len())?;
    let p = a.ncols();
    if p == 0 {
        return Ok(LstsqSolution {
            beta: Vec::new(),
            rank: 0,
        });
    }
    let mut aw = a.clone();
    let mut yw = DVector::from_column_slice(y);
    for i in 0..a.nrows() {
        let s = w[i].sqrt();
        aw.row_mut(i).scale_mut(s);
        yw[i] *= s;
    }
    let svd = aw.svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = smax * f64::EPSILON * (a.nrows().max(p) as f64);
    let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
    let beta = if rank == 0 {
        DVector::zeros(p)
    } else {
        svd.solve(&yw, tol).expect("u and v computed")
    };
    Ok(LstsqSolution {
        beta: beta.iter().copied().collect(),
        rank,
    })
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
