use serde::Serialize;

use crate::data::RespondentData;
use crate::error::Result;
use crate::imputer::{Model, WeightMode};
use crate::linalg::{design_matrix, weighted_lstsq};

/// Weighted least squares fit with intercept; `beta[0]` is the intercept.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearFit {
    pub beta: Vec<f64>,
    pub weight_mode: WeightMode,
    pub xtx_rank: usize,
}

impl LinearFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.beta[0] + self.beta[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

/// Rank-deficient designs get the minimum-norm solution.
pub fn fit_weighted_linear(data: &RespondentData) -> Result<LinearFit> {
    let a = design_matrix(&data.x, true);
    let sol = weighted_lstsq(&a, &data.y, &data.weights)?;
    Ok(LinearFit {
        beta: sol.beta,
        weight_mode: WeightMode::Design,
        xtx_rank: sol.rank,
    })
}

impl Model for LinearFit {
    fn predict(&self, x: &[f64]) -> f64 {
        LinearFit::predict(self, x)
    }

    fn n_features(&self) -> usize {
        self.beta.len() - 1
    }

    fn summary(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Rows;
    use crate::rng::seeded;
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;

    #[test]
    fn noiseless_line() {
        let x = Rows::from_rows(&[[-1.0], [0.5], [2.0], [4.0]]).unwrap();
        let y = x.column(0).iter().map(|v| 3.0 + 2.0 * v).collect();
        let fit = fit_weighted_linear(&RespondentData::unweighted(x, y).unwrap()).unwrap();
        assert!((fit.beta[0] - 3.0).abs() < 1e-8 && (fit.beta[1] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn collinear_predictors_min_norm() {
        let x = Rows::from_rows(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0], [4.0, 8.0]]).unwrap();
        let y = vec![1.0, 2.0, 3.0, 4.5];
        let fit = fit_weighted_linear(&RespondentData::unweighted(x.clone(), y.clone()).unwrap()).unwrap();
        assert_eq!(fit.xtx_rank, 2);
        // same predictions as the fit on the single informative column
        let x1 = x.leading_columns(1);
        let f1 = fit_weighted_linear(&RespondentData::unweighted(x1.clone(), y).unwrap()).unwrap();
        for (a, b) in x.iter().zip(x1.iter()) {
            assert!((fit.predict(a) - f1.predict(b)).abs() < 1e-9);
        }
    }

    #[test]
    fn matches_normal_equations_and_weights_sum_to_one() {
        let mut rng = seeded(12);
        let n = 20;
        let x = Rows::new((0..n * 3).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect(), 3).unwrap();
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 10.0).collect();
        let w: Vec<f64> = (0..n).map(|_| 1.0 + rng.random::<f64>() * 5.0).collect();
        let data = RespondentData::new(x.clone(), y.clone(), w.clone()).unwrap();
        let fit = fit_weighted_linear(&data).unwrap();

        // normal equations solved by LU
        let a = DMatrix::from_fn(n, 4, |i, j| if j == 0 { 1.0 } else { x.get(i, j - 1) });
        let wm = DMatrix::from_diagonal(&DVector::from_vec(w.clone()));
        let xtwx = a.transpose() * &wm * &a;
        let xtwy = a.transpose() * &wm * DVector::from_vec(y);
        let beta = xtwx.clone().lu().solve(&xtwy).unwrap();
        for j in 0..4 {
            assert!((fit.beta[j] - beta[j]).abs() <= 1e-8 * beta[j].abs().max(1.0));
        }

        // implied respondent weights w'_ij = x_i' (X'WX)^-1 x_j w_j
        let inv = xtwx.try_inverse().unwrap();
        let xi = DVector::from_vec(vec![1.0, 0.3, -0.7, 1.1]);
        let s: f64 = (0..n)
            .map(|j| (xi.transpose() * &inv * a.row(j).transpose())[(0, 0)] * w[j])
            .sum();
        assert!((s - 1.0).abs() < 1e-10);
    }
}
