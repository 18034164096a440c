use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::data::RespondentData;
use crate::error::{Error, Result};
use crate::imputer::Model;
use crate::linalg::design_matrix;
use crate::popgen::sigmoid;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogisticFit {
    pub beta: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Some coefficient hit the cap (separation or a degenerate outcome).
    pub separated: bool,
}

impl LogisticFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.beta[0] + self.beta[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>())
    }
}

impl Model for LogisticFit {
    fn predict(&self, x: &[f64]) -> f64 {
        LogisticFit::predict(self, x)
    }

    fn n_features(&self) -> usize {
        self.beta.len() - 1
    }

    fn summary(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or_default()
    }
}

fn log_lik(a: &DMatrix<f64>, y: &[f64], w: &[f64], beta: &DVector<f64>) -> f64 {
    let eta = a * beta;
    eta.iter()
        .zip(y)
        .zip(w)
        .map(|((e, y), w)| {
            // log(1 + exp(e)) computed stably
            let softplus = if *e > 0.0 { e + (-e).exp().ln_1p() } else { e.exp().ln_1p() };
            w * (y * e - softplus)
        })
        .sum()
}

/// Weighted logistic regression by damped Newton-Raphson. Coefficients are
/// clamped to `[-coef_cap, coef_cap]`.
pub fn fit_weighted_logistic(
    data: &RespondentData,
    max_iter: usize,
    tol: f64,
    coef_cap: f64,
) -> Result<LogisticFit> {
    if let Some(v) = data.y.iter().find(|v| **v != 0.0 && **v != 1.0) {
        return Err(Error::invalid(format!("logistic regression needs 0/1 outcomes, got {v}")));
    }
    let a = design_matrix(&data.x, true);
    let (n, p) = a.shape();
    let y = &data.y;
    let w = &data.weights;
    let mut beta = DVector::<f64>::zeros(p);
    let mut ll = log_lik(&a, y, w, &beta);
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..max_iter {
        iterations = it + 1;
        let eta = &a * &beta;
        let mut grad = DVector::<f64>::zeros(p);
        let mut hess = DMatrix::<f64>::zeros(p, p);
        for i in 0..n {
            let pi = sigmoid(eta[i]);
            let row = a.row(i).transpose();
            grad.axpy(w[i] * (y[i] - pi), &row, 1.0);
            let h = w[i] * pi * (1.0 - pi);
            hess.ger(h, &row, &row, 1.0);
        }
        // small ridge keeps the system solvable when probabilities saturate
        for j in 0..p {
            hess[(j, j)] += 1e-10;
        }
        let step = match hess.clone().cholesky() {
            Some(c) => c.solve(&grad),
            None => hess
                .svd(true, true)
                .solve(&grad, 1e-12)
                .map_err(|e| Error::invalid(e.to_string()))?,
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let mut cand = &beta + &step * t;
            cand.iter_mut().for_each(|b| *b = b.clamp(-coef_cap, coef_cap));
            let cll = log_lik(&a, y, w, &cand);
            if cll >= ll - 1e-12 * ll.abs() {
                let moved = (&cand - &beta).amax();
                beta = cand;
                ll = cll;
                accepted = true;
                if moved < tol {
                    converged = true;
                }
                break;
            }
            t *= 0.5;
        }
        if !accepted || converged {
            converged = true;
            break;
        }
    }
    // saturated fitted probabilities mean the MLE does not exist
    let eta = &a * &beta;
    let separated = beta.iter().any(|b| b.abs() >= coef_cap)
        || eta.iter().zip(y).all(|(e, y)| (y - sigmoid(*e)).abs() < 1e-6);
    Ok(LogisticFit {
        beta: beta.iter().copied().collect(),
        iterations,
        converged,
        separated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Rows;

    fn lik(x: &[f64], y: &[f64], w: &[f64], b0: f64, b1: f64) -> f64 {
        x.iter()
            .zip(y)
            .zip(w)
            .map(|((x, y), w)| {
                let p = 1.0 / (1.0 + (-(b0 + b1 * x)).exp());
                w * (y * p.ln() + (1.0 - y) * (1.0 - p).ln())
            })
            .sum()
    }

    #[test]
    fn all_zero_outcome_capped() {
        let x = Rows::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let fit = fit_weighted_logistic(&RespondentData::unweighted(x, vec![0.0; 3]).unwrap(), 100, 1e-10, 30.0).unwrap();
        assert!(fit.predict(&[1.0]) < 1e-10);
        assert!(fit.separated);
    }

    #[test]
    fn separable_data_flagged() {
        let x = Rows::from_rows(&[[-2.0], [-1.0], [1.0], [2.0]]).unwrap();
        let fit = fit_weighted_logistic(
            &RespondentData::unweighted(x, vec![0.0, 0.0, 1.0, 1.0]).unwrap(),
            200,
            1e-10,
            30.0,
        )
        .unwrap();
        assert!(fit.separated);
        assert!(fit.beta.iter().all(|b| b.abs() <= 30.0));
        assert!(fit.predict(&[2.0]) > 0.99);
    }

    #[test]
    fn rejects_non_binary() {
        let x = Rows::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(fit_weighted_logistic(&RespondentData::unweighted(x, vec![0.0, 0.5]).unwrap(), 10, 1e-8, 30.0).is_err());
    }

    #[test]
    fn matches_likelihood_grid() {
        let x = vec![-1.5, -0.7, -0.2, 0.1, 0.4, 0.9, 1.3, 2.0, -0.4, 0.6];
        let y = vec![0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let w = vec![1.0, 2.0, 1.5, 3.0, 1.0, 2.5, 1.0, 2.0, 1.2, 0.8];
        let rows = Rows::new(x.clone(), 1).unwrap();
        let fit = fit_weighted_logistic(&RespondentData::new(rows, y.clone(), w.clone()).unwrap(), 100, 1e-12, 30.0).unwrap();
        assert!(fit.converged && !fit.separated);

        // coordinate grid refinement of the likelihood
        let (mut b0, mut b1, mut h) = (0.0, 0.0, 1.0);
        while h > 1e-7 {
            let mut best = (lik(&x, &y, &w, b0, b1), b0, b1);
            for i in -10..=10 {
                for j in -10..=10 {
                    let (c0, c1) = (b0 + i as f64 * h, b1 + j as f64 * h);
                    let l = lik(&x, &y, &w, c0, c1);
                    if l > best.0 {
                        best = (l, c0, c1);
                    }
                }
            }
            if best.1 == b0 && best.2 == b1 {
                h /= 4.0;
            }
            b0 = best.1;
            b1 = best.2;
        }
        assert!((fit.beta[0] - b0).abs() < 1e-4, "{} vs {b0}", fit.beta[0]);
        assert!((fit.beta[1] - b1).abs() < 1e-4, "{} vs {b1}", fit.beta[1]);
    }
}
