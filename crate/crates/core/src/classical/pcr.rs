//! Principal-components regression.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::data::{RespondentData, Rows};
use crate::error::{Error, Result};
use crate::imputer::Model;
use crate::linalg::{design_matrix, weighted_lstsq};

#[derive(Debug, Clone, Serialize)]
pub struct PcrFit {
    pub centre: Vec<f64>,
    /// p x k rotation, column-major by component.
    pub rotation: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    /// Intercept then one coefficient per component.
    pub beta: Vec<f64>,
    pub requested: usize,
}

impl PcrFit {
    pub fn n_components(&self) -> usize {
        self.rotation.len()
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.rotation
            .iter()
            .map(|v| v.iter().zip(x).zip(&self.centre).map(|((a, x), m)| a * (x - m)).sum())
            .collect()
    }
}

impl Model for PcrFit {
    fn predict(&self, x: &[f64]) -> f64 {
        let z = self.scores(x);
        self.beta[0] + self.beta[1..].iter().zip(&z).map(|(b, z)| b * z).sum::<f64>()
    }

    fn n_features(&self) -> usize {
        self.centre.len()
    }

    fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "requested": self.requested,
            "components": self.n_components(),
            "eigenvalues": self.eigenvalues,
        })
    }
}

/// Weighted covariance eigenvectors, top `n_components` by eigenvalue, then
/// weighted least squares on the scores. The component count is reduced to
/// the numerical rank when it exceeds it.
pub fn fit_pcr(data: &RespondentData, n_components: usize) -> Result<PcrFit> {
    if n_components == 0 {
        return Err(Error::invalid("need at least one principal component"));
    }
    let p = data.n_features();
    let n = data.len();
    let sw: f64 = data.weights.iter().sum();
    let centre: Vec<f64> = (0..p)
        .map(|j| data.x.iter().zip(&data.weights).map(|(r, w)| w * r[j]).sum::<f64>() / sw)
        .collect();
    let mut cov = DMatrix::<f64>::zeros(p, p);
    let mut d = vec![0.0; p];
    for (r, w) in data.x.iter().zip(&data.weights) {
        for j in 0..p {
            d[j] = r[j] - centre[j];
        }
        for a in 0..p {
            for b in a..p {
                cov[(a, b)] += w * d[a] * d[b] / sw;
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            cov[(a, b)] = cov[(b, a)];
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let tol = top * 1e-10 * p as f64;
    let rank = eig.eigenvalues.iter().filter(|v| **v > tol).count().max(1);
    let k = n_components.min(rank).min(p);
    let rotation: Vec<Vec<f64>> = order[..k]
        .iter()
        .map(|&c| eig.eigenvectors.column(c).iter().copied().collect())
        .collect();
    let eigenvalues: Vec<f64> = order[..k].iter().map(|&c| eig.eigenvalues[c]).collect();

    let mut fit = PcrFit {
        centre,
        rotation,
        eigenvalues,
        beta: Vec::new(),
        requested: n_components,
    };
    let mut scores = Vec::with_capacity(n * k);
    for r in data.x.iter() {
        scores.extend(fit.scores(r));
    }
    let z = Rows::new(scores, k)?;
    fit.beta = weighted_lstsq(&design_matrix(&z, true), &data.y, &data.weights)?.beta;
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::linear::fit_weighted_linear;
    use crate::rng::seeded;
    use rand::Rng;

    fn data(n: usize, p: usize, seed: u64) -> RespondentData {
        let mut rng = seeded(seed);
        let x = Rows::new((0..n * p).map(|_| rng.random::<f64>() * 3.0).collect(), p).unwrap();
        let y = x.iter().map(|r| r.iter().sum::<f64>() + rng.random::<f64>()).collect();
        let w = (0..n).map(|_| 1.0 + rng.random::<f64>()).collect();
        RespondentData::new(x, y, w).unwrap()
    }

    #[test]
    fn full_rank_equals_linear() {
        let d = data(40, 4, 1);
        let pcr = fit_pcr(&d, 4).unwrap();
        let lr = fit_weighted_linear(&d).unwrap();
        for r in d.x.iter() {
            assert!((pcr.predict(r) - lr.predict(r)).abs() < 1e-8);
        }
    }

    #[test]
    fn scores_weighted_uncorrelated() {
        let d = data(50, 5, 2);
        let pcr = fit_pcr(&d, 3).unwrap();
        let sw: f64 = d.weights.iter().sum();
        let z: Vec<Vec<f64>> = d.x.iter().map(|r| pcr.scores(r)).collect();
        for a in 0..3 {
            let ma: f64 = z.iter().zip(&d.weights).map(|(s, w)| w * s[a]).sum::<f64>() / sw;
            assert!(ma.abs() < 1e-10);
            for b in (a + 1)..3 {
                let c: f64 = z.iter().zip(&d.weights).map(|(s, w)| w * s[a] * s[b]).sum::<f64>() / sw;
                assert!(c.abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rank_one_predictors() {
        let mut rng = seeded(3);
        let t: Vec<f64> = (0..30).map(|_| rng.random::<f64>()).collect();
        let x = Rows::new(t.iter().flat_map(|v| [*v, 2.0 * v, -v]).collect(), 3).unwrap();
        let y: Vec<f64> = t.iter().map(|v| 1.0 + 4.0 * v + rng.random::<f64>()).collect();
        let d = RespondentData::unweighted(x, y).unwrap();
        let pcr = fit_pcr(&d, 3).unwrap();
        assert_eq!(pcr.n_components(), 1);
        let lr = fit_weighted_linear(&d).unwrap();
        for r in d.x.iter() {
            assert!((pcr.predict(r) - lr.predict(r)).abs() < 1e-8);
        }
    }
}
