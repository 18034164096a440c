//! Forward-stagewise least-squares boosting and second-order boosting.

use serde::{Deserialize, Serialize};

use super::tree::{best_split, grow, midpoint, weighted_leaf, Split, Tree};
use crate::data::{RespondentData, Rows};
use crate::error::{Error, Result};
use crate::imputer::Model;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostConfig {
    pub n_rounds: usize,
    /// Terminal leaves per tree.
    pub max_leaves: usize,
    pub learning_rate: f64,
    /// L2 penalty on leaf values (second-order only).
    pub lambda: f64,
    /// Minimum split gain (second-order only).
    pub gamma_penalty: f64,
    /// Minimum summed hessian weight per leaf (second-order only).
    pub min_child_weight: f64,
    /// Starting prediction (second-order only).
    pub base_score: f64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            n_rounds: 100,
            max_leaves: 6,
            learning_rate: 0.1,
            lambda: 1.0,
            gamma_penalty: 0.0,
            min_child_weight: 1.0,
            base_score: 0.5,
        }
    }
}

impl BoostConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::invalid("learning rate must lie in [0, 1]"));
        }
        if self.max_leaves == 0 {
            return Err(Error::invalid("trees need at least one leaf"));
        }
        if self.lambda < 0.0 || self.gamma_penalty < 0.0 {
            return Err(Error::invalid("lambda and gamma_penalty must be nonnegative"));
        }
        Ok(())
    }
}

/// `f(x) = base + sum_m nu * T_m(x)`; tree leaf values are stored already
/// multiplied by the learning rate.
#[derive(Debug, Clone, Serialize)]
pub struct BoostedTrees {
    pub base: f64,
    pub trees: Vec<Tree>,
    pub n_features: usize,
    /// Accepted split gains, second-order boosting only.
    pub split_gains: Vec<f64>,
}

impl Model for BoostedTrees {
    fn predict(&self, x: &[f64]) -> f64 {
        self.base + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    fn summary(&self) -> serde_json::Value {
        serde_json::json!({ "base": self.base, "rounds": self.trees.len() })
    }
}

/// Least-squares boosting: start at the weighted mean, fit a `max_leaves`
/// tree to the residuals each round with weighted-mean leaf values.
pub fn fit_ls_boost(data: &RespondentData, cfg: &BoostConfig) -> Result<BoostedTrees> {
    cfg.validate()?;
    let n = data.len();
    let vars: Vec<usize> = (0..data.n_features()).collect();
    let base = data.weighted_mean_y();
    let mut f = vec![base; n];
    let mut trees = Vec::with_capacity(cfg.n_rounds);
    for _ in 0..cfg.n_rounds {
        let r: Vec<f64> = data.y.iter().zip(&f).map(|(y, f)| y - f).collect();
        let mut t = grow(
            &data.x,
            &r,
            (0..n).collect(),
            cfg.max_leaves,
            |idx, _| best_split(&data.x, &r, idx, &vars, 1),
            |idx| weighted_leaf(&r, &data.weights, idx),
        );
        t.scale(cfg.learning_rate);
        for (fi, x) in f.iter_mut().zip(data.x.iter()) {
            *fi += t.predict(x);
        }
        trees.push(t);
    }
    Ok(BoostedTrees {
        base,
        trees,
        n_features: data.n_features(),
        split_gains: Vec::new(),
    })
}

/// `-G / (H + lambda)`.
pub fn xgb_leaf_value(g: f64, h: f64, lambda: f64) -> f64 {
    if h + lambda > 0.0 {
        -g / (h + lambda)
    } else {
        0.0
    }
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    if h + lambda > 0.0 {
        g * g / (h + lambda)
    } else {
        0.0
    }
}

/// Best split by the second-order structure gain
/// `1/2 [G_L^2/(H_L+l) + G_R^2/(H_R+l) - G^2/(H+l)] - gamma`; only splits
/// with positive net gain are returned.
pub fn xgb_best_split(
    x: &Rows,
    g: &[f64],
    h: &[f64],
    idx: &[usize],
    cfg: &BoostConfig,
) -> Option<Split> {
    let n = idx.len();
    if n < 2 {
        return None;
    }
    let gt: f64 = idx.iter().map(|&i| g[i]).sum();
    let ht: f64 = idx.iter().map(|&i| h[i]).sum();
    let parent = score(gt, ht, cfg.lambda);
    let mut best: Option<Split> = None;
    let mut order: Vec<usize> = idx.to_vec();
    for var in 0..x.n_cols() {
        order.sort_by(|&a, &b| x.get(a, var).total_cmp(&x.get(b, var)));
        let (mut gl, mut hl) = (0.0, 0.0);
        for k in 1..n {
            let i = order[k - 1];
            gl += g[i];
            hl += h[i];
            let (lo, hi) = (x.get(i, var), x.get(order[k], var));
            if lo == hi || hl < cfg.min_child_weight || ht - hl < cfg.min_child_weight {
                continue;
            }
            let gain = 0.5 * (score(gl, hl, cfg.lambda) + score(gt - gl, ht - hl, cfg.lambda) - parent)
                - cfg.gamma_penalty;
            if best.is_none_or(|b| gain > b.gain) {
                best = Some(Split {
                    var,
                    threshold: midpoint(lo, hi),
                    gain,
                });
            }
        }
    }
    best.filter(|b| b.gain > 0.0)
}

/// Weights normalized to mean one.
pub fn unit_mean_weights(w: &[f64]) -> Vec<f64> {
    let m = w.iter().sum::<f64>() / w.len() as f64;
    w.iter().map(|v| v / m).collect()
}

/// Second-order boosting with squared loss: `g = 2(f - y)`, `h = 2`, both
/// multiplied by the (mean-one) design weights.
pub fn fit_xgb(data: &RespondentData, cfg: &BoostConfig) -> Result<BoostedTrees> {
    cfg.validate()?;
    let n = data.len();
    let w = unit_mean_weights(&data.weights);
    let mut f = vec![cfg.base_score; n];
    let mut trees = Vec::with_capacity(cfg.n_rounds);
    let mut split_gains = Vec::new();
    let h: Vec<f64> = w.iter().map(|w| 2.0 * w).collect();
    for _ in 0..cfg.n_rounds {
        let g: Vec<f64> = (0..n).map(|i| w[i] * 2.0 * (f[i] - data.y[i])).collect();
        let mut t = grow(
            &data.x,
            &g,
            (0..n).collect(),
            cfg.max_leaves,
            |idx, _| {
                let s = xgb_best_split(&data.x, &g, &h, idx, cfg);
                if let Some(s) = s {
                    split_gains.push(s.gain);
                }
                s
            },
            |idx| {
                let gs: f64 = idx.iter().map(|&i| g[i]).sum();
                let hs: f64 = idx.iter().map(|&i| h[i]).sum();
                xgb_leaf_value(gs, hs, cfg.lambda)
            },
        );
        t.scale(cfg.learning_rate);
        for (fi, x) in f.iter_mut().zip(data.x.iter()) {
            *fi += t.predict(x);
        }
        trees.push(t);
    }
    Ok(BoostedTrees {
        base: cfg.base_score,
        trees,
        n_features: data.n_features(),
        split_gains,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    fn data(n: usize, seed: u64) -> RespondentData {
        let mut rng = seeded(seed);
        let x = Rows::new((0..n * 2).map(|_| rng.random::<f64>()).collect(), 2).unwrap();
        let y = x.iter().map(|r| 3.0 * r[0] - 2.0 * r[1] * r[1] + rng.random::<f64>()).collect();
        let w = (0..n).map(|_| 1.0 + 4.0 * rng.random::<f64>()).collect();
        RespondentData::new(x, y, w).unwrap()
    }

    fn wrss(d: &RespondentData, m: &BoostedTrees) -> f64 {
        d.x.iter()
            .zip(&d.y)
            .zip(&d.weights)
            .map(|((x, y), w)| w * (y - m.predict(x)).powi(2))
            .sum()
    }

    #[test]
    fn zero_rounds_or_rate_is_mean() {
        let d = data(30, 1);
        for cfg in [
            BoostConfig { n_rounds: 0, ..Default::default() },
            BoostConfig { learning_rate: 0.0, ..Default::default() },
        ] {
            let m = fit_ls_boost(&d, &cfg).unwrap();
            assert!((m.predict(&[0.3, 0.3]) - d.weighted_mean_y()).abs() < 1e-12);
        }
    }

    #[test]
    fn ls_rss_nonincreasing() {
        let d = data(60, 2);
        let mut prev = f64::INFINITY;
        for m in 0..20 {
            let fit = fit_ls_boost(&d, &BoostConfig { n_rounds: m, max_leaves: 4, learning_rate: 0.3, ..Default::default() }).unwrap();
            let r = wrss(&d, &fit);
            assert!(r <= prev + 1e-9);
            prev = r;
        }
    }

    #[test]
    fn one_big_tree_interpolates() {
        let d = data(25, 3);
        let fit = fit_ls_boost(&d, &BoostConfig { n_rounds: 1, max_leaves: 1000, learning_rate: 1.0, ..Default::default() }).unwrap();
        for (x, y) in d.x.iter().zip(&d.y) {
            assert!((fit.predict(x) - y).abs() < 1e-9);
        }
    }

    #[test]
    fn single_leaf_is_weighted_mean() {
        let d = data(20, 4);
        let cfg = BoostConfig { n_rounds: 1, max_leaves: 1, learning_rate: 1.0, lambda: 0.0, base_score: 0.0, ..Default::default() };
        let m = fit_xgb(&d, &cfg).unwrap();
        assert!((m.predict(&[0.5, 0.5]) - d.weighted_mean_y()).abs() < 1e-12);
    }

    #[test]
    fn huge_lambda_stays_constant() {
        let d = data(40, 5);
        let cfg = BoostConfig { lambda: 1e9, base_score: 0.0, ..Default::default() };
        let m = fit_xgb(&d, &cfg).unwrap();
        for x in d.x.iter() {
            assert!(m.predict(x).abs() < 1e-5);
        }
    }

    #[test]
    fn gains_nonnegative() {
        let d = data(80, 6);
        let m = fit_xgb(&d, &BoostConfig::default()).unwrap();
        assert!(!m.split_gains.is_empty());
        assert!(m.split_gains.iter().all(|g| *g >= 0.0));
    }
}
