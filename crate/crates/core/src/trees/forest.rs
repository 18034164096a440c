use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{best_split, grow, weighted_leaf, Tree};
use crate::data::RespondentData;
use crate::error::{Error, Result};
use crate::imputer::Model;
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Candidate variables per split; `None` means `floor(sqrt(p))`.
    pub mtry: Option<usize>,
    /// Minimum number of rows in a leaf.
    pub min_node_size: usize,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 500,
            mtry: None,
            min_node_size: 5,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub mtry: usize,
}

impl Model for Forest {
    fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    fn n_features(&self) -> usize {
        self.trees[0].n_features
    }

    fn summary(&self) -> serde_json::Value {
        serde_json::json!({ "trees": self.trees.len(), "mtry": self.mtry })
    }
}

pub fn default_mtry(p: usize) -> usize {
    ((p as f64).sqrt().floor() as usize).max(1)
}

/// Each tree is grown on its own substream derived from one draw of `rng`,
/// so the forest does not depend on thread scheduling.
pub fn fit_random_forest<R: Rng + ?Sized>(
    data: &RespondentData,
    cfg: &ForestConfig,
    rng: &mut R,
) -> Result<Forest> {
    let p = data.n_features();
    let mtry = cfg.mtry.unwrap_or_else(|| default_mtry(p));
    if cfg.n_trees == 0 {
        return Err(Error::invalid("forest needs at least one tree"));
    }
    if mtry == 0 || mtry > p {
        return Err(Error::invalid(format!("mtry = {mtry} must lie in 1..={p}")));
    }
    let min_leaf = cfg.min_node_size.max(1);
    let seed: u64 = rng.random();
    let n = data.len();
    let trees: Vec<Tree> = (0..cfg.n_trees)
        .into_par_iter()
        .map(|b| {
            let mut trng = substream(seed, &[b as u64]);
            let rows: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| trng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow(
                &data.x,
                &data.y,
                rows,
                usize::MAX,
                |idx, _| {
                    if idx.len() < 2 * min_leaf {
                        return None;
                    }
                    let mut vars = if mtry == p {
                        (0..p).collect()
                    } else {
                        index::sample(&mut trng, p, mtry).into_vec()
                    };
                    vars.sort_unstable();
                    best_split(&data.x, &data.y, idx, &vars, min_leaf)
                },
                |idx| weighted_leaf(&data.y, &data.weights, idx),
            )
        })
        .collect();
    Ok(Forest { trees, mtry })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Rows;
    use crate::rng::seeded;
    use crate::trees::cart::{fit_cart, CartConfig};

    fn data() -> RespondentData {
        let mut rng = seeded(40);
        let x = Rows::new((0..150).map(|_| rng.random::<f64>()).collect(), 3).unwrap();
        let y = x.iter().map(|r| (4.0 * r[0]).sin() + r[1] * r[2] + 0.1 * rng.random::<f64>()).collect();
        let w = (0..50).map(|_| 1.0 + rng.random::<f64>()).collect();
        RespondentData::new(x, y, w).unwrap()
    }

    #[test]
    fn constant_y() {
        let d = data().with_y(vec![3.0; 50]);
        let f = fit_random_forest(&d, &ForestConfig { n_trees: 20, ..Default::default() }, &mut seeded(1)).unwrap();
        assert_eq!(f.predict(&[0.1, 0.5, 0.9]), 3.0);
    }

    #[test]
    fn single_full_tree_matches_cart() {
        let d = data();
        let cfg = ForestConfig {
            n_trees: 1,
            mtry: Some(3),
            min_node_size: 1,
            bootstrap: false,
        };
        let f = fit_random_forest(&d, &cfg, &mut seeded(2)).unwrap();
        let t = fit_cart(&d, &CartConfig::fully_grown()).unwrap();
        for r in d.x.iter() {
            assert_eq!(f.predict(r), t.predict(r));
        }
    }

    #[test]
    fn predictions_within_range_and_deterministic() {
        let d = data();
        let cfg = ForestConfig { n_trees: 50, mtry: Some(1), min_node_size: 1, bootstrap: true };
        let f = fit_random_forest(&d, &cfg, &mut seeded(3)).unwrap();
        let g = fit_random_forest(&d, &cfg, &mut seeded(3)).unwrap();
        let lo = d.y.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = d.y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut rng = seeded(4);
        for _ in 0..100 {
            let q = [rng.random::<f64>() * 2.0 - 0.5, rng.random::<f64>(), rng.random::<f64>()];
            let v = f.predict(&q);
            assert!(v >= lo && v <= hi);
            assert_eq!(v, g.predict(&q));
        }
    }

    #[test]
    fn tree_order_irrelevant() {
        let d = data();
        let cfg = ForestConfig { n_trees: 10, ..Default::default() };
        let f = fit_random_forest(&d, &cfg, &mut seeded(5)).unwrap();
        let mut rev = f.clone();
        rev.trees.reverse();
        for r in d.x.iter() {
            assert!((f.predict(r) - rev.predict(r)).abs() < 1e-12);
        }
    }
}
