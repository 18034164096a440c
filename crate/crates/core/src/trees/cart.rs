use serde::{Deserialize, Serialize};

use super::tree::{best_split, grow, node_rss, weighted_leaf, Tree};
use crate::data::RespondentData;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CartConfig {
    pub min_split: usize,
    pub min_leaf: usize,
    /// A split must reduce the RSS by at least `cp` times the root RSS.
    pub cp: f64,
    pub max_depth: usize,
    /// Cost-complexity pruning parameter relative to the root RSS.
    pub prune_cp: Option<f64>,
}

impl Default for CartConfig {
    fn default() -> Self {
        CartConfig {
            min_split: 20,
            min_leaf: 7,
            cp: 0.01,
            max_depth: 30,
            prune_cp: None,
        }
    }
}

impl CartConfig {
    /// Grow until leaves are pure or single rows.
    pub fn fully_grown() -> Self {
        CartConfig {
            min_split: 2,
            min_leaf: 1,
            cp: 0.0,
            max_depth: usize::MAX,
            prune_cp: None,
        }
    }
}

/// Splits by unweighted RSS, leaf values are design-weighted means.
pub fn fit_cart(data: &RespondentData, cfg: &CartConfig) -> Result<Tree> {
    let idx: Vec<usize> = (0..data.len()).collect();
    let vars: Vec<usize> = (0..data.n_features()).collect();
    let root_rss = node_rss(&data.y, &idx);
    let min_gain = cfg.cp * root_rss;
    let mut tree = grow(
        &data.x,
        &data.y,
        idx,
        usize::MAX,
        |rows, depth| {
            if rows.len() < cfg.min_split || depth >= cfg.max_depth {
                return None;
            }
            best_split(&data.x, &data.y, rows, &vars, cfg.min_leaf).filter(|s| s.gain >= min_gain)
        },
        |rows| weighted_leaf(&data.y, &data.weights, rows),
    );
    if let Some(a) = cfg.prune_cp {
        tree.prune(a * root_rss);
    }
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Rows;

    #[test]
    fn constant_y_single_leaf() {
        let x = Rows::from_rows(&(0..30).map(|i| [i as f64]).collect::<Vec<_>>()).unwrap();
        let t = fit_cart(&RespondentData::unweighted(x, vec![2.5; 30]).unwrap(), &CartConfig::default()).unwrap();
        assert_eq!(t.n_leaves(), 1);
        assert_eq!(t.predict(&[100.0]), 2.5);
    }

    #[test]
    fn two_region_step() {
        let x = Rows::from_rows(&(0..40).map(|i| [i as f64]).collect::<Vec<_>>()).unwrap();
        let y: Vec<f64> = (0..40).map(|i| if i < 20 { 1.0 } else { 5.0 }).collect();
        let w: Vec<f64> = (0..40).map(|i| 1.0 + (i % 3) as f64).collect();
        let t = fit_cart(&RespondentData::new(x, y, w).unwrap(), &CartConfig::default()).unwrap();
        assert_eq!(t.n_leaves(), 2);
        assert_eq!(t.nodes[0].split, Some((0, 19.5)));
        assert_eq!(t.predict(&[3.0]), 1.0);
        assert_eq!(t.predict(&[30.0]), 5.0);
    }

    #[test]
    fn leaf_values_are_weighted_means() {
        let x = Rows::from_rows(&(0..40).map(|i| [i as f64]).collect::<Vec<_>>()).unwrap();
        let y: Vec<f64> = (0..40).map(|i| if i < 20 { (i % 4) as f64 } else { 10.0 + (i % 5) as f64 }).collect();
        let w: Vec<f64> = (0..40).map(|i| 1.0 + (i % 7) as f64).collect();
        let t = fit_cart(&RespondentData::new(x.clone(), y.clone(), w.clone()).unwrap(), &CartConfig::default()).unwrap();
        for leaf in 0..t.nodes.len() {
            if !t.is_leaf(leaf) {
                continue;
            }
            let members: Vec<usize> = (0..40).filter(|&i| t.leaf_index(x.row(i)) == leaf).collect();
            if members.is_empty() {
                continue;
            }
            let sw: f64 = members.iter().map(|&i| w[i]).sum();
            // implied weights w_j / sw are nonnegative and sum to one
            let value: f64 = members.iter().map(|&i| w[i] / sw * y[i]).sum();
            assert!((t.nodes[leaf].leaf_value - value).abs() < 1e-12);
        }
    }
}
