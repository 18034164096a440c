//! Binary regression trees stored as node arenas, the exhaustive RSS split
//! search and a best-first grower shared by the tree methods.

use serde::Serialize;

use crate::data::Rows;
use crate::imputer::Model;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeNode {
    /// (variable, threshold): rows with `x[var] < threshold` go left.
    pub split: Option<(usize, f64)>,
    pub children: Option<(usize, usize)>,
    pub leaf_value: f64,
    pub leaf_count: usize,
    /// Unweighted within-node residual sum of squares of the fitting target.
    pub rss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
    pub n_features: usize,
}

impl Tree {
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut k = 0;
        while let (Some((var, z)), Some((l, r))) = (self.nodes[k].split, self.nodes[k].children) {
            k = if x[var] < z { l } else { r };
        }
        k
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.nodes[self.leaf_index(x)].leaf_value
    }

    pub fn is_leaf(&self, k: usize) -> bool {
        self.nodes[k].children.is_none()
    }

    pub fn n_leaves(&self) -> usize {
        (0..self.nodes.len()).filter(|&k| self.is_leaf(k) && self.reachable(k)).count()
    }

    fn reachable(&self, target: usize) -> bool {
        let mut stack = vec![0];
        while let Some(k) = stack.pop() {
            if k == target {
                return true;
            }
            if let Some((l, r)) = self.nodes[k].children {
                stack.push(l);
                stack.push(r);
            }
        }
        false
    }

    /// Scale every node value.
    pub fn scale(&mut self, factor: f64) {
        for n in &mut self.nodes {
            n.leaf_value *= factor;
        }
    }

    /// Minimal cost-complexity subtree for complexity `alpha` (absolute RSS
    /// per extra leaf), pruned bottom-up.
    pub fn prune(&mut self, alpha: f64) {
        self.prune_node(0, alpha);
    }

    // returns (subtree rss, subtree leaves)
    fn prune_node(&mut self, k: usize, alpha: f64) -> (f64, usize) {
        let Some((l, r)) = self.nodes[k].children else {
            return (self.nodes[k].rss, 1);
        };
        let (rl, nl) = self.prune_node(l, alpha);
        let (rr, nr) = self.prune_node(r, alpha);
        let (sub_rss, sub_leaves) = (rl + rr, nl + nr);
        let g = (self.nodes[k].rss - sub_rss) / (sub_leaves - 1) as f64;
        if g <= alpha {
            self.nodes[k].split = None;
            self.nodes[k].children = None;
            (self.nodes[k].rss, 1)
        } else {
            (sub_rss, sub_leaves)
        }
    }
}

impl Model for Tree {
    fn predict(&self, x: &[f64]) -> f64 {
        Tree::predict(self, x)
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    fn summary(&self) -> serde_json::Value {
        serde_json::json!({ "leaves": self.n_leaves(), "nodes": self.nodes })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub var: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Threshold between two adjacent distinct sorted values such that
/// `lo < z <= hi`.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m > lo {
        m
    } else {
        hi
    }
}

/// Unweighted RSS of `y` over `idx`, centred for stability.
pub fn node_rss(y: &[f64], idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    let m = idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64;
    idx.iter().map(|&i| (y[i] - m) * (y[i] - m)).sum()
}

/// Exhaustive search for the split minimizing the summed child RSS over the
/// candidate variables, with at least `min_leaf` rows per child. Returns
/// `None` when no split reduces the RSS. Ties keep the first variable and the
/// smallest threshold.
pub fn best_split(
    x: &Rows,
    y: &[f64],
    idx: &[usize],
    candidate_vars: &[usize],
    min_leaf: usize,
) -> Option<Split> {
    let n = idx.len();
    let min_leaf = min_leaf.max(1);
    if n < 2 * min_leaf {
        return None;
    }
    let mean = idx.iter().map(|&i| y[i]).sum::<f64>() / n as f64;
    let parent: f64 = idx.iter().map(|&i| (y[i] - mean).powi(2)).sum();
    if !(parent > 0.0) {
        return None;
    }
    let total: f64 = idx.iter().map(|&i| y[i] - mean).sum();
    let mut best: Option<Split> = None;
    let mut order: Vec<(f64, f64)> = Vec::with_capacity(n);
    for &var in candidate_vars {
        order.clear();
        order.extend(idx.iter().map(|&i| (x.get(i, var), y[i] - mean)));
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut sl = 0.0;
        let mut sl2 = 0.0;
        let sq_total: f64 = order.iter().map(|o| o.1 * o.1).sum();
        for k in 1..n {
            let v = order[k - 1].1;
            sl += v;
            sl2 += v * v;
            if k < min_leaf || n - k < min_leaf || order[k - 1].0 == order[k].0 {
                continue;
            }
            let nl = k as f64;
            let nr = (n - k) as f64;
            let sr = total - sl;
            let child = (sl2 - sl * sl / nl) + (sq_total - sl2 - sr * sr / nr);
            let gain = parent - child;
            // rounding noise must not break ties between equal partitions
            if best.is_none_or(|b| gain > b.gain + parent * 1e-12) {
                best = Some(Split {
                    var,
                    threshold: midpoint(order[k - 1].0, order[k].0),
                    gain,
                });
            }
        }
    }
    best.filter(|b| b.gain > parent * 1e-12)
}

/// Best-first growth: repeatedly split the frontier leaf with the largest
/// gain until `max_leaves` leaves or no admissible split remains. `find`
/// proposes a split for a node's rows; `leaf` gives a node's value.
pub fn grow<FS, FL>(
    x: &Rows,
    target: &[f64],
    root: Vec<usize>,
    max_leaves: usize,
    mut find: FS,
    leaf: FL,
) -> Tree
where
    FS: FnMut(&[usize], usize) -> Option<Split>,
    FL: Fn(&[usize]) -> f64,
{
    let mut nodes = vec![TreeNode {
        split: None,
        children: None,
        leaf_value: leaf(&root),
        leaf_count: root.len(),
        rss: node_rss(target, &root),
    }];
    // frontier: (node id, rows, proposed split)
    let mut frontier: Vec<(usize, Vec<usize>, Option<Split>)> = Vec::new();
    let s = find(&root, 0);
    frontier.push((0, root, s));
    let mut depth = vec![0usize];
    let mut leaves = 1;
    while leaves < max_leaves {
        let pick = frontier
            .iter()
            .enumerate()
            .filter_map(|(f, (_, _, s))| s.map(|s| (f, s.gain)))
            .fold(None::<(usize, f64)>, |b, (f, g)| match b {
                Some((_, bg)) if bg >= g => b,
                _ => Some((f, g)),
            });
        let Some((f, _)) = pick else { break };
        let (k, rows, split) = frontier.swap_remove(f);
        let split = split.expect("picked a split");
        let (l_rows, r_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| x.get(i, split.var) < split.threshold);
        let d = depth[k] + 1;
        let mut child = |rows: &Vec<usize>| {
            nodes.push(TreeNode {
                split: None,
                children: None,
                leaf_value: leaf(rows),
                leaf_count: rows.len(),
                rss: node_rss(target, rows),
            });
            depth.push(d);
            nodes.len() - 1
        };
        let l = child(&l_rows);
        let r = child(&r_rows);
        nodes[k].split = Some((split.var, split.threshold));
        nodes[k].children = Some((l, r));
        leaves += 1;
        let sl = find(&l_rows, d);
        frontier.push((l, l_rows, sl));
        let sr = find(&r_rows, d);
        frontier.push((r, r_rows, sr));
    }
    Tree {
        nodes,
        n_features: x.n_cols(),
    }
}

/// Design-weighted mean of `y` over `idx`.
pub fn weighted_leaf(y: &[f64], w: &[f64], idx: &[usize]) -> f64 {
    let Some(&first) = idx.first() else { return 0.0 };
    // shifted by the first value so constant leaves come out exact
    let y0 = y[first];
    let (s, sw) = idx.iter().fold((0.0, 0.0), |(s, sw), &i| (s + w[i] * (y[i] - y0), sw + w[i]));
    if sw > 0.0 {
        y0 + s / sw
    } else {
        y0
    }
}
