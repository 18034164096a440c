//! Model trees in the Cubist/M5 style: SD-reduction splits, path-restricted
//! weighted linear models, adjusted-error pruning, smoothing and committees.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::tree::midpoint;
use crate::data::{weighted_mean, RespondentData, Rows};
use crate::error::{Error, Result};
use crate::imputer::Model;
use crate::linalg::weighted_lstsq;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CubistConfig {
    pub committees: usize,
    pub unbiased: bool,
    /// Neighbours used by the instance correction; 0 turns it off.
    pub neighbor_k: usize,
    pub min_leaf: usize,
    /// Nodes whose outcome sd falls below this fraction of the root sd are
    /// not split further.
    pub sd_stop: f64,
    pub max_depth: usize,
}

impl Default for CubistConfig {
    fn default() -> Self {
        CubistConfig {
            committees: 1,
            unbiased: false,
            neighbor_k: 0,
            min_leaf: 5,
            sd_stop: 0.05,
            max_depth: 20,
        }
    }
}

/// Linear model on a subset of predictors, intercept first.
#[derive(Debug, Clone, Serialize)]
pub struct NodeModel {
    pub vars: Vec<usize>,
    pub coef: Vec<f64>,
}

impl NodeModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.coef[0] + self.vars.iter().zip(&self.coef[1..]).map(|(&v, b)| b * x[v]).sum::<f64>()
    }

    /// Parameter count including the intercept.
    pub fn n_params(&self) -> usize {
        self.coef.len()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CubistNode {
    pub split: Option<(usize, f64)>,
    pub children: Option<(usize, usize)>,
    pub parent: Option<usize>,
    pub model: NodeModel,
    /// Weight given to this node's prediction against its parent's.
    pub smooth: f64,
    /// Added to leaf predictions when the fit is recentred.
    pub offset: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CubistTree {
    pub nodes: Vec<CubistNode>,
}

impl CubistTree {
    fn leaf(&self, x: &[f64]) -> usize {
        let mut k = 0;
        while let (Some((v, z)), Some((l, r))) = (self.nodes[k].split, self.nodes[k].children) {
            k = if x[v] < z { l } else { r };
        }
        k
    }

    /// Leaf model smoothed towards each ancestor in turn.
    fn smoothed(&self, x: &[f64], leaf: usize) -> f64 {
        let mut k = leaf;
        let mut v = self.nodes[k].model.predict(x);
        while let Some(p) = self.nodes[k].parent {
            let a = self.nodes[k].smooth;
            v = a * v + (1.0 - a) * self.nodes[p].model.predict(x);
            k = p;
        }
        v
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let leaf = self.leaf(x);
        self.smoothed(x, leaf) + self.nodes[leaf].offset
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.split.is_none()).count()
    }

    /// Variables split on between the root and node `k`.
    pub fn path_vars(&self, k: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut c = k;
        while let Some(p) = self.nodes[c].parent {
            if let Some((v, _)) = self.nodes[p].split {
                if !out.contains(&v) {
                    out.push(v);
                }
            }
            c = p;
        }
        out.sort_unstable();
        out
    }
}

/// `(V(e_p) - Cov(e_c, e_p)) / V(e_c - e_p)` clamped to [0, 1]; 0.5 when
/// the two predictions coincide.
pub fn smoothing_coefficient(e_child: &[f64], e_parent: &[f64]) -> f64 {
    let n = e_child.len();
    if n < 2 {
        return 0.5;
    }
    let nf = n as f64;
    let mc = e_child.iter().sum::<f64>() / nf;
    let mp = e_parent.iter().sum::<f64>() / nf;
    let (mut vp, mut cov, mut vd) = (0.0, 0.0, 0.0);
    for (c, p) in e_child.iter().zip(e_parent) {
        let (dc, dp) = (c - mc, p - mp);
        vp += dp * dp;
        cov += dc * dp;
        vd += (dc - dp).powi(2);
    }
    let scale = vp.max(vd).max(f64::MIN_POSITIVE);
    if vd <= 1e-14 * scale {
        return 0.5;
    }
    ((vp - cov) / vd).clamp(0.0, 1.0)
}

/// `(n + p*) / (n - p*) sum |e|`; infinite when `n <= p*`.
pub fn adjusted_error(n: usize, p_star: usize, abs_err: f64) -> f64 {
    if n <= p_star {
        return f64::INFINITY;
    }
    (n + p_star) as f64 / (n - p_star) as f64 * abs_err
}

fn fit_node_model(x: &Rows, y: &[f64], w: &[f64], rows: &[usize], vars: &[usize]) -> NodeModel {
    let a = DMatrix::from_fn(rows.len(), vars.len() + 1, |i, j| if j == 0 { 1.0 } else { x.get(rows[i], vars[j - 1]) });
    let ys: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
    let ws: Vec<f64> = rows.iter().map(|&i| w[i]).collect();
    let coef = match weighted_lstsq(&a, &ys, &ws) {
        Ok(s) => s.beta,
        Err(_) => {
            let mut c = vec![0.0; vars.len() + 1];
            c[0] = weighted_mean(&ys, &ws);
            c
        }
    };
    NodeModel { vars: vars.to_vec(), coef }
}

fn abs_error(m: &NodeModel, x: &Rows, y: &[f64], rows: &[usize]) -> f64 {
    rows.iter().map(|&i| (y[i] - m.predict(x.row(i))).abs()).sum()
}

/// Backward elimination: drop the term whose removal lowers the adjusted
/// error most, while any removal lowers it.
fn simplify(x: &Rows, y: &[f64], w: &[f64], rows: &[usize], vars: &[usize]) -> NodeModel {
    let mut best = fit_node_model(x, y, w, rows, vars);
    let mut best_aer = adjusted_error(rows.len(), best.n_params(), abs_error(&best, x, y, rows));
    loop {
        let mut improved: Option<(NodeModel, f64)> = None;
        for k in 0..best.vars.len() {
            let mut v = best.vars.clone();
            v.remove(k);
            let m = fit_node_model(x, y, w, rows, &v);
            let aer = adjusted_error(rows.len(), m.n_params(), abs_error(&m, x, y, rows));
            if aer < improved.as_ref().map_or(best_aer, |b| b.1) {
                improved = Some((m, aer));
            }
        }
        match improved {
            Some((m, aer)) => {
                best = m;
                best_aer = aer;
            }
            None => return best,
        }
    }
}

fn pop_sd(y: &[f64], rows: &[usize]) -> f64 {
    let n = rows.len() as f64;
    let m = rows.iter().map(|&i| y[i]).sum::<f64>() / n;
    (rows.iter().map(|&i| (y[i] - m).powi(2)).sum::<f64>() / n).sqrt()
}

/// Split maximizing `sd(A) - sum_h n_h/n sd(A_h)`.
fn sd_split(x: &Rows, y: &[f64], rows: &[usize], min_leaf: usize) -> Option<(usize, f64, f64)> {
    let n = rows.len();
    let nf = n as f64;
    let parent_sd = pop_sd(y, rows);
    let (ts, tq): (f64, f64) = rows.iter().fold((0.0, 0.0), |(s, q), &i| (s + y[i], q + y[i] * y[i]));
    let sd_of = |s: f64, q: f64, m: f64| ((q - s * s / m) / m).max(0.0).sqrt();
    let mut best: Option<(usize, f64, f64)> = None;
    let mut order = rows.to_vec();
    for var in 0..x.n_cols() {
        order.sort_by(|&a, &b| x.get(a, var).total_cmp(&x.get(b, var)));
        let (mut s, mut q) = (0.0, 0.0);
        for k in 1..n {
            let i = order[k - 1];
            s += y[i];
            q += y[i] * y[i];
            let (lo, hi) = (x.get(i, var), x.get(order[k], var));
            if lo == hi || k < min_leaf || n - k < min_leaf {
                continue;
            }
            let (nl, nr) = (k as f64, (n - k) as f64);
            let gain = parent_sd - nl / nf * sd_of(s, q, nl) - nr / nf * sd_of(ts - s, tq - q, nr);
            if best.is_none_or(|b| gain > b.2) {
                best = Some((var, midpoint(lo, hi), gain));
            }
        }
    }
    best.filter(|b| b.2 > 1e-12 * parent_sd.max(f64::MIN_POSITIVE))
}

struct Grower<'a> {
    x: &'a Rows,
    y: &'a [f64],
    w: &'a [f64],
    cfg: &'a CubistConfig,
    stop_sd: f64,
    nodes: Vec<CubistNode>,
    rows_of: Vec<Vec<usize>>,
}

impl Grower<'_> {
    fn build(&mut self, rows: Vec<usize>, parent: Option<usize>, path: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let model = simplify(self.x, self.y, self.w, &rows, &path);
        self.nodes.push(CubistNode {
            split: None,
            children: None,
            parent,
            model,
            smooth: 1.0,
            offset: 0.0,
        });
        self.rows_of.push(rows.clone());
        if rows.len() < 2 * self.cfg.min_leaf || depth >= self.cfg.max_depth || pop_sd(self.y, &rows) < self.stop_sd {
            return id;
        }
        let Some((var, z, _)) = sd_split(self.x, self.y, &rows, self.cfg.min_leaf) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.x.get(i, var) < z);
        let mut child_path = path;
        if !child_path.contains(&var) {
            child_path.push(var);
            child_path.sort_unstable();
        }
        let lc = self.build(l, Some(id), child_path.clone(), depth + 1);
        let rc = self.build(r, Some(id), child_path, depth + 1);
        self.nodes[id].split = Some((var, z));
        self.nodes[id].children = Some((lc, rc));
        id
    }

    /// Returns (sum |e|, parameter count) of the subtree rooted at `k`
    /// after pruning it.
    fn prune(&mut self, k: usize) -> (f64, usize) {
        let rows = self.rows_of[k].clone();
        let own = abs_error(&self.nodes[k].model, self.x, self.y, &rows);
        let own_p = self.nodes[k].model.n_params();
        let Some((l, r)) = self.nodes[k].children else {
            return (own, own_p);
        };
        let (el, pl) = self.prune(l);
        let (er, pr) = self.prune(r);
        let sub = adjusted_error(rows.len(), pl + pr, el + er);
        let node = adjusted_error(rows.len(), own_p, own);
        if node <= sub {
            self.nodes[k].split = None;
            self.nodes[k].children = None;
            (own, own_p)
        } else {
            (el + er, pl + pr)
        }
    }
}

/// Drops unreachable nodes left behind by pruning.
fn compact(nodes: Vec<CubistNode>, rows_of: Vec<Vec<usize>>) -> (Vec<CubistNode>, Vec<Vec<usize>>) {
    let mut map = vec![usize::MAX; nodes.len()];
    let mut order = Vec::new();
    let mut stack = vec![0];
    while let Some(k) = stack.pop() {
        map[k] = order.len();
        order.push(k);
        if let Some((l, r)) = nodes[k].children {
            stack.push(r);
            stack.push(l);
        }
    }
    let new_nodes = order
        .iter()
        .map(|&k| {
            let mut nd = nodes[k].clone();
            nd.parent = nd.parent.map(|p| map[p]);
            nd.children = nd.children.map(|(l, r)| (map[l], map[r]));
            nd
        })
        .collect();
    let new_rows = order.iter().map(|&k| rows_of[k].clone()).collect();
    (new_nodes, new_rows)
}

/// One model tree fitted to `y`.
pub fn fit_model_tree(x: &Rows, y: &[f64], w: &[f64], cfg: &CubistConfig) -> CubistTree {
    let all: Vec<usize> = (0..y.len()).collect();
    let mut g = Grower {
        x,
        y,
        w,
        cfg,
        stop_sd: cfg.sd_stop * pop_sd(y, &all),
        nodes: Vec::new(),
        rows_of: Vec::new(),
    };
    g.build(all, None, Vec::new(), 0);
    g.prune(0);
    let (mut nodes, rows_of) = compact(g.nodes, g.rows_of);
    for k in 1..nodes.len() {
        let p = nodes[k].parent.expect("non-root has a parent");
        let rows = &rows_of[k];
        let ec: Vec<f64> = rows.iter().map(|&i| y[i] - nodes[k].model.predict(x.row(i))).collect();
        let ep: Vec<f64> = rows.iter().map(|&i| y[i] - nodes[p].model.predict(x.row(i))).collect();
        nodes[k].smooth = smoothing_coefficient(&ec, &ep);
    }
    let mut tree = CubistTree { nodes };
    if cfg.unbiased {
        for (k, rows) in rows_of.iter().enumerate() {
            if tree.nodes[k].split.is_some() || rows.is_empty() {
                continue;
            }
            let e: Vec<f64> = rows.iter().map(|&i| y[i] - tree.smoothed(x.row(i), k)).collect();
            let ws: Vec<f64> = rows.iter().map(|&i| w[i]).collect();
            tree.nodes[k].offset = weighted_mean(&e, &ws);
        }
    }
    tree
}

#[derive(Debug, Clone, Serialize)]
pub struct CubistModel {
    pub committees: Vec<CubistTree>,
    pub neighbor_k: usize,
    #[serde(skip)]
    train_x: Rows,
    #[serde(skip)]
    train_y: Vec<f64>,
    #[serde(skip)]
    train_fit: Vec<f64>,
    #[serde(skip)]
    scale: Vec<f64>,
}

impl CubistModel {
    fn committee_mean(&self, x: &[f64]) -> f64 {
        self.committees.iter().map(|t| t.predict(x)).sum::<f64>() / self.committees.len() as f64
    }

    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.scale)
            .map(|((u, v), s)| ((u - v) / s).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

impl Model for CubistModel {
    fn predict(&self, x: &[f64]) -> f64 {
        let base = self.committee_mean(x);
        let k = self.neighbor_k.min(self.train_y.len());
        if k == 0 {
            return base;
        }
        let mut d: Vec<(f64, usize)> = (0..self.train_y.len())
            .map(|i| (self.distance(x, self.train_x.row(i)), i))
            .collect();
        d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let (mut num, mut den) = (0.0, 0.0);
        for &(dist, i) in &d[..k] {
            let wk = 1.0 / (0.5 + dist);
            num += wk * (self.train_y[i] + base - self.train_fit[i]);
            den += wk;
        }
        num / den
    }

    fn n_features(&self) -> usize {
        self.train_x.n_cols()
    }

    fn summary(&self) -> serde_json::Value {
        let leaves: Vec<usize> = self.committees.iter().map(|t| t.n_leaves()).collect();
        serde_json::json!({ "committees": self.committees.len(), "leaves": leaves, "neighbors": self.neighbor_k })
    }
}

pub fn fit_cubist(data: &RespondentData, cfg: &CubistConfig) -> Result<CubistModel> {
    if data.len() < 2 {
        return Err(Error::invalid("Cubist needs at least two respondents"));
    }
    if cfg.committees == 0 || cfg.min_leaf == 0 {
        return Err(Error::invalid("Cubist needs at least one committee and min_leaf >= 1"));
    }
    let n = data.len();
    let mut committees = Vec::with_capacity(cfg.committees);
    let mut target = data.y.clone();
    let mut sum_fit = vec![0.0; n];
    for _ in 0..cfg.committees {
        let t = fit_model_tree(&data.x, &target, &data.weights, cfg);
        let fit: Vec<f64> = data.x.iter().map(|r| t.predict(r)).collect();
        for (s, f) in sum_fit.iter_mut().zip(&fit) {
            *s += f;
        }
        // next committee member chases the opposite of this one's error
        target = data.y.iter().zip(&fit).map(|(y, f)| 2.0 * y - f).collect();
        committees.push(t);
    }
    let m = committees.len() as f64;
    let scale = (0..data.n_features())
        .map(|j| {
            let c = data.x.column(j);
            let mu = c.iter().sum::<f64>() / n as f64;
            let sd = (c.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n as f64).sqrt();
            if sd > 0.0 { sd } else { 1.0 }
        })
        .collect();
    Ok(CubistModel {
        committees,
        neighbor_k: cfg.neighbor_k,
        train_x: data.x.clone(),
        train_y: data.y.clone(),
        train_fit: sum_fit.into_iter().map(|s| s / m).collect(),
        scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::fit_weighted_linear;
    use crate::rng::seeded;
    use rand::Rng;

    #[test]
    fn exact_child_takes_all_weight() {
        let ec = vec![0.0; 6];
        let ep = vec![1.0, -2.0, 0.5, 3.0, -1.0, 0.2];
        assert_eq!(smoothing_coefficient(&ec, &ep), 1.0);
    }

    #[test]
    fn identical_predictions_give_half() {
        let e = vec![1.0, -2.0, 0.5, 3.0];
        assert_eq!(smoothing_coefficient(&e, &e), 0.5);
        // and the blend is the common prediction whatever the weight
        let yc = 4.2;
        assert_eq!(0.5 * yc + 0.5 * yc, yc);
    }

    #[test]
    fn adjusted_error_values() {
        assert_eq!(adjusted_error(10, 2, 4.0), 12.0 / 8.0 * 4.0);
        assert!(adjusted_error(2, 2, 1.0).is_infinite());
    }

    #[test]
    fn linear_noiseless_matches_linear_fit() {
        let mut rng = seeded(11);
        let n = 120;
        let x = Rows::new((0..2 * n).map(|_| rng.random::<f64>() * 10.0).collect(), 2).unwrap();
        let y: Vec<f64> = x.iter().map(|r| 1.5 + 2.0 * r[0]).collect();
        let w: Vec<f64> = (0..n).map(|_| 1.0 + rng.random::<f64>()).collect();
        let d = RespondentData::new(x, y, w).unwrap();
        let cub = fit_cubist(&d, &CubistConfig::default()).unwrap();
        let lin = fit_weighted_linear(&d).unwrap();
        for _ in 0..50 {
            let q = [rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0];
            assert!((cub.predict(&q) - lin.predict(&q)).abs() < 1e-6);
        }
    }

    #[test]
    fn models_use_path_variables_only() {
        let mut rng = seeded(12);
        let n = 300;
        let x = Rows::new((0..4 * n).map(|_| rng.random::<f64>()).collect(), 4).unwrap();
        let y: Vec<f64> = x
            .iter()
            .map(|r| (6.0 * r[0]).sin() * 3.0 + r[1] * r[2] * 4.0 + r[3] + 0.1 * rng.random::<f64>())
            .collect();
        let d = RespondentData::unweighted(x, y).unwrap();
        let cub = fit_cubist(&d, &CubistConfig { committees: 3, ..Default::default() }).unwrap();
        for t in &cub.committees {
            assert!(t.n_leaves() > 1);
            for k in 0..t.nodes.len() {
                let path = t.path_vars(k);
                assert!(t.nodes[k].model.vars.iter().all(|v| path.contains(v)));
            }
        }
    }

    #[test]
    fn neighbor_weights_normalized() {
        // one training point exactly at the query: correction returns a
        // convex combination of adjusted neighbour values
        let x = Rows::from_rows(&(0..20).map(|i| [i as f64]).collect::<Vec<_>>()).unwrap();
        let y: Vec<f64> = (0..20).map(|i| (i * i) as f64).collect();
        let d = RespondentData::unweighted(x, y).unwrap();
        let plain = fit_cubist(&d, &CubistConfig::default()).unwrap();
        let corr = fit_cubist(&d, &CubistConfig { neighbor_k: 3, ..Default::default() }).unwrap();
        let q = [7.3];
        let base = plain.predict(&q);
        let adj: Vec<f64> = [7usize, 8, 6].iter().map(|&i| d.y[i] + base - plain.committees[0].predict(d.x.row(i))).collect();
        let lo = adj.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = adj.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let v = corr.predict(&q);
        assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
    }

    #[test]
    fn unbiased_recentres_leaves() {
        let mut rng = seeded(13);
        let n = 200;
        let x = Rows::new((0..2 * n).map(|_| rng.random::<f64>()).collect(), 2).unwrap();
        let y: Vec<f64> = x.iter().map(|r| (r[0] * 5.0).exp() + r[1] + rng.random::<f64>()).collect();
        let w: Vec<f64> = (0..n).map(|_| 1.0 + 3.0 * rng.random::<f64>()).collect();
        let d = RespondentData::new(x, y, w).unwrap();
        let t = fit_model_tree(&d.x, &d.y, &d.weights, &CubistConfig { unbiased: true, ..Default::default() });
        let leaves: Vec<usize> = (0..n).map(|i| t.leaf(d.x.row(i))).collect();
        for k in 0..t.nodes.len() {
            let rows: Vec<usize> = (0..n).filter(|&i| leaves[i] == k).collect();
            if rows.is_empty() {
                continue;
            }
            let e: Vec<f64> = rows.iter().map(|&i| d.y[i] - t.predict(d.x.row(i))).collect();
            let ws: Vec<f64> = rows.iter().map(|&i| d.weights[i]).collect();
            assert!(weighted_mean(&e, &ws).abs() < 1e-9);
        }
    }
}
