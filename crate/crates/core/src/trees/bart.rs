//! Bayesian additive regression trees fitted by Bayesian backfitting with
//! grow/prune/change Metropolis-Hastings moves.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared as ChiSq, ContinuousCDF};

use super::tree::{midpoint, Tree, TreeNode};
use crate::data::RespondentData;
use crate::error::{Error, Result};
use crate::imputer::Model;
use crate::linalg::{design_matrix, weighted_lstsq};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BartConfig {
    pub n_trees: usize,
    /// Split probability at depth d is `alpha (1 + d)^-beta`.
    pub alpha: f64,
    pub beta: f64,
    /// Leaf prior sd is `0.5 / (k sqrt(m))` on the rescaled outcome.
    pub k_sigma_gamma: f64,
    pub nu_sigma: f64,
    pub q_sigma: f64,
    pub burn_in: usize,
    pub n_draws: usize,
}

impl Default for BartConfig {
    fn default() -> Self {
        BartConfig {
            n_trees: 50,
            alpha: 0.95,
            beta: 2.0,
            k_sigma_gamma: 2.0,
            nu_sigma: 3.0,
            q_sigma: 0.9,
            burn_in: 200,
            n_draws: 800,
        }
    }
}

const P_GROW: f64 = 0.4;
const P_PRUNE: f64 = 0.4;
const SIGMA2_FLOOR: f64 = 1e-10;

impl BartConfig {
    fn validate(&self) -> Result<()> {
        if self.n_trees == 0 || self.n_draws == 0 {
            return Err(Error::invalid("BART needs at least one tree and one kept draw"));
        }
        if !(0.0..1.0).contains(&self.alpha) || self.beta < 0.0 {
            return Err(Error::invalid("BART depth prior needs alpha in [0,1), beta >= 0"));
        }
        if !(self.k_sigma_gamma > 0.0 && self.nu_sigma > 0.0 && self.q_sigma > 0.0 && self.q_sigma < 1.0) {
            return Err(Error::invalid("BART prior hyperparameters out of range"));
        }
        Ok(())
    }

    pub fn split_prob(&self, depth: usize) -> f64 {
        split_prob(self.alpha, self.beta, depth)
    }
}

pub fn split_prob(alpha: f64, beta: f64, depth: usize) -> f64 {
    alpha * (1.0 + depth as f64).powf(-beta)
}

/// Prior probability that a tree has exactly `k` leaves, k = 1..=max_leaves,
/// when a node at depth d splits with probability `alpha (1+d)^-beta`.
pub fn leaf_count_prior(alpha: f64, beta: f64, max_leaves: usize) -> Vec<f64> {
    // table[d][k]: probability that a subtree rooted at depth d has k leaves
    let depth_needed = max_leaves;
    let mut table = vec![vec![0.0; max_leaves + 1]; depth_needed + 1];
    for d in (0..=depth_needed).rev() {
        let p = split_prob(alpha, beta, d);
        table[d][1] = 1.0 - p;
        if d == depth_needed {
            continue;
        }
        for k in 2..=max_leaves {
            let mut s = 0.0;
            for a in 1..k {
                s += table[d + 1][a] * table[d + 1][k - a];
            }
            table[d][k] = p * s;
        }
    }
    table[0][1..].to_vec()
}

/// Conjugate update for one leaf: observations with precision multipliers
/// `w_i / sigma2` around mean `mu ~ N(0, tau2)`. Returns (mean, variance).
pub fn leaf_posterior(sum_w: f64, sum_wr: f64, sigma2: f64, tau2: f64) -> (f64, f64) {
    let prec = sum_w / sigma2 + 1.0 / tau2;
    ((sum_wr / sigma2) / prec, 1.0 / prec)
}

fn leaf_log_marginal(sum_w: f64, sum_wr: f64, sigma2: f64, tau2: f64) -> f64 {
    let prec = sum_w / sigma2 + 1.0 / tau2;
    let b = sum_wr / sigma2;
    -0.5 * (tau2 * prec).ln() + 0.5 * b * b / prec
}

#[derive(Debug, Clone)]
struct Node {
    var: usize,
    cut: f64,
    left: usize,
    right: usize,
    parent: usize,
    depth: usize,
    leaf: bool,
    alive: bool,
    mu: f64,
}

const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
struct SampTree {
    nodes: Vec<Node>,
    leaf_of: Vec<usize>,
}

impl SampTree {
    fn root(n: usize) -> Self {
        SampTree {
            nodes: vec![Node {
                var: 0,
                cut: 0.0,
                left: NONE,
                right: NONE,
                parent: NONE,
                depth: 0,
                leaf: true,
                alive: true,
                mu: 0.0,
            }],
            leaf_of: vec![0; n],
        }
    }

    fn leaves(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&k| self.nodes[k].alive && self.nodes[k].leaf).collect()
    }

    /// Internal nodes whose children are both leaves.
    fn nogs(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&k| {
                let nd = &self.nodes[k];
                nd.alive && !nd.leaf && self.nodes[nd.left].leaf && self.nodes[nd.right].leaf
            })
            .collect()
    }

    fn is_root_only(&self) -> bool {
        self.nodes[0].leaf
    }

    fn to_tree(&self, n_features: usize) -> Tree {
        let mut map = vec![NONE; self.nodes.len()];
        let mut order = Vec::new();
        let mut stack = vec![0];
        while let Some(k) = stack.pop() {
            map[k] = order.len();
            order.push(k);
            if !self.nodes[k].leaf {
                stack.push(self.nodes[k].right);
                stack.push(self.nodes[k].left);
            }
        }
        let nodes = order
            .iter()
            .map(|&k| {
                let nd = &self.nodes[k];
                TreeNode {
                    split: (!nd.leaf).then_some((nd.var, nd.cut)),
                    children: (!nd.leaf).then(|| (map[nd.left], map[nd.right])),
                    leaf_value: nd.mu,
                    leaf_count: 0,
                    rss: 0.0,
                }
            })
            .collect();
        Tree { nodes, n_features }
    }
}

/// Candidate cut points for `var` among `rows`: midpoints between
/// consecutive distinct values.
fn cuts(data: &RespondentData, rows: &[usize], var: usize) -> Vec<f64> {
    let mut v: Vec<f64> = rows.iter().map(|&i| data.x.get(i, var)).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.windows(2).map(|w| midpoint(w[0], w[1])).collect()
}

/// Uniform variable among those with at least one cut, then a uniform cut.
fn draw_rule<R: Rng + ?Sized>(data: &RespondentData, rows: &[usize], rng: &mut R) -> Option<(usize, f64)> {
    let p = data.n_features();
    let mut vars: Vec<usize> = (0..p).collect();
    // random order scan: the first variable with cuts is uniform over valid ones
    for k in 0..p {
        let j = rng.random_range(k..p);
        vars.swap(k, j);
        let c = cuts(data, rows, vars[k]);
        if !c.is_empty() {
            return Some((vars[k], c[rng.random_range(0..c.len())]));
        }
    }
    None
}

struct Sampler<'a> {
    data: &'a RespondentData,
    cfg: &'a BartConfig,
    w: Vec<f64>,
    tau2: f64,
}

impl Sampler<'_> {
    fn stats(&self, t: &SampTree, r: &[f64], node: usize) -> (f64, f64) {
        let mut sw = 0.0;
        let mut swr = 0.0;
        for (i, &l) in t.leaf_of.iter().enumerate() {
            if l == node {
                sw += self.w[i];
                swr += self.w[i] * r[i];
            }
        }
        (sw, swr)
    }

    fn stats_split(&self, rows: &[usize], r: &[f64], var: usize, cut: f64) -> [(f64, f64); 2] {
        let mut out = [(0.0, 0.0); 2];
        for &i in rows {
            let side = usize::from(self.data.x.get(i, var) >= cut);
            out[side].0 += self.w[i];
            out[side].1 += self.w[i] * r[i];
        }
        out
    }

    fn rows_under(&self, t: &SampTree, node: usize) -> Vec<usize> {
        let nd = &t.nodes[node];
        if nd.leaf {
            (0..t.leaf_of.len()).filter(|&i| t.leaf_of[i] == node).collect()
        } else {
            (0..t.leaf_of.len())
                .filter(|&i| t.leaf_of[i] == nd.left || t.leaf_of[i] == nd.right)
                .collect()
        }
    }

    fn lml(&self, s: (f64, f64), sigma2: f64) -> f64 {
        leaf_log_marginal(s.0, s.1, sigma2, self.tau2)
    }

    fn grow<R: Rng + ?Sized>(&self, t: &mut SampTree, r: &[f64], sigma2: f64, rng: &mut R) {
        let leaves = t.leaves();
        let b = leaves.len() as f64;
        let eta = leaves[rng.random_range(0..leaves.len())];
        let rows = self.rows_under(t, eta);
        let Some((var, cut)) = draw_rule(self.data, &rows, rng) else { return };
        let [sl, sr] = self.stats_split(&rows, r, var, cut);
        let parent = (sl.0 + sr.0, sl.1 + sr.1);
        let d = t.nodes[eta].depth;
        let ps = self.cfg.split_prob(d);
        let pc = self.cfg.split_prob(d + 1);
        // nog count after growing: eta becomes a nog; its parent stops being one
        let mut w2 = t.nogs().len() as f64 + 1.0;
        let par = t.nodes[eta].parent;
        if par != NONE {
            let sib = if t.nodes[par].left == eta { t.nodes[par].right } else { t.nodes[par].left };
            if t.nodes[sib].leaf {
                w2 -= 1.0;
            }
        }
        let p_grow_here = if t.is_root_only() { 1.0 } else { P_GROW };
        let log_r = (P_PRUNE * b / (p_grow_here * w2)).ln()
            + (ps * (1.0 - pc).powi(2) / (1.0 - ps)).ln()
            + self.lml(sl, sigma2)
            + self.lml(sr, sigma2)
            - self.lml(parent, sigma2);
        if rng.random::<f64>().ln() < log_r {
            let mk = || Node {
                var: 0,
                cut: 0.0,
                left: NONE,
                right: NONE,
                parent: eta,
                depth: d + 1,
                leaf: true,
                alive: true,
                mu: 0.0,
            };
            let l = t.nodes.len();
            t.nodes.push(mk());
            t.nodes.push(mk());
            let nd = &mut t.nodes[eta];
            nd.var = var;
            nd.cut = cut;
            nd.left = l;
            nd.right = l + 1;
            nd.leaf = false;
            for &i in &rows {
                t.leaf_of[i] = if self.data.x.get(i, var) < cut { l } else { l + 1 };
            }
        }
    }

    fn prune<R: Rng + ?Sized>(&self, t: &mut SampTree, r: &[f64], sigma2: f64, rng: &mut R) {
        let nogs = t.nogs();
        let w2 = nogs.len() as f64;
        let eta = nogs[rng.random_range(0..nogs.len())];
        let (l, rr) = (t.nodes[eta].left, t.nodes[eta].right);
        let sl = self.stats(t, r, l);
        let sr = self.stats(t, r, rr);
        let parent = (sl.0 + sr.0, sl.1 + sr.1);
        let d = t.nodes[eta].depth;
        let ps = self.cfg.split_prob(d);
        let pc = self.cfg.split_prob(d + 1);
        let b_after = t.leaves().len() as f64 - 1.0;
        let p_grow_after = if eta == 0 { 1.0 } else { P_GROW };
        let log_r = (p_grow_after * w2 / (P_PRUNE * b_after)).ln()
            - (ps * (1.0 - pc).powi(2) / (1.0 - ps)).ln()
            + self.lml(parent, sigma2)
            - self.lml(sl, sigma2)
            - self.lml(sr, sigma2);
        if rng.random::<f64>().ln() < log_r {
            for v in t.leaf_of.iter_mut() {
                if *v == l || *v == rr {
                    *v = eta;
                }
            }
            t.nodes[l].alive = false;
            t.nodes[rr].alive = false;
            t.nodes[eta].leaf = true;
        }
    }

    fn change<R: Rng + ?Sized>(&self, t: &mut SampTree, r: &[f64], sigma2: f64, rng: &mut R) {
        let nogs = t.nogs();
        let eta = nogs[rng.random_range(0..nogs.len())];
        let rows = self.rows_under(t, eta);
        let Some((var, cut)) = draw_rule(self.data, &rows, rng) else { return };
        let (l, rr) = (t.nodes[eta].left, t.nodes[eta].right);
        let old = [self.stats(t, r, l), self.stats(t, r, rr)];
        let new = self.stats_split(&rows, r, var, cut);
        let log_r = self.lml(new[0], sigma2) + self.lml(new[1], sigma2)
            - self.lml(old[0], sigma2)
            - self.lml(old[1], sigma2);
        if rng.random::<f64>().ln() < log_r {
            t.nodes[eta].var = var;
            t.nodes[eta].cut = cut;
            for &i in &rows {
                t.leaf_of[i] = if self.data.x.get(i, var) < cut { l } else { rr };
            }
        }
    }

    fn draw_leaves<R: Rng + ?Sized>(&self, t: &mut SampTree, r: &[f64], sigma2: f64, rng: &mut R) {
        let mut sw = vec![0.0; t.nodes.len()];
        let mut swr = vec![0.0; t.nodes.len()];
        for (i, &l) in t.leaf_of.iter().enumerate() {
            sw[l] += self.w[i];
            swr[l] += self.w[i] * r[i];
        }
        for k in t.leaves() {
            let (m, v) = leaf_posterior(sw[k], swr[k], sigma2, self.tau2);
            let z: f64 = rng.sample(StandardNormal);
            t.nodes[k].mu = m + v.sqrt() * z;
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BartFit {
    /// Kept draws; each inner vector is one sum-of-trees on the rescaled scale.
    #[serde(skip)]
    pub draws: Vec<Vec<Tree>>,
    pub y_min: f64,
    pub y_range: f64,
    pub sigma2_draws: Vec<f64>,
    pub n_features: usize,
    pub acceptance: [f64; 3],
}

impl BartFit {
    /// Posterior draws of f(x) on the original scale.
    pub fn posterior(&self, x: &[f64]) -> Vec<f64> {
        self.draws
            .iter()
            .map(|ts| self.unscale(ts.iter().map(|t| t.predict(x)).sum()))
            .collect()
    }

    fn unscale(&self, f: f64) -> f64 {
        self.y_min + (f + 0.5) * self.y_range
    }
}

impl Model for BartFit {
    fn predict(&self, x: &[f64]) -> f64 {
        let s: f64 = self
            .draws
            .iter()
            .map(|ts| ts.iter().map(|t| t.predict(x)).sum::<f64>())
            .sum();
        self.unscale(s / self.draws.len() as f64)
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    fn summary(&self) -> serde_json::Value {
        let m = self.sigma2_draws.iter().sum::<f64>() / self.sigma2_draws.len().max(1) as f64;
        serde_json::json!({
            "draws": self.draws.len(),
            "posterior_mean_sigma": m.sqrt() * self.y_range,
            "acceptance_grow_prune_change": self.acceptance,
        })
    }
}

/// Residual variance of a least-squares fit on the rescaled outcome, or the
/// outcome variance when there are too few rows.
fn rough_sigma2(data: &RespondentData, ys: &[f64]) -> f64 {
    let n = ys.len();
    let p = data.n_features();
    let ones = vec![1.0; n];
    if n > p + 1 {
        if let Ok(sol) = weighted_lstsq(&design_matrix(&data.x, true), ys, &ones) {
            let a = design_matrix(&data.x, true);
            let rss: f64 = (0..n)
                .map(|i| {
                    let f: f64 = (0..a.ncols()).map(|j| a[(i, j)] * sol.beta[j]).sum();
                    (ys[i] - f).powi(2)
                })
                .sum();
            return rss / (n - p - 1) as f64;
        }
    }
    let m = ys.iter().sum::<f64>() / n as f64;
    ys.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64
}

pub fn fit_bart<R: Rng + ?Sized>(data: &RespondentData, cfg: &BartConfig, rng: &mut R) -> Result<BartFit> {
    cfg.validate()?;
    let n = data.len();
    if n < 2 {
        return Err(Error::invalid("BART needs at least two respondents"));
    }
    let y_min = data.y.iter().cloned().fold(f64::INFINITY, f64::min);
    let y_max = data.y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let y_range = if y_max > y_min { y_max - y_min } else { 1.0 };
    let ys: Vec<f64> = if y_max > y_min {
        data.y.iter().map(|y| (y - y_min) / y_range - 0.5).collect()
    } else {
        vec![-0.5; n]
    };
    let sw: f64 = data.weights.iter().sum();
    let w: Vec<f64> = data.weights.iter().map(|v| v / sw * n as f64).collect();
    let m = cfg.n_trees;
    let tau = 0.5 / (cfg.k_sigma_gamma * (m as f64).sqrt());
    let sigma2_hat = rough_sigma2(data, &ys).max(SIGMA2_FLOOR);
    let chi = ChiSq::new(cfg.nu_sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let lambda = sigma2_hat * chi.inverse_cdf(1.0 - cfg.q_sigma) / cfg.nu_sigma;
    let post_chi = ChiSquared::new(cfg.nu_sigma + n as f64).map_err(|e| Error::invalid(e.to_string()))?;

    let s = Sampler {
        data,
        cfg,
        w,
        tau2: tau * tau,
    };
    let mut trees: Vec<SampTree> = (0..m).map(|_| SampTree::root(n)).collect();
    // every tree starts at the same constant so the sum matches the mean
    let start = ys.iter().zip(&s.w).map(|(y, w)| y * w).sum::<f64>() / n as f64 / m as f64;
    for t in &mut trees {
        t.nodes[0].mu = start;
    }
    let mut tree_fit = vec![vec![start; n]; m];
    let mut total: Vec<f64> = vec![start * m as f64; n];
    let mut sigma2 = sigma2_hat;
    let mut r = vec![0.0; n];
    let mut draws = Vec::with_capacity(cfg.n_draws);
    let mut sigma2_draws = Vec::with_capacity(cfg.n_draws);
    let mut tried = [0usize; 3];
    let mut moved = [0usize; 3];

    for it in 0..cfg.burn_in + cfg.n_draws {
        for j in 0..m {
            for i in 0..n {
                r[i] = ys[i] - (total[i] - tree_fit[j][i]);
            }
            let t = &mut trees[j];
            let before = (t.nodes.len(), t.nodes.iter().filter(|n| n.alive).count(), t.nogs());
            let u: f64 = rng.random();
            let kind = if t.is_root_only() || u < P_GROW {
                s.grow(t, &r, sigma2, rng);
                0
            } else if u < P_GROW + P_PRUNE {
                s.prune(t, &r, sigma2, rng);
                1
            } else {
                let snapshot: Vec<(usize, f64)> = before.2.iter().map(|&k| (t.nodes[k].var, t.nodes[k].cut)).collect();
                s.change(t, &r, sigma2, rng);
                let after: Vec<(usize, f64)> = before.2.iter().map(|&k| (t.nodes[k].var, t.nodes[k].cut)).collect();
                tried[2] += 1;
                if snapshot != after {
                    moved[2] += 1;
                }
                2
            };
            if kind < 2 {
                tried[kind] += 1;
                let alive = t.nodes.iter().filter(|n| n.alive).count();
                if t.nodes.len() != before.0 || alive != before.1 {
                    moved[kind] += 1;
                }
            }
            s.draw_leaves(t, &r, sigma2, rng);
            for i in 0..n {
                let f = t.nodes[t.leaf_of[i]].mu;
                total[i] += f - tree_fit[j][i];
                tree_fit[j][i] = f;
            }
        }
        let sse: f64 = (0..n).map(|i| s.w[i] * (ys[i] - total[i]).powi(2)).sum();
        let chi2: f64 = post_chi.sample(rng);
        sigma2 = ((cfg.nu_sigma * lambda + sse) / chi2).max(SIGMA2_FLOOR);
        if it >= cfg.burn_in {
            draws.push(trees.iter().map(|t| t.to_tree(data.n_features())).collect());
            sigma2_draws.push(sigma2);
        }
    }
    let acceptance = [0, 1, 2].map(|k| if tried[k] > 0 { moved[k] as f64 / tried[k] as f64 } else { 0.0 });
    Ok(BartFit {
        draws,
        y_min,
        y_range,
        sigma2_draws,
        n_features: data.n_features(),
        acceptance,
    })
}
