//! Weighted support vector regression with a pairwise (SMO-style) dual solver.
//!
//! The epsilon dual is solved over `beta_i = alpha_i - alpha*_i`, which keeps
//! `alpha_i alpha*_i = 0` by construction:
//! `min 1/2 b'Kb - y'b + eps sum |b_i|` with `sum b_i = 0`, `|b_i| <= C_i`.
//! The nu dual keeps the two groups separate, each summing to `C nu / 2`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{RespondentData, Rows};
use crate::error::{Error, Result};
use crate::imputer::Model;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    Polynomial { degree: u32 },
    /// `exp(-scale |x - z|^2)`; `None` resolves to `1/p` at fit time.
    Gaussian { scale: Option<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Objective {
    Epsilon { epsilon: f64 },
    Nu { nu: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvrConfig {
    pub kernel: Kernel,
    pub objective: Objective,
    pub cost: f64,
    /// Multiply `cost` by the number of respondents, so each unit of average
    /// weight gets a box of `cost`.
    pub cost_per_unit: bool,
    /// Standardize the outcome before solving (epsilon is then in sd units).
    pub scale_y: bool,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for SvrConfig {
    fn default() -> Self {
        SvrConfig {
            kernel: Kernel::Gaussian { scale: None },
            objective: Objective::Epsilon { epsilon: 0.1 },
            cost: 1.0,
            cost_per_unit: true,
            scale_y: true,
            tolerance: 1e-6,
            max_iter: 1_000_000,
        }
    }
}

impl SvrConfig {
    fn validate(&self) -> Result<()> {
        if !(self.cost > 0.0) {
            return Err(Error::invalid("SVR cost must be positive"));
        }
        match self.objective {
            Objective::Epsilon { epsilon } if !(epsilon >= 0.0) => {
                return Err(Error::invalid("SVR epsilon must be nonnegative"))
            }
            Objective::Nu { nu } if !(nu > 0.0 && nu <= 1.0) => {
                return Err(Error::invalid("SVR nu must lie in (0, 1]"))
            }
            _ => {}
        }
        match self.kernel {
            Kernel::Polynomial { degree: 0 } => Err(Error::invalid("polynomial degree must be >= 1")),
            Kernel::Gaussian { scale: Some(s) } if !(s > 0.0) => Err(Error::invalid("gaussian scale must be positive")),
            _ => Ok(()),
        }
    }
}

pub fn kernel_eval(kernel: &Kernel, a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Arity {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(kernel_unchecked(kernel, a, b))
}

fn kernel_unchecked(kernel: &Kernel, a: &[f64], b: &[f64]) -> f64 {
    match *kernel {
        Kernel::Linear => a.iter().zip(b).map(|(u, v)| u * v).sum(),
        Kernel::Polynomial { degree } => (1.0 + a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>()).powi(degree as i32),
        Kernel::Gaussian { scale } => {
            let s = scale.unwrap_or(1.0);
            (-s * a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>()).exp()
        }
    }
}

pub fn kernel_matrix(kernel: &Kernel, x: &Rows) -> DMatrix<f64> {
    let n = x.n_rows();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel_unchecked(kernel, x.row(i), x.row(j));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DualKind {
    Epsilon(f64),
    /// `C nu`, the total budget for `sum (alpha + alpha*)`.
    Nu(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub beta: Vec<f64>,
    pub bias: f64,
    /// The tube half-width; solved for under the nu objective.
    pub epsilon: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `1/2 b'Kb - y'b + eps sum |b|`.
pub fn dual_objective(k: &DMatrix<f64>, y: &[f64], beta: &[f64], epsilon: f64) -> f64 {
    let n = y.len();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            q += beta[i] * beta[j] * k[(i, j)];
        }
    }
    0.5 * q - y.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>() + epsilon * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Minimizes the convex piecewise quadratic
/// `1/2 eta t^2 + d t + eps (|bi + t| + |bj - t|)` over `[lo, hi]`.
fn line_min(eta: f64, d: f64, eps: f64, bi: f64, bj: f64, lo: f64, hi: f64) -> f64 {
    let phi = |t: f64| 0.5 * eta * t * t + d * t + eps * ((bi + t).abs() + (bj - t).abs());
    let mut cand = vec![lo, hi];
    for b in [-bi, bj] {
        if b > lo && b < hi {
            cand.push(b);
        }
    }
    if eta > 0.0 {
        for si in [-1.0, 1.0] {
            for sj in [-1.0, 1.0] {
                let t = -(d + eps * (si - sj)) / eta;
                if t > lo && t < hi {
                    cand.push(t);
                }
            }
        }
    }
    let mut best = (phi(0.0_f64.clamp(lo, hi)), 0.0_f64.clamp(lo, hi));
    for t in cand {
        let v = phi(t);
        if v < best.0 {
            best = (v, t);
        }
    }
    best.1
}

fn solve_epsilon(k: &DMatrix<f64>, y: &[f64], c: &[f64], eps: f64, tol: f64, max_iter: usize) -> DualSolution {
    let n = y.len();
    let mut beta = vec![0.0; n];
    let mut g: Vec<f64> = y.iter().map(|v| -v).collect();
    let mut it = 0;
    let mut converged = false;
    while it < max_iter {
        // steepest feasible pair: raise i, lower j
        let (mut up, mut iu) = (f64::INFINITY, usize::MAX);
        let (mut dn, mut jd) = (f64::NEG_INFINITY, usize::MAX);
        for t in 0..n {
            if beta[t] < c[t] {
                let v = g[t] + if beta[t] >= 0.0 { eps } else { -eps };
                if v < up {
                    up = v;
                    iu = t;
                }
            }
            if beta[t] > -c[t] {
                let v = g[t] + if beta[t] > 0.0 { eps } else { -eps };
                if v > dn {
                    dn = v;
                    jd = t;
                }
            }
        }
        if iu == usize::MAX || jd == usize::MAX || dn - up <= tol {
            converged = true;
            break;
        }
        let (i, j) = (iu, jd);
        let eta = (k[(i, i)] + k[(j, j)] - 2.0 * k[(i, j)]).max(0.0);
        let lo = (-c[i] - beta[i]).max(beta[j] - c[j]);
        let hi = (c[i] - beta[i]).min(beta[j] + c[j]);
        let t = line_min(eta, g[i] - g[j], eps, beta[i], beta[j], lo, hi);
        it += 1;
        if t == 0.0 {
            // no progress possible along this pair at machine precision
            converged = dn - up <= tol.max(1e-12) * 10.0;
            break;
        }
        beta[i] += t;
        beta[j] -= t;
        for r in 0..n {
            g[r] += t * (k[(r, i)] - k[(r, j)]);
        }
    }
    let bias = epsilon_bias(&beta, &g, c, eps);
    DualSolution {
        beta,
        bias,
        epsilon: eps,
        iterations: it,
        converged,
    }
}

/// Average of equality-implied values over free units, else the midpoint
/// of the bounds implied by units at 0 or at the box.
fn resolve(free: &[f64], lower: f64, upper: f64) -> f64 {
    if !free.is_empty() {
        return free.iter().sum::<f64>() / free.len() as f64;
    }
    match (lower.is_finite(), upper.is_finite()) {
        (true, true) => 0.5 * (lower + upper),
        (true, false) => lower,
        (false, true) => upper,
        (false, false) => 0.0,
    }
}

fn epsilon_bias(beta: &[f64], g: &[f64], c: &[f64], eps: f64) -> f64 {
    let tiny = 1e-12;
    let mut free = Vec::new();
    let (mut lower, mut upper) = (f64::NEG_INFINITY, f64::INFINITY);
    for t in 0..beta.len() {
        let b = beta[t];
        let bound = c[t] * (1.0 - 1e-12);
        if b.abs() <= tiny * c[t].max(1.0) {
            lower = lower.max(-g[t] - eps);
            upper = upper.min(-g[t] + eps);
        } else if b > 0.0 && b < bound {
            free.push(-g[t] - eps);
        } else if b < 0.0 && -b < bound {
            free.push(-g[t] + eps);
        } else if b > 0.0 {
            upper = upper.min(-g[t] - eps);
        } else {
            lower = lower.max(-g[t] + eps);
        }
    }
    resolve(&free, lower, upper)
}

fn solve_nu(k: &DMatrix<f64>, y: &[f64], c: &[f64], budget: f64, tol: f64, max_iter: usize) -> DualSolution {
    let n = y.len();
    // two groups: a[0] = alpha, a[1] = alpha*, each summing to budget / 2
    let mut a = [vec![0.0; n], vec![0.0; n]];
    for grp in &mut a {
        let mut left = budget / 2.0;
        for (t, v) in grp.iter_mut().enumerate() {
            *v = c[t].min(left);
            left -= *v;
        }
    }
    let mut g: Vec<f64> = y.iter().map(|v| -v).collect();
    let sign = [1.0, -1.0];
    let mut it = 0;
    let mut converged = false;
    while it < max_iter {
        let mut best: Option<(f64, usize, usize, usize)> = None;
        for s in 0..2 {
            let (mut up, mut iu) = (f64::INFINITY, usize::MAX);
            let (mut dn, mut jd) = (f64::NEG_INFINITY, usize::MAX);
            for t in 0..n {
                let grad = sign[s] * g[t];
                if a[s][t] < c[t] && grad < up {
                    up = grad;
                    iu = t;
                }
                if a[s][t] > 0.0 && grad > dn {
                    dn = grad;
                    jd = t;
                }
            }
            if iu != usize::MAX && jd != usize::MAX && best.is_none_or(|b| dn - up > b.0) {
                best = Some((dn - up, s, iu, jd));
            }
        }
        let Some((viol, s, i, j)) = best else {
            converged = true;
            break;
        };
        if viol <= tol {
            converged = true;
            break;
        }
        let eta = (k[(i, i)] + k[(j, j)] - 2.0 * k[(i, j)]).max(0.0);
        let d = sign[s] * (g[i] - g[j]);
        let hi = (c[i] - a[s][i]).min(a[s][j]);
        let t = if eta > 1e-12 { (-d / eta).clamp(0.0, hi) } else { hi };
        it += 1;
        if t <= 0.0 {
            converged = viol <= tol.max(1e-12) * 10.0;
            break;
        }
        a[s][i] += t;
        a[s][j] -= t;
        for r in 0..n {
            g[r] += sign[s] * t * (k[(r, i)] - k[(r, j)]);
        }
    }
    let beta: Vec<f64> = (0..n).map(|t| a[0][t] - a[1][t]).collect();
    let tiny = 1e-12;
    let mut r = [0.0; 2];
    for s in 0..2 {
        // group +: beta0 + eps = -g on free alpha; group -: beta0 - eps = -g
        let mut free = Vec::new();
        let (mut lower, mut upper) = (f64::NEG_INFINITY, f64::INFINITY);
        for t in 0..n {
            let v = -g[t];
            let at_zero = a[s][t] <= tiny * c[t].max(1.0);
            let at_box = a[s][t] >= c[t] * (1.0 - 1e-12);
            match (at_zero, at_box, s) {
                (true, _, 0) => lower = lower.max(v),
                (true, _, _) => upper = upper.min(v),
                (_, true, 0) => upper = upper.min(v),
                (_, true, _) => lower = lower.max(v),
                _ => free.push(v),
            }
        }
        r[s] = resolve(&free, lower, upper);
    }
    DualSolution {
        beta,
        bias: 0.5 * (r[0] + r[1]),
        epsilon: (0.5 * (r[0] - r[1])).max(0.0),
        iterations: it,
        converged,
    }
}

/// Solves the dual for a precomputed kernel matrix and per-unit boxes `c`.
pub fn solve_dual(k: &DMatrix<f64>, y: &[f64], c: &[f64], kind: DualKind, tol: f64, max_iter: usize) -> DualSolution {
    match kind {
        DualKind::Epsilon(eps) => solve_epsilon(k, y, c, eps, tol, max_iter),
        DualKind::Nu(budget) => solve_nu(k, y, c, budget, tol, max_iter),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SvrFit {
    /// `alpha_i - alpha*_i` for every respondent, on the solver's scale.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub support_ids: Vec<usize>,
    pub epsilon: f64,
    pub kernel: Kernel,
    pub converged: bool,
    pub iterations: usize,
    #[serde(skip)]
    sv_x: Rows,
    #[serde(skip)]
    sv_coef: Vec<f64>,
    x_centre: Vec<f64>,
    x_scale: Vec<f64>,
    y_centre: f64,
    y_scale: f64,
}

impl SvrFit {
    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.x_centre)
            .zip(&self.x_scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

impl Model for SvrFit {
    fn predict(&self, x: &[f64]) -> f64 {
        let z = self.standardize(x);
        let f: f64 = self
            .sv_x
            .iter()
            .zip(&self.sv_coef)
            .map(|(s, c)| c * kernel_unchecked(&self.kernel, s, &z))
            .sum();
        self.y_centre + self.y_scale * (f + self.bias)
    }

    fn n_features(&self) -> usize {
        self.x_centre.len()
    }

    fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "support_vectors": self.support_ids.len(),
            "epsilon": self.epsilon,
            "converged": self.converged,
            "iterations": self.iterations,
        })
    }
}

fn centre_scale(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    (m, if sd > 0.0 { sd } else { 1.0 })
}

pub fn fit_svr(data: &RespondentData, cfg: &SvrConfig) -> Result<SvrFit> {
    cfg.validate()?;
    let n = data.len();
    if n < 2 {
        return Err(Error::invalid("SVR needs at least two respondents"));
    }
    let p = data.n_features();
    let (x_centre, x_scale): (Vec<f64>, Vec<f64>) = (0..p).map(|j| centre_scale(&data.x.column(j))).unzip();
    let mut z = Vec::with_capacity(n * p);
    for r in data.x.iter() {
        z.extend(r.iter().zip(&x_centre).zip(&x_scale).map(|((v, m), s)| (v - m) / s));
    }
    let z = Rows::new(z, p)?;
    let (y_centre, y_scale) = if cfg.scale_y { centre_scale(&data.y) } else { (0.0, 1.0) };
    let ys: Vec<f64> = data.y.iter().map(|v| (v - y_centre) / y_scale).collect();
    let kernel = match cfg.kernel {
        Kernel::Gaussian { scale: None } => Kernel::Gaussian {
            scale: Some(1.0 / p.max(1) as f64),
        },
        k => k,
    };
    let total = if cfg.cost_per_unit { cfg.cost * n as f64 } else { cfg.cost };
    let sw: f64 = data.weights.iter().sum();
    let c: Vec<f64> = data.weights.iter().map(|w| total * w / sw).collect();
    let k = kernel_matrix(&kernel, &z);
    let kind = match cfg.objective {
        Objective::Epsilon { epsilon } => DualKind::Epsilon(epsilon),
        Objective::Nu { nu } => DualKind::Nu(total * nu),
    };
    let sol = solve_dual(&k, &ys, &c, kind, cfg.tolerance, cfg.max_iter);
    let support_ids: Vec<usize> = (0..n).filter(|&i| sol.beta[i] != 0.0).collect();
    let sv_x = z.select(&support_ids);
    let sv_coef = support_ids.iter().map(|&i| sol.beta[i]).collect();
    Ok(SvrFit {
        dual_coefs: sol.beta,
        bias: sol.bias,
        support_ids,
        epsilon: sol.epsilon,
        kernel,
        converged: sol.converged,
        iterations: sol.iterations,
        sv_x,
        sv_coef,
        x_centre,
        x_scale,
        y_centre,
        y_scale,
    })
}
