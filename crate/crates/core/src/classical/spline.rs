//! Clamped B-spline bases and additive models fitted by weighted least
//! squares on centred bases.

use serde::Serialize;

use crate::data::{mean, quantile_type7, RespondentData};
use crate::error::{Error, Result};
use crate::imputer::Model;
use crate::linalg::weighted_lstsq;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplineBasis {
    pub order: usize,
    pub interior_knots: Vec<f64>,
    pub boundary: [f64; 2],
    #[serde(skip)]
    knots: Vec<f64>,
}

impl SplineBasis {
    pub fn new(order: usize, interior_knots: Vec<f64>, boundary: [f64; 2]) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("spline order must be at least 1"));
        }
        let [lo, hi] = boundary;
        if !(lo < hi) {
            return Err(Error::invalid(format!("degenerate spline boundary [{lo}, {hi}]")));
        }
        if interior_knots.windows(2).any(|w| !(w[0] < w[1]))
            || interior_knots.iter().any(|k| !(*k > lo && *k < hi))
        {
            return Err(Error::invalid("interior knots must be increasing and inside the boundary"));
        }
        let mut knots = vec![lo; order];
        knots.extend_from_slice(&interior_knots);
        knots.extend(std::iter::repeat_n(hi, order));
        Ok(SplineBasis {
            order,
            interior_knots,
            boundary,
            knots,
        })
    }

    /// Basis dimension `order + #interior knots`.
    pub fn dim(&self) -> usize {
        self.order + self.interior_knots.len()
    }

    pub fn knot_vector(&self) -> &[f64] {
        &self.knots
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.boundary[0] && x <= self.boundary[1]
    }

    fn span(&self, x: f64) -> usize {
        let q = self.dim();
        if x >= self.boundary[1] {
            return q - 1;
        }
        // last index s with knots[s] <= x, within [order-1, q-1]
        let s = self.knots.partition_point(|k| *k <= x) - 1;
        s.clamp(self.order - 1, q - 1)
    }
}

/// All `dim()` basis values at `x`; `x` outside the boundary is clamped.
pub fn bspline_basis(x: f64, basis: &SplineBasis) -> Vec<f64> {
    let x = x.clamp(basis.boundary[0], basis.boundary[1]);
    let p = basis.order - 1;
    let u = &basis.knots;
    let s = basis.span(x);
    // nonzero functions N_{s-p..=s}, Piegl & Tiller A2.2
    let mut n = vec![0.0; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    n[0] = 1.0;
    for j in 1..=p {
        left[j] = x - u[s + 1 - j];
        right[j] = u[s + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = n[r] / (right[r + 1] + left[j - r]);
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    let mut out = vec![0.0; basis.dim()];
    out[s - p..=s].copy_from_slice(&n);
    out
}

/// Interior knots at the type-7 quantiles `l/(kappa+1)` of `values`, keeping
/// only strictly increasing knots strictly inside the range.
pub fn quantile_knots(values: &[f64], kappa: usize) -> Vec<f64> {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let (lo, hi) = (s[0], s[s.len() - 1]);
    let mut knots: Vec<f64> = Vec::with_capacity(kappa);
    for l in 1..=kappa {
        let k = quantile_type7(&s, l as f64 / (kappa + 1) as f64);
        if k > lo && k < hi && knots.last().is_none_or(|last| k > *last) {
            knots.push(k);
        }
    }
    knots
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TermKind {
    Spline { basis: SplineBasis },
    Linear,
}

/// One additive component `f_k(x) = sum_l coef_l (B_l(x) - offset_l)`, with
/// the first basis function dropped; linear terms use `coef (x - offset)`.
#[derive(Debug, Clone, Serialize)]
pub struct AdditiveTerm {
    pub kind: TermKind,
    pub coefs: Vec<f64>,
    pub centering_offsets: Vec<f64>,
}

impl AdditiveTerm {
    fn raw_columns(kind: &TermKind, x: f64) -> Vec<f64> {
        match kind {
            TermKind::Spline { basis } => bspline_basis(x, basis)[1..].to_vec(),
            TermKind::Linear => vec![x],
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        Self::raw_columns(&self.kind, x)
            .iter()
            .zip(&self.centering_offsets)
            .zip(&self.coefs)
            .map(|((b, m), c)| c * (b - m))
            .sum()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AdditiveFit {
    pub alpha: f64,
    pub terms: Vec<AdditiveTerm>,
    /// Predictors entered linearly because they have too few distinct values.
    pub linear_fallback: Vec<usize>,
    pub rank: usize,
}

impl AdditiveFit {
    pub fn component(&self, k: usize, x: f64) -> f64 {
        self.terms[k].eval(x)
    }
}

impl Model for AdditiveFit {
    fn predict(&self, x: &[f64]) -> f64 {
        self.alpha + self.terms.iter().zip(x).map(|(t, v)| t.eval(*v)).sum::<f64>()
    }

    fn n_features(&self) -> usize {
        self.terms.len()
    }

    fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "rank": self.rank,
            "linear_fallback": self.linear_fallback,
            "basis_dims": self.terms.iter().map(|t| t.coefs.len()).collect::<Vec<_>>(),
        })
    }
}

pub const CUBIC: usize = 4;

/// Additive model with a cubic B-spline component per predictor. With
/// `knots_per_var = 0` every predictor enters linearly.
pub fn fit_additive_splines(data: &RespondentData, knots_per_var: usize) -> Result<AdditiveFit> {
    let n = data.len();
    let p = data.n_features();
    let mut kinds = Vec::with_capacity(p);
    let mut linear_fallback = Vec::new();
    for j in 0..p {
        let col = data.x.column(j);
        let mut distinct = col.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        let kind = if knots_per_var == 0 {
            TermKind::Linear
        } else if distinct.len() < CUBIC + knots_per_var {
            linear_fallback.push(j);
            TermKind::Linear
        } else {
            let knots = quantile_knots(&col, knots_per_var);
            let b = SplineBasis::new(CUBIC, knots, [distinct[0], distinct[distinct.len() - 1]])?;
            TermKind::Spline { basis: b }
        };
        kinds.push(kind);
    }

    // centred design: intercept then every term's columns
    let mut blocks: Vec<Vec<Vec<f64>>> = Vec::with_capacity(p); // [term][row][col]
    let mut offsets = Vec::with_capacity(p);
    for (j, kind) in kinds.iter().enumerate() {
        let cols: Vec<Vec<f64>> = data.x.iter().map(|r| AdditiveTerm::raw_columns(kind, r[j])).collect();
        let width = cols.first().map_or(0, |c| c.len());
        let off: Vec<f64> = (0..width)
            .map(|l| mean(&cols.iter().map(|c| c[l]).collect::<Vec<_>>()))
            .collect();
        blocks.push(cols);
        offsets.push(off);
    }
    let width: usize = 1 + offsets.iter().map(|o| o.len()).sum::<usize>();
    let mut values = Vec::with_capacity(n * width);
    for i in 0..n {
        values.push(1.0);
        for (b, off) in blocks.iter().zip(&offsets) {
            values.extend(b[i].iter().zip(off).map(|(v, m)| v - m));
        }
    }
    let a = nalgebra::DMatrix::from_row_slice(n, width, &values);
    let sol = weighted_lstsq(&a, &data.y, &data.weights)?;
    let mut pos = 1;
    let terms = kinds
        .into_iter()
        .zip(offsets)
        .map(|(kind, off)| {
            let coefs = sol.beta[pos..pos + off.len()].to_vec();
            pos += off.len();
            AdditiveTerm {
                kind,
                coefs,
                centering_offsets: off,
            }
        })
        .collect();
    Ok(AdditiveFit {
        alpha: sol.beta[0],
        terms,
        linear_fallback,
        rank: sol.rank,
    })
}
