//! Row-major predictor matrices and the respondent data handed to imputers.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Dense row-major matrix of predictor values.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Rows {
    values: Vec<f64>,
    n_cols: usize,
}

impl Rows {
    pub fn new(values: Vec<f64>, n_cols: usize) -> Result<Self> {
        if n_cols == 0 {
            if !values.is_empty() {
                return Err(Error::invalid("zero-column matrix with values"));
            }
        } else if values.len() % n_cols != 0 {
            return Err(Error::invalid(format!(
                "{} values do not fill rows of width {n_cols}",
                values.len()
            )));
        }
        Ok(Rows { values, n_cols })
    }

    pub fn empty(n_cols: usize) -> Self {
        Rows {
            values: Vec::new(),
            n_cols,
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut values = Vec::with_capacity(rows.len() * n_cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != n_cols {
                return Err(Error::Arity {
                    expected: n_cols,
                    got: r.len(),
                });
            }
            values.extend_from_slice(r);
        }
        Ok(Rows { values, n_cols })
    }

    pub fn n_rows(&self) -> usize {
        if self.n_cols == 0 {
            0
        } else {
            self.values.len() / self.n_cols
        }
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols + j]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_cols.max(1))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.iter().map(|r| r[j]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Rows `idx` (in that order) as a new matrix.
    pub fn select(&self, idx: &[usize]) -> Rows {
        let mut values = Vec::with_capacity(idx.len() * self.n_cols);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        Rows {
            values,
            n_cols: self.n_cols,
        }
    }

    /// The first `k` columns of every row.
    pub fn leading_columns(&self, k: usize) -> Rows {
        let k = k.min(self.n_cols);
        let mut values = Vec::with_capacity(self.n_rows() * k);
        for r in self.iter() {
            values.extend_from_slice(&r[..k]);
        }
        Rows { values, n_cols: k }
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if self.values.is_empty() && self.n_cols == 0 {
            self.n_cols = row.len();
        }
        check_len("row width", row.len(), self.n_cols)?;
        self.values.extend_from_slice(row);
        Ok(())
    }
}

/// Respondent predictors, outcomes and weights.
#[derive(Debug, Clone)]
pub struct RespondentData {
    pub x: Rows,
    pub y: Vec<f64>,
    pub weights: Vec<f64>,
}

impl RespondentData {
    pub fn new(x: Rows, y: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::Empty("respondent data"));
        }
        check_len("predictor rows vs y", x.n_rows(), y.len())?;
        check_len("weights vs y", weights.len(), y.len())?;
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::invalid(format!("weights must be positive, got {w}")));
        }
        Ok(RespondentData { x, y, weights })
    }

    /// Unit weights.
    pub fn unweighted(x: Rows, y: Vec<f64>) -> Result<Self> {
        let w = vec![1.0; y.len()];
        Self::new(x, y, w)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.x.n_cols()
    }

    pub fn subset(&self, idx: &[usize]) -> RespondentData {
        RespondentData {
            x: self.x.select(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            weights: idx.iter().map(|&i| self.weights[i]).collect(),
        }
    }

    pub fn with_y(&self, y: Vec<f64>) -> RespondentData {
        RespondentData {
            x: self.x.clone(),
            y,
            weights: self.weights.clone(),
        }
    }

    pub fn weighted_mean_y(&self) -> f64 {
        weighted_mean(&self.y, &self.weights)
    }
}

pub fn weighted_mean(v: &[f64], w: &[f64]) -> f64 {
    let (s, sw) = v
        .iter()
        .zip(w)
        .fold((0.0, 0.0), |(s, sw), (v, w)| (s + v * w, sw + w));
    s / sw
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Linear-interpolation sample quantile (R type 7) of an ascending slice.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_shape() {
        let r = Rows::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        assert_eq!(r.n_rows(), 3);
        assert_eq!(r.row(1), &[3.0, 4.0]);
        assert_eq!(r.column(1), vec![2.0, 4.0, 6.0]);
        assert_eq!(r.select(&[2, 0]).row(0), &[5.0, 6.0]);
        assert!(Rows::new(vec![1.0, 2.0, 3.0], 2).is_err());
    }

    #[test]
    fn respondent_validation() {
        let x = Rows::from_rows(&[[1.0], [2.0]]).unwrap();
        assert!(RespondentData::new(x.clone(), vec![1.0, 2.0], vec![1.0, 0.0]).is_err());
        assert!(RespondentData::new(x.clone(), vec![1.0], vec![1.0]).is_err());
        assert!(RespondentData::new(Rows::empty(1), vec![], vec![]).is_err());
        let d = RespondentData::new(x, vec![1.0, 3.0], vec![1.0, 3.0]).unwrap();
        assert_eq!(d.weighted_mean_y(), 2.5);
    }

    #[test]
    fn type7_quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_type7(&v, 0.0), 1.0);
        assert_eq!(quantile_type7(&v, 1.0), 4.0);
        assert_eq!(quantile_type7(&v, 0.5), 2.5);
        assert!((quantile_type7(&v, 0.05) - 1.15).abs() < 1e-12);
    }
}
