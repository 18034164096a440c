use crate::data::{RespondentData, Rows};
use crate::error::{Error, Result};
use crate::imputer::Model;

/// K nearest respondents in Euclidean distance; ties go to the smaller index.
#[derive(Debug, Clone)]
pub struct KnnModel {
    x: Rows,
    y: Vec<f64>,
    w: Vec<f64>,
    k: usize,
}

pub fn fit_knn(data: &RespondentData, k: usize) -> Result<KnnModel> {
    if k == 0 || k > data.len() {
        return Err(Error::invalid(format!("k = {k} must lie in 1..={}", data.len())));
    }
    Ok(KnnModel {
        x: data.x.clone(),
        y: data.y.clone(),
        w: data.weights.clone(),
        k,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

impl KnnModel {
    pub fn neighbours(&self, x: &[f64]) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = self.x.iter().map(|r| sq_dist(r, x)).zip(0..).collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, cmp);
            d.truncate(self.k);
        }
        d.sort_by(cmp);
        d.into_iter().map(|(_, i)| i).collect()
    }
}

impl Model for KnnModel {
    fn predict(&self, x: &[f64]) -> f64 {
        let nb = self.neighbours(x);
        if nb.len() == 1 {
            return self.y[nb[0]];
        }
        let (s, sw) = nb
            .iter()
            .fold((0.0, 0.0), |(s, sw), &j| (s + self.w[j] * self.y[j], sw + self.w[j]));
        s / sw
    }

    fn n_features(&self) -> usize {
        self.x.n_cols()
    }

    fn summary(&self) -> serde_json::Value {
        serde_json::json!({ "k": self.k, "n_donors": self.y.len() })
    }
}
