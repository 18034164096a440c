//! Score method: imputation classes formed from quantiles of a preliminary
//! linear prediction.

use rand::distr::weighted::WeightedIndex;
use serde::Serialize;

use super::linear::LinearFit;
use crate::data::{weighted_mean, RespondentData, Rows};
use crate::error::{Error, Result};
use crate::imputer::{Donors, Model};

#[derive(Debug, Clone, Serialize)]
pub struct ClassStats {
    pub mean: f64,
    pub donor_y: Vec<f64>,
    pub donor_w: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ScoreClasses {
    pub boundaries: Vec<f64>,
    /// Class of every row of the full sample passed to `build_score_classes`.
    pub class_of: Vec<usize>,
    /// Per-class respondent statistics; `None` for classes without respondents.
    pub class_stats: Vec<Option<ClassStats>>,
    /// Class actually used for imputation (itself, or the nearest class with
    /// respondents).
    pub effective: Vec<usize>,
    pub fit: LinearFit,
    samplers: Vec<Option<WeightedIndex<f64>>>,
}

pub fn n_classes(n: usize, class_size: usize) -> usize {
    ((n as f64 / class_size as f64).round() as usize).max(1)
}

/// Score quantile boundaries `q_h = s_(ceil(n h / H))`, h = 1..H-1.
pub fn score_boundaries(scores: &[f64], h: usize) -> Vec<f64> {
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    (1..h).map(|k| s[(n * k).div_ceil(h) - 1]).collect()
}

/// Class id of a score: the number of boundaries strictly below it, so class
/// h holds scores in `(q_h, q_{h+1}]`.
pub fn class_for(boundaries: &[f64], score: f64) -> usize {
    boundaries.partition_point(|q| *q < score)
}

/// Build classes from the scores of all sampled units (`all_rows`); class
/// statistics use respondents only.
pub fn build_score_classes(
    all_rows: &Rows,
    respondents: &RespondentData,
    fit: LinearFit,
    class_size: usize,
) -> Result<ScoreClasses> {
    let n = all_rows.n_rows();
    if class_size < 2 {
        return Err(Error::invalid("class size must be at least 2"));
    }
    if class_size > n {
        return Err(Error::invalid(format!("class size {class_size} exceeds sample size {n}")));
    }
    let h = n_classes(n, class_size);
    let scores: Vec<f64> = all_rows.iter().map(|x| fit.predict(x)).collect();
    let boundaries = score_boundaries(&scores, h);
    let class_of: Vec<usize> = scores.iter().map(|s| class_for(&boundaries, *s)).collect();

    let mut members: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); h];
    for ((x, y), w) in respondents.x.iter().zip(&respondents.y).zip(&respondents.weights) {
        let c = class_for(&boundaries, fit.predict(x));
        members[c].0.push(*y);
        members[c].1.push(*w);
    }
    let class_stats: Vec<Option<ClassStats>> = members
        .into_iter()
        .map(|(ys, ws)| {
            (!ys.is_empty()).then(|| ClassStats {
                mean: weighted_mean(&ys, &ws),
                donor_y: ys,
                donor_w: ws,
            })
        })
        .collect();
    let effective: Vec<usize> = (0..h)
        .map(|c| {
            (0..h)
                .filter(|&k| class_stats[k].is_some())
                .min_by_key(|&k| (k.abs_diff(c), k))
                .expect("respondent data is nonempty")
        })
        .collect();
    let samplers = class_stats
        .iter()
        .map(|s| s.as_ref().map(|s| WeightedIndex::new(&s.donor_w).expect("positive weights")))
        .collect();
    Ok(ScoreClasses {
        boundaries,
        class_of,
        class_stats,
        effective,
        fit,
        samplers,
    })
}

impl ScoreClasses {
    pub fn n_classes(&self) -> usize {
        self.class_stats.len()
    }

    fn stats_for(&self, x: &[f64]) -> (usize, &ClassStats) {
        let c = self.effective[class_for(&self.boundaries, self.fit.predict(x))];
        (c, self.class_stats[c].as_ref().expect("effective class has respondents"))
    }
}

impl Model for ScoreClasses {
    fn predict(&self, x: &[f64]) -> f64 {
        self.stats_for(x).1.mean
    }

    fn n_features(&self) -> usize {
        self.fit.beta.len() - 1
    }

    fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "classes": self.n_classes(),
            "boundaries": self.boundaries,
            "empty_classes": self.class_stats.iter().filter(|s| s.is_none()).count(),
        })
    }

    fn donors(&self, x: &[f64]) -> Option<Donors<'_>> {
        let (c, stats) = self.stats_for(x);
        Some(Donors {
            values: &stats.donor_y,
            sampler: self.samplers[c].as_ref()?,
        })
    }
}
