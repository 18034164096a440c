//! Monte Carlo performance measures and across-scenario summaries.

use serde::Serialize;

use crate::data::quantile_type7;
use crate::error::{check_len, Error, Result};

/// Percent relative bias `100 mean((e - t) / t)` against a fixed truth.
pub fn relative_bias(estimates: &[f64], truth: f64) -> Result<f64> {
    relative_bias_paired(estimates, &vec![truth; estimates.len()])
}

/// Relative bias when the truth changes between replicates (a new
/// population per replicate).
pub fn relative_bias_paired(estimates: &[f64], truths: &[f64]) -> Result<f64> {
    check_len("estimates vs truths", estimates.len(), truths.len())?;
    if estimates.is_empty() {
        return Err(Error::Empty("estimates"));
    }
    if truths.iter().any(|t| *t == 0.0) {
        return Err(Error::invalid("relative bias undefined for a zero truth"));
    }
    let s: f64 = estimates.iter().zip(truths).map(|(e, t)| (e - t) / t).sum();
    Ok(100.0 * s / estimates.len() as f64)
}

/// Percent relative efficiency `100 MSE(imputed) / MSE(complete)`.
pub fn relative_efficiency(imputed: &[f64], complete: &[f64], truth: f64) -> Result<f64> {
    relative_efficiency_paired(imputed, complete, &vec![truth; imputed.len()])
}

pub fn relative_efficiency_paired(imputed: &[f64], complete: &[f64], truths: &[f64]) -> Result<f64> {
    check_len("imputed vs complete", imputed.len(), complete.len())?;
    check_len("imputed vs truths", imputed.len(), truths.len())?;
    if imputed.is_empty() {
        return Err(Error::Empty("estimates"));
    }
    let mse = |v: &[f64]| v.iter().zip(truths).map(|(e, t)| (e - t).powi(2)).sum::<f64>();
    let denom = mse(complete);
    if !(denom > 0.0) {
        return Err(Error::invalid("complete-data MSE is zero"));
    }
    Ok(100.0 * mse(imputed) / denom)
}

/// Monte Carlo standard error of the relative bias (in percent).
pub fn relative_bias_se(estimates: &[f64], truths: &[f64]) -> Result<f64> {
    check_len("estimates vs truths", estimates.len(), truths.len())?;
    let n = estimates.len();
    if n < 2 {
        return Err(Error::invalid("need two replicates for a standard error"));
    }
    let r: Vec<f64> = estimates.iter().zip(truths).map(|(e, t)| 100.0 * (e - t) / t).collect();
    let m = r.iter().sum::<f64>() / n as f64;
    let var = r.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok((var / n as f64).sqrt())
}

/// min, Q0.05, Q0.25, median, Q0.75, Q0.95, max.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SevenStats {
    pub min: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
    pub max: f64,
}

impl SevenStats {
    /// Quantiles use linear interpolation between order statistics.
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("values"));
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Ok(SevenStats {
            min: v[0],
            q05: quantile_type7(&v, 0.05),
            q25: quantile_type7(&v, 0.25),
            median: quantile_type7(&v, 0.5),
            q75: quantile_type7(&v, 0.75),
            q95: quantile_type7(&v, 0.95),
            max: v[v.len() - 1],
        })
    }

    pub fn as_array(&self) -> [f64; 7] {
        [self.min, self.q05, self.q25, self.median, self.q75, self.q95, self.max]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn bias_examples() {
        assert_eq!(relative_bias(&[5.0, 5.0], 5.0).unwrap(), 0.0);
        assert_eq!(relative_bias(&[110.0, 90.0], 100.0).unwrap(), 0.0);
        assert!(relative_bias(&[1.0], 0.0).is_err());
    }

    #[test]
    fn efficiency_examples() {
        let c = [98.0, 103.0, 101.0, 95.0];
        assert_eq!(relative_efficiency(&c, &c, 100.0).unwrap(), 100.0);
        let doubled: Vec<f64> = c.iter().map(|v| 100.0 + 2.0 * (v - 100.0)).collect();
        assert!((relative_efficiency(&doubled, &c, 100.0).unwrap() - 400.0).abs() < 1e-12);
        assert!(relative_efficiency(&c, &[100.0; 4], 100.0).is_err());
    }

    #[test]
    fn random_vectors_match_recomputation() {
        let mut rng = seeded(5);
        let e: Vec<f64> = (0..50).map(|_| 90.0 + 20.0 * rng.random::<f64>()).collect();
        let c: Vec<f64> = (0..50).map(|_| 95.0 + 10.0 * rng.random::<f64>()).collect();
        let mut rb = 0.0;
        for v in &e {
            rb += (v - 100.0) / 100.0;
        }
        rb *= 100.0 / 50.0;
        assert!((relative_bias(&e, 100.0).unwrap() - rb).abs() < 1e-12);
        let num: f64 = e.iter().map(|v| (v - 100.0) * (v - 100.0)).sum::<f64>() / 50.0;
        let den: f64 = c.iter().map(|v| (v - 100.0) * (v - 100.0)).sum::<f64>() / 50.0;
        assert!((relative_efficiency(&e, &c, 100.0).unwrap() - 100.0 * num / den).abs() < 1e-10);
    }

    #[test]
    fn single_value_stats() {
        let s = SevenStats::of(&[3.5]).unwrap();
        assert!(s.as_array().iter().all(|v| *v == 3.5));
    }

    proptest! {
        #[test]
        fn stats_nondecreasing_and_order_free(mut v in prop::collection::vec(-1e3f64..1e3, 1..40)) {
            let a = SevenStats::of(&v).unwrap();
            prop_assert!(a.as_array().windows(2).all(|w| w[0] <= w[1]));
            v.reverse();
            prop_assert_eq!(a, SevenStats::of(&v).unwrap());
        }
    }
}
