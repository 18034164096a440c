//! Sampling designs and complete-data design-weighted estimators.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    Srswor,
    PoissonPps,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub unit_ids: Vec<usize>,
    pub pi: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Sample {
    pub fn len(&self) -> usize {
        self.unit_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unit_ids.is_empty()
    }

    fn from_pi(unit_ids: Vec<usize>, pi: Vec<f64>) -> Sample {
        let weights = pi.iter().map(|p| 1.0 / p).collect();
        Sample {
            unit_ids,
            pi,
            weights,
        }
    }
}

/// Simple random sample without replacement; unit ids returned sorted.
pub fn draw_srswor<R: Rng + ?Sized>(
    population_size: usize,
    sample_size: usize,
    rng: &mut R,
) -> Result<Sample> {
    if sample_size > population_size {
        return Err(Error::invalid(format!(
            "sample size {sample_size} exceeds population size {population_size}"
        )));
    }
    let mut ids = index::sample(rng, population_size, sample_size).into_vec();
    ids.sort_unstable();
    let pi = sample_size as f64 / population_size as f64;
    let n = ids.len();
    Ok(Sample::from_pi(ids, vec![pi; n]))
}

/// Poisson sampling with `pi_i = min(1, expected_n * x_i / sum x)`.
pub fn draw_poisson_pps<R: Rng + ?Sized>(
    size_values: &[f64],
    expected_n: usize,
    rng: &mut R,
) -> Result<Sample> {
    if let Some(v) = size_values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::invalid(format!("size values must be positive, got {v}")));
    }
    let total: f64 = size_values.iter().sum();
    let mut ids = Vec::new();
    let mut pis = Vec::new();
    for (i, &x) in size_values.iter().enumerate() {
        let pi = (expected_n as f64 * x / total).min(1.0);
        let u: f64 = rng.random();
        if u < pi {
            ids.push(i);
            pis.push(pi);
        }
    }
    Ok(Sample::from_pi(ids, pis))
}

pub fn ht_total(values: &[f64], weights: &[f64]) -> Result<f64> {
    check_len("values vs weights", values.len(), weights.len())?;
    Ok(values.iter().zip(weights).map(|(y, w)| y * w).sum())
}

/// `F(t) = sum w 1(y <= t) / sum w`.
pub fn weighted_ecdf(values: &[f64], weights: &[f64], t: f64) -> Result<f64> {
    check_len("values vs weights", values.len(), weights.len())?;
    if values.is_empty() {
        return Err(Error::Empty("values"));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (y, w) in values.iter().zip(weights) {
        if *y <= t {
            num += w;
        }
        den += w;
    }
    Ok(num / den)
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid(format!("gamma must lie in (0,1), got {gamma}")));
    }
    Ok(())
}

/// `inf { t : F(t) >= gamma }`; always one of the input values.
pub fn weighted_quantile(values: &[f64], weights: &[f64], gamma: f64) -> Result<f64> {
    check_len("values vs weights", values.len(), weights.len())?;
    if values.is_empty() {
        return Err(Error::Empty("values"));
    }
    check_gamma(gamma)?;
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0)) {
        return Err(Error::invalid(format!("weights must be positive, got {w}")));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let total: f64 = weights.iter().sum();
    let mut cum = 0.0;
    for (k, &i) in order.iter().enumerate() {
        cum += weights[i];
        // only evaluate F at the end of a run of ties
        let last_of_run = k + 1 == order.len() || values[order[k + 1]] != values[i];
        if last_of_run && cum / total >= gamma {
            return Ok(values[i]);
        }
    }
    Ok(values[order[order.len() - 1]])
}

/// Finite-population quantile with unit weights. Panics on empty input or
/// gamma outside (0,1); callers check.
pub fn population_quantile(values: &[f64], gamma: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    for (k, x) in v.iter().enumerate() {
        if (k + 1) as f64 / n >= gamma && (k + 1 == v.len() || v[k + 1] != *x) {
            return *x;
        }
    }
    v[v.len() - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;

    #[test]
    fn census_srswor() {
        let s = draw_srswor(5, 5, &mut seeded(1)).unwrap();
        assert_eq!(s.unit_ids, vec![0, 1, 2, 3, 4]);
        assert!(s.pi.iter().all(|p| *p == 1.0));
        assert!(draw_srswor(3, 4, &mut seeded(1)).is_err());
    }

    #[test]
    fn srswor_pi_constant() {
        let s = draw_srswor(10_000, 1_000, &mut seeded(2)).unwrap();
        assert_eq!(s.len(), 1000);
        assert!(s.pi.iter().all(|p| *p == 0.1));
        assert!(s.weights.iter().all(|w| *w == 10.0));
        let mut d = s.unit_ids.clone();
        d.dedup();
        assert_eq!(d.len(), 1000);
    }

    #[test]
    fn srswor_inclusion_frequencies() {
        let mut rng = seeded(3);
        let reps = 10_000;
        let mut counts = [0usize; 20];
        for _ in 0..reps {
            for id in draw_srswor(20, 5, &mut rng).unwrap().unit_ids {
                counts[id] += 1;
            }
        }
        let se = (0.25f64 * 0.75 / reps as f64).sqrt();
        for c in counts {
            let f = c as f64 / reps as f64;
            assert!((f - 0.25).abs() < 4.0 * se, "frequency {f}");
        }
    }

    #[test]
    fn poisson_census_and_proportional() {
        let s = draw_poisson_pps(&[2.0; 7], 7, &mut seeded(4)).unwrap();
        assert_eq!(s.unit_ids, (0..7).collect::<Vec<_>>());
        assert!(s.pi.iter().all(|p| *p == 1.0));

        let sizes: Vec<f64> = (1..=100).map(|v| v as f64).collect();
        let s = draw_poisson_pps(&sizes, 10, &mut seeded(5)).unwrap();
        for (id, pi) in s.unit_ids.iter().zip(&s.pi) {
            let expected = 10.0 * sizes[*id] / 5050.0;
            assert!((pi - expected).abs() < 1e-15);
        }
        assert!(draw_poisson_pps(&[1.0, 0.0], 1, &mut seeded(1)).is_err());
    }

    #[test]
    fn poisson_expected_size() {
        let sizes: Vec<f64> = (0..500).map(|i| 1.0 + (i % 3) as f64).collect();
        let mut rng = seeded(6);
        let reps = 10_000;
        let total: f64 = sizes.iter().sum();
        let var: f64 = sizes
            .iter()
            .map(|x| {
                let p = (50.0 * x / total).min(1.0);
                p * (1.0 - p)
            })
            .sum();
        let mut sum = 0.0;
        for _ in 0..reps {
            sum += draw_poisson_pps(&sizes, 50, &mut rng).unwrap().len() as f64;
        }
        let mean = sum / reps as f64;
        assert!((mean - 50.0).abs() < 3.0 * (var / reps as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn ht_examples() {
        assert_eq!(ht_total(&[1.0, 2.0], &[2.0, 2.0]).unwrap(), 6.0);
        assert!(ht_total(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ht_design_unbiased() {
        let y: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64).collect();
        let t: f64 = y.iter().sum();
        let mut rng = seeded(7);
        let reps = 5000;
        let ests: Vec<f64> = (0..reps)
            .map(|_| {
                let s = draw_srswor(200, 20, &mut rng).unwrap();
                let v: Vec<f64> = s.unit_ids.iter().map(|&i| y[i]).collect();
                ht_total(&v, &s.weights).unwrap()
            })
            .collect();
        let m = ests.iter().sum::<f64>() / reps as f64;
        let sd = (ests.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        assert!((m - t).abs() < 3.0 * sd / (reps as f64).sqrt());
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(weighted_quantile(&[1.0, 2.0, 3.0, 4.0], &[1.0; 4], 0.5).unwrap(), 2.0);
        assert_eq!(weighted_quantile(&[7.5], &[3.0], 0.99).unwrap(), 7.5);
        assert_eq!(weighted_quantile(&[5.0, 5.0, 5.0], &[1.0; 3], 0.9).unwrap(), 5.0);
        assert!(weighted_quantile(&[], &[], 0.5).is_err());
        assert!(weighted_quantile(&[1.0], &[1.0], 1.0).is_err());
        assert_eq!(population_quantile(&[4.0, 1.0, 3.0, 2.0], 0.5), 2.0);
    }

    proptest! {
        #[test]
        fn quantile_is_ecdf_inverse(
            data in prop::collection::vec((-50i32..50, 1u32..20), 1..40),
            g1 in 0.01f64..0.99, g2 in 0.01f64..0.99,
        ) {
            let v: Vec<f64> = data.iter().map(|d| d.0 as f64).collect();
            let w: Vec<f64> = data.iter().map(|d| d.1 as f64).collect();
            let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
            let q_lo = weighted_quantile(&v, &w, lo).unwrap();
            let q_hi = weighted_quantile(&v, &w, hi).unwrap();
            prop_assert!(q_lo <= q_hi);
            prop_assert!(v.contains(&q_lo));
            // brute force: smallest observed t with F(t) >= gamma
            let mut cands = v.clone();
            cands.sort_by(f64::total_cmp);
            let brute = cands.iter().copied()
                .find(|t| weighted_ecdf(&v, &w, *t).unwrap() >= lo).unwrap();
            prop_assert_eq!(q_lo, brute);
            let max = cands[cands.len() - 1];
            prop_assert_eq!(weighted_ecdf(&v, &w, max).unwrap(), 1.0);
        }

        #[test]
        fn ht_is_linear(
            data in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3, 0.5f64..50.0), 1..30),
            a in -5f64..5.0, b in -5f64..5.0,
        ) {
            let y1: Vec<f64> = data.iter().map(|d| d.0).collect();
            let y2: Vec<f64> = data.iter().map(|d| d.1).collect();
            let w: Vec<f64> = data.iter().map(|d| d.2).collect();
            let comb: Vec<f64> = y1.iter().zip(&y2).map(|(u, v)| a * u + b * v).collect();
            let lhs = ht_total(&comb, &w).unwrap();
            let rhs = a * ht_total(&y1, &w).unwrap() + b * ht_total(&y2, &w).unwrap();
            let scale: f64 = data.iter().map(|d| d.2 * (a.abs() * d.0.abs() + b.abs() * d.1.abs())).sum::<f64>().max(1.0);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
        }
    }
}
