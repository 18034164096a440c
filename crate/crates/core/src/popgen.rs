//! Finite population generators.
//!
//! The low-dimensional generator produces five predictors and the survey
//! variables Y1..Y10. The high-dimensional generator is a synthetic stand-in
//! for a bank of strongly correlated load curves (672 half-hourly readings per
//! unit by default) with the four derived survey variables Y1..Y4.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rand_distr::{Bernoulli, Beta, Distribution, Exp, Gamma, Normal, Pareto, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Rows;
use crate::design::population_quantile;
use crate::error::{Error, Result};

/// Standard quantile levels cached on every population.
pub const STANDARD_GAMMAS: [f64; 3] = [0.25, 0.5, 0.75];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    Binary,
    Categorical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorTable {
    pub values: Rows,
    pub column_kinds: Vec<ColumnKind>,
    pub column_names: Vec<String>,
}

impl PredictorTable {
    pub fn n_rows(&self) -> usize {
        self.values.n_rows()
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.column_names.iter().position(|c| c == name)?;
        Some(self.values.column(j))
    }

    /// Numeric design rows for imputation models: continuous and binary
    /// columns pass through, a categorical column with levels {1,..,L}
    /// becomes indicators for levels 1..L-1.
    pub fn model_rows(&self) -> (Rows, Vec<String>) {
        let mut names = Vec::new();
        let mut levels: Vec<Vec<f64>> = Vec::new();
        for (j, kind) in self.column_kinds.iter().enumerate() {
            match kind {
                ColumnKind::Categorical => {
                    let mut lv: Vec<f64> = self.values.column(j);
                    lv.sort_by(f64::total_cmp);
                    lv.dedup();
                    if lv.is_empty() {
                        lv = vec![1.0, 2.0, 3.0];
                    }
                    let keep: Vec<f64> = lv[..lv.len().saturating_sub(1)].to_vec();
                    for l in &keep {
                        names.push(format!("{}=={}", self.column_names[j], l));
                    }
                    levels.push(keep);
                }
                _ => {
                    names.push(self.column_names[j].clone());
                    levels.push(Vec::new());
                }
            }
        }
        let mut out = Vec::with_capacity(self.n_rows() * names.len());
        for row in self.values.iter() {
            for (j, kind) in self.column_kinds.iter().enumerate() {
                match kind {
                    ColumnKind::Categorical => {
                        for l in &levels[j] {
                            out.push(if row[j] == *l { 1.0 } else { 0.0 });
                        }
                    }
                    _ => out.push(row[j]),
                }
            }
        }
        let n = names.len();
        (Rows::new(out, n).expect("consistent width"), names)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurveyVariable {
    pub name: String,
    pub values: Vec<f64>,
    pub binary: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub predictors: PredictorTable,
    pub survey_vars: Vec<SurveyVariable>,
    pub true_total: BTreeMap<String, f64>,
    /// (variable, gamma, quantile) for the standard gammas.
    pub true_quantiles: Vec<(String, f64, f64)>,
}

impl Population {
    pub fn new(predictors: PredictorTable, survey_vars: Vec<SurveyVariable>) -> Self {
        let mut true_total = BTreeMap::new();
        let mut true_quantiles = Vec::new();
        for v in &survey_vars {
            true_total.insert(v.name.clone(), v.values.iter().sum());
            if !v.values.is_empty() {
                for &g in &STANDARD_GAMMAS {
                    true_quantiles.push((v.name.clone(), g, population_quantile(&v.values, g)));
                }
            }
        }
        Population {
            predictors,
            survey_vars,
            true_total,
            true_quantiles,
        }
    }

    pub fn size(&self) -> usize {
        self.predictors.n_rows()
    }

    pub fn var(&self, name: &str) -> Option<&SurveyVariable> {
        self.survey_vars.iter().find(|v| v.name == name)
    }

    pub fn true_quantile(&self, name: &str, gamma: f64) -> Option<f64> {
        if let Some((_, _, q)) = self
            .true_quantiles
            .iter()
            .find(|(n, g, _)| n == name && *g == gamma)
        {
            return Some(*q);
        }
        let v = self.var(name)?;
        if v.values.is_empty() || !(gamma > 0.0 && gamma < 1.0) {
            return None;
        }
        Some(population_quantile(&v.values, gamma))
    }

    /// CSV dump: header row, then one unit per row with predictor columns
    /// followed by survey variables.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = self.predictors.column_names.clone();
        header.extend(self.survey_vars.iter().map(|v| v.name.clone()));
        w.write_record(&header)?;
        let mut rec: Vec<String> = Vec::with_capacity(header.len());
        for (i, row) in self.predictors.values.iter().enumerate() {
            rec.clear();
            rec.extend(row.iter().map(|v| v.to_string()));
            rec.extend(self.survey_vars.iter().map(|v| v.values[i].to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Low-dimensional population
// ---------------------------------------------------------------------------

pub const LOW_DIM_PREDICTORS: [&str; 5] = ["X1", "X2", "X3", "X4", "X5"];
pub const LOW_DIM_VARIABLES: [&str; 10] = ["Y1", "Y2", "Y3", "Y4", "Y5", "Y6", "Y7", "Y8", "Y9", "Y10"];

/// Centre and scale to population mean 0, variance 1 (divisor N).
pub fn standardize(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    let sd = var.sqrt();
    for x in v.iter_mut() {
        *x -= m;
        if sd > 0.0 {
            *x /= sd;
        }
    }
}

pub fn generate_predictors<R: Rng + ?Sized>(n_units: usize, rng: &mut R) -> PredictorTable {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let beta = Beta::new(3.0, 1.0).unwrap();
    let gamma = Gamma::new(3.0, 2.0).unwrap();
    let bern = Bernoulli::new(0.7).unwrap();

    let mut cols: [Vec<f64>; 5] = Default::default();
    for _ in 0..n_units {
        cols[0].push(normal.sample(rng));
        cols[1].push(beta.sample(rng));
        cols[2].push(2.0 * gamma.sample(rng));
        cols[3].push(if bern.sample(rng) { 1.0 } else { 0.0 });
        let u: f64 = rng.random();
        cols[4].push(if u < 0.4 {
            1.0
        } else if u < 0.7 {
            2.0
        } else {
            3.0
        });
    }
    for c in cols.iter_mut().take(3) {
        standardize(c);
    }
    let mut values = Vec::with_capacity(n_units * 5);
    for i in 0..n_units {
        for c in &cols {
            values.push(c[i]);
        }
    }
    PredictorTable {
        values: Rows::new(values, 5).unwrap(),
        column_kinds: vec![
            ColumnKind::Continuous,
            ColumnKind::Continuous,
            ColumnKind::Continuous,
            ColumnKind::Binary,
            ColumnKind::Categorical,
        ],
        column_names: LOW_DIM_PREDICTORS.iter().map(|s| s.to_string()).collect(),
    }
}

fn ind(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Shared linear index of the S1/Q/NR1 expressions, without the constant.
fn nonresponse_index(x: &[f64]) -> f64 {
    2.0 * x[0] + 2.0 * x[1] + 2.0 * x[2] - x[3] - x[2] * x[3] + 1.5 * ind(x[4] == 1.0)
        - 2.0 * ind(x[4] == 2.0)
}

/// `0.1 + 0.79 / exp{1 + 0.5 (0.75 + index)}`; unbounded above.
pub fn s1_score(x: &[f64]) -> f64 {
    0.1 + 0.79 * (-(1.0 + 0.5 * (0.75 + nonresponse_index(x)))).exp()
}

/// Logistic score `Q = sigmoid{1 + 0.4 (6.5 + index)}`, in (0, 1).
pub fn q_score(x: &[f64]) -> f64 {
    sigmoid(1.0 + 0.4 * (6.5 + nonresponse_index(x)))
}

pub fn s2_score(x: &[f64]) -> f64 {
    0.55 * q_score(x) + 0.02 - 0.01 * x[1].powi(3)
}

/// Noise terms for one unit: one standard-normal draw per continuous
/// variable, a centred Pareto(1,4) draw for Y2 and a Beta(3,1) draw for Y6.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UnitNoise {
    pub normal: [f64; 8],
    pub pareto_centered: f64,
    pub beta: f64,
}

/// Evaluate Y1..Y10 for one predictor row `x = (x1, .., x5)`.
pub fn survey_values(x: &[f64], e: &UnitNoise) -> [f64; 10] {
    let (x1, x2, x3, x4) = (x[0], x[1], x[2], x[3]);
    let c1 = ind(x[4] == 1.0);
    let c2 = ind(x[4] == 2.0);
    let n = &e.normal;
    let lin = 2.0 * x1 + x2 + 2.0 * x3;
    let y7_inner = 2.0 * x1 + x2 + 3.0 * x3 * x4 + 1.5 * c1 - 2.0 * c2;
    [
        2.0 + lin + n[0],
        2.0 + lin + e.pareto_centered,
        2.0 + x1 + x2 * x2 + x3 + n[2],
        2.0 + 2.0 * x1 + x2 + 3.0 * x3 * x4 + 1.5 * c1 - 2.0 * c2 + n[3],
        2.0 + 5.0 * x1.powi(3) + 4.0 * x2 * x2 + x3 * x4 + 1.5 * c1 - 2.0 * c2 + n[4],
        2.0 + lin * lin + n[5] + e.beta,
        2.0 + y7_inner * y7_inner + n[6],
        4.0 * x1.cos() + n[7],
        ind(s1_score(x) > 0.5),
        ind(s2_score(x) > 0.5),
    ]
}

pub fn generate_survey_variables<R: Rng + ?Sized>(
    predictors: &PredictorTable,
    rng: &mut R,
) -> Result<Vec<SurveyVariable>> {
    if predictors.column_names.len() < 5 || predictors.column_names[..5] != LOW_DIM_PREDICTORS {
        return Err(Error::invalid("expected predictor columns X1..X5"));
    }
    // Pareto(scale 1, shape 4) has mean 4/3.
    let pareto = Pareto::new(1.0, 4.0).unwrap();
    let beta = Beta::new(3.0, 1.0).unwrap();
    let n = predictors.n_rows();
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); 10];
    for row in predictors.values.iter() {
        let mut e = UnitNoise::default();
        for v in e.normal.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        e.pareto_centered = pareto.sample(rng) - 4.0 / 3.0;
        e.beta = beta.sample(rng);
        for (c, v) in cols.iter_mut().zip(survey_values(row, &e)) {
            c.push(v);
        }
    }
    Ok(cols
        .into_iter()
        .enumerate()
        .map(|(k, values)| SurveyVariable {
            name: LOW_DIM_VARIABLES[k].to_string(),
            values,
            binary: k >= 8,
        })
        .collect())
}

pub fn generate_population<R: Rng + ?Sized>(n_units: usize, rng: &mut R) -> Population {
    let predictors = generate_predictors(n_units, rng);
    let vars = generate_survey_variables(&predictors, rng).expect("generated predictors");
    Population::new(predictors, vars)
}

// ---------------------------------------------------------------------------
// High-dimensional surrogate
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HighDimConfig {
    pub n_units: usize,
    pub n_predictors: usize,
    /// Amplitude of the random low-frequency wiggle added to the daily cycle.
    pub base_curve_roughness: f64,
    /// Log-scale sd of the unit amplitude a_i.
    pub unit_scale_sd: f64,
    /// Marginal sd of the per-reading noise.
    pub noise_sd: f64,
    /// Lag-one autocorrelation of the per-reading noise.
    pub noise_rho: f64,
    /// Typical reading level (amplitude scale).
    pub level: f64,
    /// sd of the unit offset b_i.
    pub offset_sd: f64,
    /// Cutoffs used by Y3: `x5_split`, `x2_high`, `x5_high`.
    pub thresholds: BTreeMap<String, f64>,
}

impl Default for HighDimConfig {
    fn default() -> Self {
        let thresholds = [("x5_split", 156.0), ("x2_high", 190.0), ("x5_high", 200.0)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        HighDimConfig {
            n_units: 6291,
            n_predictors: 672,
            base_curve_roughness: 0.15,
            unit_scale_sd: 0.5,
            noise_sd: 60.0,
            noise_rho: 0.6,
            level: 300.0,
            offset_sd: 40.0,
            thresholds,
        }
    }
}

impl HighDimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_predictors < 5 {
            return Err(Error::invalid(format!(
                "n_predictors must be at least 5, got {}",
                self.n_predictors
            )));
        }
        for (name, v) in [
            ("unit_scale_sd", self.unit_scale_sd),
            ("noise_sd", self.noise_sd),
            ("offset_sd", self.offset_sd),
            ("level", self.level),
        ] {
            if !(v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.noise_rho > -1.0 && self.noise_rho < 1.0) {
            return Err(Error::invalid("noise_rho must lie in (-1, 1)"));
        }
        for key in ["x5_split", "x2_high", "x5_high"] {
            if !self.thresholds.contains_key(key) {
                return Err(Error::invalid(format!("missing threshold '{key}'")));
            }
        }
        Ok(())
    }

    fn threshold(&self, key: &str) -> f64 {
        self.thresholds[key]
    }
}

/// Smooth base curve: a daily cycle over 48 half-hour slots plus a weekly
/// modulation with random amplitudes scaled by `roughness`.
pub fn base_curve<R: Rng + ?Sized>(n: usize, roughness: f64, rng: &mut R) -> Vec<f64> {
    use std::f64::consts::PI;
    let amps: Vec<f64> = (0..4).map(|_| roughness * rng.sample::<f64, _>(StandardNormal)).collect();
    let phases: Vec<f64> = (0..4).map(|_| 2.0 * PI * rng.random::<f64>()).collect();
    (0..n)
        .map(|j| {
            let t = j as f64;
            let daily = 1.0 + 0.5 * (2.0 * PI * (t % 48.0) / 48.0 - PI / 2.0).sin();
            let slow: f64 = amps
                .iter()
                .zip(&phases)
                .enumerate()
                .map(|(k, (a, ph))| a * (2.0 * PI * (k + 1) as f64 * t / 336.0 + ph).sin())
                .sum();
            daily + slow
        })
        .collect()
}

/// One unit's readings `a * s(t_j) + b + noise_j`.
pub fn unit_profile(a: f64, b: f64, curve: &[f64], noise: &[f64]) -> Vec<f64> {
    curve.iter().zip(noise).map(|(s, e)| a * s + b + e).collect()
}

pub const HIGH_DIM_VARIABLES: [&str; 4] = ["Y1", "Y2", "Y3", "Y4"];

/// Y1..Y4 of the high-dimensional study for one unit. `normal` holds three
/// N(0, 1500) draws, `exp_centered` an Exponential(rate 2) draw minus 1/2.
pub fn high_dim_survey_values(
    x: &[f64],
    cfg: &HighDimConfig,
    normal: [f64; 3],
    exp_centered: f64,
) -> [f64; 4] {
    let (x1, x2, x3, x4, x5) = (x[0], x[1], x[2], x[3], x[4]);
    let split = cfg.threshold("x5_split");
    [
        400.0 + 2.0 * x1 + x2 + 2.0 * x3 + normal[0],
        400.0 + x1 * x2 + 2.0 * x3 + normal[1],
        500.0 + 2.0 * x4 + 400.0 * ind(x5 > split) - 400.0 * ind(x5 <= split)
            + 1000.0 * ind(x2 > cfg.threshold("x2_high"))
            + 300.0 * ind(x5 > cfg.threshold("x5_high"))
            + normal[2],
        1.0 + (2.0 * x1 + x2 + 2.0 * x3).cos().powi(2) + exp_centered,
    ]
}

pub fn generate_highdim_population<R: Rng + ?Sized>(
    cfg: &HighDimConfig,
    rng: &mut R,
) -> Result<Population> {
    cfg.validate()?;
    let p = cfg.n_predictors;
    let curve = base_curve(p, cfg.base_curve_roughness, rng);
    let innov = (1.0 - cfg.noise_rho * cfg.noise_rho).sqrt();
    let y_noise = Normal::new(0.0, 1500.0).unwrap();
    let exp = Exp::new(2.0).unwrap();
    let mut values = Vec::with_capacity(cfg.n_units * p);
    let mut ys: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.n_units); 4];
    let mut noise = vec![0.0; p];
    for _ in 0..cfg.n_units {
        let z: f64 = rng.sample(StandardNormal);
        let a = cfg.level * (cfg.unit_scale_sd * z - 0.5 * cfg.unit_scale_sd.powi(2)).exp();
        let b = cfg.offset_sd * rng.sample::<f64, _>(StandardNormal);
        let mut prev = cfg.noise_sd * rng.sample::<f64, _>(StandardNormal);
        for e in noise.iter_mut() {
            *e = prev;
            prev = cfg.noise_rho * prev + innov * cfg.noise_sd * rng.sample::<f64, _>(StandardNormal);
        }
        let row = unit_profile(a, b, &curve, &noise);
        let normals = [y_noise.sample(rng), y_noise.sample(rng), y_noise.sample(rng)];
        let e4 = exp.sample(rng) - 0.5;
        for (c, v) in ys.iter_mut().zip(high_dim_survey_values(&row, cfg, normals, e4)) {
            c.push(v);
        }
        values.extend_from_slice(&row);
    }
    let predictors = PredictorTable {
        values: Rows::new(values, p)?,
        column_kinds: vec![ColumnKind::Continuous; p],
        column_names: (1..=p).map(|j| format!("X{j}")).collect(),
    };
    let vars = ys
        .into_iter()
        .enumerate()
        .map(|(k, values)| SurveyVariable {
            name: HIGH_DIM_VARIABLES[k].to_string(),
            values,
            binary: false,
        })
        .collect();
    Ok(Population::new(predictors, vars))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn mean_var(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n)
    }

    #[test]
    fn empty_table_keeps_columns() {
        let t = generate_predictors(0, &mut seeded(1));
        assert_eq!(t.n_rows(), 0);
        assert_eq!(t.n_cols(), 5);
    }

    #[test]
    fn x4_bernoulli_mean() {
        let t = generate_predictors(100_000, &mut seeded(2));
        let (m, _) = mean_var(&t.column("X4").unwrap());
        assert!((m - 0.7).abs() < 3.0 * (0.21f64 / 1e5).sqrt(), "mean {m}");
    }

    #[test]
    fn continuous_columns_standardized() {
        let t = generate_predictors(10_000, &mut seeded(3));
        for name in ["X1", "X2", "X3"] {
            let (m, v) = mean_var(&t.column(name).unwrap());
            assert!(m.abs() < 1e-9, "{name} mean {m}");
            assert!((v - 1.0).abs() < 1e-9, "{name} var {v}");
        }
        assert!(t.column("X4").unwrap().iter().all(|v| *v == 0.0 || *v == 1.0));
        assert!(t.column("X5").unwrap().iter().all(|v| [1.0, 2.0, 3.0].contains(v)));
    }

    #[test]
    fn y1_and_y8_at_origin() {
        let e = UnitNoise::default();
        let y = survey_values(&[0.0, 0.0, 0.0, 0.0, 3.0], &e);
        assert_eq!(y[0], 2.0);
        assert_eq!(y[7], 4.0);
    }

    #[test]
    fn y9_matches_scalar_evaluation() {
        // x = (0.3, -1.2, 0.8, 1, 2): index = 0.6 - 2.4 + 1.6 - 1 - 0.8 - 2 = -4.0
        let x = [0.3, -1.2, 0.8, 1.0, 2.0];
        let s1 = 0.1 + 0.79 / (1.0f64 + 0.5 * (0.75 - 4.0)).exp();
        assert!((s1_score(&x) - s1).abs() < 1e-12);
        let y = survey_values(&x, &UnitNoise::default());
        assert_eq!(y[8], if s1 > 0.5 { 1.0 } else { 0.0 });
        assert_eq!(y[8], 1.0);
    }

    #[test]
    fn binary_variables_are_indicators() {
        let pop = generate_population(2000, &mut seeded(4));
        for name in ["Y9", "Y10"] {
            assert!(pop.var(name).unwrap().values.iter().all(|v| *v == 0.0 || *v == 1.0));
        }
    }

    #[test]
    fn same_seed_same_population() {
        let a = generate_population(500, &mut seeded(9));
        let b = generate_population(500, &mut seeded(9));
        assert_eq!(a, b);
    }

    #[test]
    fn totals_are_exact_sums() {
        let pop = generate_population(1000, &mut seeded(5));
        for v in &pop.survey_vars {
            let mut s = 0.0;
            for x in &v.values {
                s += x;
            }
            assert_eq!(pop.true_total[&v.name], s);
        }
    }

    #[test]
    fn degenerate_unit_profile_is_zero() {
        let curve = base_curve(672, 0.2, &mut seeded(1));
        let row = unit_profile(0.0, 0.0, &curve, &vec![0.0; 672]);
        assert!(row.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn high_dim_y1_intercept() {
        let cfg = HighDimConfig::default();
        let y = high_dim_survey_values(&[0.0; 5], &cfg, [0.0; 3], 0.0);
        assert_eq!(y[0], 400.0);
    }

    #[test]
    fn rejects_too_few_predictors() {
        let cfg = HighDimConfig {
            n_predictors: 4,
            ..Default::default()
        };
        assert!(generate_highdim_population(&cfg, &mut seeded(1)).is_err());
    }

    #[test]
    fn high_dim_columns_strongly_correlated() {
        let cfg = HighDimConfig {
            n_units: 3000,
            ..Default::default()
        };
        let pop = generate_highdim_population(&cfg, &mut seeded(6)).unwrap();
        let cols: Vec<Vec<f64>> = (0..15).map(|j| pop.predictors.values.column(j)).collect();
        let stats: Vec<(f64, f64)> = cols.iter().map(|c| mean_var(c)).collect();
        let mut sum = 0.0;
        let mut count = 0.0;
        for a in 0..15 {
            for b in (a + 1)..15 {
                let n = cols[a].len() as f64;
                let cov = cols[a]
                    .iter()
                    .zip(&cols[b])
                    .map(|(x, y)| (x - stats[a].0) * (y - stats[b].0))
                    .sum::<f64>()
                    / n;
                sum += cov / (stats[a].1 * stats[b].1).sqrt();
                count += 1.0;
            }
        }
        assert!(sum / count > 0.5, "average correlation {}", sum / count);
    }

    #[test]
    fn model_rows_expand_categorical() {
        let t = generate_predictors(50, &mut seeded(8));
        let (rows, names) = t.model_rows();
        assert_eq!(names, vec!["X1", "X2", "X3", "X4", "X5==1", "X5==2"]);
        for (raw, enc) in t.values.iter().zip(rows.iter()) {
            assert_eq!(enc[4], if raw[4] == 1.0 { 1.0 } else { 0.0 });
            assert_eq!(enc[5], if raw[4] == 2.0 { 1.0 } else { 0.0 });
        }
    }
}
