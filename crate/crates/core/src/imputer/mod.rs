//! The imputer contract: fitted point predictors, residual pools for random
//! imputation, donor handling and binary outcomes.

mod config;
mod fit;

use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Rows, RespondentData};
use crate::error::{Error, Result};
use crate::trees::cart::{fit_cart, CartConfig};

pub use config::{
    method_names, core_method_names, preset, MethodConfig, MethodSpec, Scale, ScoreMode,
    WeightMode,
};
pub use fit::{fit, FitContext};

/// A fitted point predictor. Implementations are immutable after fitting.
pub trait Model: Send + Sync + fmt::Debug {
    fn predict(&self, x: &[f64]) -> f64;

    fn n_features(&self) -> usize;

    /// Method-specific summary for debugging output.
    fn summary(&self) -> serde_json::Value {
        serde_json::Value::Null
    }

    /// Donor set for `x` (respondent values and their draw weights), for
    /// random hot-deck methods.
    fn donors(&self, _x: &[f64]) -> Option<Donors<'_>> {
        None
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Donors<'a> {
    pub values: &'a [f64],
    pub sampler: &'a WeightedIndex<f64>,
}

/// How a method produces imputed values beyond its point prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DonorKind {
    /// Model prediction; random variants add a residual.
    None,
    /// The prediction is itself an observed respondent value (1-NN).
    Nearest,
    /// Values are drawn from a donor set (hot-deck within classes).
    HotDeck,
}

#[derive(Debug)]
pub struct FittedImputer {
    pub method_id: String,
    pub model: Box<dyn Model>,
    pub donor: DonorKind,
    pub n_train: usize,
}

impl FittedImputer {
    pub fn new(method_id: impl Into<String>, model: Box<dyn Model>, donor: DonorKind, n_train: usize) -> Self {
        FittedImputer {
            method_id: method_id.into(),
            model,
            donor,
            n_train,
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let p = self.model.n_features();
        if x.len() != p {
            return Err(Error::Arity {
                expected: p,
                got: x.len(),
            });
        }
        Ok(self.model.predict(x))
    }

    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "method": self.method_id,
            "donor": self.donor,
            "n_train": self.n_train,
            "n_features": self.model.n_features(),
            "model": self.model.summary(),
        })
    }

    fn draw_donor<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<f64> {
        let d = self
            .model
            .donors(x)
            .ok_or_else(|| Error::invalid(format!("{} has no donor set", self.method_id)))?;
        Ok(d.values[d.sampler.sample(rng)])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceModel {
    #[default]
    Homoscedastic,
    /// Regression tree on squared residuals.
    Fitted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Deterministic,
    Random,
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deterministic" => Ok(Variant::Deterministic),
            "random" => Ok(Variant::Random),
            _ => Err(Error::invalid(format!("unknown variant '{s}'"))),
        }
    }
}

/// Floor on fitted residual variances, relative to the mean squared residual.
const VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug)]
pub struct ResidualPool {
    pub standardized_residuals: Vec<f64>,
    pub donor_weights: Vec<f64>,
    pub sigma_hat: Vec<f64>,
    sampler: WeightedIndex<f64>,
    variance: Option<(Box<dyn Model>, f64)>,
}

impl ResidualPool {
    /// Scale at a prediction point: 1 under the homoscedastic model.
    pub fn sigma_at(&self, x: &[f64]) -> f64 {
        match &self.variance {
            None => 1.0,
            Some((m, floor)) => m.predict(x).max(*floor).sqrt(),
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.standardized_residuals[self.sampler.sample(rng)]
    }
}

pub fn build_residual_pool(
    fitted: &FittedImputer,
    data: &RespondentData,
    variance_model: VarianceModel,
) -> Result<ResidualPool> {
    if data.len() < 2 {
        return Err(Error::invalid("residual pool needs at least two respondents"));
    }
    let mut e = Vec::with_capacity(data.len());
    for (x, y) in data.x.iter().zip(&data.y) {
        e.push(y - fitted.predict(x)?);
    }
    let (sigma_hat, variance) = match variance_model {
        VarianceModel::Homoscedastic => (vec![1.0; e.len()], None),
        VarianceModel::Fitted => {
            let e2: Vec<f64> = e.iter().map(|v| v * v).collect();
            let floor = (VARIANCE_FLOOR * e2.iter().sum::<f64>() / e2.len() as f64).max(1e-300);
            let tree = fit_cart(&data.with_y(e2), &CartConfig::default())?;
            let sig: Vec<f64> = data.x.iter().map(|x| tree.predict(x).max(floor).sqrt()).collect();
            (sig, Some((Box::new(tree) as Box<dyn Model>, floor)))
        }
    };
    let total_w: f64 = data.weights.iter().sum();
    let donor_weights: Vec<f64> = data.weights.iter().map(|w| w / total_w).collect();
    let std: Vec<f64> = e.iter().zip(&sigma_hat).map(|(e, s)| e / s).collect();
    let centre: f64 = std.iter().zip(&donor_weights).map(|(e, w)| e * w).sum();
    let standardized_residuals: Vec<f64> = std.iter().map(|e| e - centre).collect();
    let sampler = WeightedIndex::new(&donor_weights).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(ResidualPool {
        standardized_residuals,
        donor_weights,
        sigma_hat,
        sampler,
        variance,
    })
}

pub fn impute_deterministic(fitted: &FittedImputer, x_rows: &Rows) -> Result<Vec<f64>> {
    x_rows.iter().map(|x| fitted.predict(x)).collect()
}

/// `f(x) + sigma(x) e` with `e` drawn from the pool. Donor methods return
/// donor values instead.
pub fn impute_random<R: Rng + ?Sized>(
    fitted: &FittedImputer,
    pool: &ResidualPool,
    x_rows: &Rows,
    rng: &mut R,
) -> Result<Vec<f64>> {
    x_rows
        .iter()
        .map(|x| match fitted.donor {
            DonorKind::HotDeck => fitted.draw_donor(x, rng),
            DonorKind::Nearest => fitted.predict(x),
            DonorKind::None => {
                let f = fitted.predict(x)?;
                Ok(f + pool.sigma_at(x) * pool.draw(rng))
            }
        })
        .collect()
}

/// Bernoulli draws with the clamped prediction as parameter; donor methods
/// return the donor's value.
pub fn impute_binary<R: Rng + ?Sized>(
    fitted: &FittedImputer,
    x_rows: &Rows,
    rng: &mut R,
) -> Result<Vec<f64>> {
    x_rows
        .iter()
        .map(|x| match fitted.donor {
            DonorKind::HotDeck => fitted.draw_donor(x, rng),
            DonorKind::Nearest => fitted.predict(x),
            DonorKind::None => {
                let p = fitted.predict(x)?.clamp(0.0, 1.0);
                let u: f64 = rng.random();
                Ok(if u < p { 1.0 } else { 0.0 })
            }
        })
        .collect()
}

/// Impute `x_rows` according to the variant and outcome type. Hot-deck
/// methods always draw donors.
pub fn impute<R: Rng + ?Sized>(
    fitted: &FittedImputer,
    pool: Option<&ResidualPool>,
    x_rows: &Rows,
    variant: Variant,
    binary: bool,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if binary {
        return impute_binary(fitted, x_rows, rng);
    }
    match (variant, fitted.donor) {
        (_, DonorKind::HotDeck) => x_rows.iter().map(|x| fitted.draw_donor(x, rng)).collect(),
        (Variant::Deterministic, _) | (_, DonorKind::Nearest) => impute_deterministic(fitted, x_rows),
        (Variant::Random, DonorKind::None) => {
            let pool = pool.ok_or_else(|| Error::invalid("random imputation needs a residual pool"))?;
            impute_random(fitted, pool, x_rows, rng)
        }
    }
}
