//! Monte Carlo engine: repeated populations, samples and response sets,
//! with every configured method imputing the same data within a replicate.

mod grid;
mod metrics;
mod output;
mod summary;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{RespondentData, Rows};
use crate::design::{draw_poisson_pps, draw_srswor, ht_total, weighted_quantile, Design, Sample};
use crate::error::{Error, Result};
use crate::imputer::{build_residual_pool, fit, impute, DonorKind, FitContext, MethodConfig, Variant};
use crate::nonresponse::{generate_response, response_prob, Mechanism, ResponseSet};
use crate::popgen::{
    generate_highdim_population, generate_population, HighDimConfig, Population, HIGH_DIM_VARIABLES,
    LOW_DIM_VARIABLES,
};
use crate::rng::{purpose, substream};

pub use grid::{parse_grid, Grid, GridOverrides};
pub use metrics::{
    relative_bias, relative_bias_paired, relative_bias_se, relative_efficiency, relative_efficiency_paired,
    SevenStats,
};
pub use output::{read_cells, read_records, write_cells, write_plot_data, write_records, write_summary};
pub use summary::{cell_metrics, summarize, summarize_cells, CellMetrics, SummaryRow, SummaryTable};

/// A sample is redrawn when fewer units than this respond; random
/// imputation needs two residuals.
pub const MIN_RESPONDENTS: usize = 2;

/// Give up on a replicate after this many redraws.
pub const MAX_REDRAWS: usize = 1_000;

/// A finite-population parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Target {
    Total,
    Quantile(f64),
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Total => f.write_str("total"),
            Target::Quantile(g) => write!(f, "q{g}"),
        }
    }
}

impl FromStr for Target {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("total") {
            return Ok(Target::Total);
        }
        let g: f64 = s
            .strip_prefix('q')
            .and_then(|g| g.parse().ok())
            .ok_or_else(|| Error::invalid(format!("unknown target '{s}' (expected 'total' or 'q<gamma>')")))?;
        if !(g > 0.0 && g < 1.0) {
            return Err(Error::invalid(format!("quantile level {g} outside (0,1)")));
        }
        Ok(Target::Quantile(g))
    }
}

impl TryFrom<String> for Target {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Target> for String {
    fn from(t: Target) -> String {
        t.to_string()
    }
}

impl Target {
    /// Design-weighted estimator of the target from a full sample vector.
    pub fn estimate(&self, values: &[f64], weights: &[f64]) -> Result<f64> {
        match self {
            Target::Total => ht_total(values, weights),
            Target::Quantile(g) => weighted_quantile(values, weights, *g),
        }
    }

    fn truth(&self, pop: &Population, var: &str) -> Result<f64> {
        let missing = || Error::invalid(format!("population has no variable {var}"));
        match self {
            Target::Total => pop.true_total.get(var).copied().ok_or_else(missing),
            Target::Quantile(g) => pop.true_quantile(var, *g).ok_or_else(missing),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PopulationKind {
    /// Five predictors and ten survey variables.
    #[default]
    Standard,
    /// Load-curve surrogate with many correlated predictors.
    HighDim(HighDimConfig),
}

impl PopulationKind {
    pub fn variables(&self) -> &'static [&'static str] {
        match self {
            PopulationKind::Standard => &LOW_DIM_VARIABLES,
            PopulationKind::HighDim(_) => &HIGH_DIM_VARIABLES,
        }
    }

    fn generate(&self, n_units: usize, rng: &mut crate::rng::SimRng) -> Result<Population> {
        match self {
            PopulationKind::Standard => Ok(generate_population(n_units, rng)),
            PopulationKind::HighDim(cfg) => {
                let cfg = HighDimConfig { n_units, ..cfg.clone() };
                generate_highdim_population(&cfg, rng)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub survey_var: String,
    pub design: Design,
    pub mechanism: Mechanism,
    pub methods: Vec<MethodConfig>,
    pub n_replicates: usize,
    pub population_size: usize,
    pub sample_size: usize,
    pub targets: Vec<Target>,
    pub master_seed: u64,
    #[serde(default)]
    pub population: PopulationKind,
    /// Forces one imputation variant for every target. By default totals
    /// are imputed deterministically and quantiles randomly.
    #[serde(default)]
    pub variant: Option<Variant>,
}

impl ScenarioConfig {
    /// Standard population, SRSWOR, total target, desk-scale sizes.
    pub fn new(name: impl Into<String>, survey_var: &str, mechanism: Mechanism, methods: Vec<MethodConfig>) -> Self {
        ScenarioConfig {
            name: name.into(),
            survey_var: survey_var.to_string(),
            design: Design::Srswor,
            mechanism,
            methods,
            n_replicates: 300,
            population_size: 4000,
            sample_size: 400,
            targets: vec![Target::Total],
            master_seed: 1,
            population: PopulationKind::Standard,
            variant: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("scenario '{}': {msg}", self.name)));
        if self.n_replicates == 0 {
            return bad("n_replicates must be at least 1".into());
        }
        if self.targets.is_empty() {
            return bad("no targets".into());
        }
        if self.methods.is_empty() {
            return bad("no methods".into());
        }
        if self.sample_size == 0 || self.sample_size > self.population_size {
            return bad(format!(
                "sample size {} must lie in 1..={}",
                self.sample_size, self.population_size
            ));
        }
        if !self.population.variables().contains(&self.survey_var.as_str()) {
            return bad(format!("unknown survey variable '{}'", self.survey_var));
        }
        if self.design == Design::PoissonPps && self.population != PopulationKind::Standard {
            return bad("poisson_pps needs the standard population, whose size variable X5 is a model predictor".into());
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].iter().any(|o| o.name == m.name) {
                return bad(format!("method '{}' listed twice", m.name));
            }
        }
        Ok(())
    }

    /// Variant used for `target`.
    pub fn variant_for(&self, target: Target) -> Variant {
        self.variant.unwrap_or(match target {
            Target::Total => Variant::Deterministic,
            Target::Quantile(_) => Variant::Random,
        })
    }
}

/// One (replicate, method, target) cell of the long-format output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub scenario: String,
    pub method: String,
    pub replicate: usize,
    pub target: Target,
    /// Missing when the method failed on this replicate.
    pub imputed: Option<f64>,
    pub complete: f64,
    pub truth: f64,
    pub response_rate: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutput {
    pub records: Vec<Record>,
    /// Samples discarded for having too few respondents.
    pub redraws: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub config: ScenarioConfig,
    pub records: Vec<Record>,
    pub redraws: usize,
    pub method_failures: usize,
    pub response_rates: Vec<f64>,
}

/// FNV-1a, so a method's stream depends on its name and not on its
/// position in the list.
fn name_key(name: &str) -> u64 {
    name.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

struct Drawn {
    attempt: u64,
    sample: Sample,
    response: ResponseSet,
}

fn draw_sample(cfg: &ScenarioConfig, pop: &Population, r: u64) -> Result<(Drawn, usize)> {
    let size = match cfg.design {
        Design::Srswor => None,
        Design::PoissonPps => Some(
            pop.predictors
                .column("X5")
                .ok_or_else(|| Error::invalid("population has no size variable X5"))?,
        ),
    };
    for attempt in 0..MAX_REDRAWS as u64 {
        let mut rng = substream(cfg.master_seed, &[r, attempt, purpose::SAMPLE]);
        let sample = match &size {
            None => draw_srswor(pop.size(), cfg.sample_size, &mut rng)?,
            Some(x) => draw_poisson_pps(x, cfg.sample_size, &mut rng)?,
        };
        let probs = sample
            .unit_ids
            .iter()
            .map(|&i| response_prob(cfg.mechanism, pop.predictors.values.row(i)))
            .collect::<Result<Vec<_>>>()?;
        let response = generate_response(&probs, &mut substream(cfg.master_seed, &[r, attempt, purpose::RESPONSE]));
        if response.n_respondents() >= MIN_RESPONDENTS {
            return Ok((
                Drawn {
                    attempt,
                    sample,
                    response,
                },
                attempt as usize,
            ));
        }
    }
    Err(Error::invalid(format!(
        "replicate {r}: fewer than {MIN_RESPONDENTS} respondents after {MAX_REDRAWS} draws"
    )))
}

/// Imputed values for the nonrespondents, per variant actually needed.
struct Filled {
    deterministic: Option<Vec<f64>>,
    random: Option<Vec<f64>>,
}

impl Filled {
    fn get(&self, v: Variant) -> &[f64] {
        match v {
            Variant::Deterministic => self.deterministic.as_deref(),
            Variant::Random => self.random.as_deref(),
        }
        .expect("variant computed")
    }
}

#[allow(clippy::too_many_arguments)]
fn impute_method(
    method: &MethodConfig,
    data: &RespondentData,
    sample_rows: &Rows,
    missing_rows: &Rows,
    binary: bool,
    need: [bool; 2],
    rng: &mut crate::rng::SimRng,
) -> Result<Filled> {
    let ctx = FitContext {
        all_rows: Some(sample_rows),
    };
    let fitted = fit(method, data, ctx, rng)?;
    if binary {
        // Bernoulli or donor draws whatever the variant
        let v = impute(&fitted, None, missing_rows, Variant::Random, true, rng)?;
        return Ok(Filled {
            deterministic: Some(v.clone()),
            random: Some(v),
        });
    }
    let deterministic = if need[0] {
        Some(impute(&fitted, None, missing_rows, Variant::Deterministic, false, rng)?)
    } else {
        None
    };
    let random = if need[1] {
        let pool = match fitted.donor {
            DonorKind::None => Some(build_residual_pool(&fitted, data, method.variance_model)?),
            _ => None,
        };
        Some(impute(&fitted, pool.as_ref(), missing_rows, Variant::Random, false, rng)?)
    } else {
        None
    };
    Ok(Filled { deterministic, random })
}

/// One replicate's sample after nonresponse, ready for imputation.
#[derive(Debug, Clone)]
pub struct ReplicateData {
    pub replicate: usize,
    /// Draw attempt that produced the sample (0 unless redrawn).
    pub attempt: u64,
    pub binary: bool,
    /// Model rows of the sampled units.
    pub sample_rows: Rows,
    pub y: Vec<f64>,
    pub weights: Vec<f64>,
    pub respondents: Vec<usize>,
    pub nonrespondents: Vec<usize>,
    pub response_rate: f64,
    pub truths: Vec<f64>,
    pub respondent_data: RespondentData,
    missing_rows: Rows,
}

impl ReplicateData {
    pub fn new(cfg: &ScenarioConfig, r: usize) -> Result<Self> {
        let r64 = r as u64;
        let pop = cfg
            .population
            .generate(cfg.population_size, &mut substream(cfg.master_seed, &[r64, purpose::POPULATION]))?;
        let var = pop
            .var(&cfg.survey_var)
            .ok_or_else(|| Error::invalid(format!("population has no variable {}", cfg.survey_var)))?;
        let truths = cfg
            .targets
            .iter()
            .map(|t| t.truth(&pop, &cfg.survey_var))
            .collect::<Result<Vec<_>>>()?;
        let (
            Drawn {
                attempt,
                sample,
                response,
            },
            _,
        ) = draw_sample(cfg, &pop, r64)?;
        let (model_rows, _) = pop.predictors.model_rows();
        let sample_rows = model_rows.select(&sample.unit_ids);
        let y: Vec<f64> = sample.unit_ids.iter().map(|&i| var.values[i]).collect();
        let (respondents, nonrespondents): (Vec<usize>, Vec<usize>) =
            (0..sample.len()).partition(|&k| response.indicators[k]);
        let respondent_data = RespondentData::new(
            sample_rows.select(&respondents),
            respondents.iter().map(|&k| y[k]).collect(),
            respondents.iter().map(|&k| sample.weights[k]).collect(),
        )?;
        let missing_rows = sample_rows.select(&nonrespondents);
        Ok(ReplicateData {
            replicate: r,
            attempt,
            binary: var.binary,
            sample_rows,
            y,
            weights: sample.weights,
            respondents,
            nonrespondents,
            response_rate: response.realized_rate,
            truths,
            respondent_data,
            missing_rows,
        })
    }

    fn method_rng(&self, cfg: &ScenarioConfig, method: &MethodConfig) -> crate::rng::SimRng {
        substream(
            cfg.master_seed,
            &[self.replicate as u64, self.attempt, purpose::METHOD_BASE, name_key(&method.name)],
        )
    }

    /// Imputed values for the nonrespondents, in `nonrespondents` order.
    pub fn impute_missing(&self, cfg: &ScenarioConfig, method: &MethodConfig, variant: Variant) -> Result<Vec<f64>> {
        let need = [variant == Variant::Deterministic, variant == Variant::Random];
        let f = self.fill(method, need, &mut self.method_rng(cfg, method))?;
        Ok(f.get(variant).to_vec())
    }

    fn fill(&self, method: &MethodConfig, need: [bool; 2], rng: &mut crate::rng::SimRng) -> Result<Filled> {
        impute_method(
            method,
            &self.respondent_data,
            &self.sample_rows,
            &self.missing_rows,
            self.binary,
            need,
            rng,
        )
    }
}

/// Runs replicate `r` alone. The output depends only on the config and `r`.
pub fn run_replicate(cfg: &ScenarioConfig, r: usize) -> Result<ReplicateOutput> {
    let rep = ReplicateData::new(cfg, r)?;
    let redraws = rep.attempt as usize;
    let complete = cfg
        .targets
        .iter()
        .map(|t| t.estimate(&rep.y, &rep.weights))
        .collect::<Result<Vec<_>>>()?;
    let variants: Vec<Variant> = cfg.targets.iter().map(|t| cfg.variant_for(*t)).collect();
    let need = [
        variants.contains(&Variant::Deterministic),
        variants.contains(&Variant::Random),
    ];

    let mut records = Vec::with_capacity(cfg.methods.len() * cfg.targets.len());
    for method in &cfg.methods {
        let mut push = |k: usize, imputed: Option<f64>, error: Option<String>| {
            records.push(Record {
                scenario: cfg.name.clone(),
                method: method.name.clone(),
                replicate: r,
                target: cfg.targets[k],
                imputed,
                complete: complete[k],
                truth: rep.truths[k],
                response_rate: rep.response_rate,
                error,
            })
        };
        let filled = rep.fill(method, need, &mut rep.method_rng(cfg, method));
        for (k, target) in cfg.targets.iter().enumerate() {
            let est = filled.as_ref().map_err(|e| e.to_string()).and_then(|f| {
                let mut y = rep.y.clone();
                for (&i, v) in rep.nonrespondents.iter().zip(f.get(variants[k])) {
                    y[i] = *v;
                }
                target.estimate(&y, &rep.weights).map_err(|e| e.to_string())
            });
            match est {
                Ok(v) => push(k, Some(v), None),
                Err(e) => push(k, None, Some(e)),
            }
        }
    }
    Ok(ReplicateOutput { records, redraws })
}

/// Runs every replicate on the current rayon pool; records come back in
/// replicate order whatever the scheduling.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    cfg.validate()?;
    let outputs = (0..cfg.n_replicates)
        .into_par_iter()
        .map(|r| run_replicate(cfg, r))
        .collect::<Result<Vec<_>>>()?;
    let mut records = Vec::new();
    let mut redraws = 0;
    let mut response_rates = Vec::with_capacity(outputs.len());
    for o in outputs {
        redraws += o.redraws;
        if let Some(first) = o.records.first() {
            response_rates.push(first.response_rate);
        }
        records.extend(o.records);
    }
    let method_failures = records.iter().filter(|r| r.error.is_some()).count();
    Ok(ScenarioResult {
        config: cfg.clone(),
        records,
        redraws,
        method_failures,
        response_rates,
    })
}

/// Runs scenarios in order on a pool of `workers` threads (rayon's default
/// when `None`).
pub fn run_grid(scenarios: &[ScenarioConfig], workers: Option<usize>) -> Result<Vec<ScenarioResult>> {
    for s in scenarios {
        s.validate()?;
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder.build().map_err(|e| Error::invalid(e.to_string()))?;
    pool.install(|| scenarios.iter().map(run_scenario).collect())
}
