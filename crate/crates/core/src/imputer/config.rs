use serde::{Deserialize, Serialize};

use super::VarianceModel;
use crate::error::{Error, Result};
use crate::svr::{Kernel, Objective, SvrConfig};
use crate::trees::{BartConfig, BoostConfig, CartConfig, CubistConfig, ForestConfig};

/// Which weights a method sees when fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// `w_i = 1 / pi_i`.
    #[default]
    Design,
    Unit,
}

/// Iteration counts for the expensive ensembles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Desk,
    Full,
}

impl std::str::FromStr for Scale {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "full" => Ok(Scale::Full),
            _ => Err(Error::invalid(format!("unknown scale '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    /// Weighted respondent mean of the class.
    Mean,
    /// Random donor from the class, drawn with probability proportional to weight.
    HotDeck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MethodSpec {
    Linear,
    Logistic {
        #[serde(default = "default_logit_iter")]
        max_iter: usize,
        #[serde(default = "default_logit_tol")]
        tol: f64,
        #[serde(default = "default_logit_cap")]
        coef_cap: f64,
    },
    Score {
        class_size: usize,
        mode: ScoreMode,
    },
    Knn {
        k: usize,
    },
    Additive {
        knots: usize,
    },
    Pcr {
        components: usize,
    },
    Cart(CartConfig),
    Forest(ForestConfig),
    LsBoost(BoostConfig),
    Xgb(BoostConfig),
    Bart(BartConfig),
    Cubist(CubistConfig),
    Svr(SvrConfig),
}

fn default_logit_iter() -> usize {
    100
}
fn default_logit_tol() -> f64 {
    1e-10
}
fn default_logit_cap() -> f64 {
    30.0
}

impl MethodSpec {
    pub fn family(&self) -> &'static str {
        match self {
            MethodSpec::Linear => "linear",
            MethodSpec::Logistic { .. } => "logistic",
            MethodSpec::Score { .. } => "score",
            MethodSpec::Knn { .. } => "knn",
            MethodSpec::Additive { .. } => "additive",
            MethodSpec::Pcr { .. } => "pcr",
            MethodSpec::Cart(_) => "cart",
            MethodSpec::Forest(_) => "forest",
            MethodSpec::LsBoost(_) => "ls_boost",
            MethodSpec::Xgb(_) => "xgb",
            MethodSpec::Bart(_) => "bart",
            MethodSpec::Cubist(_) => "cubist",
            MethodSpec::Svr(_) => "svr",
        }
    }

    /// Whether fitting consumes random numbers.
    pub fn is_stochastic(&self) -> bool {
        matches!(self, MethodSpec::Forest(_) | MethodSpec::Bart(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub name: String,
    #[serde(flatten)]
    pub spec: MethodSpec,
    #[serde(default)]
    pub weight_mode: WeightMode,
    #[serde(default)]
    pub variance_model: VarianceModel,
}

impl MethodConfig {
    pub fn new(name: impl Into<String>, spec: MethodSpec) -> Self {
        MethodConfig {
            name: name.into(),
            spec,
            weight_mode: WeightMode::Design,
            variance_model: VarianceModel::Homoscedastic,
        }
    }
}

/// The 27 configurations compared in the simulation study.
pub fn core_method_names() -> &'static [&'static str] {
    &[
        "LR", "MWC50", "MWC100", "MWC250", "MWC500", "HDWC50", "HDWC100", "HDWC250", "1NN", "5NN",
        "AMS5", "AMS10", "CART", "RF1", "RF2", "RF3", "XGB1", "XGB2", "XGB3", "BART", "CUBIST1",
        "CUBIST2", "CUBIST3", "SVR1", "SVR2", "SVR3", "SVR4",
    ]
}

/// Every preset name, including the extras outside the main comparison.
pub fn method_names() -> Vec<&'static str> {
    let mut v = core_method_names().to_vec();
    v.extend(["HDWC500", "LSBOOST", "PCR1", "PCR2", "PCR3", "LOGISTIC"]);
    v
}

fn boost(n_rounds: usize, max_leaves: usize, learning_rate: f64) -> BoostConfig {
    BoostConfig {
        n_rounds,
        max_leaves,
        learning_rate,
        ..Default::default()
    }
}

fn svr(kernel: Kernel, objective: Objective) -> SvrConfig {
    SvrConfig {
        kernel,
        objective,
        ..Default::default()
    }
}

/// Named configuration. Names are case-insensitive.
pub fn preset(name: &str, scale: Scale) -> Result<MethodConfig> {
    let upper = name.to_ascii_uppercase();
    let trees = match scale {
        Scale::Desk => 200,
        Scale::Full => 1000,
    };
    let forest = |mtry: Option<usize>, min_node_size: usize| ForestConfig {
        n_trees: trees,
        mtry,
        min_node_size,
        bootstrap: true,
    };
    let eps = Objective::Epsilon { epsilon: 0.1 };
    let gauss = Kernel::Gaussian { scale: None };
    let spec = match upper.as_str() {
        "LR" => MethodSpec::Linear,
        "LOGISTIC" => MethodSpec::Logistic {
            max_iter: default_logit_iter(),
            tol: default_logit_tol(),
            coef_cap: default_logit_cap(),
        },
        "1NN" => MethodSpec::Knn { k: 1 },
        "5NN" => MethodSpec::Knn { k: 5 },
        "AMS5" => MethodSpec::Additive { knots: 5 },
        "AMS10" => MethodSpec::Additive { knots: 10 },
        "CART" => MethodSpec::Cart(CartConfig::default()),
        "RF1" => MethodSpec::Forest(forest(Some(1), 1)),
        "RF2" => MethodSpec::Forest(forest(None, 5)),
        "RF3" => MethodSpec::Forest(forest(None, 10)),
        "XGB1" => MethodSpec::Xgb(boost(50, 3, 0.1)),
        "XGB2" => MethodSpec::Xgb(boost(100, 6, 0.05)),
        "XGB3" => MethodSpec::Xgb(boost(250, 10, 0.01)),
        "LSBOOST" => MethodSpec::LsBoost(boost(100, 6, 0.1)),
        "BART" => MethodSpec::Bart(match scale {
            Scale::Desk => BartConfig::default(),
            Scale::Full => BartConfig {
                burn_in: 250,
                n_draws: 1000,
                ..Default::default()
            },
        }),
        "CUBIST1" => MethodSpec::Cubist(CubistConfig::default()),
        "CUBIST2" => MethodSpec::Cubist(CubistConfig {
            committees: 5,
            ..Default::default()
        }),
        "CUBIST3" => MethodSpec::Cubist(CubistConfig {
            committees: 5,
            unbiased: true,
            ..Default::default()
        }),
        "SVR1" => MethodSpec::Svr(svr(gauss, Objective::Nu { nu: 0.5 })),
        "SVR2" => MethodSpec::Svr(svr(Kernel::Polynomial { degree: 3 }, eps)),
        "SVR3" => MethodSpec::Svr(svr(gauss, eps)),
        "SVR4" => MethodSpec::Svr(svr(Kernel::Linear, eps)),
        "PCR1" => MethodSpec::Pcr { components: 5 },
        "PCR2" => MethodSpec::Pcr { components: 25 },
        "PCR3" => MethodSpec::Pcr { components: 50 },
        other => {
            let score = |prefix: &str, mode| {
                other
                    .strip_prefix(prefix)
                    .and_then(|s| s.parse::<usize>().ok())
                    .map(|class_size| MethodSpec::Score { class_size, mode })
            };
            score("MWC", ScoreMode::Mean)
                .or_else(|| score("HDWC", ScoreMode::HotDeck))
                .ok_or_else(|| Error::UnknownMethod(name.to_string()))?
        }
    };
    Ok(MethodConfig::new(upper, spec))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_resolve() {
        for n in method_names() {
            let m = preset(n, Scale::Desk).unwrap();
            assert_eq!(m.name, n);
        }
        assert_eq!(core_method_names().len(), 27);
        assert!(matches!(preset("nope", Scale::Desk), Err(Error::UnknownMethod(_))));
        assert_eq!(preset("mwc50", Scale::Desk).unwrap().spec, MethodSpec::Score { class_size: 50, mode: ScoreMode::Mean });
    }

    #[test]
    fn full_scale_forests() {
        let MethodSpec::Forest(f) = preset("RF2", Scale::Full).unwrap().spec else { panic!() };
        assert_eq!(f.n_trees, 1000);
        assert_eq!(f.mtry, None);
    }

    #[test]
    fn toml_round_trip() {
        let src = r#"
            name = "small_forest"
            family = "forest"
            n_trees = 30
            mtry = 2
            weight_mode = "unit"
        "#;
        let m: MethodConfig = toml::from_str(src).unwrap();
        assert_eq!(m.weight_mode, WeightMode::Unit);
        let MethodSpec::Forest(f) = &m.spec else { panic!() };
        assert_eq!((f.n_trees, f.mtry, f.min_node_size), (30, Some(2), 5));
        let back: MethodConfig = toml::from_str(&toml::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
