//! Scenario grids from TOML.
//!
//! ```toml
//! [defaults]
//! seed = 7
//! n_replicates = 300
//! methods = ["LR", "CART", "small_rf"]
//!
//! [methods.small_rf]
//! family = "forest"
//! n_trees = 50
//!
//! [[scenario]]
//! survey_var = ["Y1", "Y2"]
//! mechanism = ["NR1", "NR2"]
//! ```
//!
//! List-valued `survey_var` and `mechanism` expand to their cross product.
//! Methods name either a `[methods.*]` block or a preset.

use std::collections::BTreeMap;

use serde::Deserialize;
use toml::Spanned;

use super::{PopulationKind, ScenarioConfig, Target};
use crate::design::Design;
use crate::error::{Error, Result};
use crate::imputer::{preset, MethodConfig, MethodSpec, Scale, VarianceModel, Variant, WeightMode};
use crate::nonresponse::Mechanism;

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct GridOverrides {
    pub seed: Option<u64>,
    pub scale: Option<Scale>,
    pub variant: Option<Variant>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub seed: u64,
    pub scale: Scale,
    pub scenarios: Vec<ScenarioConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<String> {
        match self {
            OneOrMany::One(s) => vec![s],
            OneOrMany::Many(v) => v,
        }
    }
}

/// Shared layout of `[defaults]` and `[[scenario]]` blocks; kept flat so
/// type errors keep their line numbers.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Block {
    name: Option<String>,
    seed: Option<u64>,
    scale: Option<Scale>,
    survey_var: Option<OneOrMany>,
    mechanism: Option<OneOrMany>,
    n_replicates: Option<usize>,
    population_size: Option<usize>,
    sample_size: Option<usize>,
    design: Option<Design>,
    targets: Option<Vec<Target>>,
    methods: Option<Vec<String>>,
    population: Option<PopulationKind>,
    variant: Option<Variant>,
}

#[derive(Debug, Deserialize)]
struct RawMethod {
    #[serde(flatten)]
    spec: MethodSpec,
    #[serde(default)]
    weight_mode: WeightMode,
    #[serde(default)]
    variance_model: VarianceModel,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    #[serde(default)]
    defaults: Block,
    #[serde(default)]
    methods: BTreeMap<String, RawMethod>,
    #[serde(default)]
    scenario: Vec<Spanned<Block>>,
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

/// Parses and validates a grid. Errors carry the line of the offending
/// scenario block.
pub fn parse_grid(src: &str, overrides: GridOverrides) -> Result<Grid> {
    let raw: RawGrid = toml::from_str(src).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
    let seed = overrides.seed.or(raw.defaults.seed).unwrap_or(1);
    let scale = overrides.scale.or(raw.defaults.scale).unwrap_or_default();
    let custom: BTreeMap<String, MethodConfig> = raw
        .methods
        .into_iter()
        .map(|(name, m)| {
            let cfg = MethodConfig {
                name: name.clone(),
                spec: m.spec,
                weight_mode: m.weight_mode,
                variance_model: m.variance_model,
            };
            (name, cfg)
        })
        .collect();
    if raw.scenario.is_empty() {
        return Err(Error::Config("no [[scenario]] blocks".into()));
    }
    let d = raw.defaults;
    if d.name.is_some() || d.survey_var.is_some() || d.mechanism.is_some() {
        return Err(Error::Config(
            "[defaults] cannot set name, survey_var or mechanism; put them in a [[scenario]] block".into(),
        ));
    }
    let mut scenarios: Vec<ScenarioConfig> = Vec::new();
    for spanned in raw.scenario {
        let line = line_of(src, spanned.span().start);
        let at = |msg: String| Error::Config(format!("line {line}: {msg}"));
        let s = spanned.into_inner();
        if s.seed.is_some() || s.scale.is_some() {
            return Err(at("seed and scale belong in [defaults]".into()));
        }
        let names = s
            .methods
            .or_else(|| d.methods.clone())
            .ok_or_else(|| at("no methods given in the scenario or [defaults]".into()))?;
        let methods = names
            .iter()
            .map(|n| match custom.get(n) {
                Some(m) => Ok(m.clone()),
                None => preset(n, scale).map_err(|e| at(e.to_string())),
            })
            .collect::<Result<Vec<_>>>()?;
        let design = s.design.or(d.design).unwrap_or(Design::Srswor);
        let vars = s.survey_var.ok_or_else(|| at("missing survey_var".into()))?.into_vec();
        let mechs = s.mechanism.ok_or_else(|| at("missing mechanism".into()))?.into_vec();
        if vars.is_empty() || mechs.is_empty() {
            return Err(at("survey_var and mechanism must be nonempty".into()));
        }
        for var in &vars {
            for mech in &mechs {
                let mechanism: Mechanism = mech.parse().map_err(|e: Error| at(e.to_string()))?;
                let auto = format!("{var}_{mechanism}_{}", design_tag(design));
                let name = match &s.name {
                    Some(n) if vars.len() * mechs.len() == 1 => n.clone(),
                    Some(n) => format!("{n}_{auto}"),
                    None => auto,
                };
                let cfg = ScenarioConfig {
                    name,
                    survey_var: var.clone(),
                    design,
                    mechanism,
                    methods: methods.clone(),
                    n_replicates: s.n_replicates.or(d.n_replicates).unwrap_or(300),
                    population_size: s.population_size.or(d.population_size).unwrap_or(4000),
                    sample_size: s.sample_size.or(d.sample_size).unwrap_or(400),
                    targets: s.targets.clone().or_else(|| d.targets.clone()).unwrap_or(vec![Target::Total]),
                    master_seed: seed,
                    population: s.population.clone().or_else(|| d.population.clone()).unwrap_or_default(),
                    variant: overrides.variant.or(s.variant).or(d.variant),
                };
                cfg.validate().map_err(|e| at(e.to_string()))?;
                if scenarios.iter().any(|o| o.name == cfg.name) {
                    return Err(at(format!("duplicate scenario name '{}'", cfg.name)));
                }
                scenarios.push(cfg);
            }
        }
    }
    Ok(Grid { seed, scale, scenarios })
}

fn design_tag(d: Design) -> &'static str {
    match d {
        Design::Srswor => "srswor",
        Design::PoissonPps => "pps",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SRC: &str = r#"
[defaults]
seed = 11
n_replicates = 4
population_size = 500
sample_size = 100
methods = ["LR", "small_rf"]

[methods.small_rf]
family = "forest"
n_trees = 20

[[scenario]]
survey_var = ["Y1", "Y2"]
mechanism = ["NR1", "NR3"]

[[scenario]]
name = "quant"
survey_var = "Y3"
mechanism = "NR2"
targets = ["q0.25", "q0.5"]
methods = ["1NN"]
"#;

    #[test]
    fn expands_cross_product() {
        let g = parse_grid(SRC, GridOverrides::default()).unwrap();
        assert_eq!(g.seed, 11);
        assert_eq!(g.scenarios.len(), 5);
        let names: Vec<&str> = g.scenarios.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["Y1_NR1_srswor", "Y1_NR3_srswor", "Y2_NR1_srswor", "Y2_NR3_srswor", "quant"]);
        let s = &g.scenarios[0];
        assert_eq!((s.n_replicates, s.population_size, s.sample_size), (4, 500, 100));
        let MethodSpec::Forest(f) = &s.methods[1].spec else { panic!() };
        assert_eq!(f.n_trees, 20);
        assert_eq!(g.scenarios[4].targets, vec![Target::Quantile(0.25), Target::Quantile(0.5)]);
        assert_eq!(g.scenarios[4].methods[0].name, "1NN");
    }

    #[test]
    fn overrides_win() {
        let o = GridOverrides {
            seed: Some(99),
            scale: Some(Scale::Full),
            variant: Some(Variant::Random),
        };
        let g = parse_grid(SRC, o).unwrap();
        assert!(g.scenarios.iter().all(|s| s.master_seed == 99 && s.variant == Some(Variant::Random)));
    }

    #[test]
    fn errors_point_at_lines() {
        let bad = SRC.replace("methods = [\"1NN\"]", "methods = [\"NOPE\"]");
        let e = parse_grid(&bad, GridOverrides::default()).unwrap_err().to_string();
        assert!(e.contains("line 17") && e.contains("NOPE"), "{e}");

        let bad = SRC.replace("mechanism = \"NR2\"", "mechanism = \"NR9\"");
        let e = parse_grid(&bad, GridOverrides::default()).unwrap_err().to_string();
        assert!(e.contains("line 17"), "{e}");

        let e = parse_grid("[defaults]\nn_replicates = \"x\"\n", GridOverrides::default())
            .unwrap_err()
            .to_string();
        assert!(e.contains("line 2"), "{e}");

        let e = parse_grid("[defaults]\nseed = 1\n", GridOverrides::default()).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
    }

    #[test]
    fn zero_replicates_rejected() {
        let bad = SRC.replace("n_replicates = 4", "n_replicates = 0");
        assert!(parse_grid(&bad, GridOverrides::default()).is_err());
    }
}
