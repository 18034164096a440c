use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use serde_json::json;
use survimp::imputer::{build_residual_pool, fit, impute, preset, DonorKind, FitContext, MethodConfig, Variant};
use survimp::{RespondentData, Rows};

use crate::{data, usage, CliResult, ScaleArg, VariantArg};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Input CSV; empty fields in the outcome column are imputed.
    #[arg(long)]
    data: PathBuf,
    /// Preset name (see `survimp methods`).
    #[arg(long)]
    method: String,
    /// Outcome column.
    #[arg(long)]
    y: String,
    /// Design-weight column (default: every weight is 1).
    #[arg(long)]
    weight: Option<String>,
    /// Comma-separated predictor columns (default: every other column).
    #[arg(long, value_delimiter = ',')]
    predictors: Option<Vec<String>>,
    /// Method setting overrides, e.g. `--set n_trees=50`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    settings: Vec<String>,
    #[arg(long, value_enum, default_value = "deterministic")]
    variant: VariantArg,
    /// Treat the outcome as 0/1 and impute Bernoulli draws.
    #[arg(long)]
    binary: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value = "desk")]
    scale: ScaleArg,
    /// Output CSV; fit metadata goes next to it with a .json extension.
    #[arg(long)]
    out: PathBuf,
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn same_value(a: Option<&toml::Value>, b: Option<&toml::Value>) -> bool {
    use toml::Value::{Float, Integer};
    match (a, b) {
        (Some(Float(x)), Some(Integer(i))) | (Some(Integer(i)), Some(Float(x))) => *x == *i as f64,
        _ => a == b,
    }
}

/// Applies `key=value` overrides to a preset through its TOML form.
pub fn apply_settings(cfg: MethodConfig, settings: &[String]) -> CliResult<MethodConfig> {
    if settings.is_empty() {
        return Ok(cfg);
    }
    let mut table = toml::Table::try_from(&cfg).map_err(usage)?;
    for s in settings {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| usage(format!("setting '{s}' is not KEY=VALUE")))?;
        table.insert(k.trim().to_string(), parse_value(v.trim()));
    }
    let out: MethodConfig = table
        .clone()
        .try_into()
        .map_err(|e| usage(format!("method settings: {}", e.to_string().trim_end())))?;
    // flattened configs ignore unknown keys, so check each one landed
    let back = toml::Table::try_from(&out).map_err(usage)?;
    for s in settings {
        let k = s.split_once('=').map(|(k, _)| k.trim()).unwrap_or_default();
        if !same_value(back.get(k), table.get(k)) {
            return Err(usage(format!("setting '{k}' does not apply to method {}", out.name)));
        }
    }
    Ok(out)
}

fn column(headers: &csv::StringRecord, name: &str) -> CliResult<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| usage(format!("no column named '{name}'")))
}

fn number(rec: &csv::StringRecord, j: usize, row: usize, name: &str) -> CliResult<f64> {
    let s = rec.get(j).unwrap_or("").trim();
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| data(format!("row {}: column '{name}' has non-numeric value '{s}'", row + 1)))
}

pub fn run(args: Args) -> CliResult<()> {
    if args.out == args.data {
        return Err(usage("--out must differ from --data"));
    }
    let scale = args.scale.into();
    let cfg = apply_settings(preset(&args.method, scale).map_err(usage)?, &args.settings)?;

    let mut rd = csv::Reader::from_path(&args.data).map_err(|e| usage(format!("{}: {e}", args.data.display())))?;
    let headers = rd.headers().map_err(data)?.clone();
    let rows: Vec<csv::StringRecord> = rd.records().collect::<Result<_, _>>().map_err(data)?;
    let yj = column(&headers, &args.y)?;
    let wj = args.weight.as_deref().map(|w| column(&headers, w)).transpose()?;
    let pred_names: Vec<String> = match &args.predictors {
        Some(p) => p.clone(),
        None => headers
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != yj && Some(*j) != wj)
            .map(|(_, h)| h.to_string())
            .collect(),
    };
    let pj = pred_names.iter().map(|p| column(&headers, p)).collect::<CliResult<Vec<_>>>()?;
    if pj.contains(&yj) {
        return Err(usage("the outcome column cannot be a predictor"));
    }

    let mut x = Vec::with_capacity(rows.len() * pj.len());
    let mut observed = Vec::new();
    let mut missing = Vec::new();
    let mut y = Vec::new();
    let mut w = Vec::new();
    for (i, rec) in rows.iter().enumerate() {
        for (&j, name) in pj.iter().zip(&pred_names) {
            x.push(number(rec, j, i, name)?);
        }
        if rec.get(yj).unwrap_or("").trim().is_empty() {
            missing.push(i);
        } else {
            observed.push(i);
            y.push(number(rec, yj, i, &args.y)?);
            w.push(match wj {
                Some(j) => number(rec, j, i, args.weight.as_deref().unwrap_or_default())?,
                None => 1.0,
            });
        }
    }
    if observed.is_empty() {
        return Err(data("no rows with an observed outcome"));
    }
    let all = Rows::new(x, pj.len()).map_err(data)?;
    let train = RespondentData::new(all.select(&observed), y, w).map_err(data)?;
    let mut rng = survimp::rng::seeded(args.seed);
    let fitted = fit(
        &cfg,
        &train,
        FitContext {
            all_rows: Some(&all),
        },
        &mut rng,
    )
    .map_err(data)?;
    let variant: Variant = args.variant.into();

    if missing.is_empty() {
        fs::copy(&args.data, &args.out).map_err(|e| usage(format!("{}: {e}", args.out.display())))?;
    } else {
        let pool = if variant == Variant::Random && !args.binary && fitted.donor == DonorKind::None {
            Some(build_residual_pool(&fitted, &train, cfg.variance_model).map_err(data)?)
        } else {
            None
        };
        let values = impute(&fitted, pool.as_ref(), &all.select(&missing), variant, args.binary, &mut rng)
            .map_err(data)?;
        let file = File::create(&args.out).map_err(|e| usage(format!("{}: {e}", args.out.display())))?;
        let mut wr = csv::Writer::from_writer(BufWriter::new(file));
        wr.write_record(&headers).map_err(data)?;
        let mut next = missing.iter().zip(&values).peekable();
        for (i, rec) in rows.iter().enumerate() {
            match next.peek() {
                Some((&m, v)) if m == i => {
                    let filled = v.to_string();
                    let fields: Vec<&str> = rec
                        .iter()
                        .enumerate()
                        .map(|(j, f)| if j == yj { filled.as_str() } else { f })
                        .collect();
                    wr.write_record(&fields).map_err(data)?;
                    next.next();
                }
                _ => wr.write_record(rec).map_err(data)?,
            }
        }
        wr.flush().map_err(data)?;
    }

    let meta = json!({
        "input": args.data.display().to_string(),
        "output": args.out.display().to_string(),
        "method": cfg,
        "variant": variant,
        "binary": args.binary,
        "seed": args.seed,
        "predictors": pred_names,
        "n_observed": observed.len(),
        "n_imputed": missing.len(),
        "fit": fitted.summary(),
    });
    let meta_path = args.out.with_extension("json");
    let f = File::create(&meta_path).map_err(|e| usage(format!("{}: {e}", meta_path.display())))?;
    serde_json::to_writer_pretty(BufWriter::new(f), &meta).map_err(data)?;
    Ok(())
}
