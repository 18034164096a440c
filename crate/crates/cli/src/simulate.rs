use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};
use survimp::harness::{
    parse_grid, run_scenario, summarize, write_records, write_summary, GridOverrides, ScenarioConfig, ScenarioResult,
};

use crate::{data, usage, CliResult, ScaleArg, VariantArg};

pub const RECORDS_FILE: &str = "records.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Scenario grid (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for replicates.
    #[arg(long, env = "SURVIMP_WORKERS")]
    workers: Option<usize>,
    /// Overrides the master seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    scale: Option<ScaleArg>,
    /// Forces one variant for every target.
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
}

#[derive(Debug, Serialize)]
struct ScenarioReport {
    name: String,
    status: String,
    redraws: usize,
    method_failures: usize,
    /// First error message per failing method.
    failure_examples: Vec<(String, String)>,
    response_rate_mean: Option<f64>,
    response_rate_min: Option<f64>,
    response_rate_max: Option<f64>,
    config: ScenarioConfig,
}

#[derive(Debug, Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    config_path: String,
    config_sha256: String,
    master_seed: u64,
    scale: survimp::imputer::Scale,
    workers: Option<usize>,
    started_unix: u64,
    finished_unix: u64,
    outputs: Vec<String>,
    scenarios: Vec<ScenarioReport>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn report_for(cfg: &ScenarioConfig, res: &Result<ScenarioResult, String>) -> ScenarioReport {
    let mut r = ScenarioReport {
        name: cfg.name.clone(),
        status: "ok".into(),
        redraws: 0,
        method_failures: 0,
        failure_examples: Vec::new(),
        response_rate_mean: None,
        response_rate_min: None,
        response_rate_max: None,
        config: cfg.clone(),
    };
    match res {
        Err(e) => r.status = format!("error: {e}"),
        Ok(s) => {
            r.redraws = s.redraws;
            r.method_failures = s.method_failures;
            for rec in s.records.iter().filter(|x| x.error.is_some()) {
                if !r.failure_examples.iter().any(|(m, _)| *m == rec.method) {
                    r.failure_examples.push((rec.method.clone(), rec.error.clone().unwrap_or_default()));
                }
            }
            let rates = &s.response_rates;
            if !rates.is_empty() {
                r.response_rate_mean = Some(rates.iter().sum::<f64>() / rates.len() as f64);
                r.response_rate_min = rates.iter().copied().reduce(f64::min);
                r.response_rate_max = rates.iter().copied().reduce(f64::max);
            }
        }
    }
    r
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| usage(format!("{}: {e}", path.display())))
}

pub fn run(args: Args) -> CliResult<()> {
    let started = now();
    let src = fs::read_to_string(&args.config).map_err(|e| usage(format!("{}: {e}", args.config.display())))?;
    let overrides = GridOverrides {
        seed: args.seed,
        scale: args.scale.map(Into::into),
        variant: args.variant.map(Into::into),
    };
    let grid = parse_grid(&src, overrides).map_err(|e| usage(format!("{}: {e}", args.config.display())))?;
    if args.workers == Some(0) {
        return Err(usage("--workers must be at least 1"));
    }
    fs::create_dir_all(&args.out).map_err(|e| usage(format!("{}: {e}", args.out.display())))?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = args.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(usage)?;
    let results: Vec<Result<ScenarioResult, String>> = pool.install(|| {
        grid.scenarios
            .iter()
            .map(|s| {
                eprintln!("running {} ({} replicates, {} methods)", s.name, s.n_replicates, s.methods.len());
                run_scenario(s).map_err(|e| e.to_string())
            })
            .collect()
    });

    let ok: Vec<ScenarioResult> = results.iter().filter_map(|r| r.as_ref().ok().cloned()).collect();
    let records: Vec<_> = ok.iter().flat_map(|r| r.records.iter().cloned()).collect();
    let records_path = args.out.join(RECORDS_FILE);
    write_records(create(&records_path)?, &records).map_err(data)?;
    let mut outputs = vec![records_path.display().to_string()];
    if !ok.is_empty() {
        if let Ok(table) = summarize(&ok) {
            let p = args.out.join(SUMMARY_FILE);
            write_summary(create(&p)?, &table).map_err(data)?;
            outputs.push(p.display().to_string());
        }
    }
    let manifest_path = args.out.join(MANIFEST_FILE);
    outputs.push(manifest_path.display().to_string());
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config_path: args.config.display().to_string(),
        config_sha256: sha256_hex(src.as_bytes()),
        master_seed: grid.seed,
        scale: grid.scale,
        workers: args.workers,
        started_unix: started,
        finished_unix: now(),
        outputs,
        scenarios: grid.scenarios.iter().zip(&results).map(|(c, r)| report_for(c, r)).collect(),
    };
    serde_json::to_writer_pretty(create(&manifest_path)?, &manifest).map_err(data)?;

    let failed: Vec<String> = grid
        .scenarios
        .iter()
        .zip(&results)
        .filter_map(|(c, r)| r.as_ref().err().map(|e| format!("  {}: {e}", c.name)))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(data(format!("{} scenario(s) failed:\n{}", failed.len(), failed.join("\n"))))
    }
}
