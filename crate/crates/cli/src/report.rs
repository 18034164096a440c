use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;

use survimp::harness::{cell_metrics, read_records, summarize_cells, write_cells, write_plot_data, write_summary, SummaryRow};

use crate::simulate::RECORDS_FILE;
use crate::{usage, CliResult};

pub const CELLS_FILE: &str = "cells.csv";
pub const PLOT_FILE: &str = "plot.csv";

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Directory written by `simulate`.
    results: PathBuf,
    /// Where to write the report files (default: <results>/report).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn print_table(title: &str, rows: &[SummaryRow]) {
    println!("{title}");
    println!(
        "{:<5} {:<10} {:>5} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "rank", "method", "cells", "min", "q05", "q25", "median", "q75", "q95", "max"
    );
    for (i, r) in rows.iter().enumerate() {
        let s = r.stats.as_array();
        print!("{:<5} {:<10} {:>5}", i + 1, r.method, r.n_cells);
        for v in s {
            print!(" {v:>9.2}");
        }
        println!();
    }
    println!();
}

pub fn run(args: Args) -> CliResult<()> {
    let path = args.results.join(RECORDS_FILE);
    let file = File::open(&path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let records = read_records(BufReader::new(file)).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if records.is_empty() {
        return Err(usage(format!("{}: no records", path.display())));
    }
    let cells = cell_metrics(&records);
    let table = summarize_cells(&cells).map_err(usage)?;

    let out = args.out.unwrap_or_else(|| args.results.join("report"));
    fs::create_dir_all(&out).map_err(|e| usage(format!("{}: {e}", out.display())))?;
    let create = |name: &str| {
        let p = out.join(name);
        File::create(&p)
            .map(BufWriter::new)
            .map_err(|e| usage(format!("{}: {e}", p.display())))
    };
    write_cells(create(CELLS_FILE)?, &cells).map_err(usage)?;
    write_summary(create(crate::simulate::SUMMARY_FILE)?, &table).map_err(usage)?;
    write_plot_data(create(PLOT_FILE)?, &table).map_err(usage)?;

    print_table("Absolute percent relative bias", &table.abs_rb);
    print_table("Percent relative efficiency", &table.re);
    println!("report written to {}", out.display());
    Ok(())
}
