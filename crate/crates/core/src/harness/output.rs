//! CSV layouts for harness results.

use std::io::{Read, Write};

use super::summary::{CellMetrics, SummaryRow, SummaryTable};
use super::Record;
use crate::error::Result;

/// Long format: one row per (scenario, method, replicate, target).
pub fn write_records<W: Write>(out: W, records: &[Record]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<Record>> {
    let mut rd = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for r in rd.deserialize() {
        out.push(r?);
    }
    Ok(out)
}

pub fn write_cells<W: Write>(out: W, cells: &[CellMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for c in cells {
        w.serialize(c)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_cells<R: Read>(input: R) -> Result<Vec<CellMetrics>> {
    let mut rd = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for r in rd.deserialize() {
        out.push(r?);
    }
    Ok(out)
}

fn write_rows<W: Write>(w: &mut csv::Writer<W>, measure: &str, rows: &[SummaryRow]) -> Result<()> {
    for (rank, r) in rows.iter().enumerate() {
        let mut rec = vec![measure.to_string(), (rank + 1).to_string(), r.method.clone(), r.n_cells.to_string()];
        rec.extend(r.stats.as_array().iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    Ok(())
}

/// Both tables stacked, each ranked by its median.
pub fn write_summary<W: Write>(out: W, table: &SummaryTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["measure", "rank", "method", "n_cells", "min", "q05", "q25", "median", "q75", "q95", "max"])?;
    write_rows(&mut w, "abs_rb", &table.abs_rb)?;
    write_rows(&mut w, "re", &table.re)?;
    w.flush()?;
    Ok(())
}

/// Median RB against median RE, one row per method.
pub fn write_plot_data<W: Write>(out: W, table: &SummaryTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "median_rb", "median_abs_rb", "median_re"])?;
    for row in &table.abs_rb {
        let re = table.re_row(&row.method).map(|r| r.stats.median.to_string()).unwrap_or_default();
        w.write_record([
            row.method.clone(),
            row.median_rb.to_string(),
            row.stats.median.to_string(),
            re,
        ])?;
    }
    w.flush()?;
    Ok(())
}
