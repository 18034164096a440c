//! Per-cell Monte Carlo measures and the across-scenario summary tables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::metrics::{relative_bias_paired, relative_bias_se, relative_efficiency_paired, SevenStats};
use super::{Record, ScenarioResult};
use crate::error::{Error, Result};

/// RB and RE of one method on one (scenario, target) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub scenario: String,
    pub target: String,
    pub method: String,
    pub n_ok: usize,
    pub n_failed: usize,
    pub rb: Option<f64>,
    pub rb_se: Option<f64>,
    pub re: Option<f64>,
}

/// Groups records by (scenario, target, method) and computes RB, its Monte
/// Carlo SE and RE over the replicates where the method succeeded.
pub fn cell_metrics(records: &[Record]) -> Vec<CellMetrics> {
    let mut groups: BTreeMap<(String, String, String), Vec<&Record>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.scenario.clone(), r.target.to_string(), r.method.clone()))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((scenario, target, method), rs)| {
            let ok: Vec<&&Record> = rs.iter().filter(|r| r.imputed.is_some()).collect();
            let est: Vec<f64> = ok.iter().map(|r| r.imputed.unwrap()).collect();
            let comp: Vec<f64> = ok.iter().map(|r| r.complete).collect();
            let truth: Vec<f64> = ok.iter().map(|r| r.truth).collect();
            CellMetrics {
                scenario,
                target,
                method,
                n_ok: ok.len(),
                n_failed: rs.len() - ok.len(),
                rb: relative_bias_paired(&est, &truth).ok(),
                rb_se: relative_bias_se(&est, &truth).ok(),
                re: relative_efficiency_paired(&est, &comp, &truth).ok(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: String,
    /// Cells contributing to the statistics.
    pub n_cells: usize,
    pub stats: SevenStats,
    /// Median of the signed relative bias (plot axis).
    pub median_rb: f64,
}

/// Two tables over the same methods: absolute RB and RE, each sorted by
/// median (ties by name).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryTable {
    pub abs_rb: Vec<SummaryRow>,
    pub re: Vec<SummaryRow>,
}

impl SummaryTable {
    pub fn re_row(&self, method: &str) -> Option<&SummaryRow> {
        self.re.iter().find(|r| r.method == method)
    }

    pub fn abs_rb_row(&self, method: &str) -> Option<&SummaryRow> {
        self.abs_rb.iter().find(|r| r.method == method)
    }
}

fn ranked(mut rows: Vec<SummaryRow>) -> Vec<SummaryRow> {
    rows.sort_by(|a, b| a.stats.median.total_cmp(&b.stats.median).then_with(|| a.method.cmp(&b.method)));
    rows
}

pub fn summarize_cells(cells: &[CellMetrics]) -> Result<SummaryTable> {
    if cells.is_empty() {
        return Err(Error::Empty("cells"));
    }
    let mut by_method: BTreeMap<&str, Vec<&CellMetrics>> = BTreeMap::new();
    for c in cells {
        by_method.entry(&c.method).or_default().push(c);
    }
    let mut abs_rb = Vec::new();
    let mut re = Vec::new();
    for (method, cs) in by_method {
        let rb: Vec<f64> = cs.iter().filter_map(|c| c.rb).collect();
        if !rb.is_empty() {
            let abs: Vec<f64> = rb.iter().map(|v| v.abs()).collect();
            let median_rb = SevenStats::of(&rb)?.median;
            abs_rb.push(SummaryRow {
                method: method.to_string(),
                n_cells: abs.len(),
                stats: SevenStats::of(&abs)?,
                median_rb,
            });
            let eff: Vec<f64> = cs.iter().filter_map(|c| c.re).collect();
            if !eff.is_empty() {
                re.push(SummaryRow {
                    method: method.to_string(),
                    n_cells: eff.len(),
                    stats: SevenStats::of(&eff)?,
                    median_rb,
                });
            }
        }
    }
    Ok(SummaryTable {
        abs_rb: ranked(abs_rb),
        re: ranked(re),
    })
}

/// Summary across every scenario and target of the given results.
pub fn summarize(results: &[ScenarioResult]) -> Result<SummaryTable> {
    let cells: Vec<CellMetrics> = results.iter().flat_map(|r| cell_metrics(&r.records)).collect();
    summarize_cells(&cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::Target;

    fn rec(scenario: &str, method: &str, r: usize, imputed: Option<f64>, complete: f64) -> Record {
        Record {
            scenario: scenario.into(),
            method: method.into(),
            replicate: r,
            target: Target::Total,
            imputed,
            complete,
            truth: 100.0,
            response_rate: 0.5,
            error: imputed.is_none().then(|| "boom".into()),
        }
    }

    #[test]
    fn single_scenario_stats_collapse() {
        let recs = vec![rec("s", "A", 0, Some(110.0), 101.0), rec("s", "A", 1, Some(104.0), 98.0)];
        let cells = cell_metrics(&recs);
        assert_eq!(cells.len(), 1);
        let t = summarize_cells(&cells).unwrap();
        let rb = cells[0].rb.unwrap();
        assert!((rb - 7.0).abs() < 1e-12);
        assert!(t.abs_rb[0].stats.as_array().iter().all(|v| *v == rb));
        let re = cells[0].re.unwrap();
        assert!((re - 100.0 * (100.0 + 16.0) / (1.0 + 4.0)).abs() < 1e-9);
        assert!(t.re[0].stats.as_array().iter().all(|v| *v == re));
    }

    #[test]
    fn failures_excluded_and_counted() {
        let recs = vec![rec("s", "A", 0, None, 101.0), rec("s", "A", 1, Some(104.0), 98.0)];
        let c = &cell_metrics(&recs)[0];
        assert_eq!((c.n_ok, c.n_failed), (1, 1));
        assert!(c.rb.is_some() && c.rb_se.is_none());
    }

    #[test]
    fn ranking_is_order_free() {
        let mut recs = Vec::new();
        for (s, off) in [("s1", 1.0), ("s2", 3.0), ("s3", -2.0)] {
            for (m, scale) in [("A", 1.0), ("B", 2.0), ("C", 0.5)] {
                recs.push(rec(s, m, 0, Some(100.0 + off * scale), 100.0 + off));
                recs.push(rec(s, m, 1, Some(100.0 - 2.0 * off * scale), 100.0 - off));
            }
        }
        let a = summarize_cells(&cell_metrics(&recs)).unwrap();
        recs.reverse();
        let b = summarize_cells(&cell_metrics(&recs)).unwrap();
        assert_eq!(a, b);
        let order: Vec<&str> = a.re.iter().map(|r| r.method.as_str()).collect();
        assert_eq!(order, ["C", "A", "B"]);
    }
}
