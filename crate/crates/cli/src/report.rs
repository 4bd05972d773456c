use std::fmt::Write as _;

use anyhow::Result;
use serde::{Deserialize, Serialize};

use exoharness::optimizer::OptimizationResult;
use exoharness::simulation::{EpisodeMetrics, InterfaceRms, TrackingStats, WRENCH_COMPONENTS};

use crate::config::Provenance;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub config: String,
    /// 1 is best: feasible rows first, then by increasing λ.
    pub rank: usize,
    pub lambda: f64,
    pub feasible: bool,
    pub constraint: u64,
    pub anchor_lambda: f64,
    pub max_distance: f64,
    pub wrench_rms: Vec<InterfaceRms>,
    pub tracking: Vec<TrackingStats>,
}

impl ComparisonRow {
    pub fn new(config: &str, result: &OptimizationResult, metrics: &EpisodeMetrics) -> Self {
        ComparisonRow {
            config: config.to_string(),
            rank: 0,
            lambda: result.lambda,
            feasible: result.feasible,
            constraint: result.constraint,
            anchor_lambda: result.anchor_lambda,
            max_distance: metrics.max_distance,
            wrench_rms: metrics.wrench_rms.clone(),
            tracking: metrics.tracking.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub provenance: Provenance,
    /// In the order the layouts were given.
    pub rows: Vec<ComparisonRow>,
    /// Layout codes from best to worst.
    pub ranking: Vec<String>,
}

impl ComparisonReport {
    pub fn new(provenance: Provenance, mut rows: Vec<ComparisonRow>) -> Self {
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.sort_by(|&a, &b| {
            let (ra, rb) = (&rows[a], &rows[b]);
            rb.feasible.cmp(&ra.feasible).then(ra.lambda.total_cmp(&rb.lambda)).then(ra.constraint.cmp(&rb.constraint))
        });
        for (rank, &i) in order.iter().enumerate() {
            rows[i].rank = rank + 1;
        }
        let ranking = order.iter().map(|&i| rows[i].config.clone()).collect();
        ComparisonReport { provenance, rows, ranking }
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut buf = self.provenance.comment_line().into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            let mut header: Vec<String> =
                ["config", "rank", "lambda", "feasible", "constraint", "max_distance"].map(String::from).to_vec();
            if let Some(first) = self.rows.first() {
                for r in &first.wrench_rms {
                    header.extend(WRENCH_COMPONENTS.iter().map(|c| format!("rms_{}_{c}", r.interface.name())));
                }
                header.extend(first.tracking.iter().map(|t| format!("median_diff_{}", t.joint)));
            }
            w.write_record(&header)?;
            for r in &self.rows {
                let mut row = vec![
                    r.config.clone(),
                    r.rank.to_string(),
                    format!("{:e}", r.lambda),
                    r.feasible.to_string(),
                    r.constraint.to_string(),
                    format!("{:e}", r.max_distance),
                ];
                row.extend(r.wrench_rms.iter().flat_map(|w| w.rms.map(|v| format!("{v:e}"))));
                row.extend(r.tracking.iter().map(|t| format!("{:e}", t.median)));
                w.write_record(&row)?;
            }
            w.flush()?;
        }
        Ok(buf)
    }

    /// Fixed-width summary for the terminal.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<5} {:<9} {:>12} {:>9} {:>6} {:>10}", "rank", "harness", "lambda", "feasible", "c", "max d [m]");
        let mut rows: Vec<&ComparisonRow> = self.rows.iter().collect();
        rows.sort_by_key(|r| r.rank);
        for r in rows {
            let _ = writeln!(
                s,
                "{:<5} {:<9} {:>12.5e} {:>9} {:>6} {:>10.4}",
                r.rank, r.config, r.lambda, r.feasible, r.constraint, r.max_distance
            );
        }
        s
    }
}
