//! Benchmark reports and their CSV/JSON rendering.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::tree::StructureStats;

/// One timed phase: a build, a query sweep or an update batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub phase: String,
    pub batch: usize,
    pub ops: usize,
    pub wall_s: f64,
    pub ops_per_s: f64,
    pub nodes_visited: u64,
    pub leaves_scanned: u64,
    pub points_compared: u64,
    pub results: u64,
    /// Tree shape right after the phase.
    pub structure: StructureStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub dims: usize,
    pub points: usize,
    pub leaf_capacity: usize,
    pub layouts: String,
    pub simd: String,
    pub kernel: String,
    pub verified: bool,
    pub phases: Vec<PhaseReport>,
}

impl BenchReport {
    pub fn phase(&self, name: &str, batch: usize) -> Option<&PhaseReport> {
        self.phases.iter().find(|p| p.phase == name && p.batch == batch)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(format!("unknown format `{other}` (expected csv|json)")),
        }
    }
}

/// `x` rounded to six significant digits.
pub fn sig6(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

fn rounded_structure(s: &StructureStats) -> StructureStats {
    StructureStats {
        avg_leaf_capacity: sig6(s.avg_leaf_capacity),
        light_pct: sig6(s.light_pct),
        heavy_pct: sig6(s.heavy_pct),
        outlier_pct: sig6(s.outlier_pct),
        ..s.clone()
    }
}

fn rounded(r: &BenchReport) -> BenchReport {
    BenchReport {
        phases: r
            .phases
            .iter()
            .map(|p| PhaseReport {
                wall_s: sig6(p.wall_s),
                ops_per_s: sig6(p.ops_per_s),
                structure: rounded_structure(&p.structure),
                ..p.clone()
            })
            .collect(),
        ..r.clone()
    }
}

const CSV_COLUMNS: &[&str] = &[
    "dims",
    "points",
    "leaf_capacity",
    "layouts",
    "simd",
    "kernel",
    "verified",
    "phase",
    "batch",
    "ops",
    "wall_s",
    "ops_per_s",
    "nodes_visited",
    "leaves_scanned",
    "points_compared",
    "results",
    "tree_points",
    "leaves",
    "inner_nodes",
    "height",
    "avg_leaf_capacity",
    "light_pct",
    "heavy_pct",
    "outlier_pct",
    "n64_nodes",
    "n32_nodes",
    "n16_nodes",
    "root_layout",
];

/// Writes the report; floats carry six significant digits and the column
/// (CSV) or key (JSON) order is fixed.
pub fn report_emit<W: Write>(report: &BenchReport, format: ReportFormat, mut out: W) -> std::io::Result<()> {
    let r = rounded(report);
    match format {
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut out, &r)?;
            writeln!(out)
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(CSV_COLUMNS)?;
            for p in &r.phases {
                let s = &p.structure;
                w.write_record([
                    r.dims.to_string(),
                    r.points.to_string(),
                    r.leaf_capacity.to_string(),
                    r.layouts.clone(),
                    r.simd.clone(),
                    r.kernel.clone(),
                    r.verified.to_string(),
                    p.phase.clone(),
                    p.batch.to_string(),
                    p.ops.to_string(),
                    p.wall_s.to_string(),
                    p.ops_per_s.to_string(),
                    p.nodes_visited.to_string(),
                    p.leaves_scanned.to_string(),
                    p.points_compared.to_string(),
                    p.results.to_string(),
                    s.points.to_string(),
                    s.leaves.to_string(),
                    s.inner_nodes.to_string(),
                    s.height.to_string(),
                    s.avg_leaf_capacity.to_string(),
                    s.light_pct.to_string(),
                    s.heavy_pct.to_string(),
                    s.outlier_pct.to_string(),
                    s.n64_nodes.to_string(),
                    s.n32_nodes.to_string(),
                    s.n16_nodes.to_string(),
                    s.root_layout.map_or(String::new(), |l| l.to_string()),
                ])?;
            }
            w.flush()
        }
    }
}
