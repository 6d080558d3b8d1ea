//! Generate a mixed workload, run it with verification and print the report.
//!
//! cargo run --release --example workload_bench

use skdtree::bench::{gen_points, gen_workload, report_emit, run_bench, BenchConfig, Distribution, ReportFormat, WorkloadKind, WorkloadParams};

fn main() {
    let points = gen_points::<2>(Distribution::Gaussian, 100_000, 1);
    let params = WorkloadParams { kind: WorkloadKind::Mixed, count: 500, ..WorkloadParams::default() };
    let workload = gen_workload(&points, &params);
    let achieved: f64 = workload.ranges.iter().map(|r| r.1).sum::<f64>() / workload.ranges.len() as f64;
    println!("mean achieved selectivity {achieved:.2e} (target {:.0e})", params.selectivity);

    let cfg = BenchConfig { verify: true, ..BenchConfig::default() };
    let report = run_bench(&points, &workload, &cfg).expect("all queries match the oracle");
    report_emit(&report, ReportFormat::Csv, std::io::stdout().lock()).unwrap();
}
