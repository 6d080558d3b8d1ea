pub mod dataset;
pub mod report;
pub mod runner;
pub mod workload;

pub use dataset::{gen_points, load_dataset, save_dataset, Distribution};
pub use report::{report_emit, BenchReport, PhaseReport, ReportFormat};
pub use runner::{run_bench, BenchConfig, BenchError, VerifyError};
pub use workload::{gen_workload, load_workload, save_workload, Workload, WorkloadKind, WorkloadParams};
