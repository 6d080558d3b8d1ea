use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use skdtree::bench::dataset::{csv_dims, dataset_dims, gen_points, load_dataset, save_dataset, Distribution};
use skdtree::bench::report::{report_emit, ReportFormat};
use skdtree::bench::runner::{run_bench, BenchConfig};
use skdtree::bench::workload::{gen_workload, load_workload, save_workload, workload_dims, Workload, WorkloadKind, WorkloadParams};
use skdtree::{BuildConfig, LayoutPolicy, SimdMode};

#[derive(Parser)]
#[command(name = "skd-bench", about = "Datasets, workloads and benchmarks for the slicing kd-tree")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic dataset file.
    GenData {
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        dims: usize,
        #[arg(long, default_value = "uniform")]
        dist: Distribution,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a range, kNN or mixed workload for a dataset.
    GenWorkload {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "range")]
        kind: WorkloadKind,
        /// Queries per sweep.
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 1e-4)]
        selectivity: f64,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 0.3)]
        insert_frac: f64,
        #[arg(long, default_value_t = 0.06)]
        delete_frac: f64,
        #[arg(long, default_value_t = 5)]
        batches: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the index and report build time and structure.
    Build {
        #[command(flatten)]
        build: BuildArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run a workload and report timings, counters and structure.
    Bench {
        #[arg(long)]
        workload: PathBuf,
        #[arg(long)]
        verify: bool,
        /// Also time a binary kd-tree on the same queries.
        #[arg(long)]
        baseline: bool,
        #[command(flatten)]
        build: BuildArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run a workload once and check every query against the oracle.
    Verify {
        #[arg(long)]
        workload: PathBuf,
        #[command(flatten)]
        build: BuildArgs,
    },
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    data: PathBuf,
    /// Coordinate columns of a CSV dataset (default: all columns).
    #[arg(long)]
    dims: Option<usize>,
    #[arg(long, default_value_t = 128)]
    leaf_capacity: usize,
    #[arg(long, default_value = "auto")]
    layouts: LayoutPolicy,
    #[arg(long, default_value = "auto")]
    simd: SimdMode,
    #[arg(long, default_value_t = 0x5eed)]
    seed: u64,
}

impl BuildArgs {
    fn config(&self) -> BuildConfig {
        BuildConfig {
            leaf_capacity: self.leaf_capacity,
            layouts: self.layouts,
            simd: self.simd,
            seed: self.seed,
            ..BuildConfig::default()
        }
    }

    fn dims(&self) -> Result<usize, String> {
        if is_csv(&self.data) {
            match self.dims {
                Some(d) => Ok(d),
                None => csv_dims(&self.data, false).map_err(|e| e.to_string()),
            }
        } else {
            dataset_dims(&self.data).map_err(|e| e.to_string())
        }
    }
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
    /// Report file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl OutputArgs {
    fn writer(&self) -> io::Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(io::stdout().lock()),
        })
    }
}

fn is_csv(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Calls `$f::<D>($args)` with `D` taken from a runtime value in 1..=16.
macro_rules! with_dims {
    ($d:expr, $f:ident ( $($a:expr),* )) => {
        match $d {
            1 => $f::<1>($($a),*), 2 => $f::<2>($($a),*), 3 => $f::<3>($($a),*), 4 => $f::<4>($($a),*),
            5 => $f::<5>($($a),*), 6 => $f::<6>($($a),*), 7 => $f::<7>($($a),*), 8 => $f::<8>($($a),*),
            9 => $f::<9>($($a),*), 10 => $f::<10>($($a),*), 11 => $f::<11>($($a),*), 12 => $f::<12>($($a),*),
            13 => $f::<13>($($a),*), 14 => $f::<14>($($a),*), 15 => $f::<15>($($a),*), 16 => $f::<16>($($a),*),
            d => Err(format!("dimensionality {d} outside 1..=16")),
        }
    };
}

fn gen_data<const D: usize>(dist: Distribution, n: usize, seed: u64, out: &Path) -> Result<(), String> {
    let pts = gen_points::<D>(dist, n, seed);
    save_dataset(out, &pts).map_err(|e| e.to_string())?;
    eprintln!("wrote {n} {D}-d {dist:?} points to {}", out.display());
    Ok(())
}

fn gen_wl<const D: usize>(data: &Path, params: &WorkloadParams, out: &Path) -> Result<(), String> {
    let pts = load_dataset::<D>(data).map_err(|e| e.to_string())?;
    let wl = gen_workload(&pts, params);
    save_workload(out, &wl).map_err(|e| e.to_string())?;
    eprintln!("wrote {:?} workload ({} range, {} knn, {} inserts, {} deletes) to {}", params.kind, wl.ranges.len(), wl.knn.len(), wl.inserts.len(), wl.deletes.len(), out.display());
    Ok(())
}

fn empty_workload<const D: usize>() -> Workload<D> {
    Workload { params: WorkloadParams::default(), ranges: Vec::new(), knn: Vec::new(), inserts: Vec::new(), deletes: Vec::new() }
}

fn bench<const D: usize>(build: &BuildArgs, workload: Option<&Path>, cfg: BenchConfig, output: Option<&OutputArgs>) -> Result<(), String> {
    let pts = load_dataset::<D>(&build.data).map_err(|e| e.to_string())?;
    let wl = match workload {
        Some(p) => load_workload::<D>(p).map_err(|e| e.to_string())?,
        None => empty_workload(),
    };
    let report = run_bench(&pts, &wl, &cfg).map_err(|e| e.to_string())?;
    match output {
        Some(o) => {
            let mut w = o.writer().map_err(|e| e.to_string())?;
            report_emit(&report, o.format, &mut w).map_err(|e| e.to_string())?;
            w.flush().map_err(|e| e.to_string())
        }
        None => {
            let queries: usize = report.phases.iter().filter(|p| p.phase == "range" || p.phase == "knn").map(|p| p.ops).sum();
            println!("ok: {queries} queries match the oracle");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.cmd {
        Cmd::GenData { n, dims, dist, seed, out } => with_dims!(dims, gen_data(dist, n, seed, &out)),
        Cmd::GenWorkload { data, kind, n, selectivity, k, insert_frac, delete_frac, batches, seed, out } => {
            let params = WorkloadParams { kind, count: n, selectivity, k, insert_frac, delete_frac, batches, seed };
            params.validate()?;
            let dims = if is_csv(&data) { csv_dims(&data, false) } else { dataset_dims(&data) }.map_err(|e| e.to_string())?;
            with_dims!(dims, gen_wl(&data, &params, &out))
        }
        Cmd::Build { build, output } => {
            let cfg = BenchConfig { build: build.config(), ..BenchConfig::default() };
            with_dims!(build.dims()?, bench(&build, None, cfg, Some(&output)))
        }
        Cmd::Bench { workload, verify, baseline, build, output } => {
            let dims = build.dims()?;
            let wdims = workload_dims(&workload).map_err(|e| e.to_string())?;
            if dims != wdims {
                return Err(format!("dataset is {dims}-d but workload is {wdims}-d"));
            }
            let cfg = BenchConfig { build: build.config(), verify, baseline, ..BenchConfig::default() };
            with_dims!(dims, bench(&build, Some(&workload), cfg, Some(&output)))
        }
        Cmd::Verify { workload, build } => {
            let dims = build.dims()?;
            let cfg = BenchConfig { build: build.config(), verify: true, repeats: 1, baseline: false };
            with_dims!(dims, bench(&build, Some(&workload), cfg, None))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
