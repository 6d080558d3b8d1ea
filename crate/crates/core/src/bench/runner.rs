//! Timed execution of a workload against a freshly built tree.

use std::hint::black_box;
use std::time::Instant;

use thiserror::Error;

use super::report::{BenchReport, PhaseReport};
use super::workload::{Workload, WorkloadKind};
use crate::construct::{BuildConfig, BuildError, LayoutPolicy};
use crate::kernel::SimdMode;
use crate::model::{CoordKey, Point, RangeQuery};
use crate::oracle::{BinaryKdTree, FlatStore};
use crate::query::{QueryStats, RangeOptions};
use crate::tree::SkdTree;
use crate::update::DeleteOutcome;

/// Above this many live points verification uses the kd-tree oracle
/// instead of a full scan per query.
pub const SCAN_ORACLE_LIMIT: usize = 250_000;

/// Bucket size of the baseline and oracle kd-trees.
pub const BASELINE_BUCKET: usize = 32;

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub build: BuildConfig,
    /// Check every query against the oracle.
    pub verify: bool,
    /// Timed repetitions per sweep; the median is reported.
    pub repeats: usize,
    /// Also time the same sweeps on a binary kd-tree.
    pub baseline: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { build: BuildConfig::default(), verify: false, repeats: 3, baseline: false }
    }
}

#[derive(Debug, Error)]
#[error("verification failed in {phase} batch {batch}, query {query}: {detail}")]
pub struct VerifyError {
    pub phase: String,
    pub batch: usize,
    pub query: usize,
    pub detail: String,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn policy_name(p: LayoutPolicy) -> &'static str {
    match p {
        LayoutPolicy::Auto => "auto",
        LayoutPolicy::N64Only => "n64-only",
    }
}

fn simd_name(s: SimdMode) -> &'static str {
    match s {
        SimdMode::Auto => "auto",
        SimdMode::Scalar => "scalar",
    }
}

struct Sweep {
    wall_s: f64,
    stats: QueryStats,
    results: u64,
}

fn phase<const D: usize>(name: &str, batch: usize, ops: usize, sweep: Sweep, tree: &SkdTree<D>) -> PhaseReport {
    PhaseReport {
        phase: name.to_string(),
        batch,
        ops,
        wall_s: sweep.wall_s,
        ops_per_s: if sweep.wall_s > 0.0 { ops as f64 / sweep.wall_s } else { 0.0 },
        nodes_visited: sweep.stats.nodes_visited,
        leaves_scanned: sweep.stats.leaves_scanned,
        points_compared: sweep.stats.points_compared,
        results: sweep.results,
        structure: tree.structure_stats(),
    }
}

/// Runs `f` `repeats` times and returns the median wall time.
fn timed(repeats: usize, mut f: impl FnMut()) -> f64 {
    let runs = (0..repeats.max(1))
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_secs_f64()
        })
        .collect();
    median(runs)
}

pub fn range_sweep<const D: usize>(tree: &SkdTree<D>, queries: &[RangeQuery<D>], repeats: usize) -> (f64, QueryStats, u64) {
    let mut out = Vec::new();
    let mut stats = QueryStats::default();
    let mut results = 0u64;
    for q in queries {
        out.clear();
        tree.range_query_with(q, RangeOptions::default(), &mut stats, &mut out);
        results += out.len() as u64;
    }
    let wall = timed(repeats, || {
        let mut scratch = QueryStats::default();
        for q in queries {
            out.clear();
            tree.range_query_with(q, RangeOptions::default(), &mut scratch, &mut out);
            black_box(out.len());
        }
    });
    (wall, stats, results)
}

pub fn knn_sweep<const D: usize>(tree: &SkdTree<D>, queries: &[[CoordKey; D]], k: usize, repeats: usize) -> (f64, QueryStats, u64) {
    let mut stats = QueryStats::default();
    let mut results = 0u64;
    for q in queries {
        results += tree.knn_with_stats(q, k, &mut stats).neighbors.len() as u64;
    }
    let wall = timed(repeats, || {
        let mut scratch = QueryStats::default();
        for q in queries {
            black_box(tree.knn_with_stats(q, k, &mut scratch).neighbors.len());
        }
    });
    (wall, stats, results)
}

/// Median wall time of a range sweep on the binary kd-tree.
pub fn baseline_range_sweep<const D: usize>(kd: &BinaryKdTree<D>, queries: &[RangeQuery<D>], repeats: usize) -> (f64, u64) {
    let results = queries.iter().map(|q| kd.count(q) as u64).sum();
    let wall = timed(repeats, || {
        for q in queries {
            black_box(kd.range(q).len());
        }
    });
    (wall, results)
}

pub fn baseline_knn_sweep<const D: usize>(kd: &BinaryKdTree<D>, queries: &[[CoordKey; D]], k: usize, repeats: usize) -> (f64, u64) {
    let results = queries.iter().map(|q| kd.knn(q, k).len() as u64).sum();
    let wall = timed(repeats, || {
        for q in queries {
            black_box(kd.knn(q, k).len());
        }
    });
    (wall, results)
}

enum Oracle<'a, const D: usize> {
    Scan(&'a [Point<D>]),
    Kd(BinaryKdTree<D>),
}

impl<'a, const D: usize> Oracle<'a, D> {
    fn new(points: &'a [Point<D>]) -> Self {
        if points.len() <= SCAN_ORACLE_LIMIT {
            Oracle::Scan(points)
        } else {
            Oracle::Kd(BinaryKdTree::build(points.to_vec(), BASELINE_BUCKET))
        }
    }

    fn range(&self, q: &RangeQuery<D>) -> Vec<Point<D>> {
        match self {
            Oracle::Scan(p) => crate::oracle::scan_range(p, q),
            Oracle::Kd(kd) => kd.range(q),
        }
    }

    fn knn(&self, q: &[CoordKey; D], k: usize) -> Vec<u128> {
        match self {
            Oracle::Scan(p) => crate::oracle::scan_knn(p, q, k).into_iter().map(|x| x.1).collect(),
            Oracle::Kd(kd) => kd.knn(q, k).into_iter().map(|x| x.1).collect(),
        }
    }
}

/// Checks every range query of `queries` against the oracle.
pub fn verify_ranges<const D: usize>(tree: &SkdTree<D>, live: &[Point<D>], queries: &[RangeQuery<D>], batch: usize) -> Result<(), VerifyError> {
    let oracle = Oracle::new(live);
    for (i, q) in queries.iter().enumerate() {
        let mut got = tree.range_query(q);
        let mut want = oracle.range(q);
        got.sort_unstable();
        want.sort_unstable();
        if got != want {
            return Err(VerifyError {
                phase: "range".into(),
                batch,
                query: i,
                detail: format!("{q:?}: tree returned {} points, oracle {}", got.len(), want.len()),
            });
        }
    }
    Ok(())
}

pub fn verify_knn<const D: usize>(tree: &SkdTree<D>, live: &[Point<D>], queries: &[[CoordKey; D]], k: usize, batch: usize) -> Result<(), VerifyError> {
    let oracle = Oracle::new(live);
    for (i, q) in queries.iter().enumerate() {
        let got = tree.knn(q, k).distances();
        let want = oracle.knn(q, k);
        if got != want {
            return Err(VerifyError {
                phase: "knn".into(),
                batch,
                query: i,
                detail: format!("{q:?} k={k}: tree distances {got:?}, oracle {want:?}"),
            });
        }
    }
    Ok(())
}

/// Builds the tree from `points` and runs `workload` against it.
///
/// Phases: `build`; then `range` and/or `knn` sweeps at batch 0. Mixed
/// workloads add, per update batch `b` (1-based), an `insert` and a `delete`
/// phase followed by `range` and `knn` sweeps tagged `b`. Update phases run
/// once; sweeps and builds report the median of `repeats` runs.
pub fn run_bench<const D: usize>(points: &[Point<D>], workload: &Workload<D>, cfg: &BenchConfig) -> Result<BenchReport, BenchError> {
    cfg.build.validate()?;
    let mut tree = None;
    let build_s = timed(cfg.repeats, || {
        tree = Some(SkdTree::build(points.to_vec(), cfg.build.clone()));
    });
    let mut tree = tree.expect("at least one build")?;
    let mut report = BenchReport {
        dims: D,
        points: points.len(),
        leaf_capacity: cfg.build.leaf_capacity,
        layouts: policy_name(cfg.build.layouts).to_string(),
        simd: simd_name(cfg.build.simd).to_string(),
        kernel: format!("{:?}", tree.kernel()).to_lowercase(),
        verified: cfg.verify,
        phases: Vec::new(),
    };
    report.phases.push(phase("build", 0, points.len(), Sweep { wall_s: build_s, stats: QueryStats::default(), results: tree.len() as u64 }, &tree));

    let ranges: Vec<RangeQuery<D>> = workload.ranges.iter().map(|r| r.0).collect();
    let k = workload.params.k;
    let kind = workload.params.kind;
    let do_range = matches!(kind, WorkloadKind::Range | WorkloadKind::Mixed);
    let do_knn = matches!(kind, WorkloadKind::Knn | WorkloadKind::Mixed);
    let mut live = if cfg.verify && kind == WorkloadKind::Mixed { Some(FlatStore::new(points.to_vec())) } else { None };

    let sweeps = |tree: &SkdTree<D>, live: &[Point<D>], batch: usize, report: &mut BenchReport| -> Result<(), VerifyError> {
        if do_range && !ranges.is_empty() {
            let (wall_s, stats, results) = range_sweep(tree, &ranges, cfg.repeats);
            report.phases.push(phase("range", batch, ranges.len(), Sweep { wall_s, stats, results }, tree));
            if cfg.verify {
                verify_ranges(tree, live, &ranges, batch)?;
            }
        }
        if do_knn && !workload.knn.is_empty() {
            let (wall_s, stats, results) = knn_sweep(tree, &workload.knn, k, cfg.repeats);
            report.phases.push(phase("knn", batch, workload.knn.len(), Sweep { wall_s, stats, results }, tree));
            if cfg.verify {
                verify_knn(tree, live, &workload.knn, k, batch)?;
            }
        }
        Ok(())
    };

    sweeps(&tree, live.as_ref().map_or(points, |s| s.points()), 0, &mut report)?;

    if cfg.baseline && kind != WorkloadKind::Mixed {
        let kd = BinaryKdTree::build(points.to_vec(), BASELINE_BUCKET);
        let none = QueryStats::default();
        if do_range && !ranges.is_empty() {
            let (wall_s, results) = baseline_range_sweep(&kd, &ranges, cfg.repeats);
            report.phases.push(phase("kd-range", 0, ranges.len(), Sweep { wall_s, stats: none, results }, &tree));
        }
        if do_knn && !workload.knn.is_empty() {
            let (wall_s, results) = baseline_knn_sweep(&kd, &workload.knn, k, cfg.repeats);
            report.phases.push(phase("kd-knn", 0, workload.knn.len(), Sweep { wall_s, stats: none, results }, &tree));
        }
    }

    if kind == WorkloadKind::Mixed {
        for b in 0..workload.params.batches {
            let ins = workload.batch(&workload.inserts, b);
            let t = Instant::now();
            let mut inserted = 0u64;
            for p in ins {
                if tree.insert(*p).is_ok() {
                    inserted += 1;
                }
            }
            let wall_s = t.elapsed().as_secs_f64();
            report.phases.push(phase("insert", b + 1, ins.len(), Sweep { wall_s, stats: QueryStats::default(), results: inserted }, &tree));

            let del = workload.batch(&workload.deletes, b);
            let t = Instant::now();
            let mut deleted = 0u64;
            for p in del {
                if tree.delete(p) == DeleteOutcome::Deleted {
                    deleted += 1;
                }
            }
            let wall_s = t.elapsed().as_secs_f64();
            report.phases.push(phase("delete", b + 1, del.len(), Sweep { wall_s, stats: QueryStats::default(), results: deleted }, &tree));

            if let Some(store) = live.as_mut() {
                for p in ins {
                    store.push(*p);
                }
                for p in del {
                    store.remove(p);
                }
                if store.len() != tree.len() {
                    return Err(VerifyError {
                        phase: "update".into(),
                        batch: b + 1,
                        query: 0,
                        detail: format!("tree holds {} points, oracle {}", tree.len(), store.len()),
                    }
                    .into());
                }
            }
            sweeps(&tree, live.as_ref().map_or(&[][..], |s| s.points()), b + 1, &mut report)?;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::dataset::{gen_points, Distribution};
    use crate::bench::workload::{gen_workload, WorkloadParams};

    fn params(kind: WorkloadKind) -> WorkloadParams {
        WorkloadParams { kind, count: 100, selectivity: 1e-3, ..WorkloadParams::default() }
    }

    #[test]
    fn range_bench_verifies_and_reports() {
        let pts = gen_points::<2>(Distribution::Uniform, 20_000, 3);
        let wl = gen_workload(&pts, &params(WorkloadKind::Range));
        let cfg = BenchConfig { verify: true, baseline: true, ..BenchConfig::default() };
        let r = run_bench(&pts, &wl, &cfg).unwrap();
        let names: Vec<&str> = r.phases.iter().map(|p| p.phase.as_str()).collect();
        assert_eq!(names, ["build", "range", "kd-range"]);
        assert_eq!(r.phase("range", 0).unwrap().results, r.phase("kd-range", 0).unwrap().results);
        let s = &r.phases[0].structure;
        assert!((64.0..=128.0).contains(&s.avg_leaf_capacity), "{}", s.avg_leaf_capacity);
        assert!((s.light_pct + s.heavy_pct + s.outlier_pct - 100.0).abs() <= 0.01);
    }

    #[test]
    fn mixed_bench_emits_every_batch() {
        let pts = gen_points::<2>(Distribution::Gaussian, 20_000, 4);
        let wl = gen_workload(&pts, &params(WorkloadKind::Mixed));
        let cfg = BenchConfig { verify: true, repeats: 1, ..BenchConfig::default() };
        let r = run_bench(&pts, &wl, &cfg).unwrap();
        for b in 1..=5 {
            for name in ["insert", "delete", "range", "knn"] {
                assert!(r.phase(name, b).is_some(), "{name} {b}");
            }
        }
        let last = r.phases.last().unwrap();
        assert_eq!(last.structure.points, 20_000 + 6000 - 1200);
    }

    #[test]
    fn mismatch_is_reported() {
        let pts = gen_points::<2>(Distribution::Uniform, 5000, 5);
        let wl = gen_workload(&pts, &params(WorkloadKind::Range));
        let tree = SkdTree::build(pts.clone(), BuildConfig::default()).unwrap();
        let ranges: Vec<_> = wl.ranges.iter().map(|r| r.0).collect();
        let err = verify_ranges(&tree, &pts[1..], &ranges, 0);
        let hit = ranges.iter().position(|q| q.contains(&pts[0].coords));
        match hit {
            Some(i) => assert_eq!(err.unwrap_err().query, i),
            None => assert!(err.is_ok()),
        }
    }
}
