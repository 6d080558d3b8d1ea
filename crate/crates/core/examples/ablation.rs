//! Range-query throughput with compression and data-parallel kernels toggled,
//! against a binary kd-tree.
//!
//! cargo run --release --example ablation

use skdtree::bench::runner::{baseline_range_sweep, range_sweep};
use skdtree::bench::{gen_points, gen_workload, Distribution, WorkloadParams};
use skdtree::oracle::BinaryKdTree;
use skdtree::{BuildConfig, LayoutPolicy, RangeQuery, SimdMode, SkdTree};

fn main() {
    let points = gen_points::<2>(Distribution::Uniform, 1_000_000, 5);
    let wl = gen_workload(&points, &WorkloadParams::default());
    let queries: Vec<RangeQuery<2>> = wl.ranges.iter().map(|r| r.0).collect();

    for layouts in [LayoutPolicy::Auto, LayoutPolicy::N64Only] {
        for simd in [SimdMode::Auto, SimdMode::Scalar] {
            let tree = SkdTree::build(points.clone(), BuildConfig { layouts, simd, ..BuildConfig::default() }).unwrap();
            let (wall, stats, hits) = range_sweep(&tree, &queries, 3);
            println!(
                "{:<9} {:<7} {:>10.0} qps  {:>8} hits  {:>9} points compared",
                format!("{layouts:?}"),
                format!("{simd:?}"),
                queries.len() as f64 / wall,
                hits,
                stats.points_compared
            );
        }
    }
    let kd = BinaryKdTree::build(points, 32);
    let (wall, hits) = baseline_range_sweep(&kd, &queries, 3);
    println!("{:<17} {:>10.0} qps  {:>8} hits", "binary kd-tree", queries.len() as f64 / wall, hits);
}
