//! Build a tree over random 3-d points and run a box query.
//!
//! cargo run --release --example range_query

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use skdtree::oracle::scan_range;
use skdtree::{BuildConfig, Point, QueryStats, RangeOptions, RangeQuery, SkdTree};

fn main() {
    let mut rng = StdRng::seed_from_u64(42);
    let points: Vec<Point<3>> = (0..200_000)
        .map(|i| Point::new([rng.gen_range(0..1_000_000), rng.gen_range(0..1_000_000), rng.gen_range(0..1_000)], i))
        .collect();

    let tree = SkdTree::build(points.clone(), BuildConfig::default()).expect("valid config");
    let s = tree.structure_stats();
    println!("{} points in {} leaves, height {}, avg leaf {:.1}", s.points, s.leaves, s.height, s.avg_leaf_capacity);

    let q = RangeQuery::new([250_000, 250_000, 100], [260_000, 270_000, 400]).unwrap();
    let mut stats = QueryStats::default();
    let mut hits = Vec::new();
    tree.range_query_with(&q, RangeOptions::default(), &mut stats, &mut hits);
    println!("{} hits; visited {} nodes, scanned {} leaves, compared {} points", hits.len(), stats.nodes_visited, stats.leaves_scanned, stats.points_compared);

    assert_eq!(hits.len(), scan_range(&points, &q).len());
    assert_eq!(tree.range_count(&q), hits.len());
}
