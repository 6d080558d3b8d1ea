//! k-nearest-neighbour search over integer grid coordinates.
//!
//! cargo run --release --example nearest_neighbors

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use skdtree::{BuildConfig, Point, SkdTree};

fn main() {
    let mut rng = StdRng::seed_from_u64(7);
    // cities on a 1e6 x 1e6 grid, ids are row numbers
    let cities: Vec<Point<2>> = (0..100_000).map(|i| Point::new([rng.gen_range(0..1_000_000), rng.gen_range(0..1_000_000)], i)).collect();
    let tree = SkdTree::build(cities, BuildConfig::default()).unwrap();

    let here = [500_000, 500_000];
    let res = tree.knn(&here, 5);
    for n in &res.neighbors {
        println!("id {:>6} at {:?}, distance {:.0}", n.point.id, n.point.coords, (n.dist as f64).sqrt());
    }

    // asking for more than the tree holds returns everything
    let small = SkdTree::build_relaxed(vec![Point::new([1, 1], 0), Point::new([5, 5], 1)], BuildConfig::default().with_leaf_capacity(2)).unwrap();
    let all = small.knn(&[0, 0], 10);
    println!("k=10 over 2 points: {} results, exhausted = {}", all.neighbors.len(), all.exhausted);
}
