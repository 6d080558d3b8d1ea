//! Compare the node layouts chosen with and without compressed splitters.
//!
//! cargo run --release --example compressed_layouts

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use skdtree::{BuildConfig, LayoutPolicy, Point, SkdTree};

fn main() {
    let mut rng = StdRng::seed_from_u64(11);
    let points: Vec<Point<2>> = (0..1 << 18).map(|i| Point::new([rng.gen(), rng.gen()], i)).collect();

    for layouts in [LayoutPolicy::Auto, LayoutPolicy::N64Only] {
        let cfg = BuildConfig { layouts, ..BuildConfig::default() };
        let tree = SkdTree::build(points.clone(), cfg).unwrap();
        let s = tree.structure_stats();
        println!(
            "{layouts:?}: root {:?}, inner nodes {} (N64 {}, N32 {}, N16 {}), compressed {:.1}%, height {}",
            s.root_layout.unwrap(),
            s.inner_nodes,
            s.n64_nodes,
            s.n32_nodes,
            s.n16_nodes,
            100.0 * s.compressed_fraction(),
            s.height
        );
    }
}
