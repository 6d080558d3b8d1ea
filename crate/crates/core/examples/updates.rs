//! Inserts and deletes on a live tree, watching leaf classes change.
//!
//! cargo run --release --example updates

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use skdtree::{BuildConfig, DeleteOutcome, InsertOutcome, Point, SkdTree};

fn report(label: &str, tree: &SkdTree<2>) {
    let s = tree.structure_stats();
    println!(
        "{label:<18} points {:>7}  leaves {:>5}  light {:>6.2}%  heavy {:>5.2}%  outlier {:>5.2}%",
        s.points, s.leaves, s.light_pct, s.heavy_pct, s.outlier_pct
    );
}

fn main() {
    let mut rng = StdRng::seed_from_u64(3);
    let base: Vec<Point<2>> = (0..100_000).map(|i| Point::new([rng.gen(), rng.gen()], i)).collect();
    let mut tree = SkdTree::build(base.clone(), BuildConfig::default()).unwrap();
    report("built", &tree);

    // a dense cluster finer than the parent's splitter resolution; the leaf
    // cannot be split under a compressed parent and turns into an outlier
    let mut splits = 0;
    for i in 0..20_000u64 {
        let p = Point::new([rng.gen_range(0..1 << 40), rng.gen_range(0..1 << 40)], 1_000_000 + i);
        if let Ok(InsertOutcome::InsertedWithSplit | InsertOutcome::InsertedWithRebuild) = tree.insert(p) {
            splits += 1;
        }
    }
    report("cluster inserted", &tree);
    println!("{splits} inserts split a leaf");

    // many copies of a single location cannot be split apart
    for i in 0..2_000u64 {
        tree.insert(Point::new([12345, 67890], 2_000_000 + i)).unwrap();
    }
    report("duplicates", &tree);
    assert!(tree.insert(Point::new([12345, 67890], 2_000_000)).is_err());

    let gone = base.iter().take(50_000).filter(|p| tree.delete(p) == DeleteOutcome::Deleted).count();
    report("half deleted", &tree);
    println!("deleted {gone}");
    tree.check_invariants().unwrap();
}
