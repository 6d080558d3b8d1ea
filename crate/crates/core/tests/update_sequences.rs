use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use skdtree::oracle::FlatStore;
use skdtree::{BuildConfig, DeleteOutcome, InsertError, Point, RangeQuery, SkdTree};

fn sorted<const D: usize>(mut v: Vec<Point<D>>) -> Vec<Point<D>> {
    v.sort_unstable();
    v
}

/// `ops` random inserts and deletes, checked against a flat store as they go.
fn run<const D: usize>(seed: u64, n0: usize, ops: usize, modulus: u64, cap: usize) -> SkdTree<D> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut next = 0u64;
    let mut fresh = |rng: &mut StdRng| {
        next += 1;
        Point::new(std::array::from_fn(|_| rng.gen_range(0..modulus)), next)
    };
    let init: Vec<Point<D>> = (0..n0).map(|_| fresh(&mut rng)).collect();
    let mut tree = SkdTree::build(init.clone(), BuildConfig::default().with_leaf_capacity(cap)).unwrap();
    let mut store = FlatStore::new(init);
    for op in 0..ops {
        if store.is_empty() || rng.gen_bool(0.55) {
            let p = fresh(&mut rng);
            tree.insert(p).unwrap();
            assert_eq!(tree.insert(p), Err(InsertError::Duplicate));
            store.push(p);
        } else {
            let p = store.points()[rng.gen_range(0..store.len())];
            assert_eq!(tree.delete(&p), DeleteOutcome::Deleted);
            assert_eq!(tree.delete(&p), DeleteOutcome::NotFound);
            store.remove(&p);
        }
        if op % 500 == 0 {
            tree.check_invariants().unwrap();
            for _ in 0..4 {
                let a: [u64; D] = std::array::from_fn(|_| rng.gen_range(0..modulus));
                let b: [u64; D] = std::array::from_fn(|_| rng.gen_range(0..modulus));
                let q = RangeQuery::new(std::array::from_fn(|d| a[d].min(b[d])), std::array::from_fn(|d| a[d].max(b[d]))).unwrap();
                assert_eq!(sorted(tree.range_query(&q)), sorted(store.scan_range(&q)));
                let k = rng.gen_range(1..20);
                let want: Vec<u128> = store.scan_knn(&a, k).iter().map(|x| x.1).collect();
                assert_eq!(tree.knn(&a, k).distances(), want);
            }
        }
    }
    tree.check_invariants().unwrap();
    assert_eq!(sorted(tree.points()), sorted(store.points().to_vec()));
    tree
}

#[test]
fn hundred_thousand_operations_uniform() {
    run::<2>(1, 20_000, 100_000, u64::MAX, 32);
}

#[test]
fn hundred_thousand_operations_duplicate_heavy() {
    let t = run::<3>(2, 5_000, 100_000, 3, 16);
    assert!(t.structure_stats().outlier_leaves > 0);
}

#[test]
fn growth_from_empty() {
    let t = run::<4>(3, 0, 30_000, 1 << 20, 16);
    assert!(t.structure_stats().leaves > 1);
}

#[test]
fn uniform_churn_keeps_outliers_rare() {
    let mut rng = StdRng::seed_from_u64(9);
    let n = 100_000u64;
    let base: Vec<Point<2>> = (0..n).map(|i| Point::new([rng.gen(), rng.gen()], i)).collect();
    let mut tree = SkdTree::build(base.clone(), BuildConfig::default()).unwrap();
    for b in 0..5u64 {
        for i in 0..n * 6 / 100 {
            tree.insert(Point::new([rng.gen(), rng.gen()], n + b * n + i)).unwrap();
        }
        for p in &base[(b * n / 80) as usize..((b + 1) * n / 80) as usize] {
            assert_eq!(tree.delete(p), DeleteOutcome::Deleted);
        }
        assert!(tree.structure_stats().outlier_pct < 1.0);
    }
    tree.check_invariants().unwrap();
}
