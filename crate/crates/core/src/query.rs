//! Range and k-nearest-neighbour search.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::kernel::Kernel;
use crate::model::{CoordKey, Point, RangeQuery};
use crate::node::{InnerNode, NodeRef};
use crate::tree::SkdTree;

/// Work counters filled in by the `*_with` query variants.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryStats {
    pub nodes_visited: u64,
    pub leaves_scanned: u64,
    pub points_compared: u64,
    /// Leaf dimension columns actually compared (range) or scanned (kNN).
    pub dims_compared: u64,
}

impl QueryStats {
    pub fn add(&mut self, o: &QueryStats) {
        self.nodes_visited += o.nodes_visited;
        self.leaves_scanned += o.leaves_scanned;
        self.points_compared += o.points_compared;
        self.dims_compared += o.dims_compared;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RangeOptions {
    /// Skip leaf dimensions the query spans completely.
    pub dim_skip: bool,
}

impl Default for RangeOptions {
    fn default() -> Self {
        Self { dim_skip: true }
    }
}

/// Squared distance from a per-dimension gap vector.
#[inline]
pub fn dist_from_delta<const D: usize>(delta: &[CoordKey; D]) -> u128 {
    delta.iter().fold(0u128, |acc, &g| acc.saturating_add(g as u128 * g as u128))
}

/// Which side of the query coordinate a group lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntryKind {
    Node,
    /// Children `first..=last` of an inner node, all on one side of the query.
    Group { first: u8, last: u8, side: Side },
}

/// Frontier element of the best-first search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HeapEntry<const D: usize> {
    /// The node itself for `Node`; the owning inner node for `Group`.
    pub node: NodeRef,
    /// Child index inside the parent (`Node`) or of the nearest member (`Group`).
    pub idx: usize,
    pub kind: EntryKind,
    pub dist: u128,
    pub delta: [CoordKey; D],
    /// Gap on the group's split dimension inherited from above.
    base: CoordKey,
}

impl<const D: usize> HeapEntry<D> {
    pub fn root(node: NodeRef) -> Self {
        HeapEntry {
            node,
            idx: 0,
            kind: EntryKind::Node,
            dist: 0,
            delta: [0; D],
            base: 0,
        }
    }

    pub fn is_group(&self) -> bool {
        matches!(self.kind, EntryKind::Group { .. })
    }

    fn with_gap(node: NodeRef, idx: usize, kind: EntryKind, parent: &[CoordKey; D], d: usize, gap: CoordKey) -> Self {
        let mut delta = *parent;
        let base = parent[d];
        delta[d] = base.max(gap);
        HeapEntry {
            node,
            idx,
            kind,
            dist: dist_from_delta(&delta),
            delta,
            base,
        }
    }
}

/// Gap from `x` to child `i`'s interval of `v`, using the effective splitter
/// values as boundaries.
fn child_gap(v: &InnerNode, i: usize, x: CoordKey) -> CoordKey {
    let (lo, hi) = v.child_interval(i);
    if x < lo {
        lo - x
    } else {
        match hi {
            Some(h) if x >= h => x - h,
            _ => 0,
        }
    }
}

/// Expands inner node `v` (referenced by `vref`) for query `q`.
///
/// Returns the child containing `q` as a `Node` entry plus a left and a
/// right `Group` for the remaining children, whose distance is that of the
/// member nearest to `q`.
pub fn expand_inner_knn<const D: usize>(
    v: &InnerNode,
    vref: NodeRef,
    kernel: Kernel,
    q: &[CoordKey; D],
    parent_delta: &[CoordKey; D],
) -> (HeapEntry<D>, Option<HeapEntry<D>>, Option<HeapEntry<D>>) {
    let d = v.split_dim();
    let x = q[d];
    let c = v.locate_child(kernel, x);
    let node = HeapEntry::with_gap(v.child(c), c, EntryKind::Node, parent_delta, d, child_gap(v, c, x));
    let left = (c > 0).then(|| {
        let kind = EntryKind::Group {
            first: 0,
            last: (c - 1) as u8,
            side: Side::Left,
        };
        HeapEntry::with_gap(vref, c - 1, kind, parent_delta, d, child_gap(v, c - 1, x))
    });
    let last = v.num_children() - 1;
    let right = (c < last).then(|| {
        let kind = EntryKind::Group {
            first: (c + 1) as u8,
            last: last as u8,
            side: Side::Right,
        };
        HeapEntry::with_gap(vref, c + 1, kind, parent_delta, d, child_gap(v, c + 1, x))
    });
    (node, left, right)
}

/// Splits a group into its nearest member and the remaining group, if any.
pub fn pop_group<const D: usize>(v: &InnerNode, q: &[CoordKey; D], g: &HeapEntry<D>) -> (HeapEntry<D>, Option<HeapEntry<D>>) {
    let EntryKind::Group { first, last, side } = g.kind else {
        panic!("pop_group on a node entry");
    };
    let (first, last) = (first as usize, last as usize);
    let d = v.split_dim();
    let x = q[d];
    let mut parent = g.delta;
    parent[d] = g.base;
    let near = g.idx;
    let node = HeapEntry {
        node: v.child(near),
        idx: near,
        kind: EntryKind::Node,
        ..*g
    };
    let rest = match side {
        Side::Left if near > first => Some((near - 1, EntryKind::Group { first: first as u8, last: (near - 1) as u8, side })),
        Side::Right if near < last => Some((near + 1, EntryKind::Group { first: (near + 1) as u8, last: last as u8, side })),
        _ => None,
    };
    let rest = rest.map(|(i, kind)| HeapEntry::with_gap(g.node, i, kind, &parent, d, child_gap(v, i, x)));
    (node, rest)
}

/// One result of a kNN query.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Neighbor<const D: usize> {
    pub point: Point<D>,
    pub dist: u128,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KnnResult<const D: usize> {
    /// Ascending by distance.
    pub neighbors: Vec<Neighbor<D>>,
    /// `k` exceeded the number of stored points; every point was returned.
    pub exhausted: bool,
    /// Some distance hit the 128-bit ceiling.
    pub saturated: bool,
}

impl<const D: usize> KnnResult<D> {
    pub fn distances(&self) -> Vec<u128> {
        self.neighbors.iter().map(|n| n.dist).collect()
    }
}

/// Max-heap element; later discoveries sort above earlier ones at equal distance.
#[derive(Clone, Copy, PartialEq, Eq)]
struct Candidate<const D: usize> {
    dist: u128,
    seq: u64,
    point: Point<D>,
}

impl<const D: usize> Ord for Candidate<D> {
    fn cmp(&self, o: &Self) -> Ordering {
        (self.dist, self.seq).cmp(&(o.dist, o.seq))
    }
}

impl<const D: usize> PartialOrd for Candidate<D> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Min-heap key for frontier entries.
struct Frontier<const D: usize>(HeapEntry<D>, u64);

impl<const D: usize> PartialEq for Frontier<D> {
    fn eq(&self, o: &Self) -> bool {
        (self.0.dist, self.1) == (o.0.dist, o.1)
    }
}
impl<const D: usize> Eq for Frontier<D> {}
impl<const D: usize> Ord for Frontier<D> {
    fn cmp(&self, o: &Self) -> Ordering {
        (self.0.dist, self.1).cmp(&(o.0.dist, o.1))
    }
}
impl<const D: usize> PartialOrd for Frontier<D> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl<const D: usize> SkdTree<D> {
    /// All stored points inside `q`.
    pub fn range_query(&self, q: &RangeQuery<D>) -> Vec<Point<D>> {
        let mut out = Vec::new();
        self.range_query_with(q, RangeOptions::default(), &mut QueryStats::default(), &mut out);
        out
    }

    /// Number of stored points inside `q`.
    pub fn range_count(&self, q: &RangeQuery<D>) -> usize {
        let mut n = 0;
        self.range_visit(q, RangeOptions::default(), &mut QueryStats::default(), |_| n += 1);
        n
    }

    /// Breadth-first range search appending matches to `out`.
    pub fn range_query_with(&self, q: &RangeQuery<D>, opts: RangeOptions, stats: &mut QueryStats, out: &mut Vec<Point<D>>) {
        self.range_visit(q, opts, stats, |p| out.push(p));
    }

    fn range_visit(&self, q: &RangeQuery<D>, opts: RangeOptions, stats: &mut QueryStats, mut emit: impl FnMut(Point<D>)) {
        let Some(root) = self.root else { return };
        let kernel = self.kernel;
        let mut queue = VecDeque::from([root]);
        let mut masks = Vec::new();
        while let Some(n) = queue.pop_front() {
            stats.nodes_visited += 1;
            if n.is_leaf() {
                let leaf = self.leaf(n);
                stats.leaves_scanned += 1;
                stats.points_compared += leaf.len() as u64;
                let dims = leaf.scan_range(kernel, q, opts.dim_skip, &mut masks, |i| emit(leaf.point(i)));
                stats.dims_compared += dims as u64;
            } else {
                let v = self.inner(n);
                let d = v.split_dim();
                let (a, b) = v.locate_children_range(kernel, q.lo[d], q.hi[d]);
                queue.extend(&v.children()[a..=b]);
            }
        }
    }

    /// The `k` points closest to `q` by squared Euclidean distance.
    pub fn knn(&self, q: &[CoordKey; D], k: usize) -> KnnResult<D> {
        self.knn_with_stats(q, k, &mut QueryStats::default())
    }

    pub fn knn_with_stats(&self, q: &[CoordKey; D], k: usize, stats: &mut QueryStats) -> KnnResult<D> {
        self.knn_observed(q, k, stats, |_, _| {})
    }

    /// Best-first kNN. `observe` sees every popped entry together with the
    /// current bound (`None` while fewer than `k` results are held).
    pub fn knn_observed(
        &self,
        q: &[CoordKey; D],
        k: usize,
        stats: &mut QueryStats,
        mut observe: impl FnMut(&HeapEntry<D>, Option<u128>),
    ) -> KnnResult<D> {
        assert!(k >= 1, "k must be at least 1");
        let exhausted = k > self.len();
        let mut saturated = false;
        let Some(root) = self.root else {
            return KnnResult {
                neighbors: Vec::new(),
                exhausted,
                saturated,
            };
        };
        let kernel = self.kernel;
        let mut frontier = BinaryHeap::new();
        let mut order = 0u64;
        frontier.push(Reverse(Frontier(HeapEntry::root(root), order)));
        let mut best: BinaryHeap<Candidate<D>> = BinaryHeap::with_capacity(k + 1);
        let mut seq = 0u64;
        let mut dists = Vec::new();
        let mut push = |frontier: &mut BinaryHeap<_>, e: HeapEntry<D>| {
            order += 1;
            frontier.push(Reverse(Frontier(e, order)));
        };
        while let Some(Reverse(Frontier(e, _))) = frontier.pop() {
            let bound = (best.len() == k).then(|| best.peek().unwrap().dist);
            observe(&e, bound);
            if bound.is_some_and(|b| e.dist >= b) {
                break;
            }
            if e.is_group() {
                let v = self.inner(e.node);
                let (node, rest) = pop_group(v, q, &e);
                push(&mut frontier, node);
                if let Some(r) = rest {
                    push(&mut frontier, r);
                }
                continue;
            }
            stats.nodes_visited += 1;
            if e.node.is_leaf() {
                let leaf = self.leaf(e.node);
                stats.leaves_scanned += 1;
                stats.points_compared += leaf.len() as u64;
                stats.dims_compared += D as u64;
                saturated |= leaf.sq_distances_into(kernel, q, &mut dists);
                for (i, &dist) in dists.iter().enumerate() {
                    if best.len() < k {
                        best.push(Candidate { dist, seq, point: leaf.point(i) });
                    } else if dist < best.peek().unwrap().dist {
                        best.pop();
                        best.push(Candidate { dist, seq, point: leaf.point(i) });
                    }
                    seq += 1;
                }
            } else {
                let v = self.inner(e.node);
                let (node, left, right) = expand_inner_knn(v, e.node, kernel, q, &e.delta);
                push(&mut frontier, node);
                for g in [left, right].into_iter().flatten() {
                    if best.len() < k || g.dist < best.peek().unwrap().dist {
                        push(&mut frontier, g);
                    }
                }
            }
        }
        let mut neighbors: Vec<Candidate<D>> = best.into_vec();
        neighbors.sort();
        KnnResult {
            neighbors: neighbors.into_iter().map(|c| Neighbor { point: c.point, dist: c.dist }).collect(),
            exhausted,
            saturated,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::BuildConfig;
    use crate::kernel::SimdMode;
    use crate::node::Layout;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn node_10_20_30() -> InnerNode {
        let kids: Vec<NodeRef> = (0..4).map(NodeRef::leaf).collect();
        InnerNode::new(Layout::N64, 0, 0, &[10, 20, 30], &kids)
    }

    /// Distance from `x` to the integer interval `[lo, hi)` (continuous bound).
    fn interval_gap(x: u64, lo: u64, hi: Option<u64>) -> u64 {
        match hi {
            _ if x < lo => lo - x,
            Some(h) if x >= h => x - h,
            _ => 0,
        }
    }

    #[test]
    fn expand_example() {
        let v = node_10_20_30();
        let (node, left, right) = expand_inner_knn(&v, NodeRef::inner(0), Kernel::Scalar, &[15u64], &[0]);
        assert_eq!((node.idx, node.dist, node.delta), (1, 0, [0]));
        let left = left.unwrap();
        assert_eq!(left.kind, EntryKind::Group { first: 0, last: 0, side: Side::Left });
        assert_eq!(left.dist, 25);
        let right = right.unwrap();
        assert_eq!(right.kind, EntryKind::Group { first: 2, last: 3, side: Side::Right });
        assert_eq!(right.dist, 25);

        let (n2, rest) = pop_group(&v, &[15u64], &right);
        assert_eq!((n2.idx, n2.dist, n2.kind), (2, 25, EntryKind::Node));
        assert_eq!(n2.node, NodeRef::leaf(2));
        let rest = rest.unwrap();
        assert_eq!(rest.kind, EntryKind::Group { first: 3, last: 3, side: Side::Right });
        assert_eq!(rest.dist, 225);
        let (n3, none) = pop_group(&v, &[15u64], &rest);
        assert_eq!((n3.idx, n3.dist), (3, 225));
        assert!(none.is_none());
    }

    #[test]
    fn expand_edges() {
        let v = node_10_20_30();
        let (node, left, right) = expand_inner_knn(&v, NodeRef::inner(0), Kernel::Scalar, &[3u64], &[0]);
        assert_eq!(node.idx, 0);
        assert!(left.is_none());
        assert_eq!(right.unwrap().kind, EntryKind::Group { first: 1, last: 3, side: Side::Right });
        let (node, left, right) = expand_inner_knn(&v, NodeRef::inner(0), Kernel::Scalar, &[30u64], &[0]);
        assert_eq!(node.idx, 3);
        assert!(right.is_none());
        assert_eq!(left.unwrap().kind, EntryKind::Group { first: 0, last: 2, side: Side::Left });
    }

    #[test]
    fn group_distances_match_interval_oracle() {
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..2000 {
            let n = rng.gen_range(1..8);
            let mut codes: Vec<u64> = (0..n).map(|_| rng.gen_range(0..1000)).collect();
            codes.sort();
            codes.dedup();
            let kids: Vec<NodeRef> = (0..=codes.len()).map(NodeRef::leaf).collect();
            let v = InnerNode::new(Layout::N64, 1, 0, &codes, &kids);
            let q = [rng.gen_range(0..1100u64), rng.gen_range(0..1100u64)];
            let inherited = [rng.gen_range(0..50u64), rng.gen_range(0..50u64)];
            let (node, left, right) = expand_inner_knn(&v, NodeRef::inner(0), Kernel::Scalar, &q, &inherited);
            let exact = |i: usize| {
                let (lo, hi) = v.child_interval(i);
                let mut delta = inherited;
                delta[1] = delta[1].max(interval_gap(q[1], lo, hi));
                dist_from_delta(&delta)
            };
            assert_eq!(node.dist, exact(node.idx));
            let mut seen = vec![node.idx];
            for g in [left, right].into_iter().flatten() {
                let mut cur = Some(g);
                while let Some(e) = cur {
                    let EntryKind::Group { first, last, .. } = e.kind else { unreachable!() };
                    let min = (first as usize..=last as usize).map(exact).min().unwrap();
                    assert_eq!(e.dist, min);
                    let (n, rest) = pop_group(&v, &q, &e);
                    assert_eq!(n.dist, exact(n.idx));
                    seen.push(n.idx);
                    cur = rest;
                }
            }
            seen.sort();
            assert_eq!(seen, (0..=codes.len()).collect::<Vec<_>>());
        }
    }

    fn random_tree<const D: usize>(n: usize, modulus: u64, seed: u64, cap: usize, simd: SimdMode) -> (SkdTree<D>, Vec<Point<D>>) {
        let mut rng = StdRng::seed_from_u64(seed);
        let pts: Vec<Point<D>> = (0..n)
            .map(|i| Point::new(std::array::from_fn(|_| rng.gen_range(0..modulus)), i as u64))
            .collect();
        let cfg = BuildConfig {
            simd,
            ..BuildConfig::default()
        }
        .with_leaf_capacity(cap);
        (SkdTree::build(pts.clone(), cfg).unwrap(), pts)
    }

    fn scan_range<const D: usize>(pts: &[Point<D>], q: &RangeQuery<D>) -> Vec<Point<D>> {
        let mut v: Vec<_> = pts.iter().filter(|p| q.contains(&p.coords)).copied().collect();
        v.sort();
        v
    }

    #[test]
    fn range_matches_scan_with_and_without_dim_skip() {
        for (seed, modulus) in [(1u64, 1000u64), (2, 7), (3, u64::MAX)] {
            for simd in [SimdMode::Auto, SimdMode::Scalar] {
                let (t, pts) = random_tree::<3>(5000, modulus, seed, 32, simd);
                let mut rng = StdRng::seed_from_u64(seed + 100);
                for _ in 0..200 {
                    let a: [u64; 3] = std::array::from_fn(|_| rng.gen_range(0..modulus));
                    let b: [u64; 3] = std::array::from_fn(|_| rng.gen_range(0..modulus));
                    let q = RangeQuery::new(std::array::from_fn(|d| a[d].min(b[d])), std::array::from_fn(|d| a[d].max(b[d]))).unwrap();
                    let want = scan_range(&pts, &q);
                    for dim_skip in [true, false] {
                        let mut got = Vec::new();
                        t.range_query_with(&q, RangeOptions { dim_skip }, &mut QueryStats::default(), &mut got);
                        got.sort();
                        assert_eq!(got, want);
                    }
                    assert_eq!(t.range_count(&q), want.len());
                }
            }
        }
    }

    #[test]
    fn whole_domain_and_point_queries() {
        let (t, pts) = random_tree::<2>(3000, 1 << 30, 9, 64, SimdMode::Auto);
        assert_eq!(t.range_query(&RangeQuery::everything()).len(), pts.len());
        let p = pts[1234];
        assert_eq!(t.range_query(&RangeQuery::point(p.coords)), vec![p]);
    }

    #[test]
    fn dim_skip_only_changes_counters() {
        let (t, _) = random_tree::<2>(4000, 1000, 4, 32, SimdMode::Auto);
        let q = RangeQuery::new([0, 100], [1000, 400]).unwrap();
        let (mut a, mut b) = (QueryStats::default(), QueryStats::default());
        let (mut ra, mut rb) = (Vec::new(), Vec::new());
        t.range_query_with(&q, RangeOptions { dim_skip: true }, &mut a, &mut ra);
        t.range_query_with(&q, RangeOptions { dim_skip: false }, &mut b, &mut rb);
        assert_eq!(ra, rb);
        assert!(a.dims_compared < b.dims_compared);
        assert_eq!(a.leaves_scanned, b.leaves_scanned);
    }

    fn scan_knn<const D: usize>(pts: &[Point<D>], q: &[u64; D], k: usize) -> Vec<u128> {
        let mut d: Vec<u128> = pts.iter().map(|p| p.sq_dist(q)).collect();
        d.sort();
        d.truncate(k);
        d
    }

    #[test]
    fn knn_matches_scan() {
        for (seed, modulus) in [(1u64, 1000u64), (2, 5), (3, 1 << 60)] {
            let (t, pts) = random_tree::<3>(4000, modulus, seed, 32, SimdMode::Auto);
            let mut rng = StdRng::seed_from_u64(seed);
            for k in [1, 10, 100] {
                for _ in 0..40 {
                    let q: [u64; 3] = std::array::from_fn(|_| rng.gen_range(0..modulus));
                    let r = t.knn(&q, k);
                    assert_eq!(r.distances(), scan_knn(&pts, &q, k));
                    assert!(!r.exhausted);
                    for n in &r.neighbors {
                        assert_eq!(n.point.sq_dist(&q), n.dist);
                    }
                }
            }
        }
    }

    #[test]
    fn knn_edge_cases() {
        let (t, pts) = random_tree::<2>(500, 1 << 20, 8, 16, SimdMode::Auto);
        let p = pts[77];
        let r = t.knn(&p.coords, 1);
        assert_eq!(r.neighbors[0].dist, 0);
        let all = t.knn(&[5, 5], pts.len());
        assert_eq!(all.distances(), scan_knn(&pts, &[5, 5], pts.len()));
        assert!(!all.exhausted);
        let more = t.knn(&[5, 5], pts.len() + 3);
        assert!(more.exhausted);
        assert_eq!(more.neighbors.len(), pts.len());
        let empty = SkdTree::<2>::build(Vec::new(), BuildConfig::default()).unwrap();
        let r = empty.knn(&[1, 1], 3);
        assert!(r.neighbors.is_empty() && r.exhausted);
    }

    #[test]
    fn knn_ties_keep_first_discovered_and_distinct_identities_match() {
        // 1-d line: distinct distances give a unique answer.
        let pts: Vec<Point<1>> = (0..300u64).map(|i| Point::new([i * 2], i)).collect();
        let cfg = BuildConfig::default().with_leaf_capacity(16);
        let t = SkdTree::build(pts, cfg).unwrap();
        let r = t.knn(&[101], 3);
        let ids: Vec<u64> = r.neighbors.iter().map(|n| n.point.id).collect();
        assert_eq!(r.distances(), vec![1, 1, 9]);
        assert!(ids[..2].contains(&50) && ids[..2].contains(&51));
        assert!(ids[2] == 49 || ids[2] == 52);
    }

    #[test]
    fn popped_entries_are_admissible_and_bound_is_monotone() {
        let (t, _) = random_tree::<2>(2000, 500, 11, 16, SimdMode::Auto);
        let mut rng = StdRng::seed_from_u64(12);
        for _ in 0..30 {
            let q = [rng.gen_range(0..600u64), rng.gen_range(0..600u64)];
            let mut last_bound: Option<u128> = None;
            let mut checked = 0;
            t.knn_observed(&q, 7, &mut QueryStats::default(), |e, bound| {
                let members: Vec<NodeRef> = match e.kind {
                    EntryKind::Node => vec![e.node],
                    EntryKind::Group { first, last, .. } => t.inner(e.node).children()[first as usize..=last as usize].to_vec(),
                };
                let truth = members
                    .iter()
                    .flat_map(|&m| t.subtree_points(m))
                    .map(|p| p.sq_dist(&q))
                    .min()
                    .unwrap();
                assert!(e.dist <= truth, "entry {e:?} bound {} > true {truth}", e.dist);
                if let (Some(a), Some(b)) = (last_bound, bound) {
                    assert!(b <= a);
                }
                assert!(!(last_bound.is_some() && bound.is_none()));
                last_bound = bound;
                checked += 1;
            });
            assert!(checked > 1);
        }
    }

    #[test]
    fn scalar_and_auto_agree() {
        let (a, _) = random_tree::<4>(6000, 1 << 40, 21, 32, SimdMode::Auto);
        let (b, _) = random_tree::<4>(6000, 1 << 40, 21, 32, SimdMode::Scalar);
        let mut rng = StdRng::seed_from_u64(22);
        for _ in 0..50 {
            let c: [u64; 4] = std::array::from_fn(|_| rng.gen_range(0..1u64 << 40));
            let q = RangeQuery::new(c.map(|x| x.saturating_sub(1 << 38)), c.map(|x| x + (1 << 38))).unwrap();
            assert_eq!(a.range_query(&q), b.range_query(&q));
            assert_eq!(a.knn(&c, 10), b.knn(&c, 10));
        }
    }
}
