//! Ground truth: exhaustive scans and a plain binary kd-tree.

use std::collections::{BinaryHeap, HashMap};

use crate::model::{CoordKey, Point, RangeQuery};

/// Unordered bag of live points.
#[derive(Clone, Debug, Default)]
pub struct FlatStore<const D: usize> {
    points: Vec<Point<D>>,
    /// Slot of one copy of each point.
    slots: HashMap<Point<D>, usize>,
}

impl<const D: usize> FlatStore<D> {
    pub fn new(points: Vec<Point<D>>) -> Self {
        let mut s = Self::default();
        for p in points {
            s.push(p);
        }
        s
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point<D>] {
        &self.points
    }

    pub fn push(&mut self, p: Point<D>) {
        self.slots.entry(p).or_insert(self.points.len());
        self.points.push(p);
    }

    /// Removes one copy of `p` by swapping in the last point.
    pub fn remove(&mut self, p: &Point<D>) -> bool {
        let i = match self.slots.remove(p) {
            Some(i) => i,
            None => match self.points.iter().position(|x| x == p) {
                Some(i) => i,
                None => return false,
            },
        };
        let last = self.points.len() - 1;
        self.points.swap_remove(i);
        if i < last {
            let moved = self.points[i];
            if self.slots.get(&moved) == Some(&last) {
                self.slots.insert(moved, i);
            }
        }
        true
    }

    pub fn scan_range(&self, q: &RangeQuery<D>) -> Vec<Point<D>> {
        scan_range(&self.points, q)
    }

    pub fn scan_count(&self, q: &RangeQuery<D>) -> usize {
        self.points.iter().filter(|p| q.contains(&p.coords)).count()
    }

    pub fn scan_knn(&self, q: &[CoordKey; D], k: usize) -> Vec<(Point<D>, u128)> {
        scan_knn(&self.points, q, k)
    }
}

/// Every point inside `q`, in input order.
pub fn scan_range<const D: usize>(points: &[Point<D>], q: &RangeQuery<D>) -> Vec<Point<D>> {
    points.iter().filter(|p| q.contains(&p.coords)).copied().collect()
}

/// The `k` nearest points with their squared distances, ascending; equal
/// distances keep input order.
pub fn scan_knn<const D: usize>(points: &[Point<D>], q: &[CoordKey; D], k: usize) -> Vec<(Point<D>, u128)> {
    let dists: Vec<u128> = points.iter().map(|p| p.sq_dist(q)).collect();
    let kth = if k == 0 {
        return Vec::new();
    } else if k < dists.len() {
        let mut tmp = dists.clone();
        *tmp.select_nth_unstable(k - 1).1
    } else {
        u128::MAX
    };
    let mut out: Vec<(Point<D>, u128)> = points.iter().zip(&dists).filter(|(_, &d)| d <= kth).map(|(p, &d)| (*p, d)).collect();
    out.sort_by_key(|&(_, d)| d);
    out.truncate(k);
    out
}

#[derive(Clone, Debug)]
enum KdNode<const D: usize> {
    Leaf(Vec<Point<D>>),
    /// Points with `coords[dim] < split` go left.
    Inner {
        dim: usize,
        split: CoordKey,
        left: Box<KdNode<D>>,
        right: Box<KdNode<D>>,
    },
}

/// Binary kd-tree with median splits on alternating axes and leaf buckets.
#[derive(Clone, Debug)]
pub struct BinaryKdTree<const D: usize> {
    root: KdNode<D>,
    len: usize,
}

impl<const D: usize> BinaryKdTree<D> {
    pub fn build(mut points: Vec<Point<D>>, bucket: usize) -> Self {
        assert!(bucket >= 1);
        let len = points.len();
        let root = Self::build_node(&mut points, 0, bucket);
        BinaryKdTree { root, len }
    }

    fn build_node(pts: &mut [Point<D>], depth: usize, bucket: usize) -> KdNode<D> {
        if pts.len() <= bucket {
            return KdNode::Leaf(pts.to_vec());
        }
        for step in 0..D {
            let dim = (depth + step) % D;
            let mid = pts.len() / 2;
            pts.select_nth_unstable_by_key(mid, |p| p.coords[dim]);
            let split = pts[mid].coords[dim];
            let cut = crate::construct::crack(pts, dim, split);
            if cut == 0 {
                // median equals the minimum; try the first larger value
                let cut = crate::construct::crack(pts, dim, split.saturating_add(1));
                if cut == pts.len() {
                    continue;
                }
                let (l, r) = pts.split_at_mut(cut);
                return KdNode::Inner {
                    dim,
                    split: split + 1,
                    left: Box::new(Self::build_node(l, depth + step + 1, bucket)),
                    right: Box::new(Self::build_node(r, depth + step + 1, bucket)),
                };
            }
            let (l, r) = pts.split_at_mut(cut);
            return KdNode::Inner {
                dim,
                split,
                left: Box::new(Self::build_node(l, depth + step + 1, bucket)),
                right: Box::new(Self::build_node(r, depth + step + 1, bucket)),
            };
        }
        KdNode::Leaf(pts.to_vec())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn range(&self, q: &RangeQuery<D>) -> Vec<Point<D>> {
        let mut out = Vec::new();
        self.range_visit(q, |p| out.push(*p));
        out
    }

    pub fn count(&self, q: &RangeQuery<D>) -> usize {
        let mut n = 0;
        self.range_visit(q, |_| n += 1);
        n
    }

    fn range_visit(&self, q: &RangeQuery<D>, mut emit: impl FnMut(&Point<D>)) {
        let mut stack = vec![&self.root];
        while let Some(n) = stack.pop() {
            match n {
                KdNode::Leaf(pts) => pts.iter().filter(|p| q.contains(&p.coords)).for_each(&mut emit),
                KdNode::Inner { dim, split, left, right } => {
                    if q.hi[*dim] >= *split {
                        stack.push(right);
                    }
                    if q.lo[*dim] < *split {
                        stack.push(left);
                    }
                }
            }
        }
    }

    /// The `k` nearest points, ascending by squared distance.
    pub fn knn(&self, q: &[CoordKey; D], k: usize) -> Vec<(Point<D>, u128)> {
        let mut best: BinaryHeap<(u128, Point<D>)> = BinaryHeap::new();
        self.knn_node(&self.root, q, k, [0; D], &mut best);
        let mut v: Vec<(Point<D>, u128)> = best.into_iter().map(|(d, p)| (p, d)).collect();
        v.sort_by_key(|&(p, d)| (d, p));
        v
    }

    fn knn_node(&self, n: &KdNode<D>, q: &[CoordKey; D], k: usize, gaps: [u64; D], best: &mut BinaryHeap<(u128, Point<D>)>) {
        let lower: u128 = gaps.iter().map(|&g| g as u128 * g as u128).fold(0, u128::saturating_add);
        if best.len() == k && lower >= best.peek().unwrap().0 {
            return;
        }
        match n {
            KdNode::Leaf(pts) => {
                for p in pts {
                    let d = p.sq_dist(q);
                    if best.len() < k {
                        best.push((d, *p));
                    } else if d < best.peek().unwrap().0 {
                        best.pop();
                        best.push((d, *p));
                    }
                }
            }
            KdNode::Inner { dim, split, left, right } => {
                let x = q[*dim];
                let (near, far, gap) = if x < *split {
                    (left, right, *split - x)
                } else {
                    (right, left, x - *split)
                };
                self.knn_node(near, q, k, gaps, best);
                let mut g = gaps;
                g[*dim] = g[*dim].max(gap);
                self.knn_node(far, q, k, g, best);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn scan_basics() {
        let s = FlatStore::<2>::default();
        assert!(s.scan_range(&RangeQuery::everything()).is_empty());
        let pts: Vec<Point<2>> = (0..5).map(|i| Point::new([i, i], i)).collect();
        let s = FlatStore::new(pts.clone());
        assert_eq!(s.scan_range(&RangeQuery::everything()), pts);
        assert_eq!(s.scan_knn(&[3, 3], 1), vec![(pts[3], 0)]);
    }

    #[test]
    fn collinear_knn_by_hand() {
        // ordinals 0..9 scaled by 10 on one dim; query at 34 sits between 3 and 4.
        let pts: Vec<Point<2>> = (0..10).map(|i| Point::new([i * 10, 0], i)).collect();
        let got: Vec<u64> = scan_knn(&pts, &[34, 0], 3).iter().map(|(p, _)| p.id).collect();
        assert_eq!(got, vec![3, 4, 2]);
    }

    #[test]
    fn knn_ties_follow_insertion_order() {
        let pts = vec![Point::new([5u64], 9), Point::new([3], 1), Point::new([7], 4)];
        let got: Vec<u64> = scan_knn(&pts, &[5], 2).iter().map(|(p, _)| p.id).collect();
        assert_eq!(got, vec![9, 1]);
    }

    #[test]
    fn remove_swaps_last() {
        let pts: Vec<Point<1>> = (0..4).map(|i| Point::new([i], i)).collect();
        let mut s = FlatStore::new(pts);
        assert!(s.remove(&Point::new([1], 1)));
        assert_eq!(s.points()[1], Point::new([3], 3));
        assert!(!s.remove(&Point::new([1], 1)));
    }

    #[test]
    fn kdtree_agrees_with_scan() {
        let mut rng = StdRng::seed_from_u64(1);
        for (n, modulus) in [(0usize, 10u64), (5, 10), (3000, 4), (3000, 1 << 50)] {
            let pts: Vec<Point<3>> = (0..n)
                .map(|i| Point::new(std::array::from_fn(|_| rng.gen_range(0..modulus)), i as u64))
                .collect();
            let kd = BinaryKdTree::build(pts.clone(), 16);
            assert_eq!(kd.len(), n);
            for _ in 0..100 {
                let a: [u64; 3] = std::array::from_fn(|_| rng.gen_range(0..modulus));
                let b: [u64; 3] = std::array::from_fn(|_| rng.gen_range(0..modulus));
                let q = RangeQuery::new(std::array::from_fn(|d| a[d].min(b[d])), std::array::from_fn(|d| a[d].max(b[d]))).unwrap();
                let mut x = kd.range(&q);
                let mut y = scan_range(&pts, &q);
                x.sort();
                y.sort();
                assert_eq!(x, y);
                assert_eq!(kd.count(&q), y.len());
                let k = rng.gen_range(1..20);
                let dk: Vec<u128> = kd.knn(&a, k).iter().map(|x| x.1).collect();
                let ds: Vec<u128> = scan_knn(&pts, &a, k).iter().map(|x| x.1).collect();
                assert_eq!(dk, ds);
            }
        }
    }
}
