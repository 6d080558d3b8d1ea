//! The tree: node arenas, schema, leaf statistics and thresholds.
//!
//! Concurrency: queries take `&self` and may run from any number of threads.
//! Updates take `&mut self`; there is no internal locking.

use serde::{Deserialize, Serialize};

use crate::construct::BuildConfig;
use crate::kernel::Kernel;
use crate::model::{CoordKey, Point, Schema};
use crate::node::{InnerNode, LeafKind, LeafNode, Layout, NodeRef};

/// Leaf count and total point count.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeStats {
    pub leaf_count: usize,
    pub total_points: usize,
}

/// Leaf classification thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafThresholds {
    /// Heavy threshold `T_h`.
    pub heavy: usize,
    /// Outlier threshold `T_o = 2 * T_h`.
    pub outlier: usize,
    /// Mean leaf occupancy.
    pub mean_capacity: f64,
}

impl LeafThresholds {
    /// `T_h = floor(1.2 * max(mean, C))`, evaluated in exact integer arithmetic.
    pub fn compute(total_points: usize, leaf_count: usize, leaf_capacity: usize) -> Self {
        let leaves = leaf_count.max(1) as u128;
        let total = total_points as u128;
        let cap = leaf_capacity as u128;
        let heavy = if total > cap * leaves {
            6 * total / (5 * leaves)
        } else {
            6 * cap / 5
        } as usize;
        LeafThresholds {
            heavy,
            outlier: 2 * heavy,
            mean_capacity: total_points as f64 / leaves as f64,
        }
    }

    /// Class of a freshly built or touched leaf with `len` points.
    pub fn classify(&self, len: usize) -> LeafKind {
        if len > self.outlier {
            LeafKind::Outlier
        } else if len > self.heavy {
            LeafKind::Heavy
        } else {
            LeafKind::Light
        }
    }
}

/// Structural summary of a tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureStats {
    pub points: usize,
    pub leaves: usize,
    pub inner_nodes: usize,
    pub height: usize,
    pub avg_leaf_capacity: f64,
    pub light_leaves: usize,
    pub heavy_leaves: usize,
    pub outlier_leaves: usize,
    pub light_pct: f64,
    pub heavy_pct: f64,
    pub outlier_pct: f64,
    pub n64_nodes: usize,
    pub n32_nodes: usize,
    pub n16_nodes: usize,
    pub root_layout: Option<Layout>,
}

impl StructureStats {
    /// Fraction of inner nodes using a compressed layout.
    pub fn compressed_fraction(&self) -> f64 {
        if self.inner_nodes == 0 {
            0.0
        } else {
            (self.n32_nodes + self.n16_nodes) as f64 / self.inner_nodes as f64
        }
    }
}

/// The slicing kd-tree.
#[derive(Clone, Debug)]
pub struct SkdTree<const D: usize> {
    pub(crate) inners: Vec<InnerNode>,
    pub(crate) leaves: Vec<LeafNode<D>>,
    free_inners: Vec<usize>,
    free_leaves: Vec<usize>,
    pub(crate) root: Option<NodeRef>,
    pub(crate) schema: Schema<D>,
    pub(crate) config: BuildConfig,
    pub(crate) stats: TreeStats,
    pub(crate) thresholds: LeafThresholds,
    pub(crate) kernel: Kernel,
}

impl<const D: usize> SkdTree<D> {
    pub(crate) fn empty(schema: Schema<D>, config: BuildConfig) -> Self {
        let kernel = Kernel::for_mode(config.simd);
        SkdTree {
            inners: Vec::new(),
            leaves: Vec::new(),
            free_inners: Vec::new(),
            free_leaves: Vec::new(),
            root: None,
            thresholds: LeafThresholds::compute(0, 0, schema.leaf_capacity),
            schema,
            config,
            stats: TreeStats::default(),
            kernel,
        }
    }

    pub fn len(&self) -> usize {
        self.stats.total_points
    }

    pub fn is_empty(&self) -> bool {
        self.stats.total_points == 0
    }

    pub fn schema(&self) -> &Schema<D> {
        &self.schema
    }

    pub fn config(&self) -> &BuildConfig {
        &self.config
    }

    pub fn stats(&self) -> TreeStats {
        self.stats
    }

    pub fn thresholds(&self) -> LeafThresholds {
        self.thresholds
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    /// Switches the per-node primitives. Results do not depend on the kernel.
    pub fn set_kernel(&mut self, kernel: Kernel) {
        self.kernel = kernel;
    }

    pub fn root(&self) -> Option<NodeRef> {
        self.root
    }

    pub fn inner(&self, r: NodeRef) -> &InnerNode {
        debug_assert!(!r.is_leaf());
        &self.inners[r.index()]
    }

    pub fn leaf(&self, r: NodeRef) -> &LeafNode<D> {
        debug_assert!(r.is_leaf());
        &self.leaves[r.index()]
    }

    pub(crate) fn inner_mut(&mut self, r: NodeRef) -> &mut InnerNode {
        &mut self.inners[r.index()]
    }

    pub(crate) fn leaf_mut(&mut self, r: NodeRef) -> &mut LeafNode<D> {
        &mut self.leaves[r.index()]
    }

    pub(crate) fn alloc_inner(&mut self, node: InnerNode) -> NodeRef {
        match self.free_inners.pop() {
            Some(i) => {
                self.inners[i] = node;
                NodeRef::inner(i)
            }
            None => {
                self.inners.push(node);
                NodeRef::inner(self.inners.len() - 1)
            }
        }
    }

    /// Stores a leaf and counts it in the statistics.
    pub(crate) fn alloc_leaf(&mut self, leaf: LeafNode<D>) -> NodeRef {
        self.stats.leaf_count += 1;
        self.stats.total_points += leaf.len();
        match self.free_leaves.pop() {
            Some(i) => {
                self.leaves[i] = leaf;
                NodeRef::leaf(i)
            }
            None => {
                self.leaves.push(leaf);
                NodeRef::leaf(self.leaves.len() - 1)
            }
        }
    }

    /// Releases a leaf and removes it from the statistics.
    pub(crate) fn free_leaf(&mut self, r: NodeRef) -> LeafNode<D> {
        let leaf = std::mem::replace(&mut self.leaves[r.index()], LeafNode::from_points(&[]));
        self.stats.leaf_count -= 1;
        self.stats.total_points -= leaf.len();
        self.free_leaves.push(r.index());
        leaf
    }

    pub(crate) fn free_inner(&mut self, r: NodeRef) {
        self.free_inners.push(r.index());
    }

    /// Frees every node below and including `r`, returning its points.
    pub(crate) fn take_subtree(&mut self, r: NodeRef) -> Vec<Point<D>> {
        let mut out = Vec::new();
        let mut stack = vec![r];
        while let Some(n) = stack.pop() {
            if n.is_leaf() {
                out.extend(self.free_leaf(n).points());
            } else {
                stack.extend_from_slice(self.inner(n).children());
                self.free_inner(n);
            }
        }
        out
    }

    /// Points stored below `r`.
    pub fn subtree_points(&self, r: NodeRef) -> Vec<Point<D>> {
        let mut out = Vec::new();
        self.for_each_leaf_under(r, |l| out.extend(l.points()));
        out
    }

    pub(crate) fn for_each_leaf_under(&self, r: NodeRef, mut f: impl FnMut(&LeafNode<D>)) {
        let mut stack = vec![r];
        while let Some(n) = stack.pop() {
            if n.is_leaf() {
                f(self.leaf(n));
            } else {
                stack.extend_from_slice(self.inner(n).children());
            }
        }
    }

    /// Every stored point, in leaf order.
    pub fn points(&self) -> Vec<Point<D>> {
        self.root.map_or_else(Vec::new, |r| self.subtree_points(r))
    }

    /// Recomputes the mean leaf occupancy and both thresholds from the
    /// statistics. Leaf classes are not rewritten.
    pub fn refresh_thresholds(&mut self) -> LeafThresholds {
        self.thresholds = LeafThresholds::compute(
            self.stats.total_points,
            self.stats.leaf_count,
            self.schema.leaf_capacity,
        );
        self.thresholds
    }

    /// Sets every leaf's class from the current thresholds.
    pub(crate) fn classify_all_leaves(&mut self) {
        let Some(root) = self.root else { return };
        let mut stack = vec![root];
        while let Some(n) = stack.pop() {
            if n.is_leaf() {
                let t = self.thresholds;
                let leaf = self.leaf_mut(n);
                leaf.kind = t.classify(leaf.len());
                leaf.outlier_level = u32::from(leaf.kind == LeafKind::Outlier);
            } else {
                stack.extend_from_slice(self.inner(n).children());
            }
        }
    }

    /// Node count per layout, leaf class counts, height and occupancy.
    pub fn structure_stats(&self) -> StructureStats {
        let mut s = StructureStats {
            points: self.stats.total_points,
            leaves: 0,
            inner_nodes: 0,
            height: 0,
            avg_leaf_capacity: 0.0,
            light_leaves: 0,
            heavy_leaves: 0,
            outlier_leaves: 0,
            light_pct: 0.0,
            heavy_pct: 0.0,
            outlier_pct: 0.0,
            n64_nodes: 0,
            n32_nodes: 0,
            n16_nodes: 0,
            root_layout: self.root.filter(|r| !r.is_leaf()).map(|r| self.inner(r).layout()),
        };
        let Some(root) = self.root else { return s };
        let mut stack = vec![(root, 1usize)];
        while let Some((n, depth)) = stack.pop() {
            s.height = s.height.max(depth);
            if n.is_leaf() {
                s.leaves += 1;
                match self.leaf(n).kind() {
                    LeafKind::Light => s.light_leaves += 1,
                    LeafKind::Heavy => s.heavy_leaves += 1,
                    LeafKind::Outlier => s.outlier_leaves += 1,
                }
            } else {
                let v = self.inner(n);
                s.inner_nodes += 1;
                match v.layout() {
                    Layout::N64 => s.n64_nodes += 1,
                    Layout::N32 => s.n32_nodes += 1,
                    Layout::N16 => s.n16_nodes += 1,
                }
                stack.extend(v.children().iter().map(|&c| (c, depth + 1)));
            }
        }
        if s.leaves > 0 {
            let pct = |n: usize| 100.0 * n as f64 / s.leaves as f64;
            s.avg_leaf_capacity = s.points as f64 / s.leaves as f64;
            s.light_pct = pct(s.light_leaves);
            s.heavy_pct = pct(s.heavy_leaves);
            s.outlier_pct = pct(s.outlier_leaves);
        }
        s
    }

    /// Walks the whole tree and checks every structural invariant: splitter
    /// blocks, partition soundness against the inherited intervals, exact
    /// leaf boxes, non-empty leaves and the statistics.
    pub fn check_invariants(&self) -> Result<(), String> {
        let Some(root) = self.root else {
            return if self.stats == TreeStats::default() {
                Ok(())
            } else {
                Err(format!("empty tree with stats {:?}", self.stats))
            };
        };
        let mut leaves = 0;
        let mut points = 0;
        // (node, per-dimension lower bound, per-dimension exclusive upper bound)
        type Bounds<const D: usize> = ([CoordKey; D], [Option<CoordKey>; D]);
        let mut stack: Vec<(NodeRef, Bounds<D>)> = vec![(root, ([0; D], [None; D]))];
        while let Some((n, (lo, hi))) = stack.pop() {
            if n.is_leaf() {
                let leaf = self.leaf(n);
                leaf.check().map_err(|e| format!("{n:?}: {e}"))?;
                if leaf.is_empty() {
                    return Err(format!("{n:?} is empty"));
                }
                for p in leaf.points() {
                    for d in 0..D {
                        let x = p.coords[d];
                        if x < lo[d] || hi[d].is_some_and(|h| x >= h) {
                            return Err(format!("{p:?} in {n:?} outside its partition on dim {d}"));
                        }
                    }
                }
                leaves += 1;
                points += leaf.len();
                continue;
            }
            let v = self.inner(n);
            v.check().map_err(|e| format!("{n:?}: {e}"))?;
            if v.split_dim() >= D {
                return Err(format!("{n:?} splits unknown dimension {}", v.split_dim()));
            }
            let d = v.split_dim();
            for (i, &c) in v.children().iter().enumerate() {
                let (clo, chi) = v.child_interval(i);
                let (mut l, mut h) = (lo, hi);
                l[d] = l[d].max(clo);
                h[d] = match (h[d], chi) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    (a, b) => a.or(b),
                };
                stack.push((c, (l, h)));
            }
        }
        if leaves != self.stats.leaf_count || points != self.stats.total_points {
            return Err(format!(
                "stats {:?} but walked {leaves} leaves / {points} points",
                self.stats
            ));
        }
        Ok(())
    }
}
