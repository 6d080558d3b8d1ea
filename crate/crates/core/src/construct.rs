//! Top-down bulk loading.
//!
//! Dimensions are ranked once from a sample. Each node then picks a target
//! number of children for its dimension, chooses the splitter precision whose
//! fanout covers that target, and carves its slice with recursive medians:
//! the largest remaining segment is cracked in place around its (quantized)
//! median until enough unique splitters exist. The target is rescaled at every
//! node by how far the node's population drifted from the uniform expectation,
//! so imbalance from ties or quantization is absorbed further down.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{SimdMode, BLOCK};
use crate::model::{CoordKey, Point, Schema};
use crate::node::{node_shift_for_layout, quantize, InnerNode, LeafNode, Layout, NodeRef};
use crate::tree::SkdTree;

/// Which inner-node layouts construction may use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayoutPolicy {
    #[default]
    Auto,
    /// Uncompressed nodes only.
    N64Only,
}

impl std::str::FromStr for LayoutPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(Self::Auto),
            "n64-only" => Ok(Self::N64Only),
            other => Err(format!("unknown layout policy `{other}` (expected auto|n64-only)")),
        }
    }
}

/// Exponents of the two factors in the dimension-ranking score.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankWeights {
    pub unique: f64,
    pub spread: f64,
}

impl Default for RankWeights {
    fn default() -> Self {
        Self {
            unique: 1.0,
            spread: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    /// Leaf capacity `C`.
    pub leaf_capacity: usize,
    /// Values sampled per median estimate.
    pub sample_size: usize,
    pub seed: u64,
    pub layouts: LayoutPolicy,
    pub simd: SimdMode,
    pub rank_weights: RankWeights,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            leaf_capacity: 128,
            sample_size: 4096,
            seed: 0x5eed,
            layouts: LayoutPolicy::Auto,
            simd: SimdMode::Auto,
            rank_weights: RankWeights::default(),
        }
    }
}

impl BuildConfig {
    pub fn with_leaf_capacity(mut self, c: usize) -> Self {
        self.leaf_capacity = c;
        self
    }

    pub fn validate(&self) -> Result<(), BuildError> {
        if self.leaf_capacity < 2 * BLOCK || !self.leaf_capacity.is_multiple_of(BLOCK) {
            return Err(BuildError::LeafCapacity(self.leaf_capacity));
        }
        if self.sample_size == 0 {
            return Err(BuildError::SampleSize);
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BuildError {
    #[error("leaf capacity {0} must be a positive multiple of {BLOCK} and at least {}", 2 * BLOCK)]
    LeafCapacity(usize),
    #[error("median sample size must be positive")]
    SampleSize,
    #[error("dimensionality {0} outside the supported range")]
    Dimensions(usize),
}

/// Orders dimensions by `unique_ratio * spread`, best first; ties keep index order.
///
/// `unique_ratio` is distinct values over sample size and `spread` is the
/// 10%..90% interquantile range normalised by the full range (0 for a constant
/// dimension).
pub fn rank_dimensions<const D: usize>(sample: &[Point<D>], weights: RankWeights) -> [u8; D] {
    assert!(!sample.is_empty(), "ranking needs a non-empty sample");
    let n = sample.len();
    let mut scores = [0.0f64; D];
    let mut vals = Vec::with_capacity(n);
    for (d, score) in scores.iter_mut().enumerate() {
        vals.clear();
        vals.extend(sample.iter().map(|p| p.coords[d]));
        vals.sort_unstable();
        let unique = 1 + vals.windows(2).filter(|w| w[0] != w[1]).count();
        let (min, max) = (vals[0], vals[n - 1]);
        let q = |f: f64| vals[((n - 1) as f64 * f).floor() as usize];
        let spread = if max == min {
            0.0
        } else {
            (q(0.9) - q(0.1)) as f64 / (max - min) as f64
        };
        *score = (unique as f64 / n as f64).powf(weights.unique) * spread.powf(weights.spread);
    }
    let mut order: [u8; D] = std::array::from_fn(|d| d as u8);
    order.sort_by(|&a, &b| scores[b as usize].total_cmp(&scores[a as usize]));
    order
}

/// Target number of slices per dimension: `ceil(N / C) ^ (1 / D)`.
pub fn target_splits(n: usize, leaf_capacity: usize, dims: usize) -> f64 {
    (n.div_ceil(leaf_capacity) as f64).powf(1.0 / dims as f64)
}

/// `ceil` that ignores floating-point noise just above an integer.
fn ceil_children(s: f64) -> usize {
    (s - 1e-9).ceil().max(1.0) as usize
}

/// Layout and child count for a target of `s` slices.
pub fn choose_layout(s: f64, policy: LayoutPolicy) -> (Layout, usize) {
    let k = ceil_children(s).max(2);
    if policy == LayoutPolicy::N64Only {
        return (Layout::N64, k.min(Layout::N64.fanout()));
    }
    match k {
        0..=8 => (Layout::N64, k),
        9..=16 => (Layout::N32, k),
        17..=32 => (Layout::N16, k),
        _ => (Layout::N16, 32),
    }
}

/// Result of carving a slice along one dimension.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MedianSplit {
    /// Stored splitter codes, strictly increasing.
    pub codes: Vec<u64>,
    /// Segment boundaries: segment `i` is `bounds[i]..bounds[i + 1]`.
    pub bounds: Vec<usize>,
}

impl MedianSplit {
    pub fn children(&self) -> usize {
        self.codes.len() + 1
    }

    fn segment_len(&self, i: usize) -> usize {
        self.bounds[i + 1] - self.bounds[i]
    }

    /// Drops splitter `i`, fusing segments `i` and `i + 1`.
    fn merge(&mut self, i: usize) {
        self.codes.remove(i);
        self.bounds.remove(i + 1);
    }
}

/// Partitions `pts` so that every value `< pivot` along `dim` precedes every
/// value `>= pivot`. Returns the size of the lower part. One quicksort step.
pub fn crack<const D: usize>(pts: &mut [Point<D>], dim: usize, pivot: CoordKey) -> usize {
    let (mut i, mut j) = (0, pts.len());
    loop {
        while i < j && pts[i].coords[dim] < pivot {
            i += 1;
        }
        while i < j && pts[j - 1].coords[dim] >= pivot {
            j -= 1;
        }
        if i >= j {
            return i;
        }
        pts.swap(i, j - 1);
        i += 1;
        j -= 1;
    }
}

/// Median of `dim` over `pts`, exact when the slice fits the sample.
fn sample_median<const D: usize>(
    pts: &[Point<D>],
    dim: usize,
    sample_size: usize,
    rng: &mut StdRng,
    scratch: &mut Vec<CoordKey>,
) -> CoordKey {
    scratch.clear();
    if pts.len() <= sample_size {
        scratch.extend(pts.iter().map(|p| p.coords[dim]));
    } else {
        scratch.extend((0..sample_size).map(|_| pts[rng.gen_range(0..pts.len())].coords[dim]));
    }
    let mid = scratch.len() / 2;
    *scratch.select_nth_unstable(mid).1
}

/// Recursive-median carving of `pts` along `dim` into at most `target`
/// segments with splitters quantized by `shift`.
///
/// Repeatedly takes the largest splittable segment, cracks it around its
/// quantized median, and records the splitter. When the median is the
/// segment minimum the cut moves to the next code so ties stay left; if that
/// still leaves an empty side the segment is skipped. Stops at `target - 1`
/// splitters or when nothing is splittable.
pub fn recursive_median_split<const D: usize>(
    pts: &mut [Point<D>],
    dim: usize,
    target: usize,
    shift: u32,
    sample_size: usize,
    rng: &mut StdRng,
) -> MedianSplit {
    assert!(target >= 2);
    let mut split = MedianSplit {
        codes: Vec::with_capacity(target - 1),
        bounds: vec![0, pts.len()],
    };
    let mut splittable = vec![true];
    let mut scratch = Vec::new();
    while split.codes.len() < target - 1 {
        let Some(i) = (0..splittable.len())
            .filter(|&i| splittable[i] && split.segment_len(i) >= 2)
            .max_by_key(|&i| (split.segment_len(i), std::cmp::Reverse(i)))
        else {
            break;
        };
        let (start, end) = (split.bounds[i], split.bounds[i + 1]);
        let seg = &mut pts[start..end];
        let median = sample_median(seg, dim, sample_size, rng, &mut scratch);
        let mut code = quantize(median, shift);
        let mut cut = crack(seg, dim, code << shift);
        if cut == 0 {
            // The median is the segment minimum: cut just above it instead.
            code += 1;
            cut = match code.checked_shl(shift).filter(|&e| e >> shift == code) {
                Some(eff) => crack(seg, dim, eff),
                None => seg.len(),
            };
        }
        if cut == 0 || cut == seg.len() {
            splittable[i] = false;
            continue;
        }
        debug_assert!(i == 0 || split.codes[i - 1] < code);
        debug_assert!(i == split.codes.len() || code < split.codes[i]);
        split.codes.insert(i, code);
        split.bounds.insert(i + 1, start + cut);
        splittable.insert(i + 1, true);
    }
    split
}

/// Construction state carried from a node to its children.
#[derive(Clone, Copy, Debug)]
struct Plan {
    /// Index into `dim_order`.
    dim_pos: usize,
    /// Dimensions finished in the current cycle.
    cycle_done: usize,
    /// Slices per dimension for this cycle.
    s_cycle: f64,
    /// Remaining slices for the current dimension, in expected-population terms.
    s_dim: f64,
    /// Expected population under uniform data and exact splitters.
    m_exp: f64,
}

impl Plan {
    fn fresh(m: usize, c: usize, dims: usize, dim_pos: usize) -> Self {
        let s = target_splits(m, c, dims);
        Plan {
            dim_pos,
            cycle_done: 0,
            s_cycle: s,
            s_dim: s,
            m_exp: m as f64,
        }
    }

    fn next_dim(self, dims: usize) -> Self {
        Plan {
            dim_pos: (self.dim_pos + 1) % dims,
            cycle_done: self.cycle_done + 1,
            s_dim: self.s_cycle,
            ..self
        }
    }

    /// Adjusted target `S' = S * (M / M_exp)`.
    fn adjusted(&self, m: usize) -> f64 {
        self.s_dim * m as f64 / self.m_exp
    }
}

/// Recursive builder over a tree's arenas.
pub(crate) struct Builder<'t, const D: usize> {
    tree: &'t mut SkdTree<D>,
    rng: StdRng,
}

impl<'t, const D: usize> Builder<'t, D> {
    pub(crate) fn new(tree: &'t mut SkdTree<D>, salt: u64) -> Self {
        let rng = StdRng::seed_from_u64(tree.config.seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        Builder { tree, rng }
    }

    fn capacity(&self) -> usize {
        self.tree.schema.leaf_capacity
    }

    /// Builds a subtree for `pts`, starting a fresh plan at dimension
    /// `dim_order[dim_pos]`.
    pub(crate) fn build_subtree(&mut self, pts: &mut [Point<D>], dim_pos: usize) -> NodeRef {
        let plan = Plan::fresh(pts.len(), self.capacity(), D, dim_pos);
        self.build_node(pts, plan)
    }

    fn build_node(&mut self, pts: &mut [Point<D>], mut plan: Plan) -> NodeRef {
        let m = pts.len();
        let c = self.capacity();
        // anything up to the construction-time heavy threshold is a light leaf
        if m <= c * 6 / 5 {
            return self.tree.alloc_leaf(LeafNode::from_points(pts));
        }
        let mut failed = 0;
        loop {
            if plan.cycle_done >= D {
                plan = Plan::fresh(m, c, D, plan.dim_pos);
            }
            let dim = self.tree.schema.dim_order[plan.dim_pos] as usize;
            let s_adj = plan.adjusted(m);
            if let Some((layout, shift, k, mut split)) = self.split_node(pts, dim, s_adj) {
                self.merge_small_segments(&mut split);
                let mut children = Vec::with_capacity(split.children());
                for i in 0..split.children() {
                    let seg = &mut pts[split.bounds[i]..split.bounds[i + 1]];
                    let mut child = Plan {
                        s_dim: plan.s_dim / k as f64,
                        m_exp: plan.m_exp / k as f64,
                        ..plan
                    };
                    if child.adjusted(seg.len()) < 1.5 {
                        child = child.next_dim(D);
                    }
                    children.push(self.build_node(seg, child));
                }
                let node = InnerNode::new(layout, dim, shift, &split.codes, &children);
                return self.tree.alloc_inner(node);
            }
            failed += 1;
            if failed >= D {
                // Every dimension is constant on this slice.
                return self.tree.alloc_leaf(LeafNode::from_points(pts));
            }
            plan = plan.next_dim(D);
        }
    }

    /// Tries the layout chosen for `s_adj`, widening on splitter collisions.
    /// Returns the attempt with the most children, if any produced a split.
    fn split_node(&mut self, pts: &mut [Point<D>], dim: usize, s_adj: f64) -> Option<(Layout, u32, usize, MedianSplit)> {
        let (first, k) = choose_layout(s_adj, self.tree.config.layouts);
        let max = pts.iter().map(|p| p.coords[dim]).max().unwrap_or(0);
        let mut layout = first;
        let mut best: Option<(Layout, u32, usize, MedianSplit)> = None;
        loop {
            let target = k.min(layout.fanout());
            let shift = if layout.is_compressed() { node_shift_for_layout(max, layout) } else { 0 };
            let sample = self.tree.config.sample_size;
            let split = recursive_median_split(pts, dim, target, shift, sample, &mut self.rng);
            let full = split.children() == target;
            if split.children() > best.as_ref().map_or(1, |b| b.3.children()) {
                best = Some((layout, shift, target, split));
            }
            if full {
                break;
            }
            match layout.wider() {
                Some(w) => layout = w,
                None => break,
            }
        }
        let (layout, shift, target, split) = best?;
        // The slice was re-cracked by later attempts; redo the winning one.
        let sample = self.tree.config.sample_size;
        let split = if recursive_median_split_matches(pts, dim, shift, &split) {
            split
        } else {
            recursive_median_split(pts, dim, target, shift, sample, &mut self.rng)
        };
        (split.children() >= 2).then_some((layout, shift, target, split))
    }

    /// Fuses neighbouring leaf-sized segments when one holds fewer than `C/2`
    /// points and the pair still fits in `C`.
    fn merge_small_segments(&self, split: &mut MedianSplit) {
        let c = self.capacity();
        let mut i = 0;
        while i < split.codes.len() {
            let (a, b) = (split.segment_len(i), split.segment_len(i + 1));
            if (a < c / 2 || b < c / 2) && a + b <= c {
                split.merge(i);
            } else {
                i += 1;
            }
        }
    }
}

/// True if `pts` is still partitioned exactly as `split` describes.
fn recursive_median_split_matches<const D: usize>(pts: &[Point<D>], dim: usize, shift: u32, split: &MedianSplit) -> bool {
    (0..split.children()).all(|i| {
        let lo = if i == 0 { 0 } else { split.codes[i - 1] << shift };
        let hi = split.codes.get(i).map(|&c| c << shift);
        pts[split.bounds[i]..split.bounds[i + 1]]
            .iter()
            .all(|p| p.coords[dim] >= lo && hi.is_none_or(|h| p.coords[dim] < h))
    })
}

impl<const D: usize> SkdTree<D> {
    /// Bulk-loads a tree. An empty input yields an empty tree.
    pub fn build(points: Vec<Point<D>>, config: BuildConfig) -> Result<Self, BuildError> {
        config.validate()?;
        Self::build_unchecked(points, config)
    }

    /// Like [`SkdTree::build`] but accepts any leaf capacity of at least 1.
    /// Meant for tiny hand-sized instances.
    pub fn build_relaxed(points: Vec<Point<D>>, config: BuildConfig) -> Result<Self, BuildError> {
        if config.leaf_capacity == 0 {
            return Err(BuildError::LeafCapacity(0));
        }
        if config.sample_size == 0 {
            return Err(BuildError::SampleSize);
        }
        Self::build_unchecked(points, config)
    }

    fn build_unchecked(mut points: Vec<Point<D>>, config: BuildConfig) -> Result<Self, BuildError> {
        if D == 0 || D > crate::model::MAX_DIMS {
            return Err(BuildError::Dimensions(D));
        }
        let dim_order = if points.is_empty() {
            std::array::from_fn(|d| d as u8)
        } else {
            let mut rng = StdRng::seed_from_u64(config.seed);
            let sample: Vec<Point<D>> = if points.len() <= config.sample_size {
                points.clone()
            } else {
                (0..config.sample_size).map(|_| points[rng.gen_range(0..points.len())]).collect()
            };
            rank_dimensions(&sample, config.rank_weights)
        };
        let schema = Schema::new(config.leaf_capacity, dim_order);
        let mut tree = SkdTree::empty(schema, config);
        if !points.is_empty() {
            let root = Builder::new(&mut tree, 0).build_subtree(&mut points, 0);
            tree.root = Some(root);
        }
        tree.refresh_thresholds();
        tree.classify_all_leaves();
        Ok(tree)
    }
}
