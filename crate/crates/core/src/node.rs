//! Inner and leaf node layouts.
//!
//! An inner node keeps its sorted splitters in one 64-byte block at one of
//! three precisions. Narrow layouts store only the high bits of each splitter:
//! the stored code is `splitter >> shift` and the value used for partitioning
//! is `code << shift`. Comparing `x >> shift` against the code is the same as
//! comparing `x` against the widened splitter, so query keys are shifted
//! instead of splitters being expanded.
//!
//! Leaves store points column by column, padded to a multiple of [`BLOCK`]
//! lanes by repeating the last point. An occupancy mask keeps padding lanes out
//! of every result.

use std::fmt;

use bytemuck::{cast_mut, cast_ref};
use serde::{Deserialize, Serialize};

use crate::kernel::{self, Kernel, SplitterCode, BLOCK};
use crate::model::{BoundingBox, CoordKey, Point, RangeQuery};

/// Splitter precision of an inner node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Layout {
    N64,
    N32,
    N16,
}

impl Layout {
    pub const ALL: [Layout; 3] = [Layout::N64, Layout::N32, Layout::N16];

    /// Maximum number of children.
    pub const fn fanout(self) -> usize {
        match self {
            Layout::N64 => 8,
            Layout::N32 => 16,
            Layout::N16 => 32,
        }
    }

    /// Maximum number of real splitters; the last slot is always padding.
    pub const fn max_splitters(self) -> usize {
        self.fanout() - 1
    }

    pub const fn code_bits(self) -> u32 {
        match self {
            Layout::N64 => 64,
            Layout::N32 => 32,
            Layout::N16 => 16,
        }
    }

    /// Largest code, reserved for padding.
    pub const fn pad_code(self) -> u64 {
        match self {
            Layout::N64 => u64::MAX,
            Layout::N32 => u32::MAX as u64,
            Layout::N16 => u16::MAX as u64,
        }
    }

    pub fn is_compressed(self) -> bool {
        self != Layout::N64
    }

    /// The next layout with more bits per splitter.
    pub fn wider(self) -> Option<Layout> {
        match self {
            Layout::N16 => Some(Layout::N32),
            Layout::N32 => Some(Layout::N64),
            Layout::N64 => None,
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Stored code of a splitter under a right shift.
#[inline]
pub fn quantize(splitter: CoordKey, shift: u32) -> u64 {
    splitter >> shift
}

/// Shift that makes every value up to `max_candidate` fit the layout's width.
pub fn node_shift_for_layout(max_candidate: CoordKey, layout: Layout) -> u32 {
    let bitlen = 64 - max_candidate.leading_zeros();
    bitlen.saturating_sub(layout.code_bits())
}

/// Compact tagged reference into the tree's node arenas.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeRef(u32);

impl NodeRef {
    const LEAF: u32 = 1 << 31;
    pub const NULL: NodeRef = NodeRef(u32::MAX);

    pub fn inner(idx: usize) -> Self {
        debug_assert!(idx < Self::LEAF as usize);
        NodeRef(idx as u32)
    }

    pub fn leaf(idx: usize) -> Self {
        debug_assert!(idx < (Self::LEAF - 1) as usize);
        NodeRef(idx as u32 | Self::LEAF)
    }

    #[inline]
    pub fn is_leaf(self) -> bool {
        self.0 & Self::LEAF != 0
    }

    #[inline]
    pub fn index(self) -> usize {
        (self.0 & !Self::LEAF) as usize
    }

    pub fn is_null(self) -> bool {
        self == Self::NULL
    }
}

impl fmt::Debug for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_null() {
            write!(f, "null")
        } else if self.is_leaf() {
            write!(f, "leaf#{}", self.index())
        } else {
            write!(f, "inner#{}", self.index())
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
#[repr(C, align(64))]
struct SplitterBlock([u64; 8]);

/// A multiway inner node splitting a single dimension.
#[derive(Clone)]
pub struct InnerNode {
    block: SplitterBlock,
    children: [NodeRef; 32],
    layout: Layout,
    split_dim: u8,
    shift: u8,
    slotuse: u8,
}

impl fmt::Debug for InnerNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InnerNode")
            .field("layout", &self.layout)
            .field("split_dim", &self.split_dim)
            .field("shift", &self.shift)
            .field("codes", &self.codes())
            .field("children", &self.children())
            .finish()
    }
}

impl InnerNode {
    /// Builds a node from sorted unique codes and `codes.len() + 1` children.
    ///
    /// Panics if the codes are not strictly increasing, do not fit the layout,
    /// or the child count is wrong.
    pub fn new(layout: Layout, split_dim: usize, shift: u32, codes: &[u64], children: &[NodeRef]) -> Self {
        assert!(codes.len() <= layout.max_splitters(), "too many splitters for {layout}");
        assert_eq!(children.len(), codes.len() + 1);
        assert!(shift <= 63 && (layout != Layout::N64 || shift == 0));
        assert!(codes.windows(2).all(|w| w[0] < w[1]), "splitters must be strictly increasing");
        assert!(codes.iter().all(|&c| c <= layout.pad_code()));
        let mut node = InnerNode {
            block: SplitterBlock([0; 8]),
            children: [NodeRef::NULL; 32],
            layout,
            split_dim: split_dim as u8,
            shift: shift as u8,
            slotuse: codes.len() as u8,
        };
        for i in 0..layout.fanout() {
            node.set_code(i, codes.get(i).copied().unwrap_or(layout.pad_code()));
        }
        node.children[..children.len()].copy_from_slice(children);
        node
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn split_dim(&self) -> usize {
        self.split_dim as usize
    }

    pub fn shift(&self) -> u32 {
        self.shift as u32
    }

    /// Number of real splitters.
    pub fn slotuse(&self) -> usize {
        self.slotuse as usize
    }

    pub fn num_children(&self) -> usize {
        self.slotuse as usize + 1
    }

    pub fn has_free_slot(&self) -> bool {
        self.slotuse() < self.layout.max_splitters()
    }

    pub fn children(&self) -> &[NodeRef] {
        &self.children[..self.num_children()]
    }

    pub fn child(&self, i: usize) -> NodeRef {
        debug_assert!(i < self.num_children());
        self.children[i]
    }

    pub fn set_child(&mut self, i: usize, r: NodeRef) {
        debug_assert!(i < self.num_children());
        self.children[i] = r;
    }

    /// Stored code in slot `i` (padding included).
    pub fn code(&self, i: usize) -> u64 {
        match self.layout {
            Layout::N64 => self.block.0[i],
            Layout::N32 => cast_ref::<[u64; 8], [u32; 16]>(&self.block.0)[i] as u64,
            Layout::N16 => cast_ref::<[u64; 8], [u16; 32]>(&self.block.0)[i] as u64,
        }
    }

    fn set_code(&mut self, i: usize, code: u64) {
        match self.layout {
            Layout::N64 => self.block.0[i] = code,
            Layout::N32 => cast_mut::<[u64; 8], [u32; 16]>(&mut self.block.0)[i] = code as u32,
            Layout::N16 => cast_mut::<[u64; 8], [u16; 32]>(&mut self.block.0)[i] = code as u16,
        }
    }

    /// Real splitter codes.
    pub fn codes(&self) -> Vec<u64> {
        (0..self.slotuse()).map(|i| self.code(i)).collect()
    }

    /// All slots including padding.
    pub fn raw_block(&self) -> Vec<u64> {
        (0..self.layout.fanout()).map(|i| self.code(i)).collect()
    }

    /// Full-precision value of splitter `i`.
    pub fn effective(&self, i: usize) -> CoordKey {
        self.code(i) << self.shift
    }

    /// Half-open interval `[lo, hi)` of child `i` in the split dimension;
    /// `hi = None` means unbounded.
    pub fn child_interval(&self, i: usize) -> (CoordKey, Option<CoordKey>) {
        let lo = if i == 0 { 0 } else { self.effective(i - 1) };
        let hi = (i < self.slotuse()).then(|| self.effective(i));
        (lo, hi)
    }

    /// Key code of a full-precision coordinate, saturated at the padding code.
    #[inline]
    pub fn key_code(&self, x: CoordKey) -> u64 {
        quantize(x, self.shift()).min(self.layout.pad_code())
    }

    /// Index of the child whose interval contains `x`.
    #[inline]
    pub fn locate_child(&self, kernel: Kernel, x: CoordKey) -> usize {
        let key = self.key_code(x);
        let n = self.slotuse();
        match self.layout {
            Layout::N64 => kernel::count_le(kernel, &self.block.0, n, key),
            Layout::N32 => {
                kernel::count_le(kernel, cast_ref::<_, [u32; 16]>(&self.block.0), n, u32::from_key(key))
            }
            Layout::N16 => {
                kernel::count_le(kernel, cast_ref::<_, [u16; 32]>(&self.block.0), n, u16::from_key(key))
            }
        }
    }

    /// First and last child (inclusive) whose intervals meet `[lo, hi]`.
    #[inline]
    pub fn locate_children_range(&self, kernel: Kernel, lo: CoordKey, hi: CoordKey) -> (usize, usize) {
        (self.locate_child(kernel, lo), self.locate_child(kernel, hi))
    }

    /// Inserts `code` as splitter number `pos`; `right` becomes child `pos + 1`
    /// and the former children from `pos + 1` on move one slot right.
    pub fn insert_splitter(&mut self, pos: usize, code: u64, right: NodeRef) {
        let n = self.slotuse();
        assert!(self.has_free_slot());
        assert!(pos <= n);
        assert!(code <= self.layout.pad_code());
        assert!(pos == 0 || self.code(pos - 1) < code, "splitter not above left neighbour");
        assert!(pos == n || code < self.code(pos), "splitter not below right neighbour");
        for i in (pos..n).rev() {
            let c = self.code(i);
            self.set_code(i + 1, c);
        }
        self.set_code(pos, code);
        self.children.copy_within(pos + 1..n + 1, pos + 2);
        self.children[pos + 1] = right;
        self.slotuse += 1;
    }

    /// Removes child `i`. Its interval is absorbed by the left neighbour, or by
    /// the right neighbour when `i == 0`. Requires at least two children.
    pub fn remove_child(&mut self, i: usize) {
        let n = self.slotuse();
        assert!(n >= 1 && i <= n);
        let drop_code = if i == 0 { 0 } else { i - 1 };
        for j in drop_code..n - 1 {
            let c = self.code(j + 1);
            self.set_code(j, c);
        }
        self.set_code(n - 1, self.layout.pad_code());
        self.children.copy_within(i + 1..n + 1, i);
        self.children[n] = NodeRef::NULL;
        self.slotuse -= 1;
    }

    /// Checks block invariants: strictly increasing codes, padding after them.
    pub fn check(&self) -> Result<(), String> {
        let codes = self.codes();
        if !codes.windows(2).all(|w| w[0] < w[1]) {
            return Err(format!("splitters not strictly increasing: {codes:?}"));
        }
        if (self.slotuse()..self.layout.fanout()).any(|i| self.code(i) != self.layout.pad_code()) {
            return Err("padding slot does not hold the padding code".into());
        }
        if self.layout == Layout::N64 && self.shift != 0 {
            return Err("N64 node with a non-zero shift".into());
        }
        if self.children().iter().any(|c| c.is_null()) {
            return Err("null child below slotuse".into());
        }
        Ok(())
    }
}

/// Occupancy class of a leaf.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LeafKind {
    Light,
    Heavy,
    Outlier,
}

#[inline]
fn padded_len(n: usize) -> usize {
    n.div_ceil(BLOCK) * BLOCK
}

/// Columnar leaf node.
#[derive(Clone, Debug)]
pub struct LeafNode<const D: usize> {
    cols: [Vec<CoordKey>; D],
    ids: Vec<u64>,
    len: usize,
    bbox: BoundingBox<D>,
    pub(crate) kind: LeafKind,
    /// Outlier promotion step `k`; a re-split is attempted at `2^k * T_o`.
    pub(crate) outlier_level: u32,
}

impl<const D: usize> LeafNode<D> {
    pub fn from_points(points: &[Point<D>]) -> Self {
        let mut leaf = LeafNode {
            cols: std::array::from_fn(|_| Vec::with_capacity(padded_len(points.len()))),
            ids: Vec::with_capacity(padded_len(points.len())),
            len: points.len(),
            bbox: BoundingBox::empty(),
            kind: LeafKind::Light,
            outlier_level: 0,
        };
        for p in points {
            for d in 0..D {
                leaf.cols[d].push(p.coords[d]);
            }
            leaf.ids.push(p.id);
            leaf.bbox.extend(&p.coords);
        }
        leaf.repad();
        leaf
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn kind(&self) -> LeafKind {
        self.kind
    }

    pub fn outlier_level(&self) -> u32 {
        self.outlier_level
    }

    pub fn bbox(&self) -> &BoundingBox<D> {
        &self.bbox
    }

    pub fn column(&self, d: usize) -> &[CoordKey] {
        &self.cols[d][..self.len]
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids[..self.len]
    }

    #[inline]
    pub fn point(&self, i: usize) -> Point<D> {
        Point::new(std::array::from_fn(|d| self.cols[d][i]), self.ids[i])
    }

    pub fn points(&self) -> impl Iterator<Item = Point<D>> + '_ {
        (0..self.len).map(|i| self.point(i))
    }

    /// Fills the lanes after `len` with copies of the last point and trims the
    /// vectors to a whole number of blocks.
    fn repad(&mut self) {
        let padded = padded_len(self.len);
        let last = self.len.checked_sub(1);
        for col in self.cols.iter_mut().chain(std::iter::once(&mut self.ids)) {
            let fill = last.map_or(0, |l| col[l]);
            col.resize(padded, fill);
            col[self.len..].fill(fill);
        }
    }

    /// Appends a point and grows the box.
    pub fn push(&mut self, p: &Point<D>) {
        let i = self.len;
        if i == self.ids.len() {
            for d in 0..D {
                self.cols[d].push(p.coords[d]);
            }
            self.ids.push(p.id);
        } else {
            for d in 0..D {
                self.cols[d][i] = p.coords[d];
            }
            self.ids[i] = p.id;
        }
        self.len += 1;
        if i == 0 {
            self.bbox = BoundingBox::of_point(&p.coords);
        } else {
            self.bbox.extend(&p.coords);
        }
        self.repad();
    }

    /// Moves the last point into slot `i` and returns the removed point. The box
    /// is recomputed only if the removed point touched one of its faces.
    pub fn swap_remove(&mut self, i: usize) -> Point<D> {
        assert!(i < self.len);
        let victim = self.point(i);
        let last = self.len - 1;
        for d in 0..D {
            self.cols[d][i] = self.cols[d][last];
        }
        self.ids[i] = self.ids[last];
        self.len = last;
        self.repad();
        let on_face = (0..D).any(|d| victim.coords[d] == self.bbox.lo[d] || victim.coords[d] == self.bbox.hi[d]);
        if self.len == 0 {
            self.bbox = BoundingBox::empty();
        } else if on_face {
            self.recompute_box();
        }
        victim
    }

    pub fn recompute_box(&mut self) {
        self.bbox = self.exact_box();
    }

    /// Componentwise min/max over the stored points.
    pub fn exact_box(&self) -> BoundingBox<D> {
        let mut b = BoundingBox::empty();
        for d in 0..D {
            let col = self.column(d);
            if let (Some(&lo), Some(&hi)) = (col.iter().min(), col.iter().max()) {
                b.lo[d] = lo;
                b.hi[d] = hi;
            }
        }
        b
    }

    fn occupancy_masks(&self, masks: &mut Vec<u8>) {
        let blocks = self.ids.len() / BLOCK;
        masks.clear();
        masks.resize(blocks, 0xFF);
        let tail = self.len % BLOCK;
        if tail != 0 {
            masks[blocks - 1] = (1u8 << tail) - 1;
        }
    }

    /// Calls `emit` with the local index of every point inside `q`, in index
    /// order. Dimensions along which `q` spans the leaf box are skipped when
    /// `dim_skip` is set. Returns the number of dimensions actually compared.
    pub fn scan_range(
        &self,
        kernel: Kernel,
        q: &RangeQuery<D>,
        dim_skip: bool,
        masks: &mut Vec<u8>,
        mut emit: impl FnMut(usize),
    ) -> usize {
        let active = |d: usize| !(dim_skip && q.covers_box_dim(&self.bbox, d));
        let mut compared = 0;
        if kernel.is_scalar() {
            let dims: Vec<usize> = (0..D).filter(|&d| active(d)).collect();
            for i in 0..self.len {
                if dims.iter().all(|&d| {
                    let x = self.cols[d][i];
                    q.lo[d] <= x && x <= q.hi[d]
                }) {
                    emit(i);
                }
            }
            return dims.len();
        }
        self.occupancy_masks(masks);
        for d in 0..D {
            if !active(d) {
                continue;
            }
            compared += 1;
            kernel::and_range_mask(kernel, &self.cols[d], q.lo[d], q.hi[d], masks);
        }
        for (b, &m) in masks.iter().enumerate() {
            let mut m = m;
            while m != 0 {
                emit(b * BLOCK + m.trailing_zeros() as usize);
                m &= m - 1;
            }
        }
        compared
    }

    /// Local indices of the points inside `q`.
    pub fn filter_range(&self, kernel: Kernel, q: &RangeQuery<D>) -> Vec<usize> {
        let mut out = Vec::new();
        self.scan_range(kernel, q, true, &mut Vec::new(), |i| out.push(i));
        out
    }

    /// Squared distances from `q` to every stored point, written to `out`
    /// (resized to `len`). Returns `true` if any distance saturated.
    pub fn sq_distances_into(&self, kernel: Kernel, q: &[CoordKey; D], out: &mut Vec<u128>) -> bool {
        out.clear();
        if kernel.is_scalar() {
            out.extend((0..self.len).map(|i| {
                let mut acc: u128 = 0;
                for d in 0..D {
                    let diff = self.cols[d][i].abs_diff(q[d]) as u128;
                    acc = acc.saturating_add(diff * diff);
                }
                acc
            }));
        } else {
            out.resize(self.ids.len(), 0);
            for d in 0..D {
                kernel::accumulate_sq_diff(kernel, &self.cols[d], q[d], out);
            }
            out.truncate(self.len);
        }
        out.contains(&u128::MAX)
    }

    pub fn sq_distances(&self, kernel: Kernel, q: &[CoordKey; D]) -> (Vec<u128>, bool) {
        let mut out = Vec::new();
        let sat = self.sq_distances_into(kernel, q, &mut out);
        (out, sat)
    }

    /// Smallest index holding record id `id`.
    pub fn find_id(&self, kernel: Kernel, id: u64) -> Option<usize> {
        kernel::find_eq(kernel, &self.ids, 0, self.len, id)
    }

    /// Smallest index holding exactly this point (id and coordinates).
    pub fn find_point(&self, kernel: Kernel, p: &Point<D>) -> Option<usize> {
        let mut from = 0;
        while from < self.len {
            let i = kernel::find_eq(kernel, &self.ids, from, self.len, p.id)?;
            if (0..D).all(|d| self.cols[d][i] == p.coords[d]) {
                return Some(i);
            }
            from = i + 1;
        }
        None
    }

    /// Checks column alignment, padding and the exact box.
    pub fn check(&self) -> Result<(), String> {
        let padded = padded_len(self.len);
        if self.ids.len() != padded || self.cols.iter().any(|c| c.len() != padded) {
            return Err("leaf vectors not padded to whole blocks".into());
        }
        if self.len > 0 && self.bbox != self.exact_box() {
            return Err(format!("stale box {:?} vs {:?}", self.bbox, self.exact_box()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{rngs::StdRng, Rng, SeedableRng};

    fn leaf_refs(n: usize) -> Vec<NodeRef> {
        (0..n).map(NodeRef::leaf).collect()
    }

    fn n64(codes: &[u64]) -> InnerNode {
        InnerNode::new(Layout::N64, 0, 0, codes, &leaf_refs(codes.len() + 1))
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize(156, 4), 9);
        assert_eq!(quantize(156, 4) << 4, 144);
        assert_eq!(quantize(12345, 0), 12345);
        let x = (1u64 << 40) + 7;
        assert_eq!(quantize(x, 16), 1 << 24);
        assert_eq!(quantize(x, 16) << 16, 1 << 40);
    }

    #[test]
    fn shift_examples() {
        assert_eq!(node_shift_for_layout((1 << 40) - 1, Layout::N32), 8);
        assert_eq!(node_shift_for_layout(255, Layout::N16), 0);
        assert_eq!(node_shift_for_layout(1 << 63, Layout::N16), 48);
        assert_eq!(node_shift_for_layout(0, Layout::N16), 0);
    }

    #[test]
    fn block_is_one_cache_line() {
        assert_eq!(std::mem::size_of::<SplitterBlock>(), 64);
        assert_eq!(std::mem::align_of::<SplitterBlock>(), 64);
    }

    #[test]
    fn locate_examples() {
        let v = n64(&[10, 20, 30]);
        for k in Kernel::available() {
            assert_eq!(v.locate_children_range(k, 15, 25), (1, 2));
            assert_eq!(v.locate_children_range(k, 0, 5), (0, 0));
            assert_eq!(v.locate_children_range(k, 20, 20), (2, 2));
            assert_eq!(v.locate_child(k, 15), 1);
            assert_eq!(v.locate_child(k, 9), 0);
            assert_eq!(v.locate_child(k, 30), 3);
            assert_eq!(v.locate_child(k, u64::MAX), 3);
        }
    }

    /// Brute force: child i whose effective interval holds x.
    fn interval_oracle(v: &InnerNode, x: u64) -> usize {
        (0..v.num_children())
            .find(|&i| {
                let (lo, hi) = v.child_interval(i);
                lo <= x && hi.is_none_or(|h| x < h)
            })
            .unwrap()
    }

    #[test]
    fn locate_matches_interval_oracle_for_all_layouts() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..3000 {
            let layout = Layout::ALL[rng.gen_range(0..3)];
            let bits = rng.gen_range(1..=64u32);
            let max = if bits == 64 { u64::MAX - 1 } else { (1u64 << bits) - 1 };
            let shift = if layout == Layout::N64 { 0 } else { node_shift_for_layout(max, layout) };
            let n = rng.gen_range(0..=layout.max_splitters());
            let mut codes: Vec<u64> = (0..n).map(|_| quantize(rng.gen_range(1..=max), shift)).collect();
            codes.sort();
            codes.dedup();
            codes.retain(|&c| c > 0);
            let v = InnerNode::new(layout, 0, shift, &codes, &leaf_refs(codes.len() + 1));
            for _ in 0..20 {
                let x = if rng.gen_bool(0.2) && !codes.is_empty() {
                    v.effective(rng.gen_range(0..codes.len())) - rng.gen_range(0..2)
                } else {
                    rng.gen_range(0..=max)
                };
                let expect = interval_oracle(&v, x);
                for k in Kernel::available() {
                    assert_eq!(v.locate_child(k, x), expect, "{k:?} {v:?} x={x}");
                }
                let y = rng.gen_range(x..=max.max(x));
                let (s, e) = v.locate_children_range(Kernel::detect(), x, y);
                let hit: Vec<usize> = (0..v.num_children())
                    .filter(|&i| {
                        let (lo, hi) = v.child_interval(i);
                        lo <= y && hi.is_none_or(|h| x < h)
                    })
                    .collect();
                assert_eq!(hit, (s..=e).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn insert_and_remove_keep_block_sorted() {
        let mut v = n64(&[10, 30]);
        v.insert_splitter(1, 20, NodeRef::leaf(9));
        assert_eq!(v.codes(), vec![10, 20, 30]);
        assert_eq!(v.child(2), NodeRef::leaf(9));
        assert_eq!(v.child(3), NodeRef::leaf(2));
        v.check().unwrap();
        v.remove_child(0);
        assert_eq!(v.codes(), vec![20, 30]);
        assert_eq!(v.children(), &[NodeRef::leaf(1), NodeRef::leaf(9), NodeRef::leaf(2)]);
        v.remove_child(2);
        assert_eq!(v.codes(), vec![20]);
        v.check().unwrap();
        assert_eq!(v.raw_block()[1..], [u64::MAX; 7]);
    }

    #[test]
    #[should_panic]
    fn duplicate_splitter_rejected() {
        let mut v = n64(&[10, 20]);
        v.insert_splitter(1, 10, NodeRef::leaf(5));
    }

    #[test]
    fn padding_is_neutral() {
        let codes = [3u64, 9, 14];
        let v16 = InnerNode::new(Layout::N16, 0, 0, &codes, &leaf_refs(4));
        let v64 = n64(&codes);
        for x in 0..20 {
            assert_eq!(v16.locate_child(Kernel::detect(), x), v64.locate_child(Kernel::Scalar, x));
        }
    }

    fn leaf2(xs: &[u64], ys: &[u64]) -> LeafNode<2> {
        let pts: Vec<Point<2>> = xs.iter().zip(ys).enumerate().map(|(i, (&x, &y))| Point::new([x, y], i as u64)).collect();
        LeafNode::from_points(&pts)
    }

    #[test]
    fn leaf_filter_examples() {
        let l = leaf2(&[1, 5, 9], &[2, 6, 10]);
        for k in Kernel::available() {
            assert_eq!(l.filter_range(k, &RangeQuery::new([0, 0], [6, 7]).unwrap()), vec![0, 1]);
            let b = *l.bbox();
            assert_eq!(l.filter_range(k, &RangeQuery::new(b.lo, b.hi).unwrap()), vec![0, 1, 2]);
            assert!(l.filter_range(k, &RangeQuery::new([20, 20], [30, 30]).unwrap()).is_empty());
        }
    }

    #[test]
    fn box_containment_skips_all_dims() {
        let l = leaf2(&[1, 5, 9], &[2, 6, 10]);
        let q = RangeQuery::new([0, 0], [100, 100]).unwrap();
        for k in Kernel::available() {
            let mut n = 0;
            let compared = l.scan_range(k, &q, true, &mut Vec::new(), |_| n += 1);
            assert_eq!((compared, n), (0, 3));
            let compared = l.scan_range(k, &q, false, &mut Vec::new(), |_| ());
            assert_eq!(compared, 2);
        }
    }

    #[test]
    fn sq_distance_examples() {
        let l = leaf2(&[3, 7], &[4, 1]);
        for k in Kernel::available() {
            assert_eq!(l.sq_distances(k, &[0, 0]).0, vec![25, 50]);
            assert_eq!(l.sq_distances(k, &[7, 1]).0[1], 0);
        }
    }

    #[test]
    fn sq_distances_match_scalar_oracle() {
        let mut rng = StdRng::seed_from_u64(5);
        let pts: Vec<Point<6>> = (0..64).map(|i| Point::new(std::array::from_fn(|_| rng.gen_range(0..1 << 62)), i)).collect();
        let leaf = LeafNode::from_points(&pts);
        let q: [u64; 6] = std::array::from_fn(|_| rng.gen_range(0..1 << 62));
        let oracle: Vec<u128> = pts
            .iter()
            .map(|p| (0..6).map(|d| (p.coords[d] as i128 - q[d] as i128).pow(2) as u128).sum())
            .collect();
        for k in Kernel::available() {
            let (got, sat) = leaf.sq_distances(k, &q);
            assert!(!sat);
            assert_eq!(got, oracle);
        }
    }

    #[test]
    fn sq_distance_saturation_flagged() {
        let pts: Vec<Point<16>> = vec![Point::new([0; 16], 0)];
        let leaf = LeafNode::from_points(&pts);
        for k in Kernel::available() {
            let (d, sat) = leaf.sq_distances(k, &[u64::MAX - 1; 16]);
            assert!(sat);
            assert_eq!(d[0], u128::MAX);
        }
    }

    #[test]
    fn find_id_examples() {
        let pts = [Point::new([0], 7), Point::new([1], 3), Point::new([2], 9)];
        let l = LeafNode::from_points(&pts);
        let dup = LeafNode::from_points(&[Point::new([0], 5), Point::new([1], 5)]);
        for k in Kernel::available() {
            assert_eq!(l.find_id(k, 3), Some(1));
            assert_eq!(l.find_id(k, 4), None);
            assert_eq!(dup.find_id(k, 5), Some(0));
            assert_eq!(dup.find_point(k, &Point::new([1], 5)), Some(1));
            // padding lanes repeat the last id but never match
            assert_eq!(l.find_id(k, 9), Some(2));
        }
    }

    #[test]
    fn push_and_remove_maintain_box_and_padding() {
        let mut rng = StdRng::seed_from_u64(8);
        let mut leaf = LeafNode::<3>::from_points(&[]);
        let mut shadow: Vec<Point<3>> = Vec::new();
        for step in 0..2000u64 {
            if shadow.is_empty() || rng.gen_bool(0.6) {
                let p = Point::new(std::array::from_fn(|_| rng.gen_range(0..50)), step);
                leaf.push(&p);
                shadow.push(p);
            } else {
                let i = rng.gen_range(0..shadow.len());
                let got = leaf.swap_remove(i);
                assert_eq!(got, shadow.swap_remove(i));
            }
            leaf.check().unwrap();
            assert_eq!(leaf.points().collect::<Vec<_>>(), shadow);
        }
    }

    #[test]
    fn interior_delete_keeps_box() {
        let mut l = leaf2(&[0, 5, 10], &[0, 5, 10]);
        let before = *l.bbox();
        l.swap_remove(1);
        assert_eq!(*l.bbox(), before);
        assert_eq!(l.len(), 2);
        assert_eq!(l.point(1).id, 2);
        let mut l = leaf2(&[0, 5, 10], &[0, 5, 3]);
        l.swap_remove(2);
        assert_eq!(l.bbox().hi, [5, 5]);
    }
}
