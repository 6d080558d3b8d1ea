//! Point insertion and deletion.
//!
//! Inserts append to the leaf found by descent. A leaf that grows past the
//! outlier threshold is split at its median under the parent; when the parent
//! is full, the subtree under the nearest ancestor with room is rebuilt as two
//! halves. A leaf whose median cannot produce a new splitter becomes an
//! outlier and is retried only after doubling.

use thiserror::Error;

use crate::construct::Builder;
use crate::model::{CoordKey, Point};
use crate::node::{quantize, LeafKind, LeafNode, NodeRef};
use crate::tree::SkdTree;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InsertOutcome {
    Inserted,
    /// The target leaf was split under its parent.
    InsertedWithSplit,
    /// A subtree (or the whole tree) was rebuilt to make room for a split.
    InsertedWithRebuild,
    /// A split attempt failed; the leaf is an outlier at a higher level.
    InsertedOutlierGrown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum InsertError {
    #[error("point with identical coordinates and id already stored")]
    Duplicate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeleteOutcome {
    Deleted,
    NotFound,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitOutcome {
    InPlace,
    Rebuilt,
    Failed,
}

/// Inner nodes and child positions from the root down to a leaf.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PathStack(pub Vec<(NodeRef, usize)>);

impl PathStack {
    pub fn depth(&self) -> usize {
        self.0.len()
    }
}

/// Picks a code for splitting `pts` along `dim` under `shift` near the median,
/// such that both sides are non-empty and the code fits under `pad`.
fn median_code<const D: usize>(pts: &[Point<D>], dim: usize, shift: u32, pad: u64) -> Option<u64> {
    let mut vals: Vec<CoordKey> = pts.iter().map(|p| p.coords[dim]).collect();
    let mid = vals.len() / 2;
    let median = *vals.select_nth_unstable(mid).1;
    let base = quantize(median, shift);
    [base, base + 1].into_iter().find(|&code| {
        let Some(eff) = code.checked_shl(shift).filter(|&e| e >> shift == code) else {
            return false;
        };
        code <= pad && vals.iter().any(|&x| x < eff) && vals.iter().any(|&x| x >= eff)
    })
}

impl<const D: usize> SkdTree<D> {
    /// Leaf reached by descending with `coords`, plus the path to it.
    pub fn descend(&self, coords: &[CoordKey; D]) -> Option<(NodeRef, PathStack)> {
        let mut n = self.root?;
        let mut path = PathStack::default();
        while !n.is_leaf() {
            let v = self.inner(n);
            let i = v.locate_child(self.kernel, coords[v.split_dim()]);
            path.0.push((n, i));
            n = v.child(i);
        }
        Some((n, path))
    }

    pub fn contains(&self, p: &Point<D>) -> bool {
        self.descend(&p.coords)
            .is_some_and(|(l, _)| self.leaf(l).find_point(self.kernel, p).is_some())
    }

    pub fn insert(&mut self, p: Point<D>) -> Result<InsertOutcome, InsertError> {
        let Some((leaf, path)) = self.descend(&p.coords) else {
            let r = self.alloc_leaf(LeafNode::from_points(&[p]));
            self.root = Some(r);
            self.refresh_thresholds();
            self.leaf_mut(r).kind = LeafKind::Light;
            return Ok(InsertOutcome::Inserted);
        };
        if self.leaf(leaf).find_point(self.kernel, &p).is_some() {
            return Err(InsertError::Duplicate);
        }
        self.leaf_mut(leaf).push(&p);
        self.stats.total_points += 1;
        let t = self.thresholds;
        let l = self.leaf(leaf);
        let (len, kind, level) = (l.len(), l.kind(), l.outlier_level());
        let attempt = match kind {
            LeafKind::Outlier => len >= (t.outlier << level.min(40)),
            _ => len > t.outlier,
        };
        if !attempt {
            if kind != LeafKind::Outlier {
                self.leaf_mut(leaf).kind = if len > t.heavy { LeafKind::Heavy } else { LeafKind::Light };
            }
            return Ok(InsertOutcome::Inserted);
        }
        match self.split_leaf(leaf, &path) {
            SplitOutcome::InPlace => Ok(InsertOutcome::InsertedWithSplit),
            SplitOutcome::Rebuilt => Ok(InsertOutcome::InsertedWithRebuild),
            SplitOutcome::Failed => {
                // a failed whole-tree rebuild may have moved the leaf
                let (leaf, _) = self.descend(&p.coords).expect("tree is non-empty");
                let l = self.leaf_mut(leaf);
                if l.kind == LeafKind::Outlier {
                    l.outlier_level += 1;
                } else {
                    l.kind = LeafKind::Outlier;
                    l.outlier_level = 1;
                }
                Ok(InsertOutcome::InsertedOutlierGrown)
            }
        }
    }

    /// Splits an overfull leaf reached through `path`.
    pub fn split_leaf(&mut self, leaf: NodeRef, path: &PathStack) -> SplitOutcome {
        let b = *self.leaf(leaf).bbox();
        if b.lo == b.hi {
            return SplitOutcome::Failed;
        }
        let Some(j) = path.0.iter().rposition(|&(v, _)| self.inner(v).has_free_slot()) else {
            return self.rebuild_all();
        };
        let (anc, ci) = path.0[j];
        let v = self.inner(anc);
        let (dim, shift, pad) = (v.split_dim(), v.shift(), v.layout().pad_code());
        let in_place = j + 1 == path.0.len();
        let target = v.child(ci);
        let mut pts = if in_place {
            self.leaf(leaf).points().collect()
        } else {
            self.subtree_points(target)
        };
        let Some(code) = median_code(&pts, dim, shift, pad) else {
            return SplitOutcome::Failed;
        };
        let cut = crate::construct::crack(&mut pts, dim, code << shift);
        let (lo, hi) = pts.split_at_mut(cut);
        let (left, right) = if in_place {
            self.free_leaf(leaf);
            (self.alloc_leaf(LeafNode::from_points(lo)), self.alloc_leaf(LeafNode::from_points(hi)))
        } else {
            self.take_subtree(target);
            let dim_pos = (self.schema.order_position(dim) + 1) % D;
            let salt = self.stats.total_points as u64;
            let mut b = Builder::new(self, salt);
            let l = b.build_subtree(lo, dim_pos);
            let r = b.build_subtree(hi, dim_pos);
            (l, r)
        };
        let v = self.inner_mut(anc);
        v.set_child(ci, left);
        v.insert_splitter(ci, code, right);
        self.refresh_thresholds();
        self.classify_under(left);
        self.classify_under(right);
        if in_place {
            SplitOutcome::InPlace
        } else {
            SplitOutcome::Rebuilt
        }
    }

    /// Rebuilds the whole tree from its points.
    fn rebuild_all(&mut self) -> SplitOutcome {
        let Some(root) = self.root.take() else {
            return SplitOutcome::Failed;
        };
        let mut pts = self.take_subtree(root);
        let salt = pts.len() as u64;
        let r = Builder::new(self, salt).build_subtree(&mut pts, 0);
        self.root = Some(r);
        self.refresh_thresholds();
        self.classify_all_leaves();
        if r.is_leaf() {
            SplitOutcome::Failed
        } else {
            SplitOutcome::Rebuilt
        }
    }

    fn classify_under(&mut self, r: NodeRef) {
        let t = self.thresholds;
        let mut stack = vec![r];
        while let Some(n) = stack.pop() {
            if n.is_leaf() {
                let l = self.leaf_mut(n);
                l.kind = t.classify(l.len());
                l.outlier_level = u32::from(l.kind == LeafKind::Outlier);
            } else {
                stack.extend_from_slice(self.inner(n).children());
            }
        }
    }

    /// Removes the point with `p`'s coordinates and id.
    pub fn delete(&mut self, p: &Point<D>) -> DeleteOutcome {
        let Some((leaf, path)) = self.descend(&p.coords) else {
            return DeleteOutcome::NotFound;
        };
        let Some(slot) = self.leaf(leaf).find_point(self.kernel, p) else {
            return DeleteOutcome::NotFound;
        };
        self.leaf_mut(leaf).swap_remove(slot);
        self.stats.total_points -= 1;
        if self.leaf(leaf).is_empty() {
            self.free_leaf(leaf);
            self.unlink(&path);
            self.refresh_thresholds();
        } else {
            let t = self.thresholds;
            let l = self.leaf_mut(leaf);
            let class = t.classify(l.len());
            match (l.kind, class) {
                (LeafKind::Outlier, LeafKind::Outlier) => {}
                (LeafKind::Outlier, c) => {
                    l.kind = c;
                    l.outlier_level = 0;
                }
                (_, LeafKind::Outlier) => l.kind = LeafKind::Heavy,
                (_, c) => l.kind = c,
            }
        }
        DeleteOutcome::Deleted
    }

    /// Drops the (already freed) child at the end of `path`, collapsing
    /// single-child parents.
    fn unlink(&mut self, path: &PathStack) {
        let Some(&(parent, i)) = path.0.last() else {
            self.root = None;
            return;
        };
        let v = self.inner_mut(parent);
        v.remove_child(i);
        if v.num_children() > 1 {
            return;
        }
        let only = v.child(0);
        self.free_inner(parent);
        match path.0.len().checked_sub(2).map(|k| path.0[k]) {
            Some((gp, gi)) => self.inner_mut(gp).set_child(gi, only),
            None => self.root = Some(only),
        }
    }
}
