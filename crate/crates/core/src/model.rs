//! Points, coordinate encoding, boxes and the schema shared by every other module.
//!
//! All coordinates are dimension-local unsigned 64-bit ordinals. Source values are
//! mapped into this domain by an order-preserving transform, so every comparison
//! inside the tree is a plain unsigned integer comparison.

use std::fmt;

use thiserror::Error;

/// An order-preserving 64-bit ordinal coordinate.
pub type CoordKey = u64;

/// Reserved upper bound of the coordinate domain. Used only as splitter padding.
pub const MAXVAL: CoordKey = u64::MAX;

/// Largest coordinate a stored point may carry.
pub const MAX_COORD: CoordKey = MAXVAL - 1;

/// Smallest and largest supported dimensionality.
pub const MIN_DIMS: usize = 1;
pub const MAX_DIMS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncodeError {
    #[error("row {row}, dimension {dim}: value {value} is not finite")]
    NonFinite { row: usize, dim: usize, value: f64 },
    #[error("row {row} has {found} values, expected {expected}")]
    Arity {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("{ids} ids supplied for {rows} rows")]
    IdCount { rows: usize, ids: usize },
}

/// Maps an unsigned source value into the key domain (identity except for the
/// reserved padding value).
#[inline]
pub fn encode_u64(value: u64) -> CoordKey {
    value.min(MAX_COORD)
}

/// Maps a finite double into the key domain with the sign-flip bit transform.
///
/// Negative values have all bits inverted, non-negative values get the sign bit
/// set, which makes the unsigned order of the result match the numeric order of
/// the input. `-0.0` is folded onto `+0.0`.
pub fn encode_f64(value: f64) -> Option<CoordKey> {
    if !value.is_finite() {
        return None;
    }
    let value = if value == 0.0 { 0.0 } else { value };
    let bits = value.to_bits();
    let key = if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    };
    Some(encode_u64(key))
}

/// Inverse of [`encode_f64`] for keys produced by it.
pub fn decode_f64(key: CoordKey) -> f64 {
    let bits = if key >> 63 == 1 {
        key & !(1 << 63)
    } else {
        !key
    };
    f64::from_bits(bits)
}

/// A D-dimensional point with a record id.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point<const D: usize> {
    pub coords: [CoordKey; D],
    pub id: u64,
}

impl<const D: usize> Point<D> {
    pub const fn new(coords: [CoordKey; D], id: u64) -> Self {
        Self { coords, id }
    }

    /// Exact squared Euclidean distance, saturating at `u128::MAX`.
    pub fn sq_dist(&self, q: &[CoordKey; D]) -> u128 {
        sq_dist(&self.coords, q)
    }
}

impl<const D: usize> fmt::Debug for Point<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}{:?}", self.id, self.coords)
    }
}

/// Squared Euclidean distance between two coordinate vectors in a 128-bit
/// accumulator. Saturates instead of wrapping.
#[inline]
pub fn sq_dist<const D: usize>(a: &[CoordKey; D], b: &[CoordKey; D]) -> u128 {
    let mut acc: u128 = 0;
    for d in 0..D {
        let diff = a[d].abs_diff(b[d]) as u128;
        acc = acc.saturating_add(diff * diff);
    }
    acc
}

/// Encodes rows of unsigned values. Ids default to the row index.
pub fn encode_unsigned_rows<const D: usize>(
    rows: &[[u64; D]],
    ids: Option<&[u64]>,
) -> Result<Vec<Point<D>>, EncodeError> {
    check_ids(rows.len(), ids)?;
    Ok(rows
        .iter()
        .enumerate()
        .map(|(i, row)| Point::new(row.map(encode_u64), ids.map_or(i as u64, |ids| ids[i])))
        .collect())
}

/// Encodes rows of doubles. Rejects the first non-finite value with its row index.
pub fn encode_float_rows<const D: usize>(
    rows: &[[f64; D]],
    ids: Option<&[u64]>,
) -> Result<Vec<Point<D>>, EncodeError> {
    check_ids(rows.len(), ids)?;
    let mut out = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let mut coords = [0; D];
        for (d, &v) in row.iter().enumerate() {
            coords[d] = encode_f64(v).ok_or(EncodeError::NonFinite {
                row: i,
                dim: d,
                value: v,
            })?;
        }
        out.push(Point::new(coords, ids.map_or(i as u64, |ids| ids[i])));
    }
    Ok(out)
}

fn check_ids(rows: usize, ids: Option<&[u64]>) -> Result<(), EncodeError> {
    match ids {
        Some(ids) if ids.len() != rows => Err(EncodeError::IdCount {
            rows,
            ids: ids.len(),
        }),
        _ => Ok(()),
    }
}

/// Axis-aligned box with inclusive bounds on both ends.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundingBox<const D: usize> {
    pub lo: [CoordKey; D],
    pub hi: [CoordKey; D],
}

impl<const D: usize> BoundingBox<D> {
    /// The box of a single point.
    pub fn of_point(p: &[CoordKey; D]) -> Self {
        Self { lo: *p, hi: *p }
    }

    /// An "empty" box that any union will overwrite.
    pub fn empty() -> Self {
        Self {
            lo: [MAXVAL; D],
            hi: [0; D],
        }
    }

    pub fn extend(&mut self, p: &[CoordKey; D]) {
        for d in 0..D {
            self.lo[d] = self.lo[d].min(p[d]);
            self.hi[d] = self.hi[d].max(p[d]);
        }
    }

    pub fn contains(&self, p: &[CoordKey; D]) -> bool {
        (0..D).all(|d| self.lo[d] <= p[d] && p[d] <= self.hi[d])
    }

    pub fn is_valid(&self) -> bool {
        (0..D).all(|d| self.lo[d] <= self.hi[d])
    }
}

/// True iff `p` lies inside `b` on every dimension.
pub fn box_contains_point<const D: usize>(b: &BoundingBox<D>, p: &Point<D>) -> bool {
    b.contains(&p.coords)
}

/// Inclusive axis-aligned range query.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RangeQuery<const D: usize> {
    pub lo: [CoordKey; D],
    pub hi: [CoordKey; D],
}

impl<const D: usize> RangeQuery<D> {
    /// Returns `None` if some `lo[d] > hi[d]`.
    pub fn new(lo: [CoordKey; D], hi: [CoordKey; D]) -> Option<Self> {
        (0..D).all(|d| lo[d] <= hi[d]).then_some(Self { lo, hi })
    }

    /// The query covering the whole key domain.
    pub fn everything() -> Self {
        Self {
            lo: [0; D],
            hi: [MAXVAL; D],
        }
    }

    pub fn point(p: [CoordKey; D]) -> Self {
        Self { lo: p, hi: p }
    }

    #[inline]
    pub fn contains(&self, p: &[CoordKey; D]) -> bool {
        (0..D).all(|d| self.lo[d] <= p[d] && p[d] <= self.hi[d])
    }

    /// True iff the query spans the box entirely along dimension `d`.
    #[inline]
    pub fn covers_box_dim(&self, b: &BoundingBox<D>, d: usize) -> bool {
        self.lo[d] <= b.lo[d] && self.hi[d] >= b.hi[d]
    }
}

/// True iff `q` spans `b` along dimension `d`.
pub fn range_covers_box_dim<const D: usize>(
    q: &RangeQuery<D>,
    b: &BoundingBox<D>,
    d: usize,
) -> bool {
    q.covers_box_dim(b, d)
}

/// Tree-wide layout parameters fixed at build time.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schema<const D: usize> {
    /// Leaf capacity target.
    pub leaf_capacity: usize,
    /// Order in which construction cycles through dimensions.
    pub dim_order: [u8; D],
}

impl<const D: usize> Schema<D> {
    pub fn new(leaf_capacity: usize, dim_order: [u8; D]) -> Self {
        Self {
            leaf_capacity,
            dim_order,
        }
    }

    /// Position of dimension `dim` inside `dim_order`.
    pub fn order_position(&self, dim: usize) -> usize {
        self.dim_order
            .iter()
            .position(|&d| d as usize == dim)
            .expect("dimension missing from dim_order")
    }
}
