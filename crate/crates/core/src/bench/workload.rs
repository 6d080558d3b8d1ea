//! Query and update workloads.

use std::io::{self, Read, Write};
use std::path::Path;

use rand::rngs::StdRng;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::dataset::{read_magic, read_u32, read_u64, DataError};
use crate::model::{CoordKey, Point, RangeQuery, MAX_COORD};

pub const WORKLOAD_MAGIC: &[u8; 4] = b"SKW1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorkloadKind {
    Range,
    Knn,
    /// Update batches interleaved with range and kNN sweeps.
    Mixed,
}

impl std::str::FromStr for WorkloadKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "range" => Ok(Self::Range),
            "knn" => Ok(Self::Knn),
            "mixed" => Ok(Self::Mixed),
            other => Err(format!("unknown workload kind `{other}` (expected range|knn|mixed)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorkloadParams {
    pub kind: WorkloadKind,
    /// Queries per sweep (range and kNN each).
    pub count: usize,
    pub selectivity: f64,
    pub k: usize,
    pub insert_frac: f64,
    pub delete_frac: f64,
    pub batches: usize,
    pub seed: u64,
}

impl Default for WorkloadParams {
    fn default() -> Self {
        Self {
            kind: WorkloadKind::Range,
            count: 1000,
            selectivity: 1e-4,
            k: 10,
            insert_frac: 0.3,
            delete_frac: 0.06,
            batches: 5,
            seed: 1,
        }
    }
}

impl WorkloadParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.batches == 0 {
            return Err("batch count must be at least 1".into());
        }
        for (name, f) in [("insert fraction", self.insert_frac), ("delete fraction", self.delete_frac)] {
            if !(0.0..=1.0).contains(&f) {
                return Err(format!("{name} {f} outside [0, 1]"));
            }
        }
        if !(self.selectivity > 0.0 && self.selectivity <= 1.0) {
            return Err(format!("selectivity {} outside (0, 1]", self.selectivity));
        }
        if self.k == 0 {
            return Err("k must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Workload<const D: usize> {
    pub params: WorkloadParams,
    /// Range queries with the selectivity each one achieves on the dataset.
    pub ranges: Vec<(RangeQuery<D>, f64)>,
    pub knn: Vec<[CoordKey; D]>,
    pub inserts: Vec<Point<D>>,
    pub deletes: Vec<Point<D>>,
}

impl<const D: usize> Workload<D> {
    /// Slice of `items` belonging to update batch `b` (0-based) of `batches`.
    pub fn batch<'a, T>(&self, items: &'a [T], b: usize) -> &'a [T] {
        let n = self.params.batches;
        &items[items.len() * b / n..items.len() * (b + 1) / n]
    }
}

/// Per-dimension `(min, max)` over `points`.
fn extent<const D: usize>(points: &[Point<D>]) -> [(CoordKey, CoordKey); D] {
    let mut e = [(CoordKey::MAX, 0); D];
    for p in points {
        for d in 0..D {
            e[d].0 = e[d].0.min(p.coords[d]);
            e[d].1 = e[d].1.max(p.coords[d]);
        }
    }
    e
}

/// Hypercube around `center` holding about `target` points of `points`.
///
/// Each dimension is widened by the same fraction `w` of its data extent. The
/// smallest `w` that covers `target` points is the `target`-th smallest
/// extent-normalised Chebyshev distance from the center, found exactly.
pub fn calibrate_range<const D: usize>(points: &[Point<D>], center: &[CoordKey; D], target: usize, scratch: &mut Vec<f64>) -> RangeQuery<D> {
    calibrate_with_span(points, &spans(points), center, target, scratch)
}

fn spans<const D: usize>(points: &[Point<D>]) -> [f64; D] {
    let ext = extent(points);
    std::array::from_fn(|d| (ext[d].1 - ext[d].0).max(1) as f64)
}

fn calibrate_with_span<const D: usize>(
    points: &[Point<D>],
    span: &[f64; D],
    center: &[CoordKey; D],
    target: usize,
    scratch: &mut Vec<f64>,
) -> RangeQuery<D> {
    scratch.clear();
    scratch.extend(points.iter().map(|p| {
        (0..D)
            .map(|d| p.coords[d].abs_diff(center[d]) as f64 / span[d])
            .fold(0.0, f64::max)
    }));
    let target = target.clamp(1, points.len());
    let w = *scratch.select_nth_unstable_by(target - 1, f64::total_cmp).1;
    let half: [CoordKey; D] = std::array::from_fn(|d| {
        // slack for the rounding in `diff / span * span`
        let h = (w * span[d] * (1.0 + 1e-12)).ceil() + 1.0;
        if h >= MAX_COORD as f64 {
            MAX_COORD
        } else {
            h as u64
        }
    });
    RangeQuery::new(
        std::array::from_fn(|d| center[d].saturating_sub(half[d])),
        std::array::from_fn(|d| center[d].saturating_add(half[d]).min(MAX_COORD)),
    )
    .expect("lo <= center <= hi")
}

pub fn gen_workload<const D: usize>(points: &[Point<D>], params: &WorkloadParams) -> Workload<D> {
    params.validate().expect("invalid workload parameters");
    assert!(!points.is_empty(), "workload needs a non-empty dataset");
    let mut rng = StdRng::seed_from_u64(params.seed);
    let n = points.len();
    let mut w = Workload {
        params: params.clone(),
        ranges: Vec::new(),
        knn: Vec::new(),
        inserts: Vec::new(),
        deletes: Vec::new(),
    };
    if params.kind != WorkloadKind::Knn {
        let target = (params.selectivity * n as f64).round().max(1.0) as usize;
        let mut scratch = Vec::with_capacity(n);
        let span = spans(points);
        for _ in 0..params.count {
            let c = points[rng.gen_range(0..n)].coords;
            let q = calibrate_with_span(points, &span, &c, target, &mut scratch);
            let hits = points.iter().filter(|p| q.contains(&p.coords)).count();
            w.ranges.push((q, hits as f64 / n as f64));
        }
    }
    if params.kind != WorkloadKind::Range {
        w.knn = (0..params.count).map(|_| points[rng.gen_range(0..n)].coords).collect();
    }
    if params.kind == WorkloadKind::Mixed {
        let ext = extent(points);
        // typical spacing between neighbours along each dimension
        let spacing: [u64; D] = std::array::from_fn(|d| {
            let s = (ext[d].1 - ext[d].0) as f64 / (n as f64).powf(1.0 / D as f64);
            (s as u64).max(1)
        });
        let max_id = points.iter().map(|p| p.id).max().unwrap_or(0);
        let inserts = (params.insert_frac * n as f64).round() as usize;
        w.inserts = (0..inserts)
            .map(|i| {
                let base = points[rng.gen_range(0..n)].coords;
                let coords = std::array::from_fn(|d| {
                    let j = rng.gen_range(0..=spacing[d].saturating_mul(2));
                    (base[d].saturating_add(j).saturating_sub(spacing[d])).min(MAX_COORD)
                });
                Point::new(coords, max_id + 1 + i as u64)
            })
            .collect();
        let deletes = ((params.delete_frac * n as f64).round() as usize).min(n);
        w.deletes = sample(&mut rng, n, deletes).into_iter().map(|i| points[i]).collect();
    }
    w
}

fn write_points<const D: usize, W: Write>(w: &mut W, pts: &[Point<D>]) -> io::Result<()> {
    w.write_all(&(pts.len() as u64).to_le_bytes())?;
    for p in pts {
        for c in p.coords {
            w.write_all(&c.to_le_bytes())?;
        }
        w.write_all(&p.id.to_le_bytes())?;
    }
    Ok(())
}

fn read_points<const D: usize, R: Read>(r: &mut R) -> io::Result<Vec<Point<D>>> {
    let n = read_u64(r)? as usize;
    (0..n)
        .map(|_| {
            let mut c = [0; D];
            for x in c.iter_mut() {
                *x = read_u64(r)?;
            }
            Ok(Point::new(c, read_u64(r)?))
        })
        .collect()
}

fn read_f64<R: Read>(r: &mut R) -> io::Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

pub fn write_workload<const D: usize, W: Write>(mut w: W, wl: &Workload<D>) -> io::Result<()> {
    let p = &wl.params;
    w.write_all(WORKLOAD_MAGIC)?;
    w.write_all(&(D as u32).to_le_bytes())?;
    let kind: u32 = match p.kind {
        WorkloadKind::Range => 0,
        WorkloadKind::Knn => 1,
        WorkloadKind::Mixed => 2,
    };
    w.write_all(&kind.to_le_bytes())?;
    w.write_all(&(p.batches as u32).to_le_bytes())?;
    w.write_all(&p.selectivity.to_le_bytes())?;
    w.write_all(&(p.k as u32).to_le_bytes())?;
    w.write_all(&p.insert_frac.to_le_bytes())?;
    w.write_all(&p.delete_frac.to_le_bytes())?;
    w.write_all(&p.seed.to_le_bytes())?;
    w.write_all(&(wl.ranges.len() as u64).to_le_bytes())?;
    for (q, sel) in &wl.ranges {
        for c in q.lo.iter().chain(&q.hi) {
            w.write_all(&c.to_le_bytes())?;
        }
        w.write_all(&sel.to_le_bytes())?;
    }
    w.write_all(&(wl.knn.len() as u64).to_le_bytes())?;
    for q in &wl.knn {
        for c in q {
            w.write_all(&c.to_le_bytes())?;
        }
    }
    write_points(&mut w, &wl.inserts)?;
    write_points(&mut w, &wl.deletes)?;
    w.flush()
}

/// Dimensionality stored in a workload file header.
pub fn workload_dims(path: &Path) -> Result<usize, DataError> {
    let mut f = std::fs::File::open(path)?;
    read_magic(&mut f, WORKLOAD_MAGIC)?;
    Ok(read_u32(&mut f)? as usize)
}

pub fn read_workload<const D: usize, R: Read>(mut r: R) -> Result<Workload<D>, DataError> {
    read_magic(&mut r, WORKLOAD_MAGIC)?;
    let dims = read_u32(&mut r)? as usize;
    if dims != D {
        return Err(DataError::Dims { found: dims, expected: D });
    }
    let kind = match read_u32(&mut r)? {
        0 => WorkloadKind::Range,
        1 => WorkloadKind::Knn,
        2 => WorkloadKind::Mixed,
        k => return Err(io::Error::new(io::ErrorKind::InvalidData, format!("unknown workload kind {k}")).into()),
    };
    let batches = read_u32(&mut r)? as usize;
    let selectivity = read_f64(&mut r)?;
    let k = read_u32(&mut r)? as usize;
    let insert_frac = read_f64(&mut r)?;
    let delete_frac = read_f64(&mut r)?;
    let seed = read_u64(&mut r)?;
    let nr = read_u64(&mut r)? as usize;
    let mut ranges = Vec::with_capacity(nr);
    for _ in 0..nr {
        let mut lo = [0; D];
        let mut hi = [0; D];
        for x in lo.iter_mut().chain(hi.iter_mut()) {
            *x = read_u64(&mut r)?;
        }
        let q = RangeQuery::new(lo, hi).ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "inverted range query"))?;
        ranges.push((q, read_f64(&mut r)?));
    }
    let nk = read_u64(&mut r)? as usize;
    let mut knn = Vec::with_capacity(nk);
    for _ in 0..nk {
        let mut q = [0; D];
        for x in q.iter_mut() {
            *x = read_u64(&mut r)?;
        }
        knn.push(q);
    }
    let inserts = read_points(&mut r)?;
    let deletes = read_points(&mut r)?;
    let count = nr.max(nk);
    Ok(Workload {
        params: WorkloadParams {
            kind,
            count,
            selectivity,
            k,
            insert_frac,
            delete_frac,
            batches,
            seed,
        },
        ranges,
        knn,
        inserts,
        deletes,
    })
}

pub fn save_workload<const D: usize>(path: &Path, wl: &Workload<D>) -> io::Result<()> {
    write_workload(io::BufWriter::new(std::fs::File::create(path)?), wl)
}

pub fn load_workload<const D: usize>(path: &Path) -> Result<Workload<D>, DataError> {
    read_workload(io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::dataset::{gen_points, Distribution};

    #[test]
    fn selectivity_hits_target_on_uniform() {
        let pts = gen_points::<2>(Distribution::Uniform, 100_000, 3);
        let params = WorkloadParams {
            count: 100,
            selectivity: 1e-4,
            ..WorkloadParams::default()
        };
        let w = gen_workload(&pts, &params);
        for (q, sel) in &w.ranges {
            let hits = pts.iter().filter(|p| q.contains(&p.coords)).count();
            assert_eq!(*sel, hits as f64 / 1e5);
            assert!((9..=11).contains(&hits), "{hits}");
        }
    }

    #[test]
    fn selectivity_within_ten_percent_in_higher_dims() {
        let pts = gen_points::<4>(Distribution::Uniform, 50_000, 4);
        let params = WorkloadParams {
            count: 50,
            selectivity: 1e-3,
            ..WorkloadParams::default()
        };
        for (_, sel) in gen_workload(&pts, &params).ranges {
            assert!((sel / 1e-3 - 1.0).abs() <= 0.1, "{sel}");
        }
    }

    #[test]
    fn full_selectivity_covers_everything() {
        let pts = gen_points::<2>(Distribution::Uniform, 2000, 5);
        let params = WorkloadParams {
            count: 5,
            selectivity: 1.0,
            ..WorkloadParams::default()
        };
        for (_, sel) in gen_workload(&pts, &params).ranges {
            assert_eq!(sel, 1.0);
        }
    }

    #[test]
    fn mixed_workload_round_trips_and_is_deterministic() {
        let pts = gen_points::<3>(Distribution::Gaussian, 5000, 6);
        let params = WorkloadParams {
            kind: WorkloadKind::Mixed,
            count: 20,
            ..WorkloadParams::default()
        };
        let w = gen_workload(&pts, &params);
        assert_eq!(w.inserts.len(), 1500);
        assert_eq!(w.deletes.len(), 300);
        assert_eq!(w.knn.len(), 20);
        let ids: std::collections::HashSet<u64> = pts.iter().map(|p| p.id).collect();
        assert!(w.inserts.iter().all(|p| !ids.contains(&p.id)));
        let mut a = Vec::new();
        write_workload(&mut a, &w).unwrap();
        let mut b = Vec::new();
        write_workload(&mut b, &gen_workload(&pts, &params)).unwrap();
        assert_eq!(a, b);
        let back: Workload<3> = read_workload(&a[..]).unwrap();
        assert_eq!(back, w);
        let total: usize = (0..5).map(|i| w.batch(&w.inserts, i).len()).sum();
        assert_eq!(total, 1500);
    }
}
