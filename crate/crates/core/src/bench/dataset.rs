//! Synthetic datasets and their on-disk formats.

use std::io::{self, Read, Write};
use std::path::Path;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution as _, Normal};
use thiserror::Error;

use crate::model::{encode_f64, encode_u64, CoordKey, Point, MAX_COORD};

pub const DATASET_MAGIC: &[u8; 4] = b"SKD1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    Uniform,
    Gaussian,
    /// Few distinct values per dimension plus a share of exact copies of hot points.
    Duplicate,
}

impl std::str::FromStr for Distribution {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(Self::Uniform),
            "gaussian" => Ok(Self::Gaussian),
            "duplicate" => Ok(Self::Duplicate),
            other => Err(format!("unknown distribution `{other}` (expected uniform|gaussian|duplicate)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad magic, expected {expected:?}")]
    Magic { expected: String },
    #[error("file has {found} dimensions, expected {expected}")]
    Dims { found: usize, expected: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("csv row {row}: {msg}")]
    CsvRow { row: usize, msg: String },
}

/// `n` points with ids `0..n`, a deterministic function of the arguments.
pub fn gen_points<const D: usize>(dist: Distribution, n: usize, seed: u64) -> Vec<Point<D>> {
    let mut rng = StdRng::seed_from_u64(seed);
    match dist {
        Distribution::Uniform => (0..n)
            .map(|i| Point::new(std::array::from_fn(|_| encode_u64(rng.gen())), i as u64))
            .collect(),
        Distribution::Gaussian => {
            let domain = MAX_COORD as f64;
            let normals: [Normal<f64>; D] = std::array::from_fn(|_| {
                let mean = rng.gen::<f64>() * domain;
                let sigma = rng.gen_range(0.05..=0.30) * domain;
                Normal::new(mean, sigma).expect("finite sigma")
            });
            (0..n)
                .map(|i| {
                    let coords = std::array::from_fn(|d| {
                        let x = normals[d].sample(&mut rng);
                        // `as` saturates, and the clamp keeps MAXVAL free
                        (x.max(0.0) as u64).min(MAX_COORD)
                    });
                    Point::new(coords, i as u64)
                })
                .collect()
        }
        Distribution::Duplicate => {
            const LEVELS: u64 = 64;
            let step = MAX_COORD / LEVELS;
            let hot: Vec<[CoordKey; D]> = (0..16)
                .map(|_| std::array::from_fn(|_| rng.gen_range(0..LEVELS) * step))
                .collect();
            (0..n)
                .map(|i| {
                    let coords = if rng.gen_bool(0.3) {
                        hot[rng.gen_range(0..hot.len())]
                    } else {
                        std::array::from_fn(|_| rng.gen_range(0..LEVELS) * step)
                    };
                    Point::new(coords, i as u64)
                })
                .collect()
        }
    }
}

pub fn write_dataset<const D: usize, W: Write>(mut w: W, points: &[Point<D>]) -> io::Result<()> {
    w.write_all(DATASET_MAGIC)?;
    w.write_all(&(D as u32).to_le_bytes())?;
    w.write_all(&(points.len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(8 * (D + 1));
    for p in points {
        buf.clear();
        for c in p.coords {
            buf.extend_from_slice(&c.to_le_bytes());
        }
        buf.extend_from_slice(&p.id.to_le_bytes());
        w.write_all(&buf)?;
    }
    w.flush()
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_magic<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<(), DataError> {
    let mut m = [0; 4];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(DataError::Magic {
            expected: String::from_utf8_lossy(magic).into_owned(),
        });
    }
    Ok(())
}

/// Dimensionality stored in a dataset file header.
pub fn dataset_dims(path: &Path) -> Result<usize, DataError> {
    let mut f = std::fs::File::open(path)?;
    read_magic(&mut f, DATASET_MAGIC)?;
    Ok(read_u32(&mut f)? as usize)
}

pub fn read_dataset<const D: usize, R: Read>(mut r: R) -> Result<Vec<Point<D>>, DataError> {
    read_magic(&mut r, DATASET_MAGIC)?;
    let dims = read_u32(&mut r)? as usize;
    if dims != D {
        return Err(DataError::Dims { found: dims, expected: D });
    }
    let n = read_u64(&mut r)? as usize;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut coords = [0; D];
        for c in coords.iter_mut() {
            *c = read_u64(&mut r)?;
        }
        out.push(Point::new(coords, read_u64(&mut r)?));
    }
    Ok(out)
}

pub fn save_dataset<const D: usize>(path: &Path, points: &[Point<D>]) -> io::Result<()> {
    write_dataset(io::BufWriter::new(std::fs::File::create(path)?), points)
}

pub fn load_dataset<const D: usize>(path: &Path) -> Result<Vec<Point<D>>, DataError> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        return read_csv(std::fs::File::open(path)?);
    }
    read_dataset(io::BufReader::new(std::fs::File::open(path)?))
}

/// Number of coordinate columns in a CSV file (an extra trailing column is the id).
pub fn csv_dims(path: &Path, id_column: bool) -> Result<usize, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let first = rdr.records().next().transpose()?.map_or(0, |r| r.len());
    Ok(first.saturating_sub(usize::from(id_column)))
}

/// Reads a CSV of `D` numeric columns plus an optional trailing id column.
///
/// A first row that does not parse as numbers is taken as a header. A column
/// whose values are all unsigned integers passes through unchanged; any other
/// column is read as doubles and mapped with the order-preserving transform.
pub fn read_csv<const D: usize, R: Read>(r: R) -> Result<Vec<Point<D>>, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(r);
    let mut rows: Vec<csv::StringRecord> = rdr.records().collect::<Result<_, _>>()?;
    if rows.first().is_some_and(|r| r.iter().any(|f| f.parse::<f64>().is_err())) {
        rows.remove(0);
    }
    let width = rows.first().map_or(D, |r| r.len());
    if width != D && width != D + 1 {
        return Err(DataError::CsvRow {
            row: 0,
            msg: format!("{width} columns, expected {D} or {}", D + 1),
        });
    }
    let mut unsigned = [true; D];
    for (i, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(DataError::CsvRow {
                row: i,
                msg: format!("{} columns, expected {width}", row.len()),
            });
        }
        for d in 0..D {
            unsigned[d] &= row[d].parse::<u64>().is_ok();
        }
    }
    let mut out = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let mut coords = [0; D];
        for d in 0..D {
            coords[d] = if unsigned[d] {
                encode_u64(row[d].parse().unwrap())
            } else {
                let v: f64 = row[d].parse().map_err(|_| DataError::CsvRow {
                    row: i,
                    msg: format!("column {d}: `{}` is not a number", &row[d]),
                })?;
                encode_f64(v).ok_or(DataError::CsvRow {
                    row: i,
                    msg: format!("column {d}: non-finite value"),
                })?
            };
        }
        let id = if width == D + 1 {
            row[D].parse().map_err(|_| DataError::CsvRow {
                row: i,
                msg: format!("id `{}` is not an unsigned integer", &row[D]),
            })?
        } else {
            i as u64
        };
        out.push(Point::new(coords, id));
    }
    Ok(out)
}

pub fn write_csv<const D: usize, W: Write>(w: W, points: &[Point<D>]) -> Result<(), DataError> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header: Vec<String> = (0..D).map(|d| format!("x{d}")).collect();
    header.push("id".into());
    wtr.write_record(&header)?;
    for p in points {
        let mut rec: Vec<String> = p.coords.iter().map(|c| c.to_string()).collect();
        rec.push(p.id.to_string());
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        for dist in [Distribution::Uniform, Distribution::Gaussian, Distribution::Duplicate] {
            let a = gen_points::<2>(dist, 1000, 7);
            let b = gen_points::<2>(dist, 1000, 7);
            let (mut fa, mut fb) = (Vec::new(), Vec::new());
            write_dataset(&mut fa, &a).unwrap();
            write_dataset(&mut fb, &b).unwrap();
            assert_eq!(fa, fb);
            assert_ne!(a, gen_points::<2>(dist, 1000, 8));
        }
    }

    #[test]
    fn gaussian_stays_in_domain() {
        let pts = gen_points::<3>(Distribution::Gaussian, 20000, 3);
        assert!(pts.iter().all(|p| p.coords.iter().all(|&c| c <= MAX_COORD)));
        // clamping actually engages for some dimension with a wide sigma
        let at_edge = pts.iter().filter(|p| p.coords.iter().any(|&c| c == 0 || c == MAX_COORD)).count();
        assert!(at_edge > 0);
    }

    #[test]
    fn uniform_mean_near_midpoint() {
        let n = 1_000_000;
        let pts = gen_points::<2>(Distribution::Uniform, n, 11);
        let mid = MAX_COORD as f64 / 2.0;
        for d in 0..2 {
            let mean = pts.iter().map(|p| p.coords[d] as f64).sum::<f64>() / n as f64;
            // 3 sigma of the sample mean is about 0.17% of the domain; 2% is loose
            assert!((mean - mid).abs() < 0.02 * mid, "dim {d} mean {mean}");
        }
    }

    #[test]
    fn duplicates_are_heavy() {
        let pts = gen_points::<2>(Distribution::Duplicate, 10000, 5);
        let mut c: Vec<[u64; 2]> = pts.iter().map(|p| p.coords).collect();
        c.sort();
        c.dedup();
        assert!(c.len() < 5000);
    }

    #[test]
    fn binary_round_trip() {
        let pts = gen_points::<4>(Distribution::Uniform, 123, 1);
        let mut buf = Vec::new();
        write_dataset(&mut buf, &pts).unwrap();
        assert_eq!(buf.len(), 16 + 123 * 40);
        assert_eq!(read_dataset::<4, _>(&buf[..]).unwrap(), pts);
        assert!(matches!(read_dataset::<3, _>(&buf[..]), Err(DataError::Dims { found: 4, expected: 3 })));
        assert!(matches!(read_dataset::<4, _>(&b"XXXX"[..]), Err(DataError::Magic { .. })));
    }

    #[test]
    fn csv_ingest() {
        let text = "x,y,id\n1,2.5,10\n3,-1.0,11\n";
        let pts: Vec<Point<2>> = read_csv(text.as_bytes()).unwrap();
        assert_eq!(pts[0].coords[0], 1);
        assert_eq!(pts[1].id, 11);
        assert!(pts[1].coords[1] < pts[0].coords[1]);
        assert_eq!(pts[0].coords[1], encode_f64(2.5).unwrap());
        let pts: Vec<Point<2>> = read_csv("4,5\n6,7\n".as_bytes()).unwrap();
        assert_eq!(pts[1], Point::new([6, 7], 1));
        assert!(read_csv::<2, _>("1,2\n3,nan\n".as_bytes()).is_err());
        assert!(read_csv::<3, _>("1,2\n".as_bytes()).is_err());
        let mut out = Vec::new();
        write_csv(&mut out, &pts).unwrap();
        assert_eq!(read_csv::<2, _>(&out[..]).unwrap(), pts);
    }
}
