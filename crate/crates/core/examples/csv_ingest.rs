//! Load floating-point CSV data and query it in the original units.
//!
//! cargo run --release --example csv_ingest

use std::io::Write;

use skdtree::bench::dataset::load_dataset;
use skdtree::model::{decode_f64, encode_f64};
use skdtree::{BuildConfig, RangeQuery, SkdTree};

fn main() {
    let path = std::env::temp_dir().join("skdtree_csv_ingest.csv");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "lon,lat,id").unwrap();
    for i in 0..5000u64 {
        let lon = -180.0 + 360.0 * ((i * 7919) % 5000) as f64 / 5000.0;
        let lat = -90.0 + 180.0 * ((i * 104_729) % 5000) as f64 / 5000.0;
        writeln!(f, "{lon},{lat},{i}").unwrap();
    }
    drop(f);

    let points = load_dataset::<2>(&path).unwrap();
    let tree = SkdTree::build(points, BuildConfig::default()).unwrap();

    // negative coordinates keep their order after encoding
    let enc = |v: f64| encode_f64(v).unwrap();
    let q = RangeQuery::new([enc(-10.0), enc(-5.0)], [enc(10.0), enc(5.0)]).unwrap();
    let hits = tree.range_query(&q);
    println!("{} points in lon [-10, 10], lat [-5, 5]", hits.len());
    for p in hits.iter().take(5) {
        println!("  id {:>4}: ({:.3}, {:.3})", p.id, decode_f64(p.coords[0]), decode_f64(p.coords[1]));
    }
    std::fs::remove_file(path).ok();
}
