//! Generates a small corpus and writes it as CSV traces plus a manifest.
//!
//! `cargo run --release --example simulate -- <dir> [scale]`

use madcnn::eval::extract_intervals;
use madcnn::sim::{generate_corpus, write_corpus, SimConfig};

fn main() -> madcnn::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = args.next().unwrap_or_else(|| "corpus-demo".into());
    let scale: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.02);

    let corpus = generate_corpus(&SimConfig::default(), 7, scale)?;
    for e in &corpus.entries {
        let t = &e.trace;
        let peak = (0..2).flat_map(|j| t.torque(j).iter()).fold(0.0f64, |m, v| m.max(v.abs()));
        println!(
            "{:<22} level {}  {:>7.1} s  {:>3} collisions  {:>3} labeled runs  peak |tau| {:.2} N m",
            e.info.name,
            e.info.stiffness_level,
            e.info.duration_s,
            e.info.collisions,
            extract_intervals(t.labels()).len(),
            peak
        );
    }
    write_corpus(std::path::Path::new(&dir), &corpus)?;
    println!("wrote {dir}/");
    Ok(())
}
