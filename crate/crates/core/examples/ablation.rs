//! Trains all five variants on the same data and prints the comparison table.

use madcnn::eval::{ablation_run, comparison_table_csv, AblationOptions, DetectionReport};
use madcnn::model::Variant;
use madcnn::sim::{generate_corpus, SimConfig};
use madcnn::train::TrainConfig;

fn main() -> madcnn::Result<()> {
    let scale: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.02);
    let corpus = generate_corpus(&SimConfig::default(), 7, scale)?;
    let result = ablation_run(&Variant::ALL, &corpus, &TrainConfig::default(), &AblationOptions::default(), |v, e, l| {
        if e == 30 {
            eprintln!("{v:>3} final loss {l:.5}");
        }
    })?;
    let columns: Vec<(&str, &DetectionReport)> =
        result.columns.iter().map(|c| (c.variant.name(), &c.report)).collect();
    print!("{}", comparison_table_csv(&columns));
    Ok(())
}
