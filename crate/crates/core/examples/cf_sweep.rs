//! Trains briefly, then sweeps the continuous-filter duration from 0 to 27 ms
//! and writes the sweep as CSV and SVG.

use madcnn::data::{fit_normalizer, make_dataset};
use madcnn::eval::{cf_sweep, infer_corpus, sweep_csv, sweep_svg, ScoringRules};
use madcnn::model::{ModelConfig, Variant};
use madcnn::sim::{generate_corpus, SimConfig, Split};
use madcnn::train::{train, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = generate_corpus(&SimConfig::default(), 7, 0.05)?;
    let trace = &corpus.get(Split::TrainCollision, 4)?.trace;
    let stats = fit_normalizer(&[trace])?;
    let data = make_dataset(&[trace], &stats, 0)?;
    let tc = TrainConfig { batch_size: 250, epochs: 10, ..TrainConfig::default() };
    let params = train(&ModelConfig::for_variant(Variant::Mad), &data, &tc)?.params;

    let traces = infer_corpus(&params, &stats, &corpus, 0.5)?;
    let rows = cf_sweep(&traces, 0..=27, &ScoringRules::default())?;
    let csv = sweep_csv(&rows)?;
    print!("{csv}");
    std::fs::write("cf_sweep_demo.csv", &csv)?;
    std::fs::write("cf_sweep_demo.svg", sweep_svg(&rows))?;
    Ok(())
}
