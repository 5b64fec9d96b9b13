//! Trains MAD-CNN on a freshly simulated training split and saves the weights.
//!
//! `cargo run --release --example train -- [scale] [out.json]`

use madcnn::data::{fit_normalizer, make_dataset};
use madcnn::model::{save_weights, ModelConfig, Variant};
use madcnn::sim::{generate_corpus, SimConfig, Split};
use madcnn::train::{train_with_progress, TrainConfig};

fn main() -> madcnn::Result<()> {
    let mut args = std::env::args().skip(1);
    let scale: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.05);
    let out = args.next().unwrap_or_else(|| "weights-demo.json".into());

    let corpus = generate_corpus(&SimConfig::default(), 7, scale)?;
    let trace = &corpus.get(Split::TrainCollision, 4)?.trace;
    let stats = fit_normalizer(&[trace])?;
    let tc = TrainConfig::default();
    let data = make_dataset(&[trace], &stats, tc.seed)?;
    println!("{} frames, {} positive", data.len(), data.iter().filter(|f| f.label == 1).count());

    let result = train_with_progress(&ModelConfig::for_variant(Variant::Mad), &data, &tc, |e, l| {
        println!("epoch {e:>2}  loss {l:.5}")
    })?;
    save_weights(std::path::Path::new(&out), &result.params, Some(stats))?;
    println!("saved {out}");
    Ok(())
}
