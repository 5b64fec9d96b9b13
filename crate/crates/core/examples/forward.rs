//! Builds the five architectures and runs one frame through each.

use madcnn::data::FRAME_LEN;
use madcnn::model::{build_model, count_parameters, forward_values, ModelConfig, Variant};

fn main() -> madcnn::Result<()> {
    let frame: Vec<f64> = (0..FRAME_LEN).map(|i| 0.5 + 0.4 * (i as f64 * 0.7).sin()).collect();
    println!("{:<4} {:>9} {:>9} {:>10}  tensors", "", "params", "branches", "p_coll");
    for v in Variant::ALL {
        let cfg = ModelConfig::for_variant(v);
        let params = build_model(cfg, 42)?;
        let (pred, _) = forward_values(&params, &frame)?;
        println!(
            "{:<4} {:>9} {:>9} {:>10.6}  {}",
            v.name(),
            count_parameters(&cfg),
            params.branches.len(),
            pred.p_collision,
            params.tensors().len()
        );
    }
    Ok(())
}
