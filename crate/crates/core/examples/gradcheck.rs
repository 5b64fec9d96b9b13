//! Central-difference gradient checks for every kernel and the full network.

use madcnn::data::FRAME_LEN;
use madcnn::kernels::gradcheck::{
    AttentionObjective, BceObjective, ConvObjective, GeluObjective, LinearObjective, PoolObjective, SoftmaxObjective,
};
use madcnn::kernels::{gradient_check, Differentiable};
use madcnn::model::{build_model, forward_values, ModelConfig, ModelObjective, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> madcnn::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ops: Vec<(&str, Box<dyn Differentiable>)> = vec![
        ("linear 3x4", Box::new(LinearObjective::new(3, 4, 1))),
        ("conv d=4", Box::new(ConvObjective::new(2, 3, 3, 4, 11, 1))),
        ("maxpool", Box::new(PoolObjective::new(3, 11, 1))),
        ("gelu", Box::new(GeluObjective::new(16, 1))),
        ("softmax", Box::new(SoftmaxObjective::new(5, 1))),
        ("attention", Box::new(AttentionObjective::new(4, 3, 5, 2, 1))),
        ("bce", Box::new(BceObjective { label: 1 })),
    ];
    for (name, op) in &ops {
        let mut x: Vec<f64> = (0..op.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if *name == "bce" {
            x[0] = 0.3;
        }
        println!("{name:<10} max relative error {:.2e}", gradient_check(op.as_ref(), &x, 1e-5)?);
    }

    let params = build_model(ModelConfig::for_variant(Variant::Mad), 42)?;
    // Max pooling is not differentiable at ties, so keep frames away from them.
    let frame = loop {
        let f: Vec<f64> = (0..FRAME_LEN).map(|_| rng.gen()).collect();
        let margin = forward_values(&params, &f)?.1.pool_margin();
        if margin > 1e-3 {
            println!("frame pool margin {margin:.2e}");
            break f;
        }
    };
    let op = ModelObjective::new(params.clone(), 1);
    let err = gradient_check(&op, &op.point(&params, &frame), 1e-5)?;
    println!("MAD + BCE  max relative error {err:.2e} over {} coordinates", op.dim());
    Ok(())
}
