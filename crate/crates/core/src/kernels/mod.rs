//! Numerical building blocks with hand-written backward passes.
//!
//! Every forward kernel has a matching `*_backward` that returns exact
//! analytic gradients. Everything runs in `f64`.

mod activation;
mod adam;
mod attention;
mod conv;
pub mod gradcheck;
mod linear;
mod loss;
mod pool;
mod tensor;

pub use activation::{gelu, gelu_backward, gelu_derivative, gelu_map, softmax, softmax_backward};
pub use adam::{adam_step, AdamConfig, AdamState};
pub use attention::{
    self_attention, self_attention_backward, AttentionCache, AttentionGrads, AttentionParams,
};
pub use conv::{conv1d_dilated, conv1d_dilated_backward, ConvGrads, ConvParams};
pub use gradcheck::{gradient_check, Differentiable};
pub use linear::{linear, linear_backward, LinearGrads, LinearParams};
pub use loss::{bce_loss, bce_loss_grad, BCE_CLAMP};
pub use pool::{maxpool1d, maxpool1d_backward, PoolIndices};
pub use tensor::FeatureMap;

/// Dot product with four independent accumulators; the summation order is
/// fixed, so results are reproducible.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0; 4];
    let (a4, a_rest) = a.split_at(a.len() / 4 * 4);
    let (b4, b_rest) = b.split_at(a4.len());
    for (x, y) in a4.chunks_exact(4).zip(b4.chunks_exact(4)) {
        for j in 0..4 {
            acc[j] += x[j] * y[j];
        }
    }
    let mut sum = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in a_rest.iter().zip(b_rest) {
        sum += x * y;
    }
    sum
}

/// `y += alpha · x`
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
