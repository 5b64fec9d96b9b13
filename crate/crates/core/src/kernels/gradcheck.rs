//! Finite-difference verification of analytic gradients.
//!
//! Each kernel is wrapped as a scalar objective over one flat vector holding
//! its inputs followed by its parameters. Vector outputs are reduced to a
//! scalar with a fixed projection `Σ r_i · out_i`, so the analytic gradient is
//! the kernel's backward pass seeded with `r`.

use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::{
    bce_loss, bce_loss_grad, conv1d_dilated, conv1d_dilated_backward, gelu, gelu_derivative,
    linear, linear_backward, maxpool1d, maxpool1d_backward, self_attention,
    self_attention_backward, softmax, softmax_backward, AttentionParams, ConvParams, FeatureMap,
    LinearParams,
};
use crate::error::{Error, Result};

/// Denominator floor for the relative error, so entries whose true gradient
/// is zero are judged on absolute error.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

pub trait Differentiable: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Central differences `(f(x + h·e_i) − f(x − h·e_i)) / 2h` for every coordinate.
    fn central_differences(&self, x: &[f64], h: f64) -> Result<Vec<f64>> {
        (0..x.len())
            .into_par_iter()
            .map_init(
                || x.to_vec(),
                |probe, i| {
                    probe[i] = x[i] + h;
                    let plus = self.value(probe);
                    probe[i] = x[i] - h;
                    let minus = self.value(probe);
                    probe[i] = x[i];
                    Ok((plus? - minus?) / (2.0 * h))
                },
            )
            .collect()
    }
}

/// Worst relative error between the analytic gradient and central
/// differences `(f(x+h·e_i) − f(x−h·e_i)) / 2h` over every coordinate.
pub fn gradient_check<D: Differentiable + ?Sized>(op: &D, x: &[f64], eps: f64) -> Result<f64> {
    if eps <= 0.0 {
        return Err(Error::Input(format!("finite-difference step must be positive, got {eps}")));
    }
    if x.len() != op.dim() {
        return Err(Error::Shape(format!("objective takes {} values, got {}", op.dim(), x.len())));
    }
    let analytic = op.gradient(x)?;
    let numeric = op.central_differences(x, eps)?;
    let mut worst: f64 = 0.0;
    for (i, (&a, &n)) in analytic.iter().zip(&numeric).enumerate() {
        if !a.is_finite() || !n.is_finite() {
            return Err(Error::Numeric(format!("non-finite gradient at coordinate {i}")));
        }
        worst = worst.max(relative_error(a, n));
    }
    Ok(worst)
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(RELATIVE_ERROR_FLOOR)
}

fn projection(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub struct LinearObjective {
    pub out_dim: usize,
    pub in_dim: usize,
    projection: Vec<f64>,
}

impl LinearObjective {
    pub fn new(out_dim: usize, in_dim: usize, seed: u64) -> Self {
        Self {
            out_dim,
            in_dim,
            projection: projection(out_dim, seed),
        }
    }

    fn unpack(&self, x: &[f64]) -> (Vec<f64>, LinearParams) {
        let (input, rest) = x.split_at(self.in_dim);
        let (w, b) = rest.split_at(self.out_dim * self.in_dim);
        (
            input.to_vec(),
            LinearParams {
                out_dim: self.out_dim,
                in_dim: self.in_dim,
                weights: w.to_vec(),
                bias: b.to_vec(),
            },
        )
    }
}

impl Differentiable for LinearObjective {
    fn dim(&self) -> usize {
        self.in_dim + self.out_dim * (self.in_dim + 1)
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let (input, p) = self.unpack(x);
        Ok(dot(&linear(&input, &p)?, &self.projection))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (input, p) = self.unpack(x);
        let g = linear_backward(&input, &p, &self.projection)?;
        Ok([g.input, g.weights, g.bias].concat())
    }
}

pub struct ConvObjective {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub dilation: usize,
    pub length: usize,
    projection: Vec<f64>,
}

impl ConvObjective {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        dilation: usize,
        length: usize,
        seed: u64,
    ) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel_size,
            dilation,
            length,
            projection: projection(out_channels * length, seed),
        }
    }

    fn unpack(&self, x: &[f64]) -> Result<(FeatureMap, ConvParams)> {
        let (input, rest) = x.split_at(self.in_channels * self.length);
        let (w, b) = rest.split_at(self.out_channels * self.in_channels * self.kernel_size);
        Ok((
            FeatureMap::new(self.in_channels, self.length, input.to_vec())?,
            ConvParams {
                out_channels: self.out_channels,
                in_channels: self.in_channels,
                kernel_size: self.kernel_size,
                dilation: self.dilation,
                weights: w.to_vec(),
                bias: b.to_vec(),
            },
        ))
    }
}

impl Differentiable for ConvObjective {
    fn dim(&self) -> usize {
        self.in_channels * self.length
            + self.out_channels * self.in_channels * self.kernel_size
            + self.out_channels
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let (input, p) = self.unpack(x)?;
        Ok(dot(conv1d_dilated(&input, &p)?.values(), &self.projection))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (input, p) = self.unpack(x)?;
        let upstream = FeatureMap::new(self.out_channels, self.length, self.projection.clone())?;
        let g = conv1d_dilated_backward(&input, &p, &upstream)?;
        Ok([g.input.into_values(), g.weights, g.bias].concat())
    }
}

/// Max-pool over a `channels × length` input. Only meaningful away from ties.
pub struct PoolObjective {
    pub channels: usize,
    pub length: usize,
    projection: Vec<f64>,
}

impl PoolObjective {
    pub fn new(channels: usize, length: usize, seed: u64) -> Self {
        Self {
            channels,
            length,
            projection: projection(channels * (length / 2), seed),
        }
    }
}

impl Differentiable for PoolObjective {
    fn dim(&self) -> usize {
        self.channels * self.length
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let input = FeatureMap::new(self.channels, self.length, x.to_vec())?;
        Ok(dot(maxpool1d(&input)?.0.values(), &self.projection))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let input = FeatureMap::new(self.channels, self.length, x.to_vec())?;
        let (out, idx) = maxpool1d(&input)?;
        let upstream = FeatureMap::new(out.channels(), out.length(), self.projection.clone())?;
        Ok(maxpool1d_backward(&upstream, &idx)?.into_values())
    }
}

pub struct GeluObjective {
    projection: Vec<f64>,
}

impl GeluObjective {
    pub fn new(len: usize, seed: u64) -> Self {
        Self {
            projection: projection(len, seed),
        }
    }
}

impl Differentiable for GeluObjective {
    fn dim(&self) -> usize {
        self.projection.len()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(x.iter().zip(&self.projection).map(|(&v, r)| gelu(v) * r).sum())
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(x.iter().zip(&self.projection).map(|(&v, r)| gelu_derivative(v) * r).collect())
    }
}

pub struct SoftmaxObjective {
    projection: Vec<f64>,
}

impl SoftmaxObjective {
    pub fn new(len: usize, seed: u64) -> Self {
        Self {
            projection: projection(len, seed),
        }
    }
}

impl Differentiable for SoftmaxObjective {
    fn dim(&self) -> usize {
        self.projection.len()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(dot(&softmax(x), &self.projection))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax_backward(&softmax(x), &self.projection))
    }
}

pub struct AttentionObjective {
    pub input_dim: usize,
    pub key_dim: usize,
    pub value_dim: usize,
    pub tokens: usize,
    projection: Vec<f64>,
}

impl AttentionObjective {
    pub fn new(input_dim: usize, key_dim: usize, value_dim: usize, tokens: usize, seed: u64) -> Self {
        Self {
            input_dim,
            key_dim,
            value_dim,
            tokens,
            projection: projection(value_dim * tokens, seed),
        }
    }

    fn unpack(&self, x: &[f64]) -> Result<(FeatureMap, AttentionParams)> {
        let (input, rest) = x.split_at(self.input_dim * self.tokens);
        let (wq, rest) = rest.split_at(self.key_dim * self.input_dim);
        let (wk, wv) = rest.split_at(self.key_dim * self.input_dim);
        Ok((
            FeatureMap::new(self.input_dim, self.tokens, input.to_vec())?,
            AttentionParams {
                input_dim: self.input_dim,
                key_dim: self.key_dim,
                value_dim: self.value_dim,
                w_query: wq.to_vec(),
                w_key: wk.to_vec(),
                w_value: wv.to_vec(),
            },
        ))
    }
}

impl Differentiable for AttentionObjective {
    fn dim(&self) -> usize {
        self.input_dim * (self.tokens + 2 * self.key_dim + self.value_dim)
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let (input, p) = self.unpack(x)?;
        Ok(dot(self_attention(&input, &p)?.0.values(), &self.projection))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (input, p) = self.unpack(x)?;
        let (_, cache) = self_attention(&input, &p)?;
        let upstream = FeatureMap::new(self.value_dim, self.tokens, self.projection.clone())?;
        let g = self_attention_backward(&input, &p, &cache, &upstream)?;
        Ok([g.input.into_values(), g.w_query, g.w_key, g.w_value].concat())
    }
}

/// BCE as a function of the prediction, for a fixed label.
pub struct BceObjective {
    pub label: u8,
}

impl Differentiable for BceObjective {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        bce_loss(x[0], self.label)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![bce_loss_grad(x[0], self.label)?])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_point(dim: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn linear_3x4() {
        let op = LinearObjective::new(3, 4, 1);
        let err = gradient_check(&op, &random_point(op.dim(), 2), 1e-5).unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn conv_dilation_4_length_11() {
        let op = ConvObjective::new(2, 3, 3, 4, 11, 3);
        let err = gradient_check(&op, &random_point(op.dim(), 4), 1e-5).unwrap();
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn rejects_bad_step() {
        let op = BceObjective { label: 1 };
        assert!(gradient_check(&op, &[0.3], 0.0).is_err());
    }

    #[test]
    fn detects_wrong_gradient() {
        struct Wrong;
        impl Differentiable for Wrong {
            fn dim(&self) -> usize {
                1
            }
            fn value(&self, x: &[f64]) -> Result<f64> {
                Ok(x[0] * x[0])
            }
            fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
                Ok(vec![x[0]])
            }
        }
        assert!(gradient_check(&Wrong, &[1.0], 1e-5).unwrap() > 0.4);
    }
}
