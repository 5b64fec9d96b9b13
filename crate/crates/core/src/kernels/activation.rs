use std::f64::consts::{FRAC_1_SQRT_2, PI};

use super::FeatureMap;

/// Exact GELU, `x·Φ(x)`.
#[inline]
pub fn gelu(x: f64) -> f64 {
    x * normal_cdf(x)
}

/// `d/dx [x·Φ(x)] = Φ(x) + x·φ(x)`.
#[inline]
pub fn gelu_derivative(x: f64) -> f64 {
    normal_cdf(x) + x * (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

#[inline]
fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x * FRAC_1_SQRT_2))
}

pub fn gelu_map(input: &FeatureMap) -> FeatureMap {
    let values = input.values().iter().map(|&x| gelu(x)).collect();
    FeatureMap::from_raw(input.channels(), input.length(), values)
}

/// Gradient through an elementwise GELU, given the pre-activation values.
pub fn gelu_backward(pre: &[f64], grad_out: &[f64]) -> Vec<f64> {
    pre.iter()
        .zip(grad_out)
        .map(|(&x, &g)| g * gelu_derivative(x))
        .collect()
}

/// Max-shifted softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Vector-Jacobian product of softmax: `g_z[i] = p[i]·(g_p[i] − Σ_j p[j]·g_p[j])`.
pub fn softmax_backward(p: &[f64], grad_p: &[f64]) -> Vec<f64> {
    let dot: f64 = p.iter().zip(grad_p).map(|(a, b)| a * b).sum();
    p.iter().zip(grad_p).map(|(&pi, &gi)| pi * (gi - dot)).collect()
}
