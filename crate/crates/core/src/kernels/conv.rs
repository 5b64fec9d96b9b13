use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use super::{axpy, dot, FeatureMap};
use crate::error::{ensure_finite, Error, Result};

/// Weights for a stride-1 dilated 1-D convolution with zero same-padding.
///
/// `weights` is laid out `[out][in][tap]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvParams {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel_size: usize,
    pub dilation: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvParams {
    pub fn zeros(out_channels: usize, in_channels: usize, kernel_size: usize, dilation: usize) -> Self {
        Self {
            out_channels,
            in_channels,
            kernel_size,
            dilation,
            weights: vec![0.0; out_channels * in_channels * kernel_size],
            bias: vec![0.0; out_channels],
        }
    }

    #[inline]
    pub fn weight(&self, out: usize, input: usize, tap: usize) -> f64 {
        self.weights[(out * self.in_channels + input) * self.kernel_size + tap]
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_size == 0 || self.kernel_size.is_multiple_of(2) {
            return Err(Error::Shape(format!(
                "same-padded convolution needs an odd kernel, got {}",
                self.kernel_size
            )));
        }
        if self.dilation == 0 || self.out_channels == 0 || self.in_channels == 0 {
            return Err(Error::Shape("convolution dims and dilation must be positive".into()));
        }
        if self.weights.len() != self.out_channels * self.in_channels * self.kernel_size
            || self.bias.len() != self.out_channels
        {
            return Err(Error::Shape(format!(
                "conv params {}x{}x{} have {} weights / {} biases",
                self.out_channels,
                self.in_channels,
                self.kernel_size,
                self.weights.len(),
                self.bias.len()
            )));
        }
        Ok(())
    }

    /// Offset of tap `k` relative to the output position.
    #[inline]
    fn tap_offset(&self, tap: usize) -> isize {
        (tap as isize - (self.kernel_size / 2) as isize) * self.dilation as isize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub input: FeatureMap,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

fn check_input(input: &FeatureMap, params: &ConvParams) -> Result<()> {
    params.validate()?;
    if input.channels() != params.in_channels {
        return Err(Error::Shape(format!(
            "conv expects {} input channels, got {}",
            params.in_channels,
            input.channels()
        )));
    }
    ensure_finite(input.values(), "conv input")
}

/// `out[c][t] = bias[c] + Σ_{i,k} w[c][i][k] · x[i][t + (k - K/2)·dilation]`,
/// reading zero outside the input.
pub fn conv1d_dilated(input: &FeatureMap, params: &ConvParams) -> Result<FeatureMap> {
    check_input(input, params)?;
    let len = input.length();
    // Taps that only ever read padding contribute nothing, so they are dropped.
    let taps: Vec<usize> = (0..params.kernel_size)
        .filter(|&k| params.tap_offset(k).unsigned_abs() < len)
        .collect();
    let width = params.in_channels * taps.len();
    let mut patches = vec![0.0; len * width];
    for i in 0..params.in_channels {
        let x = input.row(i);
        for (a, &k) in taps.iter().enumerate() {
            let off = params.tap_offset(k);
            let (lo, hi) = valid_range(len, off);
            for t in lo..hi {
                patches[t * width + i * taps.len() + a] = x[(t as isize + off) as usize];
            }
        }
    }
    let weights: Cow<[f64]> = if taps.len() == params.kernel_size {
        Cow::Borrowed(&params.weights)
    } else {
        let mut kept = Vec::with_capacity(params.out_channels * width);
        for w in params.weights.chunks_exact(params.kernel_size) {
            for &k in &taps {
                kept.push(w[k]);
            }
        }
        Cow::Owned(kept)
    };
    let mut out = vec![0.0; params.out_channels * len];
    for (c, (w_row, &b)) in weights.chunks_exact(width).zip(&params.bias).enumerate() {
        for (t, patch) in patches.chunks_exact(width).enumerate() {
            out[c * len + t] = b + dot(w_row, patch);
        }
    }
    Ok(FeatureMap::from_raw(params.out_channels, len, out))
}

pub fn conv1d_dilated_backward(
    input: &FeatureMap,
    params: &ConvParams,
    grad_out: &FeatureMap,
) -> Result<ConvGrads> {
    check_input(input, params)?;
    let len = input.length();
    if grad_out.channels() != params.out_channels || grad_out.length() != len {
        return Err(Error::Shape("conv upstream gradient shape mismatch".into()));
    }
    let width = params.in_channels * params.kernel_size;
    let patches = im2col(input, params);
    let mut g_patches = vec![0.0; patches.len()];
    let mut g_w = vec![0.0; params.weights.len()];
    let mut g_b = vec![0.0; params.out_channels];
    for c in 0..params.out_channels {
        let g = grad_out.row(c);
        g_b[c] = g.iter().sum();
        let w_row = &params.weights[c * width..(c + 1) * width];
        let gw_row = &mut g_w[c * width..(c + 1) * width];
        for (t, &gt) in g.iter().enumerate() {
            axpy(gt, &patches[t * width..(t + 1) * width], gw_row);
            axpy(gt, w_row, &mut g_patches[t * width..(t + 1) * width]);
        }
    }
    // Scatter patch gradients back onto the input positions they were read from.
    let mut g_in = vec![0.0; params.in_channels * len];
    for t in 0..len {
        for i in 0..params.in_channels {
            for k in 0..params.kernel_size {
                let src = t as isize + params.tap_offset(k);
                if (0..len as isize).contains(&src) {
                    g_in[i * len + src as usize] += g_patches[t * width + i * params.kernel_size + k];
                }
            }
        }
    }
    Ok(ConvGrads {
        input: FeatureMap::from_raw(params.in_channels, len, g_in),
        weights: g_w,
        bias: g_b,
    })
}

/// `len × (in_channels·kernel)` matrix of zero-padded receptive fields, row
/// `t` ordered like a weight row `[in][tap]`.
fn im2col(input: &FeatureMap, params: &ConvParams) -> Vec<f64> {
    let len = input.length();
    let width = params.in_channels * params.kernel_size;
    let mut patches = vec![0.0; len * width];
    for i in 0..params.in_channels {
        let x = input.row(i);
        for k in 0..params.kernel_size {
            let (lo, hi) = valid_range(len, params.tap_offset(k));
            let off = params.tap_offset(k);
            for t in lo..hi {
                patches[t * width + i * params.kernel_size + k] = x[(t as isize + off) as usize];
            }
        }
    }
    patches
}

/// Output positions `t` for which `t + off` indexes inside `0..len`.
#[inline]
fn valid_range(len: usize, off: isize) -> (usize, usize) {
    let lo = (-off).max(0) as usize;
    let hi = (len as isize - off).clamp(0, len as isize) as usize;
    (lo.min(hi), hi)
}
