//! Single-head scaled dot-product self-attention.
//!
//! The input is a `d × n` matrix whose columns are tokens. Queries, keys and
//! values are column-wise projections, and each query's scores are
//! normalized over all keys, so every output column is a convex combination
//! of value columns.

use serde::{Deserialize, Serialize};

use super::{axpy, dot, softmax, softmax_backward, FeatureMap};
use crate::error::{ensure_finite, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    pub input_dim: usize,
    pub key_dim: usize,
    pub value_dim: usize,
    /// `key_dim × input_dim`, row-major.
    pub w_query: Vec<f64>,
    /// `key_dim × input_dim`, row-major.
    pub w_key: Vec<f64>,
    /// `value_dim × input_dim`, row-major.
    pub w_value: Vec<f64>,
}

impl AttentionParams {
    pub fn zeros(input_dim: usize, key_dim: usize, value_dim: usize) -> Self {
        Self {
            input_dim,
            key_dim,
            value_dim,
            w_query: vec![0.0; key_dim * input_dim],
            w_key: vec![0.0; key_dim * input_dim],
            w_value: vec![0.0; value_dim * input_dim],
        }
    }

    fn check(&self) -> Result<()> {
        let qk = self.key_dim * self.input_dim;
        if self.input_dim == 0 || self.key_dim == 0 || self.value_dim == 0 {
            return Err(Error::Shape("attention dims must be positive".into()));
        }
        if self.w_query.len() != qk
            || self.w_key.len() != qk
            || self.w_value.len() != self.value_dim * self.input_dim
        {
            return Err(Error::Shape("attention weight sizes do not match dims".into()));
        }
        Ok(())
    }
}

/// Intermediates kept for the backward pass.
#[derive(Debug, Clone)]
pub struct AttentionCache {
    pub query: FeatureMap,
    pub key: FeatureMap,
    pub value: FeatureMap,
    /// Row `q` holds the normalized weights of query `q` over all keys (`n × n`).
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct AttentionGrads {
    pub input: FeatureMap,
    pub w_query: Vec<f64>,
    pub w_key: Vec<f64>,
    pub w_value: Vec<f64>,
}

/// `W·I` for a row-major `rows × input.channels()` matrix `W`.
fn project(w: &[f64], rows: usize, input: &FeatureMap) -> FeatureMap {
    let (d, n) = (input.channels(), input.length());
    let tokens: Vec<Vec<f64>> = (0..n).map(|t| (0..d).map(|c| input.get(c, t)).collect()).collect();
    let mut out = vec![0.0; rows * n];
    for (r, w_row) in w.chunks_exact(d).take(rows).enumerate() {
        for (t, tok) in tokens.iter().enumerate() {
            out[r * n + t] = dot(w_row, tok);
        }
    }
    FeatureMap::from_raw(rows, n, out)
}

pub fn self_attention(input: &FeatureMap, params: &AttentionParams) -> Result<(FeatureMap, AttentionCache)> {
    params.check()?;
    if input.channels() != params.input_dim {
        return Err(Error::Shape(format!(
            "attention expects {}-dim tokens, got {}",
            params.input_dim,
            input.channels()
        )));
    }
    ensure_finite(input.values(), "attention input")?;
    let n = input.length();
    let scale = 1.0 / (params.key_dim as f64).sqrt();
    let query = project(&params.w_query, params.key_dim, input);
    let key = project(&params.w_key, params.key_dim, input);
    let value = project(&params.w_value, params.value_dim, input);

    let mut weights = Vec::with_capacity(n * n);
    for q in 0..n {
        let scores: Vec<f64> = (0..n)
            .map(|k| {
                (0..params.key_dim)
                    .map(|r| query.get(r, q) * key.get(r, k))
                    .sum::<f64>()
                    * scale
            })
            .collect();
        weights.extend(softmax(&scores));
    }

    let mut out = vec![0.0; params.value_dim * n];
    for r in 0..params.value_dim {
        let v_row = value.row(r);
        for q in 0..n {
            let a = &weights[q * n..(q + 1) * n];
            out[r * n + q] = a.iter().zip(v_row).map(|(w, v)| w * v).sum();
        }
    }
    Ok((
        FeatureMap::from_raw(params.value_dim, n, out),
        AttentionCache {
            query,
            key,
            value,
            weights,
        },
    ))
}

pub fn self_attention_backward(
    input: &FeatureMap,
    params: &AttentionParams,
    cache: &AttentionCache,
    grad_out: &FeatureMap,
) -> Result<AttentionGrads> {
    params.check()?;
    let (d, n) = (input.channels(), input.length());
    if d != params.input_dim || grad_out.channels() != params.value_dim || grad_out.length() != n {
        return Err(Error::Shape("attention backward shape mismatch".into()));
    }
    let scale = 1.0 / (params.key_dim as f64).sqrt();
    let a = &cache.weights;
    let (s1, s) = (params.key_dim, params.value_dim);

    // Token-major copies so every inner loop runs over contiguous memory.
    let tokens_of = |m: &FeatureMap| -> Vec<Vec<f64>> {
        (0..m.length()).map(|t| (0..m.channels()).map(|c| m.get(c, t)).collect()).collect()
    };
    let x_tok = tokens_of(input);
    let q_tok = tokens_of(&cache.query);
    let k_tok = tokens_of(&cache.key);
    let v_tok = tokens_of(&cache.value);
    let gz_tok = tokens_of(grad_out);

    // dV_k = Σ_q A[q][k]·dZ_q
    let mut gv_tok = vec![vec![0.0; s]; n];
    for q in 0..n {
        for k in 0..n {
            axpy(a[q * n + k], &gz_tok[q], &mut gv_tok[k]);
        }
    }

    // dA[q][k] = dZ_q · V_k, then through the softmax of each query row.
    let mut gq_tok = vec![vec![0.0; s1]; n];
    let mut gk_tok = vec![vec![0.0; s1]; n];
    for q in 0..n {
        let g_a: Vec<f64> = (0..n).map(|k| dot(&gz_tok[q], &v_tok[k])).collect();
        let g_s = softmax_backward(&a[q * n..(q + 1) * n], &g_a);
        for (k, g) in g_s.into_iter().enumerate() {
            axpy(g * scale, &k_tok[k], &mut gq_tok[q]);
            axpy(g * scale, &q_tok[q], &mut gk_tok[k]);
        }
    }

    // dW = Σ_t dY_t ⊗ X_t and dX_t = Wᵀ·dY_t for each projection.
    let mut g_in_tok = vec![vec![0.0; d]; n];
    let mut backproject = |w: &[f64], g_tok: &[Vec<f64>], rows: usize| -> Vec<f64> {
        let mut g_w = vec![0.0; rows * d];
        for t in 0..n {
            for r in 0..rows {
                let g = g_tok[t][r];
                axpy(g, &x_tok[t], &mut g_w[r * d..(r + 1) * d]);
                axpy(g, &w[r * d..(r + 1) * d], &mut g_in_tok[t]);
            }
        }
        g_w
    };
    let w_query = backproject(&params.w_query, &gq_tok, s1);
    let w_key = backproject(&params.w_key, &gk_tok, s1);
    let w_value = backproject(&params.w_value, &gv_tok, s);

    let mut g_in = vec![0.0; d * n];
    for (t, tok) in g_in_tok.iter().enumerate() {
        for (c, &v) in tok.iter().enumerate() {
            g_in[c * n + t] = v;
        }
    }

    Ok(AttentionGrads {
        input: FeatureMap::from_raw(d, n, g_in),
        w_query,
        w_key,
        w_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(d: usize, s1: usize, s: usize, seed: u64) -> AttentionParams {
        let mut x = seed;
        let mut next = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((x >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        AttentionParams {
            input_dim: d,
            key_dim: s1,
            value_dim: s,
            w_query: (0..s1 * d).map(|_| next()).collect(),
            w_key: (0..s1 * d).map(|_| next()).collect(),
            w_value: (0..s * d).map(|_| next()).collect(),
        }
    }

    #[test]
    fn single_token_returns_value_projection() {
        let p = params(3, 2, 4, 7);
        let x = FeatureMap::new(3, 1, vec![0.4, -1.0, 2.0]).unwrap();
        let (z, cache) = self_attention(&x, &p).unwrap();
        assert_eq!(cache.weights, vec![1.0]);
        assert_eq!(z.values(), cache.value.values());
    }

    #[test]
    fn identical_tokens_get_uniform_weights() {
        let p = params(2, 2, 3, 11);
        let col = [0.7, -0.2];
        let x = FeatureMap::new(2, 3, vec![col[0], col[0], col[0], col[1], col[1], col[1]]).unwrap();
        let (z, cache) = self_attention(&x, &p).unwrap();
        for w in &cache.weights {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
        for r in 0..3 {
            let expect = p.w_value[r * 2] * col[0] + p.w_value[r * 2 + 1] * col[1];
            for t in 0..3 {
                assert!((z.get(r, t) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        let p = params(3, 2, 2, 1);
        let x = FeatureMap::zeros(2, 2);
        assert!(matches!(self_attention(&x, &p), Err(Error::Shape(_))));
    }
}
