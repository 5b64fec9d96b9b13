//! Straight-line reference implementations used as test oracles.
#![allow(dead_code)]

use madcnn::kernels::{AttentionParams, ConvParams, LinearParams};
use madcnn::model::ModelParameters;

pub type Matrix = Vec<Vec<f64>>;

/// Same-padded dilated convolution over `x[channel][t]`.
pub fn naive_conv(x: &Matrix, p: &ConvParams) -> Matrix {
    let len = x[0].len();
    let k = p.kernel_size;
    let half = (k / 2) as isize;
    let mut out = vec![vec![0.0; len]; p.out_channels];
    for c in 0..p.out_channels {
        for t in 0..len {
            let mut acc = p.bias[c];
            for i in 0..p.in_channels {
                for tap in 0..k {
                    let src = t as isize + (tap as isize - half) * p.dilation as isize;
                    if src >= 0 && (src as usize) < len {
                        acc += p.weights[(c * p.in_channels + i) * k + tap] * x[i][src as usize];
                    }
                }
            }
            out[c][t] = acc;
        }
    }
    out
}

fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let (n, m, p) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; p]; n];
    for i in 0..n {
        for j in 0..p {
            for k in 0..m {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

fn reshape(v: &[f64], rows: usize, cols: usize) -> Matrix {
    (0..rows).map(|r| v[r * cols..(r + 1) * cols].to_vec()).collect()
}

fn transpose(a: &Matrix) -> Matrix {
    (0..a[0].len()).map(|j| a.iter().map(|row| row[j]).collect()).collect()
}

/// `Z = V · softmax_rows(QᵀK / √dk)ᵀ` with `Q = Wq I`, `K = Wk I`, `V = Wv I`
/// for an input `I` of shape `d × n` (tokens as columns).
pub fn naive_attention(input: &Matrix, p: &AttentionParams) -> Matrix {
    let d = p.input_dim;
    let q = matmul(&reshape(&p.w_query, p.key_dim, d), input);
    let k = matmul(&reshape(&p.w_key, p.key_dim, d), input);
    let v = matmul(&reshape(&p.w_value, p.value_dim, d), input);
    let mut scores = matmul(&transpose(&q), &k);
    let scale = (p.key_dim as f64).sqrt();
    for row in &mut scores {
        let m = row.iter().map(|x| x / scale).fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = row.iter().map(|x| (x / scale - m).exp()).collect();
        let s: f64 = e.iter().sum();
        for (r, x) in row.iter_mut().zip(e) {
            *r = x / s;
        }
    }
    matmul(&v, &transpose(&scores))
}

pub fn naive_gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

fn naive_pool(x: &Matrix) -> Matrix {
    x.iter()
        .map(|row| (0..row.len() / 2).map(|j| if row[2 * j + 1] > row[2 * j] { row[2 * j + 1] } else { row[2 * j] }).collect())
        .collect()
}

fn naive_linear(x: &[f64], p: &LinearParams) -> Vec<f64> {
    (0..p.out_dim)
        .map(|o| p.bias[o] + (0..p.in_dim).map(|i| p.weights[o * p.in_dim + i] * x[i]).sum::<f64>())
        .collect()
}

/// Collision probability computed layer by layer from the raw tensors.
pub fn naive_forward(params: &ModelParameters, frame: &[f64]) -> f64 {
    let cfg = &params.config;
    let steps = cfg.window_steps;
    let in_ch = frame.len() / steps / params.branches.len();
    let mut fused = Vec::new();
    for (b, br) in params.branches.iter().enumerate() {
        let x: Matrix = (0..in_ch).map(|c| frame[(b * in_ch + c) * steps..(b * in_ch + c + 1) * steps].to_vec()).collect();
        let a1: Matrix = naive_conv(&x, &br.conv1).iter().map(|r| r.iter().map(|&v| naive_gelu(v)).collect()).collect();
        let p1 = naive_pool(&a1);
        let a2: Matrix = naive_conv(&p1, &br.conv2).iter().map(|r| r.iter().map(|&v| naive_gelu(v)).collect()).collect();
        let p2 = naive_pool(&a2);
        let flat: Vec<f64> = p2.concat();
        fused.extend(naive_linear(&flat, &br.fc).into_iter().map(naive_gelu));
    }
    let head_in = match &params.attention {
        Some(att) => {
            let tokens = cfg.joints;
            let dim = fused.len() / tokens;
            let input: Matrix = (0..dim).map(|c| (0..tokens).map(|t| fused[t * dim + c]).collect()).collect();
            let z = naive_attention(&input, att);
            (0..tokens).flat_map(|t| (0..z.len()).map(move |c| (t, c))).map(|(t, c)| z[c][t]).collect()
        }
        None => fused,
    };
    let h: Vec<f64> = naive_linear(&head_in, &params.head).into_iter().map(naive_gelu).collect();
    let logits = naive_linear(&h, &params.output);
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    e1 / (e0 + e1)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BruteScore {
    pub collisions: usize,
    pub dfn: usize,
    pub dd: Vec<usize>,
    pub fpn: usize,
}

/// Sample-by-sample event scorer. The false-positive count is an exact
/// minimum cover found by dynamic programming.
pub fn brute_force_score(dec: &[u8], lab: &[u8], window: usize, gap: usize) -> BruteScore {
    let n = dec.len();
    let mut intervals = Vec::new();
    for t in 0..n {
        if lab[t] == 1 && (t == 0 || lab[t - 1] == 0) {
            let mut e = t;
            while e + 1 < n && lab[e + 1] == 1 {
                e += 1;
            }
            intervals.push((t, e));
        }
    }
    let mut dd = Vec::new();
    let mut dfn = 0;
    for &(s, _) in &intervals {
        match (s..n).filter(|&t| t <= s + window).find(|&t| dec[t] == 1) {
            Some(t) => dd.push(t - s),
            None => dfn += 1,
        }
    }
    let mut ends = Vec::new();
    for t in 0..n {
        let is_end = dec[t] == 1 && (t + 1 == n || dec[t + 1] == 0);
        let covered = intervals.iter().any(|&(s, e)| t >= s && t <= e.max(s + window));
        if is_end && !covered {
            ends.push(t);
        }
    }
    let mut best = vec![usize::MAX; ends.len() + 1];
    best[0] = 0;
    for j in 0..ends.len() {
        let mut k = j;
        while k < ends.len() && ends[k] < ends[j] + gap.max(1) {
            best[k + 1] = best[k + 1].min(best[j] + 1);
            k += 1;
        }
    }
    BruteScore { collisions: intervals.len(), dfn, dd, fpn: best[ends.len()] }
}
