//! Forward and backward passes through the fixed topology.
//!
//! Branch: `conv(16) → GELU → pool → conv(32) → GELU → pool → flatten → FC → GELU`.
//! Branch outputs are concatenated into `tokens × token_dim` features, passed
//! through single-head self-attention when enabled, then `FC(64) → GELU →
//! FC(2) → softmax`.

use std::cell::RefCell;

use rayon::prelude::*;

use super::ModelParameters;
use crate::data::InputFrame;
use crate::error::{ensure_finite, Error, Result};
use crate::kernels::{
    self, bce_loss, bce_loss_grad, conv1d_dilated, conv1d_dilated_backward, gelu_backward,
    gelu_map, linear, linear_backward, maxpool1d, maxpool1d_backward, self_attention,
    self_attention_backward, softmax, softmax_backward, AttentionCache, FeatureMap, PoolIndices,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub p_no_collision: f64,
    pub p_collision: f64,
}

#[derive(Debug, Clone)]
pub struct BranchCache {
    pub input: FeatureMap,
    pub conv1_pre: FeatureMap,
    pub pool1_idx: PoolIndices,
    pub pool1_out: FeatureMap,
    pub conv2_pre: FeatureMap,
    pub pool2_idx: PoolIndices,
    pub flat: Vec<f64>,
    pub fc_pre: Vec<f64>,
}

impl BranchCache {
    /// Smallest gap between the two candidates of any pooling window.
    fn pool_margin(&self) -> f64 {
        let margin = |pre: &FeatureMap| {
            let act = gelu_map(pre);
            (0..act.channels())
                .flat_map(|c| {
                    let row = act.row(c).to_vec();
                    (0..row.len() / 2).map(move |j| (row[2 * j] - row[2 * j + 1]).abs())
                })
                .fold(f64::INFINITY, f64::min)
        };
        margin(&self.conv1_pre).min(margin(&self.conv2_pre))
    }
}

/// Everything backward needs. Borrowing the parameters keeps the cache tied
/// to the exact weights that produced it.
#[derive(Debug, Clone)]
pub struct ActivationCache<'a> {
    pub params: &'a ModelParameters,
    pub branches: Vec<BranchCache>,
    pub fused: Vec<f64>,
    pub attention: Option<(FeatureMap, AttentionCache)>,
    pub head_in: Vec<f64>,
    pub head_pre: Vec<f64>,
    pub head_out: Vec<f64>,
    pub probs: Vec<f64>,
}

impl ActivationCache<'_> {
    pub fn prediction(&self) -> Prediction {
        Prediction {
            p_no_collision: self.probs[0],
            p_collision: self.probs[1],
        }
    }

    pub fn pool_margin(&self) -> f64 {
        self.branches.iter().map(BranchCache::pool_margin).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone)]
pub struct ModelGradients {
    pub params: ModelParameters,
    /// Gradient w.r.t. the frame values, in frame layout.
    pub frame: Vec<f64>,
}

fn branch_forward(br: &super::BranchParams, input: FeatureMap) -> Result<(BranchCache, Vec<f64>)> {
    let conv1_pre = conv1d_dilated(&input, &br.conv1)?;
    let (pool1_out, pool1_idx) = maxpool1d(&gelu_map(&conv1_pre))?;
    let conv2_pre = conv1d_dilated(&pool1_out, &br.conv2)?;
    let (pool2_out, pool2_idx) = maxpool1d(&gelu_map(&conv2_pre))?;
    let flat = pool2_out.into_values();
    let fc_pre = linear(&flat, &br.fc)?;
    let out = fc_pre.iter().map(|&x| kernels::gelu(x)).collect();
    Ok((
        BranchCache {
            input,
            conv1_pre,
            pool1_idx,
            pool1_out,
            conv2_pre,
            pool2_idx,
            flat,
            fc_pre,
        },
        out,
    ))
}

/// Token-major vector (`tokens × dim`) to a `dim × tokens` column matrix.
fn to_columns(v: &[f64], tokens: usize, dim: usize) -> FeatureMap {
    let mut m = vec![0.0; v.len()];
    for t in 0..tokens {
        for c in 0..dim {
            m[c * tokens + t] = v[t * dim + c];
        }
    }
    FeatureMap::from_raw(dim, tokens, m)
}

fn from_columns(m: &FeatureMap) -> Vec<f64> {
    let (dim, tokens) = (m.channels(), m.length());
    let mut v = vec![0.0; dim * tokens];
    for t in 0..tokens {
        for c in 0..dim {
            v[t * dim + c] = m.get(c, t);
        }
    }
    v
}

pub fn forward<'a>(params: &'a ModelParameters, frame: &InputFrame) -> Result<(Prediction, ActivationCache<'a>)> {
    forward_values(params, &frame.values)
}

/// Forward pass on raw frame values laid out `[joint][channel][step]`.
pub fn forward_values<'a>(
    params: &'a ModelParameters,
    values: &[f64],
) -> Result<(Prediction, ActivationCache<'a>)> {
    let cfg = &params.config;
    if values.len() != cfg.frame_len() || params.branches.len() != cfg.branches() {
        return Err(Error::Shape(format!(
            "frame has {} values, model expects {}",
            values.len(),
            cfg.frame_len()
        )));
    }
    ensure_finite(values, "input frame")?;
    let in_ch = cfg.branch_in_channels();
    let chunk = in_ch * cfg.window_steps;

    let mut branches = Vec::with_capacity(cfg.branches());
    let mut fused = Vec::with_capacity(cfg.fused_dim());
    for (b, br) in params.branches.iter().enumerate() {
        let input = FeatureMap::from_raw(in_ch, cfg.window_steps, values[b * chunk..(b + 1) * chunk].to_vec());
        let (cache, out) = branch_forward(br, input)?;
        branches.push(cache);
        fused.extend(out);
    }

    let (head_in, attention) = match &params.attention {
        Some(att) => {
            let tokens = to_columns(&fused, cfg.tokens(), cfg.token_dim());
            let (z, cache) = self_attention(&tokens, att)?;
            (from_columns(&z), Some((tokens, cache)))
        }
        None => (fused.clone(), None),
    };
    let head_pre = linear(&head_in, &params.head)?;
    let head_out: Vec<f64> = head_pre.iter().map(|&x| kernels::gelu(x)).collect();
    let logits = linear(&head_out, &params.output)?;
    ensure_finite(&logits, "logits")?;
    let probs = softmax(&logits);

    let cache = ActivationCache {
        params,
        branches,
        fused,
        attention,
        head_in,
        head_pre,
        head_out,
        probs,
    };
    Ok((cache.prediction(), cache))
}

/// Gradients of `bce(p_collision, target)` w.r.t. every parameter and the frame.
pub fn backward(cache: &ActivationCache<'_>, target: u8) -> Result<ModelGradients> {
    let params = cache.params;
    let cfg = &params.config;
    if cache.branches.len() != params.branches.len() || cache.probs.len() != cfg.classes {
        return Err(Error::Shape("activation cache does not match the model".into()));
    }
    let mut grads = params.zeros_like();

    let mut g_probs = vec![0.0; cfg.classes];
    g_probs[1] = bce_loss_grad(cache.probs[1], target)?;
    let g_logits = softmax_backward(&cache.probs, &g_probs);

    let g = linear_backward(&cache.head_out, &params.output, &g_logits)?;
    grads.output.weights = g.weights;
    grads.output.bias = g.bias;
    let g_head_pre = gelu_backward(&cache.head_pre, &g.input);
    let g = linear_backward(&cache.head_in, &params.head, &g_head_pre)?;
    grads.head.weights = g.weights;
    grads.head.bias = g.bias;

    let g_fused = match (&params.attention, &cache.attention) {
        (Some(att), Some((tokens, att_cache))) => {
            let g_z = to_columns(&g.input, cfg.tokens(), cfg.token_dim());
            let ga = self_attention_backward(tokens, att, att_cache, &g_z)?;
            let slot = grads.attention.as_mut().expect("attention grads mirror params");
            slot.w_query = ga.w_query;
            slot.w_key = ga.w_key;
            slot.w_value = ga.w_value;
            from_columns(&ga.input)
        }
        (None, None) => g.input,
        _ => return Err(Error::Shape("attention cache does not match the model".into())),
    };

    let fc_dim = cfg.branch_fc_dim();
    let mut g_frame = Vec::with_capacity(cfg.frame_len());
    for (b, (br, bc)) in params.branches.iter().zip(&cache.branches).enumerate() {
        let g_fc_pre = gelu_backward(&bc.fc_pre, &g_fused[b * fc_dim..(b + 1) * fc_dim]);
        let g = linear_backward(&bc.flat, &br.fc, &g_fc_pre)?;
        let slot = &mut grads.branches[b];
        slot.fc.weights = g.weights;
        slot.fc.bias = g.bias;

        let pooled = cfg.pooled_lengths();
        let g_pool2 = FeatureMap::from_raw(cfg.conv_filters[1], pooled[1], g.input);
        let g_act2 = maxpool1d_backward(&g_pool2, &bc.pool2_idx)?;
        let g_conv2 = FeatureMap::from_raw(
            g_act2.channels(),
            g_act2.length(),
            gelu_backward(bc.conv2_pre.values(), g_act2.values()),
        );
        let g = conv1d_dilated_backward(&bc.pool1_out, &br.conv2, &g_conv2)?;
        slot.conv2.weights = g.weights;
        slot.conv2.bias = g.bias;

        let g_act1 = maxpool1d_backward(&g.input, &bc.pool1_idx)?;
        let g_conv1 = FeatureMap::from_raw(
            g_act1.channels(),
            g_act1.length(),
            gelu_backward(bc.conv1_pre.values(), g_act1.values()),
        );
        let g = conv1d_dilated_backward(&bc.input, &br.conv1, &g_conv1)?;
        slot.conv1.weights = g.weights;
        slot.conv1.bias = g.bias;
        g_frame.extend(g.input.into_values());
    }

    Ok(ModelGradients {
        params: grads,
        frame: g_frame,
    })
}

/// `1` iff `p_collision ≥ threshold`.
pub fn predict(params: &ModelParameters, frame: &InputFrame, threshold: f64) -> Result<u8> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Input(format!("threshold must lie in (0, 1), got {threshold}")));
    }
    let (p, _) = forward(params, frame)?;
    Ok((p.p_collision >= threshold) as u8)
}

/// Full network + BCE as a scalar function of `[parameters…, frame…]`.
pub struct ModelObjective {
    template: ModelParameters,
    pub label: u8,
}

impl ModelObjective {
    pub fn new(template: ModelParameters, label: u8) -> Self {
        Self { template, label }
    }

    pub fn point(&self, params: &ModelParameters, frame: &[f64]) -> Vec<f64> {
        let mut x = params.flatten();
        x.extend_from_slice(frame);
        x
    }

    /// Runs `f` on a per-thread copy of the template loaded with the
    /// parameter part of `x`.
    fn with_params<T>(&self, x: &[f64], f: impl FnOnce(&ModelParameters, &[f64]) -> Result<T>) -> Result<T> {
        thread_local! {
            static SCRATCH: RefCell<Option<ModelParameters>> = const { RefCell::new(None) };
        }
        let n = self.template.num_parameters();
        if x.len() != n + self.template.config.frame_len() {
            return Err(Error::Shape("objective point has the wrong length".into()));
        }
        SCRATCH.with(|cell| {
            let mut slot = cell.borrow_mut();
            let reuse = matches!(&*slot, Some(p) if p.config == self.template.config);
            if !reuse {
                *slot = Some(self.template.clone());
            }
            let params = slot.as_mut().expect("scratch initialized above");
            params.assign_flat(&x[..n])?;
            f(params, &x[n..])
        })
    }
}

impl kernels::Differentiable for ModelObjective {
    fn dim(&self) -> usize {
        self.template.num_parameters() + self.template.config.frame_len()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.with_params(x, |p, frame| {
            let (pred, _) = forward_values(p, frame)?;
            bce_loss(pred.p_collision, self.label)
        })
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.with_params(x, |p, frame| {
            let (_, cache) = forward_values(p, frame)?;
            let g = backward(&cache, self.label)?;
            let mut out = g.params.flatten();
            out.extend(g.frame);
            Ok(out)
        })
    }

    /// Loads the parameters once per worker and perturbs entries in place.
    fn central_differences(&self, x: &[f64], h: f64) -> Result<Vec<f64>> {
        let n = self.template.num_parameters();
        if x.len() != self.dim() {
            return Err(Error::Shape("objective point has the wrong length".into()));
        }
        (0..x.len())
            .into_par_iter()
            .map_init(
                || {
                    let mut p = self.template.clone();
                    p.assign_flat(&x[..n]).expect("length checked above");
                    (p, x[n..].to_vec())
                },
                |(p, frame), i| {
                    let mut loss_at = |v: f64| {
                        match i.checked_sub(n) {
                            Some(j) => frame[j] = v,
                            None => *p.flat_entry_mut(i).expect("index below parameter count") = v,
                        }
                        bce_loss(forward_values(p, frame)?.0.p_collision, self.label)
                    };
                    let diff = (loss_at(x[i] + h)? - loss_at(x[i] - h)?) / (2.0 * h);
                    match i.checked_sub(n) {
                        Some(j) => frame[j] = x[i],
                        None => *p.flat_entry_mut(i).expect("index below parameter count") = x[i],
                    }
                    Ok(diff)
                },
            )
            .collect()
    }
}
