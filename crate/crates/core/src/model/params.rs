use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ModelConfig, KERNEL_SIZE};
use crate::error::{ensure_finite, Error, Result};
use crate::kernels::{AttentionParams, ConvParams, LinearParams};

/// Convolution stack plus fully connected layer for one input branch.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchParams {
    pub conv1: ConvParams,
    pub conv2: ConvParams,
    pub fc: LinearParams,
}

/// All learnable tensors of one network.
///
/// The same type doubles as the gradient container returned by backward.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    pub config: ModelConfig,
    pub seed: u64,
    /// One per joint when modularized, otherwise a single shared branch.
    pub branches: Vec<BranchParams>,
    pub attention: Option<AttentionParams>,
    pub head: LinearParams,
    pub output: LinearParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorView<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: &'a [f64],
}

impl ModelParameters {
    /// All-zero parameters shaped for `config`.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let branch = BranchParams {
            conv1: ConvParams::zeros(
                config.conv_filters[0],
                config.branch_in_channels(),
                KERNEL_SIZE,
                config.dilations[0],
            ),
            conv2: ConvParams::zeros(
                config.conv_filters[1],
                config.conv_filters[0],
                KERNEL_SIZE,
                config.dilations[1],
            ),
            fc: LinearParams::zeros(config.branch_fc_dim(), config.branch_flatten_dim()),
        };
        Ok(Self {
            config,
            seed: 0,
            branches: vec![branch; config.branches()],
            attention: config.use_attention.then(|| {
                AttentionParams::zeros(config.token_dim(), config.token_dim(), config.token_dim())
            }),
            head: LinearParams::zeros(config.head_fc_dim, config.fused_dim()),
            output: LinearParams::zeros(config.classes, config.head_fc_dim),
        })
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = Self::zeros(self.config).expect("config was validated on construction");
        z.seed = self.seed;
        z
    }

    /// Every tensor in a fixed order, with names and shapes.
    pub fn tensors<'a>(&'a self) -> Vec<TensorView<'a>> {
        let mut out: Vec<TensorView<'a>> = Vec::new();
        let mut push = |name: String, shape: Vec<usize>, values: &'a [f64]| {
            out.push(TensorView { name, shape, values });
        };
        for (b, br) in self.branches.iter().enumerate() {
            for (tag, conv) in [("conv1", &br.conv1), ("conv2", &br.conv2)] {
                push(
                    format!("branch{b}.{tag}.weight"),
                    vec![conv.out_channels, conv.in_channels, conv.kernel_size],
                    &conv.weights,
                );
                push(format!("branch{b}.{tag}.bias"), vec![conv.out_channels], &conv.bias);
            }
            push(format!("branch{b}.fc.weight"), vec![br.fc.out_dim, br.fc.in_dim], &br.fc.weights);
            push(format!("branch{b}.fc.bias"), vec![br.fc.out_dim], &br.fc.bias);
        }
        if let Some(att) = &self.attention {
            push("attention.w_query".into(), vec![att.key_dim, att.input_dim], &att.w_query);
            push("attention.w_key".into(), vec![att.key_dim, att.input_dim], &att.w_key);
            push("attention.w_value".into(), vec![att.value_dim, att.input_dim], &att.w_value);
        }
        for (tag, lin) in [("head", &self.head), ("output", &self.output)] {
            push(format!("{tag}.weight"), vec![lin.out_dim, lin.in_dim], &lin.weights);
            push(format!("{tag}.bias"), vec![lin.out_dim], &lin.bias);
        }
        out
    }

    /// Mutable tensors in the same order as [`tensors`](Self::tensors).
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for br in &mut self.branches {
            out.push(&mut br.conv1.weights);
            out.push(&mut br.conv1.bias);
            out.push(&mut br.conv2.weights);
            out.push(&mut br.conv2.bias);
            out.push(&mut br.fc.weights);
            out.push(&mut br.fc.bias);
        }
        if let Some(att) = &mut self.attention {
            out.push(&mut att.w_query);
            out.push(&mut att.w_key);
            out.push(&mut att.w_value);
        }
        out.push(&mut self.head.weights);
        out.push(&mut self.head.bias);
        out.push(&mut self.output.weights);
        out.push(&mut self.output.bias);
        out
    }

    /// Tensor values in the order of [`tensors`](Self::tensors), without names.
    fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for br in &self.branches {
            out.extend([&br.conv1.weights, &br.conv1.bias, &br.conv2.weights, &br.conv2.bias, &br.fc.weights, &br.fc.bias].map(Vec::as_slice));
        }
        if let Some(att) = &self.attention {
            out.extend([&att.w_query, &att.w_key, &att.w_value].map(Vec::as_slice));
        }
        out.extend([&self.head.weights, &self.head.bias, &self.output.weights, &self.output.bias].map(Vec::as_slice));
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.slices().iter().map(|t| t.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.slices().concat()
    }

    /// Mutable reference to entry `index` of the flattened parameters.
    pub fn flat_entry_mut(&mut self, index: usize) -> Option<&mut f64> {
        let mut rest = index;
        for t in self.tensors_mut() {
            if rest < t.len() {
                return Some(&mut t[rest]);
            }
            rest -= t.len();
        }
        None
    }

    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_parameters() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.num_parameters(),
                flat.len()
            )));
        }
        let mut rest = flat;
        for t in self.tensors_mut() {
            let (head, tail) = rest.split_at(t.len());
            t.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    /// `self += other`, tensor by tensor.
    pub fn add_assign(&mut self, other: &ModelParameters) -> Result<()> {
        let src = other.slices();
        let dst = self.tensors_mut();
        if src.len() != dst.len() || dst.iter().zip(&src).any(|(d, s)| d.len() != s.len()) {
            return Err(Error::Shape("parameter sets have different layouts".into()));
        }
        for (d, s) in dst.into_iter().zip(src) {
            for (a, b) in d.iter_mut().zip(s) {
                *a += b;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            for v in t.iter_mut() {
                *v *= factor;
            }
        }
    }

    pub fn ensure_finite(&self) -> Result<()> {
        for t in self.tensors() {
            ensure_finite(t.values, &t.name)?;
        }
        Ok(())
    }
}

/// Weights uniform in `±√(1/fan_in)`, biases zero, drawn from a ChaCha stream
/// seeded with `seed` in tensor order.
pub fn build_model(config: ModelConfig, seed: u64) -> Result<ModelParameters> {
    let mut params = ModelParameters::zeros(config)?;
    params.seed = seed;
    let fan_ins: Vec<Option<usize>> = params
        .tensors()
        .iter()
        .map(|t| match t.shape.as_slice() {
            [_, fan_in] => Some(*fan_in),
            [_, in_ch, k] => Some(in_ch * k),
            _ => None,
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (tensor, fan_in) in params.tensors_mut().into_iter().zip(fan_ins) {
        if let Some(fan_in) = fan_in {
            let bound = (1.0 / fan_in as f64).sqrt();
            for w in tensor.iter_mut() {
                *w = rng.gen_range(-bound..bound);
            }
        }
    }
    Ok(params)
}

/// Learnable scalar count, from the declared layer shapes.
pub fn count_parameters(config: &ModelConfig) -> usize {
    let conv = |out: usize, inp: usize| out * inp * KERNEL_SIZE + out;
    let dense = |out: usize, inp: usize| out * inp + out;
    let [f1, f2] = config.conv_filters;
    let branch = conv(f1, config.branch_in_channels())
        + conv(f2, f1)
        + dense(config.branch_fc_dim(), config.branch_flatten_dim());
    let attention = if config.use_attention {
        3 * config.token_dim() * config.token_dim()
    } else {
        0
    };
    config.branches() * branch
        + attention
        + dense(config.head_fc_dim, config.fused_dim())
        + dense(config.classes, config.head_fc_dim)
}
