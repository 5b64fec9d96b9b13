use serde::{Deserialize, Serialize};

use super::{axpy, dot};
use crate::error::{Error, Result};

/// Dense layer `y = W·x + b` with `W` stored row-major (`out_dim × in_dim`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    pub out_dim: usize,
    pub in_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LinearParams {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self {
            out_dim,
            in_dim,
            weights: vec![0.0; out_dim * in_dim],
            bias: vec![0.0; out_dim],
        }
    }

    fn check(&self) -> Result<()> {
        if self.out_dim == 0 || self.in_dim == 0 {
            return Err(Error::Shape("linear dims must be positive".into()));
        }
        if self.weights.len() != self.out_dim * self.in_dim || self.bias.len() != self.out_dim {
            return Err(Error::Shape(format!(
                "linear {}x{} has {} weights / {} biases",
                self.out_dim,
                self.in_dim,
                self.weights.len(),
                self.bias.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearGrads {
    pub input: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

pub fn linear(x: &[f64], params: &LinearParams) -> Result<Vec<f64>> {
    params.check()?;
    if x.len() != params.in_dim {
        return Err(Error::Shape(format!(
            "linear expects input of length {}, got {}",
            params.in_dim,
            x.len()
        )));
    }
    Ok(params
        .weights
        .chunks_exact(params.in_dim)
        .zip(&params.bias)
        .map(|(row, b)| b + dot(row, x))
        .collect())
}

pub fn linear_backward(x: &[f64], params: &LinearParams, grad_out: &[f64]) -> Result<LinearGrads> {
    params.check()?;
    if x.len() != params.in_dim || grad_out.len() != params.out_dim {
        return Err(Error::Shape("linear backward shape mismatch".into()));
    }
    let mut g_in = vec![0.0; params.in_dim];
    let mut g_w = vec![0.0; params.weights.len()];
    for (o, &g) in grad_out.iter().enumerate() {
        let row = &params.weights[o * params.in_dim..(o + 1) * params.in_dim];
        let g_row = &mut g_w[o * params.in_dim..(o + 1) * params.in_dim];
        for (gw, &xj) in g_row.iter_mut().zip(x) {
            *gw = g * xj;
        }
        axpy(g, row, &mut g_in);
    }
    Ok(LinearGrads {
        input: g_in,
        weights: g_w,
        bias: grad_out.to_vec(),
    })
}
